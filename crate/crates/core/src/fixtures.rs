//! Shipped example models, used by tests, examples and the CLI presets.

use crate::model::{box_load, KinematicModel};
use crate::motor::{MotorCatalog, MotorSpec};
use crate::state::Configuration;

pub const CHAIN: &str = include_str!("../../../assets/models/chain.json");
pub const TOY_ROBOT: &str = include_str!("../../../assets/models/toy_robot.json");
pub const HUMAN_166: &str = include_str!("../../../assets/models/human_166.json");
pub const HUMAN_168: &str = include_str!("../../../assets/models/human_168.json");
pub const HUMAN_178: &str = include_str!("../../../assets/models/human_178.json");
pub const HUMAN_182: &str = include_str!("../../../assets/models/human_182.json");
pub const ARM_HUMAN: &str = include_str!("../../../assets/models/arm_human.json");
pub const ARM_ROBOT: &str = include_str!("../../../assets/models/arm_robot.json");
pub const REFERENCE_HUMANOID: &str = include_str!("../../../assets/models/reference_humanoid.json");

fn parse(text: &str) -> KinematicModel {
    KinematicModel::from_json(text).expect("shipped model parses")
}

/// Two-link planar chain on a box base, links along +x, joints about +y.
pub fn chain_model() -> (KinematicModel, MotorCatalog) {
    (parse(CHAIN), MotorCatalog::reference())
}

pub fn chain_configuration(q1: f64, q2: f64) -> Configuration {
    let mut q = Configuration::neutral(2);
    q.joints[0] = q1;
    q.joints[1] = q2;
    q
}

pub fn free_box() -> (KinematicModel, MotorCatalog) {
    (
        box_load("free_box", 2.0, [0.3, 0.2, 0.1], &[]).expect("valid box"),
        MotorCatalog::reference(),
    )
}

pub fn toy_robot() -> KinematicModel {
    parse(TOY_ROBOT)
}

/// Toy human by height in centimeters (166, 168, 178 or 182).
pub fn human(height_cm: u32) -> KinematicModel {
    parse(match height_cm {
        166 => HUMAN_166,
        168 => HUMAN_168,
        178 => HUMAN_178,
        182 => HUMAN_182,
        other => panic!("no shipped human of height {other} cm"),
    })
}

pub fn reference_humanoid() -> KinematicModel {
    parse(REFERENCE_HUMANOID)
}

/// Direct-drive motor used by the single-joint arm agents.
pub fn unit_motor() -> MotorSpec {
    MotorSpec {
        id: "unit".into(),
        inv_gear_ratio: 1.0,
        rotor_inertia: 1e-4,
        torque_min: -1000.0,
        torque_max: 1000.0,
        viscous_friction: 0.0,
    }
}

/// Reference catalog plus the direct-drive motor.
pub fn catalog_with_unit() -> MotorCatalog {
    let mut c = MotorCatalog::reference();
    c.motors.push(unit_motor());
    c
}

pub fn arm_robot() -> (KinematicModel, MotorCatalog) {
    (parse(ARM_ROBOT), catalog_with_unit())
}

pub fn arm_human() -> KinematicModel {
    parse(ARM_HUMAN)
}
