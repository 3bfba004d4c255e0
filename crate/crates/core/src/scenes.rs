//! Ready-made collaborative scenes built from the shipped models.

use crate::coupled::{AgentRole, CompositeSystem, ContactSpec, Transmission};
use crate::error::Result;
use crate::fixtures;
use crate::friction::FrictionModel;
use crate::kinematics::ParametrizedModel;
use crate::model::{box_load, KinematicModel};
use crate::motor::MotorCatalog;
use crate::posture::TaskSpec;

/// Side length and thickness of the shipped square load (m).
pub const LOAD_SIZE: [f64; 3] = [0.5, 0.5, 0.025];

/// Box load with grasp frames for both two-handed agents.
pub fn two_hand_load(mass: f64) -> Result<KinematicModel> {
    box_load(
        "load",
        mass,
        LOAD_SIZE,
        &[
            ("human_l".into(), [-0.25, 0.18, 0.0]),
            ("human_r".into(), [-0.25, -0.18, 0.0]),
            ("robot_l".into(), [0.25, -0.14, 0.0]),
            ("robot_r".into(), [0.25, 0.14, 0.0]),
        ],
    )
}

pub fn foot_friction() -> FrictionModel {
    FrictionModel::rectangle(0.8, [-0.05, 0.15], [-0.04, 0.04])
}

pub fn stand_friction() -> FrictionModel {
    FrictionModel::rectangle(0.8, [-0.15, 0.15], [-0.1, 0.1])
}

/// Feet on the ground and both hands on the load, full 6D grasps.
pub fn two_hand_contacts() -> Vec<ContactSpec> {
    let mut c = Vec::new();
    for (owner, hands) in [
        (AgentRole::Human, ["human_l", "human_r"]),
        (AgentRole::Robot, ["robot_l", "robot_r"]),
    ] {
        c.push(ContactSpec::environment(owner, "l_sole", foot_friction()));
        c.push(ContactSpec::environment(owner, "r_sole", foot_friction()));
        c.push(ContactSpec::grasp(owner, "l_hand", hands[0], Transmission::Full));
        c.push(ContactSpec::grasp(owner, "r_hand", hands[1], Transmission::Full));
    }
    c
}

/// A shipped toy human and the toy robot lifting a box of `load_mass` kg.
pub fn toy_scene(human: &KinematicModel, robot: &ParametrizedModel, load_mass: f64) -> Result<CompositeSystem> {
    let catalog = MotorCatalog::reference();
    CompositeSystem::new(
        ParametrizedModel::nominal(human, &catalog)?,
        robot.clone(),
        ParametrizedModel::nominal(&two_hand_load(load_mass)?, &catalog)?,
        two_hand_contacts(),
    )
}

/// Tasks of the shipped toy scene: load heights 0.8, 1.0 and 1.2 m.
pub fn toy_task() -> TaskSpec {
    TaskSpec::new(vec![0.8, 1.0, 1.2])
}

/// Two single-joint arms on stands holding a rod-like load at its ends with
/// point (force-only) grasps.
pub fn arm_pair(load_mass: f64) -> Result<CompositeSystem> {
    let (robot, catalog) = fixtures::arm_robot();
    let load = box_load(
        "load",
        load_mass,
        [0.5, 0.1, 0.02],
        &[("human".into(), [-0.25, 0.0, 0.0]), ("robot".into(), [0.25, 0.0, 0.0])],
    )?;
    CompositeSystem::new(
        ParametrizedModel::nominal(&fixtures::arm_human(), &catalog)?,
        ParametrizedModel::nominal(&robot, &catalog)?,
        ParametrizedModel::nominal(&load, &catalog)?,
        vec![
            ContactSpec::environment(AgentRole::Human, "sole", stand_friction()),
            ContactSpec::environment(AgentRole::Robot, "sole", stand_friction()),
            ContactSpec::grasp(AgentRole::Human, "hand", "human", Transmission::Force),
            ContactSpec::grasp(AgentRole::Robot, "hand", "robot", Transmission::Force),
        ],
    )
}

/// Shoulder height of the arm stands above the ground (m).
pub const ARM_SHOULDER_HEIGHT: f64 = 1.0;
/// Shoulder to hand distance of the arm agents (m).
pub const ARM_LENGTH: f64 = 0.5;
