//! Model description files: links, joints, frames, parameter groups and the
//! left/right symmetry map.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::rpy_to_rotation;
use crate::motor::MotorCatalog;
use crate::shape::ShapePrimitive;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Robot,
    Human,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// Rigid placement given as translation plus fixed-axis roll/pitch/yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Origin {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Origin {
    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.xyz)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rpy_to_rotation(&self.rpy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub shape: ShapePrimitive,
    /// Nominal density [kg/m³].
    pub density: f64,
    #[serde(default = "one")]
    pub length_multiplier: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_group: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Joint frame in the parent link frame.
    #[serde(default)]
    pub origin: Origin,
    pub axis: [f64; 3],
    /// Position limits `[s⁻, s⁺]`.
    pub limits: [f64; 2],
    /// Nominal catalog motor driving this joint (robots only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub name: String,
    pub link: String,
    #[serde(default)]
    pub origin: Origin,
}

/// Names of the hardware parameter groups, in chromosome order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterGroups {
    #[serde(default)]
    pub length: Vec<String>,
    #[serde(default)]
    pub density: Vec<String>,
    #[serde(default)]
    pub motor: Vec<String>,
}

/// One row of the symmetry map: `s[left] - sign * s[right] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryPair {
    pub left: String,
    pub right: String,
    #[serde(default = "one_i8")]
    pub sign: i8,
}

fn one_i8() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicModel {
    pub schema_version: u32,
    pub name: String,
    pub kind: ModelKind,
    pub base_link: String,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub frames: Vec<FrameSpec>,
    #[serde(default)]
    pub parameter_groups: ParameterGroups,
    #[serde(default)]
    pub symmetry: Vec<SymmetryPair>,
}

/// One validation finding with a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

pub mod codes {
    pub const SCHEMA_VERSION: &str = "schema.version";
    pub const DUPLICATE_NAME: &str = "schema.duplicate_name";
    pub const INVALID_SHAPE: &str = "link.invalid_shape";
    pub const INVALID_DENSITY: &str = "link.invalid_density";
    pub const UNKNOWN_LINK: &str = "topology.unknown_link";
    pub const CYCLE: &str = "topology.cycle";
    pub const MULTIPLE_PARENTS: &str = "topology.multiple_parents";
    pub const DISCONNECTED: &str = "topology.disconnected";
    pub const BASE_HAS_PARENT: &str = "topology.base_has_parent";
    pub const JOINT_AXIS: &str = "joint.invalid_axis";
    pub const JOINT_LIMITS: &str = "joint.invalid_limits";
    pub const MISSING_MOTOR: &str = "motor.missing_binding";
    pub const UNKNOWN_MOTOR: &str = "motor.unknown_id";
    pub const UNEXPECTED_MOTOR: &str = "motor.unexpected_binding";
    pub const UNKNOWN_GROUP: &str = "group.unknown";
    pub const EMPTY_GROUP: &str = "group.empty";
    pub const SYMMETRY_JOINT: &str = "symmetry.unknown_joint";
    pub const SYMMETRY_SIGN: &str = "symmetry.invalid_sign";
    pub const SYMMETRY_UNSATISFIABLE: &str = "symmetry.unsatisfiable";
    pub const LOAD_JOINTS: &str = "load.has_joints";
}

impl KinematicModel {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn dofs(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_index(&self, name: &str) -> Result<usize> {
        self.joints
            .iter()
            .position(|j| j.name == name)
            .ok_or_else(|| Error::UnknownJoint(name.to_string()))
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Symmetry map A with one row per declared pair.
    pub fn symmetry_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.dofs();
        let mut a = DMatrix::zeros(self.symmetry.len(), n);
        for (r, pair) in self.symmetry.iter().enumerate() {
            a[(r, self.joint_index(&pair.left)?)] = 1.0;
            a[(r, self.joint_index(&pair.right)?)] -= f64::from(pair.sign);
        }
        Ok(a)
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.limits[0]).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.limits[1]).collect()
    }

    /// Runs every structural check; an empty list means the model is usable.
    pub fn diagnostics(&self, catalog: &MotorCatalog) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.schema_version != MODEL_SCHEMA_VERSION {
            out.push(Diagnostic::new(
                codes::SCHEMA_VERSION,
                format!("schema_version {} is not supported", self.schema_version),
            ));
        }
        check_unique(self.links.iter().map(|l| &l.name), "link", &mut out);
        check_unique(self.joints.iter().map(|j| &j.name), "joint", &mut out);
        check_unique(self.frames.iter().map(|f| &f.name), "frame", &mut out);

        for l in &self.links {
            if let Err(e) = l.shape.validate() {
                out.push(Diagnostic::new(codes::INVALID_SHAPE, format!("link `{}`: {e}", l.name)));
            }
            if !(l.density > 0.0) || !(l.length_multiplier > 0.0) {
                out.push(Diagnostic::new(
                    codes::INVALID_DENSITY,
                    format!("link `{}` needs positive density and length multiplier", l.name),
                ));
            }
            if let Some(g) = &l.length_group {
                if !self.parameter_groups.length.contains(g) {
                    out.push(Diagnostic::new(codes::UNKNOWN_GROUP, format!("length group `{g}`")));
                }
            }
            if let Some(g) = &l.density_group {
                if !self.parameter_groups.density.contains(g) {
                    out.push(Diagnostic::new(codes::UNKNOWN_GROUP, format!("density group `{g}`")));
                }
            }
        }
        for g in &self.parameter_groups.length {
            if !self.links.iter().any(|l| l.length_group.as_ref() == Some(g)) {
                out.push(Diagnostic::new(codes::EMPTY_GROUP, format!("length group `{g}` has no links")));
            }
        }
        for g in &self.parameter_groups.density {
            if !self.links.iter().any(|l| l.density_group.as_ref() == Some(g)) {
                out.push(Diagnostic::new(codes::EMPTY_GROUP, format!("density group `{g}` has no links")));
            }
        }
        for g in &self.parameter_groups.motor {
            if !self.joints.iter().any(|j| j.motor_group.as_ref() == Some(g)) {
                out.push(Diagnostic::new(codes::EMPTY_GROUP, format!("motor group `{g}` has no joints")));
            }
        }

        self.check_topology(&mut out);

        for j in &self.joints {
            let axis = Vector3::from(j.axis);
            if !((axis.norm() - 1.0).abs() < 1e-9) {
                out.push(Diagnostic::new(codes::JOINT_AXIS, format!("joint `{}` axis is not unit", j.name)));
            }
            if !(j.limits[0] < j.limits[1]) {
                out.push(Diagnostic::new(codes::JOINT_LIMITS, format!("joint `{}` limits", j.name)));
            }
            match self.kind {
                ModelKind::Robot => match &j.motor {
                    None => out.push(Diagnostic::new(
                        codes::MISSING_MOTOR,
                        format!("actuated joint `{}` has no motor", j.name),
                    )),
                    Some(id) if catalog.get(id).is_none() => out.push(Diagnostic::new(
                        codes::UNKNOWN_MOTOR,
                        format!("joint `{}` motor `{id}` is not in the catalog", j.name),
                    )),
                    _ => {}
                },
                _ => {
                    if j.motor.is_some() || j.motor_group.is_some() {
                        out.push(Diagnostic::new(
                            codes::UNEXPECTED_MOTOR,
                            format!("joint `{}` of a non-robot model has a motor", j.name),
                        ));
                    }
                }
            }
            if let Some(g) = &j.motor_group {
                if !self.parameter_groups.motor.contains(g) {
                    out.push(Diagnostic::new(codes::UNKNOWN_GROUP, format!("motor group `{g}`")));
                }
            }
        }
        if self.kind == ModelKind::Load && !self.joints.is_empty() {
            out.push(Diagnostic::new(codes::LOAD_JOINTS, "a load is a single rigid body"));
        }
        for f in &self.frames {
            if self.link_index(&f.link).is_none() {
                out.push(Diagnostic::new(
                    codes::UNKNOWN_LINK,
                    format!("frame `{}` on unknown link `{}`", f.name, f.link),
                ));
            }
        }
        self.check_symmetry(&mut out);
        out
    }

    fn check_topology(&self, out: &mut Vec<Diagnostic>) {
        if self.link_index(&self.base_link).is_none() {
            out.push(Diagnostic::new(
                codes::UNKNOWN_LINK,
                format!("base link `{}` not found", self.base_link),
            ));
            return;
        }
        let mut parent_of: HashMap<&str, &str> = HashMap::new();
        let mut ok = true;
        for j in &self.joints {
            for l in [&j.parent, &j.child] {
                if self.link_index(l).is_none() {
                    out.push(Diagnostic::new(
                        codes::UNKNOWN_LINK,
                        format!("joint `{}` references unknown link `{l}`", j.name),
                    ));
                    ok = false;
                }
            }
            if j.child == self.base_link {
                out.push(Diagnostic::new(
                    codes::BASE_HAS_PARENT,
                    format!("joint `{}` has the base link as child", j.name),
                ));
            }
            if parent_of.insert(j.child.as_str(), j.parent.as_str()).is_some() {
                out.push(Diagnostic::new(
                    codes::MULTIPLE_PARENTS,
                    format!("link `{}` has more than one parent joint", j.child),
                ));
                ok = false;
            }
        }
        if !ok {
            return;
        }
        // walk each link towards the base; revisiting a link means a cycle
        let mut reported_cycle = false;
        for l in &self.links {
            let mut seen = HashSet::new();
            let mut cur = l.name.as_str();
            loop {
                if !seen.insert(cur) {
                    if !reported_cycle {
                        out.push(Diagnostic::new(
                            codes::CYCLE,
                            format!("kinematic cycle through link `{cur}`"),
                        ));
                        reported_cycle = true;
                    }
                    break;
                }
                match parent_of.get(cur) {
                    Some(p) => cur = p,
                    None => {
                        if cur != self.base_link {
                            out.push(Diagnostic::new(
                                codes::DISCONNECTED,
                                format!("link `{}` is not connected to the base", l.name),
                            ));
                        }
                        break;
                    }
                }
            }
        }
    }

    fn check_symmetry(&self, out: &mut Vec<Diagnostic>) {
        for p in &self.symmetry {
            let (Ok(l), Ok(r)) = (self.joint_index(&p.left), self.joint_index(&p.right)) else {
                out.push(Diagnostic::new(
                    codes::SYMMETRY_JOINT,
                    format!("symmetry pair `{}`/`{}` names an unknown joint", p.left, p.right),
                ));
                continue;
            };
            if p.sign != 1 && p.sign != -1 {
                out.push(Diagnostic::new(codes::SYMMETRY_SIGN, format!("sign {} not in {{-1, 1}}", p.sign)));
                continue;
            }
            // s_l = sign * s_r must be reachable inside both limit intervals
            let [ll, lu] = self.joints[l].limits;
            let [rl, ru] = self.joints[r].limits;
            let (ml, mu) = if p.sign == 1 { (rl, ru) } else { (-ru, -rl) };
            if ll.max(ml) > lu.min(mu) || l == r {
                out.push(Diagnostic::new(
                    codes::SYMMETRY_UNSATISFIABLE,
                    format!("no position satisfies `{}` = {} `{}` within limits", p.left, p.sign, p.right),
                ));
            }
        }
    }

    /// Fails with the first diagnostic, if any.
    pub fn validate(&self, catalog: &MotorCatalog) -> Result<()> {
        match self.diagnostics(catalog).into_iter().next() {
            None => Ok(()),
            Some(d) => Err(Error::Model(format!("[{}] {}", d.code, d.message))),
        }
    }

    /// Sum of nominal lengths of the link shapes along their growth axes.
    pub fn nominal_extent(&self) -> f64 {
        use crate::shape::ShapeKind;
        self.links
            .iter()
            .map(|l| {
                let g = l.shape.growth_axis.index();
                let extent = match &l.shape.kind {
                    ShapeKind::Box { size } => size[g],
                    ShapeKind::Sphere { radius } => 2.0 * radius,
                    ShapeKind::Cylinder { radius, length, axis } => {
                        if axis.index() == g {
                            *length
                        } else {
                            2.0 * radius
                        }
                    }
                };
                extent * l.length_multiplier
            })
            .sum()
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a String>, what: &str, out: &mut Vec<Diagnostic>) {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for n in names {
        *seen.entry(n.as_str()).or_default() += 1;
    }
    for (n, c) in seen {
        if c > 1 {
            out.push(Diagnostic::new(codes::DUPLICATE_NAME, format!("{what} `{n}` declared {c} times")));
        }
    }
}

/// A single rigid box load with named grasp frames on its faces. The base
/// frame sits at the box center; density is derived from the mass.
pub fn box_load(name: &str, mass: f64, size: [f64; 3], grasps: &[(String, [f64; 3])]) -> Result<KinematicModel> {
    use crate::shape::{Axis, ShapeKind};
    if !(mass > 0.0) {
        return Err(Error::Model(format!("load `{name}` mass {mass} must be positive")));
    }
    let shape = ShapePrimitive {
        kind: ShapeKind::Box { size },
        center: [0.0; 3],
        growth_axis: Axis::Z,
    };
    shape.validate()?;
    let mut frames = vec![FrameSpec {
        name: "base".into(),
        link: "box".into(),
        origin: Origin::default(),
    }];
    frames.extend(grasps.iter().map(|(n, xyz)| FrameSpec {
        name: n.clone(),
        link: "box".into(),
        origin: Origin { xyz: *xyz, rpy: [0.0; 3] },
    }));
    Ok(KinematicModel {
        schema_version: MODEL_SCHEMA_VERSION,
        name: name.to_string(),
        kind: ModelKind::Load,
        base_link: "box".into(),
        links: vec![LinkSpec {
            name: "box".into(),
            density: mass / shape.volume(),
            shape,
            length_multiplier: 1.0,
            length_group: None,
            density_group: None,
        }],
        joints: vec![],
        frames,
        parameter_groups: ParameterGroups::default(),
        symmetry: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn codes_of(model: &KinematicModel, catalog: &MotorCatalog) -> Vec<String> {
        model.diagnostics(catalog).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn shipped_models_are_clean() {
        let catalog = MotorCatalog::reference();
        for m in [
            fixtures::toy_robot(),
            fixtures::human(178),
            fixtures::human(168),
            fixtures::human(182),
            fixtures::reference_humanoid(),
            fixtures::chain_model().0,
        ] {
            assert!(m.diagnostics(&catalog).is_empty(), "{}: {:?}", m.name, m.diagnostics(&catalog));
        }
        let (arm, cat) = fixtures::arm_robot();
        assert!(arm.diagnostics(&cat).is_empty());
    }

    #[test]
    fn reference_layout_dimensions() {
        let m = fixtures::reference_humanoid();
        let g = &m.parameter_groups;
        assert_eq!((g.length.len(), g.density.len(), g.motor.len()), (8, 8, 13));
    }

    #[test]
    fn cycle_is_reported() {
        let catalog = MotorCatalog::reference();
        let mut m = fixtures::chain_model().0;
        // link1 becomes its own grandparent
        m.joints[0].parent = "link2".into();
        let codes = codes_of(&m, &catalog);
        assert!(codes.iter().any(|c| c == codes::CYCLE), "{codes:?}");
    }

    #[test]
    fn missing_motor_is_reported() {
        let catalog = MotorCatalog::reference();
        let mut m = fixtures::toy_robot();
        m.joints[2].motor = None;
        assert!(codes_of(&m, &catalog).contains(&codes::MISSING_MOTOR.to_string()));
        m.joints[2].motor = Some("XL".into());
        assert!(codes_of(&m, &catalog).contains(&codes::UNKNOWN_MOTOR.to_string()));
    }

    #[test]
    fn symmetry_checks() {
        let catalog = MotorCatalog::reference();
        let mut m = fixtures::toy_robot();
        let a = m.symmetry_matrix().unwrap();
        assert_eq!(a.nrows(), 3);
        assert!(a.iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
        m.joints[1].limits = [1.0, 2.0];
        m.joints[0].limits = [-1.0, 0.5];
        assert!(codes_of(&m, &catalog).contains(&codes::SYMMETRY_UNSATISFIABLE.to_string()));
        m.symmetry[0].right = "nope".into();
        assert!(codes_of(&m, &catalog).contains(&codes::SYMMETRY_JOINT.to_string()));
    }

    #[test]
    fn disconnected_and_duplicates() {
        let catalog = MotorCatalog::reference();
        let mut m = fixtures::chain_model().0;
        m.joints.pop();
        assert!(codes_of(&m, &catalog).contains(&codes::DISCONNECTED.to_string()));
        let mut m = fixtures::chain_model().0;
        m.frames.push(m.frames[0].clone());
        assert!(codes_of(&m, &catalog).contains(&codes::DUPLICATE_NAME.to_string()));
        m.schema_version = 2;
        assert!(codes_of(&m, &catalog).contains(&codes::SCHEMA_VERSION.to_string()));
    }

    #[test]
    fn box_load_mass() {
        let m = box_load("b", 5.0, [0.5, 0.5, 0.025], &[("g".into(), [0.25, 0.0, 0.0])]).unwrap();
        let l = &m.links[0];
        assert!((l.density * l.shape.volume() - 5.0).abs() < 1e-12);
        assert!(m.diagnostics(&MotorCatalog::reference()).is_empty());
        assert!(box_load("b", 0.0, [0.5, 0.5, 0.025], &[]).is_err());
    }
}
