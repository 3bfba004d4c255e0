//! A model instantiated for one hardware parameter vector, with forward
//! kinematics and frame Jacobians in the mixed velocity representation.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};

use crate::error::{check_dim, Error, Result};
use crate::math::{axis_angle, quaternion_to_rotation, skew};
use crate::model::{JointKind, KinematicModel, ModelKind};
use crate::motor::{MotorCatalog, MotorSpec};
use crate::params::HardwareParams;
use crate::shape::{link_inertia, scale_along};
use crate::state::Configuration;

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone)]
pub(crate) struct Body {
    pub name: String,
    pub parent: Option<usize>,
    /// Joint (dof index) connecting this body to its parent.
    pub joint: Option<usize>,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia: Matrix3<f64>,
    /// Dof indices on the path from the base to this body.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub child: usize,
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub axis: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub name: String,
    pub body: usize,
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

/// A kinematic tree with all hardware parameters resolved.
#[derive(Debug, Clone)]
pub struct ParametrizedModel {
    pub name: String,
    pub kind: ModelKind,
    pub(crate) bodies: Vec<Body>,
    pub(crate) joints: Vec<Joint>,
    pub(crate) frames: Vec<Frame>,
    pub motors: Vec<Option<MotorSpec>>,
    pub lower_limits: DVector<f64>,
    pub upper_limits: DVector<f64>,
    pub symmetry: DMatrix<f64>,
    pub gravity: Vector3<f64>,
}

/// Pose of a frame in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

/// Body poses and joint axes for one configuration.
#[derive(Debug, Clone)]
pub struct KinematicsCache {
    pub(crate) base_position: Vector3<f64>,
    pub(crate) rotations: Vec<Matrix3<f64>>,
    pub(crate) origins: Vec<Vector3<f64>>,
    /// World axis of each joint.
    pub(crate) axes: Vec<Vector3<f64>>,
}

impl ParametrizedModel {
    pub fn new(model: &KinematicModel, params: &HardwareParams, catalog: &MotorCatalog) -> Result<Self> {
        model.validate(catalog)?;
        params.validate(model, catalog)?;
        let groups = &model.parameter_groups;
        let group_value = |names: &[String], g: &Option<String>, values: &[f64], default: f64| -> f64 {
            match g {
                Some(g) => names.iter().position(|n| n == g).map(|i| values[i]).unwrap_or(default),
                None => default,
            }
        };

        // topological order, base first
        let n_links = model.links.len();
        let mut order = vec![model.link_index(&model.base_link).expect("validated")];
        let mut parent_joint: Vec<Option<usize>> = vec![None; n_links];
        for (j, spec) in model.joints.iter().enumerate() {
            parent_joint[model.link_index(&spec.child).expect("validated")] = Some(j);
        }
        let mut k = 0;
        while k < order.len() {
            let cur = &model.links[order[k]].name;
            for spec in &model.joints {
                if &spec.parent == cur {
                    order.push(model.link_index(&spec.child).expect("validated"));
                }
            }
            k += 1;
        }
        let mut body_of_link = vec![usize::MAX; n_links];
        for (b, &l) in order.iter().enumerate() {
            body_of_link[l] = b;
        }

        let multiplier_of: Vec<f64> = model
            .links
            .iter()
            .map(|l| group_value(&groups.length, &l.length_group, &params.length_multipliers, l.length_multiplier))
            .collect();

        let mut bodies: Vec<Body> = Vec::with_capacity(n_links);
        for &l in &order {
            let spec = &model.links[l];
            let density = group_value(&groups.density, &spec.density_group, &params.densities, spec.density);
            let mp = link_inertia(&spec.shape, density, multiplier_of[l])?;
            let joint = parent_joint[l];
            let parent = joint.map(|j| body_of_link[model.link_index(&model.joints[j].parent).expect("validated")]);
            let mut support: Vec<usize> = parent.map(|p| bodies[p].support.clone()).unwrap_or_default();
            if let Some(j) = joint {
                support.push(j);
            }
            bodies.push(Body {
                name: spec.name.clone(),
                parent,
                joint,
                mass: mp.mass,
                com: mp.com,
                inertia: mp.inertia,
                support,
            });
        }

        let joints = model
            .joints
            .iter()
            .map(|spec| {
                let parent_link = model.link_index(&spec.parent).expect("validated");
                let growth = model.links[parent_link].shape.growth_axis;
                Joint {
                    name: spec.name.clone(),
                    kind: spec.kind,
                    child: body_of_link[model.link_index(&spec.child).expect("validated")],
                    translation: scale_along(&spec.origin.translation(), growth, multiplier_of[parent_link]),
                    rotation: spec.origin.rotation(),
                    axis: Vector3::from(spec.axis).normalize(),
                }
            })
            .collect();

        let frames = model
            .frames
            .iter()
            .map(|f| {
                let l = model.link_index(&f.link).expect("validated");
                Frame {
                    name: f.name.clone(),
                    body: body_of_link[l],
                    translation: scale_along(&f.origin.translation(), model.links[l].shape.growth_axis, multiplier_of[l]),
                    rotation: f.origin.rotation(),
                }
            })
            .collect();

        let motors = model
            .joints
            .iter()
            .map(|j| {
                if model.kind != ModelKind::Robot {
                    return None;
                }
                let id = match &j.motor_group {
                    Some(g) => groups
                        .motor
                        .iter()
                        .position(|n| n == g)
                        .map(|i| params.motor_ids[i].clone())
                        .or_else(|| j.motor.clone()),
                    None => j.motor.clone(),
                };
                id.and_then(|id| catalog.get(&id).cloned())
            })
            .collect();

        Ok(ParametrizedModel {
            name: model.name.clone(),
            kind: model.kind,
            bodies,
            joints,
            frames,
            motors,
            lower_limits: DVector::from_vec(model.lower_limits()),
            upper_limits: DVector::from_vec(model.upper_limits()),
            symmetry: model.symmetry_matrix()?,
            gravity: Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
        })
    }

    /// The model at its nominal parameters (unit multipliers, file densities
    /// and motors).
    pub fn nominal(model: &KinematicModel, catalog: &MotorCatalog) -> Result<Self> {
        Self::new(model, &HardwareParams::nominal(model)?, catalog)
    }

    pub fn with_gravity(mut self, gravity: Vector3<f64>) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn dofs(&self) -> usize {
        self.joints.len()
    }

    /// Size of ν, 6 + n.
    pub fn nv(&self) -> usize {
        self.joints.len() + 6
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn body_masses(&self) -> Vec<(String, f64)> {
        self.bodies.iter().map(|b| (b.name.clone(), b.mass)).collect()
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    pub fn frame_names(&self) -> Vec<String> {
        self.frames.iter().map(|f| f.name.clone()).collect()
    }

    /// Resolves a named frame (or link) to (body, offset translation, offset rotation).
    pub(crate) fn locate(&self, frame: &str) -> Result<(usize, Vector3<f64>, Matrix3<f64>)> {
        if let Some(f) = self.frames.iter().find(|f| f.name == frame) {
            return Ok((f.body, f.translation, f.rotation));
        }
        if let Some(b) = self.bodies.iter().position(|b| b.name == frame) {
            return Ok((b, Vector3::zeros(), Matrix3::identity()));
        }
        Err(Error::UnknownFrame(frame.to_string()))
    }

    pub fn has_frame(&self, frame: &str) -> bool {
        self.locate(frame).is_ok()
    }

    /// Upper bound on the distance between two frames over all
    /// configurations: the length of the tree path joining them.
    pub fn path_length(&self, a: &str, b: &str) -> Result<f64> {
        let (ba, ta, _) = self.locate(a)?;
        let (bb, tb, _) = self.locate(b)?;
        let ancestors = |mut body: usize| {
            let mut chain = vec![body];
            while let Some(p) = self.bodies[body].parent {
                chain.push(p);
                body = p;
            }
            chain
        };
        let (ca, cb) = (ancestors(ba), ancestors(bb));
        let common = *ca.iter().find(|x| cb.contains(x)).expect("tree has a single root");
        let mut length = ta.norm() + tb.norm();
        for &body in ca.iter().take_while(|&&x| x != common).chain(cb.iter().take_while(|&&x| x != common)) {
            let j = self.bodies[body].joint.expect("non-root body");
            let joint = &self.joints[j];
            length += joint.translation.norm();
            if joint.kind == JointKind::Prismatic {
                length += self.lower_limits[j].abs().max(self.upper_limits[j].abs());
            }
        }
        Ok(length)
    }

    pub fn kinematics(&self, q: &Configuration) -> Result<KinematicsCache> {
        check_dim("joint positions", self.dofs(), q.dofs())?;
        let n_b = self.bodies.len();
        let mut rotations = vec![Matrix3::identity(); n_b];
        let mut origins = vec![Vector3::zeros(); n_b];
        let mut axes = vec![Vector3::zeros(); self.dofs()];
        rotations[0] = quaternion_to_rotation(&q.base_quaternion)?;
        origins[0] = q.base_position;
        for b in 1..n_b {
            let body = &self.bodies[b];
            let (p, j) = (body.parent.expect("non-base body"), body.joint.expect("non-base body"));
            let joint = &self.joints[j];
            let r_joint = rotations[p] * joint.rotation;
            let o_joint = origins[p] + rotations[p] * joint.translation;
            let s = q.joints[j];
            axes[j] = r_joint * joint.axis;
            match joint.kind {
                JointKind::Revolute => {
                    rotations[b] = r_joint * axis_angle(&joint.axis, s);
                    origins[b] = o_joint;
                }
                JointKind::Prismatic => {
                    rotations[b] = r_joint;
                    origins[b] = o_joint + axes[j] * s;
                }
            }
        }
        Ok(KinematicsCache {
            base_position: q.base_position,
            rotations,
            origins,
            axes,
        })
    }

    pub fn frame_pose_cached(&self, kin: &KinematicsCache, frame: &str) -> Result<Pose> {
        let (b, t, r) = self.locate(frame)?;
        Ok(Pose {
            position: kin.origins[b] + kin.rotations[b] * t,
            rotation: kin.rotations[b] * r,
        })
    }

    pub fn forward_kinematics(&self, q: &Configuration, frame: &str) -> Result<Pose> {
        self.locate(frame)?;
        let kin = self.kinematics(q)?;
        self.frame_pose_cached(&kin, frame)
    }

    /// World center of mass of body `b`.
    pub(crate) fn body_com(&self, kin: &KinematicsCache, b: usize) -> Vector3<f64> {
        kin.origins[b] + kin.rotations[b] * self.bodies[b].com
    }

    /// Linear (rows 0..3) and angular (rows 3..6) Jacobian of the point `x`
    /// rigidly attached to body `b`.
    pub(crate) fn point_jacobian(&self, kin: &KinematicsCache, b: usize, x: &Vector3<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(6, self.nv());
        for k in 0..3 {
            jac[(k, k)] = 1.0;
            jac[(3 + k, 3 + k)] = 1.0;
        }
        let r = x - kin.base_position;
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&r)));
        for &j in &self.bodies[b].support {
            let z = kin.axes[j];
            let col = 6 + j;
            match self.joints[j].kind {
                JointKind::Revolute => {
                    let o = kin.origins[self.joints[j].child];
                    let lin = z.cross(&(x - o));
                    for k in 0..3 {
                        jac[(k, col)] = lin[k];
                        jac[(3 + k, col)] = z[k];
                    }
                }
                JointKind::Prismatic => {
                    for k in 0..3 {
                        jac[(k, col)] = z[k];
                    }
                }
            }
        }
        jac
    }

    pub fn frame_jacobian_cached(&self, kin: &KinematicsCache, frame: &str) -> Result<DMatrix<f64>> {
        let (b, t, _) = self.locate(frame)?;
        let x = kin.origins[b] + kin.rotations[b] * t;
        Ok(self.point_jacobian(kin, b, &x))
    }

    /// J ∈ ℝ^{6×(6+n)} mapping ν to the frame's (linear, angular) velocity.
    pub fn frame_jacobian(&self, q: &Configuration, frame: &str) -> Result<DMatrix<f64>> {
        self.locate(frame)?;
        let kin = self.kinematics(q)?;
        self.frame_jacobian_cached(&kin, frame)
    }

    /// Jᵀ w for a wrench w = (force, moment about the frame origin), without
    /// forming J.
    pub fn frame_jacobian_transpose_mul(
        &self,
        kin: &KinematicsCache,
        frame: &str,
        wrench: &Vector6<f64>,
    ) -> Result<DVector<f64>> {
        let (b, t, _) = self.locate(frame)?;
        let x = kin.origins[b] + kin.rotations[b] * t;
        let force = wrench.fixed_rows::<3>(0).into_owned();
        let moment = wrench.fixed_rows::<3>(3).into_owned();
        let mut out = DVector::zeros(self.nv());
        out.fixed_rows_mut::<3>(0).copy_from(&force);
        out.fixed_rows_mut::<3>(3).copy_from(&((x - kin.base_position).cross(&force) + moment));
        for &j in &self.bodies[b].support {
            let z = kin.axes[j];
            out[6 + j] = match self.joints[j].kind {
                JointKind::Revolute => {
                    let o = kin.origins[self.joints[j].child];
                    z.dot(&((x - o).cross(&force) + moment))
                }
                JointKind::Prismatic => z.dot(&force),
            };
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn zero_configuration_accumulates_offsets() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let pose = pm.forward_kinematics(&Configuration::neutral(2), "tip").unwrap();
        // base -> j1 at (0,0,0), link1 length 0.4 -> j2, link2 length 0.3 -> tip
        assert_relative_eq!(pose.position, Vector3::new(0.7, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn doubling_multiplier_doubles_offset() {
        let (model, catalog) = fixtures::chain_model();
        let mut params = HardwareParams::nominal(&model).unwrap();
        let q = Configuration::neutral(2);
        let pm = ParametrizedModel::new(&model, &params, &catalog).unwrap();
        let before = pm.forward_kinematics(&q, "elbow_marker").unwrap().position;
        params.length_multipliers[0] = 2.0;
        let pm = ParametrizedModel::new(&model, &params, &catalog).unwrap();
        let after = pm.forward_kinematics(&q, "elbow_marker").unwrap().position;
        assert_relative_eq!(after.x, 2.0 * before.x, epsilon = 1e-15);
        assert_relative_eq!(after.y, before.y, epsilon = 1e-15);
    }

    #[test]
    fn unknown_frame_is_reported() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let err = pm.forward_kinematics(&Configuration::neutral(2), "nope").unwrap_err();
        assert_eq!(err, Error::UnknownFrame("nope".into()));
    }

    #[test]
    fn path_length_bounds_frame_distance() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        assert_relative_eq!(pm.path_length("base", "tip").unwrap(), 0.7, epsilon = 1e-15);
        assert_relative_eq!(pm.path_length("tip", "tip").unwrap(), 0.6, epsilon = 1e-15);
        assert!(pm.frame_jacobian(&Configuration::neutral(2), "nope").is_err());
    }

    #[test]
    fn base_frame_jacobian_is_identity() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let mut q = Configuration::neutral(2);
        q.base_position = Vector3::new(0.3, -1.0, 2.0);
        q.base_quaternion = nalgebra::Vector4::new(0.9, 0.1, -0.3, 0.2);
        q.joints[0] = 0.7;
        let j = pm.frame_jacobian(&q, "base").unwrap();
        assert_relative_eq!(j.columns(0, 6).into_owned(), DMatrix::identity(6, 6), epsilon = 1e-15);
        assert_eq!(j.columns(6, 2).amax(), 0.0);
    }

    #[test]
    fn off_path_columns_are_zero() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let mut q = Configuration::neutral(2);
        q.joints[0] = 0.4;
        q.joints[1] = -0.9;
        let j = pm.frame_jacobian(&q, "elbow_marker").unwrap();
        assert_eq!(j.column(7).amax(), 0.0);
        assert!(j.column(6).amax() > 0.0);
    }

    #[test]
    fn jacobian_transpose_product_matches_matrix() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let mut q = Configuration::neutral(2);
        q.base_position = Vector3::new(0.1, 0.2, 0.3);
        q.base_quaternion = nalgebra::Vector4::new(0.8, 0.2, 0.1, -0.4);
        q.joints[0] = 0.3;
        q.joints[1] = 1.1;
        let kin = pm.kinematics(&q).unwrap();
        let w = Vector6::new(1.0, -2.0, 3.0, 0.5, 0.25, -0.75);
        let direct = pm.frame_jacobian_cached(&kin, "tip").unwrap().transpose() * DVector::from_column_slice(w.as_slice());
        let fast = pm.frame_jacobian_transpose_mul(&kin, "tip", &w).unwrap();
        assert_relative_eq!(direct, fast, epsilon = 1e-13);
    }
}
