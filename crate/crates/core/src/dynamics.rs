//! Mass matrix, bias forces and motor-reflected joint dynamics.
//!
//! The mass matrix is assembled as Σ Jᵀ diag(m, I) J over body centers of
//! mass; bias forces come from a forward pass of velocity-product
//! accelerations projected through the same Jacobians.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};

use crate::error::{check_dim, Error, Result};
use crate::kinematics::{KinematicsCache, ParametrizedModel};
use crate::model::JointKind;
use crate::state::{Configuration, SystemState};

/// Motor contributions in joint space: reflected rotor inertia, reflected
/// viscous friction and the torque map Γ⁻ᵀ. All diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorReflection {
    pub inertia: DMatrix<f64>,
    pub friction: DMatrix<f64>,
    pub torque_map: DMatrix<f64>,
}

/// A contact wrench applied at a named frame: (force, moment about the frame
/// origin), inertial coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactWrench {
    pub frame: String,
    pub wrench: Vector6<f64>,
}

impl ParametrizedModel {
    pub fn mass_matrix_cached(&self, kin: &KinematicsCache) -> DMatrix<f64> {
        let nv = self.nv();
        let mut m = DMatrix::zeros(nv, nv);
        for (b, body) in self.bodies.iter().enumerate() {
            let c = self.body_com(kin, b);
            let jac = self.point_jacobian(kin, b, &c);
            let r = kin.rotations[b];
            let inertia_world = r * body.inertia * r.transpose();
            let jv = jac.rows(0, 3);
            let jw = jac.rows(3, 3);
            m += body.mass * jv.transpose() * jv;
            m += jw.transpose() * inertia_world * jw;
        }
        // remove round-off asymmetry
        let mt = m.transpose();
        (m + mt) * 0.5
    }

    /// M(q, π) ∈ ℝ^{(6+n)×(6+n)} for the mixed representation.
    pub fn mass_matrix(&self, q: &Configuration) -> Result<DMatrix<f64>> {
        Ok(self.mass_matrix_cached(&self.kinematics(q)?))
    }

    pub fn bias_forces_cached(&self, kin: &KinematicsCache, nu: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("velocity", self.nv(), nu.len())?;
        let n_b = self.bodies.len();
        let mut omega = vec![Vector3::zeros(); n_b];
        let mut alpha = vec![Vector3::zeros(); n_b];
        // velocity and velocity-product acceleration of each body origin
        let mut vel = vec![Vector3::zeros(); n_b];
        let mut acc = vec![Vector3::zeros(); n_b];
        vel[0] = Vector3::new(nu[0], nu[1], nu[2]);
        omega[0] = Vector3::new(nu[3], nu[4], nu[5]);
        for b in 1..n_b {
            let p = self.bodies[b].parent.expect("non-base body");
            let j = self.bodies[b].joint.expect("non-base body");
            let z = kin.axes[j];
            let sd = nu[6 + j];
            let r = kin.origins[b] - kin.origins[p];
            let w_p = omega[p];
            let base_vel = vel[p] + w_p.cross(&r);
            let base_acc = acc[p] + alpha[p].cross(&r) + w_p.cross(&w_p.cross(&r));
            match self.joints[j].kind {
                JointKind::Revolute => {
                    omega[b] = w_p + z * sd;
                    alpha[b] = alpha[p] + w_p.cross(&(z * sd));
                    vel[b] = base_vel;
                    acc[b] = base_acc;
                }
                JointKind::Prismatic => {
                    omega[b] = w_p;
                    alpha[b] = alpha[p];
                    vel[b] = base_vel + z * sd;
                    acc[b] = base_acc + 2.0 * w_p.cross(&(z * sd));
                }
            }
        }
        let mut h = DVector::zeros(self.nv());
        for (b, body) in self.bodies.iter().enumerate() {
            let c = self.body_com(kin, b);
            let d = c - kin.origins[b];
            let a_c = acc[b] + alpha[b].cross(&d) + omega[b].cross(&omega[b].cross(&d));
            let r = kin.rotations[b];
            let inertia_world: Matrix3<f64> = r * body.inertia * r.transpose();
            let force = body.mass * (a_c - self.gravity);
            let moment = inertia_world * alpha[b] + omega[b].cross(&(inertia_world * omega[b]));
            let jac = self.point_jacobian(kin, b, &c);
            h += jac.rows(0, 3).transpose() * force + jac.rows(3, 3).transpose() * moment;
        }
        Ok(h)
    }

    /// h(q, ν, π): Coriolis, centrifugal and gravity terms.
    pub fn bias_forces(&self, q: &Configuration, nu: &DVector<f64>) -> Result<DVector<f64>> {
        self.bias_forces_cached(&self.kinematics(q)?, nu)
    }

    /// h(q, 0, π), computed from subtree masses in O(n).
    pub fn gravity_forces_cached(&self, kin: &KinematicsCache) -> DVector<f64> {
        let n_b = self.bodies.len();
        // subtree mass and first mass moment
        let mut mass = vec![0.0; n_b];
        let mut moment = vec![Vector3::zeros(); n_b];
        for b in (0..n_b).rev() {
            mass[b] += self.bodies[b].mass;
            moment[b] += self.bodies[b].mass * self.body_com(kin, b);
            if let Some(p) = self.bodies[b].parent {
                mass[p] += mass[b];
                let mb = moment[b];
                moment[p] += mb;
            }
        }
        let g = self.gravity;
        let mut h = DVector::zeros(self.nv());
        let f0 = -mass[0] * g;
        h.fixed_rows_mut::<3>(0).copy_from(&f0);
        let tau0 = -(moment[0] - mass[0] * kin.base_position).cross(&g);
        h.fixed_rows_mut::<3>(3).copy_from(&tau0);
        for (j, joint) in self.joints.iter().enumerate() {
            let b = joint.child;
            let z = kin.axes[j];
            h[6 + j] = match joint.kind {
                JointKind::Revolute => -z.dot(&(moment[b] - mass[b] * kin.origins[b]).cross(&g)),
                JointKind::Prismatic => -mass[b] * z.dot(&g),
            };
        }
        h
    }

    pub fn gravity_forces(&self, q: &Configuration) -> Result<DVector<f64>> {
        Ok(self.gravity_forces_cached(&self.kinematics(q)?))
    }

    /// Gravitational potential energy, zero at the inertial origin.
    pub fn potential_energy(&self, q: &Configuration) -> Result<f64> {
        let kin = self.kinematics(q)?;
        Ok(self
            .bodies
            .iter()
            .enumerate()
            .map(|(b, body)| -body.mass * self.gravity.dot(&self.body_com(&kin, b)))
            .sum())
    }

    pub fn center_of_mass(&self, q: &Configuration) -> Result<Vector3<f64>> {
        let kin = self.kinematics(q)?;
        let m = self.total_mass();
        Ok(self
            .bodies
            .iter()
            .enumerate()
            .map(|(b, body)| body.mass * self.body_com(&kin, b))
            .sum::<Vector3<f64>>()
            / m)
    }

    /// Reflected motor terms. Joints without a motor (humans, loads) map
    /// torques one to one and add no inertia.
    pub fn motor_reflected_terms(&self) -> MotorReflection {
        let n = self.dofs();
        let mut inertia = DMatrix::zeros(n, n);
        let mut friction = DMatrix::zeros(n, n);
        let mut torque_map = DMatrix::identity(n, n);
        for (i, m) in self.motors.iter().enumerate() {
            if let Some(m) = m {
                inertia[(i, i)] = m.reflected_inertia();
                friction[(i, i)] = m.reflected_friction();
                torque_map[(i, i)] = m.inv_gear_ratio;
            }
        }
        MotorReflection {
            inertia,
            friction,
            torque_map,
        }
    }

    /// Like [`motor_reflected_terms`](Self::motor_reflected_terms) but fails
    /// when a robot joint has no motor binding.
    pub fn require_motors(&self) -> Result<MotorReflection> {
        if let Some(i) = self.motors.iter().position(|m| m.is_none()) {
            return Err(Error::Model(format!("joint `{}` has no motor binding", self.joints[i].name)));
        }
        Ok(self.motor_reflected_terms())
    }

    /// M̄ = M + blockdiag(0, Γ⁻ᵀ I_m Γ⁻¹).
    pub fn augmented_mass_matrix(&self, q: &Configuration) -> Result<DMatrix<f64>> {
        let mut m = self.mass_matrix(q)?;
        let refl = self.motor_reflected_terms();
        let n = self.dofs();
        let mut block = m.view_mut((6, 6), (n, n));
        block += &refl.inertia;
        Ok(m)
    }

    /// M̄ν̇ + h − B̄τ − J_cᵀ f + K̄_v ν. Zero iff the inputs satisfy the
    /// motor-augmented floating-base dynamics.
    pub fn full_dynamics_residual(
        &self,
        state: &SystemState,
        torques: &DVector<f64>,
        contacts: &[ContactWrench],
    ) -> Result<DVector<f64>> {
        state.check()?;
        check_dim("torques", self.dofs(), torques.len())?;
        let kin = self.kinematics(&state.q)?;
        let refl = self.motor_reflected_terms();
        let n = self.dofs();
        let mut m = self.mass_matrix_cached(&kin);
        {
            let mut block = m.view_mut((6, 6), (n, n));
            block += &refl.inertia;
        }
        let mut r = m * &state.acceleration + self.bias_forces_cached(&kin, &state.velocity)?;
        let applied = &refl.torque_map * torques;
        let mut joint_part = r.rows_mut(6, n);
        joint_part -= applied;
        joint_part += &refl.friction * state.velocity.rows(6, n);
        for c in contacts {
            r -= self.frame_jacobian_transpose_mul(&kin, &c.frame, &c.wrench)?;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::params::HardwareParams;
    use approx::assert_relative_eq;
    use nalgebra::Vector4;

    #[test]
    fn single_free_box() {
        let (model, catalog) = fixtures::free_box();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let m = pm.mass_matrix(&Configuration::neutral(0)).unwrap();
        let mass = pm.total_mass();
        assert_relative_eq!(m.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity() * mass, epsilon = 1e-14);
        assert_relative_eq!(m.view((0, 3), (3, 3)).amax(), 0.0, epsilon = 1e-14);
        let inertia = pm.bodies[0].inertia;
        assert_relative_eq!(m.fixed_view::<3, 3>(3, 3).into_owned(), inertia, epsilon = 1e-14);
    }

    #[test]
    fn free_fall_bias_is_weight() {
        let (model, catalog) = fixtures::free_box();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let h = pm.bias_forces(&Configuration::neutral(0), &DVector::zeros(6)).unwrap();
        assert_relative_eq!(h[2], pm.total_mass() * 9.81, epsilon = 1e-12);
        assert_relative_eq!(h[0], 0.0);
    }

    #[test]
    fn densities_scale_mass_matrix_linearly() {
        let (model, catalog) = fixtures::chain_model();
        let mut params = HardwareParams::nominal(&model).unwrap();
        let q = fixtures::chain_configuration(0.3, -0.8);
        let m1 = ParametrizedModel::new(&model, &params, &catalog).unwrap().mass_matrix(&q).unwrap();
        for d in params.densities.iter_mut() {
            *d *= 2.0;
        }
        // the chain puts every link in a density group
        let m2 = ParametrizedModel::new(&model, &params, &catalog).unwrap().mass_matrix(&q).unwrap();
        assert_relative_eq!(m2, m1 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gravity_fast_path_matches_bias() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let mut q = fixtures::chain_configuration(0.9, 0.4);
        q.base_quaternion = Vector4::new(0.9, -0.2, 0.3, 0.1);
        q.base_position = Vector3::new(0.5, 0.1, -0.2);
        let a = pm.gravity_forces(&q).unwrap();
        let b = pm.bias_forces(&q, &DVector::zeros(pm.nv())).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn reflected_terms_and_missing_binding() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let r = pm.require_motors().unwrap();
        assert_relative_eq!(r.inertia[(0, 0)], 25.6, epsilon = 1e-12);
        assert_relative_eq!(r.inertia[(1, 1)], 1.0, epsilon = 1e-12);
        assert_eq!(r.inertia[(0, 1)], 0.0);
        assert_eq!(r.friction.amax(), 0.0);
        assert_eq!(r.torque_map[(0, 0)], 160.0);
        let mut broken = pm.clone();
        broken.motors[1] = None;
        assert!(matches!(broken.require_motors(), Err(Error::Model(_))));
    }

    #[test]
    fn residual_rejects_wrong_torque_length() {
        let (model, catalog) = fixtures::chain_model();
        let pm = ParametrizedModel::nominal(&model, &catalog).unwrap();
        let state = SystemState::at_rest(Configuration::neutral(2));
        let err = pm.full_dynamics_residual(&state, &DVector::zeros(3), &[]).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }
}
