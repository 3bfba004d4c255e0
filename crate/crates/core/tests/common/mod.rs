#![allow(dead_code)]

use ergodesign::{Configuration, ParametrizedModel};
use std::f64::consts::PI;
use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3, Vector4};
use rand::Rng;

/// Moves `q` by `delta` along velocity direction `dir` of the mixed
/// representation: base translation, inertial-frame base rotation, joints.
pub fn perturb(q: &Configuration, dir: usize, delta: f64) -> Configuration {
    let mut out = q.clone();
    match dir {
        0..=2 => out.base_position[dir] += delta,
        3..=5 => {
            let mut axis = Vector3::zeros();
            axis[dir - 3] = delta;
            let step = UnitQuaternion::from_scaled_axis(axis);
            let n = q.base_quaternion.normalize();
            let cur = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(n[0], n[1], n[2], n[3]));
            let next = step * cur;
            out.base_quaternion = Vector4::new(next.w, next.i, next.j, next.k);
        }
        _ => out.joints[dir - 6] += delta,
    }
    out
}

pub fn vex(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

pub fn random_configuration<R: Rng>(rng: &mut R, lower: &[f64], upper: &[f64]) -> Configuration {
    let n = lower.len();
    let mut q = Configuration::neutral(n);
    for k in 0..3 {
        q.base_position[k] = rng.gen_range(-1.0..1.0);
    }
    q.base_quaternion = Vector4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    for i in 0..n {
        q.joints[i] = rng.gen_range(lower[i]..upper[i]);
    }
    q
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

pub const G: f64 = 9.81;

/// Closed-form planar two-link dynamics (links along x, joints about y).
pub struct DoublePendulum {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub c1: f64,
    pub c2: f64,
    pub i1: f64,
    pub i2: f64,
}

impl DoublePendulum {
    /// Masses and inertias of the shipped chain, from the primitive formulas.
    pub fn shipped() -> Self {
        let m1 = 800.0 * 0.4 * 0.05 * 0.05;
        let (r, l) = (0.03, 0.3);
        let m2 = 1200.0 * PI * r * r * l;
        DoublePendulum {
            m1,
            m2,
            l1: 0.4,
            c1: 0.2,
            c2: 0.15,
            i1: m1 * (0.4 * 0.4 + 0.05 * 0.05) / 12.0,
            i2: m2 * (r * r / 4.0 + l * l / 12.0),
        }
    }

    pub fn mass(&self, q2: f64) -> [[f64; 2]; 2] {
        let a = self.m2 * self.l1 * self.c2 * q2.cos();
        let m11 = self.i1 + self.i2 + self.m1 * self.c1.powi(2) + self.m2 * (self.l1.powi(2) + self.c2.powi(2)) + 2.0 * a;
        let m12 = self.i2 + self.m2 * self.c2.powi(2) + a;
        let m22 = self.i2 + self.m2 * self.c2.powi(2);
        [[m11, m12], [m12, m22]]
    }

    /// Coriolis/centrifugal plus gravity, with z_c = -c sin(q) under rotation about +y.
    pub fn bias(&self, q: [f64; 2], qd: [f64; 2]) -> [f64; 2] {
        let hh = self.m2 * self.l1 * self.c2 * q[1].sin();
        let cor = [-hh * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]), hh * qd[0] * qd[0]];
        let g1 = -self.m1 * G * self.c1 * q[0].cos() - self.m2 * G * (self.l1 * q[0].cos() + self.c2 * (q[0] + q[1]).cos());
        let g2 = -self.m2 * G * self.c2 * (q[0] + q[1]).cos();
        [cor[0] + g1, cor[1] + g2]
    }
}

/// Largest entry gap between frame Jacobians and central differences of
/// forward kinematics, over every frame of `pm`.
pub fn jacobian_fd_error(pm: &ParametrizedModel, q: &Configuration) -> f64 {
    let step = 1e-6;
    let mut worst = 0.0f64;
    for frame in pm.frame_names() {
        let jac = pm.frame_jacobian(q, &frame).unwrap();
        for dir in 0..pm.nv() {
            let plus = pm.forward_kinematics(&perturb(q, dir, step), &frame).unwrap();
            let minus = pm.forward_kinematics(&perturb(q, dir, -step), &frame).unwrap();
            let lin = (plus.position - minus.position) / (2.0 * step);
            let ang = vex(&(plus.rotation * minus.rotation.transpose())) / (2.0 * step);
            for k in 0..3 {
                worst = worst.max((jac[(k, dir)] - lin[k]).abs());
                worst = worst.max((jac[(3 + k, dir)] - ang[k]).abs());
            }
        }
    }
    worst
}

/// Gap between the gravity vector and the potential-energy gradient,
/// relative to max(1, |gradient|).
pub fn gravity_fd_error(pm: &ParametrizedModel, q: &Configuration) -> f64 {
    let step = 1e-6;
    let h = pm.bias_forces(q, &DVector::zeros(pm.nv())).unwrap();
    let mut worst = 0.0f64;
    for dir in 0..pm.nv() {
        let vp = pm.potential_energy(&perturb(q, dir, step)).unwrap();
        let vm = pm.potential_energy(&perturb(q, dir, -step)).unwrap();
        let dv = (vp - vm) / (2.0 * step);
        worst = worst.max((h[dir] - dv).abs() / dv.abs().max(1.0));
    }
    worst
}
