//! Rotation helpers shared by kinematics and the posture problem.
//!
//! Quaternions are scalar-first `(w, x, y, z)` and are normalized whenever
//! they are turned into a rotation.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector4};

use crate::error::{Error, Result};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the skew-symmetric part of `m`.
pub fn vex(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Rotation matrix of a (possibly unnormalized) scalar-first quaternion.
pub fn quaternion_to_rotation(q: &Vector4<f64>) -> Result<Matrix3<f64>> {
    let n = q.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return Err(Error::Degenerate(format!("quaternion norm {n}")));
    }
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Ok(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> Vector4<f64> {
    let uq = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let mut v = Vector4::new(uq.w, uq.i, uq.j, uq.k);
    if v[0] < 0.0 {
        v = -v;
    }
    v
}

/// Fixed-axis roll/pitch/yaw, `R = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn rpy_to_rotation(rpy: &[f64; 3]) -> Matrix3<f64> {
    *Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]).matrix()
}

/// Rotation of `angle` about the unit `axis`.
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(axis);
    Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * k * k
}

/// Small-angle orientation error between `r` and the target `r_ref`.
///
/// Zero iff `r == r_ref` (for relative angles below pi); equals the rotation
/// vector of `r r_refᵀ` to first order.
pub fn orientation_error(r: &Matrix3<f64>, r_ref: &Matrix3<f64>) -> Vector3<f64> {
    vex(&(r * r_ref.transpose()))
}

/// Geodesic angle between two unnormalized quaternions.
pub fn quaternion_angle(a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    // atan2 form stays well conditioned near c = 1
    2.0 * (1.0 - c * c).max(0.0).sqrt().atan2(c)
}
