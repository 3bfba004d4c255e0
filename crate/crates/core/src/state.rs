use nalgebra::{DVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// q = (p, φ, s): base position, scalar-first base quaternion, joint positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub base_position: Vector3<f64>,
    pub base_quaternion: Vector4<f64>,
    pub joints: DVector<f64>,
}

impl Configuration {
    pub fn neutral(n: usize) -> Self {
        Configuration {
            base_position: Vector3::zeros(),
            base_quaternion: Vector4::new(1.0, 0.0, 0.0, 0.0),
            joints: DVector::zeros(n),
        }
    }

    pub fn dofs(&self) -> usize {
        self.joints.len()
    }

    /// Copy with the quaternion scaled to unit norm.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        let n = c.base_quaternion.norm();
        if n > 0.0 {
            c.base_quaternion /= n;
        }
        c
    }
}

/// Configuration plus mixed-representation velocity and acceleration
/// ν = (v_B, ω_B, ṡ) and ν̇, both expressed in the inertial frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub q: Configuration,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

impl SystemState {
    pub fn at_rest(q: Configuration) -> Self {
        let n = q.dofs() + 6;
        SystemState {
            q,
            velocity: DVector::zeros(n),
            acceleration: DVector::zeros(n),
        }
    }

    pub fn check(&self) -> Result<()> {
        check_dim("velocity", self.q.dofs() + 6, self.velocity.len())?;
        check_dim("acceleration", self.q.dofs() + 6, self.acceleration.len())
    }
}
