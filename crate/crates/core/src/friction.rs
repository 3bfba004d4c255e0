//! Linearized contact-wrench feasibility: pyramid friction cone, center of
//! pressure rectangle and torsional bound, all in the contact frame.

use nalgebra::{DMatrix, DVector, Matrix3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margin applied to the strict inequality C f < b.
pub const DEFAULT_MARGIN: f64 = 1e-6;

fn default_facets() -> usize {
    4
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

/// Inner polyhedral approximation of the wrench cone of a flat contact.
///
/// Wrenches are (force, moment about the contact origin) expressed in the
/// contact frame, with z the surface normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionModel {
    pub mu: f64,
    #[serde(default = "default_facets")]
    pub facets: usize,
    /// CoP bounds along the contact x axis, [min, max] (m).
    pub cop_x: [f64; 2],
    /// CoP bounds along the contact y axis, [min, max] (m).
    pub cop_y: [f64; 2],
    /// |m_z| ≤ torsion · f_z (m).
    pub torsion: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

impl FrictionModel {
    /// Foot-sized contact with the torsional bound μ times the smaller half-extent.
    pub fn rectangle(mu: f64, cop_x: [f64; 2], cop_y: [f64; 2]) -> Self {
        let half = (cop_x[1] - cop_x[0]).min(cop_y[1] - cop_y[0]) / 2.0;
        FrictionModel {
            mu,
            facets: 4,
            cop_x,
            cop_y,
            torsion: mu * half,
            margin: DEFAULT_MARGIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(format!("friction model: {m}")));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if self.facets < 3 {
            return bad("at least 3 pyramid facets are required");
        }
        if !(self.cop_x[0] < 0.0 && self.cop_x[1] > 0.0 && self.cop_y[0] < 0.0 && self.cop_y[1] > 0.0) {
            return bad("CoP rectangle must contain the contact origin");
        }
        if !(self.torsion > 0.0) {
            return bad("torsional coefficient must be positive");
        }
        if !(self.margin >= 0.0) {
            return bad("margin must be nonnegative");
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        1 + self.facets + 4 + 2
    }

    /// C such that feasible local wrenches satisfy C w ≤ b − margin.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.rows(), 6);
        let mut r = 0;
        c[(r, 2)] = -1.0;
        r += 1;
        let inner = self.mu * (std::f64::consts::PI / self.facets as f64).cos();
        for k in 0..self.facets {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / self.facets as f64;
            c[(r, 0)] = theta.cos();
            c[(r, 1)] = theta.sin();
            c[(r, 2)] = -inner;
            r += 1;
        }
        // cop_x = -m_y / f_z, cop_y = m_x / f_z
        c[(r, 4)] = -1.0;
        c[(r, 2)] = -self.cop_x[1];
        c[(r + 1, 4)] = 1.0;
        c[(r + 1, 2)] = self.cop_x[0];
        c[(r + 2, 3)] = 1.0;
        c[(r + 2, 2)] = -self.cop_y[1];
        c[(r + 3, 3)] = -1.0;
        c[(r + 3, 2)] = self.cop_y[0];
        r += 4;
        c[(r, 5)] = 1.0;
        c[(r, 2)] = -self.torsion;
        c[(r + 1, 5)] = -1.0;
        c[(r + 1, 2)] = -self.torsion;
        c
    }

    pub fn bounds(&self) -> DVector<f64> {
        DVector::zeros(self.rows())
    }

    /// C expressed on inertial-frame wrenches for a contact with orientation `r`.
    pub fn world_matrix(&self, r: &Matrix3<f64>) -> DMatrix<f64> {
        let mut rot = DMatrix::zeros(6, 6);
        rot.view_mut((0, 0), (3, 3)).copy_from(&r.transpose());
        rot.view_mut((3, 3), (3, 3)).copy_from(&r.transpose());
        self.matrix() * rot
    }

    /// max_i (C w − b + margin)_i for a local wrench; ≤ 0 when feasible.
    pub fn violation(&self, local: &Vector6<f64>) -> f64 {
        let w = DVector::from_column_slice(local.as_slice());
        (self.matrix() * w - self.bounds()).add_scalar(self.margin).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn foot() -> FrictionModel {
        FrictionModel::rectangle(0.6, [-0.05, 0.15], [-0.04, 0.04])
    }

    #[test]
    fn pure_normal_load_is_strictly_inside() {
        let f = foot();
        f.validate().unwrap();
        assert!(f.violation(&Vector6::new(0.0, 0.0, 100.0, 0.0, 0.0, 0.0)) < -1.0);
    }

    #[test]
    fn four_facets_give_inscribed_square() {
        let f = foot();
        let fz = 10.0;
        let edge = 0.6 / 2f64.sqrt() * fz;
        assert!(f.violation(&Vector6::new(edge * 0.999, 0.0, fz, 0.0, 0.0, 0.0)) < 0.0);
        assert!(f.violation(&Vector6::new(edge * 1.001, 0.0, fz, 0.0, 0.0, 0.0)) > 0.0);
        assert!(f.violation(&Vector6::new(0.0, -edge * 1.001, fz, 0.0, 0.0, 0.0)) > 0.0);
    }

    #[test]
    fn center_of_pressure_limits() {
        let f = foot();
        let fz = 10.0;
        // cop at x = 0.14 is inside, 0.16 outside
        assert!(f.violation(&Vector6::new(0.0, 0.0, fz, 0.0, -0.14 * fz, 0.0)) < 0.0);
        assert!(f.violation(&Vector6::new(0.0, 0.0, fz, 0.0, -0.16 * fz, 0.0)) > 0.0);
        assert!(f.violation(&Vector6::new(0.0, 0.0, fz, 0.0, 0.06 * fz, 0.0)) > 0.0);
        assert!(f.violation(&Vector6::new(0.0, 0.0, fz, 0.039 * fz, 0.0, 0.0)) < 0.0);
        assert!(f.violation(&Vector6::new(0.0, 0.0, fz, -0.041 * fz, 0.0, 0.0)) > 0.0);
    }

    #[test]
    fn pulling_and_twisting_are_rejected() {
        let f = foot();
        assert!(f.violation(&Vector6::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0)) > 0.0);
        assert!(f.violation(&Vector6::new(0.0, 0.0, 10.0, 0.0, 0.0, 10.0 * f.torsion * 1.01)) > 0.0);
    }

    #[test]
    fn world_matrix_rotates_wrench() {
        let f = foot();
        let r = crate::math::rpy_to_rotation(&[0.0, 0.0, std::f64::consts::PI]);
        let world = DVector::from_column_slice(&[1.0, 0.0, 10.0, 0.0, 0.5, 0.0]);
        let local = Vector6::new(-1.0, 0.0, 10.0, 0.0, -0.5, 0.0);
        let a = f.world_matrix(&r) * world;
        let b = f.matrix() * DVector::from_column_slice(local.as_slice());
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut f = foot();
        f.mu = 0.0;
        assert!(f.validate().is_err());
        let mut f = foot();
        f.cop_x = [0.01, 0.1];
        assert!(f.validate().is_err());
    }
}
