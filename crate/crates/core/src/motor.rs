//! Motor catalog entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One catalog motor. Torque limits are joint-side, i.e. after the gearbox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    pub id: String,
    /// 1/Γ, the reduction ratio seen from the joint.
    pub inv_gear_ratio: f64,
    /// Rotor inertia I_m [kg m²].
    pub rotor_inertia: f64,
    /// Lower joint torque limit [N m].
    pub torque_min: f64,
    /// Upper joint torque limit [N m].
    pub torque_max: f64,
    /// Viscous friction K_v [N m s/rad].
    #[serde(default)]
    pub viscous_friction: f64,
}

impl MotorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.torque_min < 0.0
            && self.torque_max > 0.0
            && self.rotor_inertia > 0.0
            && self.inv_gear_ratio >= 1.0
            && self.viscous_friction >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("motor `{}` has invalid characteristics", self.id)))
        }
    }

    /// Rotor inertia seen at the joint, Γ⁻² I_m.
    pub fn reflected_inertia(&self) -> f64 {
        self.inv_gear_ratio * self.inv_gear_ratio * self.rotor_inertia
    }

    pub fn reflected_friction(&self) -> f64 {
        self.inv_gear_ratio * self.inv_gear_ratio * self.viscous_friction
    }

    /// Bounds on the motor-side torque τ_m such that the joint torque
    /// Γ⁻ᵀ τ_m stays inside the catalog limits.
    pub fn motor_torque_bounds(&self) -> (f64, f64) {
        (
            self.torque_min / self.inv_gear_ratio,
            self.torque_max / self.inv_gear_ratio,
        )
    }
}

/// The motor set 𝒩 available to the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorCatalog {
    pub motors: Vec<MotorSpec>,
}

impl MotorCatalog {
    /// The S/M/L catalog. Viscous friction is not characterised and set to zero.
    pub fn reference() -> Self {
        let m = |id: &str, inv: f64, im: f64, t: f64| MotorSpec {
            id: id.to_string(),
            inv_gear_ratio: inv,
            rotor_inertia: im,
            torque_min: -t,
            torque_max: t,
            viscous_friction: 0.0,
        };
        MotorCatalog {
            motors: vec![m("S", 100.0, 1e-4, 37.0), m("M", 160.0, 1e-3, 92.0), m("L", 160.0, 1e-3, 123.0)],
        }
    }

    pub fn get(&self, id: &str) -> Option<&MotorSpec> {
        self.motors.iter().find(|m| m.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.motors.iter().map(|m| m.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.motors.is_empty() {
            return Err(Error::Model("empty motor catalog".into()));
        }
        for (i, m) in self.motors.iter().enumerate() {
            m.validate()?;
            if self.motors[..i].iter().any(|o| o.id == m.id) {
                return Err(Error::Model(format!("duplicate motor id `{}`", m.id)));
            }
        }
        Ok(())
    }
}

impl Default for MotorCatalog {
    fn default() -> Self {
        Self::reference()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_reflected_inertia() {
        let c = MotorCatalog::reference();
        assert_eq!(c.get("S").unwrap().reflected_inertia(), 100.0 * 100.0 * 1e-4);
        assert!((c.get("S").unwrap().reflected_inertia() - 1.0).abs() < 1e-12);
        assert!((c.get("M").unwrap().reflected_inertia() - 25.6).abs() < 1e-12);
        assert!((c.get("L").unwrap().reflected_inertia() - 25.6).abs() < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn motor_side_bounds() {
        let s = MotorCatalog::reference().get("S").unwrap().clone();
        let (lo, hi) = s.motor_torque_bounds();
        assert!((lo + 0.37).abs() < 1e-15 && (hi - 0.37).abs() < 1e-15);
    }

    #[test]
    fn rejects_inverted_limits() {
        let mut m = MotorCatalog::reference().motors[0].clone();
        m.torque_min = 1.0;
        assert!(m.validate().is_err());
    }
}
