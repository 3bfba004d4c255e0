//! Hardware parameter vectors π and their on-disk form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{KinematicModel, ModelKind};
use crate::motor::MotorCatalog;

/// π: per-group length multipliers, densities and motor selections, in the
/// group order declared by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareParams {
    pub length_multipliers: Vec<f64>,
    pub densities: Vec<f64>,
    pub motor_ids: Vec<String>,
}

impl HardwareParams {
    /// Unit multipliers, the nominal density of each group's first link and
    /// the nominal motor of each group's first joint.
    pub fn nominal(model: &KinematicModel) -> Result<Self> {
        let groups = &model.parameter_groups;
        let densities = groups
            .density
            .iter()
            .map(|g| {
                model
                    .links
                    .iter()
                    .find(|l| l.density_group.as_ref() == Some(g))
                    .map(|l| l.density)
                    .ok_or_else(|| Error::Model(format!("density group `{g}` has no links")))
            })
            .collect::<Result<Vec<_>>>()?;
        let motor_ids = groups
            .motor
            .iter()
            .map(|g| {
                model
                    .joints
                    .iter()
                    .find(|j| j.motor_group.as_ref() == Some(g))
                    .and_then(|j| j.motor.clone())
                    .ok_or_else(|| Error::Model(format!("motor group `{g}` has no bound joint")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HardwareParams {
            length_multipliers: vec![1.0; groups.length.len()],
            densities,
            motor_ids,
        })
    }

    pub fn gene_count(&self) -> usize {
        self.length_multipliers.len() + self.densities.len() + self.motor_ids.len()
    }

    pub fn check_layout(&self, model: &KinematicModel) -> Result<()> {
        let g = &model.parameter_groups;
        check_dim("length multipliers", g.length.len(), self.length_multipliers.len())?;
        check_dim("densities", g.density.len(), self.densities.len())?;
        check_dim("motor ids", g.motor.len(), self.motor_ids.len())
    }

    pub fn validate(&self, model: &KinematicModel, catalog: &MotorCatalog) -> Result<()> {
        self.check_layout(model)?;
        if let Some(l) = self.length_multipliers.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Contract(format!("length multiplier {l} must be positive")));
        }
        if let Some(d) = self.densities.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::Contract(format!("density {d} must be positive")));
        }
        if let Some(m) = self.motor_ids.iter().find(|m| catalog.get(m).is_none()) {
            return Err(Error::Contract(format!("motor `{m}` is not in the catalog")));
        }
        Ok(())
    }
}

pub const DESIGN_SCHEMA_VERSION: u32 = 1;

/// Named form of π written to and read from design files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub schema_version: u32,
    pub model: String,
    pub length_multipliers: BTreeMap<String, f64>,
    pub densities: BTreeMap<String, f64>,
    pub motors: BTreeMap<String, String>,
}

impl DesignFile {
    pub fn from_params(model: &KinematicModel, params: &HardwareParams) -> Result<Self> {
        params.check_layout(model)?;
        let g = &model.parameter_groups;
        Ok(DesignFile {
            schema_version: DESIGN_SCHEMA_VERSION,
            model: model.name.clone(),
            length_multipliers: g.length.iter().cloned().zip(params.length_multipliers.iter().copied()).collect(),
            densities: g.density.iter().cloned().zip(params.densities.iter().copied()).collect(),
            motors: g.motor.iter().cloned().zip(params.motor_ids.iter().cloned()).collect(),
        })
    }

    /// Resolves the named entries against `model`'s group order. Groups the
    /// file leaves out keep their nominal value.
    pub fn to_params(&self, model: &KinematicModel) -> Result<HardwareParams> {
        if self.schema_version != DESIGN_SCHEMA_VERSION {
            return Err(Error::Parse(format!("design schema_version {}", self.schema_version)));
        }
        if model.kind != ModelKind::Robot {
            return Err(Error::Contract("designs apply to robot models".into()));
        }
        let mut p = HardwareParams::nominal(model)?;
        let g = &model.parameter_groups;
        for (name, v) in &self.length_multipliers {
            let i = position(&g.length, name, "length")?;
            p.length_multipliers[i] = *v;
        }
        for (name, v) in &self.densities {
            let i = position(&g.density, name, "density")?;
            p.densities[i] = *v;
        }
        for (name, v) in &self.motors {
            let i = position(&g.motor, name, "motor")?;
            p.motor_ids[i] = v.clone();
        }
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("design: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }
}

fn position(groups: &[String], name: &str, what: &str) -> Result<usize> {
    groups
        .iter()
        .position(|g| g == name)
        .ok_or_else(|| Error::Contract(format!("unknown {what} group `{name}`")))
}
