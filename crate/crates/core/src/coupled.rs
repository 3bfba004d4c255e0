//! The composite human–robot–load system: stacked dynamics, the contact
//! coupling matrix 𝐐 and the static residual 𝐡(q,0) − 𝐁̄τ̄ − 𝐐ᵀ𝐟.
//!
//! Stacked vectors are ordered human, robot, load. Wrenches act on the
//! contact owner; for grasps the load receives the opposite wrench.

use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::ContactWrench;
use crate::error::{check_dim, Error, Result};
use crate::friction::FrictionModel;
use crate::kinematics::{KinematicsCache, ParametrizedModel};
use crate::state::{Configuration, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Human,
    Robot,
    Load,
}

impl AgentRole {
    pub const ALL: [AgentRole; 3] = [AgentRole::Human, AgentRole::Robot, AgentRole::Load];

    pub fn index(self) -> usize {
        match self {
            AgentRole::Human => 0,
            AgentRole::Robot => 1,
            AgentRole::Load => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactKind {
    Environment,
    Grasp,
}

/// Which wrench components a contact transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transmission {
    #[default]
    Full,
    Force,
}

impl Transmission {
    pub fn dim(self) -> usize {
        match self {
            Transmission::Full => 6,
            Transmission::Force => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSpec {
    pub owner: AgentRole,
    pub frame: String,
    pub kind: ContactKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_frame: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionModel>,
    #[serde(default)]
    pub transmission: Transmission,
}

impl ContactSpec {
    pub fn environment(owner: AgentRole, frame: &str, friction: FrictionModel) -> Self {
        ContactSpec {
            owner,
            frame: frame.into(),
            kind: ContactKind::Environment,
            load_frame: None,
            friction: Some(friction),
            transmission: Transmission::Full,
        }
    }

    pub fn grasp(owner: AgentRole, frame: &str, load_frame: &str, transmission: Transmission) -> Self {
        ContactSpec {
            owner,
            frame: frame.into(),
            kind: ContactKind::Grasp,
            load_frame: Some(load_frame.into()),
            friction: None,
            transmission,
        }
    }

    pub fn dim(&self) -> usize {
        self.transmission.dim()
    }
}

/// Configurations of the three agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeConfiguration {
    pub human: Configuration,
    pub robot: Configuration,
    pub load: Configuration,
}

impl CompositeConfiguration {
    pub fn get(&self, role: AgentRole) -> &Configuration {
        match role {
            AgentRole::Human => &self.human,
            AgentRole::Robot => &self.robot,
            AgentRole::Load => &self.load,
        }
    }

    pub fn get_mut(&mut self, role: AgentRole) -> &mut Configuration {
        match role {
            AgentRole::Human => &mut self.human,
            AgentRole::Robot => &mut self.robot,
            AgentRole::Load => &mut self.load,
        }
    }
}

/// Per-agent kinematics for one composite configuration.
#[derive(Debug, Clone)]
pub struct CompositeKinematics {
    pub agents: [KinematicsCache; 3],
}

#[derive(Debug, Clone)]
pub struct CompositeSystem {
    pub human: ParametrizedModel,
    pub robot: ParametrizedModel,
    pub load: ParametrizedModel,
    pub contacts: Vec<ContactSpec>,
}

impl CompositeSystem {
    pub fn new(
        human: ParametrizedModel,
        robot: ParametrizedModel,
        load: ParametrizedModel,
        contacts: Vec<ContactSpec>,
    ) -> Result<Self> {
        if load.dofs() != 0 {
            return Err(Error::Model("the load must be a single rigid body".into()));
        }
        robot.require_motors()?;
        let system = CompositeSystem {
            human,
            robot,
            load,
            contacts,
        };
        for c in &system.contacts {
            if c.owner == AgentRole::Load {
                return Err(Error::Model(format!("contact `{}` is owned by the load", c.frame)));
            }
            let owner = system.agent(c.owner);
            if !owner.has_frame(&c.frame) {
                return Err(Error::UnknownFrame(format!("{}:{}", owner.name, c.frame)));
            }
            match c.kind {
                ContactKind::Grasp => {
                    let lf = c
                        .load_frame
                        .as_deref()
                        .ok_or_else(|| Error::Model(format!("grasp `{}` names no load frame", c.frame)))?;
                    if !system.load.has_frame(lf) {
                        return Err(Error::UnknownFrame(format!("{}:{lf}", system.load.name)));
                    }
                }
                ContactKind::Environment => {
                    let fm = c
                        .friction
                        .as_ref()
                        .ok_or_else(|| Error::Model(format!("environment contact `{}` has no friction model", c.frame)))?;
                    fm.validate()?;
                    if c.transmission != Transmission::Full {
                        return Err(Error::Model(format!("environment contact `{}` must transmit full wrenches", c.frame)));
                    }
                }
            }
        }
        Ok(system)
    }

    pub fn agent(&self, role: AgentRole) -> &ParametrizedModel {
        match role {
            AgentRole::Human => &self.human,
            AgentRole::Robot => &self.robot,
            AgentRole::Load => &self.load,
        }
    }

    /// Offset of each agent's block in the stacked velocity.
    pub fn velocity_offset(&self, role: AgentRole) -> usize {
        match role {
            AgentRole::Human => 0,
            AgentRole::Robot => self.human.nv(),
            AgentRole::Load => self.human.nv() + self.robot.nv(),
        }
    }

    pub fn nv(&self) -> usize {
        self.human.nv() + self.robot.nv() + self.load.nv()
    }

    /// Stacked torque size n₁ + n₂ (human joint torques, robot motor torques).
    pub fn torque_dim(&self) -> usize {
        self.human.dofs() + self.robot.dofs()
    }

    pub fn wrench_dim(&self) -> usize {
        self.contacts.iter().map(ContactSpec::dim).sum()
    }

    pub fn wrench_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.contacts
            .iter()
            .map(|c| {
                let o = off;
                off += c.dim();
                o
            })
            .collect()
    }

    pub fn kinematics(&self, q: &CompositeConfiguration) -> Result<CompositeKinematics> {
        Ok(CompositeKinematics {
            agents: [
                self.human.kinematics(&q.human)?,
                self.robot.kinematics(&q.robot)?,
                self.load.kinematics(&q.load)?,
            ],
        })
    }

    /// 𝐁̄ ∈ ℝ^{nv × (n₁+n₂)}: identity on human joints, Γ⁻ᵀ on robot joints.
    pub fn torque_map(&self) -> DMatrix<f64> {
        let n1 = self.human.dofs();
        let n2 = self.robot.dofs();
        let mut b = DMatrix::zeros(self.nv(), n1 + n2);
        for i in 0..n1 {
            b[(6 + i, i)] = 1.0;
        }
        let refl = self.robot.motor_reflected_terms();
        let o = self.velocity_offset(AgentRole::Robot) + 6;
        for i in 0..n2 {
            b[(o + i, n1 + i)] = refl.torque_map[(i, i)];
        }
        b
    }

    /// 𝐐 with one row block per contact: the owner's Jacobian, and for
    /// grasps minus the load Jacobian of the paired frame.
    pub fn coupling_matrix(&self, q: &CompositeConfiguration) -> Result<DMatrix<f64>> {
        let kin = self.kinematics(q)?;
        self.coupling_matrix_cached(&kin)
    }

    pub fn coupling_matrix_cached(&self, kin: &CompositeKinematics) -> Result<DMatrix<f64>> {
        let mut qm = DMatrix::zeros(self.wrench_dim(), self.nv());
        for (c, row) in self.contacts.iter().zip(self.wrench_offsets()) {
            let d = c.dim();
            let owner = self.agent(c.owner);
            let jac = owner.frame_jacobian_cached(&kin.agents[c.owner.index()], &c.frame)?;
            let col = self.velocity_offset(c.owner);
            qm.view_mut((row, col), (d, owner.nv())).copy_from(&jac.rows(0, d));
            if let Some(lf) = &c.load_frame {
                let jl = self.load.frame_jacobian_cached(&kin.agents[2], lf)?;
                let col = self.velocity_offset(AgentRole::Load);
                qm.view_mut((row, col), (d, 6)).copy_from(&(-jl.rows(0, d)));
            }
        }
        Ok(qm)
    }

    /// Contact wrench acting on the owner, as a 6-vector.
    pub fn contact_wrench(&self, contact: usize, f: &DVector<f64>) -> Vector6<f64> {
        let off = self.wrench_offsets()[contact];
        let mut w = Vector6::zeros();
        for k in 0..self.contacts[contact].dim() {
            w[k] = f[off + k];
        }
        w
    }

    /// Per-agent contact wrenches with the action–reaction pairing applied.
    pub fn agent_wrenches(&self, role: AgentRole, f: &DVector<f64>) -> Vec<ContactWrench> {
        let mut out = Vec::new();
        for (i, c) in self.contacts.iter().enumerate() {
            let w = self.contact_wrench(i, f);
            if c.owner == role {
                out.push(ContactWrench {
                    frame: c.frame.clone(),
                    wrench: w,
                });
            } else if role == AgentRole::Load {
                if let Some(lf) = &c.load_frame {
                    out.push(ContactWrench {
                        frame: lf.clone(),
                        wrench: -w,
                    });
                }
            }
        }
        out
    }

    /// 𝐡(q,0,π) − 𝐁̄τ̄ − 𝐐ᵀ𝐟 with τ̄ = (human joint torques, robot motor torques).
    pub fn composite_static_residual(
        &self,
        q: &CompositeConfiguration,
        torques: &DVector<f64>,
        f: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let kin = self.kinematics(q)?;
        self.static_residual_cached(&kin, torques, f)
    }

    pub fn static_residual_cached(
        &self,
        kin: &CompositeKinematics,
        torques: &DVector<f64>,
        f: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        check_dim("stacked torques", self.torque_dim(), torques.len())?;
        check_dim("stacked wrenches", self.wrench_dim(), f.len())?;
        let n1 = self.human.dofs();
        let mut r = DVector::zeros(self.nv());
        for role in AgentRole::ALL {
            let model = self.agent(role);
            let k = &kin.agents[role.index()];
            let mut block = model.gravity_forces_cached(k);
            match role {
                AgentRole::Human => {
                    for i in 0..n1 {
                        block[6 + i] -= torques[i];
                    }
                }
                AgentRole::Robot => {
                    for (i, m) in model.motors.iter().enumerate() {
                        let g = m.as_ref().map_or(1.0, |m| m.inv_gear_ratio);
                        block[6 + i] -= g * torques[n1 + i];
                    }
                }
                AgentRole::Load => {}
            }
            for w in self.agent_wrenches(role, f) {
                block -= model.frame_jacobian_transpose_mul(k, &w.frame, &w.wrench)?;
            }
            let o = self.velocity_offset(role);
            r.rows_mut(o, model.nv()).copy_from(&block);
        }
        Ok(r)
    }

    /// Stacked gravity bias 𝐡(q, 0, π).
    pub fn stacked_gravity(&self, q: &CompositeConfiguration) -> Result<DVector<f64>> {
        let kin = self.kinematics(q)?;
        let mut r = DVector::zeros(self.nv());
        for role in AgentRole::ALL {
            let model = self.agent(role);
            let o = self.velocity_offset(role);
            r.rows_mut(o, model.nv()).copy_from(&model.gravity_forces_cached(&kin.agents[role.index()]));
        }
        Ok(r)
    }

    /// Per-agent residuals from [`ParametrizedModel::full_dynamics_residual`]
    /// at rest, concatenated.
    pub fn recomposed_static_residual(
        &self,
        q: &CompositeConfiguration,
        torques: &DVector<f64>,
        f: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let n1 = self.human.dofs();
        let n2 = self.robot.dofs();
        let mut r = DVector::zeros(self.nv());
        for role in AgentRole::ALL {
            let model = self.agent(role);
            let tau = match role {
                AgentRole::Human => torques.rows(0, n1).into_owned(),
                AgentRole::Robot => torques.rows(n1, n2).into_owned(),
                AgentRole::Load => DVector::zeros(0),
            };
            let state = SystemState::at_rest(q.get(role).clone());
            let block = model.full_dynamics_residual(&state, &tau, &self.agent_wrenches(role, f))?;
            r.rows_mut(self.velocity_offset(role), model.nv()).copy_from(&block);
        }
        Ok(r)
    }
}
