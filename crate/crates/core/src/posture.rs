//! Static collaborative-lifting postures: one human, one robot and one load
//! held at a sequence of heights.
//!
//! Per height the program carries the three configurations, the stacked
//! torques τ̄ = (human joint torques, robot motor torques) and the contact
//! wrenches. Velocities and accelerations are zero and do not appear.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupled::{AgentRole, CompositeConfiguration, CompositeKinematics, CompositeSystem, ContactKind};
use crate::error::{Error, Result};
use crate::math::{orientation_error, quaternion_angle, rotation_to_quaternion, rpy_to_rotation};
use crate::sqp::{self, Derivatives, Evaluation, Nlp, SqpOptions, SqpStatus};
use crate::state::Configuration;

fn default_robot_yaw() -> f64 {
    PI
}

/// Load heights and reference quantities for one lifting task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub load_heights: Vec<f64>,
    /// s* for the human; joint-limit-clamped zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_reference: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_reference: Option<Vec<f64>>,
    /// Heading of the human feet about z (rad); R* = Rz(yaw).
    #[serde(default)]
    pub human_yaw: f64,
    #[serde(default = "default_robot_yaw")]
    pub robot_yaw: f64,
    #[serde(default)]
    pub load_yaw: f64,
    /// Horizontal load position, held fixed across heights.
    #[serde(default)]
    pub load_xy: [f64; 2],
}

impl TaskSpec {
    pub fn new(load_heights: Vec<f64>) -> Self {
        TaskSpec {
            load_heights,
            human_reference: None,
            robot_reference: None,
            human_yaw: 0.0,
            robot_yaw: PI,
            load_yaw: 0.0,
            load_xy: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.load_heights.is_empty() {
            return Err(Error::Contract("task has no load heights".into()));
        }
        if self.load_heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::Contract("load heights must be finite".into()));
        }
        if self.load_heights.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("load heights must be strictly increasing".into()));
        }
        Ok(())
    }
}

fn default_w1() -> f64 {
    1.0
}
fn default_w2() -> f64 {
    1e-2
}
fn default_w3() -> f64 {
    1e-2
}
fn default_wf() -> f64 {
    100.0
}

/// Cost weights: W₁ torque effort, W₂ posture regularization, W₃ smoothness
/// across heights, W_f fitness scaling, and the per-joint torque weights w₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    #[serde(default = "default_w1")]
    pub w1: f64,
    #[serde(default = "default_w2")]
    pub w2: f64,
    #[serde(default = "default_w3")]
    pub w3: f64,
    #[serde(default = "default_wf")]
    pub wf: f64,
    /// Explicit w₁ over the stacked torque; by default 1 for human joints and
    /// 1/Γ for robot motors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_weights: Option<Vec<f64>>,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            w1: default_w1(),
            w2: default_w2(),
            w3: default_w3(),
            wf: default_wf(),
            torque_weights: None,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w1, self.w2, self.w3, self.wf];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract("cost weights must be finite and nonnegative".into()));
        }
        if self.w1 <= 0.0 {
            return Err(Error::Contract("W1 must be positive".into()));
        }
        if let Some(w) = &self.torque_weights {
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract("torque weights must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Feasibility tolerance in physical units and relative stationarity.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 300,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostureStatus {
    Solved,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    Dynamics,
    GraspPosition,
    Orientation,
    Height,
    LoadAnchor,
    LoadStationary,
    FeetStationary,
    QuaternionNorm,
    Symmetry,
    Friction,
    JointLimits,
    TorqueLimits,
}

/// Variable layout of one height block:
/// human (p, φ, s₁), robot (p, φ, s₂), load (p, φ), τ̄ = (τ₁, τ_m), f.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub heights: usize,
    pub human_dofs: usize,
    pub robot_dofs: usize,
    pub wrench_dim: usize,
}

impl Layout {
    pub fn human_offset(&self) -> usize {
        0
    }

    pub fn robot_offset(&self) -> usize {
        7 + self.human_dofs
    }

    pub fn load_offset(&self) -> usize {
        14 + self.human_dofs + self.robot_dofs
    }

    pub fn configuration_size(&self) -> usize {
        21 + self.human_dofs + self.robot_dofs
    }

    pub fn torque_offset(&self) -> usize {
        self.configuration_size()
    }

    pub fn torque_dim(&self) -> usize {
        self.human_dofs + self.robot_dofs
    }

    pub fn wrench_offset(&self) -> usize {
        self.torque_offset() + self.torque_dim()
    }

    pub fn block_size(&self) -> usize {
        self.wrench_offset() + self.wrench_dim
    }

    pub fn num_variables(&self) -> usize {
        self.heights * self.block_size()
    }

    pub fn block(&self, k: usize) -> Range<usize> {
        k * self.block_size()..(k + 1) * self.block_size()
    }

    fn agent_offset(&self, role: AgentRole) -> usize {
        match role {
            AgentRole::Human => self.human_offset(),
            AgentRole::Robot => self.robot_offset(),
            AgentRole::Load => self.load_offset(),
        }
    }
}

/// Solution at one load height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSolution {
    pub height: f64,
    pub configuration: CompositeConfiguration,
    /// τ̄ = (human joint torques, robot motor torques).
    pub torques: DVector<f64>,
    pub wrenches: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureSolution {
    pub status: PostureStatus,
    pub heights: Vec<HeightSolution>,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub torque_weights: DVector<f64>,
    pub human_reference: DVector<f64>,
    pub robot_reference: DVector<f64>,
}

impl PostureSolution {
    pub fn solved(&self) -> bool {
        self.status == PostureStatus::Solved
    }
}

/// Cost terms recomputed from a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub t3: Vec<f64>,
    pub objective: f64,
}

fn t3_pair(a: &Configuration, b: &Configuration) -> f64 {
    let ds = (&a.joints - &b.joints).norm_squared();
    let dp = (a.base_position - b.base_position).norm_squared();
    let th = quaternion_angle(&a.base_quaternion, &b.base_quaternion);
    ds + dp + th * th
}

/// t₁ = ‖w₁∘τ̄‖², t₂ = Σ‖s − s*‖², t₃ = Σ (‖Δs‖² + ‖Δp‖² + angle(Δφ)²)
/// over the two agents, and the weighted objective.
pub fn evaluate_costs(solution: &PostureSolution, weights: &CostWeights) -> Result<CostBreakdown> {
    if !solution.solved() {
        return Err(Error::Contract("costs are only defined for solved postures".into()));
    }
    let w = &solution.torque_weights;
    let t1: Vec<f64> = solution
        .heights
        .iter()
        .map(|h| h.torques.component_mul(w).norm_squared())
        .collect();
    let t2: Vec<f64> = solution
        .heights
        .iter()
        .map(|h| {
            (&h.configuration.human.joints - &solution.human_reference).norm_squared()
                + (&h.configuration.robot.joints - &solution.robot_reference).norm_squared()
        })
        .collect();
    let t3: Vec<f64> = solution
        .heights
        .windows(2)
        .map(|p| {
            t3_pair(&p[0].configuration.human, &p[1].configuration.human)
                + t3_pair(&p[0].configuration.robot, &p[1].configuration.robot)
        })
        .collect();
    let objective = weights.w1 * t1.iter().sum::<f64>() + weights.w2 * t2.iter().sum::<f64>() + weights.w3 * t3.iter().sum::<f64>();
    Ok(CostBreakdown { t1, t2, t3, objective })
}

/// Max violation per constraint family, recomputed from the models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub dynamics: f64,
    pub grasp_position: f64,
    pub orientation: f64,
    pub height: f64,
    pub load_anchor: f64,
    pub load_stationary: f64,
    pub feet_stationary: f64,
    pub quaternion_norm: f64,
    pub symmetry: f64,
    /// max(C f − b) on the untightened cone; ≤ 0 when feasible.
    pub friction: f64,
    pub min_normal_force: f64,
    /// Largest amount by which a joint leaves its limits; 0 when inside.
    pub joint_limits: f64,
    pub torque_limits: f64,
}

impl FeasibilityReport {
    /// Largest equality or bound violation (friction counted when positive).
    pub fn max(&self) -> f64 {
        [
            self.dynamics,
            self.grasp_position,
            self.orientation,
            self.height,
            self.load_anchor,
            self.load_stationary,
            self.feet_stationary,
            self.quaternion_norm,
            self.symmetry,
            self.friction.max(0.0),
            self.joint_limits,
            self.torque_limits,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct StaticPostureProblem {
    pub system: CompositeSystem,
    pub task: TaskSpec,
    pub weights: CostWeights,
    pub layout: Layout,
    torque_weights: DVector<f64>,
    human_reference: DVector<f64>,
    robot_reference: DVector<f64>,
    /// (contact index, owner) of environment and grasp contacts.
    environment: Vec<usize>,
    grasps: Vec<usize>,
    /// Feet reference orientations (per environment contact) and the load's.
    env_reference: Vec<Matrix3<f64>>,
    load_reference: Matrix3<f64>,
    /// Friction rows on inertial wrenches, one matrix per environment contact.
    friction_rows: Vec<DMatrix<f64>>,
    friction_margin: Vec<f64>,
    sym_human: DMatrix<f64>,
    sym_robot: DMatrix<f64>,
    unreachable: Option<String>,
    force_scale: f64,

    objective_scale: f64,
    var_scale: DVector<f64>,
}

fn clamp_reference(given: Option<&Vec<f64>>, lo: &DVector<f64>, hi: &DVector<f64>, who: &str) -> Result<DVector<f64>> {
    let n = lo.len();
    match given {
        Some(v) => {
            if v.len() != n {
                return Err(Error::Dimension {
                    what: "reference posture",
                    expected: n,
                    got: v.len(),
                });
            }
            for i in 0..n {
                if v[i] < lo[i] || v[i] > hi[i] {
                    return Err(Error::Contract(format!("{who} reference joint {i} is outside its limits")));
                }
            }
            Ok(DVector::from_column_slice(v))
        }
        None => Ok(DVector::from_fn(n, |i, _| 0.0f64.clamp(lo[i], hi[i]))),
    }
}

fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    rpy_to_rotation(&[0.0, 0.0, yaw])
}

/// Assemble the posture program for a system whose models already carry the
/// design π*.
pub fn build_problem(system: CompositeSystem, task: TaskSpec, weights: CostWeights) -> Result<StaticPostureProblem> {
    task.validate()?;
    weights.validate()?;
    let n1 = system.human.dofs();
    let n2 = system.robot.dofs();
    let layout = Layout {
        heights: task.load_heights.len(),
        human_dofs: n1,
        robot_dofs: n2,
        wrench_dim: system.wrench_dim(),
    };
    let torque_weights = match &weights.torque_weights {
        Some(w) => {
            if w.len() != n1 + n2 {
                return Err(Error::Dimension {
                    what: "torque weights",
                    expected: n1 + n2,
                    got: w.len(),
                });
            }
            DVector::from_column_slice(w)
        }
        None => {
            let refl = system.robot.motor_reflected_terms();
            DVector::from_fn(n1 + n2, |i, _| if i < n1 { 1.0 } else { refl.torque_map[(i - n1, i - n1)] })
        }
    };
    let human_reference = clamp_reference(task.human_reference.as_ref(), &system.human.lower_limits, &system.human.upper_limits, "human")?;
    let robot_reference = clamp_reference(task.robot_reference.as_ref(), &system.robot.lower_limits, &system.robot.upper_limits, "robot")?;

    let mut environment = Vec::new();
    let mut grasps = Vec::new();
    let mut env_reference = Vec::new();
    let mut friction_rows = Vec::new();
    let mut friction_margin = Vec::new();
    for (i, c) in system.contacts.iter().enumerate() {
        match c.kind {
            ContactKind::Environment => {
                let r = yaw_rotation(match c.owner {
                    AgentRole::Human => task.human_yaw,
                    _ => task.robot_yaw,
                });
                let fm = c.friction.as_ref().expect("validated environment contact");
                environment.push(i);
                friction_rows.push(fm.world_matrix(&r));
                friction_margin.push(fm.margin);
                env_reference.push(r);
            }
            ContactKind::Grasp => grasps.push(i),
        }
    }

    // coarse reach check: every grasp must be reachable from the owner's feet
    let mut unreachable = None;
    let top = *task.load_heights.last().expect("validated");
    for &g in &grasps {
        let c = &system.contacts[g];
        let owner = system.agent(c.owner);
        let lf = c.load_frame.as_deref().expect("validated grasp");
        let grasp_z = system.load.forward_kinematics(&Configuration::neutral(0), lf)?.position.z;
        for &e in environment.iter().filter(|&&e| system.contacts[e].owner == c.owner) {
            let reach = owner.path_length(&system.contacts[e].frame, &c.frame)?;
            if top + grasp_z > reach {
                unreachable = Some(format!(
                    "{} cannot reach {:.3} m from `{}` (path length {:.3} m)",
                    owner.name,
                    top + grasp_z,
                    system.contacts[e].frame,
                    reach
                ));
            }
        }
    }

    let g = system.human.gravity.norm().max(1.0);
    let total_mass = system.human.total_mass() + system.robot.total_mass() + system.load.total_mass();
    let force_scale = g * total_mass / (environment.len().max(1) as f64);
    let torque_scale = 0.2 * force_scale;
    let objective_scale = weights.w1 * torque_scale * torque_scale * layout.heights as f64;
    let mut block_scale = DVector::from_element(layout.block_size(), 1.0);
    let refl = system.robot.motor_reflected_terms();
    for i in 0..n1 {
        block_scale[layout.torque_offset() + i] = torque_scale;
    }
    for i in 0..n2 {
        block_scale[layout.torque_offset() + n1 + i] = torque_scale / refl.torque_map[(i, i)];
    }
    let offsets = system.wrench_offsets();
    for (c, &o) in system.contacts.iter().zip(&offsets) {
        for k in 0..c.dim() {
            block_scale[layout.wrench_offset() + o + k] = if k < 3 { force_scale } else { 0.1 * force_scale };
        }
    }
    let var_scale = DVector::from_fn(layout.num_variables(), |i, _| block_scale[i % layout.block_size()]);
    let sym_human = system.human.symmetry.clone();
    let sym_robot = system.robot.symmetry.clone();
    Ok(StaticPostureProblem {
        load_reference: yaw_rotation(task.load_yaw),
        system,
        task,
        weights,
        layout,
        torque_weights,
        human_reference,
        robot_reference,
        environment,
        grasps,
        env_reference,
        friction_rows,
        friction_margin,
        sym_human,
        sym_robot,
        unreachable,
        force_scale,

        objective_scale,
        var_scale,
    })
}

struct LocalRows {
    dynamics: usize,
    grasp: usize,
    orientation: usize,
    height: usize,
    quaternion: usize,
    symmetry: usize,
}

impl LocalRows {
    fn total(&self) -> usize {
        self.dynamics + self.grasp + self.orientation + self.height + self.quaternion + self.symmetry
    }
}

impl StaticPostureProblem {
    fn local_rows(&self) -> LocalRows {
        LocalRows {
            dynamics: self.system.nv(),
            grasp: 3 * self.grasps.len(),
            orientation: 3 * (self.environment.len() + 1),
            height: self.environment.len() + 1,
            quaternion: 3,
            symmetry: self.sym_human.nrows() + self.sym_robot.nrows(),
        }
    }

    fn feature_count(&self) -> usize {
        2 + 2 * self.environment.len()
    }

    fn cross_rows(&self) -> usize {
        2 + (self.layout.heights - 1) * self.feature_count()
    }

    pub fn num_equalities(&self) -> usize {
        self.layout.heights * self.local_rows().total() + self.cross_rows()
    }

    pub fn num_inequalities(&self) -> usize {
        self.layout.heights * self.friction_rows.iter().map(|c| c.nrows()).sum::<usize>()
    }

    /// Row (or bound) count of every constraint family.
    pub fn constraint_registry(&self) -> Vec<(ConstraintFamily, usize)> {
        let k = self.layout.heights;
        let l = self.local_rows();
        let bounded_torques = self.layout.robot_dofs;
        vec![
            (ConstraintFamily::Dynamics, k * l.dynamics),
            (ConstraintFamily::GraspPosition, k * l.grasp),
            (ConstraintFamily::Orientation, k * l.orientation),
            (ConstraintFamily::Height, k * l.height),
            (ConstraintFamily::LoadAnchor, 2),
            (ConstraintFamily::LoadStationary, 2 * (k - 1)),
            (ConstraintFamily::FeetStationary, 2 * self.environment.len() * (k - 1)),
            (ConstraintFamily::QuaternionNorm, k * l.quaternion),
            (ConstraintFamily::Symmetry, k * l.symmetry),
            (ConstraintFamily::Friction, self.num_inequalities()),
            (ConstraintFamily::JointLimits, k * (self.layout.human_dofs + self.layout.robot_dofs)),
            (ConstraintFamily::TorqueLimits, k * bounded_torques),
        ]
    }

    pub fn torque_weights(&self) -> &DVector<f64> {
        &self.torque_weights
    }

    /// Reason the task is known to be infeasible before solving, if any.
    pub fn unreachable(&self) -> Option<&str> {
        self.unreachable.as_deref()
    }

    fn unpack_configuration(&self, yb: &[f64]) -> CompositeConfiguration {
        let l = &self.layout;
        let agent = |off: usize, n: usize| Configuration {
            base_position: Vector3::new(yb[off], yb[off + 1], yb[off + 2]),
            base_quaternion: Vector4::new(yb[off + 3], yb[off + 4], yb[off + 5], yb[off + 6]),
            joints: DVector::from_column_slice(&yb[off + 7..off + 7 + n]),
        };
        CompositeConfiguration {
            human: agent(l.human_offset(), l.human_dofs),
            robot: agent(l.robot_offset(), l.robot_dofs),
            load: agent(l.load_offset(), 0),
        }
    }

    fn pack_configuration(&self, q: &CompositeConfiguration, yb: &mut [f64]) {
        for role in AgentRole::ALL {
            let c = q.get(role);
            let off = self.layout.agent_offset(role);
            yb[off..off + 3].copy_from_slice(c.base_position.as_slice());
            yb[off + 3..off + 7].copy_from_slice(c.base_quaternion.as_slice());
            yb[off + 7..off + 7 + c.dofs()].copy_from_slice(c.joints.as_slice());
        }
    }

    fn frame_position(&self, kin: &CompositeKinematics, role: AgentRole, frame: &str) -> Vector3<f64> {
        self.system
            .agent(role)
            .frame_pose_cached(&kin.agents[role.index()], frame)
            .expect("frames validated at construction")
            .position
    }

    fn frame_rotation(&self, kin: &CompositeKinematics, role: AgentRole, frame: &str) -> Matrix3<f64> {
        self.system
            .agent(role)
            .frame_pose_cached(&kin.agents[role.index()], frame)
            .expect("frames validated at construction")
            .rotation
    }

    fn load_base(&self) -> &str {
        &self.system.load.bodies[0].name
    }

    /// Local equalities (dynamics rows divided by the force scale) and the
    /// horizontal features tied across heights.
    fn height_terms(&self, k: usize, yb: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let l = &self.layout;
        let rows = self.local_rows();
        let q = self.unpack_configuration(yb);
        let tau = DVector::from_column_slice(&yb[l.torque_offset()..l.torque_offset() + l.torque_dim()]);
        let f = DVector::from_column_slice(&yb[l.wrench_offset()..l.wrench_offset() + l.wrench_dim]);
        let mut out = DVector::zeros(rows.total());
        let mut feat = DVector::zeros(self.feature_count());
        let Ok(kin) = self.system.kinematics(&q) else {
            out.fill(f64::NAN);
            return (out, feat);
        };
        let dynamics = self
            .system
            .static_residual_cached(&kin, &tau, &f)
            .expect("dimensions fixed by the layout");
        out.rows_mut(0, rows.dynamics).copy_from(&(dynamics / self.force_scale));
        let mut r = rows.dynamics;
        for &g in &self.grasps {
            let c = &self.system.contacts[g];
            let hand = self.frame_position(&kin, c.owner, &c.frame);
            let target = self.frame_position(&kin, AgentRole::Load, c.load_frame.as_deref().expect("grasp"));
            out.rows_mut(r, 3).copy_from(&(hand - target));
            r += 3;
        }
        for (i, &e) in self.environment.iter().enumerate() {
            let c = &self.system.contacts[e];
            let rot = self.frame_rotation(&kin, c.owner, &c.frame);
            out.rows_mut(r, 3).copy_from(&orientation_error(&rot, &self.env_reference[i]));
            r += 3;
        }
        let load_rot = self.frame_rotation(&kin, AgentRole::Load, self.load_base());
        out.rows_mut(r, 3).copy_from(&orientation_error(&load_rot, &self.load_reference));
        r += 3;
        for (i, &e) in self.environment.iter().enumerate() {
            let c = &self.system.contacts[e];
            let p = self.frame_position(&kin, c.owner, &c.frame);
            out[r] = p.z;
            feat[2 + 2 * i] = p.x;
            feat[3 + 2 * i] = p.y;
            r += 1;
        }
        let load_p = self.frame_position(&kin, AgentRole::Load, self.load_base());
        out[r] = load_p.z - self.task.load_heights[k];
        feat[0] = load_p.x;
        feat[1] = load_p.y;
        r += 1;
        for role in AgentRole::ALL {
            out[r] = q.get(role).base_quaternion.norm_squared() - 1.0;
            r += 1;
        }
        let sh = &self.sym_human * &q.human.joints;
        let sr = &self.sym_robot * &q.robot.joints;
        out.rows_mut(r, sh.len()).copy_from(&sh);
        r += sh.len();
        out.rows_mut(r, sr.len()).copy_from(&sr);
        (out, feat)
    }

    fn physical(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.var_scale)
    }

    fn internal(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_div(&self.var_scale)
    }

    fn block_slice<'a>(&self, y: &'a DVector<f64>, k: usize) -> &'a [f64] {
        &y.as_slice()[self.layout.block(k)]
    }

    fn equalities_physical(&self, y: &DVector<f64>) -> DVector<f64> {
        let nk = self.layout.heights;
        let local = self.local_rows().total();
        let nfeat = self.feature_count();
        let mut c = DVector::zeros(self.num_equalities());
        let mut feats = Vec::with_capacity(nk);
        for k in 0..nk {
            let (loc, feat) = self.height_terms(k, self.block_slice(y, k));
            c.rows_mut(k * local, local).copy_from(&loc);
            feats.push(feat);
        }
        let mut r = nk * local;
        c[r] = feats[0][0] - self.task.load_xy[0];
        c[r + 1] = feats[0][1] - self.task.load_xy[1];
        r += 2;
        for feat in feats.iter().skip(1) {
            c.rows_mut(r, nfeat).copy_from(&(feat - &feats[0]));
            r += nfeat;
        }
        c
    }

    fn inequalities_physical(&self, y: &DVector<f64>) -> DVector<f64> {
        let l = &self.layout;
        let offsets = self.system.wrench_offsets();
        let mut out = DVector::zeros(self.num_inequalities());
        let mut r = 0;
        for k in 0..l.heights {
            let yb = self.block_slice(y, k);
            for (i, &e) in self.environment.iter().enumerate() {
                let o = l.wrench_offset() + offsets[e];
                let w = DVector::from_column_slice(&yb[o..o + 6]);
                let v = (&self.friction_rows[i] * w).add_scalar(self.friction_margin[i]) / self.force_scale;
                out.rows_mut(r, v.len()).copy_from(&v);
                r += v.len();
            }
        }
        out
    }

    fn geodesic_sq(a: &[f64], b: &[f64]) -> f64 {
        let qa = Vector4::new(a[0], a[1], a[2], a[3]);
        let qb = Vector4::new(b[0], b[1], b[2], b[3]);
        if qa.norm() == 0.0 || qb.norm() == 0.0 {
            return 0.0;
        }
        let t = quaternion_angle(&qa, &qb);
        t * t
    }

    /// Gradient and PSD-projected Hessian of angle² over the 8 quaternion
    /// components of two consecutive heights.
    fn geodesic_derivatives(a: &[f64], b: &[f64], hessian: bool) -> (DVector<f64>, DMatrix<f64>) {
        let h = 1e-6;
        let v: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let f = |v: &[f64]| Self::geodesic_sq(&v[..4], &v[4..]);
        let grad = |v: &[f64]| {
            DVector::from_fn(8, |i, _| {
                let mut p = v.to_vec();
                let mut m = v.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
        };
        let g = grad(&v);
        if !hessian {
            return (g, DMatrix::zeros(0, 0));
        }
        let hh = 1e-4;
        let mut hess = DMatrix::zeros(8, 8);
        for i in 0..8 {
            let mut p = v.clone();
            let mut m = v.clone();
            p[i] += hh;
            m[i] -= hh;
            let col = (grad(&p) - grad(&m)) / (2.0 * hh);
            hess.set_column(i, &col);
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let vals = eig.eigenvalues.map(|x| x.max(0.0));
        let psd = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        (g, psd)
    }

    fn objective_physical(&self, y: &DVector<f64>) -> f64 {
        let l = &self.layout;
        let w = &self.weights;
        let mut total = 0.0;
        for k in 0..l.heights {
            let yb = self.block_slice(y, k);
            let t1: f64 = (0..l.torque_dim())
                .map(|i| (self.torque_weights[i] * yb[l.torque_offset() + i]).powi(2))
                .sum();
            let t2: f64 = (0..l.human_dofs)
                .map(|i| (yb[l.human_offset() + 7 + i] - self.human_reference[i]).powi(2))
                .chain((0..l.robot_dofs).map(|i| (yb[l.robot_offset() + 7 + i] - self.robot_reference[i]).powi(2)))
                .sum();
            total += w.w1 * t1 + w.w2 * t2;
        }
        for k in 0..l.heights.saturating_sub(1) {
            let a = self.block_slice(y, k);
            let b = self.block_slice(y, k + 1);
            for (off, n) in [(l.human_offset(), l.human_dofs), (l.robot_offset(), l.robot_dofs)] {
                let mut t3 = 0.0;
                for i in (0..3).chain(7..7 + n) {
                    t3 += (a[off + i] - b[off + i]).powi(2);
                }
                t3 += Self::geodesic_sq(&a[off + 3..off + 7], &b[off + 3..off + 7]);
                total += w.w3 * t3;
            }
        }
        total
    }

    /// Gradient and PSD Hessian model of the physical objective.
    fn objective_derivatives_physical(&self, y: &DVector<f64>, hessian: bool) -> (DVector<f64>, DMatrix<f64>) {
        let l = &self.layout;
        let w = &self.weights;
        let n = l.num_variables();
        let mut g = DVector::zeros(n);
        let mut h = if hessian { DMatrix::zeros(n, n) } else { DMatrix::zeros(0, 0) };
        let add = |h: &mut DMatrix<f64>, i: usize, j: usize, v: f64| {
            if hessian {
                h[(i, j)] += v;
            }
        };
        for k in 0..l.heights {
            let base = k * l.block_size();
            for i in 0..l.torque_dim() {
                let j = base + l.torque_offset() + i;
                let wi = self.torque_weights[i] * self.torque_weights[i];
                g[j] += 2.0 * w.w1 * wi * y[j];
                add(&mut h, j, j, 2.0 * w.w1 * wi);
            }
            for i in 0..l.human_dofs {
                let j = base + l.human_offset() + 7 + i;
                g[j] += 2.0 * w.w2 * (y[j] - self.human_reference[i]);
                add(&mut h, j, j, 2.0 * w.w2);
            }
            for i in 0..l.robot_dofs {
                let j = base + l.robot_offset() + 7 + i;
                g[j] += 2.0 * w.w2 * (y[j] - self.robot_reference[i]);
                add(&mut h, j, j, 2.0 * w.w2);
            }
        }
        for k in 0..l.heights.saturating_sub(1) {
            let (ba, bb) = (k * l.block_size(), (k + 1) * l.block_size());
            for (off, nj) in [(l.human_offset(), l.human_dofs), (l.robot_offset(), l.robot_dofs)] {
                for i in (0..3).chain(7..7 + nj) {
                    let (ja, jb) = (ba + off + i, bb + off + i);
                    let d = y[ja] - y[jb];
                    g[ja] += 2.0 * w.w3 * d;
                    g[jb] -= 2.0 * w.w3 * d;
                    add(&mut h, ja, ja, 2.0 * w.w3);
                    add(&mut h, jb, jb, 2.0 * w.w3);
                    add(&mut h, ja, jb, -2.0 * w.w3);
                    add(&mut h, jb, ja, -2.0 * w.w3);
                }
                let qa = &y.as_slice()[ba + off + 3..ba + off + 7];
                let qb = &y.as_slice()[bb + off + 3..bb + off + 7];
                let (gq, hq) = Self::geodesic_derivatives(qa, qb, hessian);
                let idx: Vec<usize> = (0..4).map(|i| ba + off + 3 + i).chain((0..4).map(|i| bb + off + 3 + i)).collect();
                for (a, &ia) in idx.iter().enumerate() {
                    g[ia] += w.w3 * gq[a];
                    if hessian {
                        for (b, &ib) in idx.iter().enumerate() {
                            add(&mut h, ia, ib, w.w3 * hq[(a, b)]);
                        }
                    }
                }
            }
        }
        (g, h)
    }

    fn equality_jacobian_physical(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let l = &self.layout;
        let nk = l.heights;
        let local = self.local_rows().total();
        let nfeat = self.feature_count();
        let nb = l.block_size();
        let nq = l.configuration_size();
        let mut jac = DMatrix::zeros(self.num_equalities(), l.num_variables());
        let mut feat_jac = Vec::with_capacity(nk);
        let step = 1e-6;
        for k in 0..nk {
            let mut yb = self.block_slice(y, k).to_vec();
            let mut fj = DMatrix::zeros(nfeat, nb);
            for j in 0..nq {
                let orig = yb[j];
                yb[j] = orig + step;
                let (lp, fp) = self.height_terms(k, &yb);
                yb[j] = orig - step;
                let (lm, fm) = self.height_terms(k, &yb);
                yb[j] = orig;
                jac.view_mut((k * local, k * nb + j), (local, 1))
                    .copy_from(&((lp - lm) / (2.0 * step)));
                fj.set_column(j, &((fp - fm) / (2.0 * step)));
            }
            // dynamics are linear in τ̄ and f: −𝐁̄ and −𝐐ᵀ
            let q = self.unpack_configuration(&yb);
            let kin = self.system.kinematics(&q).expect("finite configuration");
            let b = self.system.torque_map() / (-self.force_scale);
            let qt = self
                .system
                .coupling_matrix_cached(&kin)
                .expect("frames validated")
                .transpose()
                / (-self.force_scale);
            let nv = self.system.nv();
            jac.view_mut((k * local, k * nb + l.torque_offset()), (nv, l.torque_dim())).copy_from(&b);
            jac.view_mut((k * local, k * nb + l.wrench_offset()), (nv, l.wrench_dim)).copy_from(&qt);
            feat_jac.push(fj);
        }
        let mut r = nk * local;
        jac.view_mut((r, 0), (2, nb)).copy_from(&feat_jac[0].rows(0, 2));
        r += 2;
        for k in 1..nk {
            jac.view_mut((r, k * nb), (nfeat, nb)).copy_from(&feat_jac[k]);
            let mut first = jac.view_mut((r, 0), (nfeat, nb));
            first -= &feat_jac[0];
            r += nfeat;
        }
        jac
    }

    fn inequality_jacobian_physical(&self) -> DMatrix<f64> {
        let l = &self.layout;
        let offsets = self.system.wrench_offsets();
        let mut jac = DMatrix::zeros(self.num_inequalities(), l.num_variables());
        let mut r = 0;
        for k in 0..l.heights {
            for (i, &e) in self.environment.iter().enumerate() {
                let c = &self.friction_rows[i];
                let col = k * l.block_size() + l.wrench_offset() + offsets[e];
                jac.view_mut((r, col), (c.nrows(), 6)).copy_from(&(c / self.force_scale));
                r += c.nrows();
            }
        }
        jac
    }

    fn bounds_physical(&self) -> (DVector<f64>, DVector<f64>) {
        let l = &self.layout;
        let n = l.num_variables();
        let mut lo = DVector::from_element(n, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(n, f64::INFINITY);
        for k in 0..l.heights {
            let base = k * l.block_size();
            for role in AgentRole::ALL {
                let off = base + l.agent_offset(role);
                for i in 3..7 {
                    lo[off + i] = -1.5;
                    hi[off + i] = 1.5;
                }
                let model = self.system.agent(role);
                for i in 0..model.dofs() {
                    lo[off + 7 + i] = model.lower_limits[i];
                    hi[off + 7 + i] = model.upper_limits[i];
                }
            }
            for (i, m) in self.system.robot.motors.iter().enumerate() {
                let (tl, tu) = m.as_ref().expect("validated robot").motor_torque_bounds();
                lo[base + l.torque_offset() + l.human_dofs + i] = tl;
                hi[base + l.torque_offset() + l.human_dofs + i] = tu;
            }
        }
        (lo, hi)
    }

    /// Physical variable vector from per-height solutions.
    fn pack(&self, heights: &[HeightSolution]) -> DVector<f64> {
        let l = &self.layout;
        let mut y = DVector::zeros(l.num_variables());
        for (k, h) in heights.iter().enumerate() {
            let base = k * l.block_size();
            let yb = &mut y.as_mut_slice()[base..base + l.block_size()];
            self.pack_configuration(&h.configuration, yb);
            yb[l.torque_offset()..l.torque_offset() + l.torque_dim()].copy_from_slice(h.torques.as_slice());
            yb[l.wrench_offset()..].copy_from_slice(h.wrenches.as_slice());
        }
        y
    }

    fn unpack(&self, y: &DVector<f64>) -> Vec<HeightSolution> {
        let l = &self.layout;
        (0..l.heights)
            .map(|k| {
                let yb = self.block_slice(y, k);
                HeightSolution {
                    height: self.task.load_heights[k],
                    configuration: self.unpack_configuration(yb),
                    torques: DVector::from_column_slice(&yb[l.torque_offset()..l.torque_offset() + l.torque_dim()]),
                    wrenches: DVector::from_column_slice(&yb[l.wrench_offset()..]),
                }
            })
            .collect()
    }

    /// Objective of Eq.-style weighted costs at a physical point.
    pub fn objective_at(&self, heights: &[HeightSolution]) -> f64 {
        self.objective_physical(&self.pack(heights))
    }

    /// Upright guess with hands pre-placed by a damped least-squares reach
    /// and wrenches from the minimum-norm static balance.
    pub fn initial_guess(&self, perturbation: Option<&mut ChaCha8Rng>) -> Vec<HeightSolution> {
        let l = self.layout;
        let mut starts = [self.human_reference.clone(), self.robot_reference.clone()];
        if let Some(rng) = perturbation {
            for (s, role) in starts.iter_mut().zip([AgentRole::Human, AgentRole::Robot]) {
                let m = self.system.agent(role);
                for i in 0..s.len() {
                    s[i] = (s[i] + rng.gen_range(-0.3..0.3)).clamp(m.lower_limits[i], m.upper_limits[i]);
                }
                let sym = &m.symmetry;
                if sym.nrows() > 0 {
                    // project onto the symmetric subspace
                    let svd = sym.clone().svd(true, true);
                    let proj = svd.solve(&(sym * &*s), 1e-12).unwrap_or_else(|_| DVector::zeros(s.len()));
                    *s -= proj;
                }
            }
        }
        let mut out: Vec<HeightSolution> = Vec::with_capacity(l.heights);
        let mut feet_xy: Vec<Option<Vector3<f64>>> = vec![None; self.environment.len()];
        for k in 0..l.heights {
            let mut load = Configuration::neutral(0);
            load.base_position = Vector3::new(self.task.load_xy[0], self.task.load_xy[1], self.task.load_heights[k]);
            load.base_quaternion = rotation_to_quaternion(&self.load_reference);
            let mut q = CompositeConfiguration {
                human: Configuration::neutral(l.human_dofs),
                robot: Configuration::neutral(l.robot_dofs),
                load,
            };
            for (a, role) in [AgentRole::Human, AgentRole::Robot].into_iter().enumerate() {
                let start = if k == 0 {
                    self.upright_start(role, &starts[a], &q.load)
                } else {
                    out[k - 1].configuration.get(role).clone()
                };
                *q.get_mut(role) = self.reach(role, start, &q.load, &starts[a], &feet_xy);
            }
            if k == 0 {
                let kin = self.system.kinematics(&q).expect("finite guess");
                for (i, &e) in self.environment.iter().enumerate() {
                    let c = &self.system.contacts[e];
                    feet_xy[i] = Some(self.frame_position(&kin, c.owner, &c.frame));
                }
            }
            let (torques, wrenches) = self.balance_wrenches(&q);
            out.push(HeightSolution {
                height: self.task.load_heights[k],
                configuration: q,
                torques,
                wrenches,
            });
        }
        out
    }

    fn agent_yaw(&self, role: AgentRole) -> f64 {
        match role {
            AgentRole::Human => self.task.human_yaw,
            _ => self.task.robot_yaw,
        }
    }

    fn upright_start(&self, role: AgentRole, s: &DVector<f64>, load: &Configuration) -> Configuration {
        let model = self.system.agent(role);
        let yaw = self.agent_yaw(role);
        let mut c = Configuration::neutral(model.dofs());
        c.joints = s.clone();
        c.base_quaternion = rotation_to_quaternion(&yaw_rotation(yaw));
        let load_kin = self.system.load.kinematics(load).expect("finite load pose");
        let targets: Vec<Vector3<f64>> = self
            .grasps
            .iter()
            .filter(|&&g| self.system.contacts[g].owner == role)
            .map(|&g| {
                let lf = self.system.contacts[g].load_frame.as_deref().expect("grasp");
                self.system.load.frame_pose_cached(&load_kin, lf).expect("validated").position
            })
            .collect();
        let center = if targets.is_empty() {
            load.base_position
        } else {
            targets.iter().sum::<Vector3<f64>>() / targets.len() as f64
        };
        let facing = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        c.base_position = Vector3::new(center.x, center.y, 0.0) - 0.3 * facing;
        let kin = model.kinematics(&c).expect("finite start");
        let lowest = self
            .environment
            .iter()
            .filter(|&&e| self.system.contacts[e].owner == role)
            .map(|&e| model.frame_pose_cached(&kin, &self.system.contacts[e].frame).expect("validated").position.z)
            .fold(f64::INFINITY, f64::min);
        if lowest.is_finite() {
            c.base_position.z -= lowest;
        }
        c
    }

    fn reach_residual(
        &self,
        role: AgentRole,
        c: &Configuration,
        load_kin: &crate::kinematics::KinematicsCache,
        reference: &DVector<f64>,
        feet_xy: &[Option<Vector3<f64>>],
    ) -> DVector<f64> {
        let model = self.system.agent(role);
        let kin = model.kinematics(c).expect("finite configuration");
        let mut r = Vec::new();
        for (i, &e) in self.environment.iter().enumerate() {
            let contact = &self.system.contacts[e];
            if contact.owner != role {
                continue;
            }
            let pose = model.frame_pose_cached(&kin, &contact.frame).expect("validated");
            r.extend(orientation_error(&pose.rotation, &self.env_reference[i]).iter());
            r.push(pose.position.z);
            if let Some(xy) = feet_xy[i] {
                r.push(pose.position.x - xy.x);
                r.push(pose.position.y - xy.y);
            }
        }
        for &g in &self.grasps {
            let contact = &self.system.contacts[g];
            if contact.owner != role {
                continue;
            }
            let hand = model.frame_pose_cached(&kin, &contact.frame).expect("validated").position;
            let lf = contact.load_frame.as_deref().expect("grasp");
            let target = self.system.load.frame_pose_cached(load_kin, lf).expect("validated").position;
            r.extend((hand - target).iter());
        }
        let sym = &model.symmetry * &c.joints;
        r.extend(sym.iter());
        for i in 0..c.dofs() {
            r.push(0.03 * (c.joints[i] - reference[i]));
        }
        DVector::from_vec(r)
    }

    /// Levenberg–Marquardt on one agent's kinematic constraints.
    fn reach(
        &self,
        role: AgentRole,
        start: Configuration,
        load: &Configuration,
        reference: &DVector<f64>,
        feet_xy: &[Option<Vector3<f64>>],
    ) -> Configuration {
        let model = self.system.agent(role);
        let load_kin = self.system.load.kinematics(load).expect("finite load pose");
        let n = 6 + model.dofs();
        let retract = |c: &Configuration, d: &DVector<f64>| {
            let mut out = c.clone();
            out.base_position += Vector3::new(d[0], d[1], d[2]);
            let step = UnitQuaternion::from_scaled_axis(Vector3::new(d[3], d[4], d[5]));
            let q = c.base_quaternion.normalize();
            let cur = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
            let next = step * cur;
            out.base_quaternion = Vector4::new(next.w, next.i, next.j, next.k);
            for i in 0..model.dofs() {
                out.joints[i] = (c.joints[i] + d[6 + i]).clamp(model.lower_limits[i], model.upper_limits[i]);
            }
            out
        };
        let mut c = start;
        let mut r = self.reach_residual(role, &c, &load_kin, reference, feet_xy);
        let mut lambda = 1e-3;
        for _ in 0..100 {
            let h = 1e-7;
            let mut jac = DMatrix::zeros(r.len(), n);
            for j in 0..n {
                let mut d = DVector::zeros(n);
                d[j] = h;
                let rp = self.reach_residual(role, &retract(&c, &d), &load_kin, reference, feet_xy);
                d[j] = -h;
                let rm = self.reach_residual(role, &retract(&c, &d), &load_kin, reference, feet_xy);
                jac.set_column(j, &((rp - rm) / (2.0 * h)));
            }
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &r;
            let mut improved = false;
            for _ in 0..10 {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let d = -chol.solve(&jtr);
                let trial = retract(&c, &d);
                let rt = self.reach_residual(role, &trial, &load_kin, reference, feet_xy);
                if rt.norm_squared() < r.norm_squared() {
                    c = trial;
                    r = rt;
                    lambda = (lambda * 0.3).max(1e-9);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved || jtr.amax() < 1e-12 {
                break;
            }
        }
        c.normalized()
    }

    /// Minimum-norm (in scaled units) τ̄ and f balancing gravity at q.
    fn balance_wrenches(&self, q: &CompositeConfiguration) -> (DVector<f64>, DVector<f64>) {
        let l = &self.layout;
        let kin = self.system.kinematics(q).expect("finite configuration");
        let h = self
            .static_rhs(&kin)
            .unwrap_or_else(|| DVector::zeros(self.system.nv()));
        let nt = l.torque_dim();
        let scale = self.var_scale.rows(l.torque_offset(), nt + l.wrench_dim).into_owned();
        let mut m = DMatrix::zeros(self.system.nv(), nt + l.wrench_dim);
        m.view_mut((0, 0), (self.system.nv(), nt)).copy_from(&self.system.torque_map());
        let qt = self.system.coupling_matrix_cached(&kin).expect("validated").transpose();
        m.view_mut((0, nt), (self.system.nv(), l.wrench_dim)).copy_from(&qt);
        let ms = &m * DMatrix::from_diagonal(&scale);
        let mut mmt = &ms * ms.transpose();
        let reg = 1e-9 * (1.0 + mmt.diagonal().amax());
        for i in 0..mmt.nrows() {
            mmt[(i, i)] += reg;
        }
        let z = match mmt.cholesky() {
            Some(ch) => ms.transpose() * ch.solve(&h),
            None => DVector::zeros(nt + l.wrench_dim),
        };
        let sol = z.component_mul(&scale);
        let mut torques = sol.rows(0, nt).into_owned();
        let (lo, hi) = self.bounds_physical();
        for i in 0..nt {
            torques[i] = torques[i].clamp(lo[l.torque_offset() + i], hi[l.torque_offset() + i]);
        }
        (torques, sol.rows(nt, l.wrench_dim).into_owned())
    }

    fn static_rhs(&self, kin: &CompositeKinematics) -> Option<DVector<f64>> {
        let zero_t = DVector::zeros(self.layout.torque_dim());
        let zero_f = DVector::zeros(self.layout.wrench_dim);
        self.system.static_residual_cached(kin, &zero_t, &zero_f).ok()
    }

    fn options_for(&self, options: &SolverOptions) -> SqpOptions {
        SqpOptions {
            max_iterations: options.max_iterations,
            tol_feasibility: options.tolerance * 1e-3,
            tol_optimality: options.tolerance,
            ..SqpOptions::default()
        }
    }

    fn finish(&self, heights: Vec<HeightSolution>, status: PostureStatus, iterations: usize, restarts: usize) -> PostureSolution {
        let objective = self.objective_at(&heights);
        let mut sol = PostureSolution {
            status,
            heights,
            objective,
            max_violation: 0.0,
            iterations,
            restarts,
            torque_weights: self.torque_weights.clone(),
            human_reference: self.human_reference.clone(),
            robot_reference: self.robot_reference.clone(),
        };
        sol.max_violation = self.check_feasibility(&sol).max();
        sol
    }

    /// Solve from the built-in initial guess, restarting from seeded
    /// perturbations when the solver fails.
    pub fn solve(&self, options: &SolverOptions) -> PostureSolution {
        self.solve_from(None, options)
    }

    /// Solve from explicit per-height guesses (quaternions are normalized first).
    pub fn solve_from(&self, init: Option<&[HeightSolution]>, options: &SolverOptions) -> PostureSolution {
        if self.unreachable.is_some() {
            return self.finish(self.initial_guess(None), PostureStatus::Infeasible, 0, 0);
        }
        let sqp_options = self.options_for(options);
        let mut best: Option<(PostureSolution, f64)> = None;
        let mut total_iterations = 0;
        for attempt in 0..=options.restarts {
            let guess = match (attempt, init) {
                (0, Some(given)) if given.len() == self.layout.heights => given
                    .iter()
                    .map(|h| {
                        let mut h = h.clone();
                        for role in AgentRole::ALL {
                            *h.configuration.get_mut(role) = h.configuration.get(role).normalized();
                        }
                        h
                    })
                    .collect(),
                (0, _) => self.initial_guess(None),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(0x9e37_79b9 * attempt as u64));
                    self.initial_guess(Some(&mut rng))
                }
            };
            let x0 = self.internal(&self.pack(&guess));
            let result = sqp::solve(self, &x0, &sqp_options);
            total_iterations += result.iterations;
            let status = match result.status {
                SqpStatus::Converged => PostureStatus::Solved,
                SqpStatus::MaxIterations => PostureStatus::MaxIterations,
                SqpStatus::Infeasible | SqpStatus::NumericalFailure => PostureStatus::Infeasible,
            };
            let heights = self.unpack(&self.physical(&result.x));
            let sol = self.finish(heights, status, total_iterations, attempt);
            if sol.solved() {
                return sol;
            }
            let v = sol.max_violation;
            if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                best = Some((sol, v));
            }
        }
        let (mut sol, _) = best.expect("at least one attempt");
        sol.iterations = total_iterations;
        sol
    }

    /// Re-evaluate every constraint family from the models, independently of
    /// the NLP assembly.
    pub fn check_feasibility(&self, sol: &PostureSolution) -> FeasibilityReport {
        let mut rep = FeasibilityReport {
            min_normal_force: f64::INFINITY,
            friction: f64::NEG_INFINITY,
            ..FeasibilityReport::default()
        };
        let sys = &self.system;
        let mut first_feet: Vec<Vector3<f64>> = Vec::new();
        let mut first_load = Vector3::zeros();
        let up = |a: &mut f64, v: f64| *a = a.max(if v.is_nan() { f64::INFINITY } else { v });
        for (k, h) in sol.heights.iter().enumerate() {
            let q = &h.configuration;
            let Ok(res) = sys.composite_static_residual(q, &h.torques, &h.wrenches) else {
                rep.dynamics = f64::INFINITY;
                continue;
            };
            up(&mut rep.dynamics, res.amax());
            for (i, c) in sys.contacts.iter().enumerate() {
                let owner = sys.agent(c.owner);
                let pose = owner.forward_kinematics(q.get(c.owner), &c.frame).expect("validated");
                match c.kind {
                    ContactKind::Grasp => {
                        let lf = c.load_frame.as_deref().expect("grasp");
                        let target = sys.load.forward_kinematics(&q.load, lf).expect("validated").position;
                        up(&mut rep.grasp_position, (pose.position - target).amax());
                    }
                    ContactKind::Environment => {
                        let r_ref = yaw_rotation(self.agent_yaw(c.owner));
                        up(&mut rep.orientation, (pose.rotation - r_ref).amax());
                        up(&mut rep.height, pose.position.z.abs());
                        if k == 0 {
                            first_feet.push(pose.position);
                        } else {
                            let f0 = first_feet[self.environment.iter().position(|&e| e == i).expect("env")];
                            up(&mut rep.feet_stationary, (pose.position - f0).amax());
                        }
                        let w = sys.contact_wrench(i, &h.wrenches);
                        let rt = r_ref.transpose();
                        let local_f = rt * w.fixed_rows::<3>(0);
                        let local_m = rt * w.fixed_rows::<3>(3);
                        let local = nalgebra::Vector6::new(local_f.x, local_f.y, local_f.z, local_m.x, local_m.y, local_m.z);
                        let fm = c.friction.as_ref().expect("validated");
                        let cf = fm.matrix() * DVector::from_column_slice(local.as_slice()) - fm.bounds();
                        rep.friction = rep.friction.max(cf.max());
                        rep.min_normal_force = rep.min_normal_force.min(local_f.z);
                    }
                }
            }
            let load_pose = sys.load.forward_kinematics(&q.load, self.load_base()).expect("base");
            up(&mut rep.orientation, (load_pose.rotation - self.load_reference).amax());
            up(&mut rep.height, (load_pose.position.z - h.height).abs());
            if k == 0 {
                first_load = load_pose.position;
                up(&mut rep.load_anchor, (load_pose.position.x - self.task.load_xy[0]).abs());
                up(&mut rep.load_anchor, (load_pose.position.y - self.task.load_xy[1]).abs());
            } else {
                up(&mut rep.load_stationary, (load_pose.position.x - first_load.x).abs());
                up(&mut rep.load_stationary, (load_pose.position.y - first_load.y).abs());
            }
            for role in AgentRole::ALL {
                let c = q.get(role);
                up(&mut rep.quaternion_norm, (c.base_quaternion.norm() - 1.0).abs());
                let m = sys.agent(role);
                if m.dofs() > 0 {
                    if m.symmetry.nrows() > 0 {
                        up(&mut rep.symmetry, (&m.symmetry * &c.joints).amax());
                    }
                    for i in 0..m.dofs() {
                        up(&mut rep.joint_limits, (m.lower_limits[i] - c.joints[i]).max(c.joints[i] - m.upper_limits[i]));
                    }
                }
            }
            let n1 = sys.human.dofs();
            for (i, m) in sys.robot.motors.iter().enumerate() {
                let (lo, hi) = m.as_ref().expect("validated").motor_torque_bounds();
                let t = h.torques[n1 + i];
                up(&mut rep.torque_limits, (lo - t).max(t - hi));
            }
        }
        if rep.friction == f64::NEG_INFINITY {
            rep.friction = 0.0;
        }
        if rep.min_normal_force == f64::INFINITY {
            rep.min_normal_force = 0.0;
        }
        rep
    }
}

impl Nlp for StaticPostureProblem {
    fn num_variables(&self) -> usize {
        self.layout.num_variables()
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let (lo, hi) = self.bounds_physical();
        (self.internal(&lo), self.internal(&hi))
    }

    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let y = self.physical(x);
        Evaluation {
            objective: self.objective_physical(&y) / self.objective_scale,
            equalities: self.equalities_physical(&y),
            inequalities: self.inequalities_physical(&y),
        }
    }

    fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
        let y = self.physical(x);
        let (g, _) = self.objective_derivatives_physical(&y, false);
        let mut eq_jacobian = self.equality_jacobian_physical(&y);
        let mut ineq_jacobian = self.inequality_jacobian_physical();
        for (j, s) in self.var_scale.iter().enumerate() {
            eq_jacobian.column_mut(j).scale_mut(*s);
            ineq_jacobian.column_mut(j).scale_mut(*s);
        }
        Derivatives {
            gradient: g.component_mul(&self.var_scale) / self.objective_scale,
            eq_jacobian,
            ineq_jacobian,
        }
    }

    fn exact_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let y = self.physical(x);
        let (_, h) = self.objective_derivatives_physical(&y, true);
        let s = &self.var_scale;
        DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * s[i] * s[j] / self.objective_scale)
    }

    fn exact_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.physical(x);
        let (g, _) = self.objective_derivatives_physical(&y, false);
        g.component_mul(&self.var_scale) / self.objective_scale
    }

    fn hessian_blocks(&self) -> Vec<Range<usize>> {
        (0..self.layout.heights).map(|k| self.layout.block(k)).collect()
    }

    fn step_limits(&self) -> DVector<f64> {
        let l = &self.layout;
        DVector::from_fn(l.num_variables(), |i, _| {
            if i % l.block_size() < l.configuration_size() {
                0.3
            } else {
                f64::INFINITY
            }
        })
    }
}
