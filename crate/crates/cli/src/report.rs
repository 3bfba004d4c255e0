//! Files written by the commands: solution dumps, manifests, comparison
//! tables and plot scripts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ergodesign::evo::{FitnessReport, ScenarioSet};
use ergodesign::kinematics::ParametrizedModel;
use ergodesign::params::{DesignFile, HardwareParams};
use ergodesign::posture::{build_problem, evaluate_costs, CostBreakdown, FeasibilityReport, PostureSolution};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scenario::ScenarioFile;

pub const DUMP_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const COMPARISON_SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "ergodesign";

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    write_text(path, &(text + "\n"))
}

/// Posture solution of one (human, load) pair for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDump {
    pub schema_version: u32,
    pub human: String,
    pub load: String,
    pub design: DesignFile,
    pub human_joints: Vec<String>,
    pub robot_joints: Vec<String>,
    pub solution: PostureSolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostBreakdown>,
}

impl SolutionDump {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("solution dump: {e}")))
    }

    pub fn file_name(human: &str, load: &str) -> String {
        format!("{human}__{load}.json")
    }
}

/// Dumps for every pair, with the feasibility re-check of solved ones.
pub fn solution_dumps(set: &ScenarioSet, params: &HardwareParams, sols: &[PostureSolution]) -> CliResult<Vec<SolutionDump>> {
    let design = DesignFile::from_params(&set.robot, params).map_err(CliError::runtime)?;
    let robot = ParametrizedModel::new(&set.robot, params, &set.catalog).map_err(CliError::runtime)?;
    let mut out = Vec::new();
    for ((pair, (human, load)), sol) in set.pairs().into_iter().zip(set.pair_names()).zip(sols) {
        let (feasibility, costs) = if sol.solved() {
            let system = set.system(&robot, pair).map_err(CliError::runtime)?;
            let problem = build_problem(system, set.task.clone(), set.weights.clone()).map_err(CliError::runtime)?;
            (
                Some(problem.check_feasibility(sol)),
                evaluate_costs(sol, &set.weights).ok(),
            )
        } else {
            (None, None)
        };
        out.push(SolutionDump {
            schema_version: DUMP_SCHEMA_VERSION,
            human,
            load,
            design: design.clone(),
            human_joints: set.humans[pair.0].joint_names(),
            robot_joints: robot.joint_names(),
            solution: sol.clone(),
            feasibility,
            costs,
        });
    }
    Ok(out)
}

pub fn write_dumps(dir: &Path, dumps: &[SolutionDump]) -> CliResult<()> {
    for d in dumps {
        write_json(&dir.join(SolutionDump::file_name(&d.human, &d.load)), d)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario_path: String,
    pub scenario_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub solver_tolerance: f64,
    #[serde(default)]
    pub designs: Vec<String>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
    pub wall_time_s: f64,
    pub scenario: ScenarioFile,
}

/// Fitness summary written next to evaluate and evolve outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessFile {
    pub schema_version: u32,
    pub design: DesignFile,
    pub report: FitnessReport,
}

fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Robot motor torque statistics at one height, motor side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotTorqueStats {
    pub design: String,
    pub human: String,
    pub load: String,
    pub height: f64,
    pub mean: f64,
    pub variance: f64,
    pub max_abs: f64,
    pub norm: f64,
}

/// One human joint at one height under both designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanJointRow {
    pub human: String,
    pub load: String,
    pub height: f64,
    pub joint: String,
    pub a: f64,
    pub b: f64,
    /// |a| − |b|
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub human: String,
    pub load: String,
    pub heights: Vec<f64>,
    pub robot_norm_a: Vec<f64>,
    pub robot_norm_b: Vec<f64>,
    pub human_norm_a: Vec<f64>,
    pub human_norm_b: Vec<f64>,
    /// (Σ‖τ_A‖ − Σ‖τ_B‖) / Σ‖τ_B‖ × 100 over the per-height norms; null when
    /// undefined.
    pub robot_change_pct: Option<f64>,
    pub human_change_pct: Option<f64>,
    /// Same ratio per back joint, over per-height absolute torques.
    pub back_joint_change_pct: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub design_a: DesignFile,
    pub design_b: DesignFile,
    pub back_joints: Vec<String>,
    pub pairs: Vec<PairComparison>,
    pub robot: Vec<RobotTorqueStats>,
    pub human: Vec<HumanJointRow>,
}

pub fn change_pct(sum_a: f64, sum_b: f64) -> Option<f64> {
    let num = sum_a - sum_b;
    if sum_b == 0.0 {
        (num == 0.0).then_some(0.0)
    } else {
        Some(100.0 * num / sum_b)
    }
}

fn robot_stats(design: &str, human: &str, load: &str, height: f64, tau: &[f64]) -> RobotTorqueStats {
    let n = tau.len().max(1) as f64;
    RobotTorqueStats {
        design: design.into(),
        human: human.into(),
        load: load.into(),
        height,
        mean: tau.iter().sum::<f64>() / n,
        variance: population_variance(tau),
        max_abs: tau.iter().fold(0.0f64, |m, t| m.max(t.abs())),
        norm: tau.iter().map(|t| t * t).sum::<f64>().sqrt(),
    }
}

/// Compare two designs pair by pair. Both solution lists must be solved and
/// in the set's pair order.
pub fn compare(
    set: &ScenarioSet,
    design_a: DesignFile,
    design_b: DesignFile,
    sols_a: &[PostureSolution],
    sols_b: &[PostureSolution],
    back_joints: &[String],
) -> CliResult<Comparison> {
    let mut pairs = Vec::new();
    let mut robot = Vec::new();
    let mut human = Vec::new();
    for ((pair, (hn, ln)), (sa, sb)) in set.pairs().into_iter().zip(set.pair_names()).zip(sols_a.iter().zip(sols_b)) {
        for (tag, s) in [("A", sa), ("B", sb)] {
            if !s.solved() {
                return Err(CliError::Runtime(format!("design {tag} has no solved posture for {hn} with {ln} ({:?})", s.status)));
            }
        }
        let joints = set.humans[pair.0].joint_names();
        let nh = joints.len();
        let back_idx: Vec<usize> = back_joints
            .iter()
            .map(|j| {
                joints
                    .iter()
                    .position(|n| n == j)
                    .ok_or_else(|| CliError::Validation(format!("back joint `{j}` is missing from `{hn}`")))
            })
            .collect::<CliResult<_>>()?;
        let mut pc = PairComparison {
            human: hn.clone(),
            load: ln.clone(),
            heights: Vec::new(),
            robot_norm_a: Vec::new(),
            robot_norm_b: Vec::new(),
            human_norm_a: Vec::new(),
            human_norm_b: Vec::new(),
            robot_change_pct: None,
            human_change_pct: None,
            back_joint_change_pct: BTreeMap::new(),
        };
        let mut back_sums = vec![(0.0, 0.0); back_idx.len()];
        for (ha, hb) in sa.heights.iter().zip(&sb.heights) {
            let ta = ha.torques.as_slice();
            let tb = hb.torques.as_slice();
            let ra = robot_stats("A", &hn, &ln, ha.height, &ta[nh..]);
            let rb = robot_stats("B", &hn, &ln, hb.height, &tb[nh..]);
            pc.heights.push(ha.height);
            pc.robot_norm_a.push(ra.norm);
            pc.robot_norm_b.push(rb.norm);
            pc.human_norm_a.push(ta[..nh].iter().map(|t| t * t).sum::<f64>().sqrt());
            pc.human_norm_b.push(tb[..nh].iter().map(|t| t * t).sum::<f64>().sqrt());
            robot.push(ra);
            robot.push(rb);
            for (j, name) in joints.iter().enumerate() {
                human.push(HumanJointRow {
                    human: hn.clone(),
                    load: ln.clone(),
                    height: ha.height,
                    joint: name.clone(),
                    a: ta[j],
                    b: tb[j],
                    abs_diff: ta[j].abs() - tb[j].abs(),
                });
            }
            for (s, &j) in back_sums.iter_mut().zip(&back_idx) {
                s.0 += ta[j].abs();
                s.1 += tb[j].abs();
            }
        }
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        pc.robot_change_pct = change_pct(sum(&pc.robot_norm_a), sum(&pc.robot_norm_b));
        pc.human_change_pct = change_pct(sum(&pc.human_norm_a), sum(&pc.human_norm_b));
        for (name, (a, b)) in back_joints.iter().zip(back_sums) {
            pc.back_joint_change_pct.insert(name.clone(), change_pct(a, b));
        }
        pairs.push(pc);
    }
    Ok(Comparison {
        schema_version: COMPARISON_SCHEMA_VERSION,
        design_a,
        design_b,
        back_joints: back_joints.to_vec(),
        pairs,
        robot,
        human,
    })
}

fn csv_string(rows: Vec<Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).map_err(CliError::runtime)?;
    }
    let bytes = w.into_inner().map_err(CliError::runtime)?;
    String::from_utf8(bytes).map_err(CliError::runtime)
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub const ROBOT_TORQUES_HEADER: [&str; 8] = [
    "design",
    "human",
    "load",
    "height [m]",
    "mean [N*m]",
    "variance [N^2*m^2]",
    "max_abs [N*m]",
    "norm [N*m]",
];

pub const HUMAN_TORQUES_HEADER: [&str; 7] = [
    "human",
    "load",
    "height [m]",
    "joint",
    "tau_a [N*m]",
    "tau_b [N*m]",
    "abs_diff [N*m]",
];

pub fn robot_torques_csv(c: &Comparison) -> CliResult<String> {
    let mut rows = vec![ROBOT_TORQUES_HEADER.iter().map(|s| s.to_string()).collect()];
    for r in &c.robot {
        rows.push(vec![
            r.design.clone(),
            r.human.clone(),
            r.load.clone(),
            num(r.height),
            num(r.mean),
            num(r.variance),
            num(r.max_abs),
            num(r.norm),
        ]);
    }
    csv_string(rows)
}

pub fn human_torques_csv(c: &Comparison) -> CliResult<String> {
    let mut rows = vec![HUMAN_TORQUES_HEADER.iter().map(|s| s.to_string()).collect()];
    for r in &c.human {
        rows.push(vec![
            r.human.clone(),
            r.load.clone(),
            num(r.height),
            r.joint.clone(),
            num(r.a),
            num(r.b),
            num(r.abs_diff),
        ]);
    }
    csv_string(rows)
}

pub fn height_column(h: f64) -> String {
    if h.fract() == 0.0 {
        format!("h={h:.1} m [N*m]")
    } else {
        format!("h={h} m [N*m]")
    }
}

/// Back-joint torques laid out with one column per load height and the
/// rows A, B and |A|−|B| for every back joint of every pair.
pub fn table_ii_csv(c: &Comparison) -> CliResult<String> {
    let heights = c.pairs.first().map(|p| p.heights.clone()).unwrap_or_default();
    let mut header: Vec<String> = ["human", "load", "joint", "row"].iter().map(|s| s.to_string()).collect();
    header.extend(heights.iter().map(|h| height_column(*h)));
    let mut rows = vec![header];
    for p in &c.pairs {
        for joint in &c.back_joints {
            let cells: Vec<&HumanJointRow> = c
                .human
                .iter()
                .filter(|r| r.human == p.human && r.load == p.load && &r.joint == joint)
                .collect();
            for (tag, f) in [
                ("A", (|r: &HumanJointRow| r.a) as fn(&HumanJointRow) -> f64),
                ("B", |r: &HumanJointRow| r.b),
                ("|A|-|B|", |r: &HumanJointRow| r.abs_diff),
            ] {
                let mut row = vec![p.human.clone(), p.load.clone(), joint.clone(), tag.to_string()];
                row.extend(cells.iter().map(|r| num(f(r))));
                rows.push(row);
            }
        }
    }
    csv_string(rows)
}

/// Per-height torque norms, one column per pair and design, for plotting.
pub fn norms_csv(c: &Comparison, robot: bool) -> CliResult<String> {
    let heights = c.pairs.first().map(|p| p.heights.clone()).unwrap_or_default();
    let mut header = vec!["height [m]".to_string()];
    for p in &c.pairs {
        for tag in ["A", "B"] {
            header.push(format!("{}/{} {tag} [N*m]", p.human, p.load));
        }
    }
    let mut rows = vec![header];
    for (k, h) in heights.iter().enumerate() {
        let mut row = vec![num(*h)];
        for p in &c.pairs {
            let (a, b) = if robot {
                (p.robot_norm_a[k], p.robot_norm_b[k])
            } else {
                (p.human_norm_a[k], p.human_norm_b[k])
            };
            row.push(num(a));
            row.push(num(b));
        }
        rows.push(row);
    }
    csv_string(rows)
}

pub fn compare_gnuplot(columns: usize) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 1200,500\n\
         set output 'compare.png'\n\
         set multiplot layout 1,2\n\
         set key outside bottom center\n\
         set xlabel 'load height [m]'\n\
         set ylabel 'robot motor torque norm [N*m]'\n\
         plot for [i=2:{last}] 'robot_norms.csv' using 1:i with linespoints title columnheader(i)\n\
         set ylabel 'human joint torque norm [N*m]'\n\
         plot for [i=2:{last}] 'human_norms.csv' using 1:i with linespoints title columnheader(i)\n\
         unset multiplot\n",
        last = columns + 1
    )
}

pub fn evolution_gnuplot() -> String {
    "set datafile separator ','\n\
     set terminal pngcairo size 900,500\n\
     set output 'evolution.png'\n\
     set xlabel 'generation'\n\
     set ylabel 'fitness [1/(N*m)]'\n\
     set key bottom right\n\
     plot 'stats.csv' using 1:4 skip 1 with linespoints title 'max', \\\n\
     \x20    'stats.csv' using 1:2 skip 1 with linespoints title 'mean'\n"
        .to_string()
}
