use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ergodesign::evo::{evolve, stats_csv};
use ergodesign::model::KinematicModel;
use ergodesign::motor::MotorCatalog;
use ergodesign::params::DesignFile;
use log::info;
use serde_json::json;

use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use crate::report::{self, FitnessFile, Manifest, MANIFEST_SCHEMA_VERSION, TOOL};
use crate::scenario::{self, Scenario, ScenarioFile, BUILTIN};

#[derive(Debug, Parser)]
#[command(name = "ergodesign", version, about = "Robot hardware co-design for collaborative lifting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunOptions {
    /// Seed of the genetic search
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: out/<scenario name>)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Posture solver tolerance
    #[arg(long = "solver-tol")]
    pub solver_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model or scenario file and print its diagnostics
    Validate {
        path: PathBuf,
        /// Motor catalog for model files: a path or builtin:<name>
        #[arg(long)]
        catalog: Option<String>,
    },
    /// Run the genetic search over robot designs
    Evolve {
        scenario: PathBuf,
        #[command(flatten)]
        options: RunOptions,
    },
    /// Score one design on a scenario
    Evaluate {
        /// Design file, or `nominal`
        design: String,
        scenario: PathBuf,
        #[command(flatten)]
        options: RunOptions,
    },
    /// Compare the torques of two designs
    Compare {
        design_a: String,
        design_b: String,
        scenario: PathBuf,
        /// Replace the scenario humans by this model (path or builtin:<name>)
        #[arg(long)]
        human: Option<String>,
        /// Replace the scenario loads by one load of this mass (kg)
        #[arg(long = "load-mass")]
        load_mass: Option<f64>,
        #[command(flatten)]
        options: RunOptions,
    },
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Validate { path, catalog } => validate(&path, catalog.as_deref()),
        Command::Evolve { scenario, options } => with_pool(&options, || evolve_cmd(&scenario, &options)),
        Command::Evaluate {
            design,
            scenario,
            options,
        } => with_pool(&options, || evaluate_cmd(&design, &scenario, &options)),
        Command::Compare {
            design_a,
            design_b,
            scenario,
            human,
            load_mass,
            options,
        } => with_pool(&options, || {
            compare_cmd(&design_a, &design_b, &scenario, human.as_deref(), load_mass, &options)
        }),
    }
}

fn with_pool(options: &RunOptions, f: impl FnOnce() -> CliResult<i32> + Send) -> CliResult<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(CliError::runtime)?;
    pool.install(f)
}

fn validate(path: &Path, catalog: Option<&str>) -> CliResult<i32> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            println!("schema.parse: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    if value.get("humans").is_some() {
        return match Scenario::load(path) {
            Ok(s) => {
                println!(
                    "ok: scenario `{}` ({} pairs, {} heights)",
                    s.file.name,
                    s.humans.len() * s.loads.len(),
                    s.file.task.load_heights.len()
                );
                Ok(EXIT_OK)
            }
            Err(CliError::Validation(m)) => {
                println!("scenario.invalid: {m}");
                Ok(EXIT_VALIDATION)
            }
            Err(e) => Err(e),
        };
    }
    let catalog = match catalog {
        None => MotorCatalog::reference(),
        Some(r) => match r.strip_prefix(BUILTIN) {
            Some(name) => scenario::builtin_catalog(name)
                .ok_or_else(|| CliError::Usage(format!("unknown builtin catalog `{name}`")))?,
            None => scenario::load_catalog_file(Path::new(r))?,
        },
    };
    let model = match KinematicModel::from_json(&text) {
        Ok(m) => m,
        Err(e) => {
            println!("schema.parse: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let diags = model.diagnostics(&catalog);
    for d in &diags {
        println!("{}: {}", d.code, d.message);
    }
    if diags.is_empty() {
        println!("ok: model `{}` ({} joints)", model.name, model.dofs());
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VALIDATION)
    }
}

fn load_scenario(path: &Path, options: &RunOptions) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    let mut file = ScenarioFile::from_json(&text)?;
    if let Some(seed) = options.seed {
        file.evolution.seed = seed;
    }
    if let Some(tol) = options.solver_tol {
        file.solver.tolerance = tol;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Scenario::resolve(file, &base)
}

fn out_dir(scenario: &Scenario, options: &RunOptions) -> PathBuf {
    options
        .out
        .clone()
        .unwrap_or_else(|| Path::new("out").join(&scenario.file.name))
}

#[allow(clippy::too_many_arguments)]
fn manifest(
    command: &str,
    path: &Path,
    scenario: &Scenario,
    designs: Vec<String>,
    outputs: Vec<String>,
    summary: serde_json::Value,
    start: Instant,
) -> Manifest {
    Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        scenario_path: path.display().to_string(),
        scenario_name: scenario.file.name.clone(),
        config_hash: scenario.config_hash(),
        seed: scenario.file.evolution.seed,
        threads: rayon::current_num_threads(),
        solver_tolerance: scenario.file.solver.tolerance,
        designs,
        outputs,
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
        scenario: scenario.file.clone(),
    }
}

fn evolve_cmd(path: &Path, options: &RunOptions) -> CliResult<i32> {
    let start = Instant::now();
    let scenario = load_scenario(path, options)?;
    let out = out_dir(&scenario, options);
    let mut set = scenario.scenario_set()?;
    info!(
        "evolving `{}`: population {}, up to {} generations, {} pairs",
        scenario.file.name,
        scenario.file.evolution.population,
        scenario.file.evolution.max_generations,
        set.pairs().len()
    );
    let result = evolve(&scenario.file.evolution, &scenario.domains, &mut set, &scenario.initial)
        .map_err(CliError::runtime)?;
    let best = &result.best;
    let (report, sols) = set.evaluate_design(&best.params);
    let design = DesignFile::from_params(&scenario.robot, &best.params).map_err(CliError::runtime)?;
    report::write_text(&out.join("stats.csv"), &stats_csv(&result.stats))?;
    report::write_text(&out.join("evolution.gp"), &report::evolution_gnuplot())?;
    report::write_text(&out.join("best_design.json"), &(design.to_json() + "\n"))?;
    report::write_json(
        &out.join("fitness.json"),
        &FitnessFile {
            schema_version: 1,
            design: design.clone(),
            report: report.clone(),
        },
    )?;
    report::write_dumps(&out.join("solutions"), &report::solution_dumps(&set, &best.params, &sols)?)?;
    let summary = json!({
        "best_fitness": best.report.fitness,
        "best_member_id": best.id,
        "generations": result.stats.len(),
        "stopped_early": result.stopped_early,
        "evaluations": result.evaluations,
    });
    let m = manifest(
        "evolve",
        path,
        &scenario,
        Vec::new(),
        ["stats.csv", "evolution.gp", "best_design.json", "fitness.json", "solutions/"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        summary,
        start,
    );
    report::write_json(&out.join("manifest.json"), &m)?;
    println!(
        "best fitness {} after {} generations ({} evaluations); results in {}",
        best.report.fitness,
        result.stats.len(),
        result.evaluations,
        out.display()
    );
    Ok(EXIT_OK)
}

fn evaluate_cmd(design_ref: &str, path: &Path, options: &RunOptions) -> CliResult<i32> {
    let start = Instant::now();
    let scenario = load_scenario(path, options)?;
    let out = out_dir(&scenario, options);
    let params = scenario.design(design_ref)?;
    let set = scenario.prepared_set()?;
    let (report, sols) = set.evaluate_design(&params);
    let design = DesignFile::from_params(&scenario.robot, &params).map_err(CliError::runtime)?;
    report::write_json(
        &out.join("fitness.json"),
        &FitnessFile {
            schema_version: 1,
            design,
            report: report.clone(),
        },
    )?;
    report::write_dumps(&out.join("solutions"), &report::solution_dumps(&set, &params, &sols)?)?;
    let summary = json!({
        "fitness": report.fitness,
        "worst_norm": report.worst_norm,
        "all_solved": report.all_solved(),
    });
    let m = manifest(
        "evaluate",
        path,
        &scenario,
        vec![design_ref.to_string()],
        vec!["fitness.json".into(), "solutions/".into()],
        summary,
        start,
    );
    report::write_json(&out.join("manifest.json"), &m)?;
    for s in &report.scenarios {
        println!("{} / {}: {:?}, max torque norm {} N*m", s.human, s.load, s.status, s.max_torque_norm);
    }
    println!("fitness {}", report.fitness);
    Ok(EXIT_OK)
}

fn fmt_pct(p: Option<f64>) -> String {
    p.map_or("n/a".into(), |v| format!("{v:+.2}%"))
}

fn compare_cmd(
    a_ref: &str,
    b_ref: &str,
    path: &Path,
    human: Option<&str>,
    load_mass: Option<f64>,
    options: &RunOptions,
) -> CliResult<i32> {
    let start = Instant::now();
    let base = load_scenario(path, options)?;
    let scenario = if human.is_some() || load_mass.is_some() {
        base.with_overrides(human, load_mass)?
    } else {
        base
    };
    let out = out_dir(&scenario, options);
    let pa = scenario.design(a_ref)?;
    let pb = scenario.design(b_ref)?;
    let set = scenario.prepared_set()?;
    let (_, sols_a) = set.evaluate_design(&pa);
    let (_, sols_b) = set.evaluate_design(&pb);
    if sols_a.is_empty() || sols_b.is_empty() {
        return Err(CliError::Runtime("a design could not be instantiated".into()));
    }
    let da = DesignFile::from_params(&scenario.robot, &pa).map_err(CliError::runtime)?;
    let db = DesignFile::from_params(&scenario.robot, &pb).map_err(CliError::runtime)?;
    let c = report::compare(&set, da, db, &sols_a, &sols_b, &scenario.file.back_joints)?;
    report::write_json(&out.join("comparison.json"), &c)?;
    report::write_text(&out.join("robot_torques.csv"), &report::robot_torques_csv(&c)?)?;
    report::write_text(&out.join("human_torques.csv"), &report::human_torques_csv(&c)?)?;
    report::write_text(&out.join("table_ii.csv"), &report::table_ii_csv(&c)?)?;
    report::write_text(&out.join("robot_norms.csv"), &report::norms_csv(&c, true)?)?;
    report::write_text(&out.join("human_norms.csv"), &report::norms_csv(&c, false)?)?;
    report::write_text(&out.join("compare.gp"), &report::compare_gnuplot(2 * c.pairs.len()))?;
    let summary = json!({
        "pairs": c.pairs.iter().map(|p| json!({
            "human": p.human,
            "load": p.load,
            "robot_change_pct": p.robot_change_pct,
            "human_change_pct": p.human_change_pct,
        })).collect::<Vec<_>>(),
    });
    let m = manifest(
        "compare",
        path,
        &scenario,
        vec![a_ref.to_string(), b_ref.to_string()],
        [
            "comparison.json",
            "robot_torques.csv",
            "human_torques.csv",
            "table_ii.csv",
            "robot_norms.csv",
            "human_norms.csv",
            "compare.gp",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        summary,
        start,
    );
    report::write_json(&out.join("manifest.json"), &m)?;
    for p in &c.pairs {
        println!(
            "{} / {}: robot {} , human {}",
            p.human,
            p.load,
            fmt_pct(p.robot_change_pct),
            fmt_pct(p.human_change_pct)
        );
    }
    Ok(EXIT_OK)
}
