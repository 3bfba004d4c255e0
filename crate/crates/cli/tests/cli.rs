use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergodesign::evo::STATS_HEADER;
use ergodesign::params::HardwareParams;
use ergodesign::posture::PostureStatus;
use ergodesign_cli::report::{Comparison, FitnessFile, Manifest, SolutionDump};
use ergodesign_cli::scenario::{Scenario, ScenarioFile};
use serde_json::Value;

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn scenario(name: &str) -> String {
    assets().join("scenarios").join(name).display().to_string()
}

fn ergodesign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodesign"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(ergodesign(&[]).status.code(), Some(1));
    assert_eq!(ergodesign(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ergodesign(&["evolve"]).status.code(), Some(1));
    assert_eq!(ergodesign(&["evaluate", "nominal", "x.json", "--threads", "many"]).status.code(), Some(1));
    assert_eq!(ergodesign(&["--help"]).status.code(), Some(0));
    assert_eq!(ergodesign(&["--version"]).status.code(), Some(0));
}

#[test]
fn validate_reports_stable_codes() {
    let good = assets().join("models/toy_robot.json");
    let o = ergodesign(&["validate", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok: model `toy_robot`"));

    let mut model: Value = serde_json::from_str(&std::fs::read_to_string(&good).unwrap()).unwrap();
    model["joints"][0]["axis"] = serde_json::json!([0.0, 0.0, 0.0]);
    model["joints"][1]["motor"] = Value::String("XL".into());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, model.to_string()).unwrap();
    let o = ergodesign(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("joint.invalid_axis: ")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("motor.unknown_id: ")), "{out}");

    std::fs::write(&bad, "{ not json").unwrap();
    let o = ergodesign(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("schema.parse: "));

    let missing = dir.path().join("missing.json");
    assert_eq!(ergodesign(&["validate", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn validate_accepts_catalog_overrides_and_scenarios() {
    let arm = assets().join("models/arm_robot.json");
    assert_eq!(ergodesign(&["validate", arm.to_str().unwrap()]).status.code(), Some(2));
    let o = ergodesign(&["validate", arm.to_str().unwrap(), "--catalog", "builtin:reference_with_unit"]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["desk.json", "toy_scene.json", "paper_scale.json", "arm_pair.json", "unreachable.json"] {
        let o = ergodesign(&["validate", &scenario(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
    }
}

#[test]
fn invalid_scenarios_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(scenario("toy_scene.json")).unwrap()).unwrap();
    let cases: Vec<(&str, Value)> = vec![
        ("schema_version", serde_json::json!(7)),
        ("robot", serde_json::json!("builtin:no_such_robot")),
        ("task", serde_json::json!({ "load_heights": [1.0, 0.9] })),
        ("humans", serde_json::json!([])),
        ("warm_start", serde_json::json!(["missing_design.json"])),
    ];
    for (key, value) in cases {
        let original = file[key].clone();
        file[key] = value;
        let path = dir.path().join("s.json");
        std::fs::write(&path, file.to_string()).unwrap();
        let o = ergodesign(&["evaluate", "nominal", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{key}");
        file[key] = original;
    }
    let o = ergodesign(&["evaluate", "nominal", &scenario("toy_scene.json"), "--solver-tol=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = ergodesign(&["evaluate", "nominal", &scenario("arm_pair.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unreachable_height_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = ergodesign(&["evaluate", "nominal", &scenario("unreachable.json"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let f: FitnessFile = read(&dir.path().join("fitness.json"));
    assert_eq!(f.report.fitness, 0.0);
    assert!(f.report.scenarios.iter().all(|s| s.status == PostureStatus::Infeasible));
}

#[test]
fn solution_dumps_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario("arm_pair.json");
    let o = ergodesign(&["evaluate", "nominal", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("solutions/arm_human__load_5kg.json")).unwrap();
    let dump = SolutionDump::from_json(&text).unwrap();
    assert_eq!(SolutionDump::from_json(&serde_json::to_string(&dump).unwrap()).unwrap(), dump);

    let s = Scenario::load(Path::new(&path)).unwrap();
    let set = s.prepared_set().unwrap();
    let (_, sols) = set.evaluate_design(&HardwareParams::nominal(&s.robot).unwrap());
    let mem = &sols[0];
    assert_eq!(dump.solution.status, mem.status);
    for (a, b) in dump.solution.heights.iter().zip(&mem.heights) {
        assert!((&a.torques - &b.torques).amax() <= 1e-9);
        assert!((&a.wrenches - &b.wrenches).amax() <= 1e-9);
        for (qa, qb) in [(&a.configuration.human, &b.configuration.human), (&a.configuration.robot, &b.configuration.robot)] {
            assert!((&qa.joints - &qb.joints).amax() <= 1e-9);
            assert!((qa.base_position - qb.base_position).amax() <= 1e-9);
            assert!((qa.base_quaternion - qb.base_quaternion).amax() <= 1e-9);
        }
    }
    assert!(dump.feasibility.unwrap().max() <= 1e-6);
}

#[test]
fn manifest_records_hash_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = ergodesign(&["evaluate", "nominal", &scenario("arm_pair.json"), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        read::<Manifest>(&out.join("manifest.json"))
    };
    let a = run("5", "a");
    let b = run("5", "b");
    let c = run("6", "c");
    assert_eq!(a.config_hash.len(), 64);
    assert!(a.config_hash.chars().all(|ch| ch.is_ascii_hexdigit()));
    assert_eq!(a.config_hash, b.config_hash);
    assert_ne!(a.config_hash, c.config_hash);
    assert_eq!(a.seed, 5);
    assert_eq!(a.scenario.evolution.seed, 5);
    assert_eq!(a.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(a.tool, "ergodesign");
}

#[test]
fn single_member_population_keeps_its_fitness() {
    let dir = tempfile::tempdir().unwrap();
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(scenario("arm_pair.json")).unwrap()).unwrap();
    file["evolution"] = serde_json::json!({
        "population": 1, "tournament": 1, "elitism": 1, "stop_improvement": null, "max_generations": 4, "seed": 3
    });
    // model and catalog references are builtin, so the copy resolves anywhere
    let path = dir.path().join("one.json");
    std::fs::write(&path, file.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = ergodesign(&["evolve", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(STATS_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[1], rows[0][1]);
        assert_eq!(r[2], "0e0");
        assert_eq!(r[3], rows[0][3]);
    }
    assert!(out.join("best_design.json").exists());
    assert!(out.join("evolution.gp").exists());
    let m: Manifest = read(&out.join("manifest.json"));
    assert_eq!(m.summary["generations"], 4);
}

#[test]
fn stats_header_is_unit_annotated() {
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/stats_header.csv")).unwrap();
    assert_eq!(golden.trim_end(), STATS_HEADER);
}

#[test]
fn compare_with_overrides_and_equal_gearing() {
    let dir = tempfile::tempdir().unwrap();
    let large = assets().join("designs/toy_large_motors.json");
    let o = ergodesign(&[
        "compare",
        "nominal",
        large.to_str().unwrap(),
        &scenario("toy_scene.json"),
        "--human",
        "builtin:human_166",
        "--load-mass",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c: Comparison = read(&dir.path().join("comparison.json"));
    assert_eq!(c.pairs.len(), 1);
    assert_eq!(c.pairs[0].human, "human_166");
    assert_eq!(c.pairs[0].load, "load_8kg");
    // same gear ratios, stronger motors: statics do not change
    assert!(c.pairs[0].robot_change_pct.unwrap().abs() < 1e-3);
    assert!(c.pairs[0].human_change_pct.unwrap().abs() < 1e-3);
    assert!(c.human.iter().all(|r| r.abs_diff.abs() < 1e-3));
    for f in ["robot_torques.csv", "human_torques.csv", "table_ii.csv", "robot_norms.csv", "human_norms.csv", "compare.gp", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let robot_csv = std::fs::read_to_string(dir.path().join("robot_torques.csv")).unwrap();
    assert_eq!(
        robot_csv.lines().next().unwrap(),
        "design,human,load,height [m],mean [N*m],variance [N^2*m^2],max_abs [N*m],norm [N*m]"
    );
    assert_eq!(robot_csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn scenario_defaults_fill_in() {
    let f = ScenarioFile::from_json(&std::fs::read_to_string(scenario("toy_scene.json")).unwrap()).unwrap();
    assert_eq!(f.warm_start, vec!["nominal".to_string()]);
    assert_eq!(f.back_joints, vec!["T9T8".to_string(), "L5S1".to_string()]);
    assert_eq!(f.evolution.population, 20);
    assert!(ScenarioFile::from_json(r#"{"schema_version":1,"name":"x","robot":"r","humans":[],"loads":[],"task":{"load_heights":[1]},"extra":1}"#).is_err());
}
