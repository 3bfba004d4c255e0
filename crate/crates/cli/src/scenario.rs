//! Scenario files: the robot, catalog, humans, loads and task a design is
//! scored on, plus solver and search settings.

use std::fs;
use std::path::{Path, PathBuf};

use ergodesign::coupled::{AgentRole, ContactSpec, ContactKind, Transmission};
use ergodesign::evo::{EvolutionConfig, GeneDomains, ScenarioSet};
use ergodesign::fixtures;
use ergodesign::friction::FrictionModel;
use ergodesign::kinematics::ParametrizedModel;
use ergodesign::model::{box_load, KinematicModel, ModelKind};
use ergodesign::motor::MotorCatalog;
use ergodesign::params::{DesignFile, HardwareParams};
use ergodesign::posture::{CostWeights, SolverOptions, TaskSpec};
use ergodesign::scenes;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
pub const BUILTIN: &str = "builtin:";

fn default_contacts() -> ContactsDef {
    ContactsDef::Preset("two_hand".into())
}

fn default_warm_start() -> Vec<String> {
    vec!["nominal".into()]
}

fn default_back_joints() -> Vec<String> {
    vec!["T9T8".into(), "L5S1".into()]
}

fn default_load_size() -> [f64; 3] {
    scenes::LOAD_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CatalogDef {
    Reference(String),
    Inline(MotorCatalog),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContactsDef {
    Preset(String),
    List(Vec<ContactSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspFrameDef {
    pub name: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// kg
    pub mass: f64,
    /// Box extents (m).
    #[serde(default = "default_load_size")]
    pub size: [f64; 3],
    /// Grasp frames in the load body frame; the contact preset decides the
    /// default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasps: Option<Vec<GraspFrameDef>>,
}

/// On-disk scenario, schema version 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    /// `builtin:<name>` or a model file path relative to the scenario.
    pub robot: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<CatalogDef>,
    pub humans: Vec<String>,
    pub loads: Vec<LoadDef>,
    pub task: TaskSpec,
    #[serde(default = "default_contacts")]
    pub contacts: ContactsDef,
    /// Replaces the friction model of every environment contact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionModel>,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genes: Option<GeneDomains>,
    /// Initial chromosomes: `nominal` or design file paths. The first one
    /// also seeds the posture solves.
    #[serde(default = "default_warm_start")]
    pub warm_start: Vec<String>,
    #[serde(default = "default_back_joints")]
    pub back_joints: Vec<String>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        if file.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "scenario schema_version {} is not supported (expected {SCENARIO_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }
}

/// A scenario with every reference resolved and checked.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub base_dir: PathBuf,
    pub robot: KinematicModel,
    pub catalog: MotorCatalog,
    pub humans: Vec<KinematicModel>,
    pub loads: Vec<KinematicModel>,
    pub contacts: Vec<ContactSpec>,
    pub domains: GeneDomains,
    pub initial: Vec<HardwareParams>,
}

pub fn builtin_model(name: &str) -> Option<KinematicModel> {
    let text = match name {
        "chain" => fixtures::CHAIN,
        "toy_robot" => fixtures::TOY_ROBOT,
        "human_166" => fixtures::HUMAN_166,
        "human_168" => fixtures::HUMAN_168,
        "human_178" => fixtures::HUMAN_178,
        "human_182" => fixtures::HUMAN_182,
        "arm_human" => fixtures::ARM_HUMAN,
        "arm_robot" => fixtures::ARM_ROBOT,
        "reference_humanoid" => fixtures::REFERENCE_HUMANOID,
        _ => return None,
    };
    KinematicModel::from_json(text).ok()
}

pub fn builtin_catalog(name: &str) -> Option<MotorCatalog> {
    match name {
        "reference" => Some(MotorCatalog::reference()),
        "reference_with_unit" => Some(fixtures::catalog_with_unit()),
        _ => None,
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

pub fn load_model_file(path: &Path) -> CliResult<KinematicModel> {
    KinematicModel::from_json(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn load_catalog_file(path: &Path) -> CliResult<MotorCatalog> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: catalog: {e}", path.display())))
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file = ScenarioFile::from_json(&read(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scenario::resolve(file, &base)
    }

    fn resolve_path(base: &Path, reference: &str) -> PathBuf {
        let p = Path::new(reference);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn resolve_model(base: &Path, reference: &str) -> CliResult<KinematicModel> {
        match reference.strip_prefix(BUILTIN) {
            Some(name) => builtin_model(name).ok_or_else(|| CliError::Validation(format!("unknown builtin model `{name}`"))),
            None => load_model_file(&Scenario::resolve_path(base, reference)),
        }
    }

    fn resolve_catalog(base: &Path, def: &Option<CatalogDef>) -> CliResult<MotorCatalog> {
        let catalog = match def {
            None => MotorCatalog::reference(),
            Some(CatalogDef::Inline(c)) => c.clone(),
            Some(CatalogDef::Reference(r)) => match r.strip_prefix(BUILTIN) {
                Some(name) => {
                    builtin_catalog(name).ok_or_else(|| CliError::Validation(format!("unknown builtin catalog `{name}`")))?
                }
                None => load_catalog_file(&Scenario::resolve_path(base, r))?,
            },
        };
        catalog.validate().map_err(CliError::validation)?;
        Ok(catalog)
    }

    fn default_grasps(preset: Option<&str>, size: [f64; 3]) -> Vec<GraspFrameDef> {
        let f = |name: &str, position: [f64; 3]| GraspFrameDef {
            name: name.into(),
            position,
        };
        let hx = size[0] / 2.0;
        match preset {
            Some("arm_pair") => vec![f("human", [-hx, 0.0, 0.0]), f("robot", [hx, 0.0, 0.0])],
            _ => vec![
                f("human_l", [-hx, 0.18, 0.0]),
                f("human_r", [-hx, -0.18, 0.0]),
                f("robot_l", [hx, -0.14, 0.0]),
                f("robot_r", [hx, 0.14, 0.0]),
            ],
        }
    }

    pub fn load_model(def: &LoadDef, preset: Option<&str>) -> CliResult<KinematicModel> {
        let name = def.name.clone().unwrap_or_else(|| format!("load_{}kg", def.mass));
        let grasps = def.grasps.clone().unwrap_or_else(|| Scenario::default_grasps(preset, def.size));
        let frames: Vec<(String, [f64; 3])> = grasps.into_iter().map(|g| (g.name, g.position)).collect();
        box_load(&name, def.mass, def.size, &frames).map_err(|e| CliError::Validation(format!("load `{name}`: {e}")))
    }

    fn preset_contacts(name: &str) -> CliResult<Vec<ContactSpec>> {
        match name {
            "two_hand" => Ok(scenes::two_hand_contacts()),
            "arm_pair" => Ok(vec![
                ContactSpec::environment(AgentRole::Human, "sole", scenes::stand_friction()),
                ContactSpec::environment(AgentRole::Robot, "sole", scenes::stand_friction()),
                ContactSpec::grasp(AgentRole::Human, "hand", "human", Transmission::Force),
                ContactSpec::grasp(AgentRole::Robot, "hand", "robot", Transmission::Force),
            ]),
            other => Err(CliError::Validation(format!("unknown contact preset `{other}`"))),
        }
    }

    pub fn resolve(file: ScenarioFile, base: &Path) -> CliResult<Self> {
        let v = CliError::validation;
        let catalog = Scenario::resolve_catalog(base, &file.catalog)?;
        let robot = Scenario::resolve_model(base, &file.robot)?;
        check_model(&robot, &catalog, ModelKind::Robot)?;
        if file.humans.is_empty() || file.loads.is_empty() {
            return Err(CliError::Validation("scenario needs at least one human and one load".into()));
        }
        let humans = file
            .humans
            .iter()
            .map(|h| {
                let m = Scenario::resolve_model(base, h)?;
                check_model(&m, &catalog, ModelKind::Human)?;
                Ok(m)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let preset = match &file.contacts {
            ContactsDef::Preset(p) => Some(p.as_str()),
            ContactsDef::List(_) => None,
        };
        let loads = file
            .loads
            .iter()
            .map(|l| Scenario::load_model(l, preset))
            .collect::<CliResult<Vec<_>>>()?;
        let mut contacts = match &file.contacts {
            ContactsDef::Preset(p) => Scenario::preset_contacts(p)?,
            ContactsDef::List(list) => list.clone(),
        };
        if let Some(fm) = &file.friction {
            fm.validate().map_err(v)?;
            for c in contacts.iter_mut().filter(|c| c.kind == ContactKind::Environment) {
                c.friction = Some(fm.clone());
            }
        }
        for c in &contacts {
            if let Some(fm) = &c.friction {
                fm.validate().map_err(v)?;
            }
        }
        file.task.validate().map_err(v)?;
        file.weights.validate().map_err(v)?;
        file.evolution.validate().map_err(v)?;
        if !(file.solver.tolerance > 0.0) || file.solver.max_iterations == 0 {
            return Err(CliError::Validation("solver tolerance and max_iterations must be positive".into()));
        }
        let domains = file.genes.clone().unwrap_or_else(|| GeneDomains::new(&catalog));
        domains.validate().map_err(v)?;
        if let Some(m) = domains.motors.iter().find(|m| catalog.get(m).is_none()) {
            return Err(CliError::Validation(format!("gene motor `{m}` is not in the catalog")));
        }
        let initial = file
            .warm_start
            .iter()
            .map(|w| {
                let p = Scenario::design_in(base, &robot, &catalog, w)?;
                if !domains.contains(&p) {
                    return Err(CliError::Validation(format!("warm start `{w}` lies outside the gene domains")));
                }
                Ok(p)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let mut s = Scenario {
            file,
            base_dir: base.to_path_buf(),
            robot,
            catalog,
            humans,
            loads,
            contacts,
            domains,
            initial,
        };
        // builds every coupled system once so that frame and contact errors
        // surface here rather than mid-run
        let set = s.scenario_set()?;
        let robot_pm = ParametrizedModel::new(&s.robot, &s.anchor()?, &s.catalog).map_err(v)?;
        for pair in set.pairs() {
            let system = set.system(&robot_pm, pair).map_err(v)?;
            ergodesign::posture::build_problem(system, s.file.task.clone(), s.file.weights.clone()).map_err(v)?;
        }
        for j in &s.file.back_joints {
            if s.humans.iter().any(|h| h.joint_index(j).is_err()) {
                return Err(CliError::Validation(format!("back joint `{j}` is missing from a human model")));
            }
        }
        s.base_dir = base.to_path_buf();
        Ok(s)
    }

    fn design_in(base: &Path, robot: &KinematicModel, catalog: &MotorCatalog, reference: &str) -> CliResult<HardwareParams> {
        let params = if reference == "nominal" {
            HardwareParams::nominal(robot).map_err(CliError::validation)?
        } else {
            let path = Scenario::resolve_path(base, reference);
            let file = DesignFile::from_json(&read(&path)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            if file.model != robot.name {
                return Err(CliError::Validation(format!(
                    "{}: design is for model `{}`, scenario robot is `{}`",
                    path.display(),
                    file.model,
                    robot.name
                )));
            }
            file.to_params(robot).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        };
        params.validate(robot, catalog).map_err(CliError::validation)?;
        Ok(params)
    }

    /// Resolves `nominal` or a design path relative to the working directory.
    pub fn design(&self, reference: &str) -> CliResult<HardwareParams> {
        Scenario::design_in(Path::new(""), &self.robot, &self.catalog, reference)
    }

    /// Design whose postures seed every solve.
    pub fn anchor(&self) -> CliResult<HardwareParams> {
        match self.initial.first() {
            Some(p) => Ok(p.clone()),
            None => HardwareParams::nominal(&self.robot).map_err(CliError::validation),
        }
    }

    pub fn scenario_set(&self) -> CliResult<ScenarioSet> {
        let v = CliError::validation;
        let humans = self
            .humans
            .iter()
            .map(|h| ParametrizedModel::nominal(h, &self.catalog).map_err(v))
            .collect::<CliResult<Vec<_>>>()?;
        let loads = self
            .loads
            .iter()
            .map(|l| ParametrizedModel::nominal(l, &self.catalog).map_err(v))
            .collect::<CliResult<Vec<_>>>()?;
        ScenarioSet::new(
            self.robot.clone(),
            self.catalog.clone(),
            humans,
            loads,
            self.contacts.clone(),
            self.file.task.clone(),
            self.file.weights.clone(),
            self.file.solver.clone(),
        )
        .map_err(v)
    }

    /// Scenario set with the warm starts prepared from the anchor design.
    pub fn prepared_set(&self) -> CliResult<ScenarioSet> {
        let mut set = self.scenario_set()?;
        set.prepare_warm_starts(&self.anchor()?).map_err(CliError::runtime)?;
        Ok(set)
    }

    /// Replace the humans by one model and/or the loads by one mass.
    pub fn with_overrides(&self, human: Option<&str>, load_mass: Option<f64>) -> CliResult<Scenario> {
        let mut file = self.file.clone();
        if let Some(h) = human {
            let m = Scenario::resolve_model(Path::new(""), h)?;
            check_model(&m, &self.catalog, ModelKind::Human)?;
            file.humans = vec![match h.strip_prefix(BUILTIN) {
                Some(_) => h.to_string(),
                None => std::path::absolute(h).map_err(CliError::runtime)?.display().to_string(),
            }];
        }
        if let Some(mass) = load_mass {
            let mut load = file.loads[0].clone();
            load.mass = mass;
            load.name = None;
            file.loads = vec![load];
        }
        file.warm_start = file
            .warm_start
            .iter()
            .map(|w| {
                if w == "nominal" || Path::new(w).is_absolute() {
                    w.clone()
                } else {
                    self.base_dir.join(w).display().to_string()
                }
            })
            .collect();
        if !file.robot.starts_with(BUILTIN) && !Path::new(&file.robot).is_absolute() {
            file.robot = self.base_dir.join(&file.robot).display().to_string();
        }
        if let Some(CatalogDef::Reference(r)) = &file.catalog {
            if !r.starts_with(BUILTIN) && !Path::new(r).is_absolute() {
                file.catalog = Some(CatalogDef::Reference(self.base_dir.join(r).display().to_string()));
            }
        }
        file.humans = file
            .humans
            .iter()
            .map(|h| {
                if h.starts_with(BUILTIN) || Path::new(h).is_absolute() {
                    h.clone()
                } else {
                    self.base_dir.join(h).display().to_string()
                }
            })
            .collect();
        Scenario::resolve(file, Path::new(""))
    }

    /// SHA-256 over the scenario and every model and catalog it resolves to.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            file: &'a ScenarioFile,
            robot: &'a KinematicModel,
            catalog: &'a MotorCatalog,
            humans: &'a [KinematicModel],
            loads: &'a [KinematicModel],
            contacts: &'a [ContactSpec],
            initial: &'a [HardwareParams],
        }
        let text = serde_json::to_string(&Canonical {
            file: &self.file,
            robot: &self.robot,
            catalog: &self.catalog,
            humans: &self.humans,
            loads: &self.loads,
            contacts: &self.contacts,
            initial: &self.initial,
        })
        .expect("scenario serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn check_model(model: &KinematicModel, catalog: &MotorCatalog, kind: ModelKind) -> CliResult<()> {
    let diags = model.diagnostics(catalog);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}: {}", d.code, d.message)).collect();
        return Err(CliError::Validation(format!("model `{}`:\n{}", model.name, lines.join("\n"))));
    }
    if model.kind != kind {
        return Err(CliError::Validation(format!("model `{}` is a {:?}, expected a {kind:?}", model.name, model.kind)));
    }
    Ok(())
}
