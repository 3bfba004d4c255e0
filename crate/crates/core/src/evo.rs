//! Genetic search over hardware parameters π.
//!
//! A chromosome is a [`HardwareParams`]: continuous length multipliers,
//! densities drawn from a material set and motor ids drawn from the catalog.
//! Fitness is W_f / ‖τ̄_w‖₂ where τ̄_w is the largest stacked torque over
//! every human, load and height; any unsolved scenario scores zero.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::{CompositeSystem, ContactSpec};
use crate::error::{Error, Result};
use crate::kinematics::ParametrizedModel;
use crate::model::KinematicModel;
use crate::motor::MotorCatalog;
use crate::params::HardwareParams;
use crate::posture::{build_problem, CostWeights, HeightSolution, PostureSolution, PostureStatus, SolverOptions, TaskSpec};

fn default_length_bounds() -> [f64; 2] {
    [0.5, 2.0]
}

/// Material densities available to the search (kg/m³).
pub fn default_materials() -> Vec<f64> {
    vec![350.0, 600.0, 900.0, 1200.0, 1500.0]
}

/// Admissible values of every gene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneDomains {
    #[serde(default = "default_length_bounds")]
    pub length_bounds: [f64; 2],
    #[serde(default = "default_materials")]
    pub materials: Vec<f64>,
    pub motors: Vec<String>,
}

/// Number of genes of each kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneLayout {
    pub lengths: usize,
    pub densities: usize,
    pub motors: usize,
}

impl GeneLayout {
    pub fn of(params: &HardwareParams) -> Self {
        GeneLayout {
            lengths: params.length_multipliers.len(),
            densities: params.densities.len(),
            motors: params.motor_ids.len(),
        }
    }

    pub fn total(&self) -> usize {
        self.lengths + self.densities + self.motors
    }
}

impl GeneDomains {
    pub fn new(catalog: &MotorCatalog) -> Self {
        GeneDomains {
            length_bounds: default_length_bounds(),
            materials: default_materials(),
            motors: catalog.ids(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.length_bounds;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Contract(format!("length bounds [{lo}, {hi}] are invalid")));
        }
        if self.materials.is_empty() || self.materials.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Contract("material set must hold positive densities".into()));
        }
        if self.motors.is_empty() {
            return Err(Error::Contract("motor set is empty".into()));
        }
        Ok(())
    }

    pub fn contains(&self, c: &HardwareParams) -> bool {
        let [lo, hi] = self.length_bounds;
        c.length_multipliers.iter().all(|l| *l >= lo && *l <= hi)
            && c.densities.iter().all(|d| self.materials.contains(d))
            && c.motor_ids.iter().all(|m| self.motors.contains(m))
    }

    pub fn random(&self, layout: GeneLayout, rng: &mut impl Rng) -> HardwareParams {
        let [lo, hi] = self.length_bounds;
        HardwareParams {
            length_multipliers: (0..layout.lengths).map(|_| rng.gen_range(lo..=hi)).collect(),
            densities: (0..layout.densities)
                .map(|_| self.materials[rng.gen_range(0..self.materials.len())])
                .collect(),
            motor_ids: (0..layout.motors)
                .map(|_| self.motors[rng.gen_range(0..self.motors.len())].clone())
                .collect(),
        }
    }
}

/// k distinct members drawn uniformly; the fittest wins, ties to the lower index.
pub fn tournament_select(fitness: &[f64], k: usize, rng: &mut impl Rng) -> Result<usize> {
    if fitness.is_empty() {
        return Err(Error::Contract("tournament over an unevaluated population".into()));
    }
    if k == 0 || k > fitness.len() {
        return Err(Error::Contract(format!("tournament size {k} for {} members", fitness.len())));
    }
    if fitness.iter().any(|f| f.is_nan()) {
        return Err(Error::Contract("population has unevaluated members".into()));
    }
    let mut picks = sample(rng, fitness.len(), k).into_vec();
    picks.sort_unstable();
    let mut best = picks[0];
    for &i in &picks[1..] {
        if fitness[i] > fitness[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Uniform crossover: each gene from either parent with probability ½.
pub fn crossover(a: &HardwareParams, b: &HardwareParams, rng: &mut impl Rng) -> Result<HardwareParams> {
    if GeneLayout::of(a) != GeneLayout::of(b) {
        return Err(Error::Contract("parents have different gene layouts".into()));
    }
    let mut child = a.clone();
    for i in 0..a.length_multipliers.len() {
        if rng.gen_bool(0.5) {
            child.length_multipliers[i] = b.length_multipliers[i];
        }
    }
    for i in 0..a.densities.len() {
        if rng.gen_bool(0.5) {
            child.densities[i] = b.densities[i];
        }
    }
    for i in 0..a.motor_ids.len() {
        if rng.gen_bool(0.5) {
            child.motor_ids[i] = b.motor_ids[i].clone();
        }
    }
    Ok(child)
}

/// Resample ⌈fraction · genes⌉ distinct genes uniformly over their domains.
pub fn mutate(c: &HardwareParams, fraction: f64, domains: &GeneDomains, rng: &mut impl Rng) -> HardwareParams {
    let layout = GeneLayout::of(c);
    let n = layout.total();
    let count = ((fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).min(n);
    let mut out = c.clone();
    let [lo, hi] = domains.length_bounds;
    let mut genes = sample(rng, n, count).into_vec();
    genes.sort_unstable();
    for g in genes {
        if g < layout.lengths {
            out.length_multipliers[g] = rng.gen_range(lo..=hi);
        } else if g < layout.lengths + layout.densities {
            out.densities[g - layout.lengths] = domains.materials[rng.gen_range(0..domains.materials.len())];
        } else {
            out.motor_ids[g - layout.lengths - layout.densities] = domains.motors[rng.gen_range(0..domains.motors.len())].clone();
        }
    }
    out
}

/// Stops once a generation's best reaches (1 + fraction) × the generation-0 best.
#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    pub fraction: f64,
    baseline: Option<f64>,
}

impl StopRule {
    pub fn new(fraction: f64) -> Self {
        StopRule { fraction, baseline: None }
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn threshold(&self) -> Option<f64> {
        self.baseline.map(|b| (1.0 + self.fraction) * b)
    }

    /// Feed the best fitness of the next generation; true when the run should stop.
    pub fn observe(&mut self, best: f64) -> bool {
        match self.baseline {
            None => {
                self.baseline = Some(best);
                false
            }
            Some(b) if b > 0.0 => best >= (1.0 + self.fraction) * b * (1.0 - 1e-12),
            Some(_) => false,
        }
    }
}

/// Generation at which the stop rule fires for a sequence of per-generation bests.
pub fn stop_generation(bests: &[f64], fraction: f64) -> Option<usize> {
    let mut rule = StopRule::new(fraction);
    bests.iter().position(|b| rule.observe(*b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    #[default]
    Uniform,
}

fn default_population() -> usize {
    20
}
fn default_tournament() -> usize {
    3
}
fn default_mutation() -> f64 {
    0.1
}
fn default_elitism() -> usize {
    1
}
fn default_stop() -> Option<f64> {
    Some(0.05)
}
fn default_generations() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_tournament")]
    pub tournament: usize,
    #[serde(default = "default_mutation")]
    pub mutation_fraction: f64,
    #[serde(default)]
    pub crossover: CrossoverKind,
    #[serde(default = "default_elitism")]
    pub elitism: usize,
    /// Relative improvement over the generation-0 best that ends the run;
    /// null runs every generation.
    #[serde(default = "default_stop")]
    pub stop_improvement: Option<f64>,
    #[serde(default = "default_generations")]
    pub max_generations: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: default_population(),
            tournament: default_tournament(),
            mutation_fraction: default_mutation(),
            crossover: CrossoverKind::Uniform,
            elitism: default_elitism(),
            stop_improvement: default_stop(),
            max_generations: default_generations(),
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Contract(m));
        if self.population == 0 {
            return bad("population must be positive".into());
        }
        if self.tournament == 0 || self.tournament > self.population {
            return bad(format!("tournament size {} must lie in 1..={}", self.tournament, self.population));
        }
        if !(0.0..=1.0).contains(&self.mutation_fraction) {
            return bad("mutation fraction must lie in [0, 1]".into());
        }
        if self.elitism > self.population {
            return bad("elitism exceeds the population".into());
        }
        if let Some(f) = self.stop_improvement {
            if !(0.0..=1.0).contains(&f) {
                return bad("stop improvement must lie in [0, 1]".into());
            }
        }
        if self.max_generations == 0 {
            return bad("at least one generation is required".into());
        }
        Ok(())
    }
}

/// Outcome of one (human, load) problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub human: String,
    pub load: String,
    pub status: PostureStatus,
    pub iterations: usize,
    /// Largest per-height ‖τ̄‖₂ of the solve (0 when unsolved).
    pub max_torque_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub scenarios: Vec<ScenarioOutcome>,
    /// τ̄_w, absent when no scenario solved.
    pub worst_torque: Option<DVector<f64>>,
    pub worst_norm: f64,
    /// (scenario index, height index) of τ̄_w.
    pub worst_location: Option<(usize, usize)>,
    pub fitness: f64,
    pub wall_time_s: f64,
}

impl FitnessReport {
    pub fn all_solved(&self) -> bool {
        self.scenarios.iter().all(|s| s.status == PostureStatus::Solved)
    }
}

/// Fitness from per-scenario solutions in scenario order.
pub fn fitness_from_solutions(names: &[(String, String)], solutions: &[PostureSolution], wf: f64) -> FitnessReport {
    let mut worst: Option<(f64, usize, usize)> = None;
    let mut scenarios = Vec::with_capacity(solutions.len());
    for (i, (sol, (human, load))) in solutions.iter().zip(names).enumerate() {
        let mut max_norm = 0.0f64;
        if sol.solved() {
            for (k, h) in sol.heights.iter().enumerate() {
                let n = h.torques.norm();
                max_norm = max_norm.max(n);
                if worst.map_or(true, |(w, _, _)| n > w) {
                    worst = Some((n, i, k));
                }
            }
        }
        scenarios.push(ScenarioOutcome {
            human: human.clone(),
            load: load.clone(),
            status: sol.status,
            iterations: sol.iterations,
            max_torque_norm: max_norm,
        });
    }
    let all_solved = solutions.iter().all(|s| s.solved()) && !solutions.is_empty();
    let worst_norm = worst.map_or(0.0, |w| w.0);
    let fitness = if all_solved && worst_norm > 0.0 { wf / worst_norm } else { 0.0 };
    FitnessReport {
        scenarios,
        worst_torque: worst.map(|(_, i, k)| solutions[i].heights[k].torques.clone()),
        worst_norm,
        worst_location: worst.map(|(_, i, k)| (i, k)),
        fitness,
        wall_time_s: 0.0,
    }
}

/// Humans, loads and the shared task every design is scored on.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub robot: KinematicModel,
    pub catalog: MotorCatalog,
    pub humans: Vec<ParametrizedModel>,
    pub loads: Vec<ParametrizedModel>,
    pub contacts: Vec<ContactSpec>,
    pub task: TaskSpec,
    pub weights: CostWeights,
    pub solver: SolverOptions,
    /// Per-pair initial guesses, in pair order.
    warm_starts: Vec<Option<Vec<HeightSolution>>>,
}

impl ScenarioSet {
    pub fn new(
        robot: KinematicModel,
        catalog: MotorCatalog,
        humans: Vec<ParametrizedModel>,
        loads: Vec<ParametrizedModel>,
        contacts: Vec<ContactSpec>,
        task: TaskSpec,
        weights: CostWeights,
        solver: SolverOptions,
    ) -> Result<Self> {
        if humans.is_empty() || loads.is_empty() {
            return Err(Error::Contract("scenario set needs at least one human and one load".into()));
        }
        task.validate()?;
        weights.validate()?;
        let n = humans.len() * loads.len();
        Ok(ScenarioSet {
            robot,
            catalog,
            humans,
            loads,
            contacts,
            task,
            weights,
            solver,
            warm_starts: vec![None; n],
        })
    }

    /// (human, load) index pairs, human-major.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.humans.len())
            .flat_map(|h| (0..self.loads.len()).map(move |l| (h, l)))
            .collect()
    }

    pub fn pair_names(&self) -> Vec<(String, String)> {
        self.pairs()
            .into_iter()
            .map(|(h, l)| (self.humans[h].name.clone(), self.loads[l].name.clone()))
            .collect()
    }

    pub fn system(&self, robot: &ParametrizedModel, pair: (usize, usize)) -> Result<CompositeSystem> {
        CompositeSystem::new(
            self.humans[pair.0].clone(),
            robot.clone(),
            self.loads[pair.1].clone(),
            self.contacts.clone(),
        )
    }

    /// Solve one pair for design `params`.
    pub fn solve_pair(&self, params: &HardwareParams, pair_index: usize) -> Result<PostureSolution> {
        let robot = ParametrizedModel::new(&self.robot, params, &self.catalog)?;
        let pair = self.pairs()[pair_index];
        let problem = build_problem(self.system(&robot, pair)?, self.task.clone(), self.weights.clone())?;
        Ok(problem.solve_from(self.warm_starts[pair_index].as_deref(), &self.solver))
    }

    /// Fix the initial guess of every pair to the solution for `params`.
    /// Solves run once; the stored guesses never change afterwards, which
    /// keeps fitness a pure function of the design.
    pub fn prepare_warm_starts(&mut self, params: &HardwareParams) -> Result<()> {
        let n = self.pairs().len();
        let sols = (0..n)
            .into_par_iter()
            .map(|i| self.solve_pair(params, i))
            .collect::<Result<Vec<_>>>()?;
        self.warm_starts = sols.into_iter().map(|s| s.solved().then_some(s.heights)).collect();
        Ok(())
    }

    /// Solve every pair (in parallel) and score the design.
    pub fn evaluate_design(&self, params: &HardwareParams) -> (FitnessReport, Vec<PostureSolution>) {
        let start = Instant::now();
        let n = self.pairs().len();
        let sols: Vec<Option<PostureSolution>> = (0..n).into_par_iter().map(|i| self.solve_pair(params, i).ok()).collect();
        if sols.iter().any(|s| s.is_none()) {
            // an invalid design (e.g. degenerate geometry) scores zero
            let mut report = fitness_from_solutions(&[], &[], self.weights.wf);
            report.scenarios = self
                .pair_names()
                .into_iter()
                .map(|(human, load)| ScenarioOutcome {
                    human,
                    load,
                    status: PostureStatus::Infeasible,
                    iterations: 0,
                    max_torque_norm: 0.0,
                })
                .collect();
            report.wall_time_s = start.elapsed().as_secs_f64();
            return (report, Vec::new());
        }
        let sols: Vec<PostureSolution> = sols.into_iter().flatten().collect();
        let mut report = fitness_from_solutions(&self.pair_names(), &sols, self.weights.wf);
        report.wall_time_s = start.elapsed().as_secs_f64();
        (report, sols)
    }

    pub fn evaluate_fitness(&self, params: &HardwareParams) -> FitnessReport {
        self.evaluate_design(params).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_fitness: f64,
    /// Population variance (divided by n_g).
    pub var_fitness: f64,
    pub max_fitness: f64,
    pub best_member_id: u64,
}

pub const STATS_HEADER: &str = "generation,mean_fitness [1/(N*m)],var_fitness [1/(N*m)^2],max_fitness [1/(N*m)],best_member_id";

pub fn stats_csv(stats: &[GenerationStats]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for s in stats {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{}\n",
            s.generation, s.mean_fitness, s.var_fitness, s.max_fitness, s.best_member_id
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// Unique within a run; elites keep theirs across generations.
    pub id: u64,
    pub params: HardwareParams,
    pub report: FitnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub best: Member,
    pub stats: Vec<GenerationStats>,
    pub final_population: Vec<Member>,
    pub stopped_early: bool,
    /// Fitness evaluations actually computed (cache misses).
    pub evaluations: usize,
}

/// Stream for member `index` of generation `generation`, independent of
/// evaluation order.
pub fn member_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn gene_key(p: &HardwareParams) -> (Vec<u64>, Vec<u64>, Vec<String>) {
    (
        p.length_multipliers.iter().map(|v| v.to_bits()).collect(),
        p.densities.iter().map(|v| v.to_bits()).collect(),
        p.motor_ids.clone(),
    )
}

/// Best-first order: higher fitness, then lower index.
fn ranking(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    idx
}

/// Run the genetic loop with an arbitrary fitness function.
///
/// `initial` members seed generation 0 (in order) and the rest is filled
/// with random designs. Identical chromosomes are evaluated once.
pub fn evolve_with<F>(
    config: &EvolutionConfig,
    domains: &GeneDomains,
    layout: GeneLayout,
    initial: &[HardwareParams],
    fitness: F,
) -> Result<EvolutionResult>
where
    F: Fn(&HardwareParams) -> FitnessReport + Sync,
{
    config.validate()?;
    domains.validate()?;
    for c in initial {
        if GeneLayout::of(c) != layout {
            return Err(Error::Contract("warm-start chromosome has the wrong gene layout".into()));
        }
        if !domains.contains(c) {
            return Err(Error::Contract("warm-start chromosome lies outside the gene domains".into()));
        }
    }
    let mut next_id = 0u64;
    let mut fresh = |params: HardwareParams| {
        next_id += 1;
        (next_id - 1, params)
    };
    let mut init_rng = member_rng(config.seed, usize::MAX >> 32, 0);
    let mut population: Vec<(u64, HardwareParams)> = initial.iter().take(config.population).cloned().map(&mut fresh).collect();
    while population.len() < config.population {
        let p = domains.random(layout, &mut init_rng);
        population.push(fresh(p));
    }

    let mut cache: HashMap<(Vec<u64>, Vec<u64>, Vec<String>), FitnessReport> = HashMap::new();
    let mut evaluations = 0;
    let mut stats = Vec::new();
    let mut rule = config.stop_improvement.map(StopRule::new);
    let mut stopped_early = false;
    let mut members: Vec<Member>;
    let mut generation = 0;
    loop {
        let mut pending: Vec<&HardwareParams> = Vec::new();
        for (_, p) in &population {
            let key = gene_key(p);
            if !cache.contains_key(&key) && !pending.iter().any(|q| gene_key(q) == key) {
                pending.push(p);
            }
        }
        let reports: Vec<FitnessReport> = pending.par_iter().map(|p| fitness(p)).collect();
        evaluations += reports.len();
        for (p, r) in pending.iter().zip(reports) {
            cache.insert(gene_key(p), r);
        }
        members = population
            .iter()
            .map(|(id, p)| Member {
                id: *id,
                params: p.clone(),
                report: cache[&gene_key(p)].clone(),
            })
            .collect();
        let fit: Vec<f64> = members.iter().map(|m| m.report.fitness).collect();
        let n = fit.len() as f64;
        let mean = fit.iter().sum::<f64>() / n;
        let var = fit.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
        let order = ranking(&fit);
        stats.push(GenerationStats {
            generation,
            mean_fitness: mean,
            var_fitness: var,
            max_fitness: fit[order[0]],
            best_member_id: members[order[0]].id,
        });
        log::info!("generation {generation}: max {:.6} mean {:.6}", fit[order[0]], mean);
        if let Some(rule) = rule.as_mut() {
            if rule.observe(fit[order[0]]) {
                stopped_early = true;
                break;
            }
        }
        if generation + 1 >= config.max_generations {
            break;
        }
        generation += 1;

        let mut next: Vec<(u64, HardwareParams)> = order[..config.elitism]
            .iter()
            .map(|&i| (members[i].id, members[i].params.clone()))
            .collect();
        let children: Vec<HardwareParams> = (config.elitism..config.population)
            .map(|idx| {
                let mut rng = member_rng(config.seed, generation, idx);
                let a = tournament_select(&fit, config.tournament, &mut rng)?;
                let b = tournament_select(&fit, config.tournament, &mut rng)?;
                let child = match config.crossover {
                    CrossoverKind::Uniform => crossover(&members[a].params, &members[b].params, &mut rng)?,
                };
                Ok(mutate(&child, config.mutation_fraction, domains, &mut rng))
            })
            .collect::<Result<_>>()?;
        next.extend(children.into_iter().map(&mut fresh));
        population = next;
    }
    let fit: Vec<f64> = members.iter().map(|m| m.report.fitness).collect();
    let best = members[ranking(&fit)[0]].clone();
    Ok(EvolutionResult {
        best,
        stats,
        final_population: members,
        stopped_early,
        evaluations,
    })
}

/// Run the genetic loop on a scenario set. Warm starts of the posture
/// solves come from the first initial chromosome (or the nominal design).
pub fn evolve(
    config: &EvolutionConfig,
    domains: &GeneDomains,
    scenarios: &mut ScenarioSet,
    initial: &[HardwareParams],
) -> Result<EvolutionResult> {
    let nominal = HardwareParams::nominal(&scenarios.robot)?;
    let anchor = initial.first().cloned().unwrap_or(nominal.clone());
    anchor.validate(&scenarios.robot, &scenarios.catalog)?;
    scenarios.prepare_warm_starts(&anchor)?;
    let set: &ScenarioSet = scenarios;
    evolve_with(config, domains, GeneLayout::of(&nominal), initial, |p| set.evaluate_fitness(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> HardwareParams {
        HardwareParams {
            length_multipliers: vec![1.0, 1.2],
            densities: vec![600.0, 900.0, 1200.0],
            motor_ids: vec!["S".into(), "M".into()],
        }
    }

    #[test]
    fn stop_rule_uses_generation_zero_baseline() {
        let mut r = StopRule::new(0.05);
        assert!(!r.observe(4.0));
        assert!(!r.observe(4.1));
        assert!(r.observe(4.2));
        assert_eq!(stop_generation(&[4.0, 4.1, 4.19, 4.3, 4.4], 0.05), Some(3));
        assert_eq!(stop_generation(&[0.0, 1.0, 2.0], 0.05), None);
    }

    #[test]
    fn tournament_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(tournament_select(&[1.0, 5.0, 3.0], 3, &mut rng).unwrap(), 1);
        assert_eq!(tournament_select(&[4.0, 4.0], 2, &mut rng).unwrap(), 0);
        assert!(tournament_select(&[], 1, &mut rng).is_err());
        assert!(tournament_select(&[1.0], 2, &mut rng).is_err());
        assert!(tournament_select(&[1.0, f64::NAN], 1, &mut rng).is_err());
        let mut seen = [0; 3];
        for _ in 0..300 {
            seen[tournament_select(&[1.0, 5.0, 3.0], 1, &mut rng).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 50));
    }

    #[test]
    fn crossover_and_mutation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = params();
        assert_eq!(crossover(&a, &a, &mut rng).unwrap(), a);
        let mut short = a.clone();
        short.motor_ids.pop();
        assert!(crossover(&a, &short, &mut rng).is_err());
        let domains = GeneDomains::new(&MotorCatalog::reference());
        assert_eq!(mutate(&a, 0.0, &domains, &mut rng), a);
        // ⌈0.1 · 7⌉ = 1 gene changes at most
        let m = mutate(&a, 0.1, &domains, &mut rng);
        let diff = a.length_multipliers.iter().zip(&m.length_multipliers).filter(|(x, y)| x != y).count()
            + a.densities.iter().zip(&m.densities).filter(|(x, y)| x != y).count()
            + a.motor_ids.iter().zip(&m.motor_ids).filter(|(x, y)| x != y).count();
        assert!(diff <= 1);
        assert!(domains.contains(&mutate(&a, 1.0, &domains, &mut rng)));
    }

    #[test]
    fn fitness_is_reciprocal_of_worst_norm() {
        let sol = |norms: &[f64], status| PostureSolution {
            status,
            heights: norms
                .iter()
                .map(|n| HeightSolution {
                    height: 1.0,
                    configuration: crate::coupled::CompositeConfiguration {
                        human: crate::state::Configuration::neutral(0),
                        robot: crate::state::Configuration::neutral(0),
                        load: crate::state::Configuration::neutral(0),
                    },
                    torques: DVector::from_vec(vec![*n, 0.0]),
                    wrenches: DVector::zeros(0),
                })
                .collect(),
            objective: 0.0,
            max_violation: 0.0,
            iterations: 1,
            restarts: 0,
            torque_weights: DVector::zeros(2),
            human_reference: DVector::zeros(0),
            robot_reference: DVector::zeros(0),
        };
        let names = vec![("h".to_string(), "l".to_string()), ("h".to_string(), "l2".to_string())];
        let r = fitness_from_solutions(&names[..1], &[sol(&[10.0, 20.0, 15.0], PostureStatus::Solved)], 100.0);
        assert!((r.fitness - 5.0).abs() < 1e-12);
        assert_eq!(r.worst_location, Some((0, 1)));
        let r = fitness_from_solutions(&names[..1], &[sol(&[8.0], PostureStatus::Solved)], 100.0);
        assert!((r.fitness - 12.5).abs() < 1e-12);
        let r = fitness_from_solutions(
            &names,
            &[sol(&[10.0], PostureStatus::Solved), sol(&[1.0], PostureStatus::Infeasible)],
            100.0,
        );
        assert_eq!(r.fitness, 0.0);
        assert!(!r.all_solved());
    }

    #[test]
    fn stats_csv_has_the_documented_header() {
        let s = stats_csv(&[GenerationStats {
            generation: 0,
            mean_fitness: 1.5,
            var_fitness: 0.25,
            max_fitness: 2.0,
            best_member_id: 3,
        }]);
        assert_eq!(s, "generation,mean_fitness [1/(N*m)],var_fitness [1/(N*m)^2],max_fitness [1/(N*m)],best_member_id\n0,1.5e0,2.5e-1,2e0,3\n");
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::default().validate().is_ok());
        let bad = [
            EvolutionConfig { tournament: 30, ..Default::default() },
            EvolutionConfig { mutation_fraction: 1.5, ..Default::default() },
            EvolutionConfig { population: 0, ..Default::default() },
            EvolutionConfig { elitism: 21, ..Default::default() },
            EvolutionConfig { max_generations: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
