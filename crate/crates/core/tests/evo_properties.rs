use ergodesign::evo::{
    crossover, evolve_with, fitness_from_solutions, member_rng, mutate, stats_csv, stop_generation, tournament_select, EvolutionConfig,
    FitnessReport, GeneDomains, GeneLayout,
};
use ergodesign::motor::MotorCatalog;
use ergodesign::params::HardwareParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn layout() -> GeneLayout {
    GeneLayout {
        lengths: 4,
        densities: 4,
        motors: 3,
    }
}

fn synthetic(p: &HardwareParams) -> FitnessReport {
    let mut r = fitness_from_solutions(&[], &[], 1.0);
    let motor_bonus: f64 = p.motor_ids.iter().map(|m| if m == "S" { 0.3 } else { 0.0 }).sum();
    r.fitness = 10.0 - p.length_multipliers.iter().map(|l| (l - 0.8).powi(2)).sum::<f64>() - p.densities.iter().sum::<f64>() / 1e3 + motor_bonus;
    r
}

fn domains() -> GeneDomains {
    GeneDomains::new(&MotorCatalog::reference())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_stay_inside_the_domains(seed in any::<u64>(), fraction in 0.0f64..=1.0) {
        let d = domains();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop: Vec<HardwareParams> = (0..6).map(|_| d.random(layout(), &mut rng)).collect();
        let fit: Vec<f64> = (0..6).map(|i| i as f64).collect();
        for _ in 0..50 {
            let a = tournament_select(&fit, 3, &mut rng).unwrap();
            let b = tournament_select(&fit, 3, &mut rng).unwrap();
            let child = crossover(&pop[a], &pop[b], &mut rng).unwrap();
            for i in 0..child.length_multipliers.len() {
                prop_assert!(child.length_multipliers[i] == pop[a].length_multipliers[i] || child.length_multipliers[i] == pop[b].length_multipliers[i]);
            }
            for i in 0..child.motor_ids.len() {
                prop_assert!(child.motor_ids[i] == pop[a].motor_ids[i] || child.motor_ids[i] == pop[b].motor_ids[i]);
            }
            let m = mutate(&child, fraction, &d, &mut rng);
            prop_assert!(d.contains(&m));
            pop[a] = m;
        }
    }

    #[test]
    fn seeded_operators_are_deterministic(seed in any::<u64>()) {
        let d = domains();
        let run = || {
            let mut rng = member_rng(seed, 3, 5);
            let a = d.random(layout(), &mut rng);
            let b = d.random(layout(), &mut rng);
            let c = crossover(&a, &b, &mut rng).unwrap();
            mutate(&c, 0.1, &d, &mut rng)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn stop_generation_is_the_first_crossing(base in 0.1f64..10.0, steps in proptest::collection::vec(0.0f64..0.03, 1..30)) {
        let mut seq = vec![base];
        for s in &steps {
            let last = *seq.last().unwrap();
            seq.push(last * (1.0 + s));
        }
        let expected = seq.iter().position(|v| *v >= 1.05 * base * (1.0 - 1e-12));
        prop_assert_eq!(stop_generation(&seq, 0.05), expected);
    }

    #[test]
    fn elitism_keeps_the_best_nondecreasing(seed in any::<u64>()) {
        let config = EvolutionConfig { population: 6, max_generations: 8, stop_improvement: None, seed, ..Default::default() };
        let r = evolve_with(&config, &domains(), layout(), &[], synthetic).unwrap();
        prop_assert_eq!(r.stats.len(), 8);
        for w in r.stats.windows(2) {
            prop_assert!(w[1].max_fitness >= w[0].max_fitness);
        }
        prop_assert!((r.best.report.fitness - r.stats.last().unwrap().max_fitness).abs() == 0.0);
    }
}

#[test]
fn fixed_seed_gives_identical_stats() {
    let config = EvolutionConfig {
        population: 8,
        max_generations: 10,
        stop_improvement: None,
        seed: 42,
        ..Default::default()
    };
    let a = evolve_with(&config, &domains(), layout(), &[], synthetic).unwrap();
    let b = evolve_with(&config, &domains(), layout(), &[], synthetic).unwrap();
    assert_eq!(stats_csv(&a.stats), stats_csv(&b.stats));
    let c = evolve_with(&EvolutionConfig { seed: 43, ..config }, &domains(), layout(), &[], synthetic).unwrap();
    assert_ne!(stats_csv(&a.stats), stats_csv(&c.stats));
}

#[test]
fn single_member_population_is_constant() {
    let config = EvolutionConfig {
        population: 1,
        tournament: 1,
        elitism: 1,
        max_generations: 5,
        stop_improvement: None,
        ..Default::default()
    };
    let r = evolve_with(&config, &domains(), layout(), &[], synthetic).unwrap();
    assert_eq!(r.stats.len(), 5);
    assert!(r.stats.iter().all(|s| s.max_fitness == r.stats[0].max_fitness && s.var_fitness == 0.0));
    assert_eq!(r.evaluations, 1);
}

#[test]
fn evolution_stops_at_the_first_crossing_generation() {
    let config = EvolutionConfig {
        population: 6,
        max_generations: 40,
        stop_improvement: Some(0.05),
        seed: 3,
        ..Default::default()
    };
    let start = HardwareParams {
        length_multipliers: vec![2.0; 4],
        densities: vec![1500.0; 4],
        motor_ids: vec!["L".into(); 3],
    };
    let r = evolve_with(&config, &domains(), layout(), &[start], synthetic).unwrap();
    let bests: Vec<f64> = r.stats.iter().map(|s| s.max_fitness).collect();
    let stop = stop_generation(&bests, 0.05).expect("improves by 5%");
    assert!(r.stopped_early);
    assert_eq!(stop, r.stats.len() - 1);
    assert!(bests[..stop].iter().all(|b| *b < 1.05 * bests[0]));
}

#[test]
fn warm_starts_outside_the_domain_are_rejected() {
    let bad = HardwareParams {
        length_multipliers: vec![5.0; 4],
        densities: vec![600.0; 4],
        motor_ids: vec!["S".into(); 3],
    };
    let config = EvolutionConfig::default();
    assert!(evolve_with(&config, &domains(), layout(), &[bad], synthetic).is_err());
}
