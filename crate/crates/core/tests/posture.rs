use std::f64::consts::PI;

use ergodesign::coupled::{AgentRole, ContactKind};
use ergodesign::fixtures;
use ergodesign::kinematics::ParametrizedModel;
use ergodesign::motor::MotorCatalog;
use ergodesign::posture::{
    build_problem, evaluate_costs, ConstraintFamily, CostWeights, PostureStatus, SolverOptions, StaticPostureProblem, TaskSpec,
};
use ergodesign::scenes;

const G: f64 = 9.81;

fn toy_problem(load: f64, heights: Vec<f64>) -> StaticPostureProblem {
    let robot = ParametrizedModel::nominal(&fixtures::toy_robot(), &MotorCatalog::reference()).unwrap();
    let sys = scenes::toy_scene(&fixtures::human(178), &robot, load).unwrap();
    build_problem(sys, TaskSpec::new(heights), CostWeights::default()).unwrap()
}

fn arm_torque_oracle(load_mass: f64, height: f64) -> f64 {
    let l = scenes::ARM_LENGTH;
    let arm_mass = 1000.0 * PI * 0.02 * 0.02 * l;
    let cos = (1.0 - ((height - scenes::ARM_SHOULDER_HEIGHT) / l).powi(2)).sqrt();
    (load_mass / 2.0 * G * l + arm_mass * G * l / 2.0) * cos
}

#[test]
fn registry_counts_match_the_layout() {
    let p = toy_problem(5.0, vec![0.8, 1.0, 1.2]);
    let l = p.layout;
    assert_eq!(l.configuration_size(), 21 + 6 + 6);
    assert_eq!(l.wrench_dim, 8 * 6);
    assert_eq!(l.num_variables(), 3 * (33 + 12 + 48));
    let reg: std::collections::HashMap<_, _> = p.constraint_registry().into_iter().collect();
    // three free bodies of 6 + 6 + 6 joints each side
    assert_eq!(reg[&ConstraintFamily::Dynamics], 3 * (12 + 12 + 6));
    assert_eq!(reg[&ConstraintFamily::GraspPosition], 3 * 4 * 3);
    assert_eq!(reg[&ConstraintFamily::Orientation], 3 * 5 * 3);
    assert_eq!(reg[&ConstraintFamily::Height], 3 * 5);
    assert_eq!(reg[&ConstraintFamily::LoadAnchor], 2);
    assert_eq!(reg[&ConstraintFamily::LoadStationary], 4);
    assert_eq!(reg[&ConstraintFamily::FeetStationary], 2 * 4 * 2);
    assert_eq!(reg[&ConstraintFamily::QuaternionNorm], 9);
    assert_eq!(reg[&ConstraintFamily::Symmetry], 3 * (2 + 3));
    assert_eq!(reg[&ConstraintFamily::Friction], 3 * 4 * 11);
    let eq: usize = [
        ConstraintFamily::Dynamics,
        ConstraintFamily::GraspPosition,
        ConstraintFamily::Orientation,
        ConstraintFamily::Height,
        ConstraintFamily::LoadAnchor,
        ConstraintFamily::LoadStationary,
        ConstraintFamily::FeetStationary,
        ConstraintFamily::QuaternionNorm,
        ConstraintFamily::Symmetry,
    ]
    .iter()
    .map(|f| reg[f])
    .sum();
    assert_eq!(eq, p.num_equalities());
    assert_eq!(reg[&ConstraintFamily::Friction], p.num_inequalities());
}

#[test]
fn arm_pair_shares_the_load_analytically() {
    // horizontal arms: grasp squeeze has no moment arm about the shoulders
    for mass in [2.5, 5.0, 8.0] {
        let heights = vec![scenes::ARM_SHOULDER_HEIGHT];
        let sys = scenes::arm_pair(mass).unwrap();
        let p = build_problem(sys, TaskSpec::new(heights.clone()), CostWeights::default()).unwrap();
        let s = p.solve(&SolverOptions::default());
        assert_eq!(s.status, PostureStatus::Solved);
        assert!(s.max_violation < 1e-9, "{}", s.max_violation);
        for h in &s.heights {
            let expected = arm_torque_oracle(mass, h.height);
            assert!((h.torques[0].abs() - expected).abs() < 1e-6, "{} vs {expected}", h.torques[0]);
            assert!((h.torques[1].abs() - expected).abs() < 1e-6, "{} vs {expected}", h.torques[1]);
            let offsets = p.system.wrench_offsets();
            let vertical: f64 = p
                .system
                .contacts
                .iter()
                .zip(&offsets)
                .filter(|(c, _)| c.kind == ContactKind::Grasp)
                .map(|(_, &o)| h.wrenches[o + 2])
                .sum();
            assert!((vertical.abs() - mass * G).abs() < 1e-6, "{vertical}");
        }
    }
}

#[test]
fn toy_scene_is_solved_and_independently_feasible() {
    let p = toy_problem(5.0, vec![0.8, 1.0, 1.2]);
    let s = p.solve(&SolverOptions::default());
    assert_eq!(s.status, PostureStatus::Solved);
    let rep = p.check_feasibility(&s);
    assert!(rep.max() <= 1e-6, "{rep:?}");
    assert!(rep.friction < 0.0);
    assert!(rep.min_normal_force > 0.0);
    for h in &s.heights {
        let r = p.system.composite_static_residual(&h.configuration, &h.torques, &h.wrenches).unwrap();
        assert!(r.amax() <= 1e-6);
        // symmetric joints of the symmetric scene carry equal torques
        for (a, b) in [(0, 1), (4, 5), (6, 7), (8, 9), (10, 11)] {
            assert!((h.torques[a] - h.torques[b]).abs() < 1e-4, "{a},{b}: {}", h.torques);
        }
        let q = &h.configuration;
        assert!((q.load.base_position.z - h.height).abs() < 1e-9);
        assert!(q.get(AgentRole::Human).base_position.x < q.load.base_position.x);
        assert!(q.get(AgentRole::Robot).base_position.x > q.load.base_position.x);
    }
    let costs = evaluate_costs(&s, &p.weights).unwrap();
    assert!((costs.objective - s.objective).abs() <= 1e-9 * s.objective.max(1.0));
    assert_eq!(costs.t1.len(), 3);
    assert_eq!(costs.t3.len(), 2);
}

#[test]
fn warm_start_reaches_the_same_optimum() {
    let p = toy_problem(5.0, vec![0.9, 1.1]);
    let cold = p.solve(&SolverOptions::default());
    let warm = p.solve_from(Some(&cold.heights), &SolverOptions::default());
    assert!(cold.solved() && warm.solved());
    assert!(warm.iterations <= 2, "{}", warm.iterations);
    assert!((warm.objective - cold.objective).abs() <= 1e-6 * cold.objective);
}

fn vertical_forces(p: &StaticPostureProblem, w: &nalgebra::DVector<f64>, kind: ContactKind) -> f64 {
    p.system
        .contacts
        .iter()
        .zip(p.system.wrench_offsets())
        .filter(|(c, _)| c.kind == kind)
        .map(|(_, o)| w[o + 2])
        .sum()
}

#[test]
fn ground_and_grasp_forces_balance_the_weights() {
    let mut ground = Vec::new();
    for load in [5.0, 10.0] {
        let p = toy_problem(load, vec![1.0]);
        let s = p.solve(&SolverOptions::default());
        assert!(s.solved());
        let w = &s.heights[0].wrenches;
        let grasp = vertical_forces(&p, w, ContactKind::Grasp);
        assert!((grasp.abs() - load * G).abs() < 1e-6, "{grasp}");
        let total = p.system.human.total_mass() + p.system.robot.total_mass() + load;
        let feet = vertical_forces(&p, w, ContactKind::Environment);
        assert!((feet - total * G).abs() < 1e-6, "{feet}");
        ground.push(feet);
    }
    assert!((ground[1] - ground[0] - 5.0 * G).abs() < 1e-6);
}

#[test]
fn unreachable_height_is_infeasible_without_solving() {
    let p = toy_problem(5.0, vec![1.0, 3.5]);
    assert!(p.unreachable().is_some());
    let s = p.solve(&SolverOptions::default());
    assert_eq!(s.status, PostureStatus::Infeasible);
    assert_eq!(s.iterations, 0);
    assert!(evaluate_costs(&s, &p.weights).is_err());
}

#[test]
fn invalid_tasks_are_rejected() {
    let robot = ParametrizedModel::nominal(&fixtures::toy_robot(), &MotorCatalog::reference()).unwrap();
    let sys = scenes::toy_scene(&fixtures::human(178), &robot, 5.0).unwrap();
    assert!(build_problem(sys.clone(), TaskSpec::new(vec![]), CostWeights::default()).is_err());
    assert!(build_problem(sys.clone(), TaskSpec::new(vec![1.0, 0.9]), CostWeights::default()).is_err());
    let mut task = TaskSpec::new(vec![1.0]);
    task.human_reference = Some(vec![0.0; 3]);
    assert!(build_problem(sys.clone(), task, CostWeights::default()).is_err());
    let mut task = TaskSpec::new(vec![1.0]);
    task.robot_reference = Some(vec![5.0; 6]);
    assert!(build_problem(sys.clone(), task, CostWeights::default()).is_err());
    let weights = CostWeights { w1: 0.0, ..CostWeights::default() };
    assert!(build_problem(sys.clone(), TaskSpec::new(vec![1.0]), weights).is_err());
    let weights = CostWeights { torque_weights: Some(vec![1.0; 3]), ..CostWeights::default() };
    assert!(build_problem(sys, TaskSpec::new(vec![1.0]), weights).is_err());
}

#[test]
fn weaker_motors_with_identical_links_leave_statics_unchanged() {
    let model = fixtures::toy_robot();
    let strong = MotorCatalog::reference();
    let mut weak = strong.clone();
    for m in &mut weak.motors {
        m.torque_min *= 0.5;
        m.torque_max *= 0.5;
    }
    let solve = |cat: &MotorCatalog| {
        let robot = ParametrizedModel::nominal(&model, cat).unwrap();
        let sys = scenes::toy_scene(&fixtures::human(178), &robot, 5.0).unwrap();
        let p = build_problem(sys, TaskSpec::new(vec![0.9, 1.1]), CostWeights::default()).unwrap();
        p.solve(&SolverOptions::default())
    };
    let a = solve(&weak);
    let b = solve(&strong);
    assert!(a.solved() && b.solved());
    for (x, y) in a.heights.iter().zip(&b.heights) {
        assert!((x.torques.norm() - y.torques.norm()).abs() < 1e-6 * y.torques.norm());
    }
}

#[test]
fn assembled_derivatives_match_finite_differences() {
    use ergodesign::sqp::Nlp;
    let p = toy_problem(5.0, vec![0.9, 1.1]);
    let (lo, hi) = p.bounds();
    let mut x = nalgebra::DVector::from_fn(p.num_variables(), |i, _| 0.1 + 0.01 * (i % 7) as f64);
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    let d = p.derivatives(&x);
    let h = 1e-6;
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let (ep, em) = (p.evaluate(&xp), p.evaluate(&xm));
        let fd_eq = (&ep.equalities - &em.equalities) / (2.0 * h);
        let fd_in = (&ep.inequalities - &em.inequalities) / (2.0 * h);
        let fd_obj = (ep.objective - em.objective) / (2.0 * h);
        let e = (fd_eq - d.eq_jacobian.column(j)).amax();
        assert!(e < 1e-4 * (1.0 + d.eq_jacobian.column(j).amax()), "column {j}: {e}");
        assert!((fd_in - d.ineq_jacobian.column(j)).amax() < 1e-6);
        assert!((fd_obj - d.gradient[j]).abs() < 1e-5 * (1.0 + d.gradient[j].abs()), "grad {j}");
    }
}
