//! Line-search SQP for dense, moderately sized nonlinear programs
//!
//! ```text
//! min f(x)  s.t.  c_E(x) = 0,  c_I(x) ≤ 0,  l ≤ x ≤ u
//! ```
//!
//! Each iteration solves an elastic (ℓ1-penalized) QP with clarabel, so the
//! subproblem is always feasible, then backtracks on the ℓ1 merit function
//! with one second-order correction. Curvature is a user-supplied exact PSD
//! part plus block-diagonal damped BFGS for the rest of the Lagrangian.

use std::collections::VecDeque;
use std::ops::Range;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Function values at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub equalities: DVector<f64>,
    pub inequalities: DVector<f64>,
}

/// First derivatives at a point.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub gradient: DVector<f64>,
    pub eq_jacobian: DMatrix<f64>,
    pub ineq_jacobian: DMatrix<f64>,
}

pub trait Nlp {
    fn num_variables(&self) -> usize;

    fn bounds(&self) -> (DVector<f64>, DVector<f64>);

    fn evaluate(&self, x: &DVector<f64>) -> Evaluation;

    fn derivatives(&self, x: &DVector<f64>) -> Derivatives;

    /// PSD model of the curvature of the objective terms listed by
    /// [`exact_gradient`](Nlp::exact_gradient); used as is in every QP.
    fn exact_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        DMatrix::zeros(n, n)
    }

    fn exact_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }

    /// Partition of the variables into blocks within which the remaining
    /// Lagrangian curvature lives.
    fn hessian_blocks(&self) -> Vec<Range<usize>> {
        vec![0..self.num_variables()]
    }

    /// Largest allowed |d_i| per iteration.
    fn step_limits(&self) -> DVector<f64> {
        DVector::from_element(self.num_variables(), f64::INFINITY)
    }
}

/// Past iterates the merit test compares against.
const MERIT_MEMORY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqpOptions {
    pub max_iterations: usize,
    pub tol_feasibility: f64,
    pub tol_optimality: f64,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    pub initial_curvature: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        SqpOptions {
            max_iterations: 300,
            tol_feasibility: 1e-9,
            tol_optimality: 1e-6,
            initial_penalty: 10.0,
            max_penalty: 1e8,
            initial_curvature: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqpStatus {
    Converged,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub x: DVector<f64>,
    pub status: SqpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub stationarity: f64,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
}

pub fn max_violation(ev: &Evaluation) -> f64 {
    let e = ev.equalities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ev.inequalities.iter().fold(e, |m, v| m.max(*v))
}

fn l1_violation(ev: &Evaluation) -> f64 {
    ev.equalities.iter().map(|v| v.abs()).sum::<f64>() + ev.inequalities.iter().map(|v| v.max(0.0)).sum::<f64>()
}

fn merit(ev: &Evaluation, rho: f64) -> f64 {
    ev.objective + rho * l1_violation(ev)
}

fn clip(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Column-oriented sparse builder for clarabel matrices.
struct Columns {
    rows: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl Columns {
    fn new(rows: usize, ncols: usize) -> Self {
        Columns {
            rows,
            cols: vec![Vec::new(); ncols],
        }
    }

    fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.cols[c].push((r, v));
        }
    }

    fn build(mut self) -> CscMatrix<f64> {
        let mut colptr = Vec::with_capacity(self.cols.len() + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for col in &mut self.cols {
            col.sort_by_key(|e| e.0);
            for &(r, v) in col.iter() {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        CscMatrix::new(self.rows, self.cols.len(), colptr, rowval, nzval)
    }
}

struct QpSolution {
    d: DVector<f64>,
    z_eq: DVector<f64>,
    z_ineq: DVector<f64>,
    /// Multipliers of the bound rows mapped back to variables (upper − lower).
    z_bounds: DVector<f64>,
    linear_violation: f64,
}

struct Subproblem<'a> {
    hessian: &'a DMatrix<f64>,
    gradient: &'a DVector<f64>,
    ev: &'a Evaluation,
    der: &'a Derivatives,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Subproblem<'_> {
    /// Plain QP when its linearization is consistent, elastic QP otherwise.
    fn solve(&self, rho: f64) -> Option<QpSolution> {
        self.solve_with(rho, false).or_else(|| self.solve_with(rho, true))
    }

    /// Elastic QP: variables (d, p, n, t) with A_E d − p + n = −c_E,
    /// A_I d − t ≤ −c_I, p, n, t ≥ 0 and box limits on d.
    fn solve_with(&self, rho: f64, elastic: bool) -> Option<QpSolution> {
        let n = self.gradient.len();
        let me = self.ev.equalities.len();
        let mi = self.ev.inequalities.len();
        let ne = if elastic { 2 * me + mi } else { 0 };
        let nz = n + ne;

        let mut p = Columns::new(nz, nz);
        for j in 0..n {
            for i in 0..=j {
                p.push(i, j, self.hessian[(i, j)]);
            }
        }
        let mut q = vec![0.0; nz];
        q[..n].copy_from_slice(self.gradient.as_slice());
        for v in q.iter_mut().skip(n) {
            *v = rho;
        }

        let bound_rows: Vec<(usize, bool, f64)> = (0..n)
            .flat_map(|j| {
                let mut r = Vec::new();
                if self.upper[j].is_finite() {
                    r.push((j, true, self.upper[j]));
                }
                if self.lower[j].is_finite() {
                    r.push((j, false, -self.lower[j]));
                }
                r
            })
            .collect();
        let m = me + mi + ne + bound_rows.len();
        let mut a = Columns::new(m, nz);
        let mut b = vec![0.0; m];
        for j in 0..n {
            for i in 0..me {
                a.push(i, j, self.der.eq_jacobian[(i, j)]);
            }
            for i in 0..mi {
                a.push(me + i, j, self.der.ineq_jacobian[(i, j)]);
            }
        }
        for i in 0..me {
            if elastic {
                a.push(i, n + i, -1.0);
                a.push(i, n + me + i, 1.0);
            }
            b[i] = -self.ev.equalities[i];
        }
        for i in 0..mi {
            if elastic {
                a.push(me + i, n + 2 * me + i, -1.0);
            }
            b[me + i] = -self.ev.inequalities[i];
        }
        let mut row = me + mi;
        for k in 0..ne {
            a.push(row, n + k, -1.0);
            row += 1;
        }
        for &(j, up, rhs) in &bound_rows {
            a.push(row, j, if up { 1.0 } else { -1.0 });
            b[row] = rhs;
            row += 1;
        }
        let cones = [SupportedConeT::ZeroConeT(me), SupportedConeT::NonnegativeConeT(m - me)];
        let settings = DefaultSettings {
            verbose: false,
            max_iter: 100,
            tol_gap_abs: 1e-10,
            tol_gap_rel: 1e-10,
            tol_feas: 1e-10,
            presolve_enable: false,
            ..DefaultSettings::default()
        };
        let pm = p.build();
        let am = a.build();
        let mut solver = DefaultSolver::new(&pm, &q, &am, &b, &cones, settings).ok()?;
        solver.solve();
        let sol = &solver.solution;
        if !matches!(sol.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
            return None;
        }
        let d = DVector::from_column_slice(&sol.x[..n]);
        let z_eq = DVector::from_column_slice(&sol.z[..me]);
        let z_ineq = DVector::from_column_slice(&sol.z[me..me + mi]);
        let mut z_bounds = DVector::zeros(n);
        for (k, &(j, up, _)) in bound_rows.iter().enumerate() {
            let z = sol.z[me + mi + ne + k];
            z_bounds[j] += if up { z } else { -z };
        }
        let ce = &self.ev.equalities + &self.der.eq_jacobian * &d;
        let ci = &self.ev.inequalities + &self.der.ineq_jacobian * &d;
        let linear_violation = ce.iter().map(|v| v.abs()).sum::<f64>() + ci.iter().map(|v| v.max(0.0)).sum::<f64>();
        Some(QpSolution {
            d,
            z_eq,
            z_ineq,
            z_bounds,
            linear_violation,
        })
    }
}

fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) || s.norm() < 1e-14 {
        return;
    }
    let sy = s.dot(y);
    let y = if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    } else {
        y.clone()
    };
    let sy = s.dot(&y);
    if !(sy > 1e-300) {
        return;
    }
    *b -= &bs * bs.transpose() / sbs;
    *b += &y * y.transpose() / sy;
    let bt = b.transpose();
    *b = (&*b + bt) * 0.5;
}

fn lagrangian_gradient(der: &Derivatives, z_eq: &DVector<f64>, z_ineq: &DVector<f64>) -> DVector<f64> {
    &der.gradient + der.eq_jacobian.tr_mul(z_eq) + der.ineq_jacobian.tr_mul(z_ineq)
}

/// Minimum-norm correction pulling the equality constraints back onto their
/// linearization at the trial point.
fn second_order_correction(der: &Derivatives, trial: &Evaluation) -> Option<DVector<f64>> {
    let a = &der.eq_jacobian;
    if a.nrows() == 0 {
        return None;
    }
    let mut aat = a * a.transpose();
    let reg = 1e-10 * (1.0 + aat.diagonal().amax());
    for i in 0..aat.nrows() {
        aat[(i, i)] += reg;
    }
    let chol = aat.cholesky()?;
    let w = chol.solve(&trial.equalities);
    Some(-a.tr_mul(&w))
}

pub fn solve<P: Nlp + ?Sized>(nlp: &P, x0: &DVector<f64>, options: &SqpOptions) -> SqpResult {
    let n = nlp.num_variables();
    let (lo, hi) = nlp.bounds();
    let limits = nlp.step_limits();
    let blocks = nlp.hessian_blocks();
    let mut x = x0.clone();
    clip(&mut x, &lo, &hi);
    let mut approx: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|r| DMatrix::identity(r.len(), r.len()) * options.initial_curvature)
        .collect();
    let mut rho = options.initial_penalty;
    let mut ev = nlp.evaluate(&x);
    let mut der = nlp.derivatives(&x);
    let mut z_eq = DVector::zeros(ev.equalities.len());
    let mut z_ineq = DVector::zeros(ev.inequalities.len());
    let mut stationarity = f64::INFINITY;
    let mut status = SqpStatus::MaxIterations;
    let mut iterations = 0;
    let mut history: VecDeque<Evaluation> = VecDeque::new();

    for it in 0..options.max_iterations {
        iterations = it;
        let mut hessian = nlp.exact_hessian(&x);
        for (r, bk) in blocks.iter().zip(&approx) {
            let mut view = hessian.view_mut((r.start, r.start), (r.len(), r.len()));
            view += bk;
        }
        let sub = Subproblem {
            hessian: &hessian,
            gradient: &der.gradient,
            ev: &ev,
            der: &der,
            lower: DVector::from_fn(n, |i, _| (lo[i] - x[i]).max(-limits[i])),
            upper: DVector::from_fn(n, |i, _| (hi[i] - x[i]).min(limits[i])),
        };
        let viol_l1 = l1_violation(&ev);
        let mut qp = match sub.solve(rho) {
            Some(s) => s,
            None => {
                status = SqpStatus::NumericalFailure;
                break;
            }
        };
        // raise the penalty while the linearization stays infeasible
        while qp.linear_violation > 1e-9 * (1.0 + viol_l1) && rho < options.max_penalty {
            rho = (rho * 10.0).min(options.max_penalty);
            match sub.solve(rho) {
                Some(s) => qp = s,
                None => break,
            }
            if qp.linear_violation <= 0.5 * viol_l1 {
                break;
            }
        }

        // KKT residual with the QP multipliers
        let grad_l = lagrangian_gradient(&der, &qp.z_eq, &qp.z_ineq) + &qp.z_bounds;
        let scale = 1.0f64.max(der.gradient.amax());
        stationarity = grad_l.amax() / scale;
        let feas = max_violation(&ev);
        if feas <= options.tol_feasibility && stationarity <= options.tol_optimality {
            z_eq = qp.z_eq;
            z_ineq = qp.z_ineq;
            status = SqpStatus::Converged;
            break;
        }
        let step_small = qp.d.amax() <= 1e-12 * (1.0 + x.amax());
        if step_small && feas > options.tol_feasibility && qp.linear_violation > 1e-9 && rho >= options.max_penalty {
            status = SqpStatus::Infeasible;
            break;
        }

        let zmax = qp.z_eq.amax().max(qp.z_ineq.amax());
        if rho < 2.0 * zmax {
            rho = (2.0 * zmax).min(options.max_penalty);
        }

        let gd = der.gradient.dot(&qp.d);
        let predicted = -gd + rho * (viol_l1 - qp.linear_violation);
        let phi0 = history.iter().map(|e| merit(e, rho)).fold(merit(&ev, rho), f64::max);
        let mut accepted: Option<(DVector<f64>, Evaluation)> = None;
        let mut trial_x = &x + &qp.d;
        clip(&mut trial_x, &lo, &hi);
        let trial = nlp.evaluate(&trial_x);
        if phi0 - merit(&trial, rho) >= 1e-4 * predicted.max(0.0) {
            accepted = Some((trial_x, trial));
        } else if let Some(corr) = second_order_correction(&der, &trial) {
            let mut soc_x = &x + &qp.d + corr;
            clip(&mut soc_x, &lo, &hi);
            let soc = nlp.evaluate(&soc_x);
            if phi0 - merit(&soc, rho) >= 1e-4 * predicted.max(0.0) {
                accepted = Some((soc_x, soc));
            }
        }
        if accepted.is_none() {
            let mut alpha = 0.5;
            while alpha > 1e-10 {
                let mut tx = &x + &qp.d * alpha;
                clip(&mut tx, &lo, &hi);
                let te = nlp.evaluate(&tx);
                if phi0 - merit(&te, rho) >= 1e-4 * alpha * predicted.max(0.0) {
                    accepted = Some((tx, te));
                    break;
                }
                alpha *= 0.5;
            }
        }
        let Some((new_x, new_ev)) = accepted else {
            // no descent: accept the tiny step anyway when already at the noise floor
            if feas <= options.tol_feasibility && stationarity <= 1e2 * options.tol_optimality {
                z_eq = qp.z_eq;
                z_ineq = qp.z_ineq;
                status = SqpStatus::Converged;
            } else {
                status = SqpStatus::NumericalFailure;
            }
            break;
        };

        let new_der = nlp.derivatives(&new_x);
        let s = &new_x - &x;
        let exact_old = nlp.exact_gradient(&x);
        let exact_new = nlp.exact_gradient(&new_x);
        let y = (lagrangian_gradient(&new_der, &qp.z_eq, &qp.z_ineq) - exact_new)
            - (lagrangian_gradient(&der, &qp.z_eq, &qp.z_ineq) - exact_old);
        for (r, bk) in blocks.iter().zip(approx.iter_mut()) {
            let sb = s.rows(r.start, r.len()).into_owned();
            let yb = y.rows(r.start, r.len()).into_owned();
            bfgs_update(bk, &sb, &yb);
        }
        history.push_back(std::mem::replace(&mut ev, new_ev));
        if history.len() > MERIT_MEMORY {
            history.pop_front();
        }
        x = new_x;
        der = new_der;
        z_eq = qp.z_eq;
        z_ineq = qp.z_ineq;
    }
    SqpResult {
        objective: ev.objective,
        max_violation: max_violation(&ev),
        x,
        status,
        iterations,
        stationarity,
        eq_multipliers: z_eq,
        ineq_multipliers: z_ineq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min (x0-1)² + (x1-2)²  s.t. x0² + x1² = 1, x0 ≤ 0.5 (Rosen-style toy).
    struct Circle;

    impl Nlp for Circle {
        fn num_variables(&self) -> usize {
            2
        }
        fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
            (DVector::from_element(2, -10.0), DVector::from_element(2, 10.0))
        }
        fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
            Evaluation {
                objective: (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
                equalities: DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 1.0]),
                inequalities: DVector::from_vec(vec![x[0] - 0.2]),
            }
        }
        fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
            Derivatives {
                gradient: DVector::from_vec(vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] - 2.0)]),
                eq_jacobian: DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
                ineq_jacobian: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            }
        }
        fn exact_hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(2, 2) * 2.0
        }
        fn exact_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            self.derivatives(x).gradient
        }
    }

    #[test]
    fn circle_projection() {
        let r = solve(&Circle, &DVector::from_vec(vec![0.0, 3.0]), &SqpOptions::default());
        assert_eq!(r.status, SqpStatus::Converged, "{r:?}");
        // unconstrained projection (1,2)/√5 has x0 ≈ 0.447 > 0.2, so x0 = 0.2
        assert!((r.x[0] - 0.2).abs() < 1e-8);
        assert!((r.x[1] - (1.0f64 - 0.04).sqrt()).abs() < 1e-8);
        assert!(r.max_violation < 1e-9);
    }

    struct Hs071;

    impl Nlp for Hs071 {
        fn num_variables(&self) -> usize {
            4
        }
        fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
            (DVector::from_element(4, 1.0), DVector::from_element(4, 5.0))
        }
        fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
            Evaluation {
                objective: x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2],
                equalities: DVector::from_vec(vec![x.norm_squared() - 40.0]),
                inequalities: DVector::from_vec(vec![25.0 - x[0] * x[1] * x[2] * x[3]]),
            }
        }
        fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
            let g = DVector::from_vec(vec![
                x[3] * (2.0 * x[0] + x[1] + x[2]),
                x[0] * x[3],
                x[0] * x[3] + 1.0,
                x[0] * (x[0] + x[1] + x[2]),
            ]);
            let p = x[0] * x[1] * x[2] * x[3];
            Derivatives {
                gradient: g,
                eq_jacobian: DMatrix::from_row_slice(1, 4, &[2.0 * x[0], 2.0 * x[1], 2.0 * x[2], 2.0 * x[3]]),
                ineq_jacobian: DMatrix::from_row_slice(1, 4, &[-p / x[0], -p / x[1], -p / x[2], -p / x[3]]),
            }
        }
    }

    #[test]
    fn hock_schittkowski_71() {
        let r = solve(&Hs071, &DVector::from_vec(vec![1.0, 5.0, 5.0, 1.0]), &SqpOptions::default());
        assert_eq!(r.status, SqpStatus::Converged, "{r:?}");
        let expected = [1.0, 4.742_999_64, 3.821_149_98, 1.379_408_29];
        for i in 0..4 {
            assert!((r.x[i] - expected[i]).abs() < 1e-6, "{}", r.x);
        }
        assert!((r.objective - 17.014_017_2).abs() < 1e-6);
    }

    /// x0 + x1 = 1 and x0 + x1 = 2 cannot both hold.
    struct Inconsistent;

    impl Nlp for Inconsistent {
        fn num_variables(&self) -> usize {
            2
        }
        fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
            (DVector::from_element(2, f64::NEG_INFINITY), DVector::from_element(2, f64::INFINITY))
        }
        fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
            Evaluation {
                objective: x.norm_squared(),
                equalities: DVector::from_vec(vec![x[0] + x[1] - 1.0, x[0] + x[1] - 2.0]),
                inequalities: DVector::zeros(0),
            }
        }
        fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
            Derivatives {
                gradient: x * 2.0,
                eq_jacobian: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
                ineq_jacobian: DMatrix::zeros(0, 2),
            }
        }
    }

    #[test]
    fn inconsistent_constraints_are_not_reported_converged() {
        let r = solve(&Inconsistent, &DVector::from_vec(vec![0.0, 0.0]), &SqpOptions::default());
        assert_ne!(r.status, SqpStatus::Converged);
        assert!(r.max_violation >= 0.5 - 1e-9);
    }
}
