//! Windowed, preconditioned Anderson iteration: preconditioned residuals,
//! sum-constrained least squares over the recent window, damped update, and
//! delayed preconditioner refresh. With window size 0 the scheme reduces
//! exactly to the underlying Picard / quasi-Newton / Newton iteration.

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{combine, constrained_ls_alpha, lu_factor, lu_solve};
use crate::matrix::{norm2, sub_vec, DenseMatrix};
use crate::precond::{build, due_for_update, FactoredPreconditioner, PreconditionerKind};
use crate::problem::NonlinearProblem;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Window size: number of previous steps kept beyond the current one.
    pub m: usize,
    /// Damping in (0, 1] applied to the residual-direction part of the update.
    pub beta: f64,
    pub tol: f64,
    pub n_max: usize,
    /// Rebuild the preconditioner every n_update iterations.
    pub n_update: usize,
    pub kind: PreconditionerKind,
    pub divergence_threshold: f64,
    /// Reapply the current preconditioner to all stored raw residuals instead
    /// of keeping the preconditioned residuals computed when each entered the
    /// window.
    pub recompute_history: bool,
    /// Clamp near-zero preconditioner diagonal entries instead of failing.
    pub diag_floor: bool,
}

impl SolverConfig {
    pub fn new(kind: PreconditionerKind, m: usize) -> Self {
        Self {
            m,
            beta: 1.0,
            tol: 1e-10,
            n_max: 100,
            n_update: 1,
            kind,
            divergence_threshold: 1e10,
            recompute_history: false,
            diag_floor: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "beta {} not in (0,1]",
                self.beta
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidSpec("tol must be positive".into()));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidSpec("n_max must be >= 1".into()));
        }
        if self.n_update < 1 {
            return Err(Error::InvalidSpec("n_update must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIterations,
    PreconditionerFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Diverged => "diverged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::PreconditionerFailure => "preconditioner_failure",
        }
    }
}

/// Ring buffers of the most recent iterates, preconditioned residuals, and
/// raw residuals, capped at window size + 1.
pub struct AAHistory {
    cap: usize,
    xs: VecDeque<Vec<f64>>,
    fs: VecDeque<Vec<f64>>,
    raw: VecDeque<Vec<f64>>,
}

impl AAHistory {
    pub fn new(m: usize) -> Self {
        Self {
            cap: m + 1,
            xs: VecDeque::new(),
            fs: VecDeque::new(),
            raw: VecDeque::new(),
        }
    }

    pub fn push(&mut self, x: Vec<f64>, cal_f: Vec<f64>, f: Vec<f64>) {
        if self.xs.len() == self.cap {
            self.xs.pop_front();
            self.fs.pop_front();
            self.raw.pop_front();
        }
        self.xs.push_back(x);
        self.fs.push_back(cal_f);
        self.raw.push_back(f);
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn iterates(&self) -> Vec<Vec<f64>> {
        self.xs.iter().cloned().collect()
    }

    pub fn preconditioned_residuals(&self) -> Vec<Vec<f64>> {
        self.fs.iter().cloned().collect()
    }

    fn reapply(&mut self, p: &FactoredPreconditioner) -> Result<()> {
        for (f, cal_f) in self.raw.iter().zip(self.fs.iter_mut()) {
            *cal_f = p.apply(f)?;
        }
        Ok(())
    }

    /// Build a history directly from matching iterate / preconditioned
    /// residual pairs (the raw residuals are reconstructed as -F assuming
    /// M = I). Intended for oracle-style tests.
    pub fn from_pairs(xs: Vec<Vec<f64>>, fs: Vec<Vec<f64>>) -> Self {
        assert_eq!(xs.len(), fs.len());
        assert!(!xs.is_empty());
        let raw = fs.iter().map(|f| f.iter().map(|v| -v).collect()).collect();
        Self {
            cap: xs.len(),
            xs: xs.into(),
            fs: fs.into(),
            raw,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Residual norms per iteration, starting with the initial residual.
    pub residual_norms: Vec<f64>,
    /// Number of accepted updates.
    pub iterations: usize,
    /// Number of Jacobian-based preconditioner builds.
    pub jacobian_builds: usize,
    pub wall_time: f64,
    /// Barycentric window weights per accepted update.
    pub alpha_log: Vec<Vec<f64>>,
    /// Norm of the minimized window combination per accepted update.
    pub combined_residual_norms: Vec<f64>,
    /// Error norms versus the known solution, when the problem has one.
    pub error_norms: Option<Vec<f64>>,
}

/// Weighted Anderson update sum_i alpha_i x_i + beta sum_i alpha_i F_i.
pub fn anderson_update(history: &AAHistory, alpha: &[f64], beta: f64) -> Result<Vec<f64>> {
    if alpha.len() != history.len() {
        return Err(Error::DimensionMismatch {
            expected: history.len(),
            got: alpha.len(),
        });
    }
    let sum: f64 = alpha.iter().sum();
    assert!(
        (sum - 1.0).abs() <= 1e-12,
        "alpha must sum to one (got {sum})"
    );
    let n = history.xs[0].len();
    let mut out = vec![0.0; n];
    for ((x, f), &a) in history.xs.iter().zip(history.fs.iter()).zip(alpha.iter()) {
        for i in 0..n {
            out[i] += a * (x[i] + beta * f[i]);
        }
    }
    Ok(out)
}

/// Closed-form cross-check of the Anderson step via the iterate/output
/// difference matrices and a normal-equations solve. Valid when the stored
/// window was computed with a fixed preconditioner.
pub fn ck_step_oracle(
    history: &AAHistory,
    p: &FactoredPreconditioner,
    f_k: &[f64],
    beta: f64,
) -> Result<Vec<f64>> {
    let len = history.len();
    assert!(len >= 1);
    let x_k = history.xs.back().unwrap();
    let w_k = p.apply(f_k)?;
    let n = x_k.len();
    if len == 1 {
        return Ok((0..n).map(|i| x_k[i] + beta * w_k[i]).collect());
    }
    let m = len - 1;
    let e_cols: Vec<Vec<f64>> = (0..m)
        .map(|j| sub_vec(&history.xs[j + 1], &history.xs[j]))
        .collect();
    let w_cols: Vec<Vec<f64>> = (0..m)
        .map(|j| sub_vec(&history.fs[j + 1], &history.fs[j]))
        .collect();
    let e = DenseMatrix::from_columns(&e_cols);
    let w = DenseMatrix::from_columns(&w_cols);
    let wt = w.transpose();
    let wtw = wt.matmul(&w);
    let lu = lu_factor(&wtw).map_err(|e| match e {
        Error::SingularMatrix => Error::RankDeficient,
        other => other,
    })?;
    // G = (W^T W)^{-1} W^T, assembled column by column
    let mut g = DenseMatrix::zeros(m, n);
    for j in 0..n {
        let col = lu_solve(&lu, &wt.column(j))?;
        for i in 0..m {
            g.set(i, j, col[i]);
        }
    }
    // C = (1/beta) [ beta I - (E + beta W) G ]; step is x_k + beta C w_k
    let ebw = e.add(&w.scale(beta));
    let c = DenseMatrix::identity(n)
        .scale(beta)
        .sub(&ebw.matmul(&g))
        .scale(1.0 / beta);
    let step = c.matvec(&w_k);
    Ok((0..n).map(|i| x_k[i] + beta * step[i]).collect())
}

/// Contraction and convergence-order probe for the unaccelerated
/// preconditioned iteration.
#[derive(Debug, Clone)]
pub struct TheoremProbe {
    /// Spectral-norm estimate of I - M^{-1} J(x) by power iteration.
    pub contraction_estimate: f64,
    /// Observed convergence orders of the window-0 iteration started at x,
    /// when the problem has a known solution.
    pub orders: Option<Vec<f64>>,
}

/// Estimate || I - M^{-1} J(x) ||_2 by power iteration (100 steps, tolerance
/// 1e-6 on the eigenvalue estimate) and, when a solution is known, run the
/// window-0 iteration from x to measure observed convergence orders.
pub fn probe_theorem(
    problem: &NonlinearProblem,
    x: &[f64],
    p: &FactoredPreconditioner,
) -> Result<TheoremProbe> {
    let n = problem.dim;
    let j = problem.jacobian(x)?;
    // B = I - M^{-1} J; M^{-1} v = -apply(v)
    let mut b = DenseMatrix::zeros(n, n);
    for c in 0..n {
        let col = p.apply(&j.column(c))?;
        for r in 0..n {
            let id = if r == c { 1.0 } else { 0.0 };
            b.set(r, c, id + col[r]);
        }
    }
    let bt = b.transpose();
    // power iteration on B^T B
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7183).sin()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|e| *e /= nv);
    let mut lambda = 0.0;
    for _ in 0..100 {
        let bv = b.matvec(&v);
        let mut w = bt.matvec(&bv);
        let new_lambda = crate::matrix::dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            lambda = 0.0;
            break;
        }
        w.iter_mut().for_each(|e| *e /= nw);
        v = w;
        if (new_lambda - lambda).abs() <= 1e-6 * new_lambda.abs().max(1.0) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    let contraction_estimate = lambda.max(0.0).sqrt();

    let orders = problem.known_solution.as_ref().map(|star| {
        let mut errs = Vec::new();
        let mut xk = x.to_vec();
        errs.push(norm2(&sub_vec(star, &xk)));
        for _ in 0..15 {
            let f = problem.residual(&xk);
            let cal_f = match p.apply(&f) {
                Ok(v) => v,
                Err(_) => break,
            };
            for i in 0..n {
                xk[i] += cal_f[i];
            }
            let e = norm2(&sub_vec(star, &xk));
            errs.push(e);
            if e <= 1e-15 || !e.is_finite() {
                break;
            }
        }
        observed_orders(&errs)
    });

    Ok(TheoremProbe {
        contraction_estimate,
        orders,
    })
}

/// Observed convergence orders p_k = log e_{k+1} / log e_k for consecutive
/// error norms below one.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .filter(|w| w[0] < 1.0 && w[0] > 0.0 && w[1] < 1.0 && w[1] > 0.0)
        .map(|w| w[1].ln() / w[0].ln())
        .collect()
}

/// Run the windowed preconditioned iteration until convergence, divergence,
/// iteration exhaustion, or preconditioner failure.
pub fn paa_solve(
    problem: &NonlinearProblem,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    if x0.len() != problem.dim {
        return Err(Error::DimensionMismatch {
            expected: problem.dim,
            got: x0.len(),
        });
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut history = AAHistory::new(config.m);
    let mut precond: Option<FactoredPreconditioner> = None;
    let mut jacobian_builds = 0usize;
    let mut residual_norms = Vec::new();
    let mut alpha_log = Vec::new();
    let mut combined_residual_norms = Vec::new();
    let mut error_norms = problem.known_solution.as_ref().map(|_| Vec::new());

    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0usize;

    for k in 0..=config.n_max {
        let f = problem.residual(&x);
        let fnorm = norm2(&f);
        residual_norms.push(fnorm);
        if let (Some(errs), Some(star)) = (error_norms.as_mut(), problem.known_solution.as_ref()) {
            errs.push(norm2(&sub_vec(star, &x)));
        }
        iterations = k;

        if !fnorm.is_finite() || fnorm > config.divergence_threshold {
            status = SolveStatus::Diverged;
            break;
        }
        if fnorm < config.tol {
            status = SolveStatus::Converged;
            break;
        }
        if k == config.n_max {
            status = SolveStatus::MaxIterations;
            break;
        }

        // delayed preconditioner refresh; constant operators are built once
        let needs_build = if config.kind.is_constant() {
            precond.is_none()
        } else {
            due_for_update(k, config.n_update)
        };
        if needs_build {
            match build(config.kind, problem, &x, k, config.diag_floor) {
                Ok(p) => {
                    if config.kind.is_jacobian_based() {
                        jacobian_builds += 1;
                    }
                    if config.recompute_history {
                        history.reapply(&p)?;
                    }
                    precond = Some(p);
                }
                Err(Error::SingularPreconditioner(_))
                | Err(Error::MissingLinearPart)
                | Err(Error::NonFiniteEvaluation) => {
                    status = SolveStatus::PreconditionerFailure;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let p = precond.as_ref().expect("preconditioner built at k = 0");

        let cal_f = match p.apply(&f) {
            Ok(v) => v,
            Err(Error::SingularPreconditioner(_)) => {
                status = SolveStatus::PreconditionerFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        if cal_f.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::Diverged;
            break;
        }
        history.push(x.clone(), cal_f, f);

        let fs = history.preconditioned_residuals();
        let alpha = constrained_ls_alpha(&fs)?;
        let wbar = combine(&fs, &alpha);
        combined_residual_norms.push(norm2(&wbar));
        x = anderson_update(&history, &alpha, config.beta)?;
        alpha_log.push(alpha);
    }

    Ok(SolveReport {
        status,
        x,
        residual_norms,
        iterations,
        jacobian_builds,
        wall_time: start.elapsed().as_secs_f64(),
        alpha_log,
        combined_residual_norms,
        error_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::{make_kelley, make_trig};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn picard_recovery_bitwise() {
        let p = make_trig(4);
        let x0 = vec![0.6, 0.7, 0.8, 0.9];
        let mut cfg = SolverConfig::new(PreconditionerKind::ConstantScalar(1.0), 0);
        cfg.n_max = 10;
        cfg.tol = 1e-300;
        cfg.divergence_threshold = f64::INFINITY;
        let report = paa_solve(&p, &x0, &cfg).unwrap();
        // hand-rolled Picard loop
        let mut x = x0.clone();
        let mut norms = vec![norm2(&p.residual(&x))];
        for _ in 0..10 {
            let f = p.residual(&x);
            for i in 0..4 {
                x[i] -= f[i];
            }
            norms.push(norm2(&p.residual(&x)));
        }
        assert_eq!(report.residual_norms, norms);
        assert_eq!(report.x, x);
    }

    #[test]
    fn newton_recovery_scalar_step() {
        // f(x) = x^2 - 4 as a 1D problem; Newton from 3 gives 13/6
        let p = NonlinearProblem::new("square", 1, Box::new(|x: &[f64]| vec![x[0] * x[0] - 4.0]))
            .with_jacobian(Box::new(|x: &[f64]| {
                DenseMatrix::from_rows(&[vec![2.0 * x[0]]])
            }))
            .with_known_solution(vec![2.0]);
        let mut cfg = SolverConfig::new(PreconditionerKind::FullJacobian, 0);
        cfg.n_max = 1;
        let report = paa_solve(&p, &[3.0], &cfg).unwrap();
        assert!((report.x[0] - 13.0 / 6.0).abs() <= 1e-15);
    }

    #[test]
    fn newton_recovery_full_solve() {
        let p = make_trig(5);
        let x0 = vec![FRAC_PI_4 + 0.02; 5];
        let mut cfg = SolverConfig::new(PreconditionerKind::FullJacobian, 0);
        cfg.n_max = 20;
        let report = paa_solve(&p, &x0, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!(report.iterations <= 6);
        assert_eq!(report.jacobian_builds, report.iterations);
    }

    #[test]
    fn window_law() {
        let p = make_trig(6);
        let mut cfg = SolverConfig::new(PreconditionerKind::DiagJacobian, 3);
        cfg.n_max = 12;
        cfg.tol = 1e-300;
        let x0 = vec![FRAC_PI_4 + 0.04; 6];
        let report = paa_solve(&p, &x0, &cfg).unwrap();
        for (k, alpha) in report.alpha_log.iter().enumerate() {
            assert_eq!(alpha.len(), k.min(3) + 1, "window at iteration {k}");
        }
    }

    #[test]
    fn reduction_feasibility() {
        let p = make_trig(8);
        let mut cfg = SolverConfig::new(PreconditionerKind::DiagJacobian, 3);
        cfg.n_max = 30;
        let x0 = vec![FRAC_PI_4 + 0.04; 8];
        let report = paa_solve(&p, &x0, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(report.combined_residual_norms.len(), report.iterations);
    }

    #[test]
    fn determinism_bitwise() {
        let p = make_kelley(1e-6);
        let mut cfg = SolverConfig::new(PreconditionerKind::FullJacobian, 1);
        cfg.n_max = 50;
        let a = paa_solve(&p, &[0.0, 4.0], &cfg).unwrap();
        let b = paa_solve(&p, &[0.0, 4.0], &cfg).unwrap();
        assert_eq!(a.residual_norms, b.residual_norms);
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn preconditioner_failure_reported() {
        // Jacobian singular everywhere: f(x) = (x1+x2, x1+x2)
        let p = NonlinearProblem::new(
            "rank1",
            2,
            Box::new(|x: &[f64]| vec![x[0] + x[1], x[0] + x[1]]),
        )
        .with_jacobian(Box::new(|_: &[f64]| {
            DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]])
        }));
        let cfg = SolverConfig::new(PreconditionerKind::FullJacobian, 0);
        let report = paa_solve(&p, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::PreconditionerFailure);
    }

    #[test]
    fn anderson_update_examples() {
        let h = AAHistory::from_pairs(vec![vec![0.0]], vec![vec![1.0]]);
        assert_eq!(anderson_update(&h, &[1.0], 1.0).unwrap(), vec![1.0]);

        let h = AAHistory::from_pairs(vec![vec![0.0], vec![2.0]], vec![vec![1.0], vec![1.0]]);
        assert_eq!(anderson_update(&h, &[0.5, 0.5], 1.0).unwrap(), vec![2.0]);
        assert_eq!(anderson_update(&h, &[0.5, 0.5], 0.5).unwrap(), vec![1.5]);
        assert!(matches!(
            anderson_update(&h, &[1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ck_oracle_single_column() {
        let p = make_trig(3);
        let x = vec![0.5, 0.6, 0.7];
        let f = p.residual(&x);
        let m = build(PreconditionerKind::ConstantScalar(1.0), &p, &x, 0, false).unwrap();
        let cal_f = m.apply(&f).unwrap();
        let h = AAHistory::from_pairs(vec![x.clone()], vec![cal_f.clone()]);
        let out = ck_step_oracle(&h, &m, &f, 1.0).unwrap();
        for i in 0..3 {
            assert!((out[i] - (x[i] + cal_f[i])).abs() <= 1e-15);
        }
    }

    #[test]
    fn ck_oracle_matches_anderson_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = make_trig(5);
        let id = build(
            PreconditionerKind::ConstantScalar(1.0),
            &p,
            &[0.0; 5],
            0,
            false,
        )
        .unwrap();
        for _ in 0..30 {
            let len = rng.gen_range(2..=4); // m in 1..=3
            let xs: Vec<Vec<f64>> = (0..len)
                .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let fs: Vec<Vec<f64>> = (0..len)
                .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let h = AAHistory::from_pairs(xs, fs.clone());
            // raw residual consistent with M = I: f_k = -F_k
            let f_k: Vec<f64> = fs.last().unwrap().iter().map(|v| -v).collect();
            for beta in [1.0, 0.5] {
                let alpha = constrained_ls_alpha(&fs).unwrap();
                let direct = anderson_update(&h, &alpha, beta).unwrap();
                let oracle = match ck_step_oracle(&h, &id, &f_k, beta) {
                    Ok(v) => v,
                    Err(Error::RankDeficient) => continue,
                    Err(e) => panic!("{e}"),
                };
                for i in 0..5 {
                    assert!(
                        (direct[i] - oracle[i]).abs() <= 1e-9,
                        "component {i}: {} vs {}",
                        direct[i],
                        oracle[i]
                    );
                }
            }
        }
    }

    #[test]
    fn probe_exact_jacobian_cancels() {
        let p = make_trig(4);
        let x = vec![0.7; 4];
        let m = build(PreconditionerKind::FullJacobian, &p, &x, 0, false).unwrap();
        let probe = probe_theorem(&p, &x, &m).unwrap();
        assert!(
            probe.contraction_estimate <= 1e-6,
            "{}",
            probe.contraction_estimate
        );
    }

    #[test]
    fn probe_large_scalar_approaches_one() {
        let p = make_trig(4);
        let x = vec![0.7; 4];
        let m = build(PreconditionerKind::ConstantScalar(1e8), &p, &x, 0, false).unwrap();
        let probe = probe_theorem(&p, &x, &m).unwrap();
        assert!(probe.contraction_estimate < 1.0);
        assert!(probe.contraction_estimate > 1.0 - 1e-4);
    }

    #[test]
    fn observed_orders_quadratic_sequence() {
        let errs = [1e-1, 1e-2, 1e-4, 1e-8];
        let orders = observed_orders(&errs);
        assert!(orders.iter().all(|&p| p > 1.8 && p < 2.2), "{orders:?}");
    }

    #[test]
    fn residual_norm_bookkeeping() {
        let p = make_trig(5);
        let x0 = vec![FRAC_PI_4; 5];
        let cfg = SolverConfig::new(PreconditionerKind::ConstantScalar(1.0), 2);
        let report = paa_solve(&p, &x0, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.residual_norms.len(), 1);
        assert!(report.residual_norms[0] < cfg.tol);
    }
}
