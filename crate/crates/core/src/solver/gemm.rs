use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    inner, penalty, residual_from_gradient, Extrapolation, IterationRecord,
    Solution, SolveMode, SolveTrace, SolverConfig,
};
use crate::alphabet::{project_alphabet, project_hull};
use crate::error::{PrecodingError, Result};
use crate::objective::{
    evaluate, evaluate_received, rho_bound, smoothed_from_received, smoothed_value, PrecoderVars, ProblemInstance,
};

/// Backtracking gives up after this many growth steps.
const MAX_BACKTRACKS: usize = 60;

/// Iterate pair and step-size memory carried between GEMM iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct GemmState {
    pub x: PrecoderVars,
    pub prev: PrecoderVars,
    /// `ξ_{k−1}` of the momentum recurrence; starts at 0.
    pub xi: f64,
    /// Last accepted `β`.
    pub beta: f64,
    pub k: usize,
    /// Received samples of `x` and `prev`, filled on first use.
    received: Option<(DMatrix<Complex64>, DMatrix<Complex64>)>,
}

impl GemmState {
    /// Start with `x^{−1} = x⁰` and `ξ_{−1} = 0`.
    pub fn new(init: PrecoderVars, cfg: &SolverConfig) -> Self {
        Self { prev: init.clone(), x: init, xi: 0.0, beta: cfg.beta0, k: 0, received: None }
    }
}

/// What one step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub alpha: f64,
    pub beta: f64,
    /// `‖x^{k+1} − x^k‖²`.
    pub step_sq: f64,
    /// `f(x^{k+1})`.
    pub objective: f64,
    pub line_search_evals: usize,
}

/// Advances the momentum recurrence; returns `(α_k, ξ_k)`.
pub(crate) fn next_alpha(xi_prev: f64, rule: Extrapolation) -> (f64, f64) {
    let xi = (1.0 + (1.0 + 4.0 * xi_prev * xi_prev).sqrt()) / 2.0;
    let alpha = ((xi_prev - 1.0) / xi).max(0.0);
    match rule {
        Extrapolation::Fista => (alpha, xi),
        Extrapolation::Capped(cap) => (alpha.min(cap), xi),
    }
}

struct ProjectedStep {
    next: PrecoderVars,
    received: DMatrix<Complex64>,
    objective: f64,
    beta: f64,
    evals: usize,
}

/// `Π_X(z − ∇G_λ(z|anchor)/β)` with `β` grown from `beta_start` until
///
/// ```text
/// G(x⁺|x̄) ≤ G(z|x̄) + ⟨∇G(z|x̄), x⁺ − z⟩ + β/2·‖x⁺ − z‖².
/// ```
///
/// The linear penalty terms of `G` cancel on both sides, so the test is run
/// on `f` alone.
#[allow(clippy::too_many_arguments)]
fn projected_step(
    inst: &ProblemInstance,
    z: &PrecoderVars,
    r_z: &DMatrix<Complex64>,
    anchor: &DMatrix<Complex64>,
    lambda: f64,
    beta_start: f64,
    cfg: &SolverConfig,
    rho: &nalgebra::DVector<f64>,
    iteration: usize,
) -> Result<ProjectedStep> {
    let at_z = evaluate_received(inst, r_z, &z.d);
    let grad_u = &at_z.grad_u - anchor * Complex64::new(2.0 * lambda, 0.0);
    let grad_d = &at_z.grad_d;
    let slack = 1e-12 * at_z.value.abs().max(1.0);

    let mut beta = beta_start;
    for evals in 1..=MAX_BACKTRACKS + 1 {
        let inv = 1.0 / beta;
        let u = DMatrix::from_fn(z.u.nrows(), z.u.ncols(), |i, j| {
            project_hull(z.u[(i, j)] - grad_u[(i, j)] * inv, cfg.alphabet)
        });
        let d = nalgebra::DVector::from_fn(z.d.len(), |i, _| (z.d[i] - grad_d[i] * inv).clamp(0.0, rho[i]));
        let cand = PrecoderVars::new(u, d);
        let r_cand = inst.received(&cand.u);
        let f_cand = smoothed_from_received(inst, &r_cand, &cand.d);
        let diff = PrecoderVars::new(&cand.u - &z.u, &cand.d - &z.d);
        let model = at_z.value
            + inner(&at_z.grad_u, &at_z.grad_d, &diff)
            + 0.5 * beta * diff.norm_sq();
        if f_cand.is_finite() && f_cand <= model + slack {
            return Ok(ProjectedStep { next: cand, received: r_cand, objective: f_cand, beta, evals });
        }
        beta *= cfg.beta_grow;
    }
    Err(PrecodingError::NonFiniteObjective { iteration })
}

/// One GEMM iteration at penalty `λ`: extrapolate, backtrack, project.
pub fn gemm_step(
    state: &GemmState,
    inst: &ProblemInstance,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<(GemmState, StepInfo)> {
    let rho = rho_bound(inst);
    step_with_rho(state, inst, lambda, cfg, &rho)
}

fn step_with_rho(
    state: &GemmState,
    inst: &ProblemInstance,
    lambda: f64,
    cfg: &SolverConfig,
    rho: &nalgebra::DVector<f64>,
) -> Result<(GemmState, StepInfo)> {
    let (alpha, xi) = next_alpha(state.xi, cfg.extrapolation);
    let z = state.x.extrapolate(&state.prev, alpha);
    let (r_x, r_prev) = match &state.received {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (inst.received(&state.x.u), inst.received(&state.prev.u)),
    };
    // the received signal is linear in U
    let r_z = extrapolate_received(&r_x, &r_prev, alpha);
    let step = projected_step(
        inst,
        &z,
        &r_z,
        &state.x.u,
        lambda,
        state.beta * cfg.beta_shrink,
        cfg,
        rho,
        state.k,
    )?;
    let step_sq = step.next.dist_sq(&state.x);
    let info = StepInfo {
        alpha,
        beta: step.beta,
        step_sq,
        objective: step.objective,
        line_search_evals: step.evals,
    };
    let next = GemmState {
        prev: state.x.clone(),
        x: step.next,
        xi,
        beta: step.beta,
        k: state.k + 1,
        received: Some((step.received, r_x)),
    };
    Ok((next, info))
}

fn extrapolate_received(r_x: &DMatrix<Complex64>, r_prev: &DMatrix<Complex64>, alpha: f64) -> DMatrix<Complex64> {
    if alpha == 0.0 {
        r_x.clone()
    } else {
        r_x + (r_x - r_prev) * Complex64::new(alpha, 0.0)
    }
}

fn prepare(inst: &ProblemInstance, cfg: &SolverConfig, init: &PrecoderVars) -> Result<ProblemInstance> {
    cfg.validate()?;
    let inst = if inst.sigma() == cfg.sigma { inst.clone() } else { inst.clone().with_sigma(cfg.sigma)? };
    let (n, t, k) = (inst.antennas(), inst.block_len(), inst.users());
    if init.u.shape() != (n, t) || init.d.len() != 2 * k {
        return Err(PrecodingError::ShapeMismatch(format!(
            "initial point has U {:?} and {} spacings; expected ({n}, {t}) and {}",
            init.u.shape(),
            init.d.len(),
            2 * k
        )));
    }
    let rho = rho_bound(&inst);
    let off_hull = init.u.iter().any(|&z| (project_hull(z, cfg.alphabet) - z).norm() > 1e-9);
    let off_box = init.d.iter().zip(rho.iter()).any(|(&d, &r)| d < 0.0 || d > r + 1e-12);
    if off_hull || off_box {
        return Err(PrecodingError::InvalidArgument(
            "initial point lies outside conv(U) x [0, rho]".into(),
        ));
    }
    Ok(inst)
}

fn finish(inst: &ProblemInstance, cfg: &SolverConfig, x: PrecoderVars, mut trace: SolveTrace, start: Instant) -> Solution {
    let u_discrete = x.u.map(|z| project_alphabet(z, cfg.alphabet));
    let vars = PrecoderVars::new(u_discrete, x.d);
    let margins = crate::objective::margin_terms(inst, &vars).expect("shapes checked in prepare");
    let objective = smoothed_value(inst, &vars.u, &vars.d);
    trace.iterations = trace.records.len();
    trace.wall_seconds = start.elapsed().as_secs_f64();
    Solution {
        u_discrete: vars.u,
        u_relaxed: x.u,
        d: vars.d,
        margin: margins.min_margin(),
        objective,
        trace,
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    rho: &nalgebra::DVector<f64>,
    x: &PrecoderVars,
    lambda: f64,
    objective: f64,
    step_sq: f64,
    beta: f64,
    alpha: f64,
) -> IterationRecord {
    let stationarity = cfg.record_stationarity.then(|| {
        let e = evaluate(inst, &x.u, &x.d);
        let gu = e.grad_u - &x.u * Complex64::new(2.0 * lambda, 0.0);
        residual_from_gradient(x, &gu, &e.grad_d, cfg.alphabet, rho)
    });
    IterationRecord {
        lambda,
        penalized: objective - lambda * penalty(&x.u),
        objective,
        step_norm: step_sq.sqrt(),
        beta,
        alpha,
        stationarity,
    }
}

/// Runs the penalty continuation from `init` and rounds onto the alphabet.
///
/// Dispatches on [`SolverConfig::mode`]; [`exact_mm_solve`] is the same with
/// the mode forced to exact MM.
pub fn solve(inst: &ProblemInstance, cfg: &SolverConfig, init: &PrecoderVars) -> Result<Solution> {
    if let SolveMode::ExactMm { .. } = cfg.mode {
        return exact_mm_solve(inst, cfg, init);
    }
    let start = Instant::now();
    let inst = prepare(inst, cfg, init)?;
    let rho = rho_bound(&inst);
    let mut trace = SolveTrace::default();
    let mut state = GemmState::new(init.clone(), cfg);
    let mut lambda = cfg.lambda0;
    let mut stage_iters = 0;
    while lambda <= cfg.lambda_upp {
        let (next, info) = step_with_rho(&state, &inst, lambda, cfg, &rho)?;
        trace.line_search_evals += info.line_search_evals;
        trace.records.push(record(
            &inst, cfg, &rho, &next.x, lambda, info.objective, info.step_sq, info.beta, info.alpha,
        ));
        state = next;
        stage_iters += 1;
        if stage_iters >= cfg.inner_cap || info.step_sq <= cfg.move_tol {
            lambda *= cfg.lambda_mult;
            stage_iters = 0;
        }
    }
    Ok(finish(&inst, cfg, state.x, trace, start))
}

/// Majorization-minimization with each majorant minimized by an inner
/// accelerated projected-gradient loop.
///
/// The inner loop runs until the gradient-mapping norm `β‖x⁺ − z‖` drops to
/// `inner_tol` or `inner_max` iterations pass, and returns its lowest-majorant
/// iterate, so `F_λ` never increases within a penalty stage.
pub fn exact_mm_solve(inst: &ProblemInstance, cfg: &SolverConfig, init: &PrecoderVars) -> Result<Solution> {
    let (inner_tol, inner_max) = match cfg.mode {
        SolveMode::ExactMm { inner_tol, inner_max } => (inner_tol, inner_max),
        SolveMode::Gemm => {
            return Err(PrecodingError::InvalidArgument(
                "exact_mm_solve requires SolveMode::ExactMm".into(),
            ))
        }
    };
    let start = Instant::now();
    let inst = prepare(inst, cfg, init)?;
    let rho = rho_bound(&inst);
    let mut trace = SolveTrace::default();
    let mut x = init.clone();
    let mut f_x = smoothed_value(&inst, &x.u, &x.d);
    let mut beta = cfg.beta0;
    let mut lambda = cfg.lambda0;
    let mut stage_iters = 0;
    let mut outer = 0;
    while lambda <= cfg.lambda_upp {
        let anchor = x.u.clone();
        let anchor_pen = penalty(&anchor);
        let majorant = |y: &PrecoderVars, f_y: f64| {
            let lin: f64 = anchor
                .iter()
                .zip(y.u.iter())
                .map(|(a, u)| a.re * (u.re - a.re) + a.im * (u.im - a.im))
                .sum();
            f_y - 2.0 * lambda * lin - lambda * anchor_pen
        };
        let mut best = (x.clone(), f_x, f_x - lambda * anchor_pen);
        let mut y = x.clone();
        let mut y_prev = x.clone();
        let mut r_y = inst.received(&y.u);
        let mut r_prev = r_y.clone();
        let mut xi = 0.0;
        let mut last_alpha = 0.0;
        for _ in 0..inner_max {
            let (alpha, next_xi) = next_alpha(xi, cfg.extrapolation);
            xi = next_xi;
            last_alpha = alpha;
            let z = y.extrapolate(&y_prev, alpha);
            let r_z = extrapolate_received(&r_y, &r_prev, alpha);
            let step = projected_step(&inst, &z, &r_z, &anchor, lambda, beta * cfg.beta_shrink, cfg, &rho, outer)?;
            trace.line_search_evals += step.evals;
            beta = step.beta;
            let g = majorant(&step.next, step.objective);
            let mapping = beta * step.next.dist_sq(&z).sqrt();
            if g < best.2 {
                best = (step.next.clone(), step.objective, g);
            }
            y_prev = std::mem::replace(&mut y, step.next);
            r_prev = std::mem::replace(&mut r_y, step.received);
            if mapping <= inner_tol {
                break;
            }
        }
        let (x_new, f_new, _) = best;
        let step_sq = x_new.dist_sq(&x);
        trace
            .records
            .push(record(&inst, cfg, &rho, &x_new, lambda, f_new, step_sq, beta, last_alpha));
        x = x_new;
        f_x = f_new;
        outer += 1;
        stage_iters += 1;
        if stage_iters >= cfg.inner_cap || step_sq <= cfg.move_tol {
            lambda *= cfg.lambda_mult;
            stage_iters = 0;
        }
    }
    Ok(finish(&inst, cfg, x, trace, start))
}
