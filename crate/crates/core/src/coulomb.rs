//! Successive approximation of the non-local Coulomb friction threshold.
//!
//! The threshold is
//! `ell(x', t) = F0(x', t) + Fsigma(x', t) int_0^t S(t - s) |R(sigma_row)(x', s)| ds`,
//! fed back from the wall stress history of the previous solve. The driver
//! marches a window schedule over `[0, T]`: inside each window `[tau, tau']`
//! the threshold is iterated (one full Tresca solve per iterate) until the
//! increments contract below tolerance; the converged prefix is then frozen
//! and the next window starts. Window lengths follow the fallback formulas
//! derived from the contraction estimate, and halve adaptively when the
//! iteration fails to contract (the contraction constant of the data is not
//! computable a priori).

use std::sync::Arc;

use crate::error::Error;
use crate::friction::ThresholdField;
use crate::spaces::BoundaryQuad;
use crate::stress::{compute_trace_history, default_rho, BoundaryTraceHistory, Mollifier};
use crate::timestepping::{run_tresca, Discretization, RunConfig, Scenario, Trajectory};

/// Scalar data field on the wall: `(x', t) -> value >= 0`.
#[derive(Clone)]
pub struct BoundaryFn {
    f: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>,
    zero: bool,
}

impl std::fmt::Debug for BoundaryFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.zero { "BoundaryFn(zero)" } else { "BoundaryFn(..)" })
    }
}

impl BoundaryFn {
    pub fn constant(v: f64) -> Self {
        BoundaryFn { f: Arc::new(move |_, _| v), zero: v == 0.0 }
    }

    pub fn new(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryFn { f: Arc::new(f), zero: false }
    }

    pub fn eval(&self, x_prime: &[f64], t: f64) -> f64 {
        (self.f)(x_prime, t)
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

/// History kernel `S` with its derivative and a declared bound `C_S` for
/// both `|S|` and `|S'|`.
#[derive(Clone)]
pub struct Kernel {
    s: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ds: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub bound: f64,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Kernel(bound = {})", self.bound)
    }
}

impl Kernel {
    pub fn constant(v: f64) -> Self {
        Kernel { s: Arc::new(move |_| v), ds: Arc::new(|_| 0.0), bound: v.abs() }
    }

    /// `S(t) = scale exp(-rate t)`.
    pub fn exp_decay(scale: f64, rate: f64) -> Self {
        Kernel {
            s: Arc::new(move |t| scale * (-rate * t).exp()),
            ds: Arc::new(move |t| -rate * scale * (-rate * t).exp()),
            bound: scale.abs() * rate.abs().max(1.0),
        }
    }

    pub fn new(
        s: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ds: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bound: f64,
    ) -> Self {
        Kernel { s: Arc::new(s), ds: Arc::new(ds), bound }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.s)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (self.ds)(t)
    }
}

/// The generalized Coulomb threshold data.
#[derive(Debug, Clone)]
pub struct CoulombSpec {
    /// Base threshold `F0(x', t) >= 0` (stress units).
    pub f0: BoundaryFn,
    /// Friction-coefficient field `Fsigma(x', t) >= 0` (dimensionless).
    pub fsigma: BoundaryFn,
    /// History kernel `S >= 0`.
    pub kernel: Kernel,
    /// Sobolev exponent of `Fsigma` in time; must exceed 2.
    pub p_exponent: f64,
}

impl CoulombSpec {
    pub fn validate(&self, quad: &BoundaryQuad, time_grid: &[f64]) -> Result<(), Error> {
        if !(self.p_exponent > 2.0) {
            return Err(Error::Data(format!("p must exceed 2, got {}", self.p_exponent)));
        }
        for &t in time_grid {
            if self.kernel.eval(t) < 0.0 {
                return Err(Error::Data(format!("kernel S must be nonnegative, S({t}) < 0")));
            }
            if self.kernel.eval(t).abs() > self.kernel.bound + 1e-12
                || self.kernel.deriv(t).abs() > self.kernel.bound + 1e-12
            {
                return Err(Error::Data(format!("kernel exceeds its declared bound C_S = {} at t = {t}", self.kernel.bound)));
            }
            for q in 0..quad.n_qp {
                let xp = &quad.x_prime[q * quad.t_dim..(q + 1) * quad.t_dim];
                if self.f0.eval(xp, t) < 0.0 {
                    return Err(Error::Data(format!("F0 must be nonnegative (violated at x' = {xp:?}, t = {t})")));
                }
                if self.fsigma.eval(xp, t) < 0.0 {
                    return Err(Error::Data(format!("Fsigma must be nonnegative (violated at x' = {xp:?}, t = {t})")));
                }
            }
        }
        Ok(())
    }
}

/// The partition of `[0, T]` produced by a run, with the contraction-constant
/// estimate it was built from.
#[derive(Debug, Clone)]
pub struct WindowSchedule {
    pub tau_points: Vec<f64>,
    pub c_prime_data: f64,
}

impl WindowSchedule {
    /// The admissibility inequality every window must satisfy.
    pub fn admissible(dtau: f64, c_prime: f64, p: f64) -> bool {
        dtau.sqrt() + dtau.powf((p - 2.0) / (2.0 * p)) <= 0.5 / c_prime + 1e-12
    }
}

/// Window length from the fallback formulas:
/// `1/(4 C')^2` when `1/(4 C') >= 1`, otherwise `1/(4 C')^{2p/(p-2)}`.
pub fn window_length(c_prime_data: f64, p_exponent: f64) -> f64 {
    let q = 1.0 / (4.0 * c_prime_data);
    if q >= 1.0 {
        q * q
    } else {
        q.powf(2.0 * p_exponent / (p_exponent - 2.0))
    }
}

/// Per-window record of the inner iteration.
#[derive(Debug, Clone)]
pub struct WindowTrace {
    pub window: usize,
    pub tau: f64,
    pub tau_prime: f64,
    /// `||ell_{k+1} - ell_k||` in the W^{1,2}(0, tau'; L2(Gamma0)) surrogate.
    pub increments: Vec<f64>,
    /// Raw quotients of consecutive increments, no smoothing.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

/// Full diagnostics of a Coulomb solve.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub windows: Vec<WindowTrace>,
    /// Threshold snapshots (window, iteration, field) when requested.
    pub snapshots: Vec<(usize, usize, ThresholdField)>,
}

impl IterationTrace {
    /// CSV rows `window, iteration, increment_norm, ratio` (first iteration
    /// of a window has no ratio).
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "window,iteration,increment_norm,ratio")?;
        for win in &self.windows {
            for (k, inc) in win.increments.iter().enumerate() {
                let ratio = if k == 0 { String::new() } else { crate::fmt_f64(win.ratios[k - 1]) };
                writeln!(w, "{},{},{},{}", win.window, k + 1, crate::fmt_f64(*inc), ratio)?;
            }
        }
        Ok(())
    }
}

/// Solver controls for the Coulomb driver.
#[derive(Debug, Clone)]
pub struct CoulombConfig {
    /// Estimate of the contraction constant `C'_data`; windows halve from
    /// the fallback length when the iteration fails to contract.
    pub c_prime_data: f64,
    /// Relative tolerance on the threshold increments.
    pub tol_ell: f64,
    pub max_inner: usize,
    pub max_halvings: usize,
    /// Force a fixed window length (diagnostics: prefix-stability checks).
    pub force_window_length: Option<f64>,
    /// Per-cell quadrature order of the trace evaluations.
    pub trace_order: usize,
    /// Keep a threshold snapshot per inner iteration.
    pub keep_snapshots: bool,
    pub run: RunConfig,
}

impl Default for CoulombConfig {
    fn default() -> Self {
        CoulombConfig {
            c_prime_data: 0.125,
            tol_ell: 1e-8,
            max_inner: 50,
            max_halvings: 6,
            force_window_length: None,
            trace_order: 6,
            keep_snapshots: false,
            run: RunConfig { quiet: true, ..Default::default() },
        }
    }
}

/// Converged state of the windows completed so far; the unit a checkpoint
/// stores and a resumed run restarts from.
#[derive(Debug, Clone, PartialEq)]
pub struct CoulombProgress {
    /// Index of `tau` in the time grid (number of completed steps).
    pub n_tau: usize,
    /// Converged threshold rows on `0..=n_tau`.
    pub ell_prefix: Vec<Vec<f64>>,
    /// Converged `|R|` history rows on `0..=n_tau`.
    pub history_prefix: Vec<Vec<f64>>,
}

impl CoulombProgress {
    pub fn fresh() -> Self {
        CoulombProgress { n_tau: 0, ell_prefix: Vec::new(), history_prefix: Vec::new() }
    }

    pub fn is_fresh(&self) -> bool {
        self.n_tau == 0 && self.ell_prefix.is_empty()
    }
}

/// Result of a completed Coulomb solve.
#[derive(Debug, Clone)]
pub struct CoulombResult {
    pub trajectory: Trajectory,
    pub threshold: ThresholdField,
    pub history: BoundaryTraceHistory,
    pub trace: IterationTrace,
    /// Self-consistency residual `||ell - F(ell)||` and its acceptance bound
    /// `2 tol (1 + ||ell||)`.
    pub self_consistency: (f64, f64),
}

/// Composite-trapezoid threshold update
/// `ell(x', t_n) = F0(x', t_n) + Fsigma(x', t_n) sum_j w_j S(t_n - t_j) |R|_j`.
///
/// The history must cover every grid node up to each evaluation time.
pub fn update_threshold(
    history: &BoundaryTraceHistory,
    spec: &CoulombSpec,
    time_grid: &[f64],
    quad: &BoundaryQuad,
) -> Result<ThresholdField, Error> {
    if history.times.len() < time_grid.len() {
        return Err(Error::Usage(format!(
            "history covers {} steps, threshold update needs {} (missing slot at step {})",
            history.times.len(),
            time_grid.len(),
            history.times.len()
        )));
    }
    let n_qp = quad.n_qp;
    let mut values = Vec::with_capacity(time_grid.len());
    for (n, &t) in time_grid.iter().enumerate() {
        let mut row = Vec::with_capacity(n_qp);
        for q in 0..n_qp {
            let xp = &quad.x_prime[q * quad.t_dim..(q + 1) * quad.t_dim];
            let mut conv = 0.0;
            if n > 0 && !spec.fsigma.is_zero() {
                for j in 0..=n {
                    let w = trapezoid_weight(time_grid, n, j);
                    conv += w * spec.kernel.eval(t - time_grid[j]) * history.values[j][q];
                }
            }
            let ell = spec.f0.eval(xp, t) + spec.fsigma.eval(xp, t) * conv;
            row.push(ell.max(0.0));
        }
        values.push(row);
    }
    ThresholdField::new(time_grid.to_vec(), values)
}

/// Trapezoid weight of grid node `i` for integrals over the whole grid.
pub(crate) fn time_weight(grid: &[f64], i: usize) -> f64 {
    if grid.len() < 2 {
        return 0.0;
    }
    trapezoid_weight(grid, grid.len() - 1, i)
}

fn trapezoid_weight(grid: &[f64], n: usize, j: usize) -> f64 {
    debug_assert!(j <= n && n < grid.len());
    if n == 0 {
        return 0.0;
    }
    if j == 0 {
        0.5 * (grid[1] - grid[0])
    } else if j == n {
        0.5 * (grid[n] - grid[n - 1])
    } else {
        0.5 * (grid[j + 1] - grid[j - 1])
    }
}

/// Discrete `W^{1,2}(0, tau'; L2(Gamma0))` surrogate norm of a threshold-type
/// field: quadrature-weighted values plus finite-difference time derivative.
pub fn threshold_norm(values: &[Vec<f64>], time_grid: &[f64], quad: &BoundaryQuad) -> f64 {
    let n = values.len();
    let mut total = 0.0;
    for (i, row) in values.iter().enumerate() {
        let tw = if n == 1 { 1.0 } else { trapezoid_weight(time_grid, n - 1, i) };
        let sq: f64 = row.iter().enumerate().map(|(q, v)| quad.weights[q] * v * v).sum();
        total += tw * sq;
    }
    for i in 1..n {
        let dt = time_grid[i] - time_grid[i - 1];
        let sq: f64 = (0..values[i].len())
            .map(|q| {
                let d = (values[i][q] - values[i - 1][q]) / dt;
                quad.weights[q] * d * d
            })
            .sum();
        total += dt * sq;
    }
    total.max(0.0).sqrt()
}

fn diff_norm(a: &[Vec<f64>], b: &[Vec<f64>], time_grid: &[f64], quad: &BoundaryQuad) -> f64 {
    let diff: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect();
    threshold_norm(&diff, time_grid, quad)
}

/// Frozen-integral value `Q(tau)(q) = int_0^tau S(tau - s) |R(q, s)| ds` from
/// a converged history prefix.
fn frozen_integral(history: &[Vec<f64>], time_grid: &[f64], spec: &CoulombSpec, n_tau: usize, n_qp: usize) -> Vec<f64> {
    let mut q_tau = vec![0.0; n_qp];
    if n_tau == 0 {
        return q_tau;
    }
    let tau = time_grid[n_tau];
    for q in 0..n_qp {
        let mut acc = 0.0;
        for j in 0..=n_tau {
            acc += trapezoid_weight(time_grid, n_tau, j) * spec.kernel.eval(tau - time_grid[j]) * history[j][q];
        }
        q_tau[q] = acc;
    }
    q_tau
}

/// The windowed successive-approximation driver.
///
/// Reuses the Tresca solver for the inner problems; each window converges the
/// threshold on `[0, tau']` with the prefix on `[0, tau]` frozen, then
/// advances. `observer` fires after every converged window with the progress
/// that a checkpoint should persist.
pub fn solve_coulomb(
    disc: &Discretization,
    scenario: &Scenario,
    spec: &CoulombSpec,
    config: &CoulombConfig,
    resume: Option<CoulombProgress>,
    mut observer: Option<&mut dyn FnMut(&CoulombProgress)>,
) -> Result<CoulombResult, Error> {
    scenario.validate()?;
    let grid = scenario.time_grid();
    let bq = &disc.ops.bquad;
    spec.validate(bq, &grid)?;
    if !(config.c_prime_data > 0.0) {
        return Err(Error::Data(format!("C'_data estimate must be positive, got {}", config.c_prime_data)));
    }
    let n_total = grid.len() - 1;
    let rho = scenario.mollifier_rho.unwrap_or_else(|| default_rho(disc));
    let mollifier = Mollifier::new(rho, disc.mesh.dim)?;

    let mut progress = resume.unwrap_or_else(CoulombProgress::fresh);
    if progress.is_fresh() {
        progress.ell_prefix.clear();
        progress.history_prefix.clear();
    }
    if progress.ell_prefix.len() != progress.n_tau + 1 && !progress.is_fresh() {
        return Err(Error::Checkpoint(format!(
            "progress prefix has {} rows for tau index {}",
            progress.ell_prefix.len(),
            progress.n_tau
        )));
    }

    let mut trace = IterationTrace::default();
    let mut window_index = 0usize;
    let mut final_pack: Option<(Trajectory, ThresholdField, BoundaryTraceHistory)> = None;

    // a zero-step problem is already self-consistent: threshold = F0 at t = 0
    if n_total == 0 {
        let ell = update_threshold(
            &BoundaryTraceHistory { times: vec![0.0], values: vec![vec![0.0; bq.n_qp]] },
            spec,
            &grid,
            bq,
        )?;
        let traj = run_tresca(disc, scenario, &ell, &config.run)?;
        let hist = compute_trace_history(disc, scenario, &traj, &mollifier, config.trace_order)?;
        let ell_chk = update_threshold(&hist, spec, &grid, bq)?;
        let resid = diff_norm(&ell.values, &ell_chk.values, &grid, bq);
        let bound = 2.0 * config.tol_ell * (1.0 + threshold_norm(&ell.values, &grid, bq));
        return Ok(CoulombResult { trajectory: traj, threshold: ell, history: hist, trace, self_consistency: (resid, bound) });
    }

    while progress.n_tau < n_total {
        let base_len = config.force_window_length.unwrap_or_else(|| window_length(config.c_prime_data, spec.p_exponent));
        let mut converged_pack = None;
        let mut halving = 0usize;
        let mut last_increments: Vec<f64> = Vec::new();
        while halving <= config.max_halvings {
            let dtau = base_len / (1 << halving) as f64;
            let steps = ((dtau / scenario.dt).round() as usize).max(1);
            let n_prime = (progress.n_tau + steps).min(n_total);
            let sub_grid = &grid[..=n_prime];
            // iterate-0 threshold: converged prefix, frozen history integral
            // beyond tau
            let q_tau = frozen_integral(&progress.history_prefix, &grid, spec, progress.n_tau, bq.n_qp);
            let tau = grid[progress.n_tau];
            let mut ell_rows: Vec<Vec<f64>> = Vec::with_capacity(n_prime + 1);
            for (n, &t) in sub_grid.iter().enumerate() {
                if n < progress.ell_prefix.len() {
                    ell_rows.push(progress.ell_prefix[n].clone());
                } else {
                    let row: Vec<f64> = (0..bq.n_qp)
                        .map(|q| {
                            let xp = &bq.x_prime[q * bq.t_dim..(q + 1) * bq.t_dim];
                            (spec.f0.eval(xp, t) + spec.fsigma.eval(xp, tau) * q_tau[q]).max(0.0)
                        })
                        .collect();
                    ell_rows.push(row);
                }
            }
            let mut ell = ThresholdField::new(sub_grid.to_vec(), ell_rows)?;
            let mut window_scenario = scenario.clone();
            window_scenario.t_final = grid[n_prime];

            let wtrace_idx = trace.windows.len();
            trace.windows.push(WindowTrace {
                window: window_index,
                tau,
                tau_prime: grid[n_prime],
                increments: Vec::new(),
                ratios: Vec::new(),
                converged: false,
            });

            let mut window_converged = None;
            for k in 1..=config.max_inner {
                let traj = run_tresca(disc, &window_scenario, &ell, &config.run)?;
                let hist = compute_trace_history(disc, &window_scenario, &traj, &mollifier, config.trace_order)?;
                let ell_next = update_threshold(&hist, spec, sub_grid, bq)?;
                let incr = diff_norm(&ell_next.values, &ell.values, sub_grid, bq);
                let wt = &mut trace.windows[wtrace_idx];
                if let Some(&prev) = wt.increments.last() {
                    wt.ratios.push(if prev > 0.0 { incr / prev } else { 0.0 });
                }
                wt.increments.push(incr);
                if config.keep_snapshots {
                    trace.snapshots.push((window_index, k, ell_next.clone()));
                }
                let tol = config.tol_ell * (1.0 + threshold_norm(&ell.values, sub_grid, bq));
                log::info!(
                    "coulomb window={} iter={} increment={:e} tol={:e}",
                    window_index,
                    k,
                    incr,
                    tol
                );
                if incr <= tol {
                    trace.windows[wtrace_idx].converged = true;
                    window_converged = Some((traj, ell_next, hist, n_prime));
                    break;
                }
                ell = ell_next;
            }
            window_index += 1;
            if let Some(pack) = window_converged {
                converged_pack = Some(pack);
                break;
            }
            last_increments = trace.windows[wtrace_idx].increments.clone();
            halving += 1;
            log::warn!(
                "coulomb window did not contract in {} iterations; halving window length ({}/{})",
                config.max_inner,
                halving,
                config.max_halvings
            );
        }
        let Some((traj, ell, hist, n_prime)) = converged_pack else {
            let tail = last_increments.iter().rev().take(5).rev().copied().collect();
            return Err(Error::NonContraction { halvings: config.max_halvings, increments: tail });
        };
        progress = CoulombProgress {
            n_tau: n_prime,
            ell_prefix: ell.values.clone(),
            history_prefix: hist.values.clone(),
        };
        if let Some(obs) = observer.as_mut() {
            obs(&progress);
        }
        final_pack = Some((traj, ell, hist));
    }

    let (trajectory, threshold, history) = final_pack.expect("at least one window ran");
    let ell_check = update_threshold(&history, spec, &grid, bq)?;
    let resid = diff_norm(&threshold.values, &ell_check.values, &grid, bq);
    let bound = 2.0 * config.tol_ell * (1.0 + threshold_norm(&threshold.values, &grid, bq));
    Ok(CoulombResult { trajectory, threshold, history, trace, self_consistency: (resid, bound) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestepping::tests::couette_scenario;
    use approx::assert_relative_eq;

    #[test]
    fn window_length_matches_fallback_formulas() {
        // 1/(4 C') = 2 >= 1: dtau = 4
        assert_relative_eq!(window_length(0.125, 3.0), 4.0, epsilon = 1e-14);
        // 1/(4 C') = 0.25 < 1, p = 4: dtau = 0.25^4
        assert_relative_eq!(window_length(1.0, 4.0), 0.25_f64.powi(4), epsilon = 1e-15);
    }

    #[test]
    fn window_length_is_always_admissible() {
        for i in 0..100 {
            let c = 0.01 + 0.2 * i as f64;
            let p = 2.01 + 0.37 * i as f64;
            let dtau = window_length(c, p);
            assert!(
                WindowSchedule::admissible(dtau, c, p),
                "inadmissible window: C' = {c}, p = {p}, dtau = {dtau}"
            );
        }
    }

    #[test]
    fn constant_history_update_is_exact() {
        // S = 1, |R| = c: ell = F0 + Fsigma c t with zero trapezoid error
        let scenario = couette_scenario(4, 0.25, 1.0, 1e-4);
        let disc = Discretization::build(&scenario).unwrap();
        let grid = scenario.time_grid();
        let bq = &disc.ops.bquad;
        let c = 0.7;
        let hist = BoundaryTraceHistory {
            times: grid.clone(),
            values: vec![vec![c; bq.n_qp]; grid.len()],
        };
        let spec = CoulombSpec {
            f0: BoundaryFn::constant(0.2),
            fsigma: BoundaryFn::constant(0.1),
            kernel: Kernel::constant(1.0),
            p_exponent: 4.0,
        };
        let ell = update_threshold(&hist, &spec, &grid, bq).unwrap();
        for (n, &t) in grid.iter().enumerate() {
            for q in 0..bq.n_qp {
                assert_relative_eq!(ell.values[n][q], 0.2 + 0.1 * c * t, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn smooth_history_update_matches_quadrature_oracle() {
        // |R|(s) = sin(s), S(r) = exp(-r): the convolution has the closed
        // form (sin t - cos t + exp(-t)) / 2; composite trapezoid converges
        // at second order
        let scenario = couette_scenario(3, 0.0125, 1.0, 1e-4);
        let disc = Discretization::build(&scenario).unwrap();
        let grid = scenario.time_grid();
        let bq = &disc.ops.bquad;
        let hist = BoundaryTraceHistory {
            times: grid.clone(),
            values: grid.iter().map(|&s| vec![s.sin(); bq.n_qp]).collect(),
        };
        let spec = CoulombSpec {
            f0: BoundaryFn::constant(0.0),
            fsigma: BoundaryFn::constant(1.0),
            kernel: Kernel::exp_decay(1.0, 1.0),
            p_exponent: 3.0,
        };
        let ell = update_threshold(&hist, &spec, &grid, bq).unwrap();
        let t = 1.0;
        let exact = 0.5 * (t.sin() - t.cos() + (-t).exp());
        let n = grid.len() - 1;
        for q in 0..bq.n_qp {
            assert_relative_eq!(ell.values[n][q], exact, max_relative = 2e-4);
        }
    }

    #[test]
    fn missing_history_slot_is_usage_error() {
        let scenario = couette_scenario(3, 0.25, 1.0, 1e-4);
        let disc = Discretization::build(&scenario).unwrap();
        let grid = scenario.time_grid();
        let bq = &disc.ops.bquad;
        let hist = BoundaryTraceHistory {
            times: grid[..2].to_vec(),
            values: vec![vec![0.0; bq.n_qp]; 2],
        };
        let spec = CoulombSpec {
            f0: BoundaryFn::constant(0.1),
            fsigma: BoundaryFn::constant(0.1),
            kernel: Kernel::constant(1.0),
            p_exponent: 3.0,
        };
        let err = update_threshold(&hist, &spec, &grid, bq).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("step 2"), "error should name the missing step: {msg}");
    }

    #[test]
    fn monotone_history_dependence() {
        let scenario = couette_scenario(3, 0.25, 1.0, 1e-4);
        let disc = Discretization::build(&scenario).unwrap();
        let grid = scenario.time_grid();
        let bq = &disc.ops.bquad;
        let spec = CoulombSpec {
            f0: BoundaryFn::constant(0.3),
            fsigma: BoundaryFn::constant(0.2),
            kernel: Kernel::exp_decay(1.0, 0.5),
            p_exponent: 3.0,
        };
        let base: Vec<Vec<f64>> = grid
            .iter()
            .enumerate()
            .map(|(n, _)| (0..bq.n_qp).map(|q| ((n * 7 + q) % 5) as f64 * 0.1).collect())
            .collect();
        let mut larger = base.clone();
        for row in larger.iter_mut() {
            for v in row.iter_mut() {
                *v += 0.05;
            }
        }
        let h1 = BoundaryTraceHistory { times: grid.clone(), values: base };
        let h2 = BoundaryTraceHistory { times: grid.clone(), values: larger };
        let l1 = update_threshold(&h1, &spec, &grid, bq).unwrap();
        let l2 = update_threshold(&h2, &spec, &grid, bq).unwrap();
        for (r1, r2) in l1.values.iter().zip(&l2.values) {
            for (a, b) in r1.iter().zip(r2) {
                assert!(b >= a, "enlarging |R| must not decrease ell");
                assert!(*a >= 0.3 - 1e-15, "threshold below F0");
            }
        }
    }
}
