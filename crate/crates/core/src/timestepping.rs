//! Implicit Euler time stepping for the regularized slip problem.
//!
//! Each step solves the nonlinear saddle-point system
//!
//! ```text
//! M (v - v_prev)/dt + A v + friction(v)|_Gamma0 - B^T p = F(t)
//! B v = 0,   mean(p) = 0
//! ```
//!
//! with Newton's method, the exact friction Hessian and a monolithic sparse
//! LU factorization. `F` collects the body force and the moving-wall terms
//! `-a(G0 zeta, phi) - (G0 zeta', phi)`. The working velocity is the
//! homogenized field `v_tilde = v - G0 zeta`, so all Dirichlet data in the
//! solve are zero and the wall slip is exactly the trace of `v_tilde`.

use std::sync::Arc;

use crate::error::Error;
use crate::friction::{friction_force, friction_jacobian, RegularizationEps, ThresholdField};
use crate::geometry::{build_mesh, DomainSpec, Mesh};
use crate::quadrature::grundmann_moeller;
use crate::spaces::{
    assemble_operators, build_lifting, build_spaces, korn_coercivity_estimate, p2_shape, DiscreteOperators,
    FunctionSpacePair, LiftingField, WallData, WallProfile,
};
use crate::sparse::{dot, factorize, norm2, Csr, Factorization, Symbolic};

/// Body force density `f(x, t)`.
#[derive(Clone)]
pub struct ForcingFn {
    f: Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>,
    zero: bool,
}

impl std::fmt::Debug for ForcingFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.zero { "ForcingFn(zero)" } else { "ForcingFn(..)" })
    }
}

impl ForcingFn {
    pub fn zero() -> Self {
        ForcingFn { f: Arc::new(|_, _, out| out.iter_mut().for_each(|v| *v = 0.0)), zero: true }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        let all_zero = values.iter().all(|&v| v == 0.0);
        ForcingFn {
            f: Arc::new(move |_, _, out| out.copy_from_slice(&values)),
            zero: all_zero,
        }
    }

    pub fn new(f: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        ForcingFn { f: Arc::new(f), zero: false }
    }

    pub fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.f)(x, t, out)
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

/// Wall motion modulation `zeta(t)` with its first two derivatives;
/// `zeta(0) = 1` is required.
#[derive(Clone)]
pub struct TimeFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TimeFn(..)")
    }
}

impl TimeFn {
    pub fn one() -> Self {
        TimeFn { f: Arc::new(|_| 1.0), d1: Arc::new(|_| 0.0), d2: Arc::new(|_| 0.0) }
    }

    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, Error> {
        let out = TimeFn { f: Arc::new(f), d1: Arc::new(d1), d2: Arc::new(d2) };
        if (out.value(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("zeta(0) must equal 1, got {}", out.value(0.0))));
        }
        Ok(out)
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (self.d1)(t)
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        (self.d2)(t)
    }
}

/// Analytic vector field with its analytic divergence (initial-data spec).
#[derive(Clone)]
pub struct AnalyticField {
    pub f: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    pub divergence: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AnalyticField(..)")
    }
}

/// Initial velocity specification.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// `v0 = G0`, the compatibility choice: `v_tilde(0) = 0` exactly.
    Lifting,
    /// `v0 = G0 + w` with an explicit perturbation field `w`; `w` must be
    /// divergence-free and admissible (zero trace where the space is
    /// constrained).
    LiftingPlus(AnalyticField),
}

/// Wall profile selection for the lateral boundary data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallKind {
    /// Flux-balanced linear shear on the lateral boundary. `lateral_speed`
    /// is the wall-level speed of that profile; `None` uses the stick value
    /// `s`. Prescribing the expected slip speed instead emulates an
    /// infinitely long channel (the lateral data otherwise pins the
    /// cross-section flux to the stick value).
    Couette { lateral_speed: Option<f64> },
    /// Zero lateral data.
    Zero,
}

/// Newton solver controls.
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Convergence when `||r|| <= tol * (1 + ||F||)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_line_search: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-10, max_iter: 50, max_line_search: 30 }
    }
}

/// All continuous problem data for one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub domain: DomainSpec,
    pub resolution: Vec<usize>,
    pub mu: f64,
    pub t_final: f64,
    pub dt: f64,
    pub body_force: ForcingFn,
    pub zeta: TimeFn,
    pub wall_s: f64,
    pub wall_kind: WallKind,
    pub v0: InitialCondition,
    /// Strictly decreasing regularization stages; the last entry is the
    /// working eps of the run.
    pub eps_schedule: Vec<f64>,
    pub newton: NewtonConfig,
    /// Mollifier radius for stress-trace recovery (default: 2 mean spacings).
    pub mollifier_rho: Option<f64>,
    /// Request the initial-data compatibility checks of the regularity
    /// theory (divergence-free, matches g, wall-normal derivative zero).
    pub check_compatibility: bool,
}

impl Scenario {
    pub fn eps(&self) -> f64 {
        *self.eps_schedule.last().expect("eps schedule validated non-empty")
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Time-grid nodes `0, dt, ..., T`.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|n| n as f64 * self.dt).collect()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mu > 0.0) {
            return Err(Error::Data(format!("viscosity must be positive, got {}", self.mu)));
        }
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::Data(format!("need dt > 0 and T >= 0, got dt = {}, T = {}", self.dt, self.t_final)));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Data(format!(
                "T/dt must be an integer number of steps, got {} / {} = {}",
                self.t_final, self.dt, steps
            )));
        }
        if self.eps_schedule.is_empty() {
            return Err(Error::Data("eps schedule must not be empty".into()));
        }
        for w in self.eps_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Data(format!("eps schedule must be strictly decreasing, got {:?}", self.eps_schedule)));
            }
        }
        if !(self.eps() > 0.0) {
            return Err(Error::Data(format!("working eps must be positive, got {}", self.eps())));
        }
        if (self.zeta.value(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("zeta(0) must equal 1, got {}", self.zeta.value(0.0))));
        }
        Ok(())
    }
}

/// One time level of the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// Homogenized velocity coefficients on the free dofs.
    pub v: Vec<f64>,
    /// Pressure coefficients (zero mean).
    pub p: Vec<f64>,
    pub newton_iters: usize,
    pub newton_resid: f64,
}

/// Per-step record of the discrete energy inequality
/// `1/2 d||v||_M^2 + dt alpha ||v||_{H1}^2 <= dt (F, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub lhs: f64,
    pub rhs: f64,
}

/// A completed (possibly truncated) run of the Tresca solver.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    /// Consistent initial acceleration `dv_tilde/dt(0)` on the free dofs.
    pub initial_accel: Vec<f64>,
    /// Energy inequality data per step (lhs, rhs).
    pub energy: Vec<EnergyRecord>,
    /// Wall stress-trace history, filled by the stress-recovery pass.
    pub boundary_history: Option<crate::stress::BoundaryTraceHistory>,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        if self.states.len() >= 2 {
            self.states[1].t - self.states[0].t
        } else {
            0.0
        }
    }

    pub fn terminal(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// The assembled, ready-to-march problem: mesh, spaces, operators, lifting
/// and the cached free-dof blocks.
pub struct Discretization {
    pub mesh: Mesh,
    pub spaces: FunctionSpacePair,
    pub ops: DiscreteOperators,
    pub lifting: LiftingField,
    /// Discrete Korn constant (smallest generalized eigenvalue of (A, M+K)).
    pub alpha: f64,
    pub mass_ff: Csr,
    pub visc_ff: Csr,
    pub h1_ff: Csr,
    /// Divergence with free velocity columns.
    pub div_f: Csr,
    /// Tangential wall trace with free velocity columns.
    pub trace_f: Csr,
    /// `(A G0)` and `(M G0)` restricted to free dofs (wall forcing terms).
    pub a_g0: Vec<f64>,
    pub m_g0: Vec<f64>,
    /// Factorization of the full velocity mass matrix (L2 projections).
    pub mass_full: Factorization,
}

impl Discretization {
    pub fn build(scenario: &Scenario) -> Result<Self, Error> {
        scenario.validate()?;
        let mesh = build_mesh(&scenario.domain, &scenario.resolution)?;
        let spaces = build_spaces(&mesh)?;
        let ops = assemble_operators(&mesh, &spaces, scenario.mu)?;
        let wall = WallData {
            s: scenario.wall_s,
            profile: match scenario.wall_kind {
                WallKind::Couette { lateral_speed } => {
                    let lo: Vec<f64> = scenario.domain.omega.iter().map(|b| b[0]).collect();
                    WallProfile::Couette {
                        h_ref: scenario.domain.height.eval(&lo),
                        lateral_speed: lateral_speed.unwrap_or(scenario.wall_s),
                    }
                }
                WallKind::Zero => WallProfile::Zero,
            },
            height: scenario.domain.height.clone(),
        };
        let lifting = build_lifting(&mesh, &spaces, &wall, &ops)?;
        let alpha = korn_coercivity_estimate(&spaces, &ops)?;
        let mass_ff = spaces.vel.restrict_square(&ops.mass);
        let visc_ff = spaces.vel.restrict_square(&ops.visc);
        let h1_ff = spaces.vel.restrict_square(&ops.h1);
        let div_f = spaces.vel.restrict_cols(&ops.div);
        let trace_f = spaces.vel.restrict_cols(&ops.bquad.trace);
        let a_g0 = spaces.vel.restrict_vec(&ops.visc.mul(&lifting.g0));
        let m_g0 = spaces.vel.restrict_vec(&ops.mass.mul(&lifting.g0));
        let ndof = spaces.n_vel_dofs();
        let mass_full = factorize(ndof, &ops.mass.triplets().collect::<Vec<_>>(), None)?;
        Ok(Discretization {
            mesh,
            spaces,
            ops,
            lifting,
            alpha,
            mass_ff,
            visc_ff,
            h1_ff,
            div_f,
            trace_f,
            a_g0,
            m_g0,
            mass_full,
        })
    }

    pub fn n_free(&self) -> usize {
        self.spaces.vel.n_free
    }

    pub fn n_pressure(&self) -> usize {
        self.spaces.n_pressure
    }

    /// `sqrt(v^T M v)` on the free dofs.
    pub fn norm_m(&self, v: &[f64]) -> f64 {
        self.mass_ff.quad_form(v, v).max(0.0).sqrt()
    }

    /// `sqrt(v^T (M+K) v)` on the free dofs.
    pub fn norm_h1(&self, v: &[f64]) -> f64 {
        (self.mass_ff.quad_form(v, v) + self.h1_ff.quad_form(v, v)).max(0.0).sqrt()
    }

    /// Load vector of the body force at time `t` over the full dof set.
    pub fn body_force_vector(&self, f: &ForcingFn, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.spaces.n_vel_dofs()];
        if f.is_zero() {
            return out;
        }
        let d = self.mesh.dim;
        let n_loc = self.spaces.p2.n_loc;
        let rule = grundmann_moeller(d, 2);
        let mut shape = vec![0.0; n_loc];
        let mut fval = vec![0.0; d];
        let mut x = vec![0.0; d];
        for c in 0..self.mesh.n_cells() {
            let cell = self.mesh.cell(c);
            let vol_scale = self.mesh.cell_volume(c) * factorial(d);
            let nodes = &self.spaces.p2.cell_nodes[c * n_loc..(c + 1) * n_loc];
            for q in 0..rule.len() {
                let xi = rule.point(q);
                p2_shape(d, xi, &mut shape);
                let mut lam0 = 1.0;
                for v in x.iter_mut() {
                    *v = 0.0;
                }
                for (i, &xc) in xi.iter().enumerate() {
                    lam0 -= xc;
                    let p = self.mesh.vertex(cell[i + 1]);
                    for r in 0..d {
                        x[r] += xc * p[r];
                    }
                }
                let p0 = self.mesh.vertex(cell[0]);
                for r in 0..d {
                    x[r] += lam0 * p0[r];
                }
                f.eval(&x, t, &mut fval);
                let w = rule.weights[q] * vol_scale;
                for (k, &n) in nodes.iter().enumerate() {
                    for r in 0..d {
                        out[self.spaces.dof(n, r)] += w * shape[k] * fval[r];
                    }
                }
            }
        }
        out
    }

    /// Step right-hand side `F(t)` on the free dofs:
    /// `(f, phi) - zeta a(G0, phi) - zeta' (G0, phi)`.
    pub fn step_rhs(&self, scenario: &Scenario, t: f64) -> Vec<f64> {
        let fv = self.body_force_vector(&scenario.body_force, t);
        let mut rhs = self.spaces.vel.restrict_vec(&fv);
        let z = scenario.zeta.value(t);
        let dz = scenario.zeta.deriv(t);
        for ((r, a), m) in rhs.iter_mut().zip(&self.a_g0).zip(&self.m_g0) {
            *r -= z * a + dz * m;
        }
        rhs
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Saddle-system scaffolding shared by all steps: fixed sparsity triplets of
/// `[(M/dt + A), -B^T, 0; -B, 0, m; 0, m^T, 0]` plus the slots where the
/// friction Hessian lands.
pub struct SaddleSystem {
    pub n_free: usize,
    pub n_pressure: usize,
    pub n_sys: usize,
    fixed: Vec<(usize, usize, f64)>,
    symbolic: Option<Symbolic>,
}

impl SaddleSystem {
    pub fn new(disc: &Discretization, dt_inv: f64) -> Self {
        let nf = disc.n_free();
        let np = disc.n_pressure();
        let n_sys = nf + np + 1;
        let mut fixed: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in disc.mass_ff.triplets() {
            fixed.push((r, c, v * dt_inv));
        }
        for (r, c, v) in disc.visc_ff.triplets() {
            fixed.push((r, c, v));
        }
        for (q, c, v) in disc.div_f.triplets() {
            fixed.push((nf + q, c, -v));
            fixed.push((c, nf + q, -v));
        }
        for q in 0..np {
            let m = disc.ops.mean_pressure[q];
            fixed.push((nf + q, nf + np, m));
            fixed.push((nf + np, nf + q, m));
        }
        SaddleSystem { n_free: nf, n_pressure: np, n_sys, fixed, symbolic: None }
    }

    /// Factorizes the Newton matrix with the given friction Hessian blocks.
    pub fn factorize(&mut self, disc: &Discretization, jac_blocks: &[f64]) -> Result<Factorization, Error> {
        let bq = &disc.ops.bquad;
        let t = bq.t_dim;
        let mut trip = self.fixed.clone();
        let trace = &disc.trace_f;
        for q in 0..bq.n_qp {
            let w = bq.weights[q];
            for i in 0..t {
                let row_i = q * t + i;
                for k in 0..t {
                    let row_k = q * t + k;
                    let jv = w * jac_blocks[(q * t + i) * t + k];
                    if jv == 0.0 {
                        continue;
                    }
                    for ai in trace.row_ptr[row_i]..trace.row_ptr[row_i + 1] {
                        for bk in trace.row_ptr[row_k]..trace.row_ptr[row_k + 1] {
                            trip.push((
                                trace.col_idx[ai],
                                trace.col_idx[bk],
                                jv * trace.values[ai] * trace.values[bk],
                            ));
                        }
                    }
                }
            }
        }
        let fact = factorize(self.n_sys, &trip, self.symbolic.as_ref())?;
        if self.symbolic.is_none() {
            self.symbolic = Some(fact.symbolic());
        }
        Ok(fact)
    }
}

/// Newton residual of the backward-Euler step at the iterate `(v, p, lam)`.
#[allow(clippy::too_many_arguments)]
fn step_residual(
    disc: &Discretization,
    v: &[f64],
    p: &[f64],
    lam: f64,
    v_prev: &[f64],
    dt_inv: f64,
    rhs: &[f64],
    ell: &[f64],
    eps: RegularizationEps,
) -> Result<Vec<f64>, Error> {
    let nf = disc.n_free();
    let np = disc.n_pressure();
    let mut r = vec![0.0; nf + np + 1];
    let dv: Vec<f64> = v.iter().zip(v_prev).map(|(a, b)| a - b).collect();
    let mdv = disc.mass_ff.mul(&dv);
    let av = disc.visc_ff.mul(v);
    let vt = disc.trace_f.mul(v);
    let force = friction_force(&vt, ell, eps, &disc.ops.bquad)?;
    let weighted: Vec<f64> = {
        let bq = &disc.ops.bquad;
        let mut out = force;
        for q in 0..bq.n_qp {
            for k in 0..bq.t_dim {
                out[q * bq.t_dim + k] *= bq.weights[q];
            }
        }
        out
    };
    let fric = disc.trace_f.tr_mul(&weighted);
    let btp = disc.div_f.tr_mul(p);
    for i in 0..nf {
        r[i] = dt_inv * mdv[i] + av[i] + fric[i] - btp[i] - rhs[i];
    }
    let bv = disc.div_f.mul(v);
    for q in 0..np {
        r[nf + q] = -bv[q] + disc.ops.mean_pressure[q] * lam;
    }
    r[nf + np] = dot(&disc.ops.mean_pressure, p);
    Ok(r)
}

/// Advances one backward-Euler step.
///
/// `prev` supplies the mass-term history; `guess` seeds Newton (pass `prev`
/// for a plain warm start). Fails if `prev.t + dt` overruns the final time or
/// Newton stalls.
#[allow(clippy::too_many_arguments)]
pub fn step(
    disc: &Discretization,
    scenario: &Scenario,
    prev: &State,
    guess: &State,
    ell: &[f64],
    eps: RegularizationEps,
    system: &mut SaddleSystem,
    step_index: usize,
) -> Result<State, Error> {
    let dt = scenario.dt;
    if prev.t + dt > scenario.t_final + 1e-12 * scenario.t_final.max(1.0) {
        return Err(Error::Usage(format!(
            "step would pass the final time: t = {} + dt = {} > T = {}",
            prev.t, dt, scenario.t_final
        )));
    }
    let t_next = prev.t + dt;
    let dt_inv = 1.0 / dt;
    let rhs = disc.step_rhs(scenario, t_next);
    let rhs_scale = 1.0 + norm2(&rhs);
    let tol = scenario.newton.tol * rhs_scale;

    let nf = disc.n_free();
    let np = disc.n_pressure();
    let mut v = guess.v.clone();
    let mut p = guess.p.clone();
    let mut lam = 0.0;
    let mut history = Vec::new();
    for it in 0..=scenario.newton.max_iter {
        let r = step_residual(disc, &v, &p, lam, &prev.v, dt_inv, &rhs, ell, eps)?;
        let rn = norm2(&r);
        history.push(rn);
        if rn <= tol {
            return Ok(State { t: t_next, v, p, newton_iters: it, newton_resid: rn });
        }
        if it == scenario.newton.max_iter {
            break;
        }
        let vt = disc.trace_f.mul(&v);
        let jac = friction_jacobian(&vt, ell, eps, &disc.ops.bquad)?;
        let fact = system.factorize(disc, &jac)?;
        let neg_r: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = fact.solve(&neg_r);
        // line search by halving on residual increase
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..scenario.newton.max_line_search {
            let vn: Vec<f64> = (0..nf).map(|i| v[i] + alpha * delta[i]).collect();
            let pn: Vec<f64> = (0..np).map(|i| p[i] + alpha * delta[nf + i]).collect();
            let ln = lam + alpha * delta[nf + np];
            let rn_new = norm2(&step_residual(disc, &vn, &pn, ln, &prev.v, dt_inv, &rhs, ell, eps)?);
            if rn_new <= rn * (1.0 - 1e-4 * alpha) || rn_new <= tol {
                v = vn;
                p = pn;
                lam = ln;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Step { step: step_index, history });
        }
    }
    Err(Error::Step { step: step_index, history })
}

/// Controls for [`run_tresca`] beyond the scenario data.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    /// Emit one progress log line per step.
    pub quiet: bool,
    /// Stop early once `||v_next - v|| / dt` drops below this value.
    pub steady_tol: Option<f64>,
    /// Perturb the Newton initial guess with deterministic noise of this
    /// amplitude (uniqueness diagnostics).
    pub perturb_guess: Option<f64>,
}

/// Builds the initial state from the scenario's initial-condition spec.
///
/// In compatibility mode (`v0 = G0`) the homogenized initial velocity is
/// exactly zero. An explicit perturbation field is validated (analytic
/// divergence, admissible trace), interpolated and projected onto the
/// discretely divergence-free subspace.
pub fn initial_state(disc: &Discretization, scenario: &Scenario) -> Result<State, Error> {
    let nf = disc.n_free();
    let np = disc.n_pressure();
    let v = match &scenario.v0 {
        InitialCondition::Lifting => vec![0.0; nf],
        InitialCondition::LiftingPlus(field) => {
            validate_divergence_free(disc, field)?;
            let full = disc.spaces.interpolate(|x, out| (field.f)(x, out));
            // admissibility: the constrained components of w must vanish
            let scale = full.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
            for (i, st) in disc.spaces.vel.state.iter().enumerate() {
                if *st == crate::spaces::DofState::Fixed && full[i].abs() > 1e-10 * scale {
                    return Err(Error::Data(format!(
                        "initial perturbation has a nonzero constrained trace component ({}) at dof {i}",
                        full[i]
                    )));
                }
            }
            let free = disc.spaces.vel.restrict_vec(&full);
            leray_project(disc, &free)?
        }
    };
    if scenario.check_compatibility {
        check_compatibility(disc, scenario)?;
    }
    Ok(State { t: 0.0, v, p: vec![0.0; np], newton_iters: 0, newton_resid: 0.0 })
}

/// Quadrature check that the analytic divergence of the perturbation field
/// vanishes; rejects with the integral value otherwise.
fn validate_divergence_free(disc: &Discretization, field: &AnalyticField) -> Result<(), Error> {
    let d = disc.mesh.dim;
    let rule = grundmann_moeller(d, 2);
    let mut total = 0.0;
    let mut x = vec![0.0; d];
    for c in 0..disc.mesh.n_cells() {
        let cell = disc.mesh.cell(c);
        let vol_scale = disc.mesh.cell_volume(c) * factorial(d);
        for q in 0..rule.len() {
            let xi = rule.point(q);
            let mut lam0 = 1.0;
            for v in x.iter_mut() {
                *v = 0.0;
            }
            for (i, &xc) in xi.iter().enumerate() {
                lam0 -= xc;
                let pv = disc.mesh.vertex(cell[i + 1]);
                for r in 0..d {
                    x[r] += xc * pv[r];
                }
            }
            let p0 = disc.mesh.vertex(cell[0]);
            for r in 0..d {
                x[r] += lam0 * p0[r];
            }
            let dv = (field.divergence)(&x);
            total += rule.weights[q] * vol_scale * dv * dv;
        }
    }
    let l2 = total.sqrt();
    if l2 > 1e-8 {
        return Err(Error::Data(format!("initial velocity is not divergence-free: ||div v0||_L2 = {l2:.3e}")));
    }
    Ok(())
}

/// Compatibility diagnostics: wall-normal derivative of `v0 = G0` (or the
/// perturbed field) must vanish on the slip wall.
fn check_compatibility(disc: &Discretization, scenario: &Scenario) -> Result<(), Error> {
    // v0 differs from G0 by an admissible w; the trace condition v0 = g on
    // the boundary holds by construction, divergence was checked above.
    // Remaining condition: d v0 / d x_d = 0 on Gamma0.
    let d = disc.mesh.dim;
    let v0_full = match &scenario.v0 {
        InitialCondition::Lifting => disc.lifting.g0.clone(),
        InitialCondition::LiftingPlus(field) => {
            let mut full = disc.spaces.interpolate(|x, out| (field.f)(x, out));
            for (a, b) in full.iter_mut().zip(&disc.lifting.g0) {
                *a += b;
            }
            full
        }
    };
    let scale = 1.0 + v0_full.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bq = &disc.ops.bquad;
    for (q, &cell) in bq.cells.iter().enumerate() {
        let grad = crate::stress::velocity_gradient_at(disc, &v0_full, cell, wall_point(bq, q, d));
        for comp in 0..d {
            let g = grad[comp * d + (d - 1)];
            if g.abs() > 1e-6 * scale {
                return Err(Error::Data(format!(
                    "compatibility violated: d v0_{comp} / d x_{} = {g:.3e} at wall point {q}",
                    d - 1
                )));
            }
        }
    }
    Ok(())
}

fn wall_point(bq: &crate::spaces::BoundaryQuad, q: usize, dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    x[..dim - 1].copy_from_slice(&bq.x_prime[q * bq.t_dim..(q + 1) * bq.t_dim]);
    x
}

/// M-orthogonal projection onto the discretely divergence-free subspace.
fn leray_project(disc: &Discretization, v: &[f64]) -> Result<Vec<f64>, Error> {
    let nf = disc.n_free();
    let np = disc.n_pressure();
    let n_sys = nf + np + 1;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (r, c, val) in disc.mass_ff.triplets() {
        trip.push((r, c, val));
    }
    for (q, c, val) in disc.div_f.triplets() {
        trip.push((nf + q, c, -val));
        trip.push((c, nf + q, -val));
    }
    for q in 0..np {
        let m = disc.ops.mean_pressure[q];
        trip.push((nf + q, nf + np, m));
        trip.push((nf + np, nf + q, m));
    }
    let fact = factorize(n_sys, &trip, None)?;
    let mv = disc.mass_ff.mul(v);
    let mut rhs = vec![0.0; n_sys];
    rhs[..nf].copy_from_slice(&mv);
    let sol = fact.solve(&rhs);
    Ok(sol[..nf].to_vec())
}

/// Consistent initialization: solves the linear saddle system for the initial
/// acceleration and pressure given `v_tilde(0)`.
fn consistent_initial(
    disc: &Discretization,
    scenario: &Scenario,
    v0: &[f64],
    ell0: &[f64],
    eps: RegularizationEps,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let nf = disc.n_free();
    let np = disc.n_pressure();
    let n_sys = nf + np + 1;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (r, c, val) in disc.mass_ff.triplets() {
        trip.push((r, c, val));
    }
    for (q, c, val) in disc.div_f.triplets() {
        trip.push((nf + q, c, -val));
        trip.push((c, nf + q, -val));
    }
    for q in 0..np {
        let m = disc.ops.mean_pressure[q];
        trip.push((nf + q, nf + np, m));
        trip.push((nf + np, nf + q, m));
    }
    let fact = factorize(n_sys, &trip, None)?;
    let rhs0 = disc.step_rhs(scenario, 0.0);
    let av = disc.visc_ff.mul(v0);
    let vt = disc.trace_f.mul(v0);
    let mut force = friction_force(&vt, ell0, eps, &disc.ops.bquad)?;
    let bq = &disc.ops.bquad;
    for q in 0..bq.n_qp {
        for k in 0..bq.t_dim {
            force[q * bq.t_dim + k] *= bq.weights[q];
        }
    }
    let fric = disc.trace_f.tr_mul(&force);
    let mut rhs = vec![0.0; n_sys];
    for i in 0..nf {
        rhs[i] = rhs0[i] - av[i] - fric[i];
    }
    let sol = fact.solve(&rhs);
    Ok((sol[..nf].to_vec(), sol[nf..nf + np].to_vec()))
}

/// Runs the backward-Euler march with a given Tresca threshold field.
///
/// Applies the scenario's eps-continuation schedule inside every step,
/// records the per-step energy inequality, and logs one machine-parsable
/// progress line per step.
pub fn run_tresca(
    disc: &Discretization,
    scenario: &Scenario,
    ell: &ThresholdField,
    config: &RunConfig,
) -> Result<Trajectory, Error> {
    scenario.validate()?;
    let n_steps = scenario.n_steps();
    let grid = scenario.time_grid();
    if ell.times.len() < grid.len() {
        return Err(Error::Usage(format!(
            "threshold field covers {} time nodes, trajectory needs {}",
            ell.times.len(),
            grid.len()
        )));
    }
    for (a, b) in ell.times.iter().zip(&grid) {
        if (a - b).abs() > 1e-10 * b.abs().max(1.0) {
            return Err(Error::Usage(format!("threshold time grid mismatch: {a} vs {b}")));
        }
    }
    if ell.n_qp() != disc.ops.bquad.n_qp {
        return Err(Error::Usage(format!(
            "threshold field has {} wall points, discretization has {}",
            ell.n_qp(),
            disc.ops.bquad.n_qp
        )));
    }
    let eps_final = RegularizationEps::new(scenario.eps())?;
    let mut state = initial_state(disc, scenario)?;
    let (accel, p0) = consistent_initial(disc, scenario, &state.v, ell.slice(0), eps_final)?;
    state.p = p0;
    let mut system = SaddleSystem::new(disc, 1.0 / scenario.dt);
    let mut states = vec![state];
    let mut energy = Vec::new();
    for n in 1..=n_steps {
        let prev = states.last().unwrap().clone();
        let mut guess = prev.clone();
        if let Some(amp) = config.perturb_guess {
            for (i, v) in guess.v.iter_mut().enumerate() {
                *v += amp * crate::spaces::deterministic_noise((n * 1_000_003 + i) as u64);
            }
        }
        let ell_n = ell.slice(n);
        let mut next = None;
        for &e in &scenario.eps_schedule {
            let eps = RegularizationEps::new(e)?;
            let result = step(disc, scenario, &prev, &guess, ell_n, eps, &mut system, n)?;
            guess = result.clone();
            next = Some(result);
        }
        let next = next.expect("eps schedule validated non-empty");
        // discrete energy inequality record
        let m_next = disc.mass_ff.quad_form(&next.v, &next.v);
        let m_prev = disc.mass_ff.quad_form(&prev.v, &prev.v);
        let h1 = m_next + disc.h1_ff.quad_form(&next.v, &next.v);
        let rhs = disc.step_rhs(scenario, next.t);
        let lhs = 0.5 * (m_next - m_prev) + scenario.dt * disc.alpha * h1;
        let rhs_pair = scenario.dt * dot(&rhs, &next.v);
        energy.push(EnergyRecord { lhs, rhs: rhs_pair });
        if !config.quiet {
            log::info!(
                "step={} t={} newton_iters={} resid={:e} energy={:e}",
                n,
                next.t,
                next.newton_iters,
                next.newton_resid,
                0.5 * m_next
            );
        }
        let increment = disc.norm_m(&next.v.iter().zip(&prev.v).map(|(a, b)| a - b).collect::<Vec<_>>()) / scenario.dt;
        states.push(next);
        if let Some(tol) = config.steady_tol {
            if increment < tol {
                break;
            }
        }
    }
    Ok(Trajectory { states, initial_accel: accel, energy, boundary_history: None })
}
