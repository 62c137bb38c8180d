//! Stress recovery on the wall: the tensor `sigma = -p I + 2 mu D(v)`, its
//! distributional divergence reconstructed from the momentum balance, and the
//! mollified normal-trace operator feeding the Coulomb threshold.
//!
//! The trace operator evaluates
//! `R(sigma_row)(x') = int_Omega div(sigma_row) f + int_Omega sigma_row . grad f`
//! with `f` a compactly supported bump centered at the wall point `x'`. That
//! is the Green-formula pairing with the normal trace, so for smooth fields
//! it converges to the pointwise value of `sigma_row . n` as the radius
//! shrinks; the bump is normalized to unit mass on the wall plane to make
//! that limit hold.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::Error;
use crate::quadrature::{duffy, gauss_legendre_01};
use crate::sparse::norm2;
use crate::timestepping::{Discretization, Scenario, State, Trajectory};

/// Piecewise-linear (per cell) stress tensor at one time.
#[derive(Debug, Clone)]
pub struct StressField {
    pub dim: usize,
    /// `data[((cell * (d+1) + vertex) * d + i) * d + j]`
    pub data: Vec<f64>,
}

impl StressField {
    /// Tensor value at a physical point inside the given cell (row-major).
    pub fn eval(&self, disc: &Discretization, cell: usize, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let lam = barycentric(disc, cell, x);
        for v in out.iter_mut() {
            *v = 0.0;
        }
        for (k, &l) in lam.iter().enumerate() {
            let base = ((cell * (d + 1) + k) * d) * d;
            for e in 0..d * d {
                out[e] += l * self.data[base + e];
            }
        }
    }

    /// Vertex value of one tensor entry.
    pub fn at_vertex(&self, cell: usize, vertex: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.data[((cell * (d + 1) + vertex) * d + i) * d + j]
    }
}

/// Barycentric coordinates of `x` in a cell.
fn barycentric(disc: &Discretization, cell: usize, x: &[f64]) -> Vec<f64> {
    let d = disc.mesh.dim;
    let c = disc.mesh.cell(cell);
    let p0 = disc.mesh.vertex(c[0]);
    // solve J xi = x - p0
    let mut j = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for col in 0..d {
        let p = disc.mesh.vertex(c[col + 1]);
        for row in 0..d {
            j[row][col] = p[row] - p0[row];
        }
    }
    for row in 0..d {
        rhs[row] = x[row] - p0[row];
    }
    let xi = solve_small(&j, &rhs, d);
    let mut lam = vec![0.0; d + 1];
    lam[0] = 1.0 - xi[..d].iter().sum::<f64>();
    lam[1..(d + 1)].copy_from_slice(&xi[..d]);
    lam
}

fn solve_small(j: &[[f64; 3]; 3], rhs: &[f64; 3], d: usize) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    match d {
        2 => {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            out[0] = (rhs[0] * j[1][1] - rhs[1] * j[0][1]) / det;
            out[1] = (j[0][0] * rhs[1] - j[1][0] * rhs[0]) / det;
        }
        3 => {
            let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
            for k in 0..3 {
                let mut m = *j;
                for r in 0..3 {
                    m[r][k] = rhs[r];
                }
                let dk = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                out[k] = dk / det;
            }
        }
        _ => unreachable!(),
    }
    out
}

/// Gradient of a full-dof P2 vector field at a physical point of a cell
/// (row-major `d x d`, `out[i*d+j] = d v_i / d x_j`).
pub(crate) fn velocity_gradient_at(disc: &Discretization, v_full: &[f64], cell: usize, x: Vec<f64>) -> Vec<f64> {
    let lam = barycentric(disc, cell, &x);
    let xi: Vec<f64> = lam[1..].to_vec();
    gradient_at_ref(disc, v_full, cell, &xi)
}

/// Same as [`velocity_gradient_at`] but with reference coordinates given.
fn gradient_at_ref(disc: &Discretization, v_full: &[f64], cell: usize, xi: &[f64]) -> Vec<f64> {
    let d = disc.mesh.dim;
    let n_loc = disc.spaces.p2.n_loc;
    let nodes = &disc.spaces.p2.cell_nodes[cell * n_loc..(cell + 1) * n_loc];
    // physical gradients via the cell Jacobian
    let c = disc.mesh.cell(cell);
    let p0 = disc.mesh.vertex(c[0]);
    let mut jmat = [[0.0f64; 3]; 3];
    for col in 0..d {
        let p = disc.mesh.vertex(c[col + 1]);
        for row in 0..d {
            jmat[row][col] = p[row] - p0[row];
        }
    }
    let mut gref = vec![0.0f64; n_loc * d];
    crate::spaces::p2_grad_ref(d, xi, &mut gref);
    // grad_phys = J^{-T} grad_ref: solve J^T y = g for each node
    let mut jt = [[0.0f64; 3]; 3];
    for r in 0..d {
        for cc in 0..d {
            jt[r][cc] = jmat[cc][r];
        }
    }
    let mut out = vec![0.0f64; d * d];
    for (k, &n) in nodes.iter().enumerate() {
        let mut rhs = [0.0f64; 3];
        rhs[..d].copy_from_slice(&gref[k * d..(k + 1) * d]);
        let g = solve_small(&jt, &rhs, d);
        for i in 0..d {
            let coeff = v_full[disc.spaces.dof(n, i)];
            for jj in 0..d {
                out[i * d + jj] += coeff * g[jj];
            }
        }
    }
    out
}

/// Recovers `sigma = -p I + 2 mu D(v_tilde + G0 zeta)` cell by cell.
pub fn compute_stress(disc: &Discretization, state: &State, zeta_t: f64) -> StressField {
    let d = disc.mesh.dim;
    let mu = disc.ops.mu;
    let mut v_full = disc.spaces.vel.extend_vec(&state.v);
    for (v, g) in v_full.iter_mut().zip(&disc.lifting.g0) {
        *v += zeta_t * g;
    }
    let nc = disc.mesh.n_cells();
    let mut data = vec![0.0; nc * (d + 1) * d * d];
    // reference coordinates of the cell vertices
    let mut ref_pts = vec![vec![0.0; d]; d + 1];
    for (i, pt) in ref_pts.iter_mut().enumerate().skip(1) {
        pt[i - 1] = 1.0;
    }
    for cell in 0..nc {
        let cverts = disc.mesh.cell(cell).to_vec();
        for (k, xi) in ref_pts.iter().enumerate() {
            let grad = gradient_at_ref(disc, &v_full, cell, xi);
            let p = state.p[cverts[k]];
            for i in 0..d {
                for jj in 0..d {
                    let dij = 0.5 * (grad[i * d + jj] + grad[jj * d + i]);
                    let mut s = 2.0 * mu * dij;
                    if i == jj {
                        s -= p;
                    }
                    data[((cell * (d + 1) + k) * d + i) * d + jj] = s;
                }
            }
        }
    }
    StressField { dim: d, data }
}

/// Reconstructs `div sigma` distributionally from the momentum balance of one
/// backward-Euler step:
/// `div sigma = (v_next - v_prev)/dt - f + G0 zeta'` (projected onto the
/// velocity space). Errors if the states are not consecutive.
pub fn momentum_residual_div_stress(
    disc: &Discretization,
    scenario: &Scenario,
    prev: &State,
    next: &State,
) -> Result<Vec<f64>, Error> {
    let dt = next.t - prev.t;
    if (dt - scenario.dt).abs() > 1e-10 * scenario.dt {
        return Err(Error::Usage(format!(
            "states are not consecutive: t = {} then {}, dt = {}",
            prev.t, next.t, scenario.dt
        )));
    }
    let dvdt: Vec<f64> = next.v.iter().zip(&prev.v).map(|(a, b)| (a - b) / dt).collect();
    let accel_full = disc.spaces.vel.extend_vec(&dvdt);
    Ok(div_stress_from_accel(disc, scenario, &accel_full, next.t))
}

/// `div sigma = accel - P(f) + G0 zeta'(t)` over the full dof set.
pub(crate) fn div_stress_from_accel(disc: &Discretization, scenario: &Scenario, accel_full: &[f64], t: f64) -> Vec<f64> {
    let mut out = accel_full.to_vec();
    if !scenario.body_force.is_zero() {
        let b = disc.body_force_vector(&scenario.body_force, t);
        let f_proj = disc.mass_full.solve(&b);
        for (o, f) in out.iter_mut().zip(&f_proj) {
            *o -= f;
        }
    }
    let dz = scenario.zeta.deriv(t);
    if dz != 0.0 {
        for (o, g) in out.iter_mut().zip(&disc.lifting.g0) {
            *o += dz * g;
        }
    }
    out
}

/// Smooth compactly supported bump used to mollify the stress trace.
///
/// Radial profile `exp(-1/(1 - (r/rho)^2))`, scaled so that the restriction
/// of the bump to the wall plane through its center has unit integral (the
/// normalization that makes `R` an approximate identity on the wall).
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub rho: f64,
    pub dim: usize,
    scale: f64,
}

impl Mollifier {
    pub fn new(rho: f64, dim: usize) -> Result<Self, Error> {
        if !(rho > 0.0) {
            return Err(Error::Data(format!("mollifier radius must be positive, got {rho}")));
        }
        // plane-restriction mass of the unit bump in dimension dim - 1
        let gl = gauss_legendre_01(48);
        let j = match dim {
            2 => {
                // int_{-1}^{1} exp(-1/(1-t^2)) dt
                2.0 * gl.iter().map(|&(x, w)| w * bump_profile(x)).sum::<f64>()
            }
            3 => {
                // int_{|u|<1} exp(-1/(1-|u|^2)) du = 2 pi int_0^1 r g(r) dr
                2.0 * std::f64::consts::PI * gl.iter().map(|&(x, w)| w * x * bump_profile(x)).sum::<f64>()
            }
            _ => return Err(Error::Data(format!("mollifier dimension must be 2 or 3, got {dim}"))),
        };
        Ok(Mollifier { rho, dim, scale: 1.0 / (j * rho.powi(dim as i32 - 1)) })
    }

    /// Bump value at offset `diff = x - x_center`.
    pub fn value(&self, diff: &[f64]) -> f64 {
        let r2: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (self.rho * self.rho);
        if r2 >= 1.0 {
            return 0.0;
        }
        self.scale * (-1.0 / (1.0 - r2)).exp()
    }

    /// Bump gradient at offset `diff`.
    pub fn grad(&self, diff: &[f64], out: &mut [f64]) {
        let rho2 = self.rho * self.rho;
        let r2: f64 = diff.iter().map(|d| d * d).sum::<f64>() / rho2;
        if r2 >= 1.0 {
            for o in out.iter_mut() {
                *o = 0.0;
            }
            return;
        }
        let g = self.scale * (-1.0 / (1.0 - r2)).exp();
        let factor = -2.0 / ((1.0 - r2) * (1.0 - r2) * rho2);
        for (o, d) in out.iter_mut().zip(diff) {
            *o = g * factor * d;
        }
    }

    /// `sqrt(int_Omega f^2 + |grad f|^2)` over the cells of the mesh: the
    /// computable continuity constant of the trace operator at `x'`
    /// (`|R(sigma)| <= C ||sigma||_E`).
    pub fn continuity_constant(&self, disc: &Discretization, x_prime: &[f64], order: usize) -> f64 {
        let d = self.dim;
        let mut center = vec![0.0; d];
        center[..d - 1].copy_from_slice(x_prime);
        let rule = duffy(d, order);
        let mut total = 0.0;
        let mut grad = vec![0.0; d];
        let mut diff = vec![0.0; d];
        for cell in cells_near(disc, &center, self.rho) {
            let cverts = disc.mesh.cell(cell);
            let p0 = disc.mesh.vertex(cverts[0]).to_vec();
            let vol_scale = disc.mesh.cell_volume(cell) * factorial(d);
            for q in 0..rule.len() {
                let xi = rule.point(q);
                for r in 0..d {
                    let mut x = p0[r];
                    for (i, &xc) in xi.iter().enumerate() {
                        x += xc * (disc.mesh.vertex(cverts[i + 1])[r] - p0[r]);
                    }
                    diff[r] = x - center[r];
                }
                let f = self.value(&diff);
                self.grad(&diff, &mut grad);
                let g2: f64 = grad.iter().map(|g| g * g).sum();
                total += rule.weights[q] * vol_scale * (f * f + g2);
            }
        }
        total.max(0.0).sqrt()
    }
}

fn bump_profile(r: f64) -> f64 {
    if r * r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Cells whose bounding box intersects the ball around `center`.
fn cells_near(disc: &Discretization, center: &[f64], rho: f64) -> Vec<usize> {
    let d = disc.mesh.dim;
    let mut out = Vec::new();
    'cells: for c in 0..disc.mesh.n_cells() {
        let cell = disc.mesh.cell(c);
        for axis in 0..d {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in cell {
                let x = disc.mesh.vertex(v)[axis];
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if center[axis] < lo - rho || center[axis] > hi + rho {
                continue 'cells;
            }
        }
        out.push(c);
    }
    out
}

/// Evaluates the mollified normal trace of the stress row `sigma_row`
/// (the `d`-th row of `sigma`) at the wall point `x'`:
/// `R = int div(sigma_row) f_{x'} + int sigma_row . grad f_{x'}`.
///
/// `div_full` is the reconstructed `div sigma` as a full-dof P2 vector field;
/// its `d`-th component is the divergence of the used row. `order` controls
/// the per-cell tensor quadrature. If the bump radius exceeds the channel
/// height the support is clipped to the domain (warned, not an error).
pub fn regularized_normal_trace(
    disc: &Discretization,
    stress: &StressField,
    div_full: &[f64],
    mollifier: &Mollifier,
    x_prime: &[f64],
    order: usize,
) -> f64 {
    let d = disc.mesh.dim;
    if mollifier.rho > disc.mesh.vertices.chunks(d).map(|v| v[d - 1]).fold(0.0, f64::max) {
        log::warn!("mollifier radius {} exceeds the channel height; support clipped to the domain", mollifier.rho);
    }
    let mut center = vec![0.0; d];
    center[..d - 1].copy_from_slice(x_prime);
    let rule = duffy(d, order);
    let n_loc = disc.spaces.p2.n_loc;
    let mut total = 0.0;
    let mut gradf = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut shape = vec![0.0; n_loc];
    for cell in cells_near(disc, &center, mollifier.rho) {
        let cverts = disc.mesh.cell(cell);
        let nodes = &disc.spaces.p2.cell_nodes[cell * n_loc..(cell + 1) * n_loc];
        let p0 = disc.mesh.vertex(cverts[0]).to_vec();
        let vol_scale = disc.mesh.cell_volume(cell) * factorial(d);
        for q in 0..rule.len() {
            let xi = rule.point(q);
            let mut lam0 = 1.0;
            for r in 0..d {
                let mut x = p0[r];
                for (i, &xc) in xi.iter().enumerate() {
                    x += xc * (disc.mesh.vertex(cverts[i + 1])[r] - p0[r]);
                }
                diff[r] = x - center[r];
            }
            for &xc in xi {
                lam0 -= xc;
            }
            let f = mollifier.value(&diff);
            mollifier.grad(&diff, &mut gradf);
            if f == 0.0 && gradf.iter().all(|&g| g == 0.0) {
                continue;
            }
            // sigma row (P1 per cell) at the point
            let mut lam = vec![lam0; 1];
            lam.extend_from_slice(xi);
            let mut row = vec![0.0; d];
            for (k, &l) in lam.iter().enumerate() {
                for jj in 0..d {
                    row[jj] += l * stress.at_vertex(cell, k, d - 1, jj);
                }
            }
            // div sigma row: d-th component of the P2 divergence field
            crate::spaces::p2_shape(d, xi, &mut shape);
            let mut divr = 0.0;
            for (k, &n) in nodes.iter().enumerate() {
                divr += shape[k] * div_full[disc.spaces.dof(n, d - 1)];
            }
            let w = rule.weights[q] * vol_scale;
            let flux: f64 = row.iter().zip(&gradf).map(|(a, b)| a * b).sum();
            total += w * (divr * f + flux);
        }
    }
    total
}

/// Wall history of `|R(sigma_row)|` per completed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraceHistory {
    pub times: Vec<f64>,
    /// `values[step][quad_point]`, nonnegative.
    pub values: Vec<Vec<f64>>,
}

impl BoundaryTraceHistory {
    /// CSV with columns `step, time, quad_point_id, x' coords, value`.
    pub fn write_csv(&self, quad: &crate::spaces::BoundaryQuad, w: &mut impl Write) -> std::io::Result<()> {
        let xcols: Vec<String> = (0..quad.t_dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "step,time,quad_point_id,{},value", xcols.join(","))?;
        for (n, t) in self.times.iter().enumerate() {
            for q in 0..quad.n_qp {
                let coords: Vec<String> =
                    (0..quad.t_dim).map(|k| crate::fmt_f64(quad.x_prime[q * quad.t_dim + k])).collect();
                writeln!(w, "{},{},{},{},{}", n, crate::fmt_f64(*t), q, coords.join(","), crate::fmt_f64(self.values[n][q]))?;
            }
        }
        Ok(())
    }

    pub fn read_csv(r: &mut impl BufRead) -> Result<Self, Error> {
        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut last_step: Option<usize> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Usage(format!("history read failed: {e}")))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 4 {
                return Err(Error::Usage(format!("bad history csv line: {line}")));
            }
            let step: usize = cols[0].parse().map_err(|e| Error::Usage(format!("bad step `{}`: {e}", cols[0])))?;
            let t: f64 = cols[1].parse().map_err(|e| Error::Usage(format!("bad time `{}`: {e}", cols[1])))?;
            let v: f64 = cols[cols.len() - 1]
                .parse()
                .map_err(|e| Error::Usage(format!("bad value `{}`: {e}", cols[cols.len() - 1])))?;
            if last_step != Some(step) {
                last_step = Some(step);
                times.push(t);
                values.push(Vec::new());
            }
            values.last_mut().unwrap().push(v);
        }
        Ok(BoundaryTraceHistory { times, values })
    }

    pub fn prefix(&self, n_times: usize) -> BoundaryTraceHistory {
        BoundaryTraceHistory { times: self.times[..n_times].to_vec(), values: self.values[..n_times].to_vec() }
    }
}

/// Computes the full `|R(sigma_row)|` history of a trajectory.
///
/// At the initial time the consistent acceleration of the trajectory supplies
/// the distributional divergence. Trace evaluations at distinct wall points
/// are independent and run in parallel (order-preserving).
pub fn compute_trace_history(
    disc: &Discretization,
    scenario: &Scenario,
    traj: &Trajectory,
    mollifier: &Mollifier,
    order: usize,
) -> Result<BoundaryTraceHistory, Error> {
    let bq = &disc.ops.bquad;
    let mut times = Vec::with_capacity(traj.states.len());
    let mut values = Vec::with_capacity(traj.states.len());
    for (n, state) in traj.states.iter().enumerate() {
        let sigma = compute_stress(disc, state, scenario.zeta.value(state.t));
        let div_full = if n == 0 {
            let accel_full = disc.spaces.vel.extend_vec(&traj.initial_accel);
            div_stress_from_accel(disc, scenario, &accel_full, state.t)
        } else {
            momentum_residual_div_stress(disc, scenario, &traj.states[n - 1], state)?
        };
        let row: Vec<f64> = (0..bq.n_qp)
            .into_par_iter()
            .map(|q| {
                let xp = &bq.x_prime[q * bq.t_dim..(q + 1) * bq.t_dim];
                regularized_normal_trace(disc, &sigma, &div_full, mollifier, xp, order).abs()
            })
            .collect();
        times.push(state.t);
        values.push(row);
    }
    Ok(BoundaryTraceHistory { times, values })
}

/// Default mollifier radius: two mean mesh spacings.
pub fn default_rho(disc: &Discretization) -> f64 {
    let d = disc.mesh.dim;
    let vol: f64 = (0..disc.mesh.n_cells()).map(|c| disc.mesh.cell_volume(c)).sum();
    let h = (vol / disc.mesh.n_cells() as f64).powf(1.0 / d as f64);
    2.0 * h
}

/// Max divergence residual `||B v|| / (1 + ||v||_M)` over a trajectory.
pub fn max_divergence_residual(disc: &Discretization, traj: &Trajectory) -> f64 {
    traj.states
        .iter()
        .map(|s| norm2(&disc.div_f.mul(&s.v)) / (1.0 + disc.norm_m(&s.v)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestepping::tests::couette_scenario;
    use crate::timestepping::{initial_state, run_tresca, Discretization, RunConfig};
    use crate::ThresholdField;
    use approx::assert_relative_eq;

    fn disc_for(n: usize) -> (Discretization, crate::timestepping::Scenario) {
        let scenario = couette_scenario(n, 0.25, 1.0, 1e-5);
        let disc = Discretization::build(&scenario).unwrap();
        (disc, scenario)
    }

    #[test]
    fn zero_velocity_unit_pressure_gives_minus_identity() {
        let (disc, scenario) = disc_for(3);
        let mut state = initial_state(&disc, &scenario).unwrap();
        state.p = vec![1.0; disc.n_pressure()];
        // kill the lifting contribution by evaluating at zeta weight 0
        let sigma = compute_stress(&disc, &state, 0.0);
        for cell in 0..disc.mesh.n_cells() {
            for k in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        let expect = if i == j { -1.0 } else { 0.0 };
                        assert_relative_eq!(sigma.at_vertex(cell, k, i, j), expect, epsilon = 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn couette_stick_stress_is_constant_shear() {
        // v = G0 = (s(1-y), 0): sigma_12 = -mu s / h = -1, p = 0
        let (disc, scenario) = disc_for(4);
        let state = initial_state(&disc, &scenario).unwrap();
        let sigma = compute_stress(&disc, &state, 1.0);
        for cell in 0..disc.mesh.n_cells() {
            for k in 0..3 {
                assert_relative_eq!(sigma.at_vertex(cell, k, 0, 1), -1.0, epsilon = 1e-9);
                assert_relative_eq!(sigma.at_vertex(cell, k, 1, 0), -1.0, epsilon = 1e-9);
                assert_relative_eq!(sigma.at_vertex(cell, k, 0, 0), 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pressure_shift_moves_stress_by_minus_identity() {
        let (disc, scenario) = disc_for(3);
        let mut state = initial_state(&disc, &scenario).unwrap();
        let s1 = compute_stress(&disc, &state, 1.0);
        for p in state.p.iter_mut() {
            *p += 2.0;
        }
        let s2 = compute_stress(&disc, &state, 1.0);
        for (a, b) in s1.data.chunks(4).zip(s2.data.chunks(4)) {
            assert_relative_eq!(b[0], a[0] - 2.0, epsilon = 1e-13);
            assert_relative_eq!(b[3], a[3] - 2.0, epsilon = 1e-13);
            assert_relative_eq!(b[1], a[1], epsilon = 1e-13);
        }
    }

    #[test]
    fn stress_trace_matches_minus_d_pressure() {
        // trace(sigma) = 2 mu div(v) - d p with div(v) about zero;
        // slip-consistent lateral data keep the state smooth
        let (disc, scenario) = {
            let mut s = couette_scenario(4, 0.25, 1.0, 1e-5);
            s.wall_kind = crate::timestepping::WallKind::Couette { lateral_speed: Some(0.5) };
            let d = Discretization::build(&s).unwrap();
            (d, s)
        };
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, ..Default::default() }).unwrap();
        let state = traj.terminal();
        let sigma = compute_stress(&disc, state, 1.0);
        for cell in 0..disc.mesh.n_cells() {
            let verts = disc.mesh.cell(cell);
            for k in 0..3 {
                let tr = sigma.at_vertex(cell, k, 0, 0) + sigma.at_vertex(cell, k, 1, 1);
                let p = state.p[verts[k]];
                // P2 point divergence is only interpolation-small, not zero
                assert!((tr + 2.0 * p).abs() <= 1e-2, "trace {tr} vs -2p {}", -2.0 * p);
            }
        }
    }

    #[test]
    fn steady_state_has_vanishing_div_stress() {
        let (disc, mut scenario) = disc_for(6);
        scenario.t_final = 12.0;
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(
            &disc,
            &scenario,
            &ell,
            &RunConfig { quiet: true, steady_tol: Some(1e-10), ..Default::default() },
        )
        .unwrap();
        let n = traj.states.len();
        let div = momentum_residual_div_stress(&disc, &scenario, &traj.states[n - 2], &traj.states[n - 1]).unwrap();
        let m = disc.ops.mass.quad_form(&div, &div).sqrt();
        assert!(m <= 1e-7, "steady div sigma norm {m}");
    }

    #[test]
    fn constant_body_force_shift_moves_div_stress_exactly() {
        let (disc, scenario) = disc_for(4);
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let cfg = RunConfig { quiet: true, ..Default::default() };
        let traj0 = run_tresca(&disc, &scenario, &ell, &cfg).unwrap();
        let div0 = momentum_residual_div_stress(&disc, &scenario, &traj0.states[0], &traj0.states[1]).unwrap();
        // same states, shifted force: the formula must shift by -c exactly
        let mut shifted = scenario.clone();
        shifted.body_force = crate::timestepping::ForcingFn::constant(vec![0.25, 0.0]);
        let div1 = momentum_residual_div_stress(&disc, &shifted, &traj0.states[0], &traj0.states[1]).unwrap();
        for n in 0..disc.spaces.p2.n_nodes {
            let dx = div1[disc.spaces.dof(n, 0)] - div0[disc.spaces.dof(n, 0)];
            assert_relative_eq!(dx, -0.25, epsilon = 1e-9);
            let dy = div1[disc.spaces.dof(n, 1)] - div0[disc.spaces.dof(n, 1)];
            assert_relative_eq!(dy, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn non_consecutive_states_are_usage_error() {
        let (disc, scenario) = disc_for(3);
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, ..Default::default() }).unwrap();
        let err = momentum_residual_div_stress(&disc, &scenario, &traj.states[0], &traj.states[2]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn mollifier_plane_restriction_has_unit_mass() {
        for dim in [2usize, 3] {
            let m = Mollifier::new(0.3, dim).unwrap();
            // integrate the restriction over the wall plane by Gauss quadrature
            let gl = gauss_legendre_01(64);
            let mass = match dim {
                2 => {
                    // int_{-rho}^{rho} f(t, 0) dt
                    2.0 * m.rho * gl.iter().map(|&(x, w)| w * m.value(&[x * m.rho, 0.0])).sum::<f64>()
                }
                _ => {
                    // polar: 2 pi int_0^rho r f(r) dr
                    2.0 * std::f64::consts::PI
                        * m.rho
                        * m.rho
                        * gl.iter().map(|&(x, w)| w * x * m.value(&[x * m.rho, 0.0, 0.0])).sum::<f64>()
                }
            };
            assert_relative_eq!(mass, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn trace_of_zero_stress_is_zero_and_linear() {
        let (disc, scenario) = disc_for(6);
        let state = initial_state(&disc, &scenario).unwrap();
        let sigma = compute_stress(&disc, &state, 1.0);
        let zero_div = vec![0.0; disc.spaces.n_vel_dofs()];
        let m = Mollifier::new(0.2, 2).unwrap();
        let r1 = regularized_normal_trace(&disc, &sigma, &zero_div, &m, &[0.5], 8);
        // scale the stress by 3: R must scale exactly
        let mut scaled = sigma.clone();
        for v in scaled.data.iter_mut() {
            *v *= 3.0;
        }
        let r3 = regularized_normal_trace(&disc, &scaled, &zero_div, &m, &[0.5], 8);
        assert_relative_eq!(r3, 3.0 * r1, max_relative = 1e-12);
        // zero field maps to zero
        for v in scaled.data.iter_mut() {
            *v = 0.0;
        }
        assert_eq!(regularized_normal_trace(&disc, &scaled, &zero_div, &m, &[0.5], 8), 0.0);
    }

    #[test]
    fn constant_stress_row_recovers_its_normal_trace() {
        // sigma row = (a, b) constant with zero divergence:
        // R = boundary integral of (row . n) f = -b by the unit plane mass;
        // the oracle reduction per the divergence theorem is exact.
        let (disc, _) = disc_for(32);
        let d = 2;
        let nc = disc.mesh.n_cells();
        let mut data = vec![0.0; nc * 3 * d * d];
        for cell in 0..nc {
            for k in 0..3 {
                data[((cell * 3 + k) * d + 1) * d] = 0.7; // sigma_{21} = a
                data[((cell * 3 + k) * d + 1) * d + 1] = -0.4; // sigma_{22} = b
            }
        }
        let sigma = StressField { dim: d, data };
        let zero_div = vec![0.0; disc.spaces.n_vel_dofs()];
        let m = Mollifier::new(0.15, 2).unwrap();
        let r = regularized_normal_trace(&disc, &sigma, &zero_div, &m, &[0.5], 10);
        assert_relative_eq!(r, 0.4, max_relative = 1e-6);
    }

    #[test]
    fn smooth_stress_trace_converges_as_rho_shrinks() {
        // manufactured row sigma = (x^2 + y, x^2 + x y + 2 y^2 + 0.3 x):
        // gamma_n = -(row . e_2)|_{y=0} = -(x^2 + 0.3 x), curved so the
        // mollification error is visible at every radius
        let (disc, _) = disc_for(64);
        let d = 2;
        let nc = disc.mesh.n_cells();
        let mut data = vec![0.0; nc * 3 * d * d];
        let row = |x: f64, y: f64| (x * x + y, x * x + x * y + 2.0 * y * y + 0.3 * x);
        for cell in 0..nc {
            let verts = disc.mesh.cell(cell);
            for k in 0..3 {
                let p = disc.mesh.vertex(verts[k]);
                let (a, b) = row(p[0], p[1]);
                data[((cell * 3 + k) * d + 1) * d] = a;
                data[((cell * 3 + k) * d + 1) * d + 1] = b;
            }
        }
        let sigma = StressField { dim: d, data };
        // div of the row: 2x + (x + 4y) = 3x + 4y, as a P2 field in component 2
        let mut div_full = vec![0.0; disc.spaces.n_vel_dofs()];
        for n in 0..disc.spaces.p2.n_nodes {
            let x = disc.spaces.p2.coords[n * 2];
            let y = disc.spaces.p2.coords[n * 2 + 1];
            div_full[disc.spaces.dof(n, 1)] = 3.0 * x + 4.0 * y;
        }
        let x_prime = [0.5];
        let exact = -row(0.5, 0.0).1; // -sigma_{2,2}(x', 0)
        let mut errors = Vec::new();
        for rho in [0.2, 0.1, 0.05] {
            let m = Mollifier::new(rho, 2).unwrap();
            let r = regularized_normal_trace(&disc, &sigma, &div_full, &m, &x_prime, 10);
            errors.push((r - exact).abs());
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "errors not decreasing: {errors:?}");
        // continuity bound with the computed constant
        let m = Mollifier::new(0.1, 2).unwrap();
        let c = m.continuity_constant(&disc, &x_prime, 8);
        let r = regularized_normal_trace(&disc, &sigma, &div_full, &m, &x_prime, 10);
        let norm_sigma: f64 = {
            // ||row||_E by quadrature: row and its divergence are polynomials
            let rule = crate::quadrature::grundmann_moeller(2, 2);
            let mut total = 0.0;
            for cell in 0..disc.mesh.n_cells() {
                let verts = disc.mesh.cell(cell);
                let p0 = disc.mesh.vertex(verts[0]).to_vec();
                let p1 = disc.mesh.vertex(verts[1]).to_vec();
                let p2 = disc.mesh.vertex(verts[2]).to_vec();
                let vol_scale = disc.mesh.cell_volume(cell) * 2.0;
                for q in 0..rule.len() {
                    let xi = rule.point(q);
                    let x = p0[0] + xi[0] * (p1[0] - p0[0]) + xi[1] * (p2[0] - p0[0]);
                    let y = p0[1] + xi[0] * (p1[1] - p0[1]) + xi[1] * (p2[1] - p0[1]);
                    let (a, b) = row(x, y);
                    let dv = 3.0 * x + 4.0 * y;
                    total += rule.weights[q] * vol_scale * (a * a + b * b + dv * dv);
                }
            }
            total.sqrt()
        };
        assert!(r.abs() <= c * norm_sigma * (1.0 + 1e-8), "|R| = {} vs C ||sigma||_E = {}", r.abs(), c * norm_sigma);
    }

    #[test]
    fn trace_smoothness_along_the_wall() {
        // finite differences of R along x' stay bounded by the bump Lipschitz
        // scale times the stress norm
        let (disc, scenario) = disc_for(16);
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, ..Default::default() }).unwrap();
        let state = traj.terminal();
        let sigma = compute_stress(&disc, state, 1.0);
        let n = traj.states.len();
        let div = momentum_residual_div_stress(&disc, &scenario, &traj.states[n - 2], state).unwrap();
        let m = Mollifier::new(0.2, 2).unwrap();
        let xs = [0.3, 0.35, 0.4, 0.45, 0.5];
        let vals: Vec<f64> = xs.iter().map(|&x| regularized_normal_trace(&disc, &sigma, &div, &m, &[x], 8)).collect();
        for w in vals.windows(2) {
            assert!((w[1] - w[0]).abs() / 0.05 <= 50.0, "wall derivative too large: {vals:?}");
        }
    }

    #[test]
    fn history_csv_round_trips() {
        let (disc, scenario) = disc_for(3);
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, ..Default::default() }).unwrap();
        let m = Mollifier::new(default_rho(&disc), 2).unwrap();
        let hist = compute_trace_history(&disc, &scenario, &traj, &m, 6).unwrap();
        assert_eq!(hist.values.len(), traj.states.len());
        assert!(hist.values.iter().flatten().all(|&v| v >= 0.0));
        let mut buf = Vec::new();
        hist.write_csv(&disc.ops.bquad, &mut buf).unwrap();
        let back = BoundaryTraceHistory::read_csv(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(hist, back);
    }
}
