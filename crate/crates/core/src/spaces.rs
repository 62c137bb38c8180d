//! Mixed finite-element spaces and assembled discrete operators.
//!
//! Velocity: continuous piecewise quadratics (vector valued), with Dirichlet
//! zero on `Gamma1 + GammaL` and the wall-normal component eliminated on
//! `Gamma0` (the wall is flat so the constraint is exact dof elimination).
//! Pressure: continuous piecewise linears with a zero-mean constraint handled
//! by a scalar Lagrange multiplier. The pair is inf-sup stable.
//!
//! All operators are assembled over the unconstrained dof set in a fixed cell
//! order; constrained subsystems are extracted through [`DofMap`].

use std::collections::HashMap;

use crate::error::Error;
use crate::geometry::{BoundaryTag, Facet, Mesh};
use crate::quadrature::{gauss_legendre_01, grundmann_moeller, SimplexRule};
use crate::sparse::{dot, factorize, norm2, Csr};

/// Constraint state of one velocity degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofState {
    Free(usize),
    /// Homogeneous Dirichlet in the working (homogenized) space.
    Fixed,
}

/// Boundary class of a P2 node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    /// On `Gamma0` only: normal component fixed, tangential free.
    SlipWall,
    /// On `Gamma1` or `GammaL`: all components fixed.
    Dirichlet,
}

/// Scalar P2 node set: mesh vertices plus edge midpoints.
#[derive(Debug, Clone)]
pub struct P2Nodes {
    pub coords: Vec<f64>,
    /// Per cell, the (d+1)(d+2)/2 node ids: vertices then edge midpoints in
    /// lexicographic local edge order.
    pub cell_nodes: Vec<usize>,
    pub n_nodes: usize,
    pub n_loc: usize,
    /// Edge midpoint ids keyed by sorted vertex pair.
    edges: HashMap<(usize, usize), usize>,
}

/// Velocity dof bookkeeping.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub state: Vec<DofState>,
    pub n_free: usize,
    pub full_to_free: Vec<Option<usize>>,
    pub free_to_full: Vec<usize>,
}

impl DofMap {
    pub fn restrict_vec(&self, full: &[f64]) -> Vec<f64> {
        self.free_to_full.iter().map(|&i| full[i]).collect()
    }

    pub fn extend_vec(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state.len()];
        for (k, &i) in self.free_to_full.iter().enumerate() {
            out[i] = free[k];
        }
        out
    }

    /// Restricts a full-dof square matrix to the free-free block.
    pub fn restrict_square(&self, m: &Csr) -> Csr {
        m.restrict(&self.full_to_free, &self.full_to_free, self.n_free, self.n_free)
    }

    /// Restricts the columns of a (rows x full-dofs) matrix to free dofs.
    pub fn restrict_cols(&self, m: &Csr) -> Csr {
        let rows: Vec<Option<usize>> = (0..m.nrows).map(Some).collect();
        m.restrict(&rows, &self.full_to_free, m.nrows, self.n_free)
    }
}

/// The Taylor-Hood velocity/pressure pair on a mesh.
#[derive(Debug, Clone)]
pub struct FunctionSpacePair {
    pub dim: usize,
    pub p2: P2Nodes,
    pub node_class: Vec<NodeClass>,
    pub vel: DofMap,
    /// Pressure dofs are the mesh vertices.
    pub n_pressure: usize,
}

impl FunctionSpacePair {
    pub fn n_vel_dofs(&self) -> usize {
        self.p2.n_nodes * self.dim
    }

    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.dim + comp
    }

    /// Interpolates an analytic vector field at the P2 nodes.
    pub fn interpolate(&self, f: impl Fn(&[f64], &mut [f64])) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; self.n_vel_dofs()];
        let mut val = vec![0.0; d];
        for n in 0..self.p2.n_nodes {
            f(&self.p2.coords[n * d..(n + 1) * d], &mut val);
            for c in 0..d {
                out[self.dof(n, c)] = val[c];
            }
        }
        out
    }

    /// P2 node ids of a boundary facet: facet vertices, then midpoints of the
    /// facet edges in lexicographic local order.
    pub fn facet_nodes(&self, facet: &Facet) -> Vec<usize> {
        let mut nodes = facet.vertices.clone();
        for &(a, b) in local_edges(self.dim - 1) {
            let key = sorted_pair(facet.vertices[a], facet.vertices[b]);
            nodes.push(self.p2.edges[&key]);
        }
        nodes
    }
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Local vertex pairs forming the edges of a d-simplex.
pub(crate) fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &[(0, 1)],
        2 => &[(0, 1), (0, 2), (1, 2)],
        3 => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        _ => unreachable!(),
    }
}

/// Values of the scalar P2 basis at a reference point.
pub(crate) fn p2_shape(dim: usize, xi: &[f64], out: &mut [f64]) {
    let mut lam = [0.0f64; 4];
    lam[0] = 1.0 - xi.iter().sum::<f64>();
    for (i, &x) in xi.iter().enumerate() {
        lam[i + 1] = x;
    }
    for i in 0..=dim {
        out[i] = lam[i] * (2.0 * lam[i] - 1.0);
    }
    for (k, &(a, b)) in local_edges(dim).iter().enumerate() {
        out[dim + 1 + k] = 4.0 * lam[a] * lam[b];
    }
}

/// Reference gradients of the scalar P2 basis (`n_loc x dim`, row major).
pub(crate) fn p2_grad_ref(dim: usize, xi: &[f64], out: &mut [f64]) {
    let mut lam = [0.0f64; 4];
    lam[0] = 1.0 - xi.iter().sum::<f64>();
    for (i, &x) in xi.iter().enumerate() {
        lam[i + 1] = x;
    }
    // gradient of barycentric coordinate i w.r.t. reference coords
    let dlam = |i: usize, k: usize| -> f64 {
        if i == 0 {
            -1.0
        } else if i - 1 == k {
            1.0
        } else {
            0.0
        }
    };
    let n_loc = (dim + 1) * (dim + 2) / 2;
    for v in out.iter_mut().take(n_loc * dim) {
        *v = 0.0;
    }
    for i in 0..=dim {
        for k in 0..dim {
            out[i * dim + k] = (4.0 * lam[i] - 1.0) * dlam(i, k);
        }
    }
    for (e, &(a, b)) in local_edges(dim).iter().enumerate() {
        for k in 0..dim {
            out[(dim + 1 + e) * dim + k] = 4.0 * (lam[a] * dlam(b, k) + lam[b] * dlam(a, k));
        }
    }
}

/// Builds the constrained Taylor-Hood pair on a mesh.
///
/// Fails with a configuration error if the mesh carries no `Gamma0` facet
/// (there would be no friction surface).
pub fn build_spaces(mesh: &Mesh) -> Result<FunctionSpacePair, Error> {
    if !mesh.boundary_facets.iter().any(|f| f.tag == BoundaryTag::Gamma0) {
        return Err(Error::Config("mesh has no Gamma0 facet: friction surface absent".into()));
    }
    let d = mesh.dim;
    let n_loc = (d + 1) * (d + 2) / 2;
    let nv = mesh.n_vertices();
    let mut coords = mesh.vertices.clone();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * n_loc);
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        cell_nodes.extend_from_slice(cell);
        for &(a, b) in local_edges(d) {
            let key = sorted_pair(cell[a], cell[b]);
            let next_id = nv + edges.len();
            let id = *edges.entry(key).or_insert(next_id);
            if id == next_id && coords.len() == id * d {
                let pa = mesh.vertex(key.0);
                let pb = mesh.vertex(key.1);
                for k in 0..d {
                    coords.push(0.5 * (pa[k] + pb[k]));
                }
            }
            cell_nodes.push(id);
        }
    }
    let n_nodes = coords.len() / d;
    let p2 = P2Nodes { coords, cell_nodes, n_nodes, n_loc, edges };

    // classify nodes by the facets they lie on; Dirichlet wins over slip
    let mut class = vec![NodeClass::Interior; n_nodes];
    let spaces_tmp = FunctionSpacePair {
        dim: d,
        p2,
        node_class: Vec::new(),
        vel: DofMap { state: Vec::new(), n_free: 0, full_to_free: Vec::new(), free_to_full: Vec::new() },
        n_pressure: nv,
    };
    for f in &mesh.boundary_facets {
        for n in spaces_tmp.facet_nodes(f) {
            class[n] = match (class[n], f.tag) {
                (_, BoundaryTag::Gamma1) | (_, BoundaryTag::GammaL) => NodeClass::Dirichlet,
                (NodeClass::Dirichlet, _) => NodeClass::Dirichlet,
                (_, BoundaryTag::Gamma0) => NodeClass::SlipWall,
            };
        }
    }

    let mut state = Vec::with_capacity(n_nodes * d);
    let mut full_to_free = Vec::with_capacity(n_nodes * d);
    let mut free_to_full = Vec::new();
    let mut n_free = 0;
    for n in 0..n_nodes {
        for c in 0..d {
            let fixed = match class[n] {
                NodeClass::Interior => false,
                NodeClass::SlipWall => c == d - 1,
                NodeClass::Dirichlet => true,
            };
            if fixed {
                state.push(DofState::Fixed);
                full_to_free.push(None);
            } else {
                state.push(DofState::Free(n_free));
                full_to_free.push(Some(n_free));
                free_to_full.push(n * d + c);
                n_free += 1;
            }
        }
    }
    Ok(FunctionSpacePair {
        vel: DofMap { state, n_free, full_to_free, free_to_full },
        node_class: class,
        ..spaces_tmp
    })
}

/// Quadrature layout on the slip wall `Gamma0`.
///
/// Thresholds, slips and tractions all live at these points; the trace matrix
/// maps full velocity dofs to tangential values here.
#[derive(Debug, Clone)]
pub struct BoundaryQuad {
    /// Number of quadrature points.
    pub n_qp: usize,
    /// Tangential dimension (d - 1).
    pub t_dim: usize,
    /// Wall coordinates x' of each point, flat (`n_qp * t_dim`).
    pub x_prime: Vec<f64>,
    /// Quadrature weights (include the facet measures; they sum to meas Gamma0).
    pub weights: Vec<f64>,
    /// Adjacent cell of each point.
    pub cells: Vec<usize>,
    /// Index of the owning facet in `mesh.boundary_facets`.
    pub facets: Vec<usize>,
    /// Tangential trace: (n_qp * t_dim) x (full velocity dofs).
    pub trace: Csr,
}

/// Assembled discrete operators over the unconstrained dof set.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub mu: f64,
    /// Velocity mass matrix (vector L2 inner product).
    pub mass: Csr,
    /// Viscous matrix for `a(u, v) = int 2 mu D(u):D(v)`.
    pub visc: Csr,
    /// H1-seminorm matrix (gradient-gradient, per component).
    pub h1: Csr,
    /// Divergence operator: pressure rows, velocity columns.
    pub div: Csr,
    /// Pressure mass matrix (P1 x P1).
    pub pmass: Csr,
    /// Pressure means: `m_q = int psi_q`.
    pub mean_pressure: Vec<f64>,
    /// Gamma0 quadrature and tangential trace.
    pub bquad: BoundaryQuad,
    /// Gamma0 mass matrix for scalar P2 trace fields.
    pub boundary_mass: Csr,
}

impl DiscreteOperators {
    /// `sqrt(u^T M u)`
    pub fn norm_l2(&self, u: &[f64]) -> f64 {
        self.mass.quad_form(u, u).max(0.0).sqrt()
    }

    /// `sqrt(u^T (M + K) u)`
    pub fn norm_h1(&self, u: &[f64]) -> f64 {
        (self.mass.quad_form(u, u) + self.h1.quad_form(u, u)).max(0.0).sqrt()
    }
}

struct CellGeometry {
    inv_j_t: [[f64; 3]; 3],
    det: f64,
}

fn cell_geometry(mesh: &Mesh, c: usize) -> CellGeometry {
    let d = mesh.dim;
    let cell = mesh.cell(c);
    let p0 = mesh.vertex(cell[0]);
    let mut j = [[0.0f64; 3]; 3];
    for col in 0..d {
        let p = mesh.vertex(cell[col + 1]);
        for row in 0..d {
            j[row][col] = p[row] - p0[row];
        }
    }
    let (inv, det) = match d {
        2 => {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let inv = [[j[1][1] / det, -j[0][1] / det, 0.0], [-j[1][0] / det, j[0][0] / det, 0.0], [0.0; 3]];
            (inv, det)
        }
        3 => {
            let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
            let mut inv = [[0.0f64; 3]; 3];
            inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det;
            inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
            inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
            inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det;
            inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
            inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
            inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det;
            inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
            inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
            // transpose in place to get J^{-T}
            for r in 0..3 {
                for cc in (r + 1)..3 {
                    let t = inv[r][cc];
                    inv[r][cc] = inv[cc][r];
                    inv[cc][r] = t;
                }
            }
            (inv, det)
        }
        _ => unreachable!(),
    };
    // 2x2 inverse above is already J^{-1}; transpose it
    if d == 2 {
        let mut inv = inv;
        let t = inv[0][1];
        inv[0][1] = inv[1][0];
        inv[1][0] = t;
        return CellGeometry { inv_j_t: inv, det };
    }
    CellGeometry { inv_j_t: inv, det }
}

/// Physical gradients of the P2 basis at a reference point.
fn physical_grads(dim: usize, geo: &CellGeometry, xi: &[f64], grads: &mut [f64]) {
    let n_loc = (dim + 1) * (dim + 2) / 2;
    let mut gref = [0.0f64; 30];
    p2_grad_ref(dim, xi, &mut gref[..n_loc * dim]);
    for k in 0..n_loc {
        for r in 0..dim {
            let mut acc = 0.0;
            for s in 0..dim {
                acc += geo.inv_j_t[r][s] * gref[k * dim + s];
            }
            grads[k * dim + r] = acc;
        }
    }
}

/// Assembles mass, viscous, H1, divergence and boundary operators.
///
/// Doubling `mu` exactly doubles the viscous matrix; nothing else depends on it.
pub fn assemble_operators(mesh: &Mesh, spaces: &FunctionSpacePair, mu: f64) -> Result<DiscreteOperators, Error> {
    if !(mu > 0.0) {
        return Err(Error::Data(format!("viscosity must be positive, got {mu}")));
    }
    let d = mesh.dim;
    let n_loc = spaces.p2.n_loc;
    let ndof = spaces.n_vel_dofs();
    let np = spaces.n_pressure;
    let rule = grundmann_moeller(d, 2);

    let mut t_mass = Vec::new();
    let mut t_visc = Vec::new();
    let mut t_h1 = Vec::new();
    let mut t_div = Vec::new();
    let mut t_pmass = Vec::new();
    let mut mean_pressure = vec![0.0; np];

    let mut shape = vec![0.0f64; n_loc];
    let mut grads = vec![0.0f64; n_loc * d];
    for c in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, c);
        let jac = geo.det.abs();
        let nodes = &spaces.p2.cell_nodes[c * n_loc..(c + 1) * n_loc];
        let cell = mesh.cell(c);
        let mut m_loc = vec![0.0f64; n_loc * n_loc];
        let mut k_loc = vec![0.0f64; n_loc * n_loc];
        // per-component-pair viscous blocks and divergence rows
        let mut a_loc = vec![0.0f64; n_loc * n_loc * d * d];
        let mut b_loc = vec![0.0f64; (d + 1) * n_loc * d];
        let mut pm_loc = vec![0.0f64; (d + 1) * (d + 1)];
        for q in 0..rule.len() {
            let xi = rule.point(q);
            let w = rule.weights[q] * jac;
            p2_shape(d, xi, &mut shape);
            physical_grads(d, &geo, xi, &mut grads);
            // P1 basis = barycentric coordinates
            let mut lam = [0.0f64; 4];
            lam[0] = 1.0 - xi.iter().sum::<f64>();
            for (i, &x) in xi.iter().enumerate() {
                lam[i + 1] = x;
            }
            for k in 0..n_loc {
                for l in 0..n_loc {
                    let gkl: f64 = (0..d).map(|r| grads[k * d + r] * grads[l * d + r]).sum();
                    m_loc[k * n_loc + l] += w * shape[k] * shape[l];
                    k_loc[k * n_loc + l] += w * gkl;
                    for a in 0..d {
                        for b in 0..d {
                            // 2 mu D(phi_k e_a) : D(phi_l e_b)
                            let mut v = grads[k * d + b] * grads[l * d + a];
                            if a == b {
                                v += gkl;
                            }
                            a_loc[((k * n_loc + l) * d + a) * d + b] += w * mu * v;
                        }
                    }
                }
            }
            for vq in 0..=d {
                for k in 0..n_loc {
                    for c2 in 0..d {
                        b_loc[(vq * n_loc + k) * d + c2] += w * lam[vq] * grads[k * d + c2];
                    }
                }
                for vl in 0..=d {
                    pm_loc[vq * (d + 1) + vl] += w * lam[vq] * lam[vl];
                }
                mean_pressure[cell[vq]] += w * lam[vq];
            }
        }
        for k in 0..n_loc {
            for l in 0..n_loc {
                for a in 0..d {
                    let gk = spaces.dof(nodes[k], a);
                    let gl = spaces.dof(nodes[l], a);
                    t_mass.push((gk, gl, m_loc[k * n_loc + l]));
                    t_h1.push((gk, gl, k_loc[k * n_loc + l]));
                    for b in 0..d {
                        t_visc.push((gk, spaces.dof(nodes[l], b), a_loc[((k * n_loc + l) * d + a) * d + b]));
                    }
                }
            }
        }
        for vq in 0..=d {
            for k in 0..n_loc {
                for c2 in 0..d {
                    t_div.push((cell[vq], spaces.dof(nodes[k], c2), b_loc[(vq * n_loc + k) * d + c2]));
                }
            }
            for vl in 0..=d {
                t_pmass.push((cell[vq], cell[vl], pm_loc[vq * (d + 1) + vl]));
            }
        }
    }

    let bquad = build_boundary_quad(mesh, spaces)?;
    let boundary_mass = build_boundary_mass(mesh, spaces);

    Ok(DiscreteOperators {
        mu,
        mass: Csr::from_triplets(ndof, ndof, t_mass),
        visc: Csr::from_triplets(ndof, ndof, t_visc),
        h1: Csr::from_triplets(ndof, ndof, t_h1),
        div: Csr::from_triplets(np, ndof, t_div),
        pmass: Csr::from_triplets(np, np, t_pmass),
        mean_pressure,
        bquad,
        boundary_mass,
    })
}

/// Gauss rule on one reference facet: 3-point Gauss-Legendre on edges (d = 2),
/// a degree-5 simplex rule on triangles (d = 3).
fn facet_rule(dim: usize) -> SimplexRule {
    match dim {
        2 => {
            let gl = gauss_legendre_01(3);
            SimplexRule { dim: 1, points: gl.iter().map(|&(x, _)| x).collect(), weights: gl.iter().map(|&(_, w)| w).collect() }
        }
        3 => grundmann_moeller(2, 2),
        _ => unreachable!(),
    }
}

fn build_boundary_quad(mesh: &Mesh, spaces: &FunctionSpacePair) -> Result<BoundaryQuad, Error> {
    let d = mesh.dim;
    let t_dim = d - 1;
    let fd = d - 1; // facet intrinsic dimension
    let rule = facet_rule(d);
    let ref_vol: f64 = rule.weights.iter().sum();
    let n_floc = (fd + 1) * (fd + 2) / 2;
    let mut x_prime = Vec::new();
    let mut weights = Vec::new();
    let mut cells = Vec::new();
    let mut facets = Vec::new();
    let mut trace_t = Vec::new();
    let mut n_qp = 0;
    let mut shape = vec![0.0f64; n_floc];
    for (fi, f) in mesh.boundary_facets.iter().enumerate() {
        if f.tag != BoundaryTag::Gamma0 {
            continue;
        }
        let fnodes = spaces.facet_nodes(f);
        let measure = mesh.facet_measure(f);
        for q in 0..rule.len() {
            let xi = rule.point(q);
            p2_shape(fd, xi, &mut shape);
            // physical wall point (x_d = 0 on Gamma0)
            let mut x = vec![0.0f64; d];
            for (k, &n) in fnodes.iter().enumerate() {
                let p = &spaces.p2.coords[n * d..(n + 1) * d];
                for r in 0..d {
                    x[r] += shape[k] * p[r];
                }
            }
            x_prime.extend_from_slice(&x[..t_dim]);
            weights.push(rule.weights[q] * measure / ref_vol);
            cells.push(f.cell);
            facets.push(fi);
            for tc in 0..t_dim {
                let row = n_qp * t_dim + tc;
                for (k, &n) in fnodes.iter().enumerate() {
                    trace_t.push((row, spaces.dof(n, tc), shape[k]));
                }
            }
            n_qp += 1;
        }
    }
    Ok(BoundaryQuad {
        n_qp,
        t_dim,
        x_prime,
        weights,
        cells,
        facets,
        trace: Csr::from_triplets(n_qp * t_dim, spaces.n_vel_dofs(), trace_t),
    })
}

fn build_boundary_mass(mesh: &Mesh, spaces: &FunctionSpacePair) -> Csr {
    let d = mesh.dim;
    let fd = d - 1;
    let rule = facet_rule(d);
    let ref_vol: f64 = rule.weights.iter().sum();
    let n_floc = (fd + 1) * (fd + 2) / 2;
    let mut t = Vec::new();
    let mut shape = vec![0.0f64; n_floc];
    for f in mesh.boundary_facets.iter().filter(|f| f.tag == BoundaryTag::Gamma0) {
        let fnodes = spaces.facet_nodes(f);
        let measure = mesh.facet_measure(f);
        for q in 0..rule.len() {
            let xi = rule.point(q);
            p2_shape(fd, xi, &mut shape);
            let w = rule.weights[q] * measure / ref_vol;
            for (k, &nk) in fnodes.iter().enumerate() {
                for (l, &nl) in fnodes.iter().enumerate() {
                    t.push((nk, nl, w * shape[k] * shape[l]));
                }
            }
        }
    }
    Csr::from_triplets(spaces.p2.n_nodes, spaces.p2.n_nodes, t)
}

/// Wall and lateral boundary data `g`.
///
/// `g = (s, 0, ...)` tangentially on `Gamma0`, zero on `Gamma1`, and the
/// selected profile on the lateral boundary.
#[derive(Debug, Clone)]
pub struct WallData {
    pub s: f64,
    pub profile: WallProfile,
    /// Height function used by the Couette profile.
    pub height: crate::geometry::HeightFn,
}

#[derive(Debug, Clone)]
pub enum WallProfile {
    /// Flux-balanced linear shear on the lateral boundary:
    /// `g_1 = q (1 - x_d/h) h_ref/h` with `q` the lateral wall-level speed.
    /// `q = s` pins the fluid to the stick profile; setting `q` to the
    /// expected slip speed emulates an infinitely long channel.
    Couette { h_ref: f64, lateral_speed: f64 },
    /// Zero lateral data (only meaningful together with `s = 0`).
    Zero,
    /// Uniform inflow on the lateral side `x_1 = side`; carries net flux and
    /// is rejected by the compatibility check unless zero.
    UniformInflow { q: f64, side: f64 },
}

impl WallData {
    /// Evaluates the boundary datum at a point of the given class.
    pub fn eval(&self, x: &[f64], class: NodeClass, out: &mut [f64]) {
        let d = x.len();
        for o in out.iter_mut() {
            *o = 0.0;
        }
        match class {
            NodeClass::SlipWall => {
                out[0] = self.s;
            }
            NodeClass::Dirichlet => match self.profile {
                WallProfile::Couette { h_ref, lateral_speed } => {
                    let h = self.height.eval(&x[..d - 1]);
                    let v = lateral_speed * (1.0 - x[d - 1] / h) * h_ref / h;
                    // zero on the top surface, shear profile on the sides
                    if (x[d - 1] - h).abs() > 1e-12 * h.abs() {
                        out[0] = v;
                    }
                }
                WallProfile::Zero => {}
                WallProfile::UniformInflow { q, side } => {
                    let h = self.height.eval(&x[..d - 1]);
                    if (x[0] - side).abs() <= 1e-12 && (x[d - 1] - h).abs() > 1e-12 * h.abs() && x[d - 1].abs() > 1e-12 {
                        out[0] = q;
                    }
                }
            },
            NodeClass::Interior => {}
        }
    }
}

/// Divergence-free lifting of the boundary data into the interior.
#[derive(Debug, Clone)]
pub struct LiftingField {
    /// Full-dof coefficient vector.
    pub g0: Vec<f64>,
    pub norm_l2: f64,
    pub norm_h1: f64,
    /// `||B g0||` after the Stokes solve.
    pub div_residual: f64,
}

/// Builds the lifting by an auxiliary steady Stokes solve with Dirichlet data
/// `g` on the whole boundary (interior test functions).
///
/// Fails with a data error if the boundary flux of `g` exceeds
/// `1e-10 * ||g||_{L2(boundary)}`.
pub fn build_lifting(
    mesh: &Mesh,
    spaces: &FunctionSpacePair,
    wall: &WallData,
    ops: &DiscreteOperators,
) -> Result<LiftingField, Error> {
    let d = spaces.dim;
    let ndof = spaces.n_vel_dofs();
    let np = spaces.n_pressure;

    // interpolate g at all boundary nodes
    let mut g_full = vec![0.0; ndof];
    let mut val = vec![0.0; d];
    for n in 0..spaces.p2.n_nodes {
        let class = spaces.node_class[n];
        if class == NodeClass::Interior {
            continue;
        }
        wall.eval(&spaces.p2.coords[n * d..(n + 1) * d], class, &mut val);
        for c in 0..d {
            g_full[spaces.dof(n, c)] = val[c];
        }
    }

    // compatibility: net boundary flux of the interpolated datum
    let (flux, gnorm) = boundary_flux(mesh, spaces, &g_full);
    if flux.abs() > 1e-10 * gnorm.max(1e-30) && gnorm > 0.0 {
        return Err(Error::Data(format!(
            "incompatible boundary data: net flux {flux:.3e} exceeds 1e-10 * ||g|| = {:.3e}",
            1e-10 * gnorm
        )));
    }

    if gnorm == 0.0 {
        return Ok(LiftingField { g0: g_full, norm_l2: 0.0, norm_h1: 0.0, div_residual: 0.0 });
    }

    // interior dof map for the auxiliary solve
    let mut full_to_int = vec![None; ndof];
    let mut int_to_full = Vec::new();
    for n in 0..spaces.p2.n_nodes {
        if spaces.node_class[n] == NodeClass::Interior {
            for c in 0..d {
                full_to_int[spaces.dof(n, c)] = Some(int_to_full.len());
                int_to_full.push(spaces.dof(n, c));
            }
        }
    }
    let ni = int_to_full.len();
    let n_sys = ni + np + 1;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (r, c, v) in ops.visc.triplets() {
        if let (Some(ri), Some(ci)) = (full_to_int[r], full_to_int[c]) {
            trip.push((ri, ci, v));
        }
    }
    for (q, c, v) in ops.div.triplets() {
        if let Some(ci) = full_to_int[c] {
            trip.push((ni + q, ci, -v));
            trip.push((ci, ni + q, -v));
        }
    }
    for q in 0..np {
        trip.push((ni + q, ni + np, ops.mean_pressure[q]));
        trip.push((ni + np, ni + q, ops.mean_pressure[q]));
    }
    let mut rhs = vec![0.0; n_sys];
    let ag = ops.visc.mul(&g_full);
    for (i, &full) in int_to_full.iter().enumerate() {
        rhs[i] = -ag[full];
    }
    let bg = ops.div.mul(&g_full);
    for q in 0..np {
        rhs[ni + q] = bg[q];
    }
    let fact = factorize(n_sys, &trip, None)?;
    let sol = fact.solve(&rhs);
    let mut g0 = g_full;
    for (i, &full) in int_to_full.iter().enumerate() {
        g0[full] = sol[i];
    }
    let div_residual = norm2(&ops.div.mul(&g0));
    let norm_l2 = ops.norm_l2(&g0);
    let norm_h1 = ops.norm_h1(&g0);
    Ok(LiftingField { g0, norm_l2, norm_h1, div_residual })
}

/// Net flux and L2 norm of a P2 boundary field over the whole boundary.
fn boundary_flux(mesh: &Mesh, spaces: &FunctionSpacePair, g: &[f64]) -> (f64, f64) {
    let d = mesh.dim;
    let fd = d - 1;
    let rule = facet_rule(d);
    let ref_vol: f64 = rule.weights.iter().sum();
    let n_floc = (fd + 1) * (fd + 2) / 2;
    let mut shape = vec![0.0f64; n_floc];
    let mut flux = 0.0;
    let mut norm_sq = 0.0;
    for f in &mesh.boundary_facets {
        let fnodes = spaces.facet_nodes(f);
        let measure = mesh.facet_measure(f);
        let normal = crate::geometry::facet_normal(mesh, f);
        for q in 0..rule.len() {
            let xi = rule.point(q);
            p2_shape(fd, xi, &mut shape);
            let w = rule.weights[q] * measure / ref_vol;
            let mut gval = vec![0.0f64; d];
            for (k, &n) in fnodes.iter().enumerate() {
                for c in 0..d {
                    gval[c] += shape[k] * g[spaces.dof(n, c)];
                }
            }
            flux += w * dot(&gval, &normal);
            norm_sq += w * dot(&gval, &gval);
        }
    }
    (flux, norm_sq.sqrt())
}

/// Smallest generalized eigenvalue of `(A, M + K)` on the free dofs, i.e. the
/// discrete Korn coercivity constant used in every energy budget.
pub fn korn_coercivity_estimate(spaces: &FunctionSpacePair, ops: &DiscreteOperators) -> Result<f64, Error> {
    let a = spaces.vel.restrict_square(&ops.visc);
    let mut mk = spaces.vel.restrict_square(&ops.mass);
    let k = spaces.vel.restrict_square(&ops.h1);
    // mk += k (same pattern is not guaranteed; merge via triplets)
    let mut trip: Vec<(usize, usize, f64)> = mk.triplets().collect();
    trip.extend(k.triplets());
    mk = Csr::from_triplets(a.nrows, a.ncols, trip);

    let fact = factorize(a.nrows, &a.triplets().collect::<Vec<_>>(), None)?;
    // Lanczos on C = A^{-1}(M + K), self-adjoint in the A-inner product;
    // the largest Ritz value approximates 1/alpha
    let n = a.nrows;
    let steps = 90.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut v: Vec<f64> = (0..n).map(|i| deterministic_noise(i as u64)).collect();
    let nrm = a.quad_form(&v, &v).sqrt();
    for x in &mut v {
        *x /= nrm;
    }
    for j in 0..steps {
        basis.push(v.clone());
        if j + 1 == steps {
            break;
        }
        let mut w = fact.solve(&mk.mul(&v));
        let pre_norm = a.quad_form(&w, &w).max(0.0).sqrt();
        // two passes of Gram-Schmidt in the A-inner product
        for _ in 0..2 {
            for b in &basis {
                let proj = a.quad_form(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let beta = a.quad_form(&w, &w).max(0.0).sqrt();
        // Krylov space exhausted once no independent direction remains
        if beta < 1e-7 * pre_norm.max(1e-300) {
            break;
        }
        v = w.iter().map(|x| x / beta).collect();
    }
    // Rayleigh-Ritz for C = A^{-1}(M+K) on span(V): solve the small
    // generalized problem (V^T (M+K) V) y = theta (V^T A V) y, which stays
    // correct even if V drifts from exact A-orthonormality
    let m = basis.len();
    let mkv: Vec<Vec<f64>> = basis.iter().map(|b| mk.mul(b)).collect();
    let av: Vec<Vec<f64>> = basis.iter().map(|b| a.mul(b)).collect();
    let mut h = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut g = nalgebra::DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for k in j..m {
            let hv = 0.5 * (dot(&basis[j], &mkv[k]) + dot(&basis[k], &mkv[j]));
            let gv = 0.5 * (dot(&basis[j], &av[k]) + dot(&basis[k], &av[j]));
            h[(j, k)] = hv;
            h[(k, j)] = hv;
            g[(j, k)] = gv;
            g[(k, j)] = gv;
        }
    }
    let chol = nalgebra::Cholesky::new(g).ok_or_else(|| Error::Eigen("Ritz Gram matrix not positive definite".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::Eigen("singular Ritz Gram factor".into()))?;
    let sym = &l_inv * h * l_inv.transpose();
    let eig = nalgebra::SymmetricEigen::new(sym);
    let theta = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if theta > 0.0 {
        Ok(1.0 / theta)
    } else {
        Err(Error::Eigen("Korn Rayleigh-Ritz produced no positive eigenvalue".into()))
    }
}

/// Discrete inf-sup constant of the pair: square root of the smallest
/// non-zero eigenvalue of the pressure Schur complement
/// `B (M + K)^{-1} B^T q = lambda M_p q`.
///
/// Forms the Schur complement densely, so intended for desk-scale meshes.
pub fn inf_sup_estimate(spaces: &FunctionSpacePair, ops: &DiscreteOperators) -> Result<f64, Error> {
    let b = spaces.vel.restrict_cols(&ops.div);
    let mut mk_t: Vec<(usize, usize, f64)> = spaces.vel.restrict_square(&ops.mass).triplets().collect();
    mk_t.extend(spaces.vel.restrict_square(&ops.h1).triplets());
    let n = spaces.vel.n_free;
    let fact = factorize(n, &mk_t, None)?;
    let np = spaces.n_pressure;
    let mut s = nalgebra::DMatrix::<f64>::zeros(np, np);
    let mut e = vec![0.0; np];
    for q in 0..np {
        e[q] = 1.0;
        let btq = b.tr_mul(&e);
        e[q] = 0.0;
        let y = fact.solve(&btq);
        let col = b.mul(&y);
        for r in 0..np {
            s[(r, q)] = col[r];
        }
    }
    // symmetrize rounding noise
    for r in 0..np {
        for c in (r + 1)..np {
            let v = 0.5 * (s[(r, c)] + s[(c, r)]);
            s[(r, c)] = v;
            s[(c, r)] = v;
        }
    }
    let mut mp = nalgebra::DMatrix::<f64>::zeros(np, np);
    for (r, c, v) in ops.pmass.triplets() {
        mp[(r, c)] = v;
    }
    let chol = nalgebra::Cholesky::new(mp).ok_or_else(|| Error::Eigen("pressure mass not positive definite".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::Eigen("singular pressure Cholesky factor".into()))?;
    let sym = &l_inv * s * l_inv.transpose();
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    let max = vals.last().copied().unwrap_or(0.0);
    // the constant-pressure mode sits at zero; take the smallest above noise
    let beta_sq = vals
        .iter()
        .copied()
        .find(|&v| v > 1e-10 * max.max(1.0))
        .ok_or_else(|| Error::Eigen("no non-zero Schur eigenvalue found".into()))?;
    Ok(beta_sq.sqrt())
}

/// Deterministic pseudo-random values in [-1, 1] (splitmix64).
pub(crate) fn deterministic_noise(i: u64) -> f64 {
    let mut z = i.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, DomainSpec, HeightFn};
    use approx::assert_relative_eq;

    fn unit_channel(n: usize) -> (Mesh, FunctionSpacePair) {
        let spec = DomainSpec {
            dim: 2,
            omega: vec![[0.0, 1.0]],
            height: HeightFn::constant(1.0),
            h_min: 1.0,
            h_max: 1.0,
            lipschitz: 0.0,
        };
        let mesh = build_mesh(&spec, &[n, n]).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        (mesh, spaces)
    }

    #[test]
    fn gamma0_nodes_keep_only_tangential_dofs() {
        let (mesh, spaces) = unit_channel(4);
        for n in 0..spaces.p2.n_nodes {
            let y = spaces.p2.coords[n * 2 + 1];
            let x = spaces.p2.coords[n * 2];
            if y == 0.0 && x > 0.0 && x < 1.0 {
                assert_eq!(spaces.node_class[n], NodeClass::SlipWall);
                assert!(matches!(spaces.vel.state[spaces.dof(n, 0)], DofState::Free(_)));
                assert_eq!(spaces.vel.state[spaces.dof(n, 1)], DofState::Fixed);
            }
            if y == 1.0 || x == 0.0 || x == 1.0 {
                assert_eq!(spaces.node_class[n], NodeClass::Dirichlet);
            }
        }
        drop(mesh);
    }

    #[test]
    fn mesh_without_gamma0_is_config_error() {
        let (mut mesh, _) = unit_channel(2);
        for f in &mut mesh.boundary_facets {
            if f.tag == BoundaryTag::Gamma0 {
                f.tag = BoundaryTag::Gamma1;
            }
        }
        assert!(matches!(build_spaces(&mesh), Err(Error::Config(_))));
    }

    #[test]
    fn shear_field_energy_matches_hand_integration() {
        // u = (x_d, 0): d_12 = 1/2, a(u, u) = mu * meas(Omega)
        let (mesh, spaces) = unit_channel(4);
        for mu in [1.0, 3.5] {
            let ops = assemble_operators(&mesh, &spaces, mu).unwrap();
            let u = spaces.interpolate(|x, out| {
                out[0] = x[1];
                out[1] = 0.0;
            });
            assert_relative_eq!(ops.visc.quad_form(&u, &u), mu, max_relative = 1e-12);
        }
    }

    #[test]
    fn translation_has_zero_strain_energy() {
        let (mesh, spaces) = unit_channel(3);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let u = spaces.interpolate(|_, out| {
            out[0] = 0.7;
            out[1] = -0.3;
        });
        let e = ops.visc.quad_form(&u, &u);
        assert!(e.abs() <= 1e-12, "translation energy {e}");
    }

    #[test]
    fn viscous_matrix_is_linear_in_mu() {
        let (mesh, spaces) = unit_channel(3);
        let a1 = assemble_operators(&mesh, &spaces, 1.0).unwrap().visc;
        let a2 = assemble_operators(&mesh, &spaces, 2.0).unwrap().visc;
        assert_eq!(a1.col_idx, a2.col_idx);
        for (v1, v2) in a1.values.iter().zip(&a2.values) {
            assert_relative_eq!(2.0 * v1, *v2, max_relative = 1e-14);
        }
    }

    #[test]
    fn operators_are_symmetric_and_mass_is_spd() {
        let (mesh, spaces) = unit_channel(4);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        assert!(ops.visc.asymmetry() <= 1e-12);
        assert!(ops.mass.asymmetry() <= 1e-12);
        assert!(ops.h1.asymmetry() <= 1e-12);
        // Cholesky of the free mass block must succeed
        let m = spaces.vel.restrict_square(&ops.mass);
        let trips: Vec<_> = m.triplets().collect();
        let mat = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(m.nrows, m.ncols, &trips).unwrap();
        assert!(mat.sp_cholesky(faer::Side::Lower).is_ok());
        // random nonnegative quadratic form for the viscous matrix
        for seed in 0..5u64 {
            let x: Vec<f64> = (0..ops.visc.nrows).map(|i| deterministic_noise(seed * 77777 + i as u64)).collect();
            assert!(ops.visc.quad_form(&x, &x) >= -1e-12);
        }
    }

    #[test]
    fn divergence_is_consistent_with_polynomials() {
        // u = (x^2, x y) has div = 3x; quadratic interpolation is exact
        let (mesh, spaces) = unit_channel(4);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let u = spaces.interpolate(|x, out| {
            out[0] = x[0] * x[0];
            out[1] = x[0] * x[1];
        });
        let bu = ops.div.mul(&u);
        // load vector of q(x) = 3x against P1 test functions, assembled by quadrature
        let rule = grundmann_moeller(2, 2);
        let mut bq = vec![0.0; spaces.n_pressure];
        for c in 0..mesh.n_cells() {
            let geo = cell_geometry(&mesh, c);
            let cell = mesh.cell(c);
            let p0 = mesh.vertex(cell[0]).to_vec();
            let p1 = mesh.vertex(cell[1]).to_vec();
            let p2v = mesh.vertex(cell[2]).to_vec();
            for q in 0..rule.len() {
                let xi = rule.point(q);
                let lam = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
                let x = lam[0] * p0[0] + lam[1] * p1[0] + lam[2] * p2v[0];
                let w = rule.weights[q] * geo.det.abs();
                for v in 0..3 {
                    bq[cell[v]] += w * lam[v] * 3.0 * x;
                }
            }
        }
        for q in 0..spaces.n_pressure {
            assert_relative_eq!(bu[q], bq[q], epsilon = 1e-12);
        }
    }

    #[test]
    fn stretched_domain_scales_shear_energy() {
        let spec = DomainSpec {
            dim: 2,
            omega: vec![[0.0, 2.0]],
            height: HeightFn::constant(1.0),
            h_min: 1.0,
            h_max: 1.0,
            lipschitz: 0.0,
        };
        let mesh = build_mesh(&spec, &[8, 4]).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let u = spaces.interpolate(|x, out| {
            out[0] = x[1];
            out[1] = 0.0;
        });
        assert_relative_eq!(ops.visc.quad_form(&u, &u), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn boundary_quadrature_covers_gamma0() {
        let (mesh, spaces) = unit_channel(4);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let total: f64 = ops.bquad.weights.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-13);
        // trace of the interpolated shear picks out the wall value
        let u = spaces.interpolate(|x, out| {
            out[0] = 1.0 - x[1];
            out[1] = 0.0;
        });
        let tv = ops.bquad.trace.mul(&u);
        for v in tv {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn korn_constant_in_range_and_linear_in_mu() {
        let (mesh, spaces) = unit_channel(4);
        let ops1 = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let a1 = korn_coercivity_estimate(&spaces, &ops1).unwrap();
        assert!(a1 > 0.0 && a1 <= 2.0, "alpha = {a1}");
        let ops2 = assemble_operators(&mesh, &spaces, 2.0).unwrap();
        let a2 = korn_coercivity_estimate(&spaces, &ops2).unwrap();
        assert_relative_eq!(a2, 2.0 * a1, max_relative = 1e-6);
    }

    #[test]
    fn korn_constant_stabilizes_under_refinement() {
        let mut values = Vec::new();
        for n in [4, 8, 16] {
            let (mesh, spaces) = unit_channel(n);
            let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
            values.push(korn_coercivity_estimate(&spaces, &ops).unwrap());
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(0.0f64, f64::max);
        assert!((max - min) / max < 0.2, "Korn values {values:?}");
    }

    #[test]
    fn inf_sup_constant_does_not_degenerate() {
        let mut values = Vec::new();
        for n in [4, 8, 16] {
            let (mesh, spaces) = unit_channel(n);
            let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
            values.push(inf_sup_estimate(&spaces, &ops).unwrap());
        }
        for v in &values {
            assert!(*v > 1e-3, "inf-sup values {values:?}");
        }
    }

    #[test]
    fn couette_lifting_is_the_linear_shear() {
        let (mesh, spaces) = unit_channel(4);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let wall = WallData {
            s: 1.0,
            profile: WallProfile::Couette { h_ref: 1.0, lateral_speed: 1.0 },
            height: HeightFn::constant(1.0),
        };
        let lift = build_lifting(&mesh, &spaces, &wall, &ops).unwrap();
        let exact = spaces.interpolate(|x, out| {
            out[0] = 1.0 - x[1];
            out[1] = 0.0;
        });
        for (a, b) in lift.g0.iter().zip(&exact) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        assert!(lift.div_residual <= 1e-10, "div residual {}", lift.div_residual);
    }

    #[test]
    fn zero_wall_data_gives_zero_lifting() {
        let (mesh, spaces) = unit_channel(3);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let wall = WallData { s: 0.0, profile: WallProfile::Zero, height: HeightFn::constant(1.0) };
        let lift = build_lifting(&mesh, &spaces, &wall, &ops).unwrap();
        assert!(lift.g0.iter().all(|&v| v == 0.0));
        assert_eq!(lift.norm_h1, 0.0);
    }

    #[test]
    fn net_inflow_is_rejected() {
        let (mesh, spaces) = unit_channel(3);
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let wall = WallData { s: 0.0, profile: WallProfile::UniformInflow { q: 1.0, side: 0.0 }, height: HeightFn::constant(1.0) };
        let err = build_lifting(&mesh, &spaces, &wall, &ops).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("flux"), "message should quote the flux: {msg}");
    }
}

#[cfg(test)]
mod korn_debug {
    use super::*;
    use crate::geometry::{build_mesh, DomainSpec, HeightFn};

    #[test]
    fn krylov_estimate_matches_dense_generalized_eigen() {
        let spec = DomainSpec { dim: 2, omega: vec![[0.0, 1.0]], height: HeightFn::constant(1.0), h_min: 1.0, h_max: 1.0, lipschitz: 0.0 };
        let mesh = build_mesh(&spec, &[3, 3]).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let ops = assemble_operators(&mesh, &spaces, 1.0).unwrap();
        let a = spaces.vel.restrict_square(&ops.visc);
        let m = spaces.vel.restrict_square(&ops.mass);
        let k = spaces.vel.restrict_square(&ops.h1);
        let n = a.nrows;
        let mut ad = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut mk = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (r, c, v) in a.triplets() { ad[(r, c)] += v; }
        for (r, c, v) in m.triplets() { mk[(r, c)] += v; }
        for (r, c, v) in k.triplets() { mk[(r, c)] += v; }
        let chol = nalgebra::Cholesky::new(mk).unwrap();
        let li = chol.l().try_inverse().unwrap();
        let sym = &li * &ad * li.transpose();
        let eig = nalgebra::SymmetricEigen::new(sym);
        let dense_alpha = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let alpha = korn_coercivity_estimate(&spaces, &ops).unwrap();
        assert!((dense_alpha - alpha).abs() <= 1e-8 * dense_alpha, "dense {dense_alpha} vs krylov {alpha}");
    }
}
