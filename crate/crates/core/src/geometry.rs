//! Simplicial meshes of the channel domain
//! `Omega = { (x', x_d) : x' in omega, 0 < x_d < h(x') }`.
//!
//! Meshes are structured: a tensor grid over `omega x [0, 1]`, graded
//! vertically by `h(x')` and split into simplices by the Kuhn decomposition,
//! which is conforming across neighbouring grid boxes. The bottom wall
//! (`x_d = 0`) is the slip boundary `Gamma0`, the mapped top surface is
//! `Gamma1`, and the remaining sides form the lateral boundary `GammaL`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::Error;

/// Classification of a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Bottom wall `x_d = 0`, the slip/friction surface.
    Gamma0,
    /// Top surface `x_d = h(x')`.
    Gamma1,
    /// Lateral boundary.
    GammaL,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Gamma0 => "Gamma0",
            BoundaryTag::Gamma1 => "Gamma1",
            BoundaryTag::GammaL => "GammaL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Gamma0" => Some(BoundaryTag::Gamma0),
            "Gamma1" => Some(BoundaryTag::Gamma1),
            "GammaL" => Some(BoundaryTag::GammaL),
            _ => None,
        }
    }
}

/// Channel height function `h(x')` with declared bounds.
#[derive(Clone)]
pub struct HeightFn {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for HeightFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HeightFn(..)")
    }
}

impl HeightFn {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        HeightFn { f: Arc::new(f) }
    }

    pub fn constant(h: f64) -> Self {
        HeightFn::new(move |_| h)
    }

    pub fn eval(&self, x_prime: &[f64]) -> f64 {
        (self.f)(x_prime)
    }
}

/// The channel domain: dimension, footprint box `omega` and height profile.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    /// Space dimension, 2 or 3.
    pub dim: usize,
    /// Bounds of the footprint, one `[lo, hi]` interval per lateral axis.
    pub omega: Vec<[f64; 2]>,
    pub height: HeightFn,
    /// Declared lower bound of `h`; must be positive.
    pub h_min: f64,
    /// Declared upper bound of `h`.
    pub h_max: f64,
    /// Declared Lipschitz constant of `h`.
    pub lipschitz: f64,
}

impl DomainSpec {
    /// Checks dimension, footprint and the declared height bounds on a
    /// sample grid. A non-positive height sample is reported with its point.
    pub fn validate(&self, samples_per_axis: usize) -> Result<(), Error> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Geometry(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.omega.len() != self.dim - 1 {
            return Err(Error::Geometry(format!(
                "omega needs {} interval(s) for dimension {}, got {}",
                self.dim - 1,
                self.dim,
                self.omega.len()
            )));
        }
        for b in &self.omega {
            if !(b[0] < b[1]) {
                return Err(Error::Geometry(format!("empty omega interval [{}, {}]", b[0], b[1])));
            }
        }
        if !(self.h_min > 0.0) {
            return Err(Error::Geometry(format!("h_min must be positive, got {}", self.h_min)));
        }
        let n = samples_per_axis.max(2);
        let mut prev: Option<(Vec<f64>, f64)> = None;
        for idx in grid_indices(self.dim - 1, n) {
            let x: Vec<f64> = idx
                .iter()
                .zip(&self.omega)
                .map(|(&i, b)| b[0] + (b[1] - b[0]) * i as f64 / (n - 1) as f64)
                .collect();
            let h = self.height.eval(&x);
            if !(h > 0.0) {
                return Err(Error::Geometry(format!("height is non-positive at x' = {:?}: h = {}", x, h)));
            }
            let slack = 1e-12 * self.h_max.abs().max(1.0);
            if h < self.h_min - slack || h > self.h_max + slack {
                return Err(Error::Geometry(format!(
                    "height sample h({:?}) = {} outside declared bounds [{}, {}]",
                    x, h, self.h_min, self.h_max
                )));
            }
            if let Some((px, ph)) = &prev {
                let dist: f64 = x.iter().zip(px).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if dist > 0.0 && (h - ph).abs() > self.lipschitz * dist * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Geometry(format!(
                        "height violates declared Lipschitz constant {} between {:?} and {:?}",
                        self.lipschitz, px, x
                    )));
                }
            }
            prev = Some((x, h));
        }
        Ok(())
    }
}

/// A boundary facet: its vertex ids, tag and the adjacent cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub tag: BoundaryTag,
    pub cell: usize,
}

/// A conforming simplicial mesh with tagged boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    /// Vertex coordinates, flat (`n_vertices * dim`).
    pub vertices: Vec<f64>,
    /// Cell connectivity, flat (`n_cells * (dim + 1)`).
    pub cells: Vec<usize>,
    pub boundary_facets: Vec<Facet>,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v * self.dim..(v + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * (self.dim + 1)..(c + 1) * (self.dim + 1)]
    }

    /// Signed volume of a cell (positive for correctly oriented cells).
    pub fn cell_volume(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        let p0 = self.vertex(cell[0]);
        match self.dim {
            2 => {
                let p1 = self.vertex(cell[1]);
                let p2 = self.vertex(cell[2]);
                0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
            }
            3 => {
                let p1 = self.vertex(cell[1]);
                let p2 = self.vertex(cell[2]);
                let p3 = self.vertex(cell[3]);
                let a = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
                let b = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
                let c3 = [p3[0] - p0[0], p3[1] - p0[1], p3[2] - p0[2]];
                (a[0] * (b[1] * c3[2] - b[2] * c3[1]) - a[1] * (b[0] * c3[2] - b[2] * c3[0])
                    + a[2] * (b[0] * c3[1] - b[1] * c3[0]))
                    / 6.0
            }
            _ => unreachable!(),
        }
    }

    /// (d-1)-measure of a facet.
    pub fn facet_measure(&self, f: &Facet) -> f64 {
        match self.dim {
            2 => {
                let a = self.vertex(f.vertices[0]);
                let b = self.vertex(f.vertices[1]);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            }
            3 => {
                let a = self.vertex(f.vertices[0]);
                let b = self.vertex(f.vertices[1]);
                let c = self.vertex(f.vertices[2]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
            }
            _ => unreachable!(),
        }
    }

    pub fn facet_centroid(&self, f: &Facet) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for &v in &f.vertices {
            for (ci, xi) in c.iter_mut().zip(self.vertex(v)) {
                *ci += xi;
            }
        }
        for ci in &mut c {
            *ci /= f.vertices.len() as f64;
        }
        c
    }

    pub fn cell_centroid(&self, c: usize) -> Vec<f64> {
        let cell = self.cell(c);
        let mut out = vec![0.0; self.dim];
        for &v in cell {
            for (oi, xi) in out.iter_mut().zip(self.vertex(v)) {
                *oi += xi;
            }
        }
        for oi in &mut out {
            *oi /= cell.len() as f64;
        }
        out
    }

    /// Total (d-1)-measure of facets with the given tag.
    pub fn boundary_measure(&self, tag: BoundaryTag) -> f64 {
        self.boundary_facets.iter().filter(|f| f.tag == tag).map(|f| self.facet_measure(f)).sum()
    }

    /// Writes the mesh in the ASCII `MESH v1` format (bit-exact round trip).
    pub fn dump(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "MESH v1 dim={}", self.dim)?;
        writeln!(w, "vertices {}", self.n_vertices())?;
        for v in 0..self.n_vertices() {
            let coords: Vec<String> = self.vertex(v).iter().map(|&x| crate::fmt_f64(x)).collect();
            writeln!(w, "{}", coords.join(" "))?;
        }
        writeln!(w, "cells {}", self.n_cells())?;
        for c in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", ids.join(" "))?;
        }
        writeln!(w, "facets {}", self.boundary_facets.len())?;
        for f in &self.boundary_facets {
            let ids: Vec<String> = f.vertices.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{} {}", ids.join(" "), f.tag.as_str())?;
        }
        Ok(())
    }

    /// Reads a mesh written by [`Mesh::dump`].
    pub fn load(r: &mut impl BufRead) -> Result<Mesh, Error> {
        let mut lines = r.lines();
        let mut next = || -> Result<String, Error> {
            lines
                .next()
                .ok_or_else(|| Error::Usage("unexpected end of mesh file".into()))?
                .map_err(|e| Error::Usage(format!("mesh read failed: {e}")))
        };
        let header = next()?;
        let dim: usize = header
            .strip_prefix("MESH v1 dim=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Usage(format!("bad mesh header: {header}")))?;
        let nv = parse_count(&next()?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv * dim);
        for _ in 0..nv {
            let line = next()?;
            for tok in line.split_whitespace() {
                vertices.push(tok.parse::<f64>().map_err(|e| Error::Usage(format!("bad coordinate `{tok}`: {e}")))?);
            }
        }
        let nc = parse_count(&next()?, "cells")?;
        let mut cells = Vec::with_capacity(nc * (dim + 1));
        for _ in 0..nc {
            let line = next()?;
            for tok in line.split_whitespace() {
                cells.push(tok.parse::<usize>().map_err(|e| Error::Usage(format!("bad vertex id `{tok}`: {e}")))?);
            }
        }
        let nf = parse_count(&next()?, "facets")?;
        let mut raw_facets = Vec::with_capacity(nf);
        for _ in 0..nf {
            let line = next()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != dim + 1 {
                return Err(Error::Usage(format!("bad facet line `{line}`")));
            }
            let tag = BoundaryTag::parse(toks[dim]).ok_or_else(|| Error::Usage(format!("unknown tag `{}`", toks[dim])))?;
            let verts: Result<Vec<usize>, _> = toks[..dim].iter().map(|t| t.parse::<usize>()).collect();
            raw_facets.push((verts.map_err(|e| Error::Usage(format!("bad facet ids: {e}")))?, tag));
        }
        // recover the adjacent cell of each facet
        let mut mesh = Mesh { dim, vertices, cells, boundary_facets: Vec::new() };
        let face_map = face_occurrences(&mesh);
        for (verts, tag) in raw_facets {
            let mut key = verts.clone();
            key.sort_unstable();
            let occ = face_map
                .get(&key)
                .ok_or_else(|| Error::Usage(format!("facet {:?} not found in mesh", verts)))?;
            if occ.len() != 1 {
                return Err(Error::Usage(format!("facet {:?} is not a boundary facet", verts)));
            }
            mesh.boundary_facets.push(Facet { vertices: verts, tag, cell: occ[0] });
        }
        Ok(mesh)
    }
}

fn parse_count(line: &str, what: &str) -> Result<usize, Error> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next()) {
        (Some(k), Some(n)) if k == what => n.parse().map_err(|e| Error::Usage(format!("bad {what} count: {e}"))),
        _ => Err(Error::Usage(format!("expected `{what} <n>`, got `{line}`"))),
    }
}

/// Map from sorted facet vertex ids to the cells owning that facet.
fn face_occurrences(mesh: &Mesh) -> HashMap<Vec<usize>, Vec<usize>> {
    let d = mesh.dim;
    let mut map: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        for k in 0..=d {
            let mut face: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect();
            face.sort_unstable();
            map.entry(face).or_default().push(c);
        }
    }
    map
}

/// Builds the structured, vertically graded Kuhn mesh.
///
/// `resolution` gives the number of grid boxes per axis (lateral axes first,
/// the wall-normal axis last) and must be at least 2 per axis.
pub fn build_mesh(spec: &DomainSpec, resolution: &[usize]) -> Result<Mesh, Error> {
    spec.validate(2 * resolution.first().copied().unwrap_or(2).max(2) + 1)?;
    if resolution.len() != spec.dim {
        return Err(Error::Geometry(format!(
            "resolution needs {} entries for dimension {}, got {}",
            spec.dim,
            spec.dim,
            resolution.len()
        )));
    }
    if resolution.iter().any(|&n| n < 2) {
        return Err(Error::Geometry("resolution must be at least 2 per axis".into()));
    }
    let dim = spec.dim;
    let mesh = match dim {
        2 => build_mesh_2d(spec, resolution[0], resolution[1])?,
        3 => build_mesh_3d(spec, resolution[0], resolution[1], resolution[2])?,
        _ => unreachable!(),
    };
    // positivity of all cells (grading can invalidate cells for wild h)
    for c in 0..mesh.n_cells() {
        let v = mesh.cell_volume(c);
        if !(v > 0.0) {
            return Err(Error::Geometry(format!(
                "cell {c} has non-positive volume {v}; height grading too strong for this resolution"
            )));
        }
    }
    Ok(mesh)
}

fn build_mesh_2d(spec: &DomainSpec, nx: usize, ny: usize) -> Result<Mesh, Error> {
    let [x0, x1] = spec.omega[0];
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * 2);
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            let h = spec.height.eval(&[x]);
            if !(h > 0.0) {
                return Err(Error::Geometry(format!("height is non-positive at x' = [{x}]: h = {h}")));
            }
            vertices.push(x);
            vertices.push(h * j as f64 / ny as f64);
        }
    }
    // row-major over j, then i; each grid box splits along the (i,j)->(i+1,j+1) diagonal
    let mut cells = Vec::with_capacity(nx * ny * 6);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            cells.extend_from_slice(&[a, b, c]);
            cells.extend_from_slice(&[a, c, d]);
        }
    }
    let mut mesh = Mesh { dim: 2, vertices, cells, boundary_facets: Vec::new() };
    tag_boundary(&mut mesh, spec)?;
    Ok(mesh)
}

fn build_mesh_3d(spec: &DomainSpec, nx: usize, ny: usize, nz: usize) -> Result<Mesh, Error> {
    let [x0, x1] = spec.omega[0];
    let [y0, y1] = spec.omega[1];
    let vid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1) * 3);
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let x = x0 + (x1 - x0) * i as f64 / nx as f64;
                let y = y0 + (y1 - y0) * j as f64 / ny as f64;
                let h = spec.height.eval(&[x, y]);
                if !(h > 0.0) {
                    return Err(Error::Geometry(format!("height is non-positive at x' = [{x}, {y}]: h = {h}")));
                }
                vertices.push(x);
                vertices.push(y);
                vertices.push(h * k as f64 / nz as f64);
            }
        }
    }
    // Kuhn decomposition: one tet per permutation of the three axis steps
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(nx * ny * nz * 24);
    let mut scratch = [0usize; 4];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS {
                    let mut d = [0usize; 3];
                    scratch[0] = vid(i, j, k);
                    for (step, &axis) in perm.iter().enumerate() {
                        d[axis] += 1;
                        scratch[step + 1] = vid(i + d[0], j + d[1], k + d[2]);
                    }
                    cells.extend_from_slice(&scratch);
                }
            }
        }
    }
    let mut mesh = Mesh { dim: 3, vertices, cells, boundary_facets: Vec::new() };
    // fix orientation cell by cell
    for c in 0..mesh.n_cells() {
        if mesh.cell_volume(c) < 0.0 {
            mesh.cells.swap(c * 4 + 2, c * 4 + 3);
        }
    }
    tag_boundary(&mut mesh, spec)?;
    Ok(mesh)
}

/// Extracts boundary facets (faces owned by exactly one cell), checks
/// conformity and classifies each facet geometrically.
fn tag_boundary(mesh: &mut Mesh, spec: &DomainSpec) -> Result<(), Error> {
    let d = mesh.dim;
    let map = face_occurrences(mesh);
    for occ in map.values() {
        if occ.len() > 2 {
            return Err(Error::Geometry(format!("non-conforming mesh: facet shared by {} cells", occ.len())));
        }
    }
    let tol = 1e-10 * spec.h_max;
    let mut facets = Vec::new();
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c).to_vec();
        for k in 0..=d {
            let verts: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect();
            let mut key = verts.clone();
            key.sort_unstable();
            if map[&key].len() != 1 {
                continue;
            }
            let on_gamma0 = verts.iter().all(|&v| mesh.vertex(v)[d - 1].abs() <= tol);
            let on_gamma1 = verts.iter().all(|&v| {
                let p = mesh.vertex(v);
                (p[d - 1] - spec.height.eval(&p[..d - 1])).abs() <= tol
            });
            let tag = if on_gamma0 {
                BoundaryTag::Gamma0
            } else if on_gamma1 {
                BoundaryTag::Gamma1
            } else {
                // must lie on one of the lateral box faces
                let mut lateral = false;
                for (axis, b) in spec.omega.iter().enumerate() {
                    for side in [b[0], b[1]] {
                        if verts.iter().all(|&v| (mesh.vertex(v)[axis] - side).abs() <= tol.max(1e-10 * side.abs())) {
                            lateral = true;
                        }
                    }
                }
                if !lateral {
                    return Err(Error::Geometry(format!("boundary facet {:?} does not lie on any tagged surface", verts)));
                }
                BoundaryTag::GammaL
            };
            facets.push(Facet { vertices: verts, tag, cell: c });
        }
    }
    mesh.boundary_facets = facets;
    Ok(())
}

/// Unit outward normal of a boundary facet (index into `boundary_facets`).
///
/// On `Gamma0` the result is exactly `(0, ..., 0, -1)`.
pub fn boundary_normal(mesh: &Mesh, facet: usize) -> Result<Vec<f64>, Error> {
    let f = mesh
        .boundary_facets
        .get(facet)
        .ok_or_else(|| Error::Usage(format!("facet {facet} is not a boundary facet (mesh has {})", mesh.boundary_facets.len())))?;
    let n = facet_normal(mesh, f);
    Ok(n)
}

/// Unit outward normal of a facet, oriented away from its adjacent cell.
pub fn facet_normal(mesh: &Mesh, f: &Facet) -> Vec<f64> {
    let mut n = match mesh.dim {
        2 => {
            let a = mesh.vertex(f.vertices[0]);
            let b = mesh.vertex(f.vertices[1]);
            let t = [b[0] - a[0], b[1] - a[1]];
            vec![t[1], -t[0]]
        }
        3 => {
            let a = mesh.vertex(f.vertices[0]);
            let b = mesh.vertex(f.vertices[1]);
            let c = mesh.vertex(f.vertices[2]);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            vec![u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
        }
        _ => unreachable!(),
    };
    let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut n {
        *x /= len;
    }
    // orient outward
    let fc = mesh.facet_centroid(f);
    let cc = mesh.cell_centroid(f.cell);
    let dot: f64 = n.iter().zip(fc.iter().zip(&cc)).map(|(ni, (fi, ci))| ni * (fi - ci)).sum();
    if dot < 0.0 {
        for x in &mut n {
            *x = -*x;
        }
    }
    // snap exact zeros produced by axis-aligned facets
    for x in &mut n {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    n
}

fn grid_indices(dim: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    match dim {
        1 => {
            for i in 0..n {
                out.push(vec![i]);
            }
        }
        2 => {
            for j in 0..n {
                for i in 0..n {
                    out.push(vec![i, j]);
                }
            }
        }
        _ => out.push(vec![0; dim.max(1)]),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn unit_channel(dim: usize) -> DomainSpec {
        DomainSpec {
            dim,
            omega: vec![[0.0, 1.0]; dim - 1],
            height: HeightFn::constant(1.0),
            h_min: 1.0,
            h_max: 1.0,
            lipschitz: 0.0,
        }
    }

    #[test]
    fn flat_channel_measures() {
        let mesh = build_mesh(&unit_channel(2), &[4, 4]).unwrap();
        assert_eq!(mesh.n_vertices(), 25);
        assert_eq!(mesh.n_cells(), 32);
        assert_relative_eq!(mesh.boundary_measure(BoundaryTag::Gamma0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(mesh.boundary_measure(BoundaryTag::Gamma1), 1.0, epsilon = 1e-14);
        assert_relative_eq!(mesh.boundary_measure(BoundaryTag::GammaL), 2.0, epsilon = 1e-14);
        let vol: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_volume(c)).sum();
        assert_relative_eq!(vol, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sloped_top_measure_matches_arc_length() {
        // h(x) = 1 + 0.1 x has constant slope; the top measure is
        // sqrt(1 + 0.01) for every resolution. The quadrature oracle below
        // recomputes the arc-length integral independently.
        let spec = DomainSpec {
            dim: 2,
            omega: vec![[0.0, 1.0]],
            height: HeightFn::new(|x| 1.0 + 0.1 * x[0]),
            h_min: 1.0,
            h_max: 1.1,
            lipschitz: 0.1,
        };
        let oracle: f64 = {
            let gl = crate::quadrature::gauss_legendre_01(16);
            gl.iter().map(|&(x, w)| w * (1.0 + 0.01f64).sqrt() * ((x * 0.0) + 1.0)).sum()
        };
        assert_relative_eq!(oracle, 1.0049875621120890, epsilon = 1e-12);
        for n in [4, 8, 16] {
            let mesh = build_mesh(&spec, &[n, n]).unwrap();
            assert_relative_eq!(mesh.boundary_measure(BoundaryTag::Gamma1), oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn negative_height_rejected() {
        let spec = DomainSpec {
            dim: 2,
            omega: vec![[0.0, 1.0]],
            height: HeightFn::constant(-1.0),
            h_min: 1.0,
            h_max: 1.0,
            lipschitz: 0.0,
        };
        let err = build_mesh(&spec, &[4, 4]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-positive"), "unexpected message: {msg}");
        assert!(msg.contains("x'"), "error should identify the sample point: {msg}");
    }

    #[test]
    fn gamma0_normals_are_exactly_minus_ed() {
        for dim in [2, 3] {
            let res: Vec<usize> = vec![3; dim];
            let mesh = build_mesh(&unit_channel(dim), &res).unwrap();
            let mut seen = 0;
            for (i, f) in mesh.boundary_facets.iter().enumerate() {
                let n = boundary_normal(&mesh, i).unwrap();
                match f.tag {
                    BoundaryTag::Gamma0 => {
                        seen += 1;
                        for k in 0..dim - 1 {
                            assert_eq!(n[k], 0.0);
                        }
                        assert_eq!(n[dim - 1], -1.0);
                    }
                    BoundaryTag::Gamma1 => {
                        assert_relative_eq!(n[dim - 1], 1.0, epsilon = 1e-14);
                    }
                    BoundaryTag::GammaL => {
                        assert_relative_eq!(n[dim - 1], 0.0, epsilon = 1e-14);
                    }
                }
            }
            assert!(seen > 0);
        }
    }

    #[test]
    fn left_facet_normal_points_left() {
        let mesh = build_mesh(&unit_channel(2), &[4, 4]).unwrap();
        let f = mesh
            .boundary_facets
            .iter()
            .position(|f| f.tag == BoundaryTag::GammaL && mesh.facet_centroid(f)[0] < 0.5)
            .unwrap();
        assert_eq!(boundary_normal(&mesh, f).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn interior_facet_is_usage_error() {
        let mesh = build_mesh(&unit_channel(2), &[2, 2]).unwrap();
        let err = boundary_normal(&mesh, mesh.boundary_facets.len()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn closed_boundary_normals_sum_to_zero() {
        for (dim, res) in [(2usize, vec![5usize, 4]), (3, vec![3, 3, 3])] {
            let spec = DomainSpec {
                dim,
                omega: vec![[0.0, 1.0]; dim - 1],
                height: HeightFn::new(|x| 1.0 + 0.1 * (std::f64::consts::PI * x[0]).sin()),
                h_min: 0.9,
                h_max: 1.1,
                lipschitz: 0.1 * std::f64::consts::PI,
            };
            let mesh = build_mesh(&spec, &res).unwrap();
            let mut total = vec![0.0; dim];
            let mut area = 0.0;
            for (i, f) in mesh.boundary_facets.iter().enumerate() {
                let n = boundary_normal(&mesh, i).unwrap();
                let a = mesh.facet_measure(f);
                area += a;
                for k in 0..dim {
                    total[k] += a * n[k];
                }
            }
            for k in 0..dim {
                assert!(total[k].abs() <= 1e-12 * area, "component {k} = {} (area {area})", total[k]);
            }
        }
    }

    #[test]
    fn boundary_interpolation_error_halves_under_refinement() {
        let spec = DomainSpec {
            dim: 2,
            omega: vec![[0.0, 1.0]],
            height: HeightFn::new(|x| 1.0 + 0.1 * (std::f64::consts::PI * x[0]).sin()),
            h_min: 0.9,
            h_max: 1.1,
            lipschitz: 0.1 * std::f64::consts::PI,
        };
        let hausdorff = |n: usize| -> f64 {
            let mesh = build_mesh(&spec, &[n, n]).unwrap();
            let mut worst = 0.0f64;
            for f in mesh.boundary_facets.iter().filter(|f| f.tag == BoundaryTag::Gamma1) {
                let a = mesh.vertex(f.vertices[0]);
                let b = mesh.vertex(f.vertices[1]);
                for t in [0.25, 0.5, 0.75] {
                    let x = a[0] + t * (b[0] - a[0]);
                    let y = a[1] + t * (b[1] - a[1]);
                    worst = worst.max((y - spec.height.eval(&[x])).abs());
                }
            }
            worst
        };
        let mut prev = hausdorff(4);
        for n in [8, 16] {
            let cur = hausdorff(n);
            assert!(cur * 2.0 <= prev, "refinement {n}: {cur} vs {prev}");
            prev = cur;
        }
    }

    #[test]
    fn dump_load_round_trips_bit_exactly() {
        let spec = DomainSpec {
            dim: 2,
            omega: vec![[0.0, 1.0]],
            height: HeightFn::new(|x| 1.0 + 0.1 * x[0]),
            h_min: 1.0,
            h_max: 1.1,
            lipschitz: 0.1,
        };
        let mesh = build_mesh(&spec, &[3, 4]).unwrap();
        let mut buf = Vec::new();
        mesh.dump(&mut buf).unwrap();
        let loaded = Mesh::load(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(mesh, loaded);
        let mut buf2 = Vec::new();
        loaded.dump(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn three_dimensional_mesh_is_conforming() {
        let mesh = build_mesh(&unit_channel(3), &[2, 2, 2]).unwrap();
        assert_eq!(mesh.n_cells(), 48);
        let vol: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_volume(c)).sum();
        assert_relative_eq!(vol, 1.0, epsilon = 1e-13);
        assert_relative_eq!(mesh.boundary_measure(BoundaryTag::Gamma0), 1.0, epsilon = 1e-13);
        let map = super::face_occurrences(&mesh);
        for occ in map.values() {
            assert!(occ.len() <= 2);
        }
    }
}
