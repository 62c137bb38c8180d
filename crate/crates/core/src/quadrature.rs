//! Quadrature rules on the unit interval and on reference simplices.
//!
//! Three families cover every integral in the crate:
//! - Gauss-Legendre on [0, 1] for facet edges and time integrals,
//! - Grundmann-Moeller rules on the reference d-simplex for element assembly
//!   (any dimension, odd degree, derived from the closed combinatorial
//!   formula rather than hard-coded tables),
//! - Duffy-collapsed tensor Gauss rules on the simplex for the sharply peaked
//!   mollifier integrals, where positive weights matter more than minimal
//!   point counts.

/// A quadrature rule on the reference d-simplex {x_i >= 0, sum x_i <= 1}.
///
/// `points` stores reference coordinates flat (`len = weights.len() * dim`);
/// weights sum to the simplex volume `1/d!`.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SimplexRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }
}

/// Gauss-Legendre nodes and weights on [0, 1]; weights sum to 1.
///
/// Nodes are found by Newton iteration on the Legendre polynomial, so any
/// order is available without tables.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one node");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Grundmann-Moeller rule of degree `2s + 1` on the reference d-simplex.
///
/// Some weights are negative; the rule is still exact to the stated degree,
/// which is all assembly needs (the integrands there are polynomials).
pub fn grundmann_moeller(dim: usize, s: usize) -> SimplexRule {
    let d = dim;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let two_s = 2 * s;
    for i in 0..=s {
        let denom = (d + two_s + 1 - 2 * i) as f64;
        // (-1)^i 2^{-2s} (d + 2s + 1 - 2i)^{2s+1} / (i! (d + 2s + 1 - i)!)
        let mut w = denom.powi(two_s as i32 + 1) / 2f64.powi(two_s as i32);
        w /= factorial(i) * factorial(d + two_s + 1 - i);
        if i % 2 == 1 {
            w = -w;
        }
        for beta in multi_indices(d + 1, s - i) {
            // barycentric (2*beta_j + 1) / denom; drop the 0th coordinate
            for b in beta.iter().skip(1) {
                points.push((2 * b + 1) as f64 / denom);
            }
            weights.push(w);
        }
    }
    SimplexRule { dim, points, weights }
}

/// Tensor Gauss rule collapsed onto the simplex by the Duffy transform,
/// `n` points per direction. All weights are positive; exact for polynomials
/// of degree `n - 1` and rapidly convergent for smooth integrands.
pub fn duffy(dim: usize, n: usize) -> SimplexRule {
    let gl = gauss_legendre_01(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            for &(u, wu) in &gl {
                for &(v, wv) in &gl {
                    points.push(u);
                    points.push(v * (1.0 - u));
                    weights.push(wu * wv * (1.0 - u));
                }
            }
        }
        3 => {
            for &(u, wu) in &gl {
                for &(v, wv) in &gl {
                    for &(w, ww) in &gl {
                        let y = v * (1.0 - u);
                        points.push(u);
                        points.push(y);
                        points.push(w * (1.0 - u - y));
                        weights.push(wu * wv * ww * (1.0 - u) * (1.0 - u - y));
                    }
                }
            }
        }
        _ => panic!("duffy rule only implemented for dim 2 and 3"),
    }
    SimplexRule { dim, points, weights }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All multi-indices in `N_0^len` with the given sum, in lexicographic order.
fn multi_indices(len: usize, sum: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; len];
    fill(&mut out, &mut cur, 0, sum);
    return out;

    fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, left: usize) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            fill(out, cur, pos + 1, left - v);
        }
    }
}
