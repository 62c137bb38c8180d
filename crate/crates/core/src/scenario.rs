//! Scenario files: a TOML document with sections `[domain]`, `[physics]`,
//! `[wall]`, `[friction.tresca]` or `[friction.coulomb]`, `[discretization]`
//! and optional `[verify]`.
//!
//! Functions (`f`, `zeta`, `h`, `F0`, `Fsigma`, `S`, `ell`) are named
//! built-ins with parameters: `constant`, `linear`, `sine`, `exp-kernel` and
//! `bump` — no embedded expression language. Unknown keys and unknown
//! builtin parameters are rejected with their key path, and every
//! paper-mandated constraint (`zeta(0) = 1`, `p > 2`, positive height,
//! nonnegative thresholds) is re-checked here.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coulomb::{BoundaryFn, CoulombConfig, CoulombSpec, Kernel};
use crate::error::Error;
use crate::geometry::{DomainSpec, HeightFn};
use crate::timestepping::{
    AnalyticField, ForcingFn, InitialCondition, NewtonConfig, TimeFn, WallKind,
};

pub use crate::timestepping::Scenario;

/// Raw structure of a scenario file (round-trips through serde).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub domain: DomainSection,
    pub physics: PhysicsSection,
    pub wall: WallSection,
    pub friction: FrictionSection,
    pub discretization: DiscretizationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dimension: usize,
    /// One `[lo, hi]` interval per lateral axis.
    pub omega: Vec<[f64; 2]>,
    pub height: FnSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_force: Option<FnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<FnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<V0Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compatibility_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct V0Section {
    /// `lifting` (default), `vortex` or `stretch-x`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSection {
    pub s: f64,
    /// `couette` or `zero`.
    pub profile: String,
    /// Wall-level speed of the lateral profile (defaults to `s`); set it to
    /// the expected slip speed to emulate an infinitely long channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tresca: Option<TrescaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coulomb: Option<CoulombSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrescaSection {
    /// Threshold `ell(x')` (time-independent builtin).
    pub ell: FnSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoulombSection {
    pub f0: FnSpec,
    pub fsigma: FnSpec,
    pub kernel: FnSpec,
    pub p_exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_prime_data: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_inner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_window_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    /// Grid boxes per axis (lateral first, wall-normal last).
    pub resolution: Vec<usize>,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_levels: Option<Vec<f64>>,
}

/// A named builtin with parameters; unknown parameters are rejected when the
/// builtin is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnSpec {
    #[serde(rename = "fn")]
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, toml::Value>,
}

impl FnSpec {
    pub fn constant(value: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("value".to_string(), toml::Value::Float(value));
        FnSpec { name: "constant".into(), params }
    }
}

fn err(key: &str, message: impl Into<String>) -> Error {
    Error::Scenario { key: key.into(), message: message.into() }
}

fn get_f64(spec: &FnSpec, key: &str, path: &str) -> Result<f64, Error> {
    match spec.params.get(key) {
        Some(toml::Value::Float(v)) => Ok(*v),
        Some(toml::Value::Integer(v)) => Ok(*v as f64),
        Some(_) => Err(err(&format!("{path}.{key}"), "expected a number")),
        None => Err(err(&format!("{path}.{key}"), format!("missing parameter for builtin `{}`", spec.name))),
    }
}

fn get_f64_or(spec: &FnSpec, key: &str, default: f64, path: &str) -> Result<f64, Error> {
    if spec.params.contains_key(key) {
        get_f64(spec, key, path)
    } else {
        Ok(default)
    }
}

fn get_vec(spec: &FnSpec, key: &str, len: usize, path: &str) -> Result<Vec<f64>, Error> {
    match spec.params.get(key) {
        Some(toml::Value::Array(arr)) => {
            let vals: Result<Vec<f64>, Error> = arr
                .iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(x) => Ok(*x as f64),
                    _ => Err(err(&format!("{path}.{key}"), "expected an array of numbers")),
                })
                .collect();
            let vals = vals?;
            if vals.len() != len {
                return Err(err(&format!("{path}.{key}"), format!("expected {len} components, got {}", vals.len())));
            }
            Ok(vals)
        }
        Some(_) => Err(err(&format!("{path}.{key}"), "expected an array of numbers")),
        None => Err(err(&format!("{path}.{key}"), format!("missing parameter for builtin `{}`", spec.name))),
    }
}

fn check_params(spec: &FnSpec, allowed: &[&str], path: &str) -> Result<(), Error> {
    for key in spec.params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(err(
                &format!("{path}.{key}"),
                format!("unknown parameter for builtin `{}` (allowed: {})", spec.name, allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

/// Compactly supported bump `amplitude * exp(1 - 1/(1 - s^2))`, peak value
/// `amplitude` at the center.
fn bump(s: f64, amplitude: f64) -> f64 {
    if s * s >= 1.0 {
        0.0
    } else {
        amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Scalar builtin of one spatial coordinate.
fn build_scalar_spatial(spec: &FnSpec, path: &str) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>, Error> {
    match spec.name.as_str() {
        "constant" => {
            check_params(spec, &["value"], path)?;
            let v = get_f64(spec, "value", path)?;
            Ok(Box::new(move |_| v))
        }
        "linear" => {
            check_params(spec, &["a", "b"], path)?;
            let a = get_f64(spec, "a", path)?;
            let b = get_f64(spec, "b", path)?;
            Ok(Box::new(move |x| a + b * x))
        }
        "sine" => {
            check_params(spec, &["a", "b", "k"], path)?;
            let a = get_f64(spec, "a", path)?;
            let b = get_f64(spec, "b", path)?;
            let k = get_f64(spec, "k", path)?;
            Ok(Box::new(move |x| a + b * (std::f64::consts::PI * k * x).sin()))
        }
        "bump" => {
            check_params(spec, &["center", "radius", "amplitude", "base"], path)?;
            let c = get_f64(spec, "center", path)?;
            let r = get_f64(spec, "radius", path)?;
            let a = get_f64(spec, "amplitude", path)?;
            let base = get_f64_or(spec, "base", 0.0, path)?;
            Ok(Box::new(move |x| base + bump((x - c) / r, a)))
        }
        other => Err(err(path, format!("unknown builtin `{other}` (expected constant, linear, sine or bump)"))),
    }
}

fn build_height(spec: &FnSpec, omega: &[[f64; 2]], path: &str) -> Result<(HeightFn, f64, f64, f64), Error> {
    let [x0, x1] = omega[0];
    let (h_min, h_max, lipschitz) = match spec.name.as_str() {
        "constant" => {
            let v = get_f64(spec, "value", path)?;
            (v, v, 0.0)
        }
        "linear" => {
            let a = get_f64(spec, "a", path)?;
            let b = get_f64(spec, "b", path)?;
            let (e0, e1) = (a + b * x0, a + b * x1);
            (e0.min(e1), e0.max(e1), b.abs())
        }
        "sine" => {
            let a = get_f64(spec, "a", path)?;
            let b = get_f64(spec, "b", path)?;
            let k = get_f64(spec, "k", path)?;
            (a - b.abs(), a + b.abs(), (b * std::f64::consts::PI * k).abs())
        }
        other => return Err(err(path, format!("unknown height builtin `{other}`"))),
    };
    if !(h_min > 0.0) {
        return Err(err(path, format!("the channel height must stay positive (h is bounded below by {h_min})")));
    }
    let f = build_scalar_spatial(spec, path)?;
    Ok((HeightFn::new(move |x| f(x[0])), h_min, h_max, lipschitz))
}

fn build_zeta(spec: &FnSpec, path: &str) -> Result<TimeFn, Error> {
    let zeta_condition = "zeta(0) must equal 1";
    match spec.name.as_str() {
        "constant" => {
            check_params(spec, &["value"], path)?;
            let v = get_f64(spec, "value", path)?;
            if (v - 1.0).abs() > 1e-12 {
                return Err(err(path, format!("{zeta_condition}, got constant {v}")));
            }
            Ok(TimeFn::one())
        }
        "linear" => {
            check_params(spec, &["b"], path)?;
            let b = get_f64(spec, "b", path)?;
            TimeFn::new(move |t| 1.0 + b * t, move |_| b, |_| 0.0)
        }
        "sine" => {
            check_params(spec, &["b", "k"], path)?;
            let b = get_f64(spec, "b", path)?;
            let k = get_f64(spec, "k", path)?;
            let w = std::f64::consts::PI * k;
            TimeFn::new(
                move |t| 1.0 + b * (w * t).sin(),
                move |t| b * w * (w * t).cos(),
                move |t| -b * w * w * (w * t).sin(),
            )
        }
        "exp-kernel" => {
            check_params(spec, &["rate"], path)?;
            let r = get_f64(spec, "rate", path)?;
            TimeFn::new(move |t| (-r * t).exp(), move |t| -r * (-r * t).exp(), move |t| r * r * (-r * t).exp())
        }
        other => Err(err(path, format!("unknown zeta builtin `{other}`"))),
    }
    .map_err(|e| match e {
        Error::Data(msg) => err(path, msg),
        other => other,
    })
}

fn build_body_force(spec: &FnSpec, dim: usize, path: &str) -> Result<ForcingFn, Error> {
    match spec.name.as_str() {
        "zero" => {
            check_params(spec, &[], path)?;
            Ok(ForcingFn::zero())
        }
        "constant" => {
            check_params(spec, &["values"], path)?;
            Ok(ForcingFn::constant(get_vec(spec, "values", dim, path)?))
        }
        "sine" => {
            check_params(spec, &["values", "k", "axis"], path)?;
            let amp = get_vec(spec, "values", dim, path)?;
            let k = get_f64(spec, "k", path)?;
            let axis = get_f64_or(spec, "axis", 0.0, path)? as usize;
            if axis >= dim {
                return Err(err(&format!("{path}.axis"), format!("axis {axis} out of range for dimension {dim}")));
            }
            Ok(ForcingFn::new(move |x, _, out| {
                let s = (std::f64::consts::PI * k * x[axis]).sin();
                for (o, a) in out.iter_mut().zip(&amp) {
                    *o = a * s;
                }
            }))
        }
        "bump" => {
            check_params(spec, &["center", "radius", "values"], path)?;
            let center = get_vec(spec, "center", dim, path)?;
            let radius = get_f64(spec, "radius", path)?;
            let amp = get_vec(spec, "values", dim, path)?;
            Ok(ForcingFn::new(move |x, _, out| {
                let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (radius * radius);
                let b = bump(r2.sqrt(), 1.0);
                for (o, a) in out.iter_mut().zip(&amp) {
                    *o = a * b;
                }
            }))
        }
        other => Err(err(path, format!("unknown body-force builtin `{other}`"))),
    }
}

fn build_kernel(spec: &FnSpec, path: &str) -> Result<Kernel, Error> {
    match spec.name.as_str() {
        "constant" => {
            check_params(spec, &["value"], path)?;
            let v = get_f64(spec, "value", path)?;
            if v < 0.0 {
                return Err(err(path, "kernel S must be nonnegative"));
            }
            Ok(Kernel::constant(v))
        }
        "exp-kernel" => {
            check_params(spec, &["scale", "rate"], path)?;
            let scale = get_f64_or(spec, "scale", 1.0, path)?;
            let rate = get_f64(spec, "rate", path)?;
            if scale < 0.0 {
                return Err(err(path, "kernel S must be nonnegative"));
            }
            Ok(Kernel::exp_decay(scale, rate))
        }
        other => Err(err(path, format!("unknown kernel builtin `{other}`"))),
    }
}

/// Wall data field of `(x', t)`, nonnegative (sampled check).
fn build_boundary_fn(spec: &FnSpec, omega: &[[f64; 2]], path: &str, condition: &str) -> Result<BoundaryFn, Error> {
    let f = build_scalar_spatial(spec, path)?;
    // sampled nonnegativity over the wall footprint
    let [x0, x1] = omega[0];
    for i in 0..=64 {
        let x = x0 + (x1 - x0) * i as f64 / 64.0;
        let v = f(x);
        if v < 0.0 {
            return Err(err(path, format!("{condition} (value {v} at x' = {x})")));
        }
    }
    if spec.name == "constant" {
        let v = f(0.0);
        return Ok(BoundaryFn::constant(v));
    }
    Ok(BoundaryFn::new(move |xp, _| f(xp[0])))
}

/// Everything a run needs, extracted from one scenario file.
pub struct ParsedScenario {
    pub scenario: Scenario,
    /// Present for `[friction.tresca]`.
    pub tresca_ell: Option<BoundaryFn>,
    /// Present for `[friction.coulomb]`.
    pub coulomb: Option<(CoulombSpec, CoulombConfig)>,
    pub verify: Option<VerifySection>,
    pub raw: ScenarioFile,
    /// SHA-256 of the scenario file bytes.
    pub hash: String,
    /// Per-cell quadrature order of the trace evaluations.
    pub trace_order: usize,
}

/// Parses and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ParsedScenario, Error> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| err("scenario", format!("file is not valid UTF-8: {e}")))?;
    let hash = crate::outputs::sha256_hex(&bytes);
    let mut parsed = parse_scenario_str(&text)?;
    parsed.hash = hash;
    Ok(parsed)
}

/// Parses a scenario from TOML text (hash left empty).
pub fn parse_scenario_str(text: &str) -> Result<ParsedScenario, Error> {
    let raw: ScenarioFile = toml::from_str(text).map_err(|e| err("scenario", e.to_string()))?;
    build_scenario(raw)
}

/// Serializes the raw structure back to TOML (round-trip support).
pub fn to_toml_string(raw: &ScenarioFile) -> Result<String, Error> {
    toml::to_string(raw).map_err(|e| err("scenario", format!("serialization failed: {e}")))
}

fn build_scenario(raw: ScenarioFile) -> Result<ParsedScenario, Error> {
    let dim = raw.domain.dimension;
    if dim != 2 && dim != 3 {
        return Err(err("domain.dimension", format!("dimension must be 2 or 3, got {dim}")));
    }
    if raw.domain.omega.len() != dim - 1 {
        return Err(err(
            "domain.omega",
            format!("omega needs {} interval(s) for dimension {dim}", dim - 1),
        ));
    }
    if dim == 3 && raw.domain.height.name != "constant" {
        return Err(err("domain.height", "3d channels support only constant height"));
    }
    let (height, h_min, h_max, lipschitz) = build_height(&raw.domain.height, &raw.domain.omega, "domain.height")?;
    let domain = DomainSpec { dim, omega: raw.domain.omega.clone(), height, h_min, h_max, lipschitz };

    if raw.discretization.resolution.len() != dim {
        return Err(err(
            "discretization.resolution",
            format!("resolution needs {dim} entries, got {}", raw.discretization.resolution.len()),
        ));
    }
    let zeta = match &raw.physics.zeta {
        Some(spec) => build_zeta(spec, "physics.zeta")?,
        None => TimeFn::one(),
    };
    let body_force = match &raw.physics.body_force {
        Some(spec) => build_body_force(spec, dim, "physics.body_force")?,
        None => ForcingFn::zero(),
    };
    let v0 = match &raw.physics.v0 {
        None => InitialCondition::Lifting,
        Some(sec) => match sec.mode.as_str() {
            "lifting" => InitialCondition::Lifting,
            "vortex" => {
                if dim != 3 && dim != 2 {
                    unreachable!()
                }
                if dim == 3 {
                    return Err(err("physics.v0.mode", "vortex initial data are only available in 2d"));
                }
                let amp = sec.amplitude.unwrap_or(1.0);
                let [x0, x1] = raw.domain.omega[0];
                let hm = h_min;
                let value = move |x: &[f64], out: &mut [f64]| {
                    let xi = (x[0] - x0) / (x1 - x0);
                    let eta = x[1] / hm;
                    if !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&xi) {
                        out[0] = 0.0;
                        out[1] = 0.0;
                        return;
                    }
                    // curl of psi = amp (xi(1-xi) eta(1-eta))^2
                    let b = xi * (1.0 - xi) * eta * (1.0 - eta);
                    let db_dxi = (1.0 - 2.0 * xi) * eta * (1.0 - eta);
                    let db_deta = xi * (1.0 - xi) * (1.0 - 2.0 * eta);
                    out[0] = amp * 2.0 * b * db_deta / hm;
                    out[1] = -amp * 2.0 * b * db_dxi / (x1 - x0);
                };
                InitialCondition::LiftingPlus(AnalyticField {
                    f: std::sync::Arc::new(value),
                    divergence: std::sync::Arc::new(|_| 0.0),
                })
            }
            "stretch-x" => {
                let amp = sec.amplitude.unwrap_or(1.0);
                InitialCondition::LiftingPlus(AnalyticField {
                    f: std::sync::Arc::new(move |x: &[f64], out: &mut [f64]| {
                        out[0] = amp * x[0];
                        for o in out.iter_mut().skip(1) {
                            *o = 0.0;
                        }
                    }),
                    divergence: std::sync::Arc::new(move |_| amp),
                })
            }
            other => return Err(err("physics.v0.mode", format!("unknown initial-condition mode `{other}`"))),
        },
    };
    let wall_kind = match raw.wall.profile.as_str() {
        "couette" => WallKind::Couette { lateral_speed: raw.wall.lateral_speed },
        "zero" => WallKind::Zero,
        other => return Err(err("wall.profile", format!("unknown wall profile `{other}`"))),
    };

    let eps = raw.discretization.eps.unwrap_or_else(|| 1e-4 * raw.wall.s.abs().max(1.0));
    if !(eps > 0.0) {
        return Err(err("discretization.eps", format!("eps must be positive, got {eps}")));
    }
    let mut eps_schedule = raw.discretization.eps_schedule.clone().unwrap_or_else(|| vec![eps]);
    if eps_schedule.is_empty() {
        eps_schedule = vec![eps];
    }
    let newton = NewtonConfig {
        tol: raw.discretization.newton_tol.unwrap_or(1e-10),
        max_iter: raw.discretization.newton_max_iter.unwrap_or(50),
        max_line_search: 30,
    };
    let scenario = Scenario {
        domain,
        resolution: raw.discretization.resolution.clone(),
        mu: raw.physics.mu,
        t_final: raw.discretization.t_final,
        dt: raw.discretization.dt,
        body_force,
        zeta,
        wall_s: raw.wall.s,
        wall_kind,
        v0,
        eps_schedule,
        newton,
        mollifier_rho: raw.discretization.mollifier_rho,
        check_compatibility: raw.physics.compatibility_check.unwrap_or(false),
    };
    scenario.validate().map_err(|e| match e {
        Error::Data(msg) => err("discretization", msg),
        other => other,
    })?;

    let (tresca_ell, coulomb) = match (&raw.friction.tresca, &raw.friction.coulomb) {
        (Some(t), None) => {
            let ell = build_boundary_fn(
                &t.ell,
                &raw.domain.omega,
                "friction.tresca.ell",
                "the Tresca threshold must be nonnegative (ell takes values in R+)",
            )?;
            (Some(ell), None)
        }
        (None, Some(c)) => {
            if !(c.p_exponent > 2.0) {
                return Err(err("friction.coulomb.p_exponent", format!("p must exceed 2, got {}", c.p_exponent)));
            }
            let f0 = build_boundary_fn(
                &c.f0,
                &raw.domain.omega,
                "friction.coulomb.f0",
                "F0 must be nonnegative (it takes values in R+)",
            )?;
            let fsigma = build_boundary_fn(
                &c.fsigma,
                &raw.domain.omega,
                "friction.coulomb.fsigma",
                "Fsigma must be nonnegative (it takes values in R+)",
            )?;
            let kernel = build_kernel(&c.kernel, "friction.coulomb.kernel")?;
            let spec = CoulombSpec { f0, fsigma, kernel, p_exponent: c.p_exponent };
            let config = CoulombConfig {
                c_prime_data: c.c_prime_data.unwrap_or(0.125),
                tol_ell: c.tol_ell.unwrap_or(1e-8),
                max_inner: c.max_inner.unwrap_or(50),
                force_window_length: c.force_window_length,
                ..Default::default()
            };
            (None, Some((spec, config)))
        }
        (Some(_), Some(_)) => {
            return Err(err("friction", "exactly one of [friction.tresca] and [friction.coulomb] must be given"))
        }
        (None, None) => {
            return Err(err("friction", "missing friction law: give [friction.tresca] or [friction.coulomb]"))
        }
    };

    let trace_order = raw.discretization.trace_order.unwrap_or(6);
    Ok(ParsedScenario {
        scenario,
        tresca_ell,
        coulomb,
        verify: raw.verify.clone(),
        raw,
        hash: String::new(),
        trace_order,
    })
}
