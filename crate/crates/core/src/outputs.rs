//! Result persistence: run outputs with a hashed manifest, field dumps, and
//! checkpointing of the history-dependent Coulomb state.
//!
//! All floating-point output uses 17 significant digits so files round-trip
//! losslessly; repeated identical runs produce byte-identical files.

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::coulomb::CoulombProgress;
use crate::error::Error;
use crate::friction::ThresholdField;
use crate::timestepping::{Discretization, Scenario, Trajectory};
use crate::verification::{energy_budget, wall_traction, VerificationReport};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The files of one run and their content hashes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "MANIFEST v1")?;
        for (name, hash) in &self.entries {
            writeln!(w, "{hash}  {name}")?;
        }
        Ok(())
    }

    pub fn hash_of(&self, name: &str) -> Option<&str> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, h)| h.as_str())
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], entries: &mut Vec<(String, String)>) -> Result<(), Error> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    entries.push((name.to_string(), sha256_hex(bytes)));
    Ok(())
}

/// Writes energy.csv, boundary.csv, the final field dump, optional threshold
/// and history CSVs, an optional verification report, and the manifest.
pub fn write_outputs(
    disc: &Discretization,
    scenario: &Scenario,
    traj: &Trajectory,
    threshold: Option<&ThresholdField>,
    report: Option<&VerificationReport>,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest, Error> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut entries = Vec::new();

    // energy.csv: step, t, kinetic, dissipation, bound
    let budget = energy_budget(disc, scenario, traj);
    let mut buf = Vec::new();
    writeln!(&mut buf, "step,t,kinetic,dissipation,bound").unwrap();
    for (n, s) in traj.states.iter().enumerate() {
        let kinetic = 0.5 * disc.mass_ff.quad_form(&s.v, &s.v);
        let dissipation = disc.visc_ff.quad_form(&s.v, &s.v);
        let bound = budget.c1_prime * (2.0 * s.t).exp();
        writeln!(
            &mut buf,
            "{},{},{},{},{}",
            n,
            crate::fmt_f64(s.t),
            crate::fmt_f64(kinetic),
            crate::fmt_f64(dissipation),
            crate::fmt_f64(bound)
        )
        .unwrap();
    }
    write_file(dir, "energy.csv", &buf, &mut entries)?;

    // boundary.csv: slip, traction, threshold per quad point per step
    let bq = &disc.ops.bquad;
    let mut buf = Vec::new();
    let xcols: Vec<String> = (0..bq.t_dim).map(|k| format!("x{k}")).collect();
    let scols: Vec<String> = (0..bq.t_dim).map(|k| format!("slip{k}")).collect();
    let tcols: Vec<String> = (0..bq.t_dim).map(|k| format!("traction{k}")).collect();
    writeln!(&mut buf, "step,t,quad_point_id,{},{},{},threshold", xcols.join(","), scols.join(","), tcols.join(",")).unwrap();
    for (n, s) in traj.states.iter().enumerate() {
        let slip = disc.trace_f.mul(&s.v);
        let traction = wall_traction(disc, scenario, s);
        for q in 0..bq.n_qp {
            let coords: Vec<String> = (0..bq.t_dim).map(|k| crate::fmt_f64(bq.x_prime[q * bq.t_dim + k])).collect();
            let slips: Vec<String> = (0..bq.t_dim).map(|k| crate::fmt_f64(slip[q * bq.t_dim + k])).collect();
            let tracs: Vec<String> = (0..bq.t_dim).map(|k| crate::fmt_f64(traction[q * bq.t_dim + k])).collect();
            let ell = threshold.map(|f| f.values[n.min(f.values.len() - 1)][q]).unwrap_or(f64::NAN);
            writeln!(
                &mut buf,
                "{},{},{},{},{},{},{}",
                n,
                crate::fmt_f64(s.t),
                q,
                coords.join(","),
                slips.join(","),
                tracs.join(","),
                crate::fmt_f64(ell)
            )
            .unwrap();
        }
    }
    write_file(dir, "boundary.csv", &buf, &mut entries)?;

    // final fields in the ASCII mesh+values format
    let mut buf = Vec::new();
    write_fields(disc, scenario, traj, &mut buf).map_err(|e| Error::io("fields_final.txt".to_string(), e))?;
    write_file(dir, "fields_final.txt", &buf, &mut entries)?;

    if let Some(f) = threshold {
        let mut buf = Vec::new();
        f.write_csv(bq, &mut buf).map_err(|e| Error::io("threshold.csv".to_string(), e))?;
        write_file(dir, "threshold.csv", &buf, &mut entries)?;
    }
    if let Some(h) = &traj.boundary_history {
        let mut buf = Vec::new();
        h.write_csv(bq, &mut buf).map_err(|e| Error::io("history.csv".to_string(), e))?;
        write_file(dir, "history.csv", &buf, &mut entries)?;
    }
    if let Some(r) = report {
        let mut buf = Vec::new();
        r.write(&mut buf).map_err(|e| Error::io("report.txt".to_string(), e))?;
        write_file(dir, "report.txt", &buf, &mut entries)?;
    }

    entries.sort();
    let manifest = Manifest { entries };
    let path = dir.join("manifest.txt");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    manifest.write(&mut w).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(manifest)
}

/// Physical velocity (P2 nodes) and pressure (vertices) of the final state.
fn write_fields(disc: &Discretization, scenario: &Scenario, traj: &Trajectory, w: &mut impl Write) -> std::io::Result<()> {
    let s = traj.terminal();
    let d = disc.mesh.dim;
    let mut v_full = disc.spaces.vel.extend_vec(&s.v);
    let z = scenario.zeta.value(s.t);
    for (v, g) in v_full.iter_mut().zip(&disc.lifting.g0) {
        *v += z * g;
    }
    writeln!(w, "FIELDS v1 dim={} t={}", d, crate::fmt_f64(s.t))?;
    writeln!(w, "nodes {}", disc.spaces.p2.n_nodes)?;
    for n in 0..disc.spaces.p2.n_nodes {
        let mut cols: Vec<String> =
            (0..d).map(|k| crate::fmt_f64(disc.spaces.p2.coords[n * d + k])).collect();
        for c in 0..d {
            cols.push(crate::fmt_f64(v_full[disc.spaces.dof(n, c)]));
        }
        writeln!(w, "{}", cols.join(" "))?;
    }
    writeln!(w, "vertices {}", disc.mesh.n_vertices())?;
    for v in 0..disc.mesh.n_vertices() {
        writeln!(w, "{}", crate::fmt_f64(s.p[v]))?;
    }
    Ok(())
}

/// Writes a Coulomb checkpoint: scenario hash, completed window, converged
/// threshold and trace-history prefix, and the trajectory states.
pub fn write_checkpoint(
    path: impl AsRef<Path>,
    scenario_hash: &str,
    progress: &CoulombProgress,
    grid: &[f64],
    trajectory: Option<&Trajectory>,
) -> Result<(), Error> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    writeln!(w, "CHECKPOINT v1").map_err(io_err)?;
    writeln!(w, "scenario {scenario_hash}").map_err(io_err)?;
    writeln!(w, "tau {} n_tau {}", crate::fmt_f64(grid[progress.n_tau]), progress.n_tau).map_err(io_err)?;
    let n_qp = progress.ell_prefix.first().map_or(0, Vec::len);
    writeln!(w, "threshold {} {}", progress.ell_prefix.len(), n_qp).map_err(io_err)?;
    for row in &progress.ell_prefix {
        let cols: Vec<String> = row.iter().map(|&v| crate::fmt_f64(v)).collect();
        writeln!(w, "{}", cols.join(" ")).map_err(io_err)?;
    }
    writeln!(w, "history {} {}", progress.history_prefix.len(), n_qp).map_err(io_err)?;
    for row in &progress.history_prefix {
        let cols: Vec<String> = row.iter().map(|&v| crate::fmt_f64(v)).collect();
        writeln!(w, "{}", cols.join(" ")).map_err(io_err)?;
    }
    match trajectory {
        Some(traj) => {
            let nf = traj.states.first().map_or(0, |s| s.v.len());
            let np = traj.states.first().map_or(0, |s| s.p.len());
            writeln!(w, "trajectory {} {} {}", traj.states.len(), nf, np).map_err(io_err)?;
            for s in &traj.states {
                let mut cols = Vec::with_capacity(1 + nf + np);
                cols.push(crate::fmt_f64(s.t));
                cols.extend(s.v.iter().map(|&v| crate::fmt_f64(v)));
                cols.extend(s.p.iter().map(|&v| crate::fmt_f64(v)));
                writeln!(w, "{}", cols.join(" ")).map_err(io_err)?;
            }
        }
        None => writeln!(w, "trajectory 0 0 0").map_err(io_err)?,
    }
    Ok(())
}

/// Reads a checkpoint back; the stored scenario hash must match.
pub fn read_checkpoint(path: impl AsRef<Path>, scenario_hash: &str) -> Result<CoulombProgress, Error> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    fn next_line(lines: &mut dyn Iterator<Item = std::io::Result<String>>) -> Result<String, Error> {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))?
            .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))
    }
    let header = next_line(&mut lines)?;
    if header.trim() != "CHECKPOINT v1" {
        return Err(Error::Checkpoint(format!("bad header `{header}`")));
    }
    let hash_line = next_line(&mut lines)?;
    let stored = hash_line.strip_prefix("scenario ").unwrap_or("").trim().to_string();
    if stored != scenario_hash {
        return Err(Error::Checkpoint(format!(
            "scenario hash mismatch: checkpoint {stored}, current {scenario_hash}"
        )));
    }
    let tau_line = next_line(&mut lines)?;
    let n_tau: usize = tau_line
        .split_whitespace()
        .last()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad tau line `{tau_line}`")))?;
    let parse_block = |header: String, lines: &mut dyn Iterator<Item = std::io::Result<String>>, what: &str| -> Result<Vec<Vec<f64>>, Error> {
        let mut it = header.split_whitespace();
        let tag = it.next().unwrap_or("");
        if tag != what {
            return Err(Error::Checkpoint(format!("expected `{what}` block, got `{header}`")));
        }
        let rows: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::Checkpoint("bad block size".into()))?;
        let mut out = Vec::with_capacity(rows);
        for _ in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))?
                .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
            let row: Result<Vec<f64>, _> = line.split_whitespace().map(|t| t.parse::<f64>()).collect();
            out.push(row.map_err(|e| Error::Checkpoint(format!("bad value: {e}")))?);
        }
        Ok(out)
    };
    let header = next_line(&mut lines)?;
    let ell_prefix = parse_block(header, &mut lines, "threshold")?;
    let header = next_line(&mut lines)?;
    let history_prefix = parse_block(header, &mut lines, "history")?;
    if ell_prefix.len() != n_tau + 1 || history_prefix.len() != n_tau + 1 {
        return Err(Error::Checkpoint(format!(
            "prefix rows ({} / {}) inconsistent with tau index {}",
            ell_prefix.len(),
            history_prefix.len(),
            n_tau
        )));
    }
    Ok(CoulombProgress { n_tau, ell_prefix, history_prefix })
}

/// Standard output-directory layout helper for the CLI.
pub fn out_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::friction::ThresholdField;
    use crate::timestepping::tests::couette_scenario;
    use crate::timestepping::{run_tresca, Discretization, RunConfig};

    #[test]
    fn outputs_are_deterministic() {
        let scenario = couette_scenario(3, 0.25, 0.5, 1e-4);
        let disc = Discretization::build(&scenario).unwrap();
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, ..Default::default() }).unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let m1 = write_outputs(&disc, &scenario, &traj, Some(&ell), None, dir1.path()).unwrap();
        let m2 = write_outputs(&disc, &scenario, &traj, Some(&ell), None, dir2.path()).unwrap();
        assert_eq!(m1, m2);
        // manifest hash changes iff any output byte changes
        let mut traj2 = traj.clone();
        traj2.states.last_mut().unwrap().v[0] += 1e-13;
        let dir3 = tempfile::tempdir().unwrap();
        let m3 = write_outputs(&disc, &scenario, &traj2, Some(&ell), None, dir3.path()).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn zero_flow_kinetic_column_is_zero() {
        let mut scenario = couette_scenario(3, 0.25, 0.5, 1e-4);
        scenario.wall_s = 0.0;
        let disc = Discretization::build(&scenario).unwrap();
        let ell = ThresholdField::constant(1.0, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&disc, &scenario, &traj, None, None, dir.path()).unwrap();
        let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
        for line in energy.lines().skip(1) {
            let kinetic: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!(kinetic.abs() <= 1e-24, "kinetic {kinetic}");
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let progress = CoulombProgress {
            n_tau: 2,
            ell_prefix: vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]],
            history_prefix: vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![0.25, 1.0 / 3.0]],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let grid = [0.0, 0.5, 1.0, 1.5];
        write_checkpoint(&path, "abc123", &progress, &grid, None).unwrap();
        let back = read_checkpoint(&path, "abc123").unwrap();
        assert_eq!(progress, back);
        // hash mismatch is rejected
        assert!(read_checkpoint(&path, "other").is_err());
    }
}
