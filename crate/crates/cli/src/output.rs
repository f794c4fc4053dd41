//! On-disk artifacts of a run: diagnostics, field snapshots, trajectories,
//! probe rows, and the manifest that inventories them all.
//!
//! Every float is written with 17 significant digits so that re-reading the
//! tables loses nothing, and the manifest is written via a temp-file rename
//! so a crash never leaves a half manifest behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use qcwave::dynamics::SimState;
use qcwave::fields::{decompose, quantum_potential, NODE_EPS, REG_EPS};
use qcwave::observables::DiagnosticsRecord;
use qcwave::trajectories::TrajectoryEnsemble;
use qcwave::PhysicalConstants;

use crate::config::ExperimentConfig;

/// One row of `probes.csv`.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub probe: String,
    pub t: f64,
    pub metric: f64,
    pub threshold: f64,
}

impl ProbeRow {
    pub fn verdict(&self) -> &'static str {
        if self.metric > self.threshold {
            "exceeded"
        } else {
            "within"
        }
    }
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(
        "t,norm,energy,mean_x,mean_p,sigma_x,sigma_p,ehrenfest1,ehrenfest2,node_count,min_rho\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            f(r.t),
            f(r.norm),
            f(r.energy),
            f(r.mean_x),
            f(r.mean_p),
            f(r.sigma_x),
            f(r.sigma_p),
            f(r.ehrenfest1),
            f(r.ehrenfest2),
            r.node_count,
            f(r.min_rho),
        ));
    }
    fs::write(path, out)
}

/// Writes one field snapshot. Linear states are decomposed into amplitude
/// and action first; the curvature potential is recomputed from the
/// amplitude, and `v` is the potential sampled on the grid.
pub fn write_fields_snapshot(
    path: &Path,
    state: &SimState,
    v: &qcwave::fields::ScalarField,
    c: &PhysicalConstants,
) -> Result<(), String> {
    let grid = state.grid().clone();
    let fields = match state {
        SimState::Linear(psi) => decompose(psi, c, NODE_EPS).map_err(|e| e.to_string())?,
        SimState::Classical(f) => f.clone(),
    };
    let rho = state.density();
    let amplitude = fields.amplitude_field();
    let (q, _) = quantum_potential(&amplitude, c, REG_EPS).map_err(|e| e.to_string())?;

    let mut out = String::new();
    if grid.dim() == 1 {
        out.push_str("x,rho,R,S,Q,V\n");
    } else {
        out.push_str("x,y,rho,R,S,Q,V\n");
    }
    for i in 0..grid.len() {
        let pos = grid.coords(i);
        if grid.dim() == 1 {
            out.push_str(&f(pos[0]));
        } else {
            out.push_str(&format!("{},{}", f(pos[0]), f(pos[1])));
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            f(rho.data()[i]),
            f(fields.r()[i]),
            f(fields.s()[i]),
            f(q.data()[i]),
            f(v.data()[i]),
        ));
    }
    fs::write(path, out).map_err(|e| e.to_string())
}

pub fn write_trajectories(
    path: &Path,
    series: &[TrajectoryEnsemble],
    dim: usize,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(match dim {
        1 => "traj_id,t,x,vx,valid\n",
        _ => "traj_id,t,x,y,vx,vy,valid\n",
    });
    for ens in series {
        for i in 0..ens.len() {
            let p = ens.positions[i];
            let v = ens.velocities[i];
            let valid = ens.valid[i];
            if dim == 1 {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    i,
                    f(ens.t),
                    f(p[0]),
                    f(v[0]),
                    valid,
                ));
            } else {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    i,
                    f(ens.t),
                    f(p[0]),
                    f(p[1]),
                    f(v[0]),
                    f(v[1]),
                    valid,
                ));
            }
        }
    }
    fs::write(path, out)
}

pub fn write_probes(path: &Path, rows: &[ProbeRow]) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str("probe,t,metric,threshold,verdict\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.probe,
            f(row.t),
            f(row.metric),
            f(row.threshold),
            row.verdict(),
        ));
    }
    fs::write(path, out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SoftwareStamp {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClockStamp {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// The run inventory: identity, outcome, configuration echo, and a checksum
/// for every data file the run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub software: SoftwareStamp,
    pub clock: ClockStamp,
    pub config: ExperimentConfig,
    pub files: Vec<FileRecord>,
}

pub fn file_record(dir: &Path, name: &str) -> std::io::Result<FileRecord> {
    let bytes = fs::read(dir.join(name))?;
    let digest = Sha256::digest(&bytes);
    let sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileRecord {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        sha256,
    })
}

/// Serializes the manifest and moves it into place atomically.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> std::io::Result<PathBuf> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let final_path = dir.join("manifest.toml");
    let tmp_path = dir.join("manifest.toml.tmp");
    {
        let mut tmp = fs::File::create(&tmp_path)?;
        tmp.write_all(text.as_bytes())?;
        tmp.sync_all()?;
    }
    fs::rename(&tmp_path, &final_path)?;
    Ok(final_path)
}
