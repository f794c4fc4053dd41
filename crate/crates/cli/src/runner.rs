//! Takes a validated experiment from config to a directory of artifacts:
//! evolve, measure, write tables, then inventory everything in a manifest.
//! The manifest is written even when the run fails, so a crash still leaves
//! a readable record of what happened and which files are trustworthy.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use qcwave::dynamics::{evolve, EvolverConfig, EvolverKind, SimState, Termination};
use qcwave::fields::{
    circle_loop, decompose, gaussian_packet, gaussian_polar, recompose, truncated_gaussian,
    vortex_state, winding_circulation, MadelungFields, ScalarField, WaveFunction, NODE_EPS,
};
use qcwave::observables::{
    ehrenfest_residuals, interference_excess, r_linearity_defect, superposition_violation,
    ProbeResult,
};
use qcwave::statistics::{
    collapse_position, exchange_term_max, momentum_from_positions, pure_vs_mixed_expectation,
    sample_measurement, DiagonalObservable, PositiveBasis,
};
use qcwave::trajectories::{advect_series, sample_ensemble};
use qcwave::{Grid, PhysicalConstants};

use crate::config::{
    ConfigError, ExperimentConfig, GaussianParams, InitialState, ProbeKind, ValidatedConfig,
};
use crate::output::{
    self, ClockStamp, FileRecord, ProbeRow, RunManifest, SoftwareStamp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Caustic,
    Blowup,
    Error,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Caustic => "caustic",
            RunStatus::Blowup => "blowup",
            RunStatus::Error => "error",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::Caustic | RunStatus::Blowup | RunStatus::Error => 3,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub detail: Option<String>,
    pub out_dir: PathBuf,
    pub manifest_path: PathBuf,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 4,
        }
    }
}

/// Runs one experiment. Numerical terminations (caustic, blowup, a probe
/// that cannot complete) are reported in the returned outcome, not as
/// errors; `Err` is reserved for bad configs and filesystem trouble.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunOutcome, RunError> {
    let validated = cfg
        .validate()
        .map_err(|e| RunError::Config(ConfigError::Validation(e)))?;

    let out_dir: PathBuf = match out_override {
        Some(dir) => dir.to_path_buf(),
        None => validated
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&validated.scenario)),
    };
    std::fs::create_dir_all(&out_dir)?;

    let started = chrono::Utc::now().to_rfc3339();
    let mut files: Vec<String> = Vec::new();
    let inner = execute(cfg, &validated, seed_override, &out_dir, &mut files);

    let (status, detail) = match &inner {
        Ok((status, detail)) => (*status, detail.clone()),
        Err(Step::Numerical(msg)) => (RunStatus::Error, Some(msg.clone())),
        Err(Step::Io(e)) => (RunStatus::Error, Some(format!("i/o failure: {e}"))),
    };

    let mut records: Vec<FileRecord> = Vec::with_capacity(files.len());
    for name in &files {
        if out_dir.join(name).is_file() {
            records.push(output::file_record(&out_dir, name)?);
        }
    }
    let manifest = RunManifest {
        scenario: validated.scenario.clone(),
        status: status.as_str().to_string(),
        detail: detail.clone(),
        software: SoftwareStamp {
            name: "qcwave".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        clock: ClockStamp {
            started,
            finished: chrono::Utc::now().to_rfc3339(),
        },
        config: cfg.clone(),
        files: records,
    };
    let manifest_path = output::write_manifest(&out_dir, &manifest)?;

    if let Err(Step::Io(e)) = inner {
        return Err(RunError::Io(e));
    }
    Ok(RunOutcome {
        status,
        detail,
        out_dir,
        manifest_path,
    })
}

/// A failure inside the run pipeline, after config validation.
enum Step {
    Numerical(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for Step {
    fn from(e: std::io::Error) -> Self {
        Step::Io(e)
    }
}

fn num<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> Step + '_ {
    move |e| Step::Numerical(format!("{what}: {e}"))
}

fn execute(
    cfg: &ExperimentConfig,
    v: &ValidatedConfig,
    seed_override: Option<u64>,
    out_dir: &Path,
    files: &mut Vec<String>,
) -> Result<(RunStatus, Option<String>), Step> {
    let grid = &v.grid;
    let c = &v.constants;

    let initial = build_initial(v).map_err(Step::Numerical)?;
    let mut out = evolve(initial, &v.potential, c, &v.evolver, |_, _| {})
        .map_err(num("evolution failed"))?;

    if out.records.len() >= 3 {
        ehrenfest_residuals(&mut out.records, &out.snapshots, &v.potential, c)
            .map_err(num("residual diagnostics failed"))?;
    }

    files.push("diagnostics.csv".to_string());
    output::write_diagnostics(&out_dir.join("diagnostics.csv"), &out.records)?;

    let v_field = v
        .potential
        .sample(grid, c)
        .map_err(num("potential sampling failed"))?;
    for (i, state) in out.snapshots.states().iter().enumerate() {
        let name = format!("fields_{i:06}.csv");
        files.push(name.clone());
        output::write_fields_snapshot(&out_dir.join(&name), state, &v_field, c)
            .map_err(Step::Numerical)?;
    }

    if let Some(spec) = &v.trajectories {
        let seed = seed_override.unwrap_or(spec.seed);
        let density = out.snapshots.states()[0].density();
        let t0 = out.snapshots.times()[0];
        let ensemble = sample_ensemble(&density, spec.count, seed, t0)
            .map_err(num("trajectory sampling failed"))?;
        let series = advect_series(&ensemble, &out.snapshots, c)
            .map_err(num("trajectory advection failed"))?;
        files.push("trajectories.csv".to_string());
        output::write_trajectories(&out_dir.join("trajectories.csv"), &series, grid.dim())?;
    }

    if !v.probes.is_empty() {
        let mut rows: Vec<ProbeRow> = Vec::new();
        for probe in &v.probes {
            rows.extend(run_probe(probe, cfg, v, &out, seed_override)?);
        }
        files.push("probes.csv".to_string());
        output::write_probes(&out_dir.join("probes.csv"), &rows)?;
    }

    Ok(match &out.termination {
        Termination::Completed => (RunStatus::Completed, None),
        Termination::Caustic(report) => {
            let pos = if grid.dim() == 1 {
                format!("x = {:.6}", report.position[0])
            } else {
                format!("x = ({:.6}, {:.6})", report.position[0], report.position[1])
            };
            (
                RunStatus::Caustic,
                Some(format!(
                    "stopped at t = {:.6} near {pos}: {}",
                    report.time, report.trigger
                )),
            )
        }
        Termination::Blowup { time } => (
            RunStatus::Blowup,
            Some(format!("state became non-finite at t = {time:.6}")),
        ),
    })
}

fn build_initial(v: &ValidatedConfig) -> Result<SimState, String> {
    let grid = &v.grid;
    let c = &v.constants;
    let kind = v.evolver.kind;
    match (&v.initial, kind) {
        (InitialState::Gaussian(g), EvolverKind::Linear) => {
            gaussian_packet(grid, c, &g.x0, g.sigma, &g.p0, g.chirp)
                .map(SimState::Linear)
                .map_err(|e| format!("initial state: {e}"))
        }
        (InitialState::Gaussian(g), EvolverKind::Classical) => {
            gaussian_polar(grid, &g.x0, g.sigma, &g.p0, g.chirp)
                .map(SimState::Classical)
                .map_err(|e| format!("initial state: {e}"))
        }
        (InitialState::TwoGaussian { a, b, c1, c2 }, kind) => {
            let psi = superposed_packet(grid, c, a, b, *c1, *c2)?;
            match kind {
                EvolverKind::Linear => Ok(SimState::Linear(psi)),
                EvolverKind::Classical => decompose(&psi, c, NODE_EPS)
                    .map(SimState::Classical)
                    .map_err(|e| format!("initial state: {e}")),
            }
        }
        (InitialState::Vortex { n, r0 }, kind) => {
            let psi =
                vortex_state(grid, c, *n, *r0).map_err(|e| format!("initial state: {e}"))?;
            match kind {
                EvolverKind::Linear => Ok(SimState::Linear(psi)),
                EvolverKind::Classical => decompose(&psi, c, NODE_EPS)
                    .map(SimState::Classical)
                    .map_err(|e| format!("initial state: {e}")),
            }
        }
        (InitialState::Tabulated { path }, kind) => {
            let r = crate::config::load_scalar_column(path, grid, "r")
                .map_err(|e| format!("initial state: {e}"))?;
            let s = crate::config::load_scalar_column(path, grid, "s")
                .map_err(|e| format!("initial state: {e}"))?;
            let mut fields = MadelungFields::new(grid.clone(), r.into_data(), s.into_data())
                .map_err(|e| format!("initial state: {e}"))?;
            normalize_fields(&mut fields)?;
            match kind {
                EvolverKind::Linear => Ok(SimState::Linear(recompose(&fields, c))),
                EvolverKind::Classical => Ok(SimState::Classical(fields)),
            }
        }
    }
}

fn normalize_fields(fields: &mut MadelungFields) -> Result<(), String> {
    let grid = fields.grid().clone();
    let norm = fields.amplitude_field().norm_l2();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err("initial state: amplitude has zero norm".to_string());
    }
    let r: Vec<f64> = fields.r().iter().map(|&x| x / norm).collect();
    let s = fields.s().to_vec();
    *fields = MadelungFields::new(grid, r, s).map_err(|e| format!("initial state: {e}"))?;
    Ok(())
}

fn superposed_packet(
    grid: &Grid,
    c: &PhysicalConstants,
    a: &GaussianParams,
    b: &GaussianParams,
    c1: Complex64,
    c2: Complex64,
) -> Result<WaveFunction, String> {
    let psi1 = gaussian_packet(grid, c, &a.x0, a.sigma, &a.p0, a.chirp)
        .map_err(|e| format!("initial state: {e}"))?;
    let psi2 = gaussian_packet(grid, c, &b.x0, b.sigma, &b.p0, b.chirp)
        .map_err(|e| format!("initial state: {e}"))?;
    let mut psi = WaveFunction::superpose(&psi1, &psi2, c1, c2)
        .map_err(|e| format!("initial state: {e}"))?;
    psi.normalize().map_err(|e| format!("initial state: {e}"))?;
    Ok(psi)
}

fn probe_rows(result: &ProbeResult) -> Vec<ProbeRow> {
    result
        .times
        .iter()
        .zip(&result.values)
        .map(|(&t, &value)| ProbeRow {
            probe: result.name.clone(),
            t,
            metric: value,
            threshold: result.threshold,
        })
        .collect()
}

fn run_probe(
    probe: &ProbeKind,
    cfg: &ExperimentConfig,
    v: &ValidatedConfig,
    out: &qcwave::dynamics::EvolveOutput,
    seed_override: Option<u64>,
) -> Result<Vec<ProbeRow>, Step> {
    let grid = &v.grid;
    let c = &v.constants;
    match probe {
        ProbeKind::SuperpositionViolation { threshold } => {
            let InitialState::TwoGaussian { a, b, c1, c2 } = &v.initial else {
                return Err(Step::Numerical(
                    "superposition probe needs a two-branch initial state".to_string(),
                ));
            };
            let psi1 = gaussian_packet(grid, c, &a.x0, a.sigma, &a.p0, a.chirp)
                .map_err(num("superposition probe"))?;
            let psi2 = gaussian_packet(grid, c, &b.x0, b.sigma, &b.p0, b.chirp)
                .map_err(num("superposition probe"))?;
            let result =
                superposition_violation(&psi1, &psi2, *c1, *c2, &v.potential, c, &v.evolver, *threshold)
                    .map_err(num("superposition probe"))?;
            Ok(probe_rows(&result))
        }
        ProbeKind::RLinearity {
            threshold,
            centers,
            sigmas,
            weights,
        } => {
            let zero = vec![0.0; grid.dim()];
            let r_a = gaussian_polar(grid, &[centers[0]], sigmas[0], &zero, 0.0)
                .map_err(num("additivity probe"))?
                .amplitude_field();
            let r_b = gaussian_polar(grid, &[centers[1]], sigmas[1], &zero, 0.0)
                .map_err(num("additivity probe"))?
                .amplitude_field();
            let result = r_linearity_defect(
                &r_a,
                &r_b,
                weights[0],
                weights[1],
                &out.snapshots,
                c,
                *threshold,
            )
            .map_err(num("additivity probe"))?;
            Ok(probe_rows(&result))
        }
        ProbeKind::Interference { visibility_floor } => {
            let InitialState::TwoGaussian { a, b, c1, c2 } = &v.initial else {
                return Err(Step::Numerical(
                    "interference probe needs a two-branch initial state".to_string(),
                ));
            };
            let part1 = weighted_part(grid, c, a, *c1).map_err(num("interference probe"))?;
            let part2 = weighted_part(grid, c, b, *c2).map_err(num("interference probe"))?;
            let pattern = interference_excess(&part1, &part2, v.evolver.kind, c)
                .map_err(num("interference probe"))?;
            Ok(vec![
                ProbeRow {
                    probe: "interference_negativity".to_string(),
                    t: 0.0,
                    metric: -pattern.min_excess,
                    threshold: 0.0,
                },
                ProbeRow {
                    probe: "interference_visibility".to_string(),
                    t: 0.0,
                    metric: pattern.visibility,
                    threshold: *visibility_floor,
                },
            ])
        }
        ProbeKind::PureVsMixed {
            threshold,
            centers,
            sigmas,
            supports,
            weights,
        } => {
            let mut fields = Vec::with_capacity(centers.len());
            for i in 0..centers.len() {
                fields.push(
                    truncated_gaussian(grid, &[centers[i]], sigmas[i], supports[i])
                        .map_err(num("pure-vs-mixed probe"))?,
                );
            }
            let basis = PositiveBasis::new(fields, weights.clone())
                .map_err(num("pure-vs-mixed probe"))?;
            let mut rows = Vec::new();
            for (label, obs) in [
                ("pure_vs_mixed_x", DiagonalObservable::position(grid, 0)),
                ("pure_vs_mixed_x2", DiagonalObservable::position_squared(grid, 0)),
            ] {
                let split = pure_vs_mixed_expectation(&basis, &obs)
                    .map_err(num("pure-vs-mixed probe"))?;
                rows.push(ProbeRow {
                    probe: label.to_string(),
                    t: 0.0,
                    metric: split.cross_term.abs(),
                    threshold: *threshold,
                });
            }
            Ok(rows)
        }
        ProbeKind::Exchange {
            threshold,
            separation,
            sigma,
        } => {
            let half = separation / 2.0;
            let packet = |center: f64| -> Result<ScalarField, Step> {
                let mut r = ScalarField::from_fn(grid.clone(), |pos| {
                    let d = pos[0] - center;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                });
                r.normalize_l2().map_err(num("exchange probe"))?;
                Ok(r)
            };
            let g1 = packet(-half)?;
            let g2 = packet(half)?;
            let tail_value = exchange_term_max(&g1, &g2).map_err(num("exchange probe"))?;

            let support = (3.0 * sigma).min(0.45 * separation);
            let t1 = truncated_gaussian(grid, &[-half], *sigma, support)
                .map_err(num("exchange probe"))?;
            let t2 = truncated_gaussian(grid, &[half], *sigma, support)
                .map_err(num("exchange probe"))?;
            let disjoint_value = exchange_term_max(&t1, &t2).map_err(num("exchange probe"))?;

            Ok(vec![
                ProbeRow {
                    probe: "exchange_gaussian".to_string(),
                    t: 0.0,
                    metric: tail_value,
                    threshold: *threshold,
                },
                ProbeRow {
                    probe: "exchange_disjoint".to_string(),
                    t: 0.0,
                    metric: disjoint_value,
                    threshold: *threshold,
                },
            ])
        }
        ProbeKind::Winding {
            threshold,
            expected_n,
            radius,
            loop_samples,
        } => {
            let center = [
                (grid.axis(0).min + grid.axis(0).max) / 2.0,
                (grid.axis(1).min + grid.axis(1).max) / 2.0,
            ];
            let loop_indices = circle_loop(grid, center, *radius, *loop_samples)
                .map_err(num("winding probe"))?;
            let mut rows = Vec::new();
            for (i, state) in out.snapshots.states().iter().enumerate() {
                let t = out.snapshots.times()[i];
                let fields = match state {
                    SimState::Classical(f) => f.clone(),
                    SimState::Linear(psi) => {
                        decompose(psi, c, NODE_EPS).map_err(num("winding probe"))?
                    }
                };
                let w = winding_circulation(&fields, c, &loop_indices)
                    .map_err(num("winding probe"))?;
                let quanta = w.circulation / (std::f64::consts::TAU * c.hbar);
                rows.push(ProbeRow {
                    probe: "winding_defect".to_string(),
                    t,
                    metric: (quanta - *expected_n as f64).abs(),
                    threshold: *threshold,
                });
            }
            Ok(rows)
        }
        ProbeKind::IndirectMomentum {
            width,
            t1,
            t2,
            cycles,
            seed,
        } => {
            let seed = seed_override.unwrap_or(*seed);
            let times = out.snapshots.times();
            let start = times
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (**a - t1).abs().total_cmp(&(**b - t1).abs())
                })
                .map(|(i, _)| i)
                .expect("snapshot series is never empty");
            let t1_eff = times[start];
            let Some(fields0) = out.snapshots.states()[start].as_classical() else {
                return Err(Step::Numerical(
                    "momentum probe needs a classical run".to_string(),
                ));
            };
            let p_true = out.records[0].mean_p;
            let budget = width / (t2 - t1_eff);
            let probe_cfg = EvolverConfig::new(EvolverKind::Classical, cfg.time.dt, t2 - t1_eff)
                .and_then(|e| e.with_snapshot_stride(1_000_000))
                .map_err(num("momentum probe"))?;

            let rho0 = fields0.density();
            let mut rows = Vec::new();
            let mut estimates = Vec::with_capacity(*cycles);
            for k in 0..*cycles {
                let x1 = sample_measurement(&rho0, seed.wrapping_add(2 * k as u64))
                    .map_err(num("momentum probe"))?;
                let collapsed = collapse_position(fields0, &x1[..grid.dim()], *width)
                    .map_err(num("momentum probe"))?;
                let run = evolve(
                    SimState::Classical(collapsed),
                    &v.potential,
                    c,
                    &probe_cfg,
                    |_, _| {},
                )
                .map_err(num("momentum probe"))?;
                if !run.termination.is_completed() {
                    return Err(Step::Numerical(format!(
                        "momentum probe: collapsed state did not reach t2 on cycle {k}"
                    )));
                }
                let rho2 = run.state.density();
                let x2 = sample_measurement(&rho2, seed.wrapping_add(2 * k as u64 + 1))
                    .map_err(num("momentum probe"))?;
                let p = momentum_from_positions(x1, t1_eff, x2, *t2, c)
                    .map_err(num("momentum probe"))?;
                estimates.push(p[0]);
                rows.push(ProbeRow {
                    probe: "momentum_error".to_string(),
                    t: *t2,
                    metric: (p[0] - p_true).abs(),
                    threshold: budget,
                });
            }
            let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
            rows.push(ProbeRow {
                probe: "momentum_error_mean".to_string(),
                t: *t2,
                metric: (mean - p_true).abs(),
                threshold: budget,
            });
            Ok(rows)
        }
    }
}

/// A unit-norm branch scaled by its coefficient: amplitude |c| R, action
/// S + hbar arg(c).
fn weighted_part(
    grid: &Grid,
    c: &PhysicalConstants,
    g: &GaussianParams,
    coeff: Complex64,
) -> Result<MadelungFields, qcwave::fields::FieldsError> {
    let part = gaussian_polar(grid, &g.x0, g.sigma, &g.p0, g.chirp)?;
    let w = coeff.norm();
    let phase = coeff.arg() * c.hbar;
    let r: Vec<f64> = part.r().iter().map(|&x| w * x).collect();
    let s: Vec<f64> = part.s().iter().map(|&x| x + phase).collect();
    MadelungFields::new(grid.clone(), r, s)
}
