//! Experiment descriptions: strict TOML parsing and exhaustive validation.
//!
//! Parsing rejects unknown keys outright. Validation never stops at the first
//! problem; it walks the whole config and reports every defect with its field
//! path, so a bad file is fixed in one round trip.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use qcwave::dynamics::{EvolverConfig, EvolverKind, Potential};
use qcwave::fields::{gaussian_polar, Axis, ScalarField};
use qcwave::{Boundary, Grid, PhysicalConstants};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Validation(ValidationErrors),
}

/// Every validation defect found in one pass, each tagged with a field path.
#[derive(Debug)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "invalid configuration ({} error{}):",
            self.0.len(),
            if self.0.len() == 1 { "" } else { "s" }
        )?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub physics: PhysicsSpec,
    pub potential: PotentialSpec,
    pub initial: InitialSpec,
    pub evolver: EvolverSpec,
    pub time: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectorySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: Vec<usize>,
    pub bounds: Vec<[f64; 2]>,
    pub boundary: BoundarySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Periodic,
    Absorbing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PhysicsSpec {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// One of `free`, `harmonic`, `quartic`, `tilt`, `tabulated`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// One of `gaussian`, `two_gaussian`, `vortex`, `tabulated`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<GaussianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<GaussianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<ComplexSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<ComplexSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub x0: Vec<f64>,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexSpec {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolverSpec {
    /// `linear` or `classical`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// One of `superposition_violation`, `r_linearity`, `interference`,
    /// `pure_vs_mixed`, `exchange`, `winding`, `indirect_momentum`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supports: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// Everything the runner needs, already lowered to library types.
#[derive(Debug)]
pub struct ValidatedConfig {
    pub scenario: String,
    pub grid: Grid,
    pub constants: PhysicalConstants,
    pub potential: Potential,
    pub initial: InitialState,
    pub evolver: EvolverConfig,
    pub trajectories: Option<TrajectorySpec>,
    pub probes: Vec<ProbeKind>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub x0: Vec<f64>,
    pub sigma: f64,
    pub p0: Vec<f64>,
    pub chirp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Gaussian(GaussianParams),
    TwoGaussian {
        a: GaussianParams,
        b: GaussianParams,
        c1: Complex64,
        c2: Complex64,
    },
    Vortex {
        n: i32,
        r0: f64,
    },
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeKind {
    SuperpositionViolation {
        threshold: f64,
    },
    RLinearity {
        threshold: f64,
        centers: [f64; 2],
        sigmas: [f64; 2],
        weights: [f64; 2],
    },
    Interference {
        visibility_floor: f64,
    },
    PureVsMixed {
        threshold: f64,
        centers: Vec<f64>,
        sigmas: Vec<f64>,
        supports: Vec<f64>,
        weights: Vec<f64>,
    },
    Exchange {
        threshold: f64,
        separation: f64,
        sigma: f64,
    },
    Winding {
        threshold: f64,
        expected_n: i64,
        radius: f64,
        loop_samples: usize,
    },
    IndirectMomentum {
        width: f64,
        t1: f64,
        t2: f64,
        cycles: usize,
        seed: u64,
    },
}

pub const PROBE_NAMES: [&str; 7] = [
    "superposition_violation",
    "r_linearity",
    "interference",
    "pure_vs_mixed",
    "exchange",
    "winding",
    "indirect_momentum",
];

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the whole config and lowers it to library types. Collects every
    /// defect instead of stopping at the first one.
    pub fn validate(&self) -> Result<ValidatedConfig, ValidationErrors> {
        let mut errors: Vec<String> = Vec::new();

        if self.scenario.trim().is_empty() {
            errors.push("scenario: must be a non-empty name".into());
        }

        let constants = self.check_physics(&mut errors);
        let grid = self.check_grid(&mut errors);
        let potential = self.check_potential(grid.as_ref(), &mut errors);
        let evolver = self.check_evolver(&mut errors);
        let initial = self.check_initial(grid.as_ref(), &mut errors);
        let probes = self.check_probes(&mut errors);
        self.check_trajectories(&mut errors);
        self.check_cross_rules(grid.as_ref(), &constants, initial.as_ref(), &probes, &mut errors);

        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }
        Ok(ValidatedConfig {
            scenario: self.scenario.clone(),
            grid: grid.unwrap(),
            constants,
            potential: potential.unwrap(),
            initial: initial.unwrap(),
            evolver: evolver.unwrap(),
            trajectories: self.trajectories.clone(),
            probes: probes.into_iter().map(Option::unwrap).collect(),
            out_dir: self.output.dir.as_ref().map(PathBuf::from),
        })
    }

    fn check_physics(&self, errors: &mut Vec<String>) -> PhysicalConstants {
        if !(self.physics.hbar.is_finite() && self.physics.hbar > 0.0) {
            errors.push(format!(
                "physics.hbar: must be finite and positive, got {}",
                self.physics.hbar
            ));
        }
        if !(self.physics.mass.is_finite() && self.physics.mass > 0.0) {
            errors.push(format!(
                "physics.mass: must be finite and positive, got {}",
                self.physics.mass
            ));
        }
        PhysicalConstants {
            hbar: self.physics.hbar,
            mass: self.physics.mass,
        }
    }

    fn check_grid(&self, errors: &mut Vec<String>) -> Option<Grid> {
        let g = &self.grid;
        let before = errors.len();
        if !(1..=2).contains(&g.dim) {
            errors.push(format!("grid.dim: must be 1 or 2, got {}", g.dim));
            return None;
        }
        if g.n.len() != g.dim {
            errors.push(format!(
                "grid.n: expected {} entr{}, got {}",
                g.dim,
                if g.dim == 1 { "y" } else { "ies" },
                g.n.len()
            ));
        }
        if g.bounds.len() != g.dim {
            errors.push(format!(
                "grid.bounds: expected {} pair{}, got {}",
                g.dim,
                if g.dim == 1 { "" } else { "s" },
                g.bounds.len()
            ));
        }
        for (i, [lo, hi]) in g.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                errors.push(format!(
                    "grid.bounds[{i}]: need finite min < max, got [{lo}, {hi}]"
                ));
            }
        }
        if errors.len() > before {
            return None;
        }
        let boundary = match g.boundary {
            BoundarySpec::Periodic => Boundary::Periodic,
            BoundarySpec::Absorbing => Boundary::AbsorbingPad,
        };
        let axes: Vec<Axis> = g
            .n
            .iter()
            .zip(&g.bounds)
            .map(|(&n, &[min, max])| Axis { n, min, max })
            .collect();
        match Grid::new(axes, boundary) {
            Ok(grid) => Some(grid),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        }
    }

    fn check_potential(&self, grid: Option<&Grid>, errors: &mut Vec<String>) -> Option<Potential> {
        let p = &self.potential;
        let forbid = |errors: &mut Vec<String>, field: &str, set: bool, kind: &str| {
            if set {
                errors.push(format!(
                    "potential.{field}: not a parameter of kind \"{kind}\""
                ));
            }
        };
        match p.kind.as_str() {
            "free" => {
                forbid(errors, "omega", p.omega.is_some(), "free");
                forbid(errors, "lambda", p.lambda.is_some(), "free");
                forbid(errors, "force", p.force.is_some(), "free");
                forbid(errors, "file", p.file.is_some(), "free");
                Some(Potential::Free)
            }
            "harmonic" => {
                forbid(errors, "lambda", p.lambda.is_some(), "harmonic");
                forbid(errors, "force", p.force.is_some(), "harmonic");
                forbid(errors, "file", p.file.is_some(), "harmonic");
                match p.omega {
                    Some(w) if w.is_finite() && w > 0.0 => Some(Potential::Harmonic { omega: w }),
                    Some(w) => {
                        errors.push(format!(
                            "potential.omega: must be finite and positive, got {w}"
                        ));
                        None
                    }
                    None => {
                        errors.push("potential.omega: required for kind \"harmonic\"".into());
                        None
                    }
                }
            }
            "quartic" => {
                forbid(errors, "omega", p.omega.is_some(), "quartic");
                forbid(errors, "force", p.force.is_some(), "quartic");
                forbid(errors, "file", p.file.is_some(), "quartic");
                match p.lambda {
                    Some(l) if l.is_finite() && l > 0.0 => Some(Potential::Quartic { lambda: l }),
                    Some(l) => {
                        errors.push(format!(
                            "potential.lambda: must be finite and positive, got {l}"
                        ));
                        None
                    }
                    None => {
                        errors.push("potential.lambda: required for kind \"quartic\"".into());
                        None
                    }
                }
            }
            "tilt" => {
                forbid(errors, "omega", p.omega.is_some(), "tilt");
                forbid(errors, "lambda", p.lambda.is_some(), "tilt");
                forbid(errors, "file", p.file.is_some(), "tilt");
                match p.force {
                    Some(f) if f.is_finite() => Some(Potential::LinearTilt { force: f }),
                    Some(f) => {
                        errors.push(format!("potential.force: must be finite, got {f}"));
                        None
                    }
                    None => {
                        errors.push("potential.force: required for kind \"tilt\"".into());
                        None
                    }
                }
            }
            "tabulated" => {
                forbid(errors, "omega", p.omega.is_some(), "tabulated");
                forbid(errors, "lambda", p.lambda.is_some(), "tabulated");
                forbid(errors, "force", p.force.is_some(), "tabulated");
                let Some(file) = &p.file else {
                    errors.push("potential.file: required for kind \"tabulated\"".into());
                    return None;
                };
                let grid = grid?;
                match load_scalar_column(Path::new(file), grid, "v") {
                    Ok(field) => Some(Potential::Tabulated(field)),
                    Err(e) => {
                        errors.push(format!("potential.file: {e}"));
                        None
                    }
                }
            }
            other => {
                errors.push(format!(
                    "potential.kind: unknown kind \"{other}\" (expected free, harmonic, quartic, tilt, or tabulated)"
                ));
                None
            }
        }
    }

    fn check_evolver(&self, errors: &mut Vec<String>) -> Option<EvolverConfig> {
        let kind = match self.evolver.kind.as_str() {
            "linear" => Some(EvolverKind::Linear),
            "classical" => Some(EvolverKind::Classical),
            other => {
                errors.push(format!(
                    "evolver.kind: unknown kind \"{other}\" (expected linear or classical)"
                ));
                None
            }
        };
        if !(self.time.dt.is_finite() && self.time.dt > 0.0) {
            errors.push(format!(
                "time.dt: must be finite and positive, got {}",
                self.time.dt
            ));
        }
        if !(self.time.t_end.is_finite() && self.time.t_end > 0.0) {
            errors.push(format!(
                "time.t_end: must be finite and positive, got {}",
                self.time.t_end
            ));
        }
        if let Some(stride) = self.time.snapshot_stride {
            if stride == 0 {
                errors.push("time.snapshot_stride: must be at least 1".into());
            }
        }
        if let Some(c) = self.evolver.c_cfl {
            if !(c.is_finite() && c > 0.0 && c <= 1.0) {
                errors.push(format!("evolver.c_cfl: must lie in (0, 1], got {c}"));
            }
        }
        if let Some(t) = self.evolver.theta_c {
            if !(t.is_finite() && t > 0.0) {
                errors.push(format!(
                    "evolver.theta_c: must be finite and positive, got {t}"
                ));
            }
        }

        let kind = kind?;
        let mut cfg = EvolverConfig::new(kind, self.time.dt, self.time.t_end).ok()?;
        if let Some(c) = self.evolver.c_cfl {
            cfg = cfg.with_c_cfl(c).ok()?;
        }
        if let Some(t) = self.evolver.theta_c {
            cfg = cfg.with_theta_c(t).ok()?;
        }
        if let Some(s) = self.time.snapshot_stride {
            cfg = cfg.with_snapshot_stride(s).ok()?;
        }
        Some(cfg)
    }

    fn check_gaussian_block(
        &self,
        grid: Option<&Grid>,
        path: &str,
        x0: Option<&Vec<f64>>,
        sigma: Option<f64>,
        p0: Option<&Vec<f64>>,
        chirp: Option<f64>,
        errors: &mut Vec<String>,
    ) -> Option<GaussianParams> {
        let before = errors.len();
        let dim = grid.map(Grid::dim).unwrap_or(self.grid.dim.max(1));
        let x0 = match x0 {
            Some(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Some(v.clone()),
            Some(v) => {
                errors.push(format!(
                    "{path}.x0: expected {dim} finite coordinate{}, got {v:?}",
                    if dim == 1 { "" } else { "s" }
                ));
                None
            }
            None => {
                errors.push(format!("{path}.x0: required"));
                None
            }
        };
        let sigma = match sigma {
            Some(s) if s.is_finite() && s > 0.0 => Some(s),
            Some(s) => {
                errors.push(format!(
                    "{path}.sigma: must be finite and positive, got {s}"
                ));
                None
            }
            None => {
                errors.push(format!("{path}.sigma: required"));
                None
            }
        };
        let p0 = match p0 {
            Some(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => v.clone(),
            Some(v) => {
                errors.push(format!(
                    "{path}.p0: expected {dim} finite component{}, got {v:?}",
                    if dim == 1 { "" } else { "s" }
                ));
                vec![0.0; dim]
            }
            None => vec![0.0; dim],
        };
        let chirp = match chirp {
            Some(c) if c.is_finite() => c,
            Some(c) => {
                errors.push(format!("{path}.chirp: must be finite, got {c}"));
                0.0
            }
            None => 0.0,
        };
        if errors.len() > before {
            return None;
        }
        Some(GaussianParams {
            x0: x0.unwrap(),
            sigma: sigma.unwrap(),
            p0,
            chirp,
        })
    }

    fn check_initial(&self, grid: Option<&Grid>, errors: &mut Vec<String>) -> Option<InitialState> {
        let i = &self.initial;
        let forbid = |errors: &mut Vec<String>, field: &str, set: bool, kind: &str| {
            if set {
                errors.push(format!(
                    "initial.{field}: not a parameter of kind \"{kind}\""
                ));
            }
        };
        match i.kind.as_str() {
            "gaussian" => {
                forbid(errors, "a", i.a.is_some(), "gaussian");
                forbid(errors, "b", i.b.is_some(), "gaussian");
                forbid(errors, "c1", i.c1.is_some(), "gaussian");
                forbid(errors, "c2", i.c2.is_some(), "gaussian");
                forbid(errors, "n", i.n.is_some(), "gaussian");
                forbid(errors, "r0", i.r0.is_some(), "gaussian");
                forbid(errors, "file", i.file.is_some(), "gaussian");
                let params = self.check_gaussian_block(
                    grid,
                    "initial",
                    i.x0.as_ref(),
                    i.sigma,
                    i.p0.as_ref(),
                    i.chirp,
                    errors,
                )?;
                Some(InitialState::Gaussian(params))
            }
            "two_gaussian" => {
                forbid(errors, "x0", i.x0.is_some(), "two_gaussian");
                forbid(errors, "sigma", i.sigma.is_some(), "two_gaussian");
                forbid(errors, "p0", i.p0.is_some(), "two_gaussian");
                forbid(errors, "chirp", i.chirp.is_some(), "two_gaussian");
                forbid(errors, "n", i.n.is_some(), "two_gaussian");
                forbid(errors, "r0", i.r0.is_some(), "two_gaussian");
                forbid(errors, "file", i.file.is_some(), "two_gaussian");
                let a = match &i.a {
                    Some(g) => self.check_gaussian_block(
                        grid,
                        "initial.a",
                        Some(&g.x0),
                        Some(g.sigma),
                        g.p0.as_ref(),
                        g.chirp,
                        errors,
                    ),
                    None => {
                        errors.push("initial.a: required for kind \"two_gaussian\"".into());
                        None
                    }
                };
                let b = match &i.b {
                    Some(g) => self.check_gaussian_block(
                        grid,
                        "initial.b",
                        Some(&g.x0),
                        Some(g.sigma),
                        g.p0.as_ref(),
                        g.chirp,
                        errors,
                    ),
                    None => {
                        errors.push("initial.b: required for kind \"two_gaussian\"".into());
                        None
                    }
                };
                let coeff = |errors: &mut Vec<String>, field: &str, c: Option<&ComplexSpec>| match c
                {
                    Some(c) if c.re.is_finite() && c.im.is_finite() && c.value().norm() > 0.0 => {
                        Some(c.value())
                    }
                    Some(c) => {
                        errors.push(format!(
                            "initial.{field}: must be finite and nonzero, got {} + {}i",
                            c.re, c.im
                        ));
                        None
                    }
                    None => {
                        errors.push(format!(
                            "initial.{field}: required for kind \"two_gaussian\""
                        ));
                        None
                    }
                };
                let c1 = coeff(errors, "c1", i.c1.as_ref());
                let c2 = coeff(errors, "c2", i.c2.as_ref());
                Some(InitialState::TwoGaussian {
                    a: a?,
                    b: b?,
                    c1: c1?,
                    c2: c2?,
                })
            }
            "vortex" => {
                forbid(errors, "x0", i.x0.is_some(), "vortex");
                forbid(errors, "sigma", i.sigma.is_some(), "vortex");
                forbid(errors, "p0", i.p0.is_some(), "vortex");
                forbid(errors, "chirp", i.chirp.is_some(), "vortex");
                forbid(errors, "a", i.a.is_some(), "vortex");
                forbid(errors, "b", i.b.is_some(), "vortex");
                forbid(errors, "c1", i.c1.is_some(), "vortex");
                forbid(errors, "c2", i.c2.is_some(), "vortex");
                forbid(errors, "file", i.file.is_some(), "vortex");
                if self.grid.dim != 2 {
                    errors.push("initial.kind: vortex states need a 2-dimensional grid".into());
                }
                let n = match i.n {
                    Some(n) => Some(n),
                    None => {
                        errors.push("initial.n: required for kind \"vortex\"".into());
                        None
                    }
                };
                let r0 = match i.r0 {
                    Some(r) if r.is_finite() && r > 0.0 => Some(r),
                    Some(r) => {
                        errors.push(format!(
                            "initial.r0: must be finite and positive, got {r}"
                        ));
                        None
                    }
                    None => {
                        errors.push("initial.r0: required for kind \"vortex\"".into());
                        None
                    }
                };
                if self.grid.dim != 2 {
                    return None;
                }
                Some(InitialState::Vortex { n: n?, r0: r0? })
            }
            "tabulated" => {
                forbid(errors, "x0", i.x0.is_some(), "tabulated");
                forbid(errors, "sigma", i.sigma.is_some(), "tabulated");
                forbid(errors, "p0", i.p0.is_some(), "tabulated");
                forbid(errors, "chirp", i.chirp.is_some(), "tabulated");
                forbid(errors, "a", i.a.is_some(), "tabulated");
                forbid(errors, "b", i.b.is_some(), "tabulated");
                forbid(errors, "c1", i.c1.is_some(), "tabulated");
                forbid(errors, "c2", i.c2.is_some(), "tabulated");
                forbid(errors, "n", i.n.is_some(), "tabulated");
                forbid(errors, "r0", i.r0.is_some(), "tabulated");
                let Some(file) = &i.file else {
                    errors.push("initial.file: required for kind \"tabulated\"".into());
                    return None;
                };
                let path = PathBuf::from(file);
                if !path.is_file() {
                    errors.push(format!("initial.file: no such file: {file}"));
                    return None;
                }
                Some(InitialState::Tabulated { path })
            }
            other => {
                errors.push(format!(
                    "initial.kind: unknown kind \"{other}\" (expected gaussian, two_gaussian, vortex, or tabulated)"
                ));
                None
            }
        }
    }

    fn check_probes(&self, errors: &mut Vec<String>) -> Vec<Option<ProbeKind>> {
        self.probes
            .iter()
            .enumerate()
            .map(|(idx, p)| check_probe(idx, p, errors))
            .collect()
    }

    fn check_trajectories(&self, errors: &mut Vec<String>) {
        if let Some(t) = &self.trajectories {
            if t.count == 0 {
                errors.push("trajectories.count: must be at least 1".into());
            }
        }
    }

    /// Rules that couple separate sections of the config.
    fn check_cross_rules(
        &self,
        grid: Option<&Grid>,
        constants: &PhysicalConstants,
        initial: Option<&InitialState>,
        probes: &[Option<ProbeKind>],
        errors: &mut Vec<String>,
    ) {
        let Some(grid) = grid else { return };

        let classical = self.evolver.kind == "classical";
        let linear = self.evolver.kind == "linear";

        if linear {
            if !grid.is_periodic() {
                errors.push(
                    "evolver.kind: linear evolution is spectral and needs grid.boundary = \"periodic\""
                        .into(),
                );
            }
            if !grid.power_of_two() {
                errors.push(
                    "evolver.kind: linear evolution is spectral and needs power-of-two grid sizes"
                        .into(),
                );
            }
        }

        if classical {
            let floor = 4.0 * grid.dx_max();
            let mut too_narrow = |path: &str, sigma: f64| {
                if sigma < floor {
                    errors.push(format!(
                        "{path}: width {sigma} is below 4 grid spacings ({floor}); classical transport is not certified that narrow"
                    ));
                }
            };
            match initial {
                Some(InitialState::Gaussian(g)) => too_narrow("initial.sigma", g.sigma),
                Some(InitialState::TwoGaussian { a, b, .. }) => {
                    too_narrow("initial.a.sigma", a.sigma);
                    too_narrow("initial.b.sigma", b.sigma);
                }
                _ => {}
            }
        }

        // Classical transport carries an amplitude and a phase, so the summed
        // initial state must not cancel anywhere inside the box.
        if classical {
            if let Some(InitialState::TwoGaussian { a, b, c1, c2 }) = initial {
                match superposition_node_risk(grid, constants, a, b, *c1, *c2) {
                    Ok(Some(why)) => {
                        errors.push(format!(
                            "initial: {why}; classical evolution needs a node-free sum"
                        ));
                    }
                    Ok(None) => {}
                    Err(e) => errors.push(format!("initial: {e}")),
                }
            }
        }

        for (idx, probe) in probes.iter().enumerate() {
            let Some(probe) = probe else { continue };
            match probe {
                ProbeKind::SuperpositionViolation { .. } => {
                    match initial {
                        Some(InitialState::TwoGaussian { a, b, c1, c2 }) => {
                            // The probe re-runs each branch alone plus their sum,
                            // which is guaranteed node-free for all time only
                            // when one branch dominates samplewise.
                            if classical {
                                match dominance_margin(grid, a, b, *c1, *c2) {
                                    Ok(margin) if margin <= 0.0 => {
                                        errors.push(format!(
                                            "probes[{idx}]: the node-free precondition |c1| R1(x) > |c2| R2(x) fails \
                                             (worst margin {margin:.3e}); the summed amplitude may develop nodes under \
                                             classical evolution"
                                        ));
                                    }
                                    Ok(_) => {}
                                    Err(e) => errors.push(format!("probes[{idx}]: {e}")),
                                }
                            }
                        }
                        Some(_) => {
                            errors.push(format!(
                                "probes[{idx}]: needs initial.kind = \"two_gaussian\" to name the two branches"
                            ));
                        }
                        None => {}
                    }
                }
                ProbeKind::Interference { .. } => {
                    if !matches!(initial, Some(InitialState::TwoGaussian { .. }))
                        && initial.is_some()
                    {
                        errors.push(format!(
                            "probes[{idx}]: needs initial.kind = \"two_gaussian\" to name the two branches"
                        ));
                    }
                }
                ProbeKind::Winding { .. } => {
                    if grid.dim() != 2 {
                        errors.push(format!(
                            "probes[{idx}]: winding loops need a 2-dimensional grid"
                        ));
                    }
                }
                ProbeKind::RLinearity { .. } => {
                    if !classical {
                        errors.push(format!(
                            "probes[{idx}]: amplitude additivity is a classical-transport property; set evolver.kind = \"classical\""
                        ));
                    }
                    if grid.dim() != 1 {
                        errors.push(format!("probes[{idx}]: supported on 1-dimensional grids"));
                    }
                }
                ProbeKind::PureVsMixed { .. } | ProbeKind::Exchange { .. } => {
                    if grid.dim() != 1 {
                        errors.push(format!("probes[{idx}]: supported on 1-dimensional grids"));
                    }
                }
                ProbeKind::IndirectMomentum { width, .. } => {
                    if !classical {
                        errors.push(format!(
                            "probes[{idx}]: the two-time momentum estimate is defined for classical runs; set evolver.kind = \"classical\""
                        ));
                    }
                    let w_floor = 2.0 * grid.dx_max();
                    if *width < w_floor {
                        errors.push(format!(
                            "probes[{idx}].width: {width} is below the collapse floor of 2 grid spacings ({w_floor})"
                        ));
                    }
                }
            }
        }
    }
}

/// Smallest value of |c1| R1 - |c2| R2 over the grid for two unit-norm
/// packets, using the same construction the runner uses. Samples where both
/// amplitudes have underflowed carry no information and are skipped.
fn dominance_margin(
    grid: &Grid,
    a: &GaussianParams,
    b: &GaussianParams,
    c1: Complex64,
    c2: Complex64,
) -> Result<f64, qcwave::fields::FieldsError> {
    let ra = gaussian_polar(grid, &a.x0, a.sigma, &a.p0, a.chirp)?;
    let rb = gaussian_polar(grid, &b.x0, b.sigma, &b.p0, b.chirp)?;
    let (w1, w2) = (c1.norm(), c2.norm());
    let margin = ra
        .r()
        .iter()
        .zip(rb.r())
        .filter(|(&x, &y)| x > 0.0 || y > 0.0)
        .map(|(&x, &y)| w1 * x - w2 * y)
        .fold(f64::INFINITY, f64::min);
    Ok(margin)
}

/// Why a two-branch classical initial state would develop a node, if it
/// would. The sum is safe when one weighted envelope dominates samplewise
/// (any relative phase then leaves |sum| > 0), or when the relative phase
/// is a constant other than pi, so the branches can never fully oppose.
/// Everything else passes through zero somewhere, usually between grid
/// samples where no sampled check can see it.
fn superposition_node_risk(
    grid: &Grid,
    constants: &PhysicalConstants,
    a: &GaussianParams,
    b: &GaussianParams,
    c1: Complex64,
    c2: Complex64,
) -> Result<Option<&'static str>, qcwave::fields::FieldsError> {
    let ra = gaussian_polar(grid, &a.x0, a.sigma, &a.p0, a.chirp)?;
    let rb = gaussian_polar(grid, &b.x0, b.sigma, &b.p0, b.chirp)?;
    let (w1, w2) = (c1.norm(), c2.norm());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &y) in ra.r().iter().zip(rb.r()) {
        if x > 0.0 || y > 0.0 {
            let d = w1 * x - w2 * y;
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    if lo > 0.0 || hi < 0.0 {
        return Ok(None);
    }

    // The envelopes meet somewhere, so everything hangs on the relative
    // phase [S_a - S_b]/hbar + arg c1 - arg c2 with, per branch,
    // S = p0.(x - x0) + chirp |x - x0|^2 / 2.
    let quadratic = 0.5 * (a.chirp - b.chirp);
    let mut linear = 0.0f64;
    let mut constant = 0.0;
    for ax in 0..grid.dim() {
        let (xa, xb) = (a.x0[ax], b.x0[ax]);
        let l = a.p0[ax] - b.p0[ax] - a.chirp * xa + b.chirp * xb;
        linear = linear.max(l.abs());
        constant +=
            -a.p0[ax] * xa + b.p0[ax] * xb + 0.5 * (a.chirp * xa * xa - b.chirp * xb * xb);
    }
    if quadratic != 0.0 || linear != 0.0 {
        return Ok(Some(
            "neither branch dominates and their relative phase varies across the box, \
             so the superposed amplitude passes through zero",
        ));
    }
    let theta = constant / constants.hbar + c1.arg() - c2.arg();
    if theta.cos() <= -1.0 + 1e-12 {
        return Ok(Some(
            "the branches oppose exactly where their envelopes meet, so the superposed \
             amplitude passes through zero",
        ));
    }
    Ok(None)
}

fn check_probe(idx: usize, p: &ProbeSpec, errors: &mut Vec<String>) -> Option<ProbeKind> {
    let path = format!("probes[{idx}]");
    let before = errors.len();

    let used: &[&str] = match p.name.as_str() {
        "superposition_violation" => &["threshold"],
        "r_linearity" => &["threshold", "centers", "sigmas", "weights"],
        "interference" => &["threshold"],
        "pure_vs_mixed" => &["threshold", "centers", "sigmas", "supports", "weights"],
        "exchange" => &["threshold", "separation", "sigma"],
        "winding" => &["threshold", "expected_n", "radius", "loop_samples"],
        "indirect_momentum" => &["width", "t1", "t2", "cycles", "seed"],
        other => {
            errors.push(format!(
                "{path}.name: unknown probe \"{other}\" (expected one of {})",
                PROBE_NAMES.join(", ")
            ));
            return None;
        }
    };
    let forbid = |field: &str, set: bool, errors: &mut Vec<String>| {
        if set && !used.contains(&field) {
            errors.push(format!(
                "{path}.{field}: not a parameter of probe \"{}\"",
                p.name
            ));
        }
    };
    forbid("threshold", p.threshold.is_some(), errors);
    forbid("expected_n", p.expected_n.is_some(), errors);
    forbid("radius", p.radius.is_some(), errors);
    forbid("loop_samples", p.loop_samples.is_some(), errors);
    forbid("centers", p.centers.is_some(), errors);
    forbid("sigmas", p.sigmas.is_some(), errors);
    forbid("supports", p.supports.is_some(), errors);
    forbid("weights", p.weights.is_some(), errors);
    forbid("separation", p.separation.is_some(), errors);
    forbid("sigma", p.sigma.is_some(), errors);
    forbid("width", p.width.is_some(), errors);
    forbid("t1", p.t1.is_some(), errors);
    forbid("t2", p.t2.is_some(), errors);
    forbid("cycles", p.cycles.is_some(), errors);
    forbid("seed", p.seed.is_some(), errors);

    let threshold = |default: f64, errors: &mut Vec<String>| match p.threshold {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => {
            errors.push(format!(
                "{path}.threshold: must be finite and positive, got {t}"
            ));
            default
        }
        None => default,
    };

    let kind = match p.name.as_str() {
        "superposition_violation" => Some(ProbeKind::SuperpositionViolation {
            threshold: threshold(1e-6, errors),
        }),
        "interference" => Some(ProbeKind::Interference {
            visibility_floor: threshold(0.9, errors),
        }),
        "r_linearity" => {
            let pair = |field: &str, v: Option<&Vec<f64>>, errors: &mut Vec<String>| match v {
                Some(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => Some([v[0], v[1]]),
                Some(v) => {
                    errors.push(format!(
                        "{path}.{field}: expected two finite values, got {v:?}"
                    ));
                    None
                }
                None => {
                    errors.push(format!("{path}.{field}: required"));
                    None
                }
            };
            let centers = pair("centers", p.centers.as_ref(), errors);
            let sigmas = pair("sigmas", p.sigmas.as_ref(), errors).filter(|s| {
                if s.iter().all(|&x| x > 0.0) {
                    true
                } else {
                    errors.push(format!("{path}.sigmas: widths must be positive"));
                    false
                }
            });
            let weights = pair("weights", p.weights.as_ref(), errors).filter(|w| {
                if w.iter().all(|&x| x != 0.0) {
                    true
                } else {
                    errors.push(format!("{path}.weights: coefficients must be nonzero"));
                    false
                }
            });
            Some(ProbeKind::RLinearity {
                threshold: threshold(1e-10, errors),
                centers: centers?,
                sigmas: sigmas?,
                weights: weights?,
            })
        }
        "pure_vs_mixed" => {
            let list = |field: &str, v: Option<&Vec<f64>>, errors: &mut Vec<String>| match v {
                Some(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Some(v.clone()),
                _ => {
                    errors.push(format!(
                        "{path}.{field}: required, a non-empty list of finite values"
                    ));
                    None
                }
            };
            let centers = list("centers", p.centers.as_ref(), errors);
            let sigmas = list("sigmas", p.sigmas.as_ref(), errors);
            let supports = list("supports", p.supports.as_ref(), errors);
            let weights = list("weights", p.weights.as_ref(), errors);
            if let (Some(c), Some(s), Some(h), Some(w)) = (&centers, &sigmas, &supports, &weights)
            {
                if !(c.len() == s.len() && c.len() == h.len() && c.len() == w.len()) {
                    errors.push(format!(
                        "{path}: centers, sigmas, supports, and weights must have matching lengths"
                    ));
                    return None;
                }
                if s.iter().any(|&x| x <= 0.0) || h.iter().any(|&x| x <= 0.0) {
                    errors.push(format!("{path}: sigmas and supports must be positive"));
                    return None;
                }
                let sum: f64 = w.iter().sum();
                if w.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-8 {
                    errors.push(format!(
                        "{path}.weights: must be non-negative and sum to 1, got sum {sum}"
                    ));
                    return None;
                }
            }
            Some(ProbeKind::PureVsMixed {
                threshold: threshold(1e-12, errors),
                centers: centers?,
                sigmas: sigmas?,
                supports: supports?,
                weights: weights?,
            })
        }
        "exchange" => {
            let separation = match p.separation {
                Some(s) if s.is_finite() && s > 0.0 => Some(s),
                _ => {
                    errors.push(format!(
                        "{path}.separation: required, finite and positive"
                    ));
                    None
                }
            };
            let sigma = match p.sigma {
                Some(s) if s.is_finite() && s > 0.0 => Some(s),
                _ => {
                    errors.push(format!("{path}.sigma: required, finite and positive"));
                    None
                }
            };
            Some(ProbeKind::Exchange {
                threshold: threshold(1e-12, errors),
                separation: separation?,
                sigma: sigma?,
            })
        }
        "winding" => {
            let expected_n = match p.expected_n {
                Some(n) => Some(n),
                None => {
                    errors.push(format!("{path}.expected_n: required"));
                    None
                }
            };
            let radius = match p.radius {
                Some(r) if r.is_finite() && r > 0.0 => Some(r),
                _ => {
                    errors.push(format!("{path}.radius: required, finite and positive"));
                    None
                }
            };
            let loop_samples = match p.loop_samples {
                Some(s) if s >= 8 => s,
                Some(s) => {
                    errors.push(format!(
                        "{path}.loop_samples: need at least 8 samples, got {s}"
                    ));
                    256
                }
                None => 256,
            };
            Some(ProbeKind::Winding {
                threshold: threshold(1e-9, errors),
                expected_n: expected_n?,
                radius: radius?,
                loop_samples,
            })
        }
        "indirect_momentum" => {
            let width = match p.width {
                Some(w) if w.is_finite() && w > 0.0 => Some(w),
                _ => {
                    errors.push(format!("{path}.width: required, finite and positive"));
                    None
                }
            };
            let t1 = match p.t1 {
                Some(t) if t.is_finite() && t >= 0.0 => Some(t),
                _ => {
                    errors.push(format!("{path}.t1: required, finite and non-negative"));
                    None
                }
            };
            let t2 = match p.t2 {
                Some(t) if t.is_finite() && t > 0.0 => Some(t),
                _ => {
                    errors.push(format!("{path}.t2: required, finite and positive"));
                    None
                }
            };
            if let (Some(a), Some(b)) = (t1, t2) {
                if b <= a {
                    errors.push(format!("{path}: t2 must exceed t1, got t1 = {a}, t2 = {b}"));
                }
            }
            let cycles = match p.cycles {
                Some(c) if c >= 1 => c,
                Some(_) => {
                    errors.push(format!("{path}.cycles: must be at least 1"));
                    1
                }
                None => 24,
            };
            Some(ProbeKind::IndirectMomentum {
                width: width?,
                t1: t1?,
                t2: t2?,
                cycles,
                seed: p.seed.unwrap_or(1),
            })
        }
        _ => unreachable!("name already matched"),
    };

    if errors.len() > before {
        return None;
    }
    kind
}

/// Reads a one-column CSV (plus coordinates, which are ignored) into a field
/// on `grid`. The header must contain `column`; row count must match.
pub fn load_scalar_column(
    path: &Path,
    grid: &Grid,
    column: &str,
) -> Result<ScalarField, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let pos = cols
        .iter()
        .position(|&c| c == column)
        .ok_or_else(|| format!("header has no \"{column}\" column: {header}"))?;
    let mut data = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let cell = fields
            .get(pos)
            .ok_or_else(|| format!("row {}: too few columns", i + 2))?;
        let value: f64 = cell
            .parse()
            .map_err(|_| format!("row {}: cannot parse \"{cell}\"", i + 2))?;
        data.push(value);
    }
    if data.len() != grid.len() {
        return Err(format!(
            "expected {} rows for the configured grid, got {}",
            grid.len(),
            data.len()
        ));
    }
    ScalarField::new(grid.clone(), data).map_err(|e| e.to_string())
}
