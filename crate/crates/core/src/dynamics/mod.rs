//! Time evolution.
//!
//! Two steppers share one driver. [`step_linear`] advances a complex wave
//! function with the standard Strang-split spectral scheme. [`step_classical`]
//! advances the polar pair `(rho, S)` with RK4 on the coupled
//! Hamilton-Jacobi / continuity system, which is the same dynamics with the
//! curvature term dropped. [`evolve`] wraps either one with adaptive
//! substepping, snapshot recording and caustic detection, so a run produces
//! the same snapshot grid regardless of how the inner step size was adapted.

mod classical;
mod caustic;
mod linear;

pub use caustic::{detect_caustic, CausticReport, CausticTrigger};
pub use classical::{step_classical, ClassicalStepper};
pub use linear::{step_linear, LinearPropagator};

use crate::fields::{
    FieldsError, Grid, MadelungFields, PhysicalConstants, ScalarField, WaveFunction,
};
use crate::numerics::stencil;
use crate::observables::{self, DiagnosticsRecord};
use thiserror::Error;

/// Fraction of rho's running maximum below which a negative sample is still
/// treated as harmless ringing and clamped to zero.
pub const NEGATIVE_RHO_TRIGGER: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("spectral stepping requires a periodic grid")]
    NonPeriodicGrid,
    #[error("spectral stepping requires power-of-two axis lengths (got {got})")]
    NotPowerOfTwo { got: usize },
    #[error("caustic at t = {}: {}", report.time, report.trigger)]
    CausticDetected { report: CausticReport },
    #[error("non-finite field values at t = {time}")]
    NumericalBlowup { time: f64 },
    #[error("evolver config: {0}")]
    InvalidConfig(String),
    #[error("state kind does not match the configured evolver kind")]
    KindMismatch,
    #[error("tabulated potential lives on a different grid than the state")]
    PotentialGridMismatch,
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

/// External potential. All analytic kinds are centered on the origin.
#[derive(Debug, Clone)]
pub enum Potential {
    Free,
    /// `V = m omega^2 r^2 / 2`.
    Harmonic { omega: f64 },
    /// `V = lambda r^4 / 4`.
    Quartic { lambda: f64 },
    /// `V = -force * x` along axis 0.
    LinearTilt { force: f64 },
    /// Arbitrary samples on the simulation grid.
    Tabulated(ScalarField),
}

impl Potential {
    /// Potential value at a point, independent of any grid.
    ///
    /// `Tabulated` interpolates and returns zero outside a bounded domain.
    pub fn value_at(&self, pos: [f64; 2], c: &PhysicalConstants) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => {
                0.5 * c.mass * omega * omega * (pos[0] * pos[0] + pos[1] * pos[1])
            }
            Potential::Quartic { lambda } => {
                let r2 = pos[0] * pos[0] + pos[1] * pos[1];
                0.25 * lambda * r2 * r2
            }
            Potential::LinearTilt { force } => -force * pos[0],
            Potential::Tabulated(f) => f.interp(pos).unwrap_or(0.0),
        }
    }

    /// Samples the potential on `grid`.
    pub fn sample(&self, grid: &Grid, c: &PhysicalConstants) -> Result<ScalarField, DynamicsError> {
        if let Potential::Tabulated(f) = self {
            if f.grid() != grid {
                return Err(DynamicsError::PotentialGridMismatch);
            }
            return Ok(f.clone());
        }
        Ok(ScalarField::from_fn(grid.clone(), |pos| self.value_at(pos, c)))
    }

    /// Force `-grad V` at a point for the analytic kinds; `None` for
    /// `Tabulated`, whose gradient only exists on its grid (see
    /// [`Potential::force_field`]).
    pub fn analytic_force_at(&self, pos: [f64; 2], c: &PhysicalConstants) -> Option<[f64; 2]> {
        match self {
            Potential::Free => Some([0.0, 0.0]),
            Potential::Harmonic { omega } => {
                let k = c.mass * omega * omega;
                Some([-k * pos[0], -k * pos[1]])
            }
            Potential::Quartic { lambda } => {
                let r2 = pos[0] * pos[0] + pos[1] * pos[1];
                Some([-lambda * r2 * pos[0], -lambda * r2 * pos[1]])
            }
            Potential::LinearTilt { force } => Some([*force, 0.0]),
            Potential::Tabulated(_) => None,
        }
    }

    /// Force `-grad V` sampled per axis. `Tabulated` potentials are
    /// differentiated with one-sided-safe stencils rather than spectrally,
    /// since user data need not be periodic even on a periodic grid.
    pub fn force_field(
        &self,
        grid: &Grid,
        c: &PhysicalConstants,
    ) -> Result<Vec<ScalarField>, DynamicsError> {
        match self {
            Potential::Tabulated(f) => {
                if f.grid() != grid {
                    return Err(DynamicsError::PotentialGridMismatch);
                }
                let grads = stencil::gradient(grid, f.data());
                Ok(grads
                    .into_iter()
                    .map(|mut g| {
                        g.iter_mut().for_each(|v| *v = -*v);
                        ScalarField::new(grid.clone(), g).expect("gradient matches grid")
                    })
                    .collect())
            }
            _ => {
                let dim = grid.dim();
                let mut out = Vec::with_capacity(dim);
                for axis in 0..dim {
                    out.push(ScalarField::from_fn(grid.clone(), |pos| {
                        self.analytic_force_at(pos, c).expect("analytic kind")[axis]
                    }));
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolverKind {
    Linear,
    Classical,
}

/// Driver settings for [`evolve`].
///
/// `dt` is the *nominal* outer step: snapshots land on multiples of it, and
/// the compression criterion for caustic detection is evaluated against it.
/// The inner step actually taken may be smaller when the advection or
/// dispersion CFL bound demands it.
#[derive(Debug, Clone)]
pub struct EvolverConfig {
    pub kind: EvolverKind,
    pub dt: f64,
    pub t_end: f64,
    /// Safety fraction of the CFL bound used for adaptive substepping.
    pub c_cfl: f64,
    /// Compression threshold: a caustic is flagged when `max|lap S| dt / m`
    /// exceeds this.
    pub theta_c: f64,
    /// Snapshots are kept every this many outer steps (the initial and final
    /// states are always kept).
    pub snapshot_stride: usize,
}

impl EvolverConfig {
    pub fn new(kind: EvolverKind, dt: f64, t_end: f64) -> Result<Self, DynamicsError> {
        let cfg = EvolverConfig {
            kind,
            dt,
            t_end,
            c_cfl: 0.9,
            theta_c: 0.1,
            snapshot_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_c_cfl(mut self, c_cfl: f64) -> Result<Self, DynamicsError> {
        self.c_cfl = c_cfl;
        self.validate()?;
        Ok(self)
    }

    pub fn with_theta_c(mut self, theta_c: f64) -> Result<Self, DynamicsError> {
        self.theta_c = theta_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Result<Self, DynamicsError> {
        self.snapshot_stride = stride;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be finite and positive");
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.c_cfl > 0.0 && self.c_cfl <= 1.0) {
            return bad("c_cfl must lie in (0, 1]");
        }
        if !(self.theta_c.is_finite() && self.theta_c > 0.0) {
            return bad("theta_c must be finite and positive");
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1");
        }
        Ok(())
    }
}

/// A state under evolution: either a complex wave function or its polar
/// `(R, S)` counterpart.
#[derive(Debug, Clone)]
pub enum SimState {
    Linear(WaveFunction),
    Classical(MadelungFields),
}

impl SimState {
    pub fn grid(&self) -> &Grid {
        match self {
            SimState::Linear(psi) => psi.grid(),
            SimState::Classical(f) => f.grid(),
        }
    }

    pub fn density(&self) -> ScalarField {
        match self {
            SimState::Linear(psi) => psi.density(),
            SimState::Classical(f) => f.density(),
        }
    }

    pub fn kind(&self) -> EvolverKind {
        match self {
            SimState::Linear(_) => EvolverKind::Linear,
            SimState::Classical(_) => EvolverKind::Classical,
        }
    }

    pub fn as_linear(&self) -> Option<&WaveFunction> {
        match self {
            SimState::Linear(psi) => Some(psi),
            SimState::Classical(_) => None,
        }
    }

    pub fn as_classical(&self) -> Option<&MadelungFields> {
        match self {
            SimState::Classical(f) => Some(f),
            SimState::Linear(_) => None,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone)]
pub enum Termination {
    Completed,
    Caustic(CausticReport),
    Blowup { time: f64 },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// Recorded snapshots at uniform times `k * stride * dt`.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSeries {
    times: Vec<f64>,
    states: Vec<SimState>,
}

impl SnapshotSeries {
    pub fn push(&mut self, t: f64, state: SimState) {
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SimState] {
        &self.states
    }

    pub fn get(&self, i: usize) -> Option<(f64, &SimState)> {
        Some((*self.times.get(i)?, self.states.get(i)?))
    }

    pub fn last(&self) -> Option<(f64, &SimState)> {
        self.get(self.len().checked_sub(1)?)
    }
}

/// Result of a full run. `records` and `snapshots` are aligned entry by
/// entry; `state` is the final (or last good) state.
#[derive(Debug)]
pub struct EvolveOutput {
    pub state: SimState,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: SnapshotSeries,
    pub termination: Termination,
}

fn require_spectral_grid(grid: &Grid) -> Result<(), DynamicsError> {
    if !grid.is_periodic() {
        return Err(DynamicsError::NonPeriodicGrid);
    }
    if !grid.power_of_two() {
        let got = (0..grid.dim())
            .map(|a| grid.axis(a).n)
            .find(|n| !n.is_power_of_two())
            .unwrap_or(0);
        return Err(DynamicsError::NotPowerOfTwo { got });
    }
    Ok(())
}

/// Largest advection speed on the grid, used for the CFL bound. For a wave
/// function this is the largest transport velocity `|grad S| / m` where the
/// density is non-negligible; for polar fields it is taken everywhere.
fn max_speed(state: &SimState, c: &PhysicalConstants) -> f64 {
    match state {
        SimState::Classical(f) => {
            let grads = stencil::gradient(f.grid(), f.s());
            let mut vmax: f64 = 0.0;
            for g in &grads {
                for &v in g {
                    vmax = vmax.max(v.abs());
                }
            }
            vmax / c.mass
        }
        SimState::Linear(psi) => {
            let rho = psi.density();
            let rho_max = rho.data().iter().cloned().fold(0.0f64, f64::max);
            let cutoff = 1e-12 * rho_max;
            let grid = psi.grid();
            let re: Vec<f64> = psi.data().iter().map(|z| z.re).collect();
            let im: Vec<f64> = psi.data().iter().map(|z| z.im).collect();
            let gre = stencil::gradient(grid, &re);
            let gim = stencil::gradient(grid, &im);
            let mut vmax: f64 = 0.0;
            for (i, (&r, z)) in rho.data().iter().zip(psi.data()).enumerate() {
                if r <= cutoff {
                    continue;
                }
                for axis in 0..grid.dim() {
                    // j = hbar Im(conj(psi) d_a psi); v = j / rho
                    let d = num_complex::Complex64::new(gre[axis][i], gim[axis][i]);
                    let j = c.hbar * (z.conj() * d).im;
                    vmax = vmax.max((j / r).abs());
                }
            }
            vmax
        }
    }
}

/// Inner step bound for one outer step, combining the advection CFL limit,
/// the dispersion floor `hbar / (m dx)` acting as a minimum resolvable
/// speed, and (for the split-step scheme) the kick-phase bound
/// `dt < 0.49 hbar / max|V|`.
fn step_bound(
    state: &SimState,
    v_max_abs: f64,
    c: &PhysicalConstants,
    cfg: &EvolverConfig,
) -> f64 {
    let dx = state.grid().dx_min();
    let floor = c.hbar / (c.mass * dx);
    let speed = max_speed(state, c).max(floor);
    let mut bound = cfg.c_cfl * dx / speed;
    if matches!(state, SimState::Linear(_)) && v_max_abs > 0.0 {
        bound = bound.min(0.49 * c.hbar / v_max_abs);
    }
    bound
}

/// Runs a state forward to `cfg.t_end`.
///
/// Each outer step spans exactly `cfg.dt` and is divided into however many
/// equal inner steps the stability bound requires, so snapshot times stay on
/// the uniform grid `k * dt`. Classical runs are checked for imminent
/// caustics before every outer step and stop with
/// [`Termination::Caustic`] when focusing can no longer be resolved;
/// non-finite values stop the run with [`Termination::Blowup`]. The last
/// good state and all records up to the stop are returned in both cases.
///
/// `observer` is called for every kept snapshot, after its record is
/// computed.
pub fn evolve(
    initial: SimState,
    v: &Potential,
    c: &PhysicalConstants,
    cfg: &EvolverConfig,
    mut observer: impl FnMut(f64, &SimState),
) -> Result<EvolveOutput, DynamicsError> {
    cfg.validate()?;
    if initial.kind() != cfg.kind {
        return Err(DynamicsError::KindMismatch);
    }
    let grid = initial.grid().clone();
    let v_field = v.sample(&grid, c)?;
    let v_max_abs = v_field.max_abs();

    let mut linear_prop = match &initial {
        SimState::Linear(_) => {
            require_spectral_grid(&grid)?;
            Some(LinearPropagator::new(&grid, &v_field, c)?)
        }
        SimState::Classical(_) => None,
    };
    let mut classical_step = match &initial {
        SimState::Classical(_) => Some(ClassicalStepper::new(&grid, &v_field, c)?),
        SimState::Linear(_) => None,
    };

    let n_full = (cfg.t_end / cfg.dt).floor() as usize;
    let remainder = cfg.t_end - n_full as f64 * cfg.dt;
    let has_partial = remainder > 1e-12 * cfg.dt.max(cfg.t_end);
    let n_outer = n_full + usize::from(has_partial);

    let mut state = initial;
    let mut records = Vec::new();
    let mut snapshots = SnapshotSeries::default();
    let mut termination = Termination::Completed;

    let mut emit = |t: f64,
                    state: &SimState,
                    records: &mut Vec<DiagnosticsRecord>,
                    snapshots: &mut SnapshotSeries| {
        records.push(observables::diagnostics(state, v, c, t));
        snapshots.push(t, state.clone());
        observer(t, state);
    };

    emit(0.0, &state, &mut records, &mut snapshots);

    for k in 0..n_outer {
        let t = k as f64 * cfg.dt;
        let outer_dt = if k < n_full { cfg.dt } else { remainder };

        if let SimState::Classical(fields) = &state {
            // The compression metric uses the nominal dt: the question is
            // whether focusing outruns the requested output cadence, not the
            // (possibly much smaller) adapted inner step.
            if let Some(mut report) = detect_caustic(fields, c, cfg.dt, cfg.theta_c) {
                report.time = t;
                termination = Termination::Caustic(report);
                break;
            }
        }

        let bound = step_bound(&state, v_max_abs, c, cfg);
        let n_inner = (outer_dt / bound).ceil().max(1.0) as usize;
        let h = outer_dt / n_inner as f64;

        let mut failed = None;
        for _ in 0..n_inner {
            let next = match &state {
                SimState::Linear(psi) => linear_prop
                    .as_mut()
                    .expect("linear propagator present")
                    .step(psi, h)
                    .map(SimState::Linear),
                SimState::Classical(fields) => classical_step
                    .as_mut()
                    .expect("classical stepper present")
                    .step(fields, h)
                    .map(SimState::Classical),
            };
            match next {
                Ok(s) => state = s,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }

        let t_next = if k + 1 == n_outer {
            cfg.t_end
        } else {
            (k + 1) as f64 * cfg.dt
        };

        if let Some(e) = failed {
            termination = match e {
                DynamicsError::CausticDetected { mut report } => {
                    report.time = t_next;
                    Termination::Caustic(report)
                }
                DynamicsError::NumericalBlowup { .. } => Termination::Blowup { time: t_next },
                other => return Err(other),
            };
            break;
        }

        if (k + 1) % cfg.snapshot_stride == 0 || k + 1 == n_outer {
            emit(t_next, &state, &mut records, &mut snapshots);
        }
    }

    if !termination.is_completed() {
        let t_stop = match &termination {
            Termination::Caustic(r) => r.time,
            Termination::Blowup { time } => *time,
            Termination::Completed => unreachable!(),
        };
        if snapshots.last().map(|(t, _)| t) != Some(t_stop) {
            // Keep the last good state even off the stride so the caller can
            // inspect what the run looked like at the stop.
            if matches!(termination, Termination::Caustic(_)) {
                emit(t_stop, &state, &mut records, &mut snapshots);
            }
        }
    }

    Ok(EvolveOutput {
        state,
        records,
        snapshots,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_packet, Boundary, Grid};

    fn grid1d(n: usize, half: f64) -> Grid {
        Grid::new_1d(n, -half, half, Boundary::Periodic).unwrap()
    }

    #[test]
    fn potential_samples_match_point_values() {
        let grid = grid1d(64, 5.0);
        let c = PhysicalConstants::natural();
        for v in [
            Potential::Free,
            Potential::Harmonic { omega: 2.0 },
            Potential::Quartic { lambda: 0.3 },
            Potential::LinearTilt { force: 1.5 },
        ] {
            let f = v.sample(&grid, &c).unwrap();
            for i in 0..grid.len() {
                assert_eq!(f.data()[i], v.value_at(grid.coords(i), &c));
            }
        }
    }

    #[test]
    fn analytic_forces_are_negative_gradients() {
        let c = PhysicalConstants::natural();
        let h = 1e-6;
        for v in [
            Potential::Harmonic { omega: 1.3 },
            Potential::Quartic { lambda: 0.7 },
            Potential::LinearTilt { force: 0.4 },
        ] {
            for x in [-1.2, 0.3, 2.0] {
                let f = v.analytic_force_at([x, 0.0], &c).unwrap()[0];
                let fd = -(v.value_at([x + h, 0.0], &c) - v.value_at([x - h, 0.0], &c)) / (2.0 * h);
                assert!((f - fd).abs() < 1e-5, "force {f} vs fd {fd}");
            }
        }
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(EvolverConfig::new(EvolverKind::Linear, 0.0, 1.0).is_err());
        assert!(EvolverConfig::new(EvolverKind::Linear, 0.1, -1.0).is_err());
        assert!(EvolverConfig::new(EvolverKind::Linear, 0.1, 1.0)
            .unwrap()
            .with_c_cfl(1.5)
            .is_err());
        assert!(EvolverConfig::new(EvolverKind::Linear, 0.1, 1.0)
            .unwrap()
            .with_snapshot_stride(0)
            .is_err());
    }

    #[test]
    fn evolve_rejects_mismatched_kind() {
        let grid = grid1d(64, 10.0);
        let c = PhysicalConstants::natural();
        let psi = gaussian_packet(&grid, &c, &[0.0], 1.0, &[0.0], 0.0).unwrap();
        let cfg = EvolverConfig::new(EvolverKind::Classical, 0.01, 0.1).unwrap();
        let err = evolve(SimState::Linear(psi), &Potential::Free, &c, &cfg, |_, _| {});
        assert!(matches!(err, Err(DynamicsError::KindMismatch)));
    }

    #[test]
    fn snapshot_times_stay_uniform_under_substepping() {
        let grid = grid1d(128, 10.0);
        let c = PhysicalConstants::natural();
        // Large momentum forces the CFL bound well below dt.
        let psi = gaussian_packet(&grid, &c, &[-5.0], 1.0, &[8.0], 0.0).unwrap();
        let cfg = EvolverConfig::new(EvolverKind::Linear, 0.05, 0.2).unwrap();
        let out = evolve(SimState::Linear(psi), &Potential::Free, &c, &cfg, |_, _| {}).unwrap();
        let expect = [0.0, 0.05, 0.1, 0.15, 0.2];
        assert_eq!(out.snapshots.times().len(), expect.len());
        for (got, want) in out.snapshots.times().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(out.termination.is_completed());
    }

    #[test]
    fn partial_final_step_lands_on_t_end() {
        let grid = grid1d(64, 10.0);
        let c = PhysicalConstants::natural();
        let psi = gaussian_packet(&grid, &c, &[0.0], 1.0, &[0.0], 0.0).unwrap();
        let cfg = EvolverConfig::new(EvolverKind::Linear, 0.04, 0.1).unwrap();
        let out = evolve(SimState::Linear(psi), &Potential::Free, &c, &cfg, |_, _| {}).unwrap();
        let times = out.snapshots.times();
        assert!((times[times.len() - 1] - 0.1).abs() < 1e-12);
    }
}
