//! Particle trajectories riding on the transport velocity `grad S / m`.
//!
//! An ensemble is sampled from a density, then advected through a series of
//! recorded snapshots; between snapshots the velocity field is interpolated
//! linearly in time and the positions are integrated with RK4. A separate
//! Newtonian integrator provides the point-mechanics reference that the
//! fluid trajectories of a caustic-free classical run should reproduce.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{DynamicsError, Potential, SimState, SnapshotSeries};
use crate::fields::{
    interp_weights, FieldsError, Grid, MadelungFields, PhysicalConstants, ScalarField,
};
use crate::numerics::{spectral::SpectralOps, stencil};
use crate::statistics::{self, StatisticsError};

#[derive(Debug, Error)]
pub enum TrajectoriesError {
    #[error("velocity is undefined near a node at ({x}, {y})")]
    NodeRegion { x: f64, y: f64 },
    #[error("position ({x}, {y}) is outside the bounded domain")]
    LeftDomain { x: f64, y: f64 },
    #[error("time interval [{t0}, {t1}] is degenerate")]
    DegenerateInterval { t0: f64, t1: f64 },
    #[error("velocity fields live on different grids")]
    GridMismatch,
    #[error("snapshot series is empty")]
    EmptySeries,
    #[error(transparent)]
    Statistics(#[from] StatisticsError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

/// Positions and velocities of an ensemble at one instant. Trajectories
/// that wander into a node region or off a bounded grid are frozen and
/// marked invalid rather than aborting the whole ensemble.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub t: f64,
    pub seed: u64,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Draws `count` starting points from `density` with a fresh generator
/// seeded by `seed`. Velocities start at zero; they are filled in by the
/// first velocity field the ensemble meets.
pub fn sample_ensemble(
    density: &ScalarField,
    count: usize,
    seed: u64,
    t: f64,
) -> Result<TrajectoryEnsemble, TrajectoriesError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = statistics::sample_positions(density, count, &mut rng)?;
    Ok(TrajectoryEnsemble {
        t,
        seed,
        velocities: vec![[0.0; 2]; positions.len()],
        valid: vec![true; positions.len()],
        positions,
    })
}

/// Transport velocity sampled on the grid, with a per-sample trust flag.
/// Untrusted samples sit where the density is too small for the velocity to
/// mean anything; interpolating through them is refused.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: Grid,
    components: Vec<ScalarField>,
    trust: Vec<bool>,
}

impl VelocityField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn trust(&self) -> &[bool] {
        &self.trust
    }

    /// Velocity at an arbitrary point, multilinearly interpolated.
    pub fn at(&self, pos: [f64; 2]) -> Result<[f64; 2], TrajectoriesError> {
        let stencil = interp_weights(&self.grid, pos)
            .ok_or(TrajectoriesError::LeftDomain { x: pos[0], y: pos[1] })?;
        if stencil.iter().any(|&(i, _)| !self.trust[i]) {
            return Err(TrajectoriesError::NodeRegion { x: pos[0], y: pos[1] });
        }
        let mut v = [0.0; 2];
        for (a, comp) in self.components.iter().enumerate() {
            v[a] = stencil.iter().map(|&(i, w)| w * comp.data()[i]).sum();
        }
        Ok(v)
    }

    fn max_trusted_speed(&self) -> f64 {
        let mut m: f64 = 0.0;
        for comp in &self.components {
            for (&v, &tr) in comp.data().iter().zip(&self.trust) {
                if tr {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }
}

/// Transport velocity of a state.
///
/// For polar fields this is `grad S / m` with node-flagged samples
/// untrusted. For a wave function it is `j / rho` with
/// `j = hbar Im(conj(psi) grad psi)`, which reduces to the same thing
/// wherever the state is node-free; samples with a relative density below
/// 1e-12 are untrusted since the quotient degenerates there.
/// One-off transport velocity of a polar state at a single point. For
/// repeated queries build a [`VelocityField`] once via [`velocity_field`].
pub fn bohmian_velocity(
    fields: &MadelungFields,
    c: &PhysicalConstants,
    pos: [f64; 2],
) -> Result<[f64; 2], TrajectoriesError> {
    velocity_field(&SimState::Classical(fields.clone()), c).at(pos)
}

pub fn velocity_field(state: &SimState, c: &PhysicalConstants) -> VelocityField {
    let grid = state.grid().clone();
    match state {
        SimState::Classical(f) => {
            let grads = stencil::gradient(&grid, f.s());
            let components = grads
                .into_iter()
                .map(|mut g| {
                    g.iter_mut().for_each(|v| *v /= c.mass);
                    ScalarField::new(grid.clone(), g).expect("gradient matches grid")
                })
                .collect();
            let trust = f.nodes().iter().map(|&n| !n).collect();
            VelocityField { grid, components, trust }
        }
        SimState::Linear(psi) => {
            let rho = psi.density();
            let rho_max = rho.data().iter().cloned().fold(0.0f64, f64::max);
            let cutoff = 1e-12 * rho_max;
            let trust: Vec<bool> = rho.data().iter().map(|&r| r > cutoff).collect();
            let re: Vec<f64> = psi.data().iter().map(|z| z.re).collect();
            let im: Vec<f64> = psi.data().iter().map(|z| z.im).collect();
            let mut spectral = grid.is_periodic().then(|| SpectralOps::new(&grid));
            let mut components = Vec::with_capacity(grid.dim());
            for axis in 0..grid.dim() {
                let (dre, dim_) = match &mut spectral {
                    Some(ops) => (ops.derivative(&re, axis), ops.derivative(&im, axis)),
                    None => (
                        stencil::gradient_axis(&grid, &re, axis),
                        stencil::gradient_axis(&grid, &im, axis),
                    ),
                };
                let data: Vec<f64> = (0..grid.len())
                    .map(|i| {
                        if trust[i] {
                            c.hbar * (re[i] * dim_[i] - im[i] * dre[i]) / rho.data()[i]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                components.push(ScalarField::new(grid.clone(), data).expect("layout matches"));
            }
            VelocityField { grid, components, trust }
        }
    }
}

fn wrap_into(grid: &Grid, mut x: [f64; 2]) -> [f64; 2] {
    if grid.is_periodic() {
        for a in 0..grid.dim() {
            let ax = grid.axis(a);
            x[a] = ax.min + (x[a] - ax.min).rem_euclid(ax.len());
        }
    }
    x
}

fn rk4_position(
    x: [f64; 2],
    t: f64,
    h: f64,
    vel: &impl Fn([f64; 2], f64) -> Result<[f64; 2], TrajectoriesError>,
) -> Result<[f64; 2], TrajectoriesError> {
    let k1 = vel(x, t)?;
    let k2 = vel([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], t + 0.5 * h)?;
    let k3 = vel([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], t + 0.5 * h)?;
    let k4 = vel([x[0] + h * k3[0], x[1] + h * k3[1]], t + h)?;
    Ok([
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Advances an ensemble from `t0` to `t1` through velocity fields recorded
/// at the two endpoints, blending them linearly in time. The span is cut
/// into enough equal substeps that no trajectory crosses more than half a
/// cell per RK4 step. Trajectories whose integration fails keep their last
/// good position and are marked invalid.
pub fn advance(
    ens: &TrajectoryEnsemble,
    v0: &VelocityField,
    v1: &VelocityField,
    t0: f64,
    t1: f64,
) -> Result<TrajectoryEnsemble, TrajectoriesError> {
    if !(t1 > t0) {
        return Err(TrajectoriesError::DegenerateInterval { t0, t1 });
    }
    if v0.grid != v1.grid {
        return Err(TrajectoriesError::GridMismatch);
    }
    let grid = &v0.grid;
    let span = t1 - t0;
    let vmax = v0.max_trusted_speed().max(v1.max_trusted_speed());
    let n_sub = ((span * vmax / (0.5 * grid.dx_min())).ceil() as usize).max(1);
    let h = span / n_sub as f64;
    let vel = |pos: [f64; 2], t: f64| -> Result<[f64; 2], TrajectoriesError> {
        let th = ((t - t0) / span).clamp(0.0, 1.0);
        let a = v0.at(pos)?;
        let b = v1.at(pos)?;
        Ok([
            (1.0 - th) * a[0] + th * b[0],
            (1.0 - th) * a[1] + th * b[1],
        ])
    };

    let mut out = ens.clone();
    out.t = t1;
    for i in 0..out.positions.len() {
        if !out.valid[i] {
            continue;
        }
        let mut x = out.positions[i];
        let mut alive = true;
        for s in 0..n_sub {
            match rk4_position(x, t0 + s as f64 * h, h, &vel) {
                Ok(next) => x = wrap_into(grid, next),
                Err(_) => {
                    alive = false;
                    break;
                }
            }
        }
        out.positions[i] = x;
        if alive {
            match v1.at(x) {
                Ok(v) => out.velocities[i] = v,
                Err(_) => out.valid[i] = false,
            }
        } else {
            out.valid[i] = false;
        }
    }
    Ok(out)
}

fn refresh_velocities(ens: &mut TrajectoryEnsemble, vf: &VelocityField) {
    for i in 0..ens.positions.len() {
        if !ens.valid[i] {
            continue;
        }
        match vf.at(ens.positions[i]) {
            Ok(v) => ens.velocities[i] = v,
            Err(_) => ens.valid[i] = false,
        }
    }
}

/// Carries an ensemble through every snapshot of a run and returns its
/// state at each snapshot time, first entry included.
pub fn advect_series(
    initial: &TrajectoryEnsemble,
    snapshots: &SnapshotSeries,
    c: &PhysicalConstants,
) -> Result<Vec<TrajectoryEnsemble>, TrajectoriesError> {
    if snapshots.is_empty() {
        return Err(TrajectoriesError::EmptySeries);
    }
    let fields: Vec<VelocityField> = snapshots
        .states()
        .iter()
        .map(|s| velocity_field(s, c))
        .collect();
    let times = snapshots.times();
    let mut current = initial.clone();
    current.t = times[0];
    refresh_velocities(&mut current, &fields[0]);
    let mut out = Vec::with_capacity(snapshots.len());
    out.push(current.clone());
    for i in 1..snapshots.len() {
        current = advance(&current, &fields[i - 1], &fields[i], times[i - 1], times[i])?;
        out.push(current.clone());
    }
    Ok(out)
}

/// A point-mechanics trajectory: `steps + 1` entries of time, position and
/// momentum.
#[derive(Debug, Clone)]
pub struct NewtonianTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    pub momenta: Vec<[f64; 2]>,
}

/// Integrates Hamilton's equations `dx/dt = p/m`, `dp/dt = -grad V` with
/// RK4. Tabulated potentials are differentiated on their grid once and the
/// force interpolated; leaving a bounded table's domain is an error.
pub fn newtonian_oracle(
    x0: [f64; 2],
    p0: [f64; 2],
    v: &Potential,
    c: &PhysicalConstants,
    dt: f64,
    steps: usize,
) -> Result<NewtonianTrajectory, TrajectoriesError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TrajectoriesError::DegenerateInterval { t0: 0.0, t1: dt });
    }
    let table: Option<Vec<ScalarField>> = match v {
        Potential::Tabulated(f) => Some(v.force_field(f.grid(), c)?),
        _ => None,
    };
    let force = |pos: [f64; 2]| -> Result<[f64; 2], TrajectoriesError> {
        match &table {
            Some(comps) => {
                let mut f = [0.0; 2];
                for (a, comp) in comps.iter().enumerate() {
                    f[a] = comp
                        .interp(pos)
                        .ok_or(TrajectoriesError::LeftDomain { x: pos[0], y: pos[1] })?;
                }
                Ok(f)
            }
            None => Ok(v.analytic_force_at(pos, c).expect("analytic kind")),
        }
    };

    let m = c.mass;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut momenta = Vec::with_capacity(steps + 1);
    times.push(0.0);
    positions.push(x0);
    momenta.push(p0);
    let (mut x, mut p) = (x0, p0);
    for s in 0..steps {
        let stage = |x: [f64; 2], p: [f64; 2]| -> Result<([f64; 2], [f64; 2]), TrajectoriesError> {
            Ok(([p[0] / m, p[1] / m], force(x)?))
        };
        let shift = |x: [f64; 2], d: [f64; 2], f: f64| [x[0] + f * d[0], x[1] + f * d[1]];
        let (k1x, k1p) = stage(x, p)?;
        let (k2x, k2p) = stage(shift(x, k1x, dt / 2.0), shift(p, k1p, dt / 2.0))?;
        let (k3x, k3p) = stage(shift(x, k2x, dt / 2.0), shift(p, k2p, dt / 2.0))?;
        let (k4x, k4p) = stage(shift(x, k3x, dt), shift(p, k3p, dt))?;
        for a in 0..2 {
            x[a] += dt / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
            p[a] += dt / 6.0 * (k1p[a] + 2.0 * k2p[a] + 2.0 * k3p[a] + k4p[a]);
        }
        times.push((s + 1) as f64 * dt);
        positions.push(x);
        momenta.push(p);
    }
    Ok(NewtonianTrajectory { times, positions, momenta })
}

/// Tracks the crest of the packet: the grid position of the density maximum
/// at each snapshot. Purely a diagnostic; the crest is not a trajectory of
/// the flow and need not follow one.
pub fn crest_series(snapshots: &SnapshotSeries) -> Vec<[f64; 2]> {
    snapshots
        .states()
        .iter()
        .map(|state| {
            let rho = state.density();
            let mut best = 0usize;
            for (i, &v) in rho.data().iter().enumerate() {
                if v > rho.data()[best] {
                    best = i;
                }
            }
            state.grid().coords(best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, EvolverConfig, EvolverKind};
    use crate::fields::{gaussian_packet, gaussian_polar, vortex_state, Boundary};

    fn grid1d(n: usize, half: f64) -> Grid {
        Grid::new_1d(n, -half, half, Boundary::Periodic).unwrap()
    }

    #[test]
    fn sampling_is_reproducible_per_seed() {
        let grid = grid1d(256, 8.0);
        let rho = gaussian_polar(&grid, &[0.5], 1.0, &[0.0], 0.0).unwrap().density();
        let a = sample_ensemble(&rho, 50, 3, 0.0).unwrap();
        let b = sample_ensemble(&rho, 50, 3, 0.0).unwrap();
        assert_eq!(a.positions, b.positions);
        let c = sample_ensemble(&rho, 50, 4, 0.0).unwrap();
        assert_ne!(a.positions, c.positions);
        assert_eq!(a.valid_count(), 50);
    }

    #[test]
    fn point_velocity_matches_the_action_gradient() {
        let grid = grid1d(256, 10.0);
        let c = PhysicalConstants { hbar: 1.0, mass: 2.0 };
        // chirp a makes S quadratic, so grad S = a (x - x0) exactly on the
        // stencil and the linear interpolant in between.
        let f = gaussian_polar(&grid, &[1.0], 1.5, &[0.0], -0.7).unwrap();
        let v = bohmian_velocity(&f, &c, [0.33, 0.0]).unwrap();
        assert!((v[0] - (-0.7) * (0.33 - 1.0) / 2.0).abs() < 1e-12, "v {}", v[0]);
    }

    #[test]
    fn uniform_flow_advances_positions_exactly() {
        let grid = grid1d(256, 10.0);
        let c = PhysicalConstants::natural();
        let f = gaussian_polar(&grid, &[0.0], 1.0, &[1.0], 0.0).unwrap();
        let vf = velocity_field(&SimState::Classical(f), &c);
        let ens = TrajectoryEnsemble {
            t: 0.0,
            seed: 0,
            positions: vec![[-2.0, 0.0], [0.3, 0.0], [9.9, 0.0]],
            velocities: vec![[0.0; 2]; 3],
            valid: vec![true; 3],
        };
        let out = advance(&ens, &vf, &vf, 0.0, 0.5).unwrap();
        // constant velocity p/m = 1; the last one wraps around the seam
        let want = [-1.5, 0.8, -9.6];
        for (got, want) in out.positions.iter().zip(want) {
            assert!((got[0] - want).abs() < 1e-10, "{} vs {want}", got[0]);
        }
        assert!(out.velocities.iter().all(|v| (v[0] - 1.0).abs() < 1e-10));
    }

    #[test]
    fn fluid_paths_follow_newton_in_a_harmonic_well() {
        let grid = grid1d(512, 10.0);
        let c = PhysicalConstants::natural();
        let well = Potential::Harmonic { omega: 1.0 };
        let f0 = gaussian_polar(&grid, &[1.0], 0.5, &[0.0], 0.0).unwrap();
        let rho0 = f0.density();
        let cfg = EvolverConfig::new(EvolverKind::Classical, 0.01, 0.5).unwrap();
        let out = evolve(SimState::Classical(f0), &well, &c, &cfg, |_, _| {}).unwrap();
        assert!(out.termination.is_completed());

        let ens0 = sample_ensemble(&rho0, 10, 7, 0.0).unwrap();
        let series = advect_series(&ens0, &out.snapshots, &c).unwrap();
        let last = series.last().unwrap();
        // Every fluid element starts at rest, so each one should trace the
        // x_i cos(t) arc of a point mass released from its own x_i.
        let cos_t = 0.5f64.cos();
        for i in 0..ens0.len() {
            assert!(last.valid[i]);
            let xi = ens0.positions[i][0];
            let want = xi * cos_t;
            assert!(
                (last.positions[i][0] - want).abs() < 1e-4,
                "trajectory {i}: {} vs {want}",
                last.positions[i][0]
            );
            let oracle =
                newtonian_oracle([xi, 0.0], [0.0, 0.0], &well, &c, 1e-3, 500).unwrap();
            assert!((oracle.positions.last().unwrap()[0] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn spreading_state_keeps_samples_distributed_like_its_density() {
        let grid = grid1d(512, 16.0);
        let c = PhysicalConstants::natural();
        let psi0 = gaussian_packet(&grid, &c, &[0.0], 1.0, &[0.0], 0.0).unwrap();
        let rho0 = psi0.density();
        let cfg = EvolverConfig::new(EvolverKind::Linear, 0.05, 1.0).unwrap();
        let out = evolve(SimState::Linear(psi0), &Potential::Free, &c, &cfg, |_, _| {}).unwrap();

        let ens0 = sample_ensemble(&rho0, 2000, 99, 0.0).unwrap();
        let series = advect_series(&ens0, &out.snapshots, &c).unwrap();
        let last = series.last().unwrap();
        assert_eq!(last.valid_count(), 2000);
        let xs: Vec<f64> = last.positions.iter().map(|p| p[0]).collect();
        let d = statistics::ks_statistic_1d(&xs, &out.state.density()).unwrap();
        let bound = 3.0 / (xs.len() as f64).sqrt();
        assert!(d < bound, "KS {d} vs {bound}");
    }

    #[test]
    fn velocity_guards_nodes_and_domain_edges() {
        let grid2 = Grid::new_2d(64, 64, (-4.0, 4.0), (-4.0, 4.0), Boundary::Periodic).unwrap();
        let c = PhysicalConstants::natural();
        let psi = vortex_state(&grid2, &c, 2, 1.0).unwrap();
        let vf = velocity_field(&SimState::Linear(psi), &c);
        assert!(matches!(
            vf.at([0.05, 0.05]),
            Err(TrajectoriesError::NodeRegion { .. })
        ));
        // On the ring the flow is azimuthal with speed hbar n / (m r).
        let v = vf.at([1.0, 0.0]).unwrap();
        assert!((v[1] - 2.0).abs() < 0.02, "v_phi {}", v[1]);
        assert!(v[0].abs() < 0.02, "v_r {}", v[0]);

        let gb = Grid::new_1d(128, -5.0, 5.0, Boundary::AbsorbingPad).unwrap();
        let f = gaussian_polar(&gb, &[0.0], 1.0, &[0.5], 0.0).unwrap();
        let vfb = velocity_field(&SimState::Classical(f), &c);
        assert!(matches!(
            vfb.at([25.0, 0.0]),
            Err(TrajectoriesError::LeftDomain { .. })
        ));
        assert!((vfb.at([0.3, 0.0]).unwrap()[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn newtonian_oracle_matches_closed_forms() {
        let c = PhysicalConstants { hbar: 1.0, mass: 1.5 };
        let tilt = Potential::LinearTilt { force: 0.8 };
        let orc = newtonian_oracle([0.2, 0.0], [0.6, 0.0], &tilt, &c, 0.01, 100).unwrap();
        assert_eq!(orc.times.len(), 101);
        let t = 1.0;
        let want_x = 0.2 + 0.6 * t / 1.5 + 0.5 * 0.8 * t * t / 1.5;
        assert!((orc.positions.last().unwrap()[0] - want_x).abs() < 1e-12);
        assert!((orc.momenta.last().unwrap()[0] - (0.6 + 0.8 * t)).abs() < 1e-12);

        // A tabulated copy of the harmonic well drives the same motion.
        let grid = grid1d(256, 8.0);
        let well = Potential::Harmonic { omega: 1.0 };
        let tab = Potential::Tabulated(well.sample(&grid, &c).unwrap());
        let a = newtonian_oracle([1.0, 0.0], [0.0, 0.0], &tab, &c, 1e-3, 1000).unwrap();
        let b = newtonian_oracle([1.0, 0.0], [0.0, 0.0], &well, &c, 1e-3, 1000).unwrap();
        assert!(
            (a.positions.last().unwrap()[0] - b.positions.last().unwrap()[0]).abs() < 1e-8
        );
    }

    #[test]
    fn crest_series_reports_the_density_peak() {
        let grid = grid1d(256, 8.0);
        let mut series = SnapshotSeries::default();
        for (t, center) in [(0.0, -2.0), (0.1, 0.5), (0.2, 3.25)] {
            let f = gaussian_polar(&grid, &[center], 0.7, &[0.0], 0.0).unwrap();
            series.push(t, SimState::Classical(f));
        }
        let crests = crest_series(&series);
        assert_eq!(crests.len(), 3);
        let dx = 16.0 / 256.0;
        for (crest, center) in crests.iter().zip([-2.0, 0.5, 3.25]) {
            assert!(
                (crest[0] - center).abs() <= dx / 2.0 + 1e-12,
                "{} vs {center}",
                crest[0]
            );
        }
    }
}
