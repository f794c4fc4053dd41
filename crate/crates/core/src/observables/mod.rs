//! Expectation values, per-snapshot diagnostics, and the probe suite that
//! contrasts linear and classical evolution on the same initial data.

mod probes;

pub use probes::{
    interference_excess, r_linearity_defect, superposition_violation, InterferencePattern,
    ProbeResult, ProbeVerdict,
};

use crate::dynamics::{DynamicsError, Potential, SimState, SnapshotSeries};
use crate::fields::{FieldsError, PhysicalConstants, WaveFunction, NODE_EPS};
use crate::numerics::{stencil, SpectralOps};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObservablesError {
    #[error("need at least {min} snapshots, got {got}")]
    InsufficientSnapshots { got: usize, min: usize },
    #[error("records ({records}) and snapshots ({snapshots}) are not aligned")]
    MismatchedSeries { records: usize, snapshots: usize },
    #[error("superposed amplitude vanishes at sample {index}; its polar form is ill-defined there")]
    NodeInSuperposition { index: usize },
    #[error("probe inputs live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

/// First and second moments of a state.
///
/// Position statistics weight by the density. Momentum statistics come from
/// the wavenumber spectrum for a complex state on a periodic grid (difference
/// stencils otherwise), and from the density-weighted action gradient for a
/// polar state, where the momentum field is single-valued and `sigma_p`
/// measures only its spatial spread.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub norm: f64,
    pub mean_x: [f64; 2],
    pub sigma_x: [f64; 2],
    pub mean_p: [f64; 2],
    pub sigma_p: [f64; 2],
    pub min_rho: f64,
    pub node_count: usize,
}

/// One diagnostics row. Vector quantities are reported along axis 0; the
/// Ehrenfest residuals start out NaN and are filled in by
/// [`ehrenfest_residuals`] once a whole series is available.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub sigma_x: f64,
    pub sigma_p: f64,
    pub ehrenfest1: f64,
    pub ehrenfest2: f64,
    pub node_count: usize,
    pub min_rho: f64,
}

fn position_stats(rho: &[f64], grid: &crate::fields::Grid) -> (f64, [f64; 2], [f64; 2], f64) {
    let dim = grid.dim();
    let mut m0 = 0.0;
    let mut m1 = [0.0; 2];
    let mut m2 = [0.0; 2];
    let mut min_rho = f64::INFINITY;
    for (i, &r) in rho.iter().enumerate() {
        let pos = grid.coords(i);
        m0 += r;
        for a in 0..dim {
            m1[a] += r * pos[a];
            m2[a] += r * pos[a] * pos[a];
        }
        min_rho = min_rho.min(r);
    }
    let vol = grid.cell_volume();
    let mass = m0 * vol;
    let mut mean = [0.0; 2];
    let mut sigma = [0.0; 2];
    for a in 0..dim {
        mean[a] = m1[a] / m0;
        sigma[a] = (m2[a] / m0 - mean[a] * mean[a]).max(0.0).sqrt();
    }
    (mass, mean, sigma, min_rho)
}

fn spectral_momentum(psi: &WaveFunction, c: &PhysicalConstants) -> ([f64; 2], [f64; 2]) {
    let grid = psi.grid();
    let mut ops = SpectralOps::new(grid);
    let mut hat = psi.data().to_vec();
    ops.forward(&mut hat);
    let dim = grid.dim();
    let mut w0 = 0.0;
    let mut w1 = [0.0; 2];
    let mut w2 = [0.0; 2];
    for (i, z) in hat.iter().enumerate() {
        let w = z.norm_sqr();
        w0 += w;
        let idx = grid.unflatten(i);
        for a in 0..dim {
            let k = ops.k_along(a)[idx[a]];
            let p = c.hbar * k;
            w1[a] += w * p;
            w2[a] += w * p * p;
        }
    }
    let mut mean = [0.0; 2];
    let mut sigma = [0.0; 2];
    for a in 0..dim {
        mean[a] = w1[a] / w0;
        sigma[a] = (w2[a] / w0 - mean[a] * mean[a]).max(0.0).sqrt();
    }
    (mean, sigma)
}

fn stencil_momentum(psi: &WaveFunction, c: &PhysicalConstants) -> ([f64; 2], [f64; 2]) {
    let grid = psi.grid();
    let dim = grid.dim();
    let re: Vec<f64> = psi.data().iter().map(|z| z.re).collect();
    let im: Vec<f64> = psi.data().iter().map(|z| z.im).collect();
    let mut mean = [0.0; 2];
    let mut second = [0.0; 2];
    let mut w0 = 0.0;
    let gre: Vec<Vec<f64>> = (0..dim).map(|a| stencil::gradient_axis(grid, &re, a)).collect();
    let gim: Vec<Vec<f64>> = (0..dim).map(|a| stencil::gradient_axis(grid, &im, a)).collect();
    for (i, z) in psi.data().iter().enumerate() {
        w0 += z.norm_sqr();
        for a in 0..dim {
            let d = num_complex::Complex64::new(gre[a][i], gim[a][i]);
            mean[a] += c.hbar * (z.conj() * d).im;
            second[a] += c.hbar * c.hbar * d.norm_sqr();
        }
    }
    let mut sigma = [0.0; 2];
    for a in 0..dim {
        mean[a] /= w0;
        sigma[a] = (second[a] / w0 - mean[a] * mean[a]).max(0.0).sqrt();
    }
    (mean, sigma)
}

/// Moments of either state kind. See [`Moments`] for the conventions.
pub fn moments(state: &SimState, c: &PhysicalConstants) -> Moments {
    match state {
        SimState::Linear(psi) => {
            let rho = psi.density();
            let (mass, mean_x, sigma_x, min_rho) = position_stats(rho.data(), psi.grid());
            let (mean_p, sigma_p) = if psi.grid().is_periodic() {
                spectral_momentum(psi, c)
            } else {
                stencil_momentum(psi, c)
            };
            let peak = psi.max_abs();
            let node_count = psi
                .data()
                .iter()
                .filter(|z| z.norm() < NODE_EPS * peak)
                .count();
            Moments {
                norm: mass.sqrt(),
                mean_x,
                sigma_x,
                mean_p,
                sigma_p,
                min_rho,
                node_count,
            }
        }
        SimState::Classical(f) => {
            let rho: Vec<f64> = f.r().iter().map(|r| r * r).collect();
            let (mass, mean_x, sigma_x, min_rho) = position_stats(&rho, f.grid());
            let grads = stencil::gradient(f.grid(), f.s());
            let dim = f.grid().dim();
            let mut w1 = [0.0; 2];
            let mut w2 = [0.0; 2];
            let mut w0 = 0.0;
            for (i, &r) in rho.iter().enumerate() {
                w0 += r;
                for a in 0..dim {
                    let p = grads[a][i];
                    w1[a] += r * p;
                    w2[a] += r * p * p;
                }
            }
            let mut mean_p = [0.0; 2];
            let mut sigma_p = [0.0; 2];
            for a in 0..dim {
                mean_p[a] = w1[a] / w0;
                sigma_p[a] = (w2[a] / w0 - mean_p[a] * mean_p[a]).max(0.0).sqrt();
            }
            Moments {
                norm: mass.sqrt(),
                mean_x,
                sigma_x,
                mean_p,
                sigma_p,
                min_rho,
                node_count: f.node_count(),
            }
        }
    }
}

/// Mean total energy of a state in the potential `v`.
///
/// For a complex state the kinetic part is read off the wavenumber spectrum
/// (periodic grids) or from `|grad psi|^2` (bounded grids); for a polar
/// state it is the density-weighted `|grad S|^2 / 2m`, the transport energy
/// that actually drives the classical equations.
pub fn mean_energy(state: &SimState, v: &Potential, c: &PhysicalConstants) -> f64 {
    let grid = state.grid();
    let v_field = match v.sample(grid, c) {
        Ok(f) => f,
        Err(_) => return f64::NAN,
    };
    match state {
        SimState::Linear(psi) => {
            let rho = psi.density();
            let mass: f64 = rho.data().iter().sum::<f64>();
            let pot: f64 = rho
                .data()
                .iter()
                .zip(v_field.data())
                .map(|(&r, &pv)| r * pv)
                .sum::<f64>()
                / mass;
            let kin = if grid.is_periodic() {
                let mut ops = SpectralOps::new(grid);
                let mut hat = psi.data().to_vec();
                ops.forward(&mut hat);
                let k2 = ops.k_squared();
                let mut w0 = 0.0;
                let mut e = 0.0;
                for (z, &k2i) in hat.iter().zip(&k2) {
                    let w = z.norm_sqr();
                    w0 += w;
                    e += w * k2i;
                }
                c.hbar * c.hbar * e / w0 / (2.0 * c.mass)
            } else {
                let (mean_p, sigma_p) = stencil_momentum(psi, c);
                let mut e = 0.0;
                for a in 0..grid.dim() {
                    e += mean_p[a] * mean_p[a] + sigma_p[a] * sigma_p[a];
                }
                e / (2.0 * c.mass)
            };
            kin + pot
        }
        SimState::Classical(f) => {
            let grads = stencil::gradient(grid, f.s());
            let mut w0 = 0.0;
            let mut e = 0.0;
            for (i, r) in f.r().iter().enumerate() {
                let rho = r * r;
                w0 += rho;
                let kin: f64 = grads.iter().map(|g| g[i] * g[i]).sum();
                e += rho * (kin / (2.0 * c.mass) + v_field.data()[i]);
            }
            e / w0
        }
    }
}

/// Full diagnostics row for one snapshot.
pub fn diagnostics(
    state: &SimState,
    v: &Potential,
    c: &PhysicalConstants,
    t: f64,
) -> DiagnosticsRecord {
    let m = moments(state, c);
    DiagnosticsRecord {
        t,
        norm: m.norm,
        energy: mean_energy(state, v, c),
        mean_x: m.mean_x[0],
        mean_p: m.mean_p[0],
        sigma_x: m.sigma_x[0],
        sigma_p: m.sigma_p[0],
        ehrenfest1: f64::NAN,
        ehrenfest2: f64::NAN,
        node_count: m.node_count,
        min_rho: m.min_rho,
    }
}

/// Three-point derivative at the middle of `(t0, f0), (t1, f1), (t2, f2)`,
/// valid for unequal spacing.
fn centered_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let hm = t[1] - t[0];
    let hp = t[2] - t[1];
    (hm * hm * f[2] - hp * hp * f[0] + (hp * hp - hm * hm) * f[1]) / (hp * hm * (hp + hm))
}

/// Fills the two Ehrenfest residual columns of `records` in place.
///
/// Residual 1 is `|d<x>/dt - <p>/m|` and residual 2 is
/// `|d<p>/dt - <F>|`, both along axis 0, with the time derivatives taken by
/// centered differences over the snapshot series. The first and last rows
/// have no centered neighbor and keep NaN.
pub fn ehrenfest_residuals(
    records: &mut [DiagnosticsRecord],
    snapshots: &SnapshotSeries,
    v: &Potential,
    c: &PhysicalConstants,
) -> Result<(), ObservablesError> {
    if records.len() != snapshots.len() {
        return Err(ObservablesError::MismatchedSeries {
            records: records.len(),
            snapshots: snapshots.len(),
        });
    }
    if records.len() < 3 {
        return Err(ObservablesError::InsufficientSnapshots { got: records.len(), min: 3 });
    }

    let mean_force: Vec<f64> = snapshots
        .states()
        .iter()
        .map(|state| {
            let grid = state.grid();
            let force = v.force_field(grid, c)?;
            let rho = state.density();
            let mass: f64 = rho.data().iter().sum();
            Ok(rho
                .data()
                .iter()
                .zip(force[0].data())
                .map(|(&r, &f)| r * f)
                .sum::<f64>()
                / mass)
        })
        .collect::<Result<_, DynamicsError>>()?;

    for i in 1..records.len() - 1 {
        let t = [records[i - 1].t, records[i].t, records[i + 1].t];
        let x = [records[i - 1].mean_x, records[i].mean_x, records[i + 1].mean_x];
        let p = [records[i - 1].mean_p, records[i].mean_p, records[i + 1].mean_p];
        let dx = centered_derivative(t, x);
        let dp = centered_derivative(t, p);
        records[i].ehrenfest1 = (dx - records[i].mean_p / c.mass).abs();
        records[i].ehrenfest2 = (dp - mean_force[i]).abs();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_packet, gaussian_polar, Boundary, Grid};

    const HBAR: f64 = 1.0;

    fn periodic(n: usize, half: f64) -> Grid {
        Grid::new_1d(n, -half, half, Boundary::Periodic).unwrap()
    }

    #[test]
    fn gaussian_saturates_the_uncertainty_bound() {
        let grid = periodic(512, 20.0);
        let c = PhysicalConstants::natural();
        let sigma = 1.0;
        let psi = gaussian_packet(&grid, &c, &[2.0], sigma, &[3.0], 0.0).unwrap();
        let m = moments(&SimState::Linear(psi), &c);
        assert!((m.mean_x[0] - 2.0).abs() < 1e-10);
        assert!((m.mean_p[0] - 3.0).abs() < 1e-10);
        assert!((m.sigma_x[0] - sigma).abs() < 1e-9);
        assert!((m.sigma_p[0] - HBAR / (2.0 * sigma)).abs() < 1e-9);
        let product = m.sigma_x[0] * m.sigma_p[0];
        assert!((product - 0.5 * HBAR).abs() < 1e-8, "product {product}");
    }

    #[test]
    fn polar_gaussian_has_sharp_momentum() {
        let grid = periodic(512, 20.0);
        let c = PhysicalConstants::natural();
        let f = gaussian_polar(&grid, &[0.0], 1.0, &[2.5], 0.0).unwrap();
        let m = moments(&SimState::Classical(f), &c);
        assert!((m.mean_p[0] - 2.5).abs() < 1e-10);
        // S is linear, so the transport momentum has no spread at all: the
        // polar state carries none of the complex state's hbar/2-sigma floor.
        assert!(m.sigma_p[0] < 1e-9, "sigma_p {}", m.sigma_p[0]);
    }

    #[test]
    fn chirped_polar_momentum_spread_tracks_the_position_spread() {
        let grid = periodic(1024, 20.0);
        let c = PhysicalConstants::natural();
        let chirp = 0.7;
        let f = gaussian_polar(&grid, &[0.0], 1.2, &[0.0], chirp).unwrap();
        let m = moments(&SimState::Classical(f), &c);
        // grad S = chirp * x, so sigma_p = chirp * sigma_x exactly.
        let want = chirp * m.sigma_x[0];
        assert!((m.sigma_p[0] - want).abs() < 1e-6, "{} vs {want}", m.sigma_p[0]);
    }

    #[test]
    fn harmonic_packet_energy_matches_the_closed_form() {
        let grid = periodic(512, 20.0);
        let c = PhysicalConstants::natural();
        let (sigma, x0, omega) = (0.8, 1.5, 1.3);
        let psi = gaussian_packet(&grid, &c, &[x0], sigma, &[0.0], 0.0).unwrap();
        let e = mean_energy(
            &SimState::Linear(psi),
            &Potential::Harmonic { omega },
            &c,
        );
        let want = HBAR * HBAR / (8.0 * c.mass * sigma * sigma)
            + 0.5 * c.mass * omega * omega * (x0 * x0 + sigma * sigma);
        assert!((e - want).abs() / want < 1e-9, "E {e} vs {want}");
    }

    #[test]
    fn uniform_flow_has_vanishing_ehrenfest_residuals() {
        use crate::dynamics::{evolve, EvolverConfig, EvolverKind};
        let grid = periodic(256, 15.0);
        let c = PhysicalConstants::natural();
        let f = gaussian_polar(&grid, &[-4.0], 1.0, &[1.5], 0.0).unwrap();
        let cfg = EvolverConfig::new(EvolverKind::Classical, 0.01, 0.2).unwrap();
        let mut out = evolve(SimState::Classical(f), &Potential::Free, &c, &cfg, |_, _| {}).unwrap();
        ehrenfest_residuals(&mut out.records, &out.snapshots, &Potential::Free, &c).unwrap();
        assert!(out.records[0].ehrenfest1.is_nan());
        for rec in &out.records[1..out.records.len() - 1] {
            assert!(rec.ehrenfest1 < 1e-8, "r1 {}", rec.ehrenfest1);
            assert!(rec.ehrenfest2 < 1e-8, "r2 {}", rec.ehrenfest2);
        }
    }
}
