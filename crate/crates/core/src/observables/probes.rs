//! Probes that put the two evolution laws side by side on identical data:
//! superposition defect, frozen-flow amplitude additivity, and two-beam
//! interference composition.

use num_complex::Complex64;

use crate::dynamics::{evolve, EvolverConfig, EvolverKind, Potential, SimState, SnapshotSeries};
use crate::fields::{
    decompose, recompose, MadelungFields, PhysicalConstants, ScalarField, WaveFunction, NODE_EPS,
};
use crate::numerics::stencil;

use super::ObservablesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeVerdict {
    /// Every sampled value stayed at or below the threshold.
    Within,
    /// At least one sampled value rose above the threshold.
    Exceeded,
}

/// A scalar-valued probe sampled over time, with the threshold it was
/// judged against. Whether `Exceeded` is good news depends on the probe:
/// a linearity defect should stay `Within`, a nonlinearity contrast is
/// expected to land `Exceeded`.
#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub threshold: f64,
    pub verdict: ProbeVerdict,
}

impl ProbeResult {
    pub fn from_series(name: &str, times: Vec<f64>, values: Vec<f64>, threshold: f64) -> Self {
        let verdict = if values.iter().any(|v| *v > threshold) {
            ProbeVerdict::Exceeded
        } else {
            ProbeVerdict::Within
        };
        ProbeResult { name: name.to_string(), times, values, threshold, verdict }
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NAN, f64::max)
    }
}

/// Measures how far an evolution is from acting linearly on state space.
///
/// Both parts and their weighted sum are run forward with the same settings;
/// at every snapshot the probe records
///
/// ```text
/// D(t) = || U[c1 p1 + c2 p2] - (c1 U[p1] + c2 U[p2]) ||  /  || c1 U[p1] + c2 U[p2] ||
/// ```
///
/// in the L² norm. For the spectral stepper the three runs pass through
/// identical linear operations and D stays at round-off; the classical
/// stepper feeds the summed state's own action back into its transport, and
/// D grows with time.
///
/// The classical branch works on polar forms, which only exist away from
/// zeros of the amplitude. It refuses inputs where the samplewise guarantee
/// `|c1| R1 > |c2| R2` fails, since the superposed amplitude could then
/// vanish somewhere and break the polar description.
#[allow(clippy::too_many_arguments)]
pub fn superposition_violation(
    psi1: &WaveFunction,
    psi2: &WaveFunction,
    c1: Complex64,
    c2: Complex64,
    v: &Potential,
    c: &PhysicalConstants,
    cfg: &EvolverConfig,
    threshold: f64,
) -> Result<ProbeResult, ObservablesError> {
    if psi1.grid() != psi2.grid() {
        return Err(ObservablesError::GridMismatch);
    }
    let sum = WaveFunction::superpose(psi1, psi2, c1, c2)?;
    let vol = psi1.grid().cell_volume();

    // Each run yields the complex state at every snapshot time.
    let runs: Vec<Vec<(f64, WaveFunction)>> = match cfg.kind {
        EvolverKind::Linear => [psi1.clone(), psi2.clone(), sum]
            .into_iter()
            .map(|psi| {
                let out = evolve(SimState::Linear(psi), v, c, cfg, |_, _| {})?;
                Ok(out
                    .snapshots
                    .times()
                    .iter()
                    .zip(out.snapshots.states())
                    .map(|(&t, s)| (t, s.as_linear().expect("linear run").clone()))
                    .collect())
            })
            .collect::<Result<_, ObservablesError>>()?,
        EvolverKind::Classical => {
            let f1 = decompose(psi1, c, NODE_EPS)?;
            let f2 = decompose(psi2, c, NODE_EPS)?;
            for f in [&f1, &f2] {
                if let Some(i) = f.nodes().iter().position(|&b| b) {
                    return Err(ObservablesError::NodeInSuperposition { index: i });
                }
            }
            let (a1, a2) = (c1.norm(), c2.norm());
            if let Some(i) = f1
                .r()
                .iter()
                .zip(f2.r())
                .position(|(r1, r2)| a1 * r1 <= a2 * r2)
            {
                return Err(ObservablesError::NodeInSuperposition { index: i });
            }
            let fsum = decompose(&sum, c, NODE_EPS)?;
            if let Some(i) = fsum.nodes().iter().position(|&b| b) {
                return Err(ObservablesError::NodeInSuperposition { index: i });
            }
            [f1, f2, fsum]
                .into_iter()
                .map(|f| {
                    let out = evolve(SimState::Classical(f), v, c, cfg, |_, _| {})?;
                    out.snapshots
                        .times()
                        .iter()
                        .zip(out.snapshots.states())
                        .map(|(&t, s)| {
                            let psi = recompose(s.as_classical().expect("classical run"), c);
                            Ok((t, psi))
                        })
                        .collect()
                })
                .collect::<Result<_, ObservablesError>>()?
        }
    };

    // A classical run may stop early at a caustic; compare as far as all
    // three got.
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    let mut times = Vec::with_capacity(len);
    let mut values = Vec::with_capacity(len);
    for i in 0..len {
        let (t, u1) = &runs[0][i];
        let (_, u2) = &runs[1][i];
        let (_, usum) = &runs[2][i];
        let mut diff = 0.0;
        let mut reference = 0.0;
        for ((a, b), s) in u1.data().iter().zip(u2.data()).zip(usum.data()) {
            let lin = c1 * a + c2 * b;
            diff += (s - lin).norm_sqr();
            reference += lin.norm_sqr();
        }
        times.push(*t);
        values.push((diff * vol).sqrt() / (reference * vol).sqrt());
    }
    Ok(ProbeResult::from_series("superposition_defect", times, values, threshold))
}

/// Advances amplitudes along a prescribed action history.
///
/// The action snapshots (from a previous polar run) are interpolated
/// linearly in time and drive the transport
///
/// ```text
/// dR/dt = -( (grad S / m) . grad R  +  (lap S / 2m) R )
/// ```
///
/// for `r_a`, `r_b` and `alpha r_a + beta r_b` side by side. With the flow
/// fixed, transport is a linear operation, so the recorded defect
///
/// ```text
/// || T[alpha a + beta b] - (alpha T[a] + beta T[b]) || / || alpha T[a] + beta T[b] ||
/// ```
///
/// stays at round-off no matter how nonlinearly S itself was generated.
pub fn r_linearity_defect(
    r_a: &ScalarField,
    r_b: &ScalarField,
    alpha: f64,
    beta: f64,
    action: &SnapshotSeries,
    c: &PhysicalConstants,
    threshold: f64,
) -> Result<ProbeResult, ObservablesError> {
    if r_a.grid() != r_b.grid() {
        return Err(ObservablesError::GridMismatch);
    }
    if action.len() < 2 {
        return Err(ObservablesError::InsufficientSnapshots { got: action.len(), min: 2 });
    }
    let grid = r_a.grid().clone();
    let s_fields: Vec<&[f64]> = action
        .states()
        .iter()
        .map(|s| match s {
            SimState::Classical(f) => {
                if f.grid() == &grid {
                    Ok(f.s())
                } else {
                    Err(ObservablesError::GridMismatch)
                }
            }
            SimState::Linear(_) => Err(ObservablesError::GridMismatch),
        })
        .collect::<Result<_, _>>()?;

    let n = grid.len();
    let dim = grid.dim();
    let mut states: [Vec<f64>; 3] = [
        r_a.data().to_vec(),
        r_b.data().to_vec(),
        r_a.data()
            .iter()
            .zip(r_b.data())
            .map(|(a, b)| alpha * a + beta * b)
            .collect(),
    ];

    let vol = grid.cell_volume();
    let defect = |st: &[Vec<f64>; 3]| -> f64 {
        let mut diff = 0.0;
        let mut reference = 0.0;
        for i in 0..n {
            let lin = alpha * st[0][i] + beta * st[1][i];
            diff += (st[2][i] - lin) * (st[2][i] - lin);
            reference += lin * lin;
        }
        (diff * vol).sqrt() / (reference * vol).sqrt()
    };

    let mut times = vec![action.times()[0]];
    let mut values = vec![defect(&states)];

    for seg in 0..action.len() - 1 {
        let (t0, t1) = (action.times()[seg], action.times()[seg + 1]);
        let span = t1 - t0;
        // Gradients and Laplacians of S at both ends; stage values lerp.
        let g0: Vec<Vec<f64>> = (0..dim)
            .map(|a| stencil::gradient_axis(&grid, s_fields[seg], a))
            .collect();
        let g1: Vec<Vec<f64>> = (0..dim)
            .map(|a| stencil::gradient_axis(&grid, s_fields[seg + 1], a))
            .collect();
        let l0 = stencil::laplacian(&grid, s_fields[seg]);
        let l1 = stencil::laplacian(&grid, s_fields[seg + 1]);

        let mut vmax: f64 = 0.0;
        for g in g0.iter().chain(&g1) {
            for &v in g {
                vmax = vmax.max(v.abs() / c.mass);
            }
        }
        let bound = 0.5 * grid.dx_min() / vmax.max(1e-12);
        let n_sub = (span / bound).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;

        // dR/dt at fraction `w` through the segment.
        let rhs = |r: &[f64], w: f64| -> Vec<f64> {
            let grads_r: Vec<Vec<f64>> =
                (0..dim).map(|a| stencil::gradient_axis(&grid, r, a)).collect();
            (0..n)
                .map(|i| {
                    let mut adv = 0.0;
                    for a in 0..dim {
                        let gs = g0[a][i] + w * (g1[a][i] - g0[a][i]);
                        adv += gs * grads_r[a][i];
                    }
                    let lap = l0[i] + w * (l1[i] - l0[i]);
                    -(adv / c.mass + 0.5 * lap / c.mass * r[i])
                })
                .collect()
        };

        for sub in 0..n_sub {
            let w0 = sub as f64 / n_sub as f64;
            let wh = (sub as f64 + 0.5) / n_sub as f64;
            let w1 = (sub + 1) as f64 / n_sub as f64;
            for r in states.iter_mut() {
                let k1 = rhs(r, w0);
                let y2: Vec<f64> = r.iter().zip(&k1).map(|(v, k)| v + 0.5 * h * k).collect();
                let k2 = rhs(&y2, wh);
                let y3: Vec<f64> = r.iter().zip(&k2).map(|(v, k)| v + 0.5 * h * k).collect();
                let k3 = rhs(&y3, wh);
                let y4: Vec<f64> = r.iter().zip(&k3).map(|(v, k)| v + h * k).collect();
                let k4 = rhs(&y4, w1);
                for i in 0..n {
                    r[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }
        times.push(t1);
        values.push(defect(&states));
    }

    Ok(ProbeResult::from_series("amplitude_additivity_defect", times, values, threshold))
}

/// Two-beam composition at a single instant.
#[derive(Debug, Clone)]
pub struct InterferencePattern {
    /// Combined density `R1² + R2² + excess`.
    pub density: ScalarField,
    /// Cross term: `2 R1 R2 cos((S1-S2)/hbar)` for linear composition,
    /// `2 R1 R2` for classical composition, which cannot go negative.
    pub excess: ScalarField,
    pub min_excess: f64,
    /// Michelson visibility over the overlap window (both partial densities
    /// above 1% of their peaks); zero when the beams do not overlap.
    pub visibility: f64,
}

/// Composes two polar beams the way the chosen theory adds them.
pub fn interference_excess(
    part1: &MadelungFields,
    part2: &MadelungFields,
    kind: EvolverKind,
    c: &PhysicalConstants,
) -> Result<InterferencePattern, ObservablesError> {
    if part1.grid() != part2.grid() {
        return Err(ObservablesError::GridMismatch);
    }
    let grid = part1.grid().clone();
    let n = grid.len();
    let mut excess = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for i in 0..n {
        let (r1, r2) = (part1.r()[i], part2.r()[i]);
        let cross = match kind {
            EvolverKind::Classical => 2.0 * r1 * r2,
            EvolverKind::Linear => {
                2.0 * r1 * r2 * ((part1.s()[i] - part2.s()[i]) / c.hbar).cos()
            }
        };
        excess.push(cross);
        density.push(r1 * r1 + r2 * r2 + cross);
    }

    let rho1_max = part1.r().iter().map(|r| r * r).fold(0.0f64, f64::max);
    let rho2_max = part2.r().iter().map(|r| r * r).fold(0.0f64, f64::max);
    let mut window_max = f64::NEG_INFINITY;
    let mut window_min = f64::INFINITY;
    let mut overlap = false;
    for i in 0..n {
        let rho1 = part1.r()[i] * part1.r()[i];
        let rho2 = part2.r()[i] * part2.r()[i];
        if rho1 > 0.01 * rho1_max && rho2 > 0.01 * rho2_max {
            overlap = true;
            window_max = window_max.max(density[i]);
            window_min = window_min.min(density[i]);
        }
    }
    let visibility = if overlap && window_max + window_min > 0.0 {
        (window_max - window_min) / (window_max + window_min)
    } else {
        0.0
    };

    let min_excess = excess.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(InterferencePattern {
        density: ScalarField::new(grid.clone(), density)?,
        excess: ScalarField::new(grid, excess)?,
        min_excess,
        visibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EvolverConfig;
    use crate::fields::{gaussian_packet, gaussian_polar, Boundary, Grid};

    fn grid1d(n: usize, half: f64) -> Grid {
        Grid::new_1d(n, -half, half, Boundary::Periodic).unwrap()
    }

    #[test]
    fn spectral_evolution_is_linear_to_roundoff() {
        let grid = grid1d(256, 15.0);
        let c = PhysicalConstants::natural();
        let psi1 = gaussian_packet(&grid, &c, &[-3.0], 1.0, &[1.0], 0.0).unwrap();
        let psi2 = gaussian_packet(&grid, &c, &[3.0], 1.0, &[-1.0], 0.0).unwrap();
        let cfg = EvolverConfig::new(EvolverKind::Linear, 0.01, 0.3).unwrap();
        let probe = superposition_violation(
            &psi1,
            &psi2,
            Complex64::new(0.8, 0.0),
            Complex64::new(0.0, 0.6),
            &Potential::Free,
            &c,
            &cfg,
            1e-12,
        )
        .unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::Within, "max D {}", probe.max_value());
    }

    #[test]
    fn classical_evolution_violates_superposition() {
        let grid = grid1d(256, 10.0);
        let c = PhysicalConstants::natural();
        // Same envelope, opposite gentle momenta, 3:1 weights keep the sum
        // amplitude strictly positive.
        let psi1 = gaussian_packet(&grid, &c, &[0.0], 2.0, &[0.5], 0.0).unwrap();
        let psi2 = gaussian_packet(&grid, &c, &[0.0], 2.0, &[-0.5], 0.0).unwrap();
        let w = (0.9f64, 0.3f64);
        let norm = (w.0 * w.0 + w.1 * w.1).sqrt();
        let (c1, c2) = (
            Complex64::new(w.0 / norm, 0.0),
            Complex64::new(w.1 / norm, 0.0),
        );
        let cfg = EvolverConfig::new(EvolverKind::Classical, 0.005, 0.5).unwrap();
        let probe = superposition_violation(
            &psi1, &psi2, c1, c2, &Potential::Free, &c, &cfg, 1e-6,
        )
        .unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::Exceeded, "max D {}", probe.max_value());
        assert!(probe.final_value() > 1e-5, "final D {}", probe.final_value());
    }

    #[test]
    fn equal_weights_with_opposite_momenta_are_rejected() {
        let grid = grid1d(256, 10.0);
        let c = PhysicalConstants::natural();
        let psi1 = gaussian_packet(&grid, &c, &[0.0], 1.5, &[1.0], 0.0).unwrap();
        let psi2 = gaussian_packet(&grid, &c, &[0.0], 1.5, &[-1.0], 0.0).unwrap();
        let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let cfg = EvolverConfig::new(EvolverKind::Classical, 0.005, 0.1).unwrap();
        let err = superposition_violation(
            &psi1, &psi2, half, half, &Potential::Free, &c, &cfg, 1e-6,
        );
        assert!(matches!(err, Err(ObservablesError::NodeInSuperposition { .. })));
    }

    #[test]
    fn frozen_flow_transport_is_additive() {
        let grid = grid1d(256, 12.0);
        let c = PhysicalConstants::natural();
        // Build an action history from a real run with a nonuniform flow.
        let f0 = gaussian_polar(&grid, &[0.0], 2.5, &[0.6], 0.3).unwrap();
        let cfg = EvolverConfig::new(EvolverKind::Classical, 0.01, 0.3).unwrap();
        let out = evolve(SimState::Classical(f0), &Potential::Free, &c, &cfg, |_, _| {}).unwrap();

        let r_a = gaussian_polar(&grid, &[-1.0], 0.8, &[0.0], 0.0)
            .unwrap()
            .amplitude_field();
        let r_b = gaussian_polar(&grid, &[1.5], 1.1, &[0.0], 0.0)
            .unwrap()
            .amplitude_field();
        let probe =
            r_linearity_defect(&r_a, &r_b, 0.7, -0.4, &out.snapshots, &c, 1e-12).unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::Within, "max defect {}", probe.max_value());
    }

    #[test]
    fn interference_cross_term_sign_depends_on_the_theory() {
        let grid = grid1d(512, 10.0);
        let c = PhysicalConstants::natural();
        let p = 4.0;
        let b1 = gaussian_polar(&grid, &[-1.0], 0.8, &[p], 0.0).unwrap();
        let b2 = gaussian_polar(&grid, &[1.0], 0.8, &[-p], 0.0).unwrap();
        let classical = interference_excess(&b1, &b2, EvolverKind::Classical, &c).unwrap();
        assert!(classical.min_excess >= 0.0);
        let linear = interference_excess(&b1, &b2, EvolverKind::Linear, &c).unwrap();
        assert!(linear.min_excess < 0.0, "min excess {}", linear.min_excess);
        assert!(linear.visibility > 0.5, "visibility {}", linear.visibility);
        assert!(classical.visibility < linear.visibility);
    }
}
