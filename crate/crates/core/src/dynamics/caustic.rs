use std::fmt;

use crate::fields::{MadelungFields, PhysicalConstants};
use crate::numerics::stencil;

use super::NEGATIVE_RHO_TRIGGER;

/// What tripped the caustic guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CausticTrigger {
    /// `max |lap S| dt / m` exceeded the configured threshold: the velocity
    /// field compresses faster than one output step can resolve.
    Compression { metric: f64 },
    /// The density dipped below minus [`NEGATIVE_RHO_TRIGGER`] times its
    /// peak, past what dispersive ringing can explain.
    NegativeDensity { min_rho_rel: f64 },
}

impl fmt::Display for CausticTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CausticTrigger::Compression { metric } => {
                write!(f, "compression metric {metric:.3e} exceeded the per-step threshold")
            }
            CausticTrigger::NegativeDensity { min_rho_rel } => {
                write!(f, "density dipped to {min_rho_rel:.3e} of its peak")
            }
        }
    }
}

/// Where and why a classical run had to stop.
///
/// `time` is filled in by the driver; the steppers and [`detect_caustic`]
/// have no clock and leave it NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CausticReport {
    pub time: f64,
    pub trigger: CausticTrigger,
    pub flat_index: usize,
    pub position: [f64; 2],
}

/// Checks whether the classical fields are about to focus into a caustic.
///
/// Two tests, in order: the compression metric `max |lap S| dt / m` against
/// `theta_c`, and the most negative density sample against the ringing
/// allowance. `dt` should be the nominal output step, not an adapted inner
/// step; shrinking the inner step does not make a forming caustic any more
/// resolvable.
pub fn detect_caustic(
    fields: &MadelungFields,
    c: &PhysicalConstants,
    dt: f64,
    theta_c: f64,
) -> Option<CausticReport> {
    let grid = fields.grid();
    let lap = stencil::laplacian(grid, fields.s());
    let (idx, max_lap) = lap
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.abs()))
        .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
    let metric = max_lap * dt / c.mass;
    if metric > theta_c {
        return Some(CausticReport {
            time: f64::NAN,
            trigger: CausticTrigger::Compression { metric },
            flat_index: idx,
            position: grid.coords(idx),
        });
    }

    // R is a plain sample vector, so callers can hand in signed data;
    // anything the stepper clamped is gone by now, but a freshly built
    // state may still carry real negative density.
    let mut rho_min = f64::INFINITY;
    let mut rho_max = 0.0f64;
    let mut idx_min = 0;
    for (i, r) in fields.r().iter().enumerate() {
        let signed = r.abs() * *r; // r|r|: squared magnitude, sign kept
        if signed < rho_min {
            rho_min = signed;
            idx_min = i;
        }
        rho_max = rho_max.max(signed);
    }
    if rho_max > 0.0 && rho_min < -NEGATIVE_RHO_TRIGGER * rho_max {
        return Some(CausticReport {
            time: f64::NAN,
            trigger: CausticTrigger::NegativeDensity { min_rho_rel: rho_min / rho_max },
            flat_index: idx_min,
            position: grid.coords(idx_min),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_polar, Boundary, Grid};

    #[test]
    fn gentle_flow_passes_and_strong_focusing_trips() {
        let grid = Grid::new_1d(256, -20.0, 20.0, Boundary::Periodic).unwrap();
        let c = PhysicalConstants::natural();
        // lap S = chirp everywhere for S = chirp x^2 / 2.
        let gentle = gaussian_polar(&grid, &[0.0], 2.0, &[0.0], 0.05).unwrap();
        assert!(detect_caustic(&gentle, &c, 0.01, 0.1).is_none());
        let harsh = gaussian_polar(&grid, &[0.0], 2.0, &[0.0], -30.0).unwrap();
        let report = detect_caustic(&harsh, &c, 0.01, 0.1).unwrap();
        match report.trigger {
            CausticTrigger::Compression { metric } => {
                assert!((metric - 0.3).abs() < 1e-6, "metric {metric}");
            }
            other => panic!("wrong trigger {other:?}"),
        }
    }

    #[test]
    fn negative_density_region_is_reported() {
        let grid = Grid::new_1d(64, -5.0, 5.0, Boundary::Periodic).unwrap();
        let c = PhysicalConstants::natural();
        let mut r = vec![1.0; 64];
        r[30] = -0.1; // signed amplitude: rho = r|r| = -0.01 there
        let fields = crate::fields::MadelungFields::new(grid, r, vec![0.0; 64]).unwrap();
        let report = detect_caustic(&fields, &c, 0.01, 0.1).unwrap();
        assert_eq!(report.flat_index, 30);
        assert!(matches!(report.trigger, CausticTrigger::NegativeDensity { .. }));
    }
}
