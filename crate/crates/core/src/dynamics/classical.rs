use crate::fields::{Boundary, Grid, MadelungFields, PhysicalConstants, ScalarField, NODE_EPS};
use crate::numerics::{stencil, SpectralOps};

use super::{
    require_spectral_grid, CausticReport, CausticTrigger, DynamicsError, NEGATIVE_RHO_TRIGGER,
};

/// Peak damping rate in the absorbing pad, in inverse time units.
const DAMP_RATE: f64 = 10.0;

/// Each absorbing pad covers this fraction of the axis span per side.
const PAD_FRACTION: f64 = 1.0 / 8.0;

/// RK4 stepper for the coupled system
///
/// ```text
/// d rho / dt = -div(rho grad S / m)
/// d S   / dt = -( |grad S|^2 / 2m + V )
/// ```
///
/// `grad S` and `lap S` always use one-sided-safe difference stencils: the
/// action is defined up to a constant and generally does not match itself
/// across a periodic seam, so wrapping it spectrally would manufacture a
/// spurious jump. The density flux, by contrast, is genuinely periodic on
/// periodic grids and its divergence is taken spectrally there, which keeps
/// the total mass constant to round-off. Bounded grids use difference
/// stencils throughout plus a cosine-ramped damping pad at the edges.
pub struct ClassicalStepper {
    grid: Grid,
    v: Vec<f64>,
    mass: f64,
    spectral: Option<SpectralOps>,
    gamma: Option<Vec<f64>>,
}

impl ClassicalStepper {
    pub fn new(
        grid: &Grid,
        potential: &ScalarField,
        c: &PhysicalConstants,
    ) -> Result<Self, DynamicsError> {
        if potential.grid() != grid {
            return Err(DynamicsError::PotentialGridMismatch);
        }
        let (spectral, gamma) = match grid.boundary() {
            Boundary::Periodic => {
                require_spectral_grid(grid)?;
                (Some(SpectralOps::new(grid)), None)
            }
            Boundary::AbsorbingPad => (None, Some(damping_profile(grid))),
        };
        Ok(ClassicalStepper {
            grid: grid.clone(),
            v: potential.data().to_vec(),
            mass: c.mass,
            spectral,
            gamma,
        })
    }

    fn rhs(&mut self, rho: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let grads = stencil::gradient(&self.grid, s);
        let inv_2m = 0.5 / self.mass;
        let ds: Vec<f64> = (0..rho.len())
            .map(|i| {
                let kin: f64 = grads.iter().map(|g| g[i] * g[i]).sum();
                -(kin * inv_2m + self.v[i])
            })
            .collect();
        let flux: Vec<Vec<f64>> = grads
            .iter()
            .map(|g| g.iter().zip(rho).map(|(&gi, &ri)| ri * gi / self.mass).collect())
            .collect();
        let div = match &mut self.spectral {
            Some(ops) => ops.divergence(&flux),
            None => stencil::divergence(&self.grid, &flux),
        };
        (div.into_iter().map(|d| -d).collect(), ds)
    }

    /// One RK4 step of size `dt` on `(rho, S)`.
    ///
    /// After the update the density is screened: outright negative regions
    /// (beyond [`NEGATIVE_RHO_TRIGGER`] of the peak) abort with a caustic
    /// report, while shallower undershoots are clamped to zero before taking
    /// the square root back to an amplitude.
    pub fn step(
        &mut self,
        fields: &MadelungFields,
        dt: f64,
    ) -> Result<MadelungFields, DynamicsError> {
        if fields.grid() != &self.grid {
            return Err(DynamicsError::Fields(crate::fields::FieldsError::GridMismatch));
        }
        let n = self.grid.len();
        let rho0: Vec<f64> = fields.r().iter().map(|r| r * r).collect();
        let s0 = fields.s().to_vec();

        let shift = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
            base.iter().zip(k).map(|(b, ki)| b + h * ki).collect()
        };
        let (k1r, k1s) = self.rhs(&rho0, &s0);
        let (k2r, k2s) = self.rhs(&shift(&rho0, &k1r, 0.5 * dt), &shift(&s0, &k1s, 0.5 * dt));
        let (k3r, k3s) = self.rhs(&shift(&rho0, &k2r, 0.5 * dt), &shift(&s0, &k2s, 0.5 * dt));
        let (k4r, k4s) = self.rhs(&shift(&rho0, &k3r, dt), &shift(&s0, &k3s, dt));

        let sixth = dt / 6.0;
        let mut rho: Vec<f64> = (0..n)
            .map(|i| rho0[i] + sixth * (k1r[i] + 2.0 * (k2r[i] + k3r[i]) + k4r[i]))
            .collect();
        let s: Vec<f64> = (0..n)
            .map(|i| s0[i] + sixth * (k1s[i] + 2.0 * (k2s[i] + k3s[i]) + k4s[i]))
            .collect();

        if rho.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(DynamicsError::NumericalBlowup { time: f64::NAN });
        }

        if let Some(gamma) = &self.gamma {
            for (r, &g) in rho.iter_mut().zip(gamma) {
                if g > 0.0 {
                    *r *= (-g * dt).exp();
                }
            }
        }

        let rho_max = rho.iter().fold(0.0f64, |m, &v| m.max(v));
        // The caustic guard watches the interior only: inside the damping
        // pad small undershoots are sponge artifacts, not physics.
        let in_pad = |i: usize| self.gamma.as_ref().is_some_and(|g| g[i] > 0.0);
        let (idx_min, rho_min) = rho
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_pad(*i))
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if rho_max > 0.0 && rho_min < -NEGATIVE_RHO_TRIGGER * rho_max {
            return Err(DynamicsError::CausticDetected {
                report: CausticReport {
                    time: f64::NAN,
                    trigger: CausticTrigger::NegativeDensity { min_rho_rel: rho_min / rho_max },
                    flat_index: idx_min,
                    position: self.grid.coords(idx_min),
                },
            });
        }

        let r: Vec<f64> = rho.iter().map(|&v| v.max(0.0).sqrt()).collect();
        let r_max = r.iter().fold(0.0f64, |m, &v| m.max(v));
        let nodes = r.iter().map(|&v| v < NODE_EPS * r_max).collect();
        Ok(MadelungFields::with_nodes(self.grid.clone(), r, s, nodes))
    }
}

/// Damping rate profile for bounded grids: zero in the interior, rising as
/// cos² of the distance into the pad to [`DAMP_RATE`] at the very edge.
fn damping_profile(grid: &Grid) -> Vec<f64> {
    let mut gamma = vec![0.0; grid.len()];
    for (i, g) in gamma.iter_mut().enumerate() {
        let idx = grid.unflatten(i);
        let mut total = 0.0;
        for a in 0..grid.dim() {
            let ax = grid.axis(a);
            let w = ax.len() * PAD_FRACTION;
            let x = ax.coord(idx[a]);
            let d = (x - ax.min).min(ax.max - x);
            if d < w {
                let ramp = (std::f64::consts::FRAC_PI_2 * d / w).cos();
                total += ramp * ramp;
            }
        }
        *g = DAMP_RATE * total;
    }
    gamma
}

/// Single RK4 advance; see [`ClassicalStepper`] for repeated stepping.
pub fn step_classical(
    fields: &MadelungFields,
    v: &super::Potential,
    c: &PhysicalConstants,
    dt: f64,
) -> Result<MadelungFields, DynamicsError> {
    let v_field = v.sample(fields.grid(), c)?;
    ClassicalStepper::new(fields.grid(), &v_field, c)?.step(fields, dt)
}
