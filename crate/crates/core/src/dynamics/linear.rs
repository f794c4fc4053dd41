use num_complex::Complex64;

use crate::fields::{Grid, PhysicalConstants, ScalarField, WaveFunction};
use crate::numerics::SpectralOps;

use super::{require_spectral_grid, DynamicsError};

/// Strang-split spectral stepper: half a potential kick, a full kinetic
/// drift in Fourier space, half a kick again. Second order in `dt` and
/// exactly norm-preserving, since every factor is a pure phase.
///
/// The phase tables depend on `dt` and are rebuilt only when it changes, so
/// driving many equal steps through one propagator costs two FFTs and three
/// complex multiplies per sample each.
pub struct LinearPropagator {
    grid: Grid,
    ops: SpectralOps,
    v: Vec<f64>,
    k2: Vec<f64>,
    hbar: f64,
    mass: f64,
    table_dt: f64,
    half_kick: Vec<Complex64>,
    drift: Vec<Complex64>,
}

impl LinearPropagator {
    pub fn new(
        grid: &Grid,
        potential: &ScalarField,
        c: &PhysicalConstants,
    ) -> Result<Self, DynamicsError> {
        require_spectral_grid(grid)?;
        if potential.grid() != grid {
            return Err(DynamicsError::PotentialGridMismatch);
        }
        let ops = SpectralOps::new(grid);
        let k2 = ops.k_squared();
        Ok(LinearPropagator {
            grid: grid.clone(),
            ops,
            v: potential.data().to_vec(),
            k2,
            hbar: c.hbar,
            mass: c.mass,
            table_dt: f64::NAN,
            half_kick: Vec::new(),
            drift: Vec::new(),
        })
    }

    fn build_tables(&mut self, dt: f64) {
        if dt == self.table_dt {
            return;
        }
        let kick_rate = -0.5 * dt / self.hbar;
        self.half_kick = self
            .v
            .iter()
            .map(|&v| Complex64::from_polar(1.0, kick_rate * v))
            .collect();
        let drift_rate = -0.5 * self.hbar * dt / self.mass;
        self.drift = self
            .k2
            .iter()
            .map(|&k2| Complex64::from_polar(1.0, drift_rate * k2))
            .collect();
        self.table_dt = dt;
    }

    /// One step of size `dt`. Accuracy needs `dt * max|V| / hbar` well below
    /// one; the driver enforces that, direct callers are on their own.
    pub fn step(&mut self, psi: &WaveFunction, dt: f64) -> Result<WaveFunction, DynamicsError> {
        if psi.grid() != &self.grid {
            return Err(DynamicsError::Fields(crate::fields::FieldsError::GridMismatch));
        }
        self.build_tables(dt);
        let mut data = psi.data().to_vec();
        for (z, k) in data.iter_mut().zip(&self.half_kick) {
            *z *= k;
        }
        self.ops.forward(&mut data);
        for (z, d) in data.iter_mut().zip(&self.drift) {
            *z *= d;
        }
        self.ops.inverse(&mut data);
        for (z, k) in data.iter_mut().zip(&self.half_kick) {
            *z *= k;
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DynamicsError::NumericalBlowup { time: f64::NAN });
        }
        Ok(WaveFunction::new(self.grid.clone(), data).expect("length preserved"))
    }
}

/// Single split-step advance; see [`LinearPropagator`] for repeated stepping.
pub fn step_linear(
    psi: &WaveFunction,
    v: &super::Potential,
    c: &PhysicalConstants,
    dt: f64,
) -> Result<WaveFunction, DynamicsError> {
    let v_field = v.sample(psi.grid(), c)?;
    LinearPropagator::new(psi.grid(), &v_field, c)?.step(psi, dt)
}
