//! State representations: complex wave functions and their polar
//! (amplitude/action) decomposition on uniform grids.

mod grid;
mod madelung;
mod states;

pub use grid::{Axis, Boundary, Grid};
pub use madelung::{
    circle_loop, decompose, quantum_potential, recompose, winding_circulation, Winding,
};
pub use states::{
    cosine_bump, gaussian_packet, gaussian_polar, truncated_gaussian, uniform_amplitude,
    vortex_state,
};

use num_complex::Complex64;
use thiserror::Error;

/// Relative amplitude threshold below which a sample counts as a node:
/// the phase there is numerically meaningless and gets continued from the
/// nearest well-defined neighbor.
pub const NODE_EPS: f64 = 1e-10;

/// Relative amplitude threshold below which the quantum potential is set
/// to zero instead of dividing by a vanishing amplitude.
pub const REG_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FieldsError {
    #[error("field has no nonzero samples")]
    AllZeroField,
    #[error("loop passes through a node-flagged sample (flat index {index})")]
    LoopThroughNode { index: usize },
    #[error("loop needs at least 3 distinct samples, got {got}")]
    DegenerateLoop { got: usize },
    #[error("grid axis has {got} points, need at least {min}")]
    TooFewPoints { got: usize, min: usize },
    #[error("axis bounds [{min}, {max}] are not finite and increasing")]
    BadBounds { min: f64, max: f64 },
    #[error("only 1- and 2-dimensional grids are supported, got {dim}")]
    UnsupportedDimension { dim: usize },
    #[error("expected {expected} samples for this grid, got {got}")]
    SampleCountMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("operation needs a {expected}-dimensional grid, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("loop point ({x}, {y}) is outside the grid")]
    LoopOutsideGrid { x: f64, y: f64 },
    #[error("field norm is zero, cannot normalize")]
    ZeroNorm,
}

/// ħ and the particle mass, in whatever unit system the caller works in.
/// Defaults to natural units ħ = m = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn natural() -> Self {
        Self::default()
    }
}

/// Real-valued samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self, FieldsError> {
        grid.check_len(&data)?;
        Ok(ScalarField { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        ScalarField { grid, data: vec![0.0; n] }
    }

    /// Builds a field by evaluating `f` at every sample position.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        ScalarField { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// ∫ f dV by the rectangle rule (exact order for periodic data).
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// (∫ f² dV)^(1/2).
    pub fn norm_l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Scales the samples so that ∫ f² dV = 1.
    pub fn normalize_l2(&mut self) -> Result<(), FieldsError> {
        let n = self.norm_l2();
        if n == 0.0 || !n.is_finite() {
            return Err(FieldsError::ZeroNorm);
        }
        for v in &mut self.data {
            *v /= n;
        }
        Ok(())
    }

    /// Multilinear interpolation at an arbitrary point. Periodic grids wrap;
    /// on bounded grids `None` is returned outside the sampled box.
    pub fn interp(&self, pos: [f64; 2]) -> Option<f64> {
        interp_weights(&self.grid, pos).map(|st| {
            st.iter().map(|&(i, w)| w * self.data[i]).sum()
        })
    }
}

/// Interpolation stencil: up to 4 (flat index, weight) pairs.
/// Shared by field interpolation and the trajectory integrator, so both
/// agree about what "inside the domain" means.
pub(crate) fn interp_weights(grid: &Grid, pos: [f64; 2]) -> Option<Vec<(usize, f64)>> {
    let dim = grid.dim();
    let mut cell = [0usize; 2];
    let mut frac = [0.0f64; 2];
    for a in 0..dim {
        let ax = grid.axis(a);
        let dx = ax.dx();
        let mut u = (pos[a] - ax.min) / dx;
        if grid.is_periodic() {
            u = u.rem_euclid(ax.n as f64);
        } else if !(0.0..=(ax.n - 1) as f64).contains(&u) {
            return None;
        }
        let i0 = u.floor() as usize;
        cell[a] = i0.min(ax.n - 1);
        frac[a] = u - cell[a] as f64;
    }
    let wrap = |i: usize, a: usize| -> usize {
        let n = grid.axis(a).n;
        if i >= n {
            if grid.is_periodic() {
                i - n
            } else {
                n - 1
            }
        } else {
            i
        }
    };
    let mut out = Vec::with_capacity(1 << dim);
    match dim {
        1 => {
            let i1 = wrap(cell[0] + 1, 0);
            out.push((cell[0], 1.0 - frac[0]));
            out.push((i1, frac[0]));
        }
        _ => {
            let nx = grid.axis(0).n;
            let ix1 = wrap(cell[0] + 1, 0);
            let iy1 = wrap(cell[1] + 1, 1);
            let (fx, fy) = (frac[0], frac[1]);
            out.push((cell[0] + nx * cell[1], (1.0 - fx) * (1.0 - fy)));
            out.push((ix1 + nx * cell[1], fx * (1.0 - fy)));
            out.push((cell[0] + nx * iy1, (1.0 - fx) * fy));
            out.push((ix1 + nx * iy1, fx * fy));
        }
    }
    Some(out)
}

/// Complex wave function ψ on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    data: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Self, FieldsError> {
        grid.check_len(&data)?;
        Ok(WaveFunction { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        WaveFunction { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// |ψ|² as a scalar field.
    pub fn density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    /// (∫ |ψ|² dV)^(1/2).
    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn normalize(&mut self) -> Result<(), FieldsError> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(FieldsError::ZeroNorm);
        }
        for z in &mut self.data {
            *z /= n;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// ψ ← ψ₁ scaled by c₁ plus ψ₂ scaled by c₂.
    pub fn superpose(
        psi1: &WaveFunction,
        psi2: &WaveFunction,
        c1: Complex64,
        c2: Complex64,
    ) -> Result<WaveFunction, FieldsError> {
        if psi1.grid != psi2.grid {
            return Err(FieldsError::GridMismatch);
        }
        let data = psi1
            .data
            .iter()
            .zip(&psi2.data)
            .map(|(a, b)| c1 * a + c2 * b)
            .collect();
        Ok(WaveFunction { grid: psi1.grid.clone(), data })
    }
}

/// Polar-form state: amplitude R ≥ 0 and action S, with node flags marking
/// samples where R is too small for the phase to mean anything.
#[derive(Clone, Debug, PartialEq)]
pub struct MadelungFields {
    grid: Grid,
    r: Vec<f64>,
    s: Vec<f64>,
    nodes: Vec<bool>,
}

impl MadelungFields {
    pub fn new(grid: Grid, r: Vec<f64>, s: Vec<f64>) -> Result<Self, FieldsError> {
        grid.check_len(&r)?;
        grid.check_len(&s)?;
        let nodes = vec![false; r.len()];
        Ok(MadelungFields { grid, r, s, nodes })
    }

    pub(crate) fn with_nodes(grid: Grid, r: Vec<f64>, s: Vec<f64>, nodes: Vec<bool>) -> Self {
        MadelungFields { grid, r, s, nodes }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn nodes(&self) -> &[bool] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|&&b| b).count()
    }

    pub fn amplitude_field(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), data: self.r.clone() }
    }

    pub fn action_field(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), data: self.s.clone() }
    }

    /// ρ = R² as a scalar field.
    pub fn density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            data: self.r.iter().map(|r| r * r).collect(),
        }
    }

    /// ∫ R² dV.
    pub fn mass(&self) -> f64 {
        self.r.iter().map(|r| r * r).sum::<f64>() * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_is_exact_on_linear_data_and_wraps_periodically() {
        let g = Grid::new_1d(16, 0.0, 1.6, Boundary::Periodic).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| 2.0 * x[0]);
        let v = f.interp([0.35, 0.0]).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
        // between the last sample (1.5) and the wrapped first one (0.0)
        let v = f.interp([1.55, 0.0]).unwrap();
        assert!((v - 0.5 * (3.0 + 0.0)).abs() < 1e-12);
    }

    #[test]
    fn bounded_grid_interp_rejects_outside_points() {
        let g = Grid::new_1d(16, 0.0, 1.6, Boundary::AbsorbingPad).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0]);
        assert!(f.interp([-0.1, 0.0]).is_none());
        assert!(f.interp([1.55, 0.0]).is_none()); // past the last sample
        assert!(f.interp([1.45, 0.0]).is_some());
    }

    #[test]
    fn normalization_and_norms() {
        let g = Grid::new_1d(64, -8.0, 8.0, Boundary::Periodic).unwrap();
        let mut f = ScalarField::from_fn(g, |x| (-x[0] * x[0]).exp());
        f.normalize_l2().unwrap();
        assert!((f.norm_l2() - 1.0).abs() < 1e-12);
        let z = ScalarField::zeros(Grid::new_1d(8, 0.0, 1.0, Boundary::Periodic).unwrap());
        let mut z = z;
        assert!(matches!(z.normalize_l2(), Err(FieldsError::ZeroNorm)));
    }
}
