use super::FieldsError;

/// Treatment of the domain edges.
///
/// `Periodic` grids identify `x_max` with `x_min`; spectral operators are
/// available and sample `i` lives at `x_min + i*dx` with the last point
/// excluded. `AbsorbingPad` grids are plain bounded boxes: derivative
/// stencils fall back to one-sided forms at the edges and the classical
/// stepper damps density in a cosine-tapered pad near the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    AbsorbingPad,
}

/// One grid direction: `n` samples at `x_min + i*dx`, `dx = (max-min)/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl Axis {
    pub fn dx(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    pub fn len(&self) -> f64 {
        self.max - self.min
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.dx()
    }
}

/// Uniform rectangular grid in one or two dimensions.
///
/// Samples are stored flat with axis 0 varying fastest: in 2D the flat
/// index is `ix + nx * iy`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    boundary: Boundary,
}

const MIN_POINTS: usize = 8;

impl Grid {
    pub fn new_1d(n: usize, min: f64, max: f64, boundary: Boundary) -> Result<Self, FieldsError> {
        Self::new(vec![Axis { n, min, max }], boundary)
    }

    pub fn new_2d(
        nx: usize,
        ny: usize,
        bounds_x: (f64, f64),
        bounds_y: (f64, f64),
        boundary: Boundary,
    ) -> Result<Self, FieldsError> {
        Self::new(
            vec![
                Axis { n: nx, min: bounds_x.0, max: bounds_x.1 },
                Axis { n: ny, min: bounds_y.0, max: bounds_y.1 },
            ],
            boundary,
        )
    }

    pub fn new(axes: Vec<Axis>, boundary: Boundary) -> Result<Self, FieldsError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(FieldsError::UnsupportedDimension { dim: axes.len() });
        }
        for ax in &axes {
            if ax.n < MIN_POINTS {
                return Err(FieldsError::TooFewPoints { got: ax.n, min: MIN_POINTS });
            }
            if !(ax.max > ax.min) || !ax.min.is_finite() || !ax.max.is_finite() {
                return Err(FieldsError::BadBounds { min: ax.min, max: ax.max });
            }
        }
        Ok(Grid { axes, boundary })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|ax| ax.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx_min(&self) -> f64 {
        self.axes.iter().map(Axis::dx).fold(f64::INFINITY, f64::min)
    }

    pub fn dx_max(&self) -> f64 {
        self.axes.iter().map(Axis::dx).fold(0.0, f64::max)
    }

    /// Volume of one grid cell (`dx`, or `dx*dy`).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::dx).product()
    }

    /// Stride of axis `a` in the flat layout.
    pub fn stride(&self, a: usize) -> usize {
        self.axes[..a].iter().map(|ax| ax.n).product()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        idx.iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(a, (&i, _))| i * self.stride(a))
            .sum()
    }

    /// Per-axis indices of a flat index.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        let nx = self.axes[0].n;
        match self.dim() {
            1 => [flat, 0],
            _ => [flat % nx, flat / nx],
        }
    }

    /// Coordinates of a flat index. The second entry is 0 in 1D.
    pub fn coords(&self, flat: usize) -> [f64; 2] {
        let idx = self.unflatten(flat);
        let mut out = [0.0; 2];
        for (a, ax) in self.axes.iter().enumerate() {
            out[a] = ax.coord(idx[a]);
        }
        out
    }

    /// True if every axis length is a power of two (required by the
    /// spectral evolvers).
    pub fn power_of_two(&self) -> bool {
        self.axes.iter().all(|ax| ax.n.is_power_of_two())
    }

    /// Checks that `data.len()` matches the grid.
    pub fn check_len<T>(&self, data: &[T]) -> Result<(), FieldsError> {
        if data.len() == self.len() {
            Ok(())
        } else {
            Err(FieldsError::SampleCountMismatch { expected: self.len(), got: data.len() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_and_inverted_axes() {
        assert!(Grid::new_1d(4, 0.0, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new_1d(64, 1.0, -1.0, Boundary::Periodic).is_err());
        assert!(Grid::new_1d(64, 0.0, f64::NAN, Boundary::Periodic).is_err());
    }

    #[test]
    fn flat_layout_is_x_fastest() {
        let g = Grid::new_2d(16, 8, (0.0, 1.6), (0.0, 0.8), Boundary::Periodic).unwrap();
        assert_eq!(g.len(), 128);
        assert_eq!(g.stride(0), 1);
        assert_eq!(g.stride(1), 16);
        assert_eq!(g.flat_index(&[3, 2]), 3 + 2 * 16);
        assert_eq!(g.unflatten(3 + 2 * 16), [3, 2]);
        let c = g.coords(g.flat_index(&[3, 2]));
        assert!((c[0] - 0.3).abs() < 1e-12 && (c[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn spacing_excludes_the_right_endpoint() {
        let g = Grid::new_1d(10, 0.0, 1.0, Boundary::Periodic).unwrap();
        assert!((g.axis(0).dx() - 0.1).abs() < 1e-15);
        assert!((g.coords(9)[0] - 0.9).abs() < 1e-15);
    }
}
