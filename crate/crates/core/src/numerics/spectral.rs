//! FFT-backed derivatives on periodic grids, built on rustfft. Plans and
//! scratch buffers are cached per grid, so repeated calls inside a stepper
//! do not re-plan.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::TAU;
use std::sync::Arc;

use crate::fields::Grid;

struct AxisPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
    n: usize,
    stride: usize,
}

pub struct SpectralOps {
    axes: Vec<AxisPlan>,
    total: usize,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
    buf: Vec<Complex64>,
}

/// Wavenumbers in FFT output order: k_j = 2π·m/L with m = j for j < n/2
/// and m = j − n above.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            TAU * m as f64 / length
        })
        .collect()
}

impl SpectralOps {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let mut axes = Vec::new();
        let mut max_scratch = 0;
        let mut max_n = 0;
        for a in 0..grid.dim() {
            let ax = grid.axis(a);
            let fwd = planner.plan_fft_forward(ax.n);
            let inv = planner.plan_fft_inverse(ax.n);
            max_scratch = max_scratch
                .max(fwd.get_inplace_scratch_len())
                .max(inv.get_inplace_scratch_len());
            max_n = max_n.max(ax.n);
            axes.push(AxisPlan {
                fwd,
                inv,
                k: wavenumbers(ax.n, ax.len()),
                n: ax.n,
                stride: grid.stride(a),
            });
        }
        SpectralOps {
            axes,
            total: grid.len(),
            scratch: vec![Complex64::default(); max_scratch],
            line: vec![Complex64::default(); max_n],
            buf: vec![Complex64::default(); grid.len()],
        }
    }

    fn transform_axis(&mut self, data: &mut [Complex64], axis: usize, forward: bool) {
        let plan = &self.axes[axis];
        let n = plan.n;
        let stride = plan.stride;
        let n_lines = self.total / n;
        let fft = if forward { plan.fwd.clone() } else { plan.inv.clone() };
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut self.scratch);
            }
        } else {
            for l in 0..n_lines {
                for j in 0..n {
                    self.line[j] = data[l + j * stride];
                }
                fft.process_with_scratch(&mut self.line[..n], &mut self.scratch);
                for j in 0..n {
                    data[l + j * stride] = self.line[j];
                }
            }
        }
        if !forward {
            let scale = 1.0 / n as f64;
            for z in data.iter_mut() {
                *z *= scale;
            }
        }
    }

    /// In-place forward transform along every axis.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        for a in 0..self.axes.len() {
            self.transform_axis(data, a, true);
        }
    }

    /// In-place normalized inverse transform along every axis.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        for a in 0..self.axes.len() {
            self.transform_axis(data, a, false);
        }
    }

    pub fn k_along(&self, axis: usize) -> &[f64] {
        &self.axes[axis].k
    }

    /// |k|² for every flat spectral index, matching the spatial layout.
    pub fn k_squared(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.total];
        for (i, v) in out.iter_mut().enumerate() {
            let mut k2 = 0.0;
            for plan in &self.axes {
                let idx = (i / plan.stride) % plan.n;
                k2 += plan.k[idx] * plan.k[idx];
            }
            *v = k2;
        }
        out
    }

    /// Spectral k-component along `axis` for every flat spectral index.
    fn k_flat(&self, axis: usize) -> Vec<f64> {
        let plan = &self.axes[axis];
        (0..self.total)
            .map(|i| plan.k[(i / plan.stride) % plan.n])
            .collect()
    }

    /// ∂f/∂x_axis of a real periodic field, via ik multiplication.
    pub fn derivative(&mut self, data: &[f64], axis: usize) -> Vec<f64> {
        for (b, &v) in self.buf.iter_mut().zip(data) {
            *b = Complex64::new(v, 0.0);
        }
        let mut buf = std::mem::take(&mut self.buf);
        self.forward(&mut buf);
        let kf = self.k_flat(axis);
        for (z, k) in buf.iter_mut().zip(kf) {
            *z *= Complex64::new(0.0, k);
        }
        self.inverse(&mut buf);
        let out = buf.iter().map(|z| z.re).collect();
        self.buf = buf;
        out
    }

    /// ∇²f of a real periodic field, via -|k|² multiplication.
    pub fn laplacian(&mut self, data: &[f64]) -> Vec<f64> {
        for (b, &v) in self.buf.iter_mut().zip(data) {
            *b = Complex64::new(v, 0.0);
        }
        let mut buf = std::mem::take(&mut self.buf);
        self.forward(&mut buf);
        let k2 = self.k_squared();
        for (z, k2) in buf.iter_mut().zip(k2) {
            *z *= -k2;
        }
        self.inverse(&mut buf);
        let out = buf.iter().map(|z| z.re).collect();
        self.buf = buf;
        out
    }

    /// Σ_axis ∂(flux_axis)/∂x_axis. The k = 0 mode of every term is zero,
    /// so the discrete integral of the result vanishes identically and the
    /// continuity update conserves mass to round-off.
    pub fn divergence(&mut self, flux: &[Vec<f64>]) -> Vec<f64> {
        let mut total = vec![0.0; self.total];
        for (a, fa) in flux.iter().enumerate() {
            let d = self.derivative(fa, a);
            for (t, v) in total.iter_mut().zip(d) {
                *t += v;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;

    #[test]
    fn roundtrip_forward_inverse() {
        let g = Grid::new_1d(64, 0.0, 1.0, Boundary::Periodic).unwrap();
        let mut ops = SpectralOps::new(&g);
        let orig: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut data = orig.clone();
        ops.forward(&mut data);
        ops.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_a_single_mode_is_machine_precise() {
        let g = Grid::new_1d(128, 0.0, 10.0, Boundary::Periodic).unwrap();
        let k = TAU * 3.0 / 10.0;
        let f: Vec<f64> = (0..g.len()).map(|i| (k * g.coords(i)[0]).sin()).collect();
        let mut ops = SpectralOps::new(&g);
        let d = ops.derivative(&f, 0);
        for i in 0..g.len() {
            assert!((d[i] - k * (k * g.coords(i)[0]).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_2d_single_mode() {
        let g = Grid::new_2d(32, 16, (0.0, 4.0), (0.0, 2.0), Boundary::Periodic).unwrap();
        let (kx, ky) = (TAU * 2.0 / 4.0, TAU * 1.0 / 2.0);
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let c = g.coords(i);
                (kx * c[0]).cos() * (ky * c[1]).sin()
            })
            .collect();
        let mut ops = SpectralOps::new(&g);
        let l = ops.laplacian(&f);
        for i in 0..g.len() {
            assert!((l[i] + (kx * kx + ky * ky) * f[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn divergence_integral_vanishes() {
        let g = Grid::new_1d(64, -3.0, 3.0, Boundary::Periodic).unwrap();
        let flux: Vec<f64> = (0..g.len())
            .map(|i| (-g.coords(i)[0].powi(2)).exp() * 1.7 + 0.4)
            .collect();
        let mut ops = SpectralOps::new(&g);
        let div = ops.divergence(&[flux]);
        let sum: f64 = div.iter().sum();
        assert!(sum.abs() < 1e-12, "sum = {sum}");
    }
}
