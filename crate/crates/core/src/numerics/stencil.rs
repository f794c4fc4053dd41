//! Non-wrapping finite differences: central in the interior, one-sided at
//! the edges. Exact on quadratics everywhere, so smooth linear or parabolic
//! profiles (uniform drift, focusing flows) are differentiated without
//! boundary artifacts.

use crate::fields::Grid;

/// Applies `f(line, h, out_line)` to every grid line along `axis`.
/// Lines are gathered into contiguous scratch for strided axes.
fn for_each_line(
    grid: &Grid,
    axis: usize,
    data: &[f64],
    out: &mut [f64],
    f: impl Fn(&[f64], f64, &mut [f64]),
) {
    let n = grid.axis(axis).n;
    let h = grid.axis(axis).dx();
    let stride = grid.stride(axis);
    let total = grid.len();
    let n_lines = total / n;
    let mut line = vec![0.0; n];
    let mut dline = vec![0.0; n];
    for l in 0..n_lines {
        // base index of line l: enumerate all indices with axis-coordinate 0
        let base = if stride == 1 {
            l * n
        } else {
            // axis 1 of a 2D grid: lines start at 0..stride
            l
        };
        for j in 0..n {
            line[j] = data[base + j * stride];
        }
        f(&line, h, &mut dline);
        for j in 0..n {
            out[base + j * stride] = dline[j];
        }
    }
}

fn d1_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
}

fn d2_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let h2 = h * h;
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
}

fn d2_line_wrapped(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let h2 = h * h;
    for i in 0..n {
        let prev = f[(i + n - 1) % n];
        let next = f[(i + 1) % n];
        out[i] = (next - 2.0 * f[i] + prev) / h2;
    }
}

/// ∂f/∂x_axis, never wrapping across the seam.
pub fn gradient_axis(grid: &Grid, data: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for_each_line(grid, axis, data, &mut out, d1_line);
    out
}

/// All first derivatives, one entry per axis.
pub fn gradient(grid: &Grid, data: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dim()).map(|a| gradient_axis(grid, data, a)).collect()
}

/// Σ_axis ∂²f/∂x_axis², never wrapping.
pub fn laplacian(grid: &Grid, data: &[f64]) -> Vec<f64> {
    let mut total = vec![0.0; data.len()];
    let mut tmp = vec![0.0; data.len()];
    for a in 0..grid.dim() {
        for_each_line(grid, a, data, &mut tmp, d2_line);
        for (t, v) in total.iter_mut().zip(&tmp) {
            *t += v;
        }
    }
    total
}

/// Laplacian with periodic wrap, for fields that really are periodic.
pub fn laplacian_wrapped(grid: &Grid, data: &[f64]) -> Vec<f64> {
    let mut total = vec![0.0; data.len()];
    let mut tmp = vec![0.0; data.len()];
    for a in 0..grid.dim() {
        for_each_line(grid, a, data, &mut tmp, d2_line_wrapped);
        for (t, v) in total.iter_mut().zip(&tmp) {
            *t += v;
        }
    }
    total
}

/// Σ_axis ∂(flux_axis)/∂x_axis in non-wrapping central form.
pub fn divergence(grid: &Grid, flux: &[Vec<f64>]) -> Vec<f64> {
    let mut total = vec![0.0; grid.len()];
    let mut tmp = vec![0.0; grid.len()];
    for (a, fa) in flux.iter().enumerate() {
        for_each_line(grid, a, fa, &mut tmp, d1_line);
        for (t, v) in total.iter_mut().zip(&tmp) {
            *t += v;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;

    fn grid1d(n: usize) -> Grid {
        Grid::new_1d(n, -2.0, 2.0, Boundary::AbsorbingPad).unwrap()
    }

    #[test]
    fn first_and_second_derivatives_are_exact_on_quadratics() {
        let g = grid1d(32);
        let f: Vec<f64> = (0..g.len()).map(|i| {
            let x = g.coords(i)[0];
            1.5 * x * x - 0.3 * x + 2.0
        }).collect();
        let d = gradient_axis(&g, &f, 0);
        let l = laplacian(&g, &f);
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            assert!((d[i] - (3.0 * x - 0.3)).abs() < 1e-10, "i={i}");
            assert!((l[i] - 3.0).abs() < 1e-9, "i={i}");
        }
    }

    #[test]
    fn gradient_converges_at_second_order() {
        let err = |n: usize| -> f64 {
            let g = grid1d(n);
            let f: Vec<f64> = (0..g.len()).map(|i| g.coords(i)[0].sin()).collect();
            let d = gradient_axis(&g, &f, 0);
            (0..g.len())
                .map(|i| (d[i] - g.coords(i)[0].cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.4, "observed order {order}");
    }

    #[test]
    fn divergence_2d_matches_analytic_field() {
        let g = Grid::new_2d(48, 48, (-1.0, 1.0), (-1.0, 1.0), Boundary::AbsorbingPad).unwrap();
        // F = (x², x·y) has ∇·F = 2x + x = 3x
        let fx: Vec<f64> = (0..g.len()).map(|i| g.coords(i)[0].powi(2)).collect();
        let fy: Vec<f64> = (0..g.len()).map(|i| {
            let c = g.coords(i);
            c[0] * c[1]
        }).collect();
        let div = divergence(&g, &[fx, fy]);
        for i in 0..g.len() {
            assert!((div[i] - 3.0 * g.coords(i)[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn wrapped_laplacian_handles_periodic_data() {
        let g = Grid::new_1d(128, 0.0, std::f64::consts::TAU, Boundary::Periodic).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| g.coords(i)[0].cos()).collect();
        let l = laplacian_wrapped(&g, &f);
        for i in 0..g.len() {
            assert!((l[i] + g.coords(i)[0].cos()).abs() < 3e-3);
        }
    }
}
