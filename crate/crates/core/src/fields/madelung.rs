//! Conversion between ψ and its polar pair (R, S), the curvature potential
//! built from R, and phase circulation around grid loops.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use super::{
    FieldsError, Grid, MadelungFields, PhysicalConstants, ScalarField, WaveFunction,
};
use crate::numerics::{spectral::SpectralOps, stencil};

/// Wraps an angle difference into (−π, π].
fn wrap_angle(d: f64) -> f64 {
    let mut w = d.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Splits ψ into amplitude R = |ψ| and action S = ħ·arg ψ, with S unwrapped
/// axis by axis starting from the sample of largest |ψ|.
///
/// Samples with |ψ| < `node_eps`·max|ψ| are flagged as nodes; their S value
/// is carried over from the nearest previously visited neighbor instead of
/// being read off the (meaningless) phase there.
pub fn decompose(
    psi: &WaveFunction,
    c: &PhysicalConstants,
    node_eps: f64,
) -> Result<MadelungFields, FieldsError> {
    let grid = psi.grid();
    let peak = psi.max_abs();
    if peak == 0.0 {
        return Err(FieldsError::AllZeroField);
    }
    let threshold = node_eps * peak;
    let n_total = grid.len();
    let mut r = Vec::with_capacity(n_total);
    let mut phase = Vec::with_capacity(n_total);
    let mut nodes = Vec::with_capacity(n_total);
    let mut seed = 0usize;
    let mut best = -1.0;
    for (i, z) in psi.data().iter().enumerate() {
        let a = z.norm();
        r.push(a);
        phase.push(z.arg());
        nodes.push(a < threshold);
        if a > best {
            best = a;
            seed = i;
        }
    }

    let mut s = vec![0.0; n_total];
    match grid.dim() {
        1 => unwrap_line(&phase, &nodes, &mut s, 0, 1, grid.axis(0).n, seed, false),
        _ => {
            let nx = grid.axis(0).n;
            let ny = grid.axis(1).n;
            let [sx, sy] = grid.unflatten(seed);
            // seed row along x, then every column along y anchored on that row
            unwrap_line(&phase, &nodes, &mut s, sy * nx, 1, nx, sy * nx + sx, false);
            for ix in 0..nx {
                unwrap_line(&phase, &nodes, &mut s, ix, nx, ny, ix + sy * nx, true);
            }
        }
    }
    for v in &mut s {
        *v *= c.hbar;
    }
    Ok(MadelungFields::with_nodes(grid.clone(), r, s, nodes))
}

/// Unwraps one grid line in place. `base`/`stride`/`n` address the line
/// inside the flat array; `anchor` is the flat index (on this line) to
/// start from. With `seeded` the anchor's value in `out` was assigned by a
/// previous sweep and is kept; otherwise the raw phase there is used (the
/// caller passes the peak sample, which is never a node).
#[allow(clippy::too_many_arguments)]
fn unwrap_line(
    phase: &[f64],
    nodes: &[bool],
    out: &mut [f64],
    base: usize,
    stride: usize,
    n: usize,
    anchor: usize,
    seeded: bool,
) {
    debug_assert_eq!((anchor - base) % stride, 0);
    let a = (anchor - base) / stride;
    if !seeded {
        out[anchor] = phase[anchor];
    }
    let mut prev = out[anchor];
    for j in a + 1..n {
        let i = base + j * stride;
        if nodes[i] {
            out[i] = prev;
        } else {
            out[i] = prev + wrap_angle(phase[i] - prev);
            prev = out[i];
        }
    }
    prev = out[anchor];
    for j in (0..a).rev() {
        let i = base + j * stride;
        if nodes[i] {
            out[i] = prev;
        } else {
            out[i] = prev + wrap_angle(phase[i] - prev);
            prev = out[i];
        }
    }
}

/// ψ = R·exp(iS/ħ).
pub fn recompose(fields: &MadelungFields, c: &PhysicalConstants) -> WaveFunction {
    let data: Vec<Complex64> = fields
        .r()
        .iter()
        .zip(fields.s())
        .map(|(&r, &s)| Complex64::from_polar(r, s / c.hbar))
        .collect();
    WaveFunction::new(fields.grid().clone(), data).expect("same grid, same length")
}

/// The curvature term −(ħ²/2m)·∇²R/R that separates the linear equation
/// from its classical limit.
///
/// Uses the spectral Laplacian on periodic grids and the 3-point stencil
/// otherwise. Where R < `reg_eps`·max R the quotient is not trustworthy;
/// those samples are set to zero and reported in the returned mask.
pub fn quantum_potential(
    r: &ScalarField,
    c: &PhysicalConstants,
    reg_eps: f64,
) -> Result<(ScalarField, Vec<bool>), FieldsError> {
    let grid = r.grid();
    let peak = r.max_abs();
    if peak == 0.0 {
        return Err(FieldsError::AllZeroField);
    }
    let lap = if grid.is_periodic() {
        SpectralOps::new(grid).laplacian(r.data())
    } else {
        stencil::laplacian(grid, r.data())
    };
    let threshold = reg_eps * peak;
    let coeff = -c.hbar * c.hbar / (2.0 * c.mass);
    let mut flagged = vec![false; grid.len()];
    let mut q = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let ri = r.data()[i];
        if ri.abs() < threshold {
            flagged[i] = true;
        } else {
            q[i] = coeff * lap[i] / ri;
        }
    }
    Ok((ScalarField::new(grid.clone(), q)?, flagged))
}

/// Winding result: integer n, the raw circulation ∮dS, and the distance of
/// circulation/(2πħ) from n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Winding {
    pub n: i64,
    pub circulation: f64,
    pub residual: f64,
}

/// Sums branch-adjusted S differences around a closed loop of samples and
/// reports the winding number ∮dS/(2πħ).
///
/// `loop_indices` is an ordered cycle of flat sample indices; the segment
/// from the last entry back to the first is included. Consecutive samples
/// must be close enough that the true phase change per segment stays below
/// π, which is what makes the branch adjustment uniquely defined.
pub fn winding_circulation(
    fields: &MadelungFields,
    c: &PhysicalConstants,
    loop_indices: &[usize],
) -> Result<Winding, FieldsError> {
    if loop_indices.len() < 3 {
        return Err(FieldsError::DegenerateLoop { got: loop_indices.len() });
    }
    let n_total = fields.grid().len();
    for &i in loop_indices {
        if i >= n_total {
            return Err(FieldsError::IndexOutOfRange { index: i, len: n_total });
        }
        if fields.nodes()[i] {
            return Err(FieldsError::LoopThroughNode { index: i });
        }
    }
    let hbar = c.hbar;
    let s = fields.s();
    let mut circulation = 0.0;
    for (a, b) in loop_indices
        .iter()
        .zip(loop_indices.iter().cycle().skip(1))
        .take(loop_indices.len())
    {
        circulation += wrap_angle((s[*b] - s[*a]) / hbar) * hbar;
    }
    let turns = circulation / (TAU * hbar);
    let n = turns.round();
    Ok(Winding { n: n as i64, circulation, residual: (turns - n).abs() })
}

/// Flat indices tracing a circle of radius `radius` about `center`,
/// suitable as a `winding_circulation` loop. Consecutive duplicates from
/// the rasterization are removed.
pub fn circle_loop(
    grid: &Grid,
    center: [f64; 2],
    radius: f64,
    samples: usize,
) -> Result<Vec<usize>, FieldsError> {
    if grid.dim() != 2 {
        return Err(FieldsError::DimensionMismatch { expected: 2, got: grid.dim() });
    }
    let mut out: Vec<usize> = Vec::with_capacity(samples);
    for j in 0..samples {
        let th = TAU * j as f64 / samples as f64;
        let x = center[0] + radius * th.cos();
        let y = center[1] + radius * th.sin();
        let ax = grid.axis(0);
        let ay = grid.axis(1);
        let ix = ((x - ax.min) / ax.dx()).round();
        let iy = ((y - ay.min) / ay.dx()).round();
        if ix < 0.0 || iy < 0.0 || ix >= ax.n as f64 || iy >= ay.n as f64 {
            return Err(FieldsError::LoopOutsideGrid { x, y });
        }
        let flat = ix as usize + ax.n * iy as usize;
        if out.last() != Some(&flat) && out.first() != Some(&flat) {
            out.push(flat);
        }
    }
    if out.len() < 3 {
        return Err(FieldsError::DegenerateLoop { got: out.len() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gaussian_packet, Boundary};
    use approx::assert_abs_diff_eq;

    fn units() -> PhysicalConstants {
        PhysicalConstants::natural()
    }

    #[test]
    fn roundtrip_on_a_smooth_packet() {
        let g = Grid::new_1d(256, -10.0, 10.0, Boundary::Periodic).unwrap();
        let psi = gaussian_packet(&g, &units(), &[1.0], 1.2, &[0.7], 0.0).unwrap();
        let m = decompose(&psi, &units(), super::super::NODE_EPS).unwrap();
        let back = recompose(&m, &units());
        for (a, b) in back.data().iter().zip(psi.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_action_is_linear_in_x() {
        // e^{ipx/ħ} with p chosen so the wave is single-valued on the ring
        let g = Grid::new_1d(128, 0.0, TAU, Boundary::Periodic).unwrap();
        let p = 3.0; // 3 full turns over the domain, ħ = 1
        let psi = WaveFunction::from_fn(g, |x| Complex64::from_polar(1.0, p * x[0]));
        let m = decompose(&psi, &units(), 1e-10).unwrap();
        let s = m.s();
        let x0 = m.grid().coords(0)[0];
        for i in 0..m.grid().len() {
            let expect = p * (m.grid().coords(i)[0] - x0) + s[0];
            assert_abs_diff_eq!(s[i], expect, epsilon = 1e-9);
        }
        assert_eq!(m.node_count(), 0);
    }

    #[test]
    fn global_phase_shifts_s_by_a_constant() {
        let g = Grid::new_1d(128, -8.0, 8.0, Boundary::Periodic).unwrap();
        let c = units();
        let psi = gaussian_packet(&g, &c, &[0.0], 1.0, &[0.4], 0.0).unwrap();
        let theta = 0.9;
        let rotated = WaveFunction::new(
            g,
            psi.data().iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect(),
        )
        .unwrap();
        let m0 = decompose(&psi, &c, 1e-10).unwrap();
        let m1 = decompose(&rotated, &c, 1e-10).unwrap();
        for i in 0..m0.grid().len() {
            assert_abs_diff_eq!(m1.s()[i] - m0.s()[i], theta * c.hbar, epsilon = 1e-10);
            assert_abs_diff_eq!(m1.r()[i], m0.r()[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn node_samples_are_flagged_and_phase_is_continued() {
        // first excited oscillator state: odd, real, single zero at x = 0
        let g = Grid::new_1d(129, -8.0, 8.0, Boundary::AbsorbingPad).unwrap();
        let psi = WaveFunction::from_fn(g, |x| {
            Complex64::new(x[0] * (-x[0] * x[0] / 2.0).exp(), 0.0)
        });
        let m = decompose(&psi, &units(), 1e-10).unwrap();
        assert!(m.node_count() >= 1, "the zero at x=0 must be flagged");
        // S jumps by πħ across the sign change and is constant elsewhere
        let s = m.s();
        let jump = (s[s.len() - 1] - s[0]).abs();
        assert_abs_diff_eq!(jump, PI, epsilon = 1e-9);
        for w in s.windows(2) {
            let d = (w[1] - w[0]).abs();
            assert!(d < 1e-9 || (d - PI).abs() < 1e-9);
        }
    }

    #[test]
    fn all_zero_field_is_rejected() {
        let g = Grid::new_1d(64, 0.0, 1.0, Boundary::Periodic).unwrap();
        let psi = WaveFunction::new(g, vec![Complex64::default(); 64]).unwrap();
        assert!(matches!(
            decompose(&psi, &units(), 1e-10),
            Err(FieldsError::AllZeroField)
        ));
    }

    #[test]
    fn gaussian_curvature_potential_matches_closed_form() {
        // R = exp(−x²/4σ²) gives Q = (ħ²/2m)(1/2σ² − x²/4σ⁴); at the
        // center that is ħ²/4mσ².
        let sigma: f64 = 1.3;
        let g = Grid::new_1d(512, -16.0, 16.0, Boundary::Periodic).unwrap();
        let r = ScalarField::from_fn(g, |x| (-x[0] * x[0] / (4.0 * sigma * sigma)).exp());
        let c = units();
        let (q, flagged) = quantum_potential(&r, &c, 1e-12).unwrap();
        let s2 = sigma * sigma;
        for i in 0..q.grid().len() {
            // the quotient amplifies spectral round-off by 1/R, so compare
            // only where R is well above the regularization floor
            if flagged[i] || r.data()[i] < 1e-7 {
                continue;
            }
            let x = q.grid().coords(i)[0];
            let expect = -(c.hbar * c.hbar / (2.0 * c.mass))
                * (x * x / (4.0 * s2 * s2) - 1.0 / (2.0 * s2));
            assert_abs_diff_eq!(q.data()[i], expect, epsilon = 1e-6);
        }
        let mid = q.grid().len() / 2;
        assert_abs_diff_eq!(
            q.data()[mid],
            c.hbar * c.hbar / (4.0 * c.mass * s2),
            epsilon = 1e-8
        );
    }

    #[test]
    fn shifted_cosine_curvature_potential() {
        // R = cos(kx) + 2 > 0 gives Q = (ħ²k²/2m)·cos(kx)/(cos(kx)+2)
        let g = Grid::new_1d(256, 0.0, 10.0, Boundary::Periodic).unwrap();
        let k = TAU * 4.0 / 10.0;
        let r = ScalarField::from_fn(g, |x| (k * x[0]).cos() + 2.0);
        let c = units();
        let (q, _) = quantum_potential(&r, &c, 1e-12).unwrap();
        for i in 0..q.grid().len() {
            let x = q.grid().coords(i)[0];
            let expect = (c.hbar * c.hbar * k * k / (2.0 * c.mass)) * (k * x).cos()
                / ((k * x).cos() + 2.0);
            assert_abs_diff_eq!(q.data()[i], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn fd_curvature_potential_converges_at_second_order() {
        let sigma: f64 = 1.0;
        let c = units();
        let err = |n: usize| -> f64 {
            let g = Grid::new_1d(n, -8.0, 8.0, Boundary::AbsorbingPad).unwrap();
            let r =
                ScalarField::from_fn(g, |x| (-x[0] * x[0] / (4.0 * sigma * sigma)).exp());
            let (q, flagged) = quantum_potential(&r, &c, 1e-12).unwrap();
            let mut m = 0.0f64;
            for i in 0..q.grid().len() {
                if flagged[i] {
                    continue;
                }
                let x = q.grid().coords(i)[0];
                // compare only where R is appreciable; the quotient amplifies
                // rounding in the far tail
                if x.abs() > 4.0 {
                    continue;
                }
                let expect = -(0.5) * (x * x / 4.0 - 0.5);
                m = m.max((q.data()[i] - expect).abs());
            }
            m
        };
        let (e1, e2) = (err(128), err(256));
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.2, "observed order {order}, e1={e1}, e2={e2}");
    }

    #[test]
    fn winding_of_single_valued_loop_is_zero() {
        let g = Grid::new_2d(64, 64, (-4.0, 4.0), (-4.0, 4.0), Boundary::Periodic).unwrap();
        let c = units();
        let psi = WaveFunction::from_fn(g.clone(), |p| {
            Complex64::new((-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp(), 0.0)
        });
        let m = decompose(&psi, &c, 1e-10).unwrap();
        let lp = circle_loop(&g, [0.0, 0.0], 1.5, 256).unwrap();
        let w = winding_circulation(&m, &c, &lp).unwrap();
        assert_eq!(w.n, 0);
        assert!(w.residual < 1e-12);
    }

    #[test]
    fn loop_through_node_is_rejected() {
        let g = Grid::new_2d(64, 64, (-4.0, 4.0), (-4.0, 4.0), Boundary::Periodic).unwrap();
        let c = units();
        let psi = crate::fields::vortex_state(&g, &c, 1, 1.0).unwrap();
        let m = decompose(&psi, &c, 1e-10).unwrap();
        // a loop through the vortex core hits node samples
        let core = g.flat_index(&[32, 32]);
        let lp = vec![core, core + 1, core + 1 + 64, core + 64];
        assert!(matches!(
            winding_circulation(&m, &c, &lp),
            Err(FieldsError::LoopThroughNode { .. })
        ));
    }
}
