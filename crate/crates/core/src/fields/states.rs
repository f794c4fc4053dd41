//! Ready-made initial states. All constructors normalize to unit L² norm.
//!
//! Gaussian widths follow the position-spread convention: `sigma` is the
//! standard deviation of ρ = |ψ|², so the amplitude itself goes like
//! exp(−(x−x0)²/4σ²) and a zero-momentum packet has Δx = σ exactly.

use num_complex::Complex64;

use super::{FieldsError, Grid, MadelungFields, PhysicalConstants, ScalarField, WaveFunction};

fn check_dim(grid: &Grid, v: &[f64]) -> Result<(), FieldsError> {
    if v.len() != grid.dim() {
        return Err(FieldsError::DimensionMismatch { expected: grid.dim(), got: v.len() });
    }
    Ok(())
}

/// Gaussian packet exp(−|x−x0|²/4σ² + i·S(x)/ħ) with
/// S(x) = p0·(x−x0) + chirp·|x−x0|²/2.
///
/// A nonzero `chirp` imprints the linear velocity field v = chirp·(x−x0)/m:
/// negative values launch a focusing flow.
pub fn gaussian_packet(
    grid: &Grid,
    c: &PhysicalConstants,
    x0: &[f64],
    sigma: f64,
    p0: &[f64],
    chirp: f64,
) -> Result<WaveFunction, FieldsError> {
    check_dim(grid, x0)?;
    check_dim(grid, p0)?;
    if !(sigma > 0.0) {
        return Err(FieldsError::BadBounds { min: 0.0, max: sigma });
    }
    let four_s2 = 4.0 * sigma * sigma;
    let mut psi = WaveFunction::from_fn(grid.clone(), |pos| {
        let mut d2 = 0.0;
        let mut s = 0.0;
        for a in 0..grid.dim() {
            let d = pos[a] - x0[a];
            d2 += d * d;
            s += p0[a] * d;
        }
        s += 0.5 * chirp * d2;
        Complex64::from_polar((-d2 / four_s2).exp(), s / c.hbar)
    });
    psi.normalize()?;
    Ok(psi)
}

/// The same packet in polar form, with R and S written down directly
/// instead of read back off the complex samples.
pub fn gaussian_polar(
    grid: &Grid,
    x0: &[f64],
    sigma: f64,
    p0: &[f64],
    chirp: f64,
) -> Result<MadelungFields, FieldsError> {
    check_dim(grid, x0)?;
    check_dim(grid, p0)?;
    if !(sigma > 0.0) {
        return Err(FieldsError::BadBounds { min: 0.0, max: sigma });
    }
    let four_s2 = 4.0 * sigma * sigma;
    let mut r = ScalarField::from_fn(grid.clone(), |pos| {
        let mut d2 = 0.0;
        for a in 0..grid.dim() {
            let d = pos[a] - x0[a];
            d2 += d * d;
        }
        (-d2 / four_s2).exp()
    });
    r.normalize_l2()?;
    let s = ScalarField::from_fn(grid.clone(), |pos| {
        let mut d2 = 0.0;
        let mut s = 0.0;
        for a in 0..grid.dim() {
            let d = pos[a] - x0[a];
            d2 += d * d;
            s += p0[a] * d;
        }
        s + 0.5 * chirp * d2
    });
    MadelungFields::new(grid.clone(), r.into_data(), s.into_data())
}

/// 2D state with phase winding `n` around the origin of the pattern:
/// ψ ∝ r^|n| exp(−|n|r²/2r0²) e^{inφ}, peaking on the circle r = r0.
/// For n = 0 this degenerates to a plain Gaussian of width r0.
pub fn vortex_state(
    grid: &Grid,
    c: &PhysicalConstants,
    n: i32,
    r0: f64,
) -> Result<WaveFunction, FieldsError> {
    if grid.dim() != 2 {
        return Err(FieldsError::DimensionMismatch { expected: 2, got: grid.dim() });
    }
    if !(r0 > 0.0) {
        return Err(FieldsError::BadBounds { min: 0.0, max: r0 });
    }
    let _ = c;
    let m = n.unsigned_abs() as f64;
    let shape = m.max(1.0);
    let mut psi = WaveFunction::from_fn(grid.clone(), |pos| {
        let r = (pos[0] * pos[0] + pos[1] * pos[1]).sqrt();
        let phi = pos[1].atan2(pos[0]);
        let amp = (r / r0).powf(m) * (-shape * r * r / (2.0 * r0 * r0)).exp();
        Complex64::from_polar(amp, n as f64 * phi)
    });
    psi.normalize()?;
    Ok(psi)
}

/// Compactly supported bump cos²(π·d/2w) inside radius `w` of `x0`, exactly
/// zero outside, normalized to unit L² norm. Useful when two amplitudes
/// must have samplewise-disjoint supports.
pub fn cosine_bump(grid: &Grid, x0: &[f64], w: f64) -> Result<ScalarField, FieldsError> {
    check_dim(grid, x0)?;
    if !(w > 0.0) {
        return Err(FieldsError::BadBounds { min: 0.0, max: w });
    }
    let mut f = ScalarField::from_fn(grid.clone(), |pos| {
        let mut d2 = 0.0;
        for a in 0..grid.dim() {
            let d = pos[a] - x0[a];
            d2 += d * d;
        }
        let d = d2.sqrt();
        if d < w {
            let c = (std::f64::consts::FRAC_PI_2 * d / w).cos();
            c * c
        } else {
            0.0
        }
    });
    f.normalize_l2()?;
    Ok(f)
}

/// Gaussian amplitude hard-truncated to zero outside `support` of its
/// center, then renormalized. The clipped tail mass is e^(−support²/4σ²)
/// small, but the zero outside is exact.
pub fn truncated_gaussian(
    grid: &Grid,
    x0: &[f64],
    sigma: f64,
    support: f64,
) -> Result<ScalarField, FieldsError> {
    check_dim(grid, x0)?;
    if !(sigma > 0.0 && support > 0.0) {
        return Err(FieldsError::BadBounds { min: sigma, max: support });
    }
    let four_s2 = 4.0 * sigma * sigma;
    let mut f = ScalarField::from_fn(grid.clone(), |pos| {
        let mut d2 = 0.0;
        for a in 0..grid.dim() {
            let d = pos[a] - x0[a];
            d2 += d * d;
        }
        if d2 < support * support {
            (-d2 / four_s2).exp()
        } else {
            0.0
        }
    });
    f.normalize_l2()?;
    Ok(f)
}

/// Flat amplitude over the whole grid, unit L² norm.
pub fn uniform_amplitude(grid: &Grid) -> ScalarField {
    let v = 1.0 / (grid.len() as f64 * grid.cell_volume()).sqrt();
    ScalarField::from_fn(grid.clone(), |_| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;

    #[test]
    fn gaussian_packet_is_normalized_with_unit_spread() {
        let g = Grid::new_1d(1024, -20.0, 20.0, Boundary::Periodic).unwrap();
        let c = PhysicalConstants::natural();
        let psi = gaussian_packet(&g, &c, &[0.0], 1.0, &[0.0], 0.0).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-13);
        let rho = psi.density();
        let mean: f64 = (0..g.len())
            .map(|i| rho.data()[i] * g.coords(i)[0])
            .sum::<f64>()
            * g.cell_volume();
        let var: f64 = (0..g.len())
            .map(|i| rho.data()[i] * (g.coords(i)[0] - mean).powi(2))
            .sum::<f64>()
            * g.cell_volume();
        assert!((var.sqrt() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bumps_at_distance_have_disjoint_support() {
        let g = Grid::new_1d(512, -16.0, 16.0, Boundary::Periodic).unwrap();
        let b1 = cosine_bump(&g, &[-5.0], 3.0).unwrap();
        let b2 = cosine_bump(&g, &[5.0], 3.0).unwrap();
        for i in 0..g.len() {
            assert!(b1.data()[i] * b2.data()[i] == 0.0);
        }
        assert!((b1.norm_l2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_gaussian_is_exactly_zero_outside_support() {
        let g = Grid::new_1d(512, -16.0, 16.0, Boundary::Periodic).unwrap();
        let t = truncated_gaussian(&g, &[2.0], 0.5, 3.0).unwrap();
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            if (x - 2.0).abs() >= 3.0 {
                assert_eq!(t.data()[i], 0.0);
            }
        }
    }

    #[test]
    fn vortex_amplitude_vanishes_at_core_and_peaks_on_ring() {
        let g = Grid::new_2d(128, 128, (-4.0, 4.0), (-4.0, 4.0), Boundary::Periodic).unwrap();
        let c = PhysicalConstants::natural();
        let psi = vortex_state(&g, &c, 2, 1.0).unwrap();
        let at = |x: f64, y: f64| -> f64 {
            let ix = ((x + 4.0) / g.axis(0).dx()).round() as usize;
            let iy = ((y + 4.0) / g.axis(1).dx()).round() as usize;
            psi.data()[ix + 128 * iy].norm()
        };
        assert!(at(0.0, 0.0) < 1e-12);
        assert!(at(1.0, 0.0) > at(2.5, 0.0));
        assert!(at(1.0, 0.0) > at(0.2, 0.0));
    }
}
