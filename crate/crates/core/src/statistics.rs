//! Measurement statistics for real, non-negative amplitudes: mixtures over
//! a positive basis, diagonal observables, effective collapse, position
//! sampling, and the two-time momentum estimate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fields::{FieldsError, Grid, MadelungFields, PhysicalConstants, ScalarField};

#[derive(Debug, Error)]
pub enum StatisticsError {
    #[error("invalid positive basis: {0}")]
    BasisViolation(BasisViolation),
    #[error("density integrates to zero, nothing to sample")]
    ZeroDensity,
    #[error("collapse window does not overlap the state")]
    ZeroOverlap,
    #[error("measurement width {got} is below the grid floor {min}")]
    WidthBelowGrid { got: f64, min: f64 },
    #[error("time interval [{t1}, {t2}] is degenerate")]
    DegenerateInterval { t1: f64, t2: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("rejection sampling stalled; density may be too spiky for its grid")]
    SamplingStalled,
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

/// Ways a candidate basis or weight vector can fail validation.
#[derive(Debug, Error)]
pub enum BasisViolation {
    #[error("basis is empty")]
    Empty,
    #[error("field {index} is negative at sample {at}")]
    NegativeSample { index: usize, at: usize },
    #[error("field {index} has L2 norm {norm}, expected 1")]
    NotNormalized { index: usize, norm: f64 },
    #[error("fields {i} and {j} overlap at sample {at}")]
    OverlappingSupport { i: usize, j: usize, at: usize },
    #[error("{weights} weights for {fields} basis fields")]
    CountMismatch { weights: usize, fields: usize },
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
}

impl From<BasisViolation> for StatisticsError {
    fn from(v: BasisViolation) -> Self {
        StatisticsError::BasisViolation(v)
    }
}

const NORM_TOL: f64 = 1e-8;

/// Weighted unit-norm non-negative amplitudes with pairwise
/// samplewise-disjoint supports.
///
/// Disjointness is exact: no grid sample may carry nonzero values from two
/// different basis fields. For non-negative fields this is what pairwise
/// orthogonality forces, and it makes the squared weighted sum free of
/// cross terms, so mixtures over this basis are indistinguishable from the
/// corresponding summed pure state for any observable diagonal in position.
#[derive(Debug, Clone)]
pub struct PositiveBasis {
    fields: Vec<ScalarField>,
    weights: Vec<f64>,
}

impl PositiveBasis {
    pub fn new(fields: Vec<ScalarField>, weights: Vec<f64>) -> Result<Self, StatisticsError> {
        if fields.is_empty() {
            return Err(BasisViolation::Empty.into());
        }
        let grid = fields[0].grid().clone();
        for f in &fields {
            if f.grid() != &grid {
                return Err(StatisticsError::GridMismatch);
            }
        }
        for (i, f) in fields.iter().enumerate() {
            if let Some(at) = f.data().iter().position(|&v| v < 0.0) {
                return Err(BasisViolation::NegativeSample { index: i, at }.into());
            }
            let norm = f.norm_l2();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(BasisViolation::NotNormalized { index: i, norm }.into());
            }
        }
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                if let Some(at) = fields[i]
                    .data()
                    .iter()
                    .zip(fields[j].data())
                    .position(|(a, b)| *a != 0.0 && *b != 0.0)
                {
                    return Err(BasisViolation::OverlappingSupport { i, j, at }.into());
                }
            }
        }
        check_weights(&weights, fields.len())?;
        Ok(PositiveBasis { fields, weights })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, i: usize) -> &ScalarField {
        &self.fields[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ScalarField, f64)> {
        self.fields.iter().zip(self.weights.iter().copied())
    }
}

fn check_weights(weights: &[f64], fields: usize) -> Result<(), StatisticsError> {
    if weights.len() != fields {
        return Err(BasisViolation::CountMismatch { weights: weights.len(), fields }.into());
    }
    for (i, &w) in weights.iter().enumerate() {
        if w < 0.0 {
            return Err(BasisViolation::NegativeWeight { index: i, value: w }.into());
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(BasisViolation::WeightSum { sum }.into());
    }
    Ok(())
}

/// An observable that is a plain function of position, `A(x)`.
#[derive(Debug, Clone)]
pub struct DiagonalObservable {
    values: ScalarField,
}

impl DiagonalObservable {
    pub fn position(grid: &Grid, axis: usize) -> Self {
        DiagonalObservable {
            values: ScalarField::from_fn(grid.clone(), |pos| pos[axis]),
        }
    }

    pub fn position_squared(grid: &Grid, axis: usize) -> Self {
        DiagonalObservable {
            values: ScalarField::from_fn(grid.clone(), |pos| pos[axis] * pos[axis]),
        }
    }

    pub fn from_field(values: ScalarField) -> Self {
        DiagonalObservable { values }
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    /// `∫ A R² dV / ∫ R² dV` for a real amplitude `R`.
    pub fn expectation(&self, amplitude: &ScalarField) -> Result<f64, StatisticsError> {
        if amplitude.grid() != self.values.grid() {
            return Err(StatisticsError::GridMismatch);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (&a, &r) in self.values.data().iter().zip(amplitude.data()) {
            num += a * r * r;
            den += r * r;
        }
        if den == 0.0 {
            return Err(StatisticsError::ZeroDensity);
        }
        Ok(num / den)
    }
}

/// The expectation values that distinguish (or fail to distinguish) a pure
/// state from the mixture it is built from.
#[derive(Debug, Clone, Copy)]
pub struct PureMixedSplit {
    /// Expectation in the summed amplitude `Σ sqrt(w_i) R_i`.
    pub pure: f64,
    /// Weighted average of the per-component expectations `Σ w_i ⟨A⟩_i`.
    pub mixed: f64,
    /// The cross-term integral `Σ_{i≠j} sqrt(w_i w_j) ∫ R_i R_j A dV`,
    /// integrated directly; exactly zero for disjoint supports.
    pub cross_term: f64,
}

/// Expectation of `obs` in the pure state `Σ sqrt(w_i) R_i` versus the
/// mixture `{(w_i, R_i)}` over a validated basis.
///
/// With disjoint supports the squared sum has no cross terms, so the two
/// values agree to round-off and `cross_term` is exactly zero: a classical
/// ensemble cannot be told apart from the corresponding summed amplitude.
pub fn pure_vs_mixed_expectation(
    basis: &PositiveBasis,
    obs: &DiagonalObservable,
) -> Result<PureMixedSplit, StatisticsError> {
    let fields: Vec<&ScalarField> = basis.fields.iter().collect();
    pure_vs_mixed_unchecked(&fields, &basis.weights, obs)
}

/// The same three numbers without any basis validation, for amplitudes that
/// deliberately overlap. The nonzero `cross_term` is then exactly the
/// contribution a genuine mixture lacks.
pub fn pure_vs_mixed_raw(
    fields: &[ScalarField],
    weights: &[f64],
    obs: &DiagonalObservable,
) -> Result<PureMixedSplit, StatisticsError> {
    let refs: Vec<&ScalarField> = fields.iter().collect();
    pure_vs_mixed_unchecked(&refs, weights, obs)
}

fn pure_vs_mixed_unchecked(
    fields: &[&ScalarField],
    weights: &[f64],
    obs: &DiagonalObservable,
) -> Result<PureMixedSplit, StatisticsError> {
    if fields.is_empty() {
        return Err(BasisViolation::Empty.into());
    }
    if weights.len() != fields.len() {
        return Err(
            BasisViolation::CountMismatch { weights: weights.len(), fields: fields.len() }.into()
        );
    }
    let grid = fields[0].grid().clone();
    let mut summed = vec![0.0; grid.len()];
    let mut mixed = 0.0;
    for (f, &w) in fields.iter().zip(weights) {
        if f.grid() != &grid {
            return Err(StatisticsError::GridMismatch);
        }
        for (s, &v) in summed.iter_mut().zip(f.data()) {
            *s += w.sqrt() * v;
        }
        mixed += w * obs.expectation(f)?;
    }
    let mut cross = 0.0;
    for a in 0..fields.len() {
        for b in a + 1..fields.len() {
            let scale = 2.0 * (weights[a] * weights[b]).sqrt();
            for ((&ra, &rb), &av) in
                fields[a].data().iter().zip(fields[b].data()).zip(obs.values.data())
            {
                cross += scale * ra * rb * av;
            }
        }
    }
    cross *= grid.cell_volume();
    let pure = obs.expectation(&ScalarField::new(grid, summed)?)?;
    Ok(PureMixedSplit { pure, mixed, cross_term: cross })
}

/// Restricts a state to a Gaussian window after a position measurement with
/// outcome `center` and apparatus resolution `width`, renormalizing the
/// amplitude and leaving the action untouched.
///
/// `width` is the standard deviation the collapsed density would have on a
/// flat prior. Widths below twice the largest grid spacing cannot be
/// represented and are rejected.
pub fn collapse_position(
    fields: &MadelungFields,
    center: &[f64],
    width: f64,
) -> Result<MadelungFields, StatisticsError> {
    let grid = fields.grid().clone();
    if center.len() != grid.dim() {
        return Err(StatisticsError::Fields(FieldsError::DimensionMismatch {
            expected: grid.dim(),
            got: center.len(),
        }));
    }
    let floor = 2.0 * grid.dx_max();
    if !(width >= floor) {
        return Err(StatisticsError::WidthBelowGrid { got: width, min: floor });
    }
    let four_w2 = 4.0 * width * width;
    let mut r = Vec::with_capacity(grid.len());
    for (i, &v) in fields.r().iter().enumerate() {
        let pos = grid.coords(i);
        let mut d2 = 0.0;
        for a in 0..grid.dim() {
            let d = pos[a] - center[a];
            d2 += d * d;
        }
        r.push(v * (-d2 / four_w2).exp());
    }
    let before: f64 = fields.r().iter().map(|v| v * v).sum();
    let after: f64 = r.iter().map(|v| v * v).sum();
    if after <= 1e-30 * before {
        return Err(StatisticsError::ZeroOverlap);
    }
    let norm = (after * grid.cell_volume()).sqrt();
    r.iter_mut().for_each(|v| *v /= norm);
    Ok(MadelungFields::with_nodes(
        grid,
        r,
        fields.s().to_vec(),
        fields.nodes().to_vec(),
    ))
}

/// Draws positions distributed as `rho` (negative samples count as zero).
///
/// 1D uses exact inversion of the piecewise-constant cell distribution; 2D
/// uses rejection against the peak value. Reproducibility comes from the
/// caller's generator.
pub fn sample_positions(
    rho: &ScalarField,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<[f64; 2]>, StatisticsError> {
    let grid = rho.grid();
    match grid.dim() {
        1 => {
            let ax = grid.axis(0);
            let mut cum = Vec::with_capacity(grid.len());
            let mut total = 0.0;
            for &v in rho.data() {
                total += v.max(0.0);
                cum.push(total);
            }
            if total <= 0.0 {
                return Err(StatisticsError::ZeroDensity);
            }
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let u = rng.gen::<f64>() * total;
                let cell = cum.partition_point(|&c| c <= u).min(grid.len() - 1);
                let before = if cell == 0 { 0.0 } else { cum[cell - 1] };
                let mass = cum[cell] - before;
                let frac = if mass > 0.0 { (u - before) / mass } else { 0.5 };
                out.push([ax.min + (cell as f64 + frac) * ax.dx(), 0.0]);
            }
            Ok(out)
        }
        _ => {
            let peak = rho.data().iter().cloned().fold(0.0f64, f64::max);
            if peak <= 0.0 {
                return Err(StatisticsError::ZeroDensity);
            }
            let (ax, ay) = (grid.axis(0), grid.axis(1));
            let mut out = Vec::with_capacity(count);
            let mut budget = 10_000usize.saturating_mul(count.max(1));
            while out.len() < count {
                if budget == 0 {
                    return Err(StatisticsError::SamplingStalled);
                }
                budget -= 1;
                let x = ax.min + rng.gen::<f64>() * ax.len();
                let y = ay.min + rng.gen::<f64>() * ay.len();
                let v = rho.interp([x, y]).unwrap_or(0.0).max(0.0);
                if rng.gen::<f64>() * peak <= v {
                    out.push([x, y]);
                }
            }
            Ok(out)
        }
    }
}

/// One position measurement drawn from `rho` with its own seeded generator.
pub fn sample_measurement(rho: &ScalarField, seed: u64) -> Result<[f64; 2], StatisticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_positions(rho, 1, &mut rng)?[0])
}

/// Momentum inferred from two position measurements at different times:
/// `m (x2 - x1) / (t2 - t1)`, the only momentum a pair of position records
/// can support.
pub fn momentum_from_positions(
    x1: [f64; 2],
    t1: f64,
    x2: [f64; 2],
    t2: f64,
    c: &PhysicalConstants,
) -> Result<[f64; 2], StatisticsError> {
    if !(t2 > t1) {
        return Err(StatisticsError::DegenerateInterval { t1, t2 });
    }
    let dt = t2 - t1;
    Ok([c.mass * (x2[0] - x1[0]) / dt, c.mass * (x2[1] - x1[1]) / dt])
}

/// Largest value of the two-particle symmetrization cross term
/// `2 R1(x) R2(x) R1(y) R2(y)`, which factorizes as twice the square of the
/// largest single-point product. Exactly zero whenever the supports are
/// samplewise disjoint.
pub fn exchange_term_max(r1: &ScalarField, r2: &ScalarField) -> Result<f64, StatisticsError> {
    if r1.grid() != r2.grid() {
        return Err(StatisticsError::GridMismatch);
    }
    let peak = r1
        .data()
        .iter()
        .zip(r2.data())
        .map(|(a, b)| (a * b).abs())
        .fold(0.0f64, f64::max);
    Ok(2.0 * peak * peak)
}

/// The same cross term materialized on the product grid `(x, y)`, for 1D
/// inputs.
pub fn exchange_term_grid(
    r1: &ScalarField,
    r2: &ScalarField,
) -> Result<ScalarField, StatisticsError> {
    if r1.grid() != r2.grid() {
        return Err(StatisticsError::GridMismatch);
    }
    let grid = r1.grid();
    if grid.dim() != 1 {
        return Err(StatisticsError::Fields(FieldsError::DimensionMismatch {
            expected: 1,
            got: grid.dim(),
        }));
    }
    let ax = grid.axis(0);
    let product: Vec<f64> = r1.data().iter().zip(r2.data()).map(|(a, b)| a * b).collect();
    let grid2 = Grid::new_2d(ax.n, ax.n, (ax.min, ax.max), (ax.min, ax.max), grid.boundary())?;
    let n = ax.n;
    let data: Vec<f64> = (0..n * n)
        .map(|flat| 2.0 * product[flat % n] * product[flat / n])
        .collect();
    Ok(ScalarField::new(grid2, data)?)
}

/// Kolmogorov–Smirnov distance between a 1D sample set and the distribution
/// with density `rho`, using the same piecewise-constant cell convention as
/// [`sample_positions`].
pub fn ks_statistic_1d(samples: &[f64], rho: &ScalarField) -> Result<f64, StatisticsError> {
    let grid = rho.grid();
    if grid.dim() != 1 {
        return Err(StatisticsError::Fields(FieldsError::DimensionMismatch {
            expected: 1,
            got: grid.dim(),
        }));
    }
    if samples.is_empty() {
        return Err(StatisticsError::ZeroDensity);
    }
    let ax = grid.axis(0);
    let mut cum = Vec::with_capacity(grid.len());
    let mut total = 0.0;
    for &v in rho.data() {
        total += v.max(0.0);
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(StatisticsError::ZeroDensity);
    }
    let model_cdf = |x: f64| -> f64 {
        let u = (x - ax.min) / ax.dx();
        if u <= 0.0 {
            return 0.0;
        }
        let cell = (u.floor() as usize).min(grid.len() - 1);
        let before = if cell == 0 { 0.0 } else { cum[cell - 1] };
        let mass = cum[cell] - before;
        ((before + mass * (u - cell as f64).clamp(0.0, 1.0)) / total).min(1.0)
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let f = model_cdf(x);
        d = d.max((f - k as f64 / n).abs());
        d = d.max(((k + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        cosine_bump, gaussian_polar, truncated_gaussian, uniform_amplitude, Boundary,
    };

    fn grid1d(n: usize, half: f64) -> Grid {
        Grid::new_1d(n, -half, half, Boundary::Periodic).unwrap()
    }

    fn gaussian_amp(grid: &Grid, center: f64, sigma: f64) -> ScalarField {
        // Amplitude exp(-(x-c)^2 / 2 sigma^2), unit L2 norm.
        let mut f = ScalarField::from_fn(grid.clone(), |pos| {
            let d = pos[0] - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        });
        f.normalize_l2().unwrap();
        f
    }

    fn density_stats(f: &MadelungFields) -> (f64, f64) {
        let grid = f.grid();
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, &r) in f.r().iter().enumerate() {
            let x = grid.coords(i)[0];
            m0 += r * r;
            m1 += r * r * x;
            m2 += r * r * x * x;
        }
        let mean = m1 / m0;
        (mean, (m2 / m0 - mean * mean).sqrt())
    }

    #[test]
    fn disjoint_bumps_form_a_basis_and_overlap_is_rejected() {
        let grid = grid1d(512, 10.0);
        let b1 = cosine_bump(&grid, &[-4.0], 2.0).unwrap();
        let b2 = cosine_bump(&grid, &[4.0], 2.0).unwrap();
        assert!(PositiveBasis::new(vec![b1.clone(), b2], vec![0.5, 0.5]).is_ok());
        let b3 = cosine_bump(&grid, &[-2.0], 2.0).unwrap(); // overlaps b1
        let err = PositiveBasis::new(vec![b1.clone(), b3], vec![0.5, 0.5]);
        assert!(matches!(
            err,
            Err(StatisticsError::BasisViolation(BasisViolation::OverlappingSupport { .. }))
        ));
        let b4 = cosine_bump(&grid, &[4.0], 2.0).unwrap();
        assert!(matches!(
            PositiveBasis::new(vec![b1.clone(), b4.clone()], vec![0.7, 0.7]),
            Err(StatisticsError::BasisViolation(BasisViolation::WeightSum { .. }))
        ));
        assert!(matches!(
            PositiveBasis::new(vec![b1, b4], vec![1.5, -0.5]),
            Err(StatisticsError::BasisViolation(BasisViolation::NegativeWeight { .. }))
        ));
    }

    #[test]
    fn mixture_and_pure_state_agree_on_disjoint_supports() {
        let grid = grid1d(1024, 12.0);
        let b1 = truncated_gaussian(&grid, &[-5.0], 0.8, 3.0).unwrap();
        let b2 = truncated_gaussian(&grid, &[4.0], 1.1, 3.5).unwrap();
        let basis = PositiveBasis::new(vec![b1, b2], vec![0.3, 0.7]).unwrap();
        for obs in [
            DiagonalObservable::position(&grid, 0),
            DiagonalObservable::position_squared(&grid, 0),
        ] {
            let split = pure_vs_mixed_expectation(&basis, &obs).unwrap();
            assert!(
                (split.pure - split.mixed).abs() < 1e-12,
                "pure {} mixed {}",
                split.pure,
                split.mixed
            );
            assert_eq!(split.cross_term, 0.0);
        }
    }

    #[test]
    fn overlapping_amplitudes_split_pure_from_mixed() {
        let grid = grid1d(1024, 12.0);
        let g1 = gaussian_amp(&grid, -1.0, 0.9);
        let g2 = gaussian_amp(&grid, 1.0, 0.9);
        let obs = DiagonalObservable::position_squared(&grid, 0);
        let split = pure_vs_mixed_raw(&[g1, g2], &[0.5, 0.5], &obs).unwrap();
        assert!(
            (split.pure - split.mixed).abs() > 1e-2,
            "pure {} mixed {}",
            split.pure,
            split.mixed
        );
        assert!(split.cross_term.abs() > 1e-2);
    }

    #[test]
    fn collapse_matches_the_gaussian_posterior() {
        let grid = grid1d(2048, 15.0);
        let prior = gaussian_polar(&grid, &[0.0], 1.0, &[0.3], 0.0).unwrap();
        let (xm, w) = (0.5, 0.3);
        let post = collapse_position(&prior, &[xm], w).unwrap();
        assert!((post.amplitude_field().norm_l2() - 1.0).abs() < 1e-12);
        // The action rides along untouched.
        assert_eq!(post.s(), prior.s());
        // Product of Gaussian amplitudes is Gaussian: the posterior density
        // has variance (1/s^2 + 1/w^2)^-1 (s the prior density spread, w the
        // window's) and its mean is pulled toward the outcome.
        let s2 = 1.0;
        let w2 = w * w;
        let var = 1.0 / (1.0 / s2 + 1.0 / w2);
        let mean = var * (xm / w2);
        let (m1, sd) = density_stats(&post);
        assert!((m1 - mean).abs() < 1e-6, "mean {m1} vs {mean}");
        assert!((sd * sd - var).abs() < 1e-6, "var {} vs {var}", sd * sd);
    }

    #[test]
    fn repeated_collapse_shrinks_the_width_by_root_two() {
        let grid = grid1d(1024, 10.0);
        let flat = uniform_amplitude(&grid);
        let prior =
            MadelungFields::new(grid.clone(), flat.into_data(), vec![0.0; grid.len()]).unwrap();
        let once = collapse_position(&prior, &[0.0], 0.4).unwrap();
        let twice = collapse_position(&once, &[0.0], 0.4).unwrap();
        let (_, sd1) = density_stats(&once);
        let (_, sd2) = density_stats(&twice);
        assert!((sd1 - 0.4).abs() < 1e-4, "sd1 {sd1}");
        assert!((sd2 - 0.4 / 2f64.sqrt()).abs() < 1e-4, "sd2 {sd2}");
    }

    #[test]
    fn collapse_guards_width_and_overlap() {
        let grid = grid1d(256, 10.0);
        let prior = gaussian_polar(&grid, &[0.0], 0.7, &[0.0], 0.0).unwrap();
        assert!(matches!(
            collapse_position(&prior, &[0.0], 0.01),
            Err(StatisticsError::WidthBelowGrid { .. })
        ));
        let far = collapse_position(&prior, &[9.5], 0.2);
        assert!(matches!(far, Err(StatisticsError::ZeroOverlap)));
    }

    #[test]
    fn two_point_momentum_recovers_uniform_motion() {
        let c = PhysicalConstants { hbar: 1.0, mass: 2.5 };
        let p = momentum_from_positions([1.0, 0.0], 0.5, [2.2, 0.0], 1.5, &c).unwrap();
        assert!((p[0] - 2.5 * 1.2).abs() < 1e-12);
        assert!(matches!(
            momentum_from_positions([0.0; 2], 1.0, [1.0, 0.0], 1.0, &c),
            Err(StatisticsError::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn exchange_term_vanishes_only_for_disjoint_supports() {
        let grid = grid1d(512, 20.0);
        let d1 = truncated_gaussian(&grid, &[-6.0], 1.0, 4.0).unwrap();
        let d2 = truncated_gaussian(&grid, &[6.0], 1.0, 4.0).unwrap();
        assert_eq!(exchange_term_max(&d1, &d2).unwrap(), 0.0);

        // Far-separated full Gaussians: the closed form for the peak product
        // of exp(-(x -+ d/2)^2 / 2 s^2) amplitudes is
        // 2 * ((pi s^2)^(-1/2) exp(-d^2 / 4 s^2))^2.
        let (s, d) = (1.0, 8.0);
        let g1 = gaussian_amp(&grid, -d / 2.0, s);
        let g2 = gaussian_amp(&grid, d / 2.0, s);
        let got = exchange_term_max(&g1, &g2).unwrap();
        let peak = (std::f64::consts::PI * s * s).powf(-0.5) * (-d * d / (4.0 * s * s)).exp();
        let want = 2.0 * peak * peak;
        assert!((got - want).abs() / want < 1e-2, "got {got} want {want}");
        assert!(got < 1e-12, "got {got}");
    }

    #[test]
    fn exchange_grid_matches_the_factorized_peak() {
        let grid = grid1d(128, 10.0);
        let g1 = gaussian_amp(&grid, -1.0, 1.0);
        let g2 = gaussian_amp(&grid, 1.0, 1.0);
        let table = exchange_term_grid(&g1, &g2).unwrap();
        let max_table = table.data().iter().cloned().fold(0.0f64, f64::max);
        let max_direct = exchange_term_max(&g1, &g2).unwrap();
        assert!((max_table - max_direct).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_seeded_and_matches_its_density() {
        let grid = grid1d(1024, 10.0);
        let rho = {
            let amp = gaussian_amp(&grid, 1.0, 1.3);
            ScalarField::new(grid.clone(), amp.data().iter().map(|r| r * r).collect()).unwrap()
        };
        let a = sample_measurement(&rho, 42).unwrap();
        let b = sample_measurement(&rho, 42).unwrap();
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = sample_positions(&rho, 20_000, &mut rng).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
        let d = ks_statistic_1d(&xs, &rho).unwrap();
        assert!(d < 0.015, "KS {d}");
    }

    #[test]
    fn ks_statistic_flags_a_shifted_distribution() {
        let grid = grid1d(1024, 10.0);
        let rho = {
            let amp = gaussian_amp(&grid, 0.0, 1.0);
            ScalarField::new(grid.clone(), amp.data().iter().map(|r| r * r).collect()).unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = sample_positions(&rho, 5000, &mut rng).unwrap();
        let shifted: Vec<f64> = pts.iter().map(|p| p[0] + 0.5).collect();
        let d = ks_statistic_1d(&shifted, &rho).unwrap();
        assert!(d > 0.1, "KS {d}");
    }

    #[test]
    fn rejection_sampling_works_in_2d() {
        let grid =
            Grid::new_2d(128, 128, (-8.0, 8.0), (-8.0, 8.0), Boundary::Periodic).unwrap();
        let rho = ScalarField::from_fn(grid.clone(), |p| {
            let d2 = (p[0] - 1.0) * (p[0] - 1.0) + (p[1] + 2.0) * (p[1] + 2.0);
            (-d2).exp()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = sample_positions(&rho, 4000, &mut rng).unwrap();
        let mx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        assert!((mx - 1.0).abs() < 0.05, "mx {mx}");
        assert!((my + 2.0).abs() < 0.05, "my {my}");
    }
}
