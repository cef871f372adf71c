//! Hermite polynomials, normalized Hermite-Gaussian eigenfunctions and
//! grid quadrature.
//!
//! Units follow the oscillator convention `m = omega = hbar = 1`, so the
//! transverse coordinate is the dimensionless oscillator coordinate and
//! the mode `n` has energy `n + 1/2`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest mode index accepted by [`ModeIndex::new`].
pub const DEFAULT_MAX_MODE: usize = 256;
/// Points used by [`GridSpec::default`] and [`GridSpec::for_max_mode`].
pub const DEFAULT_GRID_POINTS: usize = 2048;
/// Turning-point coverage factor required by [`hg_mode`].
pub const TURNING_POINT_SAFETY: f64 = 1.5;

const LN_FACTORIAL_TABLE: usize = 4096;
const RESCALE_THRESHOLD: f64 = 1e100;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`, tabulated for small `n` and summed beyond the table.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_factorial_table();
    if n < table.len() {
        table[n]
    } else {
        let mut acc = table[table.len() - 1];
        for k in table.len()..=n {
            acc += (k as f64).ln();
        }
        acc
    }
}

/// Uniform grid symmetric about the origin with samples at half-integer
/// offsets, `x_j = -half_width + (j + 1/2) dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_points: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < 64 || n_points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_points must be even and >= 64, got {n_points}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self {
            n_points,
            half_width,
        })
    }

    /// Default grid that hosts every mode up to `n_max`:
    /// 2048 points over `max(12, 1.5 sqrt(2 n_max + 1))`.
    pub fn for_max_mode(n_max: usize) -> Self {
        let half_width = (TURNING_POINT_SAFETY * ((2 * n_max + 1) as f64).sqrt()).max(12.0);
        Self {
            n_points: DEFAULT_GRID_POINTS,
            half_width,
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    /// Coordinate of sample `j`. Computed as `(j - N/2 + 1/2) dx` so that
    /// mirrored samples are exact negatives of each other.
    pub fn x(&self, j: usize) -> f64 {
        let offset = j as f64 - (self.n_points / 2) as f64 + 0.5;
        offset * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Angular spatial frequency of FFT bin `j` (standard FFT ordering).
    pub fn kx(&self, j: usize) -> f64 {
        let n = self.n_points;
        let signed = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        2.0 * PI * signed / (n as f64 * self.dx())
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::for_max_mode(DEFAULT_MAX_MODE)
    }
}

/// Complex transverse amplitude sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.n_points()).map(|j| f(grid.x(j))).collect();
        Self { grid, values }
    }

    /// Unit-modulus field `exp(i theta(x))`.
    pub fn phase_mask(grid: GridSpec, theta: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::from_polar(1.0, theta(x)))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `sum |v_j|^2 dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Pointwise product with another field on the same grid.
    pub fn multiplied(&self, other: &SampledField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn sub(&self, other: &SampledField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Mirror image `f(-x)`; exact on the symmetric grid.
    pub fn mirrored(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// `sum x |v|^2 dx / sum |v|^2 dx`.
    pub fn centroid(&self) -> f64 {
        let dx = self.grid.dx();
        let mut num = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            num += self.grid.x(j) * v.norm_sqr();
        }
        num * dx / self.norm_sqr()
    }

    /// Second moment `sum x^2 |v|^2 dx / sum |v|^2 dx`.
    pub fn second_moment(&self) -> f64 {
        let dx = self.grid.dx();
        let mut num = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let x = self.grid.x(j);
            num += x * x * v.norm_sqr();
        }
        num * dx / self.norm_sqr()
    }
}

/// Validated eigenstate label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex(usize);

impl ModeIndex {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_limit(n, DEFAULT_MAX_MODE)
    }

    pub fn with_limit(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidArgument(format!(
                "mode index {n} exceeds configured maximum {n_max}"
            )));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Physicists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Calls `emit(k, phi_k(x))` for every `k` in `0..=n_max`, where `phi_k`
/// is the normalized oscillator eigenfunction.
///
/// The raw recurrence is rescaled whenever it grows past `1e100` and the
/// normalization `(2^k k! sqrt(pi))^{-1/2} exp(-x^2/2)` is applied in log
/// space, so no intermediate overflows for any practical order.
fn hermite_functions_at(x: f64, n_max: usize, mut emit: impl FnMut(usize, f64)) {
    let base = -0.5 * x * x - 0.25 * PI.ln();
    let ln2 = std::f64::consts::LN_2;
    let value = |k: usize, h: f64, log_scale: f64| -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        let log_norm = -0.5 * (k as f64 * ln2 + ln_factorial(k));
        h.signum() * (h.abs().ln() + log_scale + log_norm + base).exp()
    };

    let mut log_scale = 0.0;
    let mut prev = 1.0;
    emit(0, value(0, prev, log_scale));
    if n_max == 0 {
        return;
    }
    let mut cur = 2.0 * x;
    emit(1, value(1, cur, log_scale));
    for k in 1..n_max {
        let mut next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        let mut c = cur;
        if next.abs() > RESCALE_THRESHOLD {
            next /= RESCALE_THRESHOLD;
            c /= RESCALE_THRESHOLD;
            log_scale += RESCALE_THRESHOLD.ln();
        }
        prev = c;
        cur = next;
        emit(k + 1, value(k + 1, cur, log_scale));
    }
}

/// Normalized eigenfunction `phi_n(x)` at a single point.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut out = 0.0;
    hermite_functions_at(x, n, |k, v| {
        if k == n {
            out = v;
        }
    });
    out
}

/// Checks the turning-point coverage and sampling conditions for mode `n`.
pub fn check_mode_fits(n: usize, grid: &GridSpec) -> Result<()> {
    let turning = ((2 * n + 1) as f64).sqrt();
    if grid.half_width() < TURNING_POINT_SAFETY * turning {
        return Err(Error::GridTooSmall {
            mode: n,
            reason: format!(
                "half_width {} < {} x turning point {}",
                grid.half_width(),
                TURNING_POINT_SAFETY,
                turning
            ),
        });
    }
    let max_dx = PI / (2.0 * turning);
    if grid.dx() > max_dx {
        return Err(Error::GridTooSmall {
            mode: n,
            reason: format!("dx {} exceeds {}", grid.dx(), max_dx),
        });
    }
    Ok(())
}

/// Samples the normalized Hermite-Gaussian mode `phi_n` on `grid`.
pub fn hg_mode(n: usize, grid: &GridSpec) -> Result<SampledField> {
    check_mode_fits(n, grid)?;
    Ok(SampledField::from_fn(*grid, |x| {
        Complex64::new(hermite_function(n, x), 0.0)
    }))
}

/// Midpoint-rule inner product `sum conj(f_j) g_j dx`.
pub fn overlap(f: &SampledField, g: &SampledField) -> Result<Complex64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(dot(f.values(), g.values()) * f.grid().dx())
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// The modes `phi_0 ..= phi_{n_max}` sampled once on a grid, for repeated
/// projection and synthesis.
#[derive(Debug, Clone)]
pub struct HgBasis {
    grid: GridSpec,
    // modes[k][j] = phi_k(x_j)
    modes: Vec<Vec<f64>>,
}

impl HgBasis {
    pub fn new(grid: GridSpec, n_max: usize) -> Result<Self> {
        check_mode_fits(n_max, &grid)?;
        let mut modes = vec![vec![0.0; grid.n_points()]; n_max + 1];
        for j in 0..grid.n_points() {
            hermite_functions_at(grid.x(j), n_max, |k, v| modes[k][j] = v);
        }
        Ok(Self { grid, modes })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode_values(&self, n: usize) -> &[f64] {
        &self.modes[n]
    }

    pub fn mode(&self, n: usize) -> SampledField {
        SampledField {
            grid: self.grid,
            values: self.modes[n]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }

    /// Coefficients `<phi_k | field>` for `k = 0..=n_max`.
    pub fn project(&self, field: &SampledField) -> Result<Vec<Complex64>> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let dx = self.grid.dx();
        Ok(self
            .modes
            .iter()
            .map(|m| {
                m.iter()
                    .zip(field.values())
                    .fold(Complex64::new(0.0, 0.0), |acc, (p, v)| acc + v * *p)
                    * dx
            })
            .collect())
    }

    /// `sum_k coeffs[k] phi_k` on the grid.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> SampledField {
        let mut values = vec![Complex64::new(0.0, 0.0); self.grid.n_points()];
        for (c, mode) in coeffs.iter().zip(&self.modes) {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (v, p) in values.iter_mut().zip(mode) {
                *v += c * *p;
            }
        }
        SampledField {
            grid: self.grid,
            values,
        }
    }

    /// Relative L2 norm of the part of `field` outside the basis span.
    pub fn residual(&self, field: &SampledField, coeffs: &[Complex64]) -> Result<f64> {
        let back = self.synthesize(coeffs);
        let diff = field.sub(&back)?;
        let norm = field.norm();
        Ok(if norm == 0.0 { 0.0 } else { diff.norm() / norm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::for_max_mode(40)
    }

    #[test]
    fn hermite_small_orders() {
        assert_eq!(hermite_eval(0, 1.7), 1.0);
        assert_eq!(hermite_eval(1, 0.5), 1.0);
        // 16x^4 - 48x^2 + 12 expanded at x = 1
        let explicit = |x: f64| 16.0 * x.powi(4) - 48.0 * x * x + 12.0;
        assert_eq!(explicit(1.0), -20.0);
        assert!((hermite_eval(4, 1.0) - explicit(1.0)).abs() < 1e-12);
        for &x in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
            assert!((hermite_eval(4, x) - explicit(x)).abs() < 1e-10 * explicit(x).abs().max(1.0));
        }
    }

    #[test]
    fn ln_factorial_matches_direct_product() {
        let mut acc = 1.0f64;
        for n in 1..=20usize {
            acc *= n as f64;
            assert!((ln_factorial(n) - acc.ln()).abs() < 1e-12);
        }
        assert!((ln_factorial(5000) - ln_factorial(4999) - 5000f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(63, 1.0).is_err());
        assert!(GridSpec::new(65, 1.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        let g = GridSpec::new(64, 4.0).unwrap();
        assert!((g.x(0) + 4.0 - 0.5 * g.dx()).abs() < 1e-15);
        for j in 0..64 {
            assert_eq!(g.x(j), -g.x(63 - j));
        }
    }

    #[test]
    fn ground_state_peak() {
        let g = grid();
        let phi0 = hg_mode(0, &g).unwrap();
        let peak = hermite_function(0, 0.0);
        assert!((peak - PI.powf(-0.25)).abs() < 1e-15);
        assert!((peak - 0.75113).abs() < 1e-5);
        assert!((phi0.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_mode_vanishes_at_origin() {
        assert_eq!(hermite_function(1, 0.0), 0.0);
    }

    #[test]
    fn high_order_mode_normalized() {
        let g = GridSpec::new(4096, 30.0).unwrap();
        let phi = hg_mode(150, &g).unwrap();
        assert!((phi.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_too_small_is_reported() {
        let g = GridSpec::new(256, 5.0).unwrap();
        assert!(matches!(hg_mode(40, &g), Err(Error::GridTooSmall { .. })));
        let coarse = GridSpec::new(64, 30.0).unwrap();
        assert!(matches!(hg_mode(100, &coarse), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn overlap_examples() {
        let g = grid();
        let p0 = hg_mode(0, &g).unwrap();
        let p2 = hg_mode(2, &g).unwrap();
        let p5 = hg_mode(5, &g).unwrap();
        assert!((overlap(&p0, &p0).unwrap() - 1.0).norm() < 1e-10);
        assert!(overlap(&p2, &p5).unwrap().norm() < 1e-10);
        let phase = Complex64::from_polar(1.0, PI / 3.0);
        let shifted = p0.scaled(phase);
        assert!((overlap(&p0, &shifted).unwrap() - phase).norm() < 1e-10);
        let other = SampledField::zeros(GridSpec::new(64, 3.0).unwrap());
        assert!(matches!(overlap(&p0, &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn orthonormal_up_to_thirty() {
        let basis = HgBasis::new(grid(), 30).unwrap();
        for m in 0..=30 {
            for n in 0..=30 {
                let o = overlap(&basis.mode(m), &basis.mode(n)).unwrap();
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((o - expect).norm() < 1e-9, "({m},{n}) -> {o}");
            }
        }
    }

    #[test]
    fn parity_is_exact() {
        let g = grid();
        for n in 0..12 {
            let phi = hg_mode(n, &g).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let mirrored = phi.mirrored();
            for (a, b) in mirrored.values().iter().zip(phi.values()) {
                assert_eq!(*a, b * sign);
            }
        }
    }

    #[test]
    fn ladder_recurrence_pointwise() {
        let g = grid();
        let basis = HgBasis::new(g, 21).unwrap();
        for n in 1..=20usize {
            let lo = basis.mode_values(n - 1);
            let mid = basis.mode_values(n);
            let hi = basis.mode_values(n + 1);
            let a = (n as f64 / 2.0).sqrt();
            let b = ((n + 1) as f64 / 2.0).sqrt();
            for j in 0..g.n_points() {
                let lhs = g.x(j) * mid[j];
                let rhs = a * lo[j] + b * hi[j];
                assert!((lhs - rhs).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn basis_matches_single_mode_synthesis() {
        let g = grid();
        let basis = HgBasis::new(g, 25).unwrap();
        let direct = hg_mode(25, &g).unwrap();
        for (a, b) in basis.mode(25).values().iter().zip(direct.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn project_and_synthesize_roundtrip() {
        let g = grid();
        let basis = HgBasis::new(g, 10).unwrap();
        let coeffs: Vec<Complex64> = (0..=10)
            .map(|k| Complex64::new(1.0 / (k + 1) as f64, 0.1 * k as f64))
            .collect();
        let field = basis.synthesize(&coeffs);
        let back = basis.project(&field).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(basis.residual(&field, &back).unwrap() < 1e-12);
    }

    #[test]
    fn mode_index_limits() {
        assert!(ModeIndex::new(256).is_ok());
        assert!(ModeIndex::new(257).is_err());
        assert_eq!(ModeIndex::with_limit(3, 5).unwrap().get(), 3);
    }
}
