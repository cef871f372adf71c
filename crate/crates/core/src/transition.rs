//! Transition amplitudes `c_{m,n}` between oscillator eigenmodes.
//!
//! The momentum kick `D = exp(-i q0 X)` has matrix elements
//!
//! ```text
//! c_{m,n} = e^{-q0^2/4} / sqrt(2^{m+n} m! n!)
//!           * sum_r r! 2^r C(m,r) C(n,r) (-i q0)^{m+n-2r}
//! ```
//!
//! The alternating sum cancels badly once `m`, `n` reach the hundreds, so
//! [`coeff_closed`] evaluates the same quantity through the associated
//! Laguerre polynomial it reduces to,
//! `(-i q0/|q0|)^k e^{-a^2/2} a^k sqrt(p!/(p+k)!) L_p^{(k)}(a^2)` with
//! `a = |q0|/sqrt(2)`, `p = min(m,n)`, `k = |m-n|`. The literal sum is kept
//! as [`coeff_closed_sum`] for cross-checks at moderate order.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::csvio;
use crate::error::{Error, Result};
use crate::hermite::{ln_factorial, GridSpec, HgBasis, SampledField};

/// Unitarity tolerance used when no other is requested.
pub const DEFAULT_UNITARITY_TOL: f64 = 1e-11;

const MASK_MODULUS_TOL: f64 = 1e-9;
const LAGUERRE_RESCALE: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    GridProcess,
}

/// `(-i sgn(q0))^k`, exact.
fn kick_phase(k: usize, q0: f64) -> Complex64 {
    let s = if q0 < 0.0 { -1.0 } else { 1.0 };
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -s),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, s),
    }
}

/// `L_p^{(k)}(y)` as `(mantissa, ln scale)`.
fn laguerre_scaled(p: usize, k: usize, y: f64) -> (f64, f64) {
    let kf = k as f64;
    let mut prev = 1.0;
    if p == 0 {
        return (prev, 0.0);
    }
    let mut cur = 1.0 + kf - y;
    let mut log_scale = 0.0;
    for j in 1..p {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - y) * cur - (jf + kf) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > LAGUERRE_RESCALE {
            cur /= LAGUERRE_RESCALE;
            prev /= LAGUERRE_RESCALE;
            log_scale += LAGUERRE_RESCALE.ln();
        }
    }
    (cur, log_scale)
}

/// Closed-form amplitude `<m| exp(-i q0 X) |n>`.
pub fn coeff_closed(m: usize, n: usize, q0: f64) -> Complex64 {
    if q0 == 0.0 {
        return if m == n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let p = m.min(n);
    let k = m.max(n) - p;
    let a = q0.abs() / std::f64::consts::SQRT_2;
    let y = a * a;
    let (lag, lag_scale) = laguerre_scaled(p, k, y);
    if lag == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let log_mag = 0.5 * (ln_factorial(p) - ln_factorial(p + k)) + k as f64 * a.ln() - 0.5 * y
        + lag.abs().ln()
        + lag_scale;
    kick_phase(k, q0) * (lag.signum() * log_mag.exp())
}

/// The finite-sum form with the powers combined into `(-i q0)^{m+n-2r}`.
/// Each term's magnitude is formed in log space; the alternating sum
/// itself is evaluated directly, so this is only trustworthy while the
/// cancellation is mild (roughly `m, n <= 40` for `|q0| <= 3`).
pub fn coeff_closed_sum(m: usize, n: usize, q0: f64) -> Complex64 {
    if q0 == 0.0 {
        return if m == n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let ln2 = std::f64::consts::LN_2;
    let lq = q0.abs().ln();
    let norm = -0.25 * q0 * q0 - 0.5 * ((m + n) as f64 * ln2 + ln_factorial(m) + ln_factorial(n));
    // (-i q0)^{m+n-2r} = (-i sgn q0)^{m+n} (-1)^r |q0|^{m+n-2r}
    let mut sum = 0.0;
    for r in 0..=m.min(n) {
        let ln_binom_m = ln_factorial(m) - ln_factorial(r) - ln_factorial(m - r);
        let ln_binom_n = ln_factorial(n) - ln_factorial(r) - ln_factorial(n - r);
        let ln_term = ln_factorial(r) + r as f64 * ln2 + ln_binom_m + ln_binom_n
            + (m + n - 2 * r) as f64 * lq
            + norm;
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * ln_term.exp();
    }
    kick_phase(m + n, q0) * sum
}

/// Midpoint-rule value of `int phi_m(x) phi_n(x) exp(-i q0 x) dx`, the
/// quadrature oracle for [`coeff_closed`].
pub fn coeff_quadrature(m: usize, n: usize, q0: f64, grid: &GridSpec) -> Result<Complex64> {
    let basis = HgBasis::new(*grid, m.max(n))?;
    coeff_quadrature_with(&basis, m, n, q0)
}

/// [`coeff_quadrature`] reusing a precomputed basis.
pub fn coeff_quadrature_with(basis: &HgBasis, m: usize, n: usize, q0: f64) -> Result<Complex64> {
    let grid = basis.grid();
    if grid.dx() * q0.abs() >= std::f64::consts::FRAC_PI_4 {
        return Err(Error::GridTooSmall {
            mode: m.max(n),
            reason: format!("dx * |q0| = {} does not resolve the kick", grid.dx() * q0.abs()),
        });
    }
    if m.max(n) > basis.n_max() {
        return Err(Error::InvalidArgument(format!(
            "basis holds modes up to {}, asked for {}",
            basis.n_max(),
            m.max(n)
        )));
    }
    let pm = basis.mode_values(m);
    let pn = basis.mode_values(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..grid.n_points() {
        acc += Complex64::from_polar(pm[j] * pn[j], -q0 * grid.x(j));
    }
    Ok(acc * grid.dx())
}

/// Amplitudes `c_{m,n}` for `m <= m_max`, `n <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    q0: Option<f64>,
    m_max: usize,
    n_max: usize,
    // row-major, index m * (n_max + 1) + n
    entries: Vec<Complex64>,
    provenance: Provenance,
}

impl TransitionMatrix {
    pub fn from_fn(
        q0: Option<f64>,
        m_max: usize,
        n_max: usize,
        provenance: Provenance,
        f: impl Fn(usize, usize) -> Complex64,
    ) -> Self {
        let mut entries = Vec::with_capacity((m_max + 1) * (n_max + 1));
        for m in 0..=m_max {
            for n in 0..=n_max {
                entries.push(f(m, n));
            }
        }
        Self {
            q0,
            m_max,
            n_max,
            entries,
            provenance,
        }
    }

    pub fn identity(n_max: usize) -> Self {
        Self::from_fn(Some(0.0), n_max, n_max, Provenance::ClosedForm, |m, n| {
            if m == n {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn q0(&self) -> Option<f64> {
        self.q0
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * (self.n_max + 1) + n]
    }

    pub fn column(&self, n: usize) -> Vec<Complex64> {
        (0..=self.m_max).map(|m| self.get(m, n)).collect()
    }

    /// `sum_m |c_{m,n}|^2`.
    pub fn column_norm_sqr(&self, n: usize) -> f64 {
        (0..=self.m_max).map(|m| self.get(m, n).norm_sqr()).sum()
    }

    /// Largest `|1 - sum_m |c_{m,n}|^2|` over the kept columns.
    pub fn max_unitarity_defect(&self) -> f64 {
        (0..=self.n_max)
            .map(|n| (1.0 - self.column_norm_sqr(n)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|c_{m,n} - c_{n,m}|` over the square block.
    pub fn max_asymmetry(&self) -> f64 {
        let k = self.m_max.min(self.n_max);
        let mut worst = 0.0f64;
        for m in 0..=k {
            for n in 0..=k {
                worst = worst.max((self.get(m, n) - self.get(n, m)).norm());
            }
        }
        worst
    }

    /// CSV with header `m,n,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csvio::writer(path)?;
        w.write_record(["m", "n", "re", "im"])?;
        for m in 0..=self.m_max {
            for n in 0..=self.n_max {
                let c = self.get(m, n);
                w.write_record([
                    m.to_string(),
                    n.to_string(),
                    csvio::fmt(c.re),
                    csvio::fmt(c.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Hard cap on the adaptive row count.
pub fn m_max_cap(q0: f64, n_max: usize) -> usize {
    (4.0 * n_max as f64 + 20.0 * (1.0 + q0 * q0)).floor() as usize
}

/// Closed-form matrix whose row count is grown until every column's
/// probability deficit `1 - sum_m |c_{m,n}|^2` is below `unitarity_tol`.
pub fn build_matrix(q0: f64, n_max: usize, unitarity_tol: f64) -> Result<TransitionMatrix> {
    if !q0.is_finite() {
        return Err(Error::InvalidArgument(format!("q0 must be finite, got {q0}")));
    }
    if !(unitarity_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "unitarity_tol must be positive, got {unitarity_tol}"
        )));
    }
    let cap = m_max_cap(q0, n_max).max(n_max);
    let needed: Vec<Option<usize>> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut mass = 0.0;
            for m in 0..=cap {
                mass += coeff_closed(m, n, q0).norm_sqr();
                if m >= n && 1.0 - mass < unitarity_tol {
                    return Some(m);
                }
            }
            None
        })
        .collect();

    let mut m_max = n_max;
    for (n, need) in needed.iter().enumerate() {
        match need {
            Some(m) => m_max = m_max.max(*m),
            None => {
                return Err(Error::TruncationFailure(format!(
                    "column {n} misses unitarity tolerance {unitarity_tol:e} within cap m_max = {cap}"
                )))
            }
        }
    }

    let columns: Vec<Vec<Complex64>> = (0..=n_max)
        .into_par_iter()
        .map(|n| (0..=m_max).map(|m| coeff_closed(m, n, q0)).collect())
        .collect();
    Ok(TransitionMatrix::from_fn(
        Some(q0),
        m_max,
        n_max,
        Provenance::ClosedForm,
        |m, n| columns[n][m],
    ))
}

/// Quadrature-built matrix of the same kick, for oracle comparisons.
pub fn build_matrix_quadrature(
    q0: f64,
    m_max: usize,
    n_max: usize,
    grid: &GridSpec,
) -> Result<TransitionMatrix> {
    let basis = HgBasis::new(*grid, m_max.max(n_max))?;
    let mut entries = Vec::with_capacity((m_max + 1) * (n_max + 1));
    for m in 0..=m_max {
        for n in 0..=n_max {
            entries.push(coeff_quadrature_with(&basis, m, n, q0)?);
        }
    }
    Ok(TransitionMatrix {
        q0: Some(q0),
        m_max,
        n_max,
        entries,
        provenance: Provenance::Quadrature,
    })
}

fn check_phase_mask(mask: &SampledField) -> Result<()> {
    let worst = mask
        .values()
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    if worst > MASK_MODULUS_TOL {
        return Err(Error::NonUnitaryMask(worst));
    }
    Ok(())
}

/// Square matrix `c_{m,n} = <phi_m | mask phi_n>` for `m, n <= n_max`.
pub fn process_from_grid(
    mask: &SampledField,
    n_max: usize,
    grid: &GridSpec,
) -> Result<TransitionMatrix> {
    process_from_grid_rect(mask, n_max, n_max, grid)
}

/// Rectangular variant of [`process_from_grid`].
pub fn process_from_grid_rect(
    mask: &SampledField,
    m_max: usize,
    n_max: usize,
    grid: &GridSpec,
) -> Result<TransitionMatrix> {
    if mask.grid() != grid {
        return Err(Error::GridMismatch);
    }
    check_phase_mask(mask)?;
    let basis = HgBasis::new(*grid, m_max.max(n_max))?;
    let dx = grid.dx();
    let columns: Vec<Vec<Complex64>> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let pn = basis.mode_values(n);
            let masked: Vec<Complex64> = mask
                .values()
                .iter()
                .zip(pn)
                .map(|(u, p)| u * *p)
                .collect();
            (0..=m_max)
                .map(|m| {
                    basis
                        .mode_values(m)
                        .iter()
                        .zip(&masked)
                        .fold(Complex64::new(0.0, 0.0), |acc, (p, v)| acc + v * *p)
                        * dx
                })
                .collect()
        })
        .collect();
    Ok(TransitionMatrix::from_fn(
        None,
        m_max,
        n_max,
        Provenance::GridProcess,
        |m, n| columns[n][m],
    ))
}
