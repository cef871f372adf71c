//! Characteristic function `G(s)`, work distribution `P(zeta)` and the
//! fluctuation-relation checks for the closed dynamics.
//!
//! Initial and final spectra coincide, so every energy gap is an integer
//! `d = m - n` in units of `hbar omega` and one period `s in [0, 2 pi)`
//! carries the whole trace.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::csvio;
use crate::error::{Error, Result};
use crate::thermo::ThermalEnsemble;
use crate::transition::TransitionMatrix;

const UNIFORM_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-9;
const NEGATIVE_FLOOR: f64 = 1e-9;

/// `s_k = 2 pi k / m` for `k = 0..m`.
pub fn uniform_s_grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
}

/// Default sample count `2 (m_max + n_max) + 1`.
pub fn default_sample_count(m_max: usize, n_max: usize) -> usize {
    2 * (m_max + n_max) + 1
}

/// `e^{2 pi i j / m}` for `j = 0..m`, with `table[m - j] = conj(table[j])`
/// bit for bit.
fn root_table(m: usize) -> Vec<Complex64> {
    let mut t = vec![Complex64::new(1.0, 0.0); m];
    for j in 1..=m / 2 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
        t[j] = z;
        t[m - j] = z.conj();
    }
    if m % 2 == 0 && m > 0 {
        t[m / 2] = Complex64::new(-1.0, 0.0);
    }
    t
}

fn root_index(k: usize, d: i64, m: usize) -> usize {
    ((k as i64 * d).rem_euclid(m as i64)) as usize
}

/// Sampled `G(s)`, optionally tagged with the integer work support it
/// was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnTrace {
    s_samples: Vec<f64>,
    values: Vec<Complex64>,
    support: Option<(i64, i64)>,
}

impl CharFnTrace {
    pub fn new(s_samples: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if s_samples.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples but {} values",
                s_samples.len(),
                values.len()
            )));
        }
        Ok(Self {
            s_samples,
            values,
            support: None,
        })
    }

    /// Declares the work support `d_min..=d_max` the trace encodes.
    pub fn with_support(mut self, d_min: i64, d_max: i64) -> Self {
        self.support = Some((d_min.min(d_max), d_max.max(d_min)));
        self
    }

    pub fn s_samples(&self) -> &[f64] {
        &self.s_samples
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn support(&self) -> Option<(i64, i64)> {
        self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when the samples are `2 pi k / len` within rounding.
    pub fn is_uniform(&self) -> bool {
        let m = self.s_samples.len();
        m > 0
            && self
                .s_samples
                .iter()
                .enumerate()
                .all(|(k, &s)| (s - 2.0 * PI * k as f64 / m as f64).abs() <= UNIFORM_TOL * 2.0 * PI)
    }

    /// `G` at the sample nearest `s = 0`, if one is exactly zero.
    pub fn at_zero(&self) -> Option<Complex64> {
        self.s_samples
            .iter()
            .position(|&s| s == 0.0)
            .map(|k| self.values[k])
    }

    /// `max_k |G(2 pi - s_k) - conj(G(s_k))|` on a uniform trace.
    pub fn hermitian_defect(&self) -> Result<f64> {
        if !self.is_uniform() {
            return Err(Error::Aliasing("trace is not uniform on [0, 2 pi)".into()));
        }
        let m = self.values.len();
        let mut worst = 0.0f64;
        for k in 0..m {
            let mirror = (m - k) % m;
            worst = worst.max((self.values[mirror] - self.values[k].conj()).norm());
        }
        Ok(worst)
    }

    /// Largest pointwise distance to another trace on the same samples.
    pub fn max_distance(&self, other: &CharFnTrace) -> Result<f64> {
        if self.s_samples != other.s_samples {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with header `s,re_G,im_G`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        csvio::write_table(
            path,
            &["s", "re_G", "im_G"],
            self.s_samples
                .iter()
                .zip(&self.values)
                .map(|(s, g)| vec![*s, g.re, g.im]),
        )
    }
}

/// Discrete work distribution on the integer support `d_min..=d_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDist {
    d_min: i64,
    probs: Vec<f64>,
}

impl WorkDist {
    pub fn new(d_min: i64, probs: Vec<f64>) -> Self {
        Self { d_min, probs }
    }

    pub fn d_min(&self) -> i64 {
        self.d_min
    }

    pub fn d_max(&self) -> i64 {
        self.d_min + self.probs.len() as i64 - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, d: i64) -> f64 {
        let i = d - self.d_min;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.d_min + i as i64, *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `<zeta> = sum d P(d)`.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(d, p)| d as f64 * p).sum()
    }

    /// Largest `|P(d) - Q(d)|` over the union of both supports.
    pub fn max_distance(&self, other: &WorkDist) -> f64 {
        let lo = self.d_min.min(other.d_min);
        let hi = self.d_max().max(other.d_max());
        (lo..=hi)
            .map(|d| (self.prob(d) - other.prob(d)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `zeta,prob`; rows whose probability is exactly zero
    /// are omitted.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csvio::writer(path)?;
        w.write_record(["zeta", "prob"])?;
        for (d, p) in self.iter() {
            if p != 0.0 {
                w.write_record([d.to_string(), csvio::fmt(p)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_cover(ens: &ThermalEnsemble, t: &TransitionMatrix) -> Result<()> {
    if t.n_max() < ens.n_cut() {
        return Err(Error::DimensionMismatch(format!(
            "transition matrix covers n <= {}, ensemble needs n <= {}",
            t.n_max(),
            ens.n_cut()
        )));
    }
    Ok(())
}

/// `G(s) = sum_{m,n} p_n |c_{m,n}|^2 e^{i s (m - n)}` as a literal double sum.
pub fn charfn_direct(ens: &ThermalEnsemble, t: &TransitionMatrix, s: f64) -> Result<Complex64> {
    check_cover(ens, t)?;
    let mut g = Complex64::new(0.0, 0.0);
    for (n, &p) in ens.weights().iter().enumerate() {
        for m in 0..=t.m_max() {
            let d = m as f64 - n as f64;
            g += Complex64::from_polar(p * t.get(m, n).norm_sqr(), s * d);
        }
    }
    Ok(g)
}

/// `P(d) = sum_{m - n = d} p_n |c_{m,n}|^2` on `-n_cut..=m_max`.
pub fn workdist_direct(ens: &ThermalEnsemble, t: &TransitionMatrix) -> Result<WorkDist> {
    check_cover(ens, t)?;
    let d_min = -(ens.n_cut() as i64);
    let mut probs = vec![0.0; ens.n_cut() + t.m_max() + 1];
    for (n, &p) in ens.weights().iter().enumerate() {
        for m in 0..=t.m_max() {
            probs[m + ens.n_cut() - n] += p * t.get(m, n).norm_sqr();
        }
    }
    Ok(WorkDist::new(d_min, probs))
}

/// `G` on the uniform grid of `m_samples` points, from the joint
/// distribution. Phases come from an exactly conjugate-symmetric table of
/// roots of unity, so the trace is Hermitian to the last bit.
pub fn charfn_trace(
    ens: &ThermalEnsemble,
    t: &TransitionMatrix,
    m_samples: usize,
) -> Result<CharFnTrace> {
    let dist = workdist_direct(ens, t)?;
    Ok(charfn_from_dist(&dist, m_samples))
}

/// Uniform samples of `sum_d P(d) e^{i s d}`.
pub fn charfn_from_dist(dist: &WorkDist, m_samples: usize) -> CharFnTrace {
    let table = root_table(m_samples);
    let values: Vec<Complex64> = (0..m_samples)
        .into_par_iter()
        .map(|k| {
            dist.iter().fold(Complex64::new(0.0, 0.0), |acc, (d, p)| {
                acc + table[root_index(k, d, m_samples)] * p
            })
        })
        .collect();
    CharFnTrace {
        s_samples: uniform_s_grid(m_samples),
        values,
        support: Some((dist.d_min(), dist.d_max())),
    }
}

/// Inverse DFT `P(d) = (1/M) sum_k G(s_k) e^{-i s_k d}` over the trace's
/// declared support.
pub fn workdist_from_trace(trace: &CharFnTrace) -> Result<WorkDist> {
    let (d_min, d_max) = trace
        .support
        .ok_or_else(|| Error::Aliasing("trace carries no declared work support".into()))?;
    let m = trace.len();
    if !trace.is_uniform() {
        return Err(Error::Aliasing(format!(
            "{m} samples are not uniform on [0, 2 pi)"
        )));
    }
    let span = (d_max - d_min) as usize;
    if m < span + 1 {
        return Err(Error::Aliasing(format!(
            "{m} samples cannot resolve a support of {} values",
            span + 1
        )));
    }
    let table = root_table(m);
    let mut probs = Vec::with_capacity(span + 1);
    for d in d_min..=d_max {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, g) in trace.values.iter().enumerate() {
            acc += g * table[root_index(k, -d, m)];
        }
        let p = acc / m as f64;
        if p.im.abs() > IMAG_TOL {
            return Err(Error::NonRealDistribution(p.im.abs()));
        }
        if p.re < -NEGATIVE_FLOOR {
            return Err(Error::NegativeProbability(p.re));
        }
        probs.push(p.re.max(0.0));
    }
    Ok(WorkDist::new(d_min, probs))
}

/// Smallest `n_cut` at or above the thermal cutoff for which the mass the
/// truncation removes from `<e^{-beta W}>` under the kick `q0` is below
/// `tol`.
///
/// The thermal tail alone is not enough: `e^{-beta W}` up-weights the rare
/// transitions from high `n` down to low `m`, and the kick spreads level
/// `n` over a width of order `|q0| sqrt(2n)`. With
/// `R_m(N) = sum_{n > N} |c_{m,n}|^2`, the untruncated sum is 1 and the
/// truncation removes exactly `(1 - e^{-beta}) sum_m e^{-beta m} R_m(N)`.
pub fn fluctuation_cutoff(q0: f64, beta_hw: f64, tol: f64) -> Result<usize> {
    let ens = crate::thermo::thermal_weights(beta_hw, tol)?;
    let start = ens.n_cut();
    let cap = crate::transition::m_max_cap(q0, start).max(start + 1);
    // rows beyond m_rows are bounded by R_m <= 1
    let m_rows = ((10.0 / tol).ln() / beta_hw).ceil() as usize;
    let g = -(-beta_hw).exp_m1();
    let boltz: Vec<f64> = (0..m_rows).map(|m| g * (-beta_hw * m as f64).exp()).collect();
    let mut kept: Vec<f64> = (0..m_rows)
        .into_par_iter()
        .map(|m| {
            (0..=start)
                .map(|n| crate::transition::coeff_closed(m, n, q0).norm_sqr())
                .sum()
        })
        .collect();
    let far = (-beta_hw * m_rows as f64).exp();
    let mut n_cut = start;
    loop {
        let missing: f64 = boltz
            .iter()
            .zip(&kept)
            .map(|(b, s)| b * (1.0 - s).max(0.0))
            .sum::<f64>()
            + far;
        if missing < tol {
            return Ok(n_cut);
        }
        if n_cut >= cap {
            return Err(Error::TruncationFailure(format!(
                "fluctuation cutoff exceeds {cap} levels for q0 = {q0}, beta = {beta_hw}"
            )));
        }
        n_cut += 1;
        let col: Vec<f64> = (0..m_rows)
            .into_par_iter()
            .map(|m| crate::transition::coeff_closed(m, n_cut, q0).norm_sqr())
            .collect();
        for (s, c) in kept.iter_mut().zip(col) {
            *s += c;
        }
    }
}

/// `sum_d P(d) e^{-beta d}`.
pub fn jarzynski_lhs(dist: &WorkDist, beta_hw: f64) -> f64 {
    dist.iter().map(|(d, p)| p * (-beta_hw * d as f64).exp()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::ln_factorial;
    use crate::thermo::thermal_weights;
    use crate::transition::build_matrix;

    #[test]
    fn identity_process() {
        let ens = thermal_weights(1.0, 1e-10).unwrap();
        let t = TransitionMatrix::identity(ens.n_cut());
        for &s in &[0.0, 0.4, 2.9] {
            let g = charfn_direct(&ens, &t, s).unwrap();
            assert!((g - 1.0).norm() < 1e-14);
        }
        let w = workdist_direct(&ens, &t).unwrap();
        assert!((w.prob(0) - 1.0).abs() < 1e-14);
        assert_eq!(w.prob(1), 0.0);
        assert!((jarzynski_lhs(&w, 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn charfn_at_zero_is_one() {
        let ens = thermal_weights(1.0, 1e-10).unwrap();
        let t = build_matrix(3.0, ens.n_cut(), 1e-12).unwrap();
        let g = charfn_direct(&ens, &t, 0.0).unwrap();
        assert!((g - 1.0).norm() < 1e-10);
    }

    #[test]
    fn coverage_is_checked() {
        let ens = thermal_weights(0.5, 1e-8).unwrap();
        let t = build_matrix(1.0, 3, 1e-8).unwrap();
        assert!(matches!(
            charfn_direct(&ens, &t, 0.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ground_state_gives_poisson() {
        let ens = ThermalEnsemble::ground_state();
        let t = build_matrix(3.0, 0, 1e-14).unwrap();
        let w = workdist_direct(&ens, &t).unwrap();
        let rate = 4.5f64;
        for d in 0..40i64 {
            let poisson = (-rate + d as f64 * rate.ln() - ln_factorial(d as usize)).exp();
            assert!((w.prob(d) - poisson).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_work_is_half_kick_squared() {
        for &(q, beta) in &[(1.0, 0.1), (3.0, 1.0), (0.5, 2.0)] {
            let n_cut = fluctuation_cutoff(q, beta, 1e-10).unwrap();
            let ens = crate::thermo::thermal_weights_with_cutoff(beta, n_cut).unwrap();
            let t = build_matrix(q, ens.n_cut(), 1e-12).unwrap();
            let w = workdist_direct(&ens, &t).unwrap();
            assert!((w.mean() - q * q / 2.0).abs() < 1e-6, "q {q} beta {beta}: {}", w.mean());
            let j = jarzynski_lhs(&w, beta);
            assert!((j - 1.0).abs() < 2e-6, "q {q} beta {beta}: {j}");
            assert!(jarzynski_lhs(&w, beta) >= (-beta * w.mean()).exp());
        }
    }

    #[test]
    fn fluctuation_cutoff_restores_jarzynski() {
        for &(q, beta) in &[(1.0, 0.1), (3.0, 1.0)] {
            let n_cut = fluctuation_cutoff(q, beta, 1e-8).unwrap();
            assert!(n_cut >= thermal_weights(beta, 1e-8).unwrap().n_cut());
            let ens = crate::thermo::thermal_weights_with_cutoff(beta, n_cut).unwrap();
            let t = build_matrix(q, n_cut, 1e-12).unwrap();
            let w = workdist_direct(&ens, &t).unwrap();
            assert!((jarzynski_lhs(&w, beta) - 1.0).abs() < 5e-8);
        }
        assert_eq!(
            fluctuation_cutoff(0.0, 1.0, 1e-8).unwrap(),
            thermal_weights(1.0, 1e-8).unwrap().n_cut()
        );
    }

    #[test]
    fn trace_round_trip() {
        let ens = thermal_weights(1.0, 1e-10).unwrap();
        let t = build_matrix(1.0, ens.n_cut(), 1e-12).unwrap();
        let direct = workdist_direct(&ens, &t).unwrap();
        let trace = charfn_trace(&ens, &t, default_sample_count(t.m_max(), ens.n_cut())).unwrap();
        assert_eq!(trace.hermitian_defect().unwrap(), 0.0);
        let back = workdist_from_trace(&trace).unwrap();
        assert!(back.max_distance(&direct) < 1e-9);
        // pointwise agreement with the literal double sum
        for k in [0, 3, 17] {
            let g = charfn_direct(&ens, &t, trace.s_samples()[k]).unwrap();
            assert!((g - trace.values()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_trace_is_delta() {
        let m = 9;
        let trace = CharFnTrace::new(uniform_s_grid(m), vec![Complex64::new(1.0, 0.0); m])
            .unwrap()
            .with_support(-4, 4);
        let w = workdist_from_trace(&trace).unwrap();
        assert!((w.prob(0) - 1.0).abs() < 1e-15);
        for d in 1..=4 {
            assert!(w.prob(d).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_sample_is_aliasing() {
        let m = 9;
        let mut s = uniform_s_grid(m);
        s.pop();
        let trace = CharFnTrace::new(s, vec![Complex64::new(1.0, 0.0); m - 1])
            .unwrap()
            .with_support(-4, 4);
        assert!(matches!(workdist_from_trace(&trace), Err(Error::Aliasing(_))));
    }

    #[test]
    fn corrupted_trace_is_non_real() {
        let m = 9;
        let mut g = vec![Complex64::new(1.0, 0.0); m];
        g[2] = Complex64::new(1.0, 0.3);
        let trace = CharFnTrace::new(uniform_s_grid(m), g).unwrap().with_support(-4, 4);
        assert!(matches!(
            workdist_from_trace(&trace),
            Err(Error::NonRealDistribution(_))
        ));
    }
}
