//! Two-path interferometer: intensity traces and the reconstruction of
//! `G(s)` from them.
//!
//! The upper arm evolves freely for a phase-time `s` and then undergoes
//! the process; the lower arm undergoes the process and then evolves
//! under the final Hamiltonian. With 50:50 splitters the bulk detectors
//! read `out0 = int |u_up + e^{i theta} u_low|^2 / 4` and `out1` with the
//! minus sign, so for unit input power `out0 = 1/2 + Re(e^{i theta}
//! <u_up|u_low>) / 2` and `<u_up|u_low> = conj(G_n(s))`.
//! Port `out0` is the `+` superposition by convention.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::csvio;
use crate::error::{Error, Result};
use crate::hermite::{dot, GridSpec, HgBasis, SampledField};
use crate::optics::{apply_mask, frft_spectral_with, BASIS_RESIDUAL_TOL};
use crate::thermo::ThermalEnsemble;
use crate::transition::{build_matrix, TransitionMatrix};
use crate::workstats::CharFnTrace;

/// Tolerance on `|norm / offset - 1|` in [`reconstruct_charfn`].
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Extra modes kept above the kicked support when sizing a quench basis.
pub const BASIS_MARGIN: usize = 8;

/// The process acting between the two energy measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum Process {
    Identity,
    /// Pointwise pure-phase mask on the grid.
    Mask(SampledField),
    /// Operator given by its amplitudes in the eigenmode basis.
    Matrix(TransitionMatrix),
}

/// Eigenbasis of the final Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FinalBasis {
    SameAsInitial,
    /// `H_F = D H D^dagger` with `D = exp(-i q0 x)`.
    DisplacedBy(f64),
}

#[derive(Debug, Clone)]
pub struct InterferometerConfig {
    process: Process,
    final_basis: FinalBasis,
    phase_offset: f64,
    basis: HgBasis,
}

impl InterferometerConfig {
    pub fn new(
        process: Process,
        final_basis: FinalBasis,
        phase_offset: f64,
        basis: HgBasis,
    ) -> Result<Self> {
        if let FinalBasis::DisplacedBy(q0) = final_basis {
            if !matches!(process, Process::Identity) {
                return Err(Error::InvalidArgument(
                    "a displaced final basis is only defined for the sudden quench (identity process)"
                        .into(),
                ));
            }
            if !q0.is_finite() {
                return Err(Error::InvalidArgument(format!("q0 must be finite, got {q0}")));
            }
        }
        match &process {
            Process::Mask(m) if m.grid() != basis.grid() => return Err(Error::GridMismatch),
            Process::Matrix(t) if t.m_max() > basis.n_max() => {
                return Err(Error::DimensionMismatch(format!(
                    "process reaches mode {} but the basis stops at {}",
                    t.m_max(),
                    basis.n_max()
                )))
            }
            _ => {}
        }
        if !phase_offset.is_finite() {
            return Err(Error::InvalidArgument("phase offset must be finite".into()));
        }
        Ok(Self {
            process,
            final_basis,
            phase_offset,
            basis,
        })
    }

    /// Sudden momentum kick `q0` on levels `0..=n_cut`, with a basis and
    /// grid sized for the kicked modes.
    pub fn quench(q0: f64, n_cut: usize, phase_offset: f64) -> Result<Self> {
        let t = build_matrix(q0, n_cut, 1e-12)?;
        let n_basis = t.m_max() + BASIS_MARGIN;
        let basis = HgBasis::new(GridSpec::for_max_mode(n_basis), n_basis)?;
        Self::new(Process::Identity, FinalBasis::DisplacedBy(q0), phase_offset, basis)
    }

    pub fn with_phase_offset(&self, phase_offset: f64) -> Result<Self> {
        Self::new(
            self.process.clone(),
            self.final_basis,
            phase_offset,
            self.basis.clone(),
        )
    }

    pub fn process(&self) -> &Process {
        &self.process
    }

    pub fn final_basis(&self) -> FinalBasis {
        self.final_basis
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn basis(&self) -> &HgBasis {
        &self.basis
    }

    pub fn grid(&self) -> &GridSpec {
        self.basis.grid()
    }

    fn project_checked(&self, field: &SampledField) -> Result<Vec<Complex64>> {
        let c = self.basis.project(field)?;
        let residual = self.basis.residual(field, &c)?;
        if residual > BASIS_RESIDUAL_TOL {
            return Err(Error::BasisDeficit {
                n_basis: self.basis.n_max(),
                residual,
            });
        }
        Ok(c)
    }

    fn apply_process(&self, field: &SampledField) -> Result<SampledField> {
        match &self.process {
            Process::Identity => Ok(field.clone()),
            Process::Mask(m) => apply_mask(field, m),
            Process::Matrix(t) => {
                let c = self.project_checked(field)?;
                let stray: f64 = c[t.n_max() + 1..].iter().map(|v| v.norm_sqr()).sum();
                if stray.sqrt() > BASIS_RESIDUAL_TOL {
                    return Err(Error::DimensionMismatch(format!(
                        "field has weight {:e} beyond the process columns",
                        stray.sqrt()
                    )));
                }
                let out: Vec<Complex64> = (0..=t.m_max())
                    .map(|m| (0..=t.n_max()).map(|n| t.get(m, n) * c[n]).sum())
                    .collect();
                Ok(self.basis.synthesize(&out))
            }
        }
    }

    fn kick(&self, q0: f64, sign: f64) -> SampledField {
        SampledField::phase_mask(*self.grid(), move |x| sign * q0 * x)
    }

    /// Free evolution under the final Hamiltonian.
    fn final_evolution(&self, field: &SampledField, s: f64) -> Result<SampledField> {
        match self.final_basis {
            FinalBasis::SameAsInitial => frft_spectral_with(&self.basis, field, s),
            FinalBasis::DisplacedBy(q0) => {
                let undone = field.multiplied(&self.kick(q0, 1.0))?;
                let evolved = frft_spectral_with(&self.basis, &undone, s)?;
                evolved.multiplied(&self.kick(q0, -1.0))
            }
        }
    }

    /// The `m`-th eigenmode of the final Hamiltonian on the grid.
    fn final_mode(&self, m: usize) -> Result<SampledField> {
        let phi = self.basis.mode(m);
        match self.final_basis {
            FinalBasis::SameAsInitial => Ok(phi),
            FinalBasis::DisplacedBy(q0) => phi.multiplied(&self.kick(q0, -1.0)),
        }
    }

    /// Coefficients of `field` in the final eigenbasis.
    fn project_final(&self, field: &SampledField) -> Result<Vec<Complex64>> {
        match self.final_basis {
            FinalBasis::SameAsInitial => self.project_checked(field),
            FinalBasis::DisplacedBy(q0) => {
                self.project_checked(&field.multiplied(&self.kick(q0, 1.0))?)
            }
        }
    }
}

/// Detector powers for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorReading {
    pub out0: f64,
    pub out1: f64,
    /// `(P_up + P_low) / 4`, twice the single-arm detected power.
    pub offset: f64,
}

fn detect(up: &SampledField, low: &SampledField, theta: f64) -> Result<DetectorReading> {
    if up.grid() != low.grid() {
        return Err(Error::GridMismatch);
    }
    let rot = Complex64::from_polar(1.0, theta);
    let dx = up.grid().dx();
    let mut out0 = 0.0;
    let mut out1 = 0.0;
    for (a, b) in up.values().iter().zip(low.values()) {
        let rb = rot * b;
        out0 += (a + rb).norm_sqr();
        out1 += (a - rb).norm_sqr();
    }
    Ok(DetectorReading {
        out0: out0 * dx / 4.0,
        out1: out1 * dx / 4.0,
        offset: (up.norm_sqr() + low.norm_sqr()) / 4.0,
    })
}

/// Both arms for input mode `n` at phase-time `s`, simulated on the grid.
pub fn arm_fields(
    n: usize,
    cfg: &InterferometerConfig,
    s: f64,
) -> Result<(SampledField, SampledField)> {
    if n > cfg.basis.n_max() {
        return Err(Error::DimensionMismatch(format!(
            "mode {n} is outside the {}-mode basis",
            cfg.basis.n_max()
        )));
    }
    let phi = cfg.basis.mode(n);
    let up = cfg.apply_process(&frft_spectral_with(&cfg.basis, &phi, s)?)?;
    let low = cfg.final_evolution(&cfg.apply_process(&phi)?, s)?;
    Ok((up, low))
}

/// Detector powers for the eigenmode input `phi_n`.
pub fn run_mode(n: usize, cfg: &InterferometerConfig, s: f64) -> Result<DetectorReading> {
    let (up, low) = arm_fields(n, cfg, s)?;
    detect(&up, &low, cfg.phase_offset)
}

/// Bulk-detector traces over a list of phase-times.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrace {
    s_samples: Vec<f64>,
    out0: Vec<f64>,
    out1: Vec<f64>,
    offset: Vec<f64>,
    phase_offset: f64,
    support: Option<(i64, i64)>,
}

impl IntensityTrace {
    pub fn s_samples(&self) -> &[f64] {
        &self.s_samples
    }

    pub fn out0(&self) -> &[f64] {
        &self.out0
    }

    pub fn out1(&self) -> &[f64] {
        &self.out1
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn support(&self) -> Option<(i64, i64)> {
        self.support
    }

    /// Largest `|out0 + out1 - power|`.
    pub fn power_defect(&self, power: f64) -> f64 {
        self.out0
            .iter()
            .zip(&self.out1)
            .map(|(a, b)| (a + b - power).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `s,out0,out1,offset`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        csvio::write_table(
            path,
            &["s", "out0", "out1", "offset"],
            (0..self.s_samples.len())
                .map(|k| vec![self.s_samples[k], self.out0[k], self.out1[k], self.offset[k]]),
        )
    }
}

/// Boltzmann-weighted trace built literally from [`run_mode`], one grid
/// simulation per `(n, s)`. Slow; [`thermal_trace`] is the production path.
pub fn thermal_trace_by_modes(
    ens: &ThermalEnsemble,
    cfg: &InterferometerConfig,
    s_grid: &[f64],
) -> Result<IntensityTrace> {
    let readings: Vec<Vec<DetectorReading>> = ens
        .weights()
        .par_iter()
        .enumerate()
        .map(|(n, _)| s_grid.iter().map(|&s| run_mode(n, cfg, s)).collect())
        .collect::<Result<_>>()?;
    let mut out0 = vec![0.0; s_grid.len()];
    let mut out1 = vec![0.0; s_grid.len()];
    let mut offset = vec![0.0; s_grid.len()];
    for (n, row) in readings.iter().enumerate() {
        let p = ens.weight(n);
        for (k, r) in row.iter().enumerate() {
            out0[k] += p * r.out0;
            out1[k] += p * r.out1;
            offset[k] += p * r.offset;
        }
    }
    Ok(IntensityTrace {
        s_samples: s_grid.to_vec(),
        out0,
        out1,
        offset,
        phase_offset: cfg.phase_offset,
        support: None,
    })
}

/// Per-mode interference data, aggregated over `d = k - m`.
struct ModeSums {
    // cross[d + k_span] = sum_{k - m = d} conj(a_k) b_m <A_k|B_m>
    cross: Vec<Complex64>,
    up: Vec<Complex64>,
    low: Vec<Complex64>,
}

fn gram(left: &[SampledField], right: &[SampledField], dx: f64) -> Vec<Vec<Complex64>> {
    left.par_iter()
        .map(|a| right.iter().map(|b| dot(a.values(), b.values()) * dx).collect())
        .collect()
}

/// Accumulates `sum_{i,j} conj(x_i) y_j G_ij` into bins `i - j`.
fn diagonal_sums(x: &[Complex64], y: &[Complex64], g: &[Vec<Complex64>]) -> Vec<Complex64> {
    let span = y.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() + y.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        if *xi == Complex64::new(0.0, 0.0) {
            continue;
        }
        let xc = xi.conj();
        for (j, yj) in y.iter().enumerate() {
            out[i + span - j] += xc * yj * g[i][j];
        }
    }
    out
}

fn eval_bins(bins: &[Complex64], span: usize, s: f64) -> Complex64 {
    bins.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (idx, c)| {
        let d = idx as f64 - span as f64;
        acc + c * Complex64::from_polar(1.0, s * d)
    })
}

/// Boltzmann-weighted trace over `s_grid`.
///
/// Every arm is linear in the mode coefficients, so with
/// `A_k = Process(phi_k)` and `B_m` the final eigenmodes,
/// `u_up = sum_k e^{-is(k+1/2)} a_k A_k` and
/// `u_low = sum_m e^{-is(m+1/2)} b_m B_m`, where `a` projects `phi_n` and
/// `b` projects `Process(phi_n)` onto the final basis. Overlaps and powers
/// then reduce to Gram matrices of the grid functions `A_k`, `B_m`
/// contracted along the diagonals `k - m`; the result equals the
/// mode-by-mode grid simulation of [`run_mode`] to rounding, at a cost
/// independent of the number of samples.
pub fn thermal_trace(
    ens: &ThermalEnsemble,
    cfg: &InterferometerConfig,
    s_grid: &[f64],
) -> Result<IntensityTrace> {
    let k_max = cfg.basis.n_max();
    if ens.n_cut() > k_max {
        return Err(Error::DimensionMismatch(format!(
            "ensemble needs {} modes, basis holds {}",
            ens.n_cut() + 1,
            k_max + 1
        )));
    }
    let dx = cfg.grid().dx();
    let a_fields: Vec<SampledField> = (0..=k_max)
        .into_par_iter()
        .map(|k| cfg.apply_process(&cfg.basis.mode(k)))
        .collect::<Result<_>>()?;
    let b_fields: Vec<SampledField> = (0..=k_max)
        .into_par_iter()
        .map(|m| cfg.final_mode(m))
        .collect::<Result<_>>()?;
    let w_cross = gram(&a_fields, &b_fields, dx);
    let w_up = gram(&a_fields, &a_fields, dx);
    let w_low = gram(&b_fields, &b_fields, dx);

    let per_mode: Vec<ModeSums> = (0..=ens.n_cut())
        .into_par_iter()
        .map(|n| {
            let phi = cfg.basis.mode(n);
            let a = cfg.project_checked(&phi)?;
            let b = cfg.project_final(&a_fields[n])?;
            Ok(ModeSums {
                cross: diagonal_sums(&a, &b, &w_cross),
                up: diagonal_sums(&a, &a, &w_up),
                low: diagonal_sums(&b, &b, &w_low),
            })
        })
        .collect::<Result<_>>()?;

    let bins = 2 * k_max + 1;
    let mut cross = vec![Complex64::new(0.0, 0.0); bins];
    let mut up = vec![Complex64::new(0.0, 0.0); bins];
    let mut low = vec![Complex64::new(0.0, 0.0); bins];
    for (n, sums) in per_mode.iter().enumerate() {
        let p = ens.weight(n);
        for i in 0..bins {
            cross[i] += sums.cross[i] * p;
            up[i] += sums.up[i] * p;
            low[i] += sums.low[i] * p;
        }
    }

    let rot = Complex64::from_polar(1.0, cfg.phase_offset);
    let rows: Vec<(f64, f64, f64)> = s_grid
        .par_iter()
        .map(|&s| {
            let x = eval_bins(&cross, k_max, s);
            let p_up = eval_bins(&up, k_max, s).re;
            let p_low = eval_bins(&low, k_max, s).re;
            let interference = (rot * x).re / 2.0;
            let base = (p_up + p_low) / 4.0;
            (base + interference, base - interference, base)
        })
        .collect();

    Ok(IntensityTrace {
        s_samples: s_grid.to_vec(),
        out0: rows.iter().map(|r| r.0).collect(),
        out1: rows.iter().map(|r| r.1).collect(),
        offset: rows.iter().map(|r| r.2).collect(),
        phase_offset: cfg.phase_offset,
        support: Some((-(ens.n_cut() as i64), k_max as i64)),
    })
}

/// Combines a `theta = 0` and a `theta = pi/2` trace into `G(s)`,
/// normalized by the measured interference amplitude at `s = 0`.
pub fn reconstruct_charfn(re_trace: &IntensityTrace, im_trace: &IntensityTrace) -> Result<CharFnTrace> {
    if re_trace.s_samples != im_trace.s_samples {
        return Err(Error::GridMismatch);
    }
    let k0 = re_trace
        .s_samples
        .iter()
        .position(|&s| s == 0.0)
        .ok_or_else(|| Error::NormalizationFailure("trace has no s = 0 sample".into()))?;
    let norm = re_trace.out0[k0] - re_trace.offset[k0];
    let ratio = norm / re_trace.offset[k0];
    if !ratio.is_finite() || (ratio - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NormalizationFailure(format!(
            "interference amplitude {norm} at s = 0 does not match offset {}",
            re_trace.offset[k0]
        )));
    }
    let values = (0..re_trace.s_samples.len())
        .map(|k| {
            Complex64::new(
                re_trace.out0[k] - re_trace.offset[k],
                im_trace.out0[k] - im_trace.offset[k],
            ) / norm
        })
        .collect();
    let trace = CharFnTrace::new(re_trace.s_samples.clone(), values)?;
    Ok(match re_trace.support.or(im_trace.support) {
        Some((lo, hi)) => trace.with_support(lo, hi),
        None => trace,
    })
}

/// Runs both PZT settings and reconstructs `G(s)`.
pub fn measure_charfn(
    ens: &ThermalEnsemble,
    cfg: &InterferometerConfig,
    s_grid: &[f64],
) -> Result<(IntensityTrace, IntensityTrace, CharFnTrace)> {
    let re = thermal_trace(ens, &cfg.with_phase_offset(0.0)?, s_grid)?;
    let im = thermal_trace(ens, &cfg.with_phase_offset(PI / 2.0)?, s_grid)?;
    let g = reconstruct_charfn(&re, &im)?;
    Ok((re, im, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::thermal_weights;
    use crate::transition::process_from_grid_rect;
    use crate::workstats::{charfn_direct, uniform_s_grid};

    fn small_basis(n: usize) -> HgBasis {
        HgBasis::new(GridSpec::for_max_mode(n), n).unwrap()
    }

    #[test]
    fn identity_process_is_fully_constructive() {
        let cfg = InterferometerConfig::new(
            Process::Identity,
            FinalBasis::SameAsInitial,
            0.0,
            small_basis(10),
        )
        .unwrap();
        for &s in &[0.0, 0.7, 2.0] {
            let r = run_mode(3, &cfg, s).unwrap();
            assert!((r.out0 - 1.0).abs() < 1e-10);
            assert!(r.out1.abs() < 1e-10);
            assert!((r.offset - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn displaced_basis_needs_plain_quench() {
        let b = small_basis(6);
        let mask = SampledField::phase_mask(*b.grid(), |x| x);
        assert!(InterferometerConfig::new(Process::Mask(mask), FinalBasis::DisplacedBy(1.0), 0.0, b).is_err());
    }

    #[test]
    fn ground_mode_reads_real_part() {
        let cfg = InterferometerConfig::quench(1.0, 0, 0.0).unwrap();
        let t = build_matrix(1.0, 0, 1e-12).unwrap();
        let ens = ThermalEnsemble::ground_state();
        for &s in &[0.3, 1.1, 4.0] {
            let g = charfn_direct(&ens, &t, s).unwrap();
            let r = run_mode(0, &cfg, s).unwrap();
            assert!((2.0 * (r.out0 - r.offset) - g.re).abs() < 1e-6);
            assert!((r.out0 + r.out1 - 1.0).abs() < 1e-9);
            let im = run_mode(0, &cfg.with_phase_offset(PI / 2.0).unwrap(), s).unwrap();
            assert!((2.0 * (im.out0 - im.offset) - g.im).abs() < 1e-6);
        }
    }

    #[test]
    fn factorized_trace_equals_mode_simulation() {
        let ens = thermal_weights(1.5, 1e-4).unwrap();
        let s = uniform_s_grid(7);
        for theta in [0.0, PI / 2.0, 0.4] {
            let cfg = InterferometerConfig::quench(1.2, ens.n_cut(), theta).unwrap();
            let fast = thermal_trace(&ens, &cfg, &s).unwrap();
            let slow = thermal_trace_by_modes(&ens, &cfg, &s).unwrap();
            for k in 0..s.len() {
                assert!((fast.out0()[k] - slow.out0()[k]).abs() < 1e-12);
                assert!((fast.out1()[k] - slow.out1()[k]).abs() < 1e-12);
                assert!((fast.offset()[k] - slow.offset()[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mask_process_matches_quench() {
        let ens = thermal_weights(1.0, 1e-5).unwrap();
        let q = 0.8;
        let quench = InterferometerConfig::quench(q, ens.n_cut(), 0.0).unwrap();
        let basis = quench.basis().clone();
        let mask = SampledField::phase_mask(*basis.grid(), |x| -q * x);
        let masked =
            InterferometerConfig::new(Process::Mask(mask.clone()), FinalBasis::SameAsInitial, 0.0, basis.clone())
                .unwrap();
        let s = uniform_s_grid(9);
        let (_, _, g1) = measure_charfn(&ens, &quench, &s).unwrap();
        let (_, _, g2) = measure_charfn(&ens, &masked, &s).unwrap();
        assert!(g1.max_distance(&g2).unwrap() < 1e-9);

        let t = process_from_grid_rect(&mask, basis.n_max(), ens.n_cut(), basis.grid()).unwrap();
        let direct = uniform_s_grid(9)
            .iter()
            .map(|&s| charfn_direct(&ens, &t, s).unwrap())
            .collect::<Vec<_>>();
        for (a, b) in g2.values().iter().zip(&direct) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn matrix_process_matches_mask() {
        let q = 0.5;
        let basis = small_basis(30);
        let t = build_matrix(q, 4, 1e-12).unwrap();
        let mask = SampledField::phase_mask(*basis.grid(), |x| -q * x);
        let by_matrix =
            InterferometerConfig::new(Process::Matrix(t), FinalBasis::SameAsInitial, 0.0, basis.clone()).unwrap();
        let by_mask = InterferometerConfig::new(Process::Mask(mask), FinalBasis::SameAsInitial, 0.0, basis).unwrap();
        for &s in &[0.2, 1.9] {
            let a = run_mode(2, &by_matrix, s).unwrap();
            let b = run_mode(2, &by_mask, s).unwrap();
            assert!((a.out0 - b.out0).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruction_needs_origin_and_calibration() {
        let ens = thermal_weights(2.0, 1e-4).unwrap();
        let cfg = InterferometerConfig::quench(0.5, ens.n_cut(), 0.0).unwrap();
        let s = vec![0.5, 1.0];
        let t = thermal_trace(&ens, &cfg, &s).unwrap();
        assert!(matches!(
            reconstruct_charfn(&t, &t),
            Err(Error::NormalizationFailure(_))
        ));

        let s = uniform_s_grid(11);
        let re = thermal_trace(&ens, &cfg, &s).unwrap();
        let mut bad = re.clone();
        bad.offset.iter_mut().for_each(|o| *o *= 1.1);
        assert!(matches!(
            reconstruct_charfn(&bad, &re),
            Err(Error::NormalizationFailure(_))
        ));
        // two real-part traces: flagged by the Hermitian diagnostic
        let g = reconstruct_charfn(&re, &re).unwrap();
        assert!(g.hermitian_defect().unwrap() > 1e-3);
    }
}
