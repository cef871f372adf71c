//! Acceptance suites run by `worklab verify`.
//!
//! Every check records a measured value against a tolerance. The report
//! and the per-scenario artifacts contain no timings, so repeated runs
//! write byte-identical files.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::csvio;
use crate::error::{Error, Result};
use crate::hermite::{GridSpec, HgBasis};
use crate::interferometer::measure_charfn;
use crate::openmaps::{
    ancilla_charfn, ancilla_state, apply_channel, diagonal_basis, diagonal_polarization,
    displacement, eigenbasis, exp_work_average, hv_basis, joint_prob_open, joint_prob_table,
    kraus_from_environment, open_charfn, oscillator_hamiltonian, pauli_expectations, projectors,
    truncation_margin, DensityMatrix, JointUnitary, KrausChannel, TruncatedOperator,
};
use crate::optics::{
    distance_mod_phase, frft_optical_matched, frft_spectral_with, propagation_distance,
    split_step_evolve, FrftOrder, IndexChannel,
};
use crate::scenario::{interferometer_config, ScenarioConfig};
use crate::thermo::{thermal_weights, thermal_weights_with_cutoff};
use crate::transition::{build_matrix, build_matrix_quadrature, coeff_closed};
use crate::workstats::{
    charfn_direct, charfn_trace, default_sample_count, fluctuation_cutoff, jarzynski_lhs,
    uniform_s_grid, workdist_direct, workdist_from_trace,
};

/// The two parameter sets of the paper's work-distribution figure.
pub const FIGURE_PARAMS: [(f64, f64); 2] = [(1.0, 0.1), (3.0, 1.0)];

/// Missing-mass tolerance for the cutoffs used by the suites.
pub const SUITE_TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fast,
    Full,
    Stress,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fast" => Ok(Suite::Fast),
            "full" => Ok(Suite::Full),
            "stress" => Ok(Suite::Stress),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Fast => "fast",
            Suite::Full => "full",
            Suite::Stress => "stress",
        }
    }
}

/// One measured quantity. `value <= tolerance` passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(criterion: u8, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            tolerance,
        }
    }

    /// Checks a boolean condition, recorded as 0 (true) or 1 (false).
    pub fn flag(criterion: u8, name: impl Into<String>, ok: bool) -> Self {
        Self::new(criterion, name, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn criterion_passed(&self, k: u8) -> Option<bool> {
        let mut any = false;
        let mut ok = true;
        for c in self.checks.iter().filter(|c| c.criterion == k) {
            any = true;
            ok &= c.passed();
        }
        any.then_some(ok)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csvio::writer(path)?;
        w.write_record(["criterion", "check", "value", "tolerance", "pass"])?;
        for c in &self.checks {
            w.write_record([
                c.criterion.to_string(),
                c.name.clone(),
                csvio::fmt(c.value),
                csvio::fmt(c.tolerance),
                if c.passed() { "PASS" } else { "FAIL" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line per check, plus a summary line.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {:<4} {:<58} {:>11.3e} <= {:.1e}\n",
                c.criterion,
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            ));
        }
        let failed = self.failures().len();
        out.push_str(&format!(
            "suite {}: {} checks, {} failed\n",
            self.suite.name(),
            self.checks.len(),
            failed
        ));
        out
    }
}

fn tag(q0: f64, beta: f64) -> String {
    format!("q0={q0} beta={beta}")
}

/// Closed form against grid quadrature for `m, n <= m_max`.
pub fn closed_vs_quadrature(m_max: usize, q_values: &[f64]) -> Result<Vec<Check>> {
    let grid = GridSpec::for_max_mode(m_max);
    let mut out = Vec::new();
    for &q in q_values {
        let quad = build_matrix_quadrature(q, m_max, m_max, &grid)?;
        let mut worst: f64 = 0.0;
        for m in 0..=m_max {
            for n in 0..=m_max {
                worst = worst.max((quad.get(m, n) - coeff_closed(m, n, q)).norm());
            }
        }
        out.push(Check::new(1, format!("closed vs quadrature q0={q} m,n<={m_max}"), worst, 1e-8));
    }
    Ok(out)
}

/// Column unitarity for every `n <= n_cut`.
pub fn unitarity(q0: f64, beta: f64, n_cut: usize, label: &str) -> Result<Vec<Check>> {
    let t = build_matrix(q0, n_cut, 1e-12)?;
    Ok(vec![Check::new(
        2,
        format!("unitarity {} n<={n_cut}{label}", tag(q0, beta)),
        t.max_unitarity_defect(),
        1e-8,
    )])
}

/// `G(0)`, Hermitian symmetry, normalization and positivity of `P`, and
/// the inverse-transform round trip.
pub fn normalization_and_duality(q0: f64, beta: f64, n_cut: usize, out_dir: Option<&Path>) -> Result<Vec<Check>> {
    let ens = thermal_weights_with_cutoff(beta, n_cut)?;
    let t = build_matrix(q0, n_cut, 1e-12)?;
    let dist = workdist_direct(&ens, &t)?;
    let m = default_sample_count(t.m_max(), n_cut);
    let trace = charfn_trace(&ens, &t, m)?;
    let label = tag(q0, beta);
    let g0 = trace.at_zero().unwrap_or(Complex64::new(f64::NAN, 0.0));
    let lowest = dist.probs().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out = vec![
        Check::new(3, format!("|G(0) - 1| {label}"), (g0 - 1.0).norm(), 1e-10),
        Check::new(3, format!("G(2pi - s) vs conj G(s) {label}"), trace.hermitian_defect()?, 1e-10),
        Check::new(3, format!("|sum P - 1| {label}"), (dist.total() - 1.0).abs(), 1e-9),
        Check::new(3, format!("negative part of P {label}"), (-lowest).max(0.0), 0.0),
    ];
    let back = workdist_from_trace(&trace)?;
    out.push(Check::new(4, format!("inverse transform vs direct P {label}"), back.max_distance(&dist), 1e-9));
    if let Some(dir) = out_dir {
        let stem = format!("q0_{q0}_beta_{beta}");
        trace.write_csv(&dir.join(format!("{stem}_charfn.csv")))?;
        dist.write_csv(&dir.join(format!("{stem}_workdist.csv")))?;
    }
    Ok(out)
}

/// Mean work and the Jarzynski sum at the fluctuation-aware cutoff.
pub fn fluctuation_relations(q0: f64, beta: f64) -> Result<Vec<Check>> {
    let n_cut = fluctuation_cutoff(q0, beta, SUITE_TAIL_TOL)?;
    let ens = thermal_weights_with_cutoff(beta, n_cut)?;
    let t = build_matrix(q0, n_cut, 1e-12)?;
    let dist = workdist_direct(&ens, &t)?;
    let label = tag(q0, beta);
    Ok(vec![
        Check::new(5, format!("mean work - q0^2/2 {label}"), (dist.mean() - q0 * q0 / 2.0).abs(), 1e-6),
        Check::new(5, format!("Jarzynski sum - 1 {label} n_cut={n_cut}"), (jarzynski_lhs(&dist, beta) - 1.0).abs(), 2e-6),
    ])
}

/// Eigenphase law of the spectral and optical FRFT.
pub fn frft_checks(n_max: usize, alphas: &[f64]) -> Result<Vec<Check>> {
    let grid = GridSpec::new(2048, 30.0)?;
    let basis = HgBasis::new(grid, n_max)?;
    let cases: Vec<(usize, f64)> = alphas
        .iter()
        .flat_map(|&a| (0..=n_max).map(move |n| (n, a)))
        .collect();
    let errs: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|&(n, alpha)| {
            let phi = basis.mode(n);
            let expect = phi.scaled(Complex64::from_polar(1.0, -alpha * (n as f64 + 0.5)));
            let spec = frft_spectral_with(&basis, &phi, alpha)?;
            let opt = frft_optical_matched(&phi, FrftOrder::new(alpha)?)?;
            Ok((spec.sub(&expect)?.norm(), distance_mod_phase(&opt, &expect)?))
        })
        .collect::<Result<_>>()?;
    let spec_worst = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let opt_worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let f = 0.37;
    Ok(vec![
        Check::new(6, format!("spectral FRFT eigenphase n<={n_max}"), spec_worst, 1e-9),
        Check::new(6, format!("optical vs eigenphase L2 n<={n_max}"), opt_worst, 1e-4),
        Check::flag(6, "z at quarter turn equals f", propagation_distance(PI / 2.0, f) == f),
    ])
}

/// Split-step harmonic channel: fidelity, eigenphase and convergence order.
pub fn split_step_checks() -> Result<Vec<Check>> {
    let grid = GridSpec::new(128, 10.0)?;
    let basis = HgBasis::new(grid, 5)?;
    let length = 1.0;
    let ch = IndexChannel::harmonic(grid, length, 1)?;
    let ch = ch.with_steps(ch.min_steps())?;
    let mut worst_fid: f64 = 0.0;
    let mut worst_phase: f64 = 0.0;
    for n in 0..=5 {
        let phi = basis.mode(n);
        let out = split_step_evolve(&phi, &ch)?;
        let ov = crate::hermite::overlap(&phi, &out)?;
        worst_fid = worst_fid.max(1.0 - ov.norm_sqr());
        let expect = -(n as f64 + 0.5) * length;
        let err = (ov.arg() - expect + PI).rem_euclid(2.0 * PI) - PI;
        worst_phase = worst_phase.max(err.abs());
    }
    let phi = basis.mode(2);
    let exact = phi.scaled(Complex64::from_polar(1.0, -2.5 * length));
    let base = ch.min_steps();
    let err_at = |steps: usize| -> Result<f64> {
        let out = split_step_evolve(&phi, &ch.with_steps(steps)?)?;
        Ok(out.sub(&exact)?.norm())
    };
    let (e1, e2, e4) = (err_at(base)?, err_at(2 * base)?, err_at(4 * base)?);
    let r1 = e1 / e2;
    let r2 = e2 / e4;
    Ok(vec![
        Check::new(7, "stationary-state infidelity n<=5", worst_fid, 1e-3),
        Check::new(7, "eigenphase error n<=5 (rad)", worst_phase, 1e-3),
        Check::new(7, format!("step-halving ratio {r1:.3} - 4"), (r1 - 4.0).abs(), 0.5),
        Check::new(7, format!("step-halving ratio {r2:.3} - 4"), (r2 - 4.0).abs(), 0.5),
    ])
}

/// Reconstruct `G` from simulated traces and compare with the closed form.
pub fn end_to_end(q0: f64, beta: f64, out_dir: Option<&Path>) -> Result<Vec<Check>> {
    let n_cut = fluctuation_cutoff(q0, beta, SUITE_TAIL_TOL)?;
    let ens = thermal_weights_with_cutoff(beta, n_cut)?;
    let cfg = ScenarioConfig {
        q0,
        beta_hw: beta,
        n_cut: Some(n_cut),
        ..Default::default()
    };
    let icfg = interferometer_config(&cfg, n_cut)?;
    let m = default_sample_count(icfg.basis().n_max(), n_cut);
    let s = uniform_s_grid(m);
    let (re, im, g) = measure_charfn(&ens, &icfg, &s)?;
    let t = build_matrix(q0, n_cut, 1e-12)?;
    let worst_g = s
        .par_iter()
        .zip(g.values())
        .map(|(&s, v)| Ok((charfn_direct(&ens, &t, s)? - v).norm()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let dist = workdist_from_trace(&g)?;
    let direct = workdist_direct(&ens, &t)?;
    if let Some(dir) = out_dir {
        let stem = format!("q0_{q0}_beta_{beta}");
        re.write_csv(&dir.join(format!("{stem}_intensity_theta0.csv")))?;
        im.write_csv(&dir.join(format!("{stem}_intensity_theta90.csv")))?;
        g.write_csv(&dir.join(format!("{stem}_charfn_interf.csv")))?;
    }
    let label = tag(q0, beta);
    Ok(vec![
        Check::new(8, format!("interferometric G vs closed form {label}"), worst_g, 1e-6),
        Check::new(8, format!("interferometric P vs direct P {label}"), dist.max_distance(&direct), 1e-6),
    ])
}

/// Closed/open consistency on a `dim`-level truncation.
pub fn open_checks(q0: f64, beta: f64, dim: usize) -> Result<Vec<Check>> {
    let margin = truncation_margin(q0);
    let trusted = dim - margin;
    let rho = DensityMatrix::thermal(beta, dim)?;
    let h = oscillator_hamiltonian(dim);
    let kick = displacement(q0, dim);
    let single = KrausChannel::unitary(kick.clone())?;

    // closed reference on the trusted levels
    let ens = thermal_weights_with_cutoff(beta, trusted - 1)?;
    let t = build_matrix(q0, trusted - 1, 1e-12)?;
    let probes = uniform_s_grid(16);
    let mut closed_gap: f64 = 0.0;
    for &s in &probes {
        let open = open_charfn(&single, &rho, Complex64::new(s, 0.0), &h, &h)?;
        closed_gap = closed_gap.max((open - charfn_direct(&ens, &t, s)?).norm());
    }

    let joint = JointUnitary::polarization_controlled(kick);
    let xi = diagonal_polarization();
    let deph = kraus_from_environment(&joint, &xi, &hv_basis())?;
    let deph45 = kraus_from_environment(&joint, &xi, &diagonal_basis())?;
    let (vecs, levels) = eigenbasis(&h)?;
    let proj = projectors(&vecs);
    let table = joint_prob_table(&deph, &rho, &vecs)?;
    // spot-check the fast table against the trace formula
    let mut table_gap: f64 = 0.0;
    for (m, n) in [(0, 0), (1, 0), (0, 3), (5, 2)] {
        table_gap = table_gap.max((joint_prob_open(m, n, &deph, &rho, &proj)? - table[(m, n)]).abs());
    }
    let u_i: Vec<f64> = (0..dim).map(|n| n as f64 + 0.5).collect();
    let avg = exp_work_average(&table, &u_i, &levels, beta);
    let gamma = crate::openmaps::gamma_value(&deph, &rho, beta, &h, &h)?;

    let action_gap = apply_channel(&deph, &rho)?.distance(&apply_channel(&deph45, &rho)?);

    let s = 0.8;
    let v = free_evolution(dim, s);
    let rho_a = ancilla_state(&joint, &v, &v, &rho, &xi)?;
    let g = open_charfn(&deph, &rho, Complex64::new(s, 0.0), &h, &h)?;
    let (z, y) = pauli_expectations(&rho_a);

    let label = format!("{} D={dim}", tag(q0, beta));
    Ok(vec![
        Check::new(9, format!("single-Kraus G vs closed G {label}"), closed_gap, 1e-8),
        Check::new(9, "fast joint table vs trace formula", table_gap, 1e-12),
        Check::new(9, format!("<e^-beta u> vs gamma (dephasing) {label}"), (avg - gamma).abs(), 1e-9),
        Check::new(9, "channel action H/V vs +-45 Kraus sets", action_gap, 1e-10),
        Check::new(9, "ancilla <sigma_z> vs Re G", (z - g.re).abs(), 1e-10),
        Check::new(9, "ancilla <sigma_y> vs -Im G", (y + g.im).abs(), 1e-10),
        Check::new(9, "ancilla readout vs open G", (ancilla_charfn(&rho_a) - g).norm(), 1e-10),
    ])
}

/// `e^{-i s H}` on `d` levels.
fn free_evolution(d: usize, s: f64) -> TruncatedOperator {
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -s * (i as f64 + 0.5))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    TruncatedOperator::new(m).expect("finite")
}

/// Runs a suite. Artifacts go to `out_dir` when given.
pub fn run_suite(suite: Suite, out_dir: Option<&Path>) -> Result<Report> {
    let mut checks = Vec::new();
    match suite {
        Suite::Fast | Suite::Full => {
            let full = suite == Suite::Full;
            checks.extend(closed_vs_quadrature(20, &[0.5, 1.0, 3.0])?);
            for (q, b) in FIGURE_PARAMS {
                let n_cut = thermal_weights(b, SUITE_TAIL_TOL)?.n_cut();
                checks.extend(unitarity(q, b, n_cut, "")?);
            }
            for (q, b) in FIGURE_PARAMS {
                let n_cut = thermal_weights(b, SUITE_TAIL_TOL)?.n_cut();
                checks.extend(normalization_and_duality(q, b, n_cut, out_dir)?);
            }
            for (q, b) in FIGURE_PARAMS {
                checks.extend(fluctuation_relations(q, b)?);
            }
            if full {
                checks.extend(frft_checks(10, &[PI / 6.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0])?);
            } else {
                checks.extend(frft_checks(4, &[PI / 4.0, PI / 2.0])?);
            }
            checks.extend(split_step_checks()?);
            let e2e: &[(f64, f64)] = if full { &FIGURE_PARAMS } else { &FIGURE_PARAMS[1..] };
            for &(q, b) in e2e {
                checks.extend(end_to_end(q, b, out_dir)?);
            }
            checks.extend(open_checks(1.0, 1.0, 64)?);
        }
        Suite::Stress => {
            let (q, b) = FIGURE_PARAMS[0];
            let n_cut = thermal_weights(b, 1e-6)?.n_cut();
            checks.extend(unitarity(q, b, n_cut, " (thermal tail 1e-6)")?);
            checks.extend(unitarity(q, b, 150, "")?);
            checks.extend(normalization_and_duality(q, b, n_cut, out_dir)?);
            checks.extend(normalization_and_duality(q, b, 150, None)?);
            checks.extend(fluctuation_relations(q, b)?);
            checks.extend(fluctuation_relations(FIGURE_PARAMS[1].0, FIGURE_PARAMS[1].1)?);
        }
    }
    let report = Report { suite, checks };
    if let Some(dir) = out_dir {
        report.write_csv(&dir.join(format!("verify_{}.csv", suite.name())))?;
    }
    Ok(report)
}
