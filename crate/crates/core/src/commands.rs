//! Subcommand bodies. Each writes its CSV files under the configured output
//! directory and returns what the binary should print.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::csvio;
use crate::error::{Error, Result};
use crate::hermite::{GridSpec, HgBasis};
use crate::optics::{
    distance_mod_phase, frft_optical_matched, frft_spectral_with, propagation_distance, FrftOrder,
};
use crate::scenario::{run, Mode, ScenarioConfig, ScenarioResult};
use crate::thermo::{free_energy_delta, thermal_weights_with_cutoff, Spectrum};
use crate::transition::build_matrix;
use crate::verify::{run_suite, Suite};
use crate::workstats::{jarzynski_lhs, workdist_direct};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    /// Set when the command ran to completion but a numerical gate failed.
    pub failure: Option<String>,
}

impl CommandOutput {
    fn file(&mut self, path: PathBuf) {
        self.lines.push(format!("wrote {}", path.display()));
        self.files.push(path);
    }
}

fn write_scenario(res: &ScenarioResult, dir: &Path, charfn_name: &str, out: &mut CommandOutput) -> Result<()> {
    let p = dir.join(charfn_name);
    res.charfn.write_csv(&p)?;
    out.file(p);
    let p = dir.join("workdist.csv");
    res.dist.write_csv(&p)?;
    out.file(p);
    if let Some((re, im)) = &res.traces {
        let p = dir.join("intensity_theta0.csv");
        re.write_csv(&p)?;
        out.file(p);
        let p = dir.join("intensity_theta90.csv");
        im.write_csv(&p)?;
        out.file(p);
    }
    if let Some(g) = res.gamma {
        let p = dir.join("gamma.csv");
        let mut w = csvio::writer(&p)?;
        w.write_record(["gamma"])?;
        w.write_record([csvio::fmt(g)])?;
        w.flush()?;
        out.lines.push(format!("gamma = {g:.12}"));
        out.file(p);
    }
    out.warnings.extend(res.warnings.iter().cloned());
    Ok(())
}

/// `charfn.csv` and `workdist.csv` in the configured mode; the
/// interferometric mode also writes both intensity traces.
pub fn cmd_charfn(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    let res = run(cfg)?;
    let mut out = CommandOutput::default();
    out.lines.push(format!(
        "mode {} q0 {} beta_hw {} n_cut {} samples {}",
        res.mode,
        cfg.q0,
        cfg.beta_hw,
        res.n_cut,
        res.charfn.len()
    ));
    write_scenario(&res, &cfg.out_dir, "charfn.csv", &mut out)?;
    Ok(out)
}

/// `workdist.csv` only.
pub fn cmd_workdist(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    let res = run(cfg)?;
    let mut out = CommandOutput::default();
    let p = cfg.out_dir.join("workdist.csv");
    res.dist.write_csv(&p)?;
    out.lines.push(format!("mean work {:.12}", res.dist.mean()));
    out.file(p);
    out.warnings.extend(res.warnings);
    Ok(out)
}

/// Full optics pipeline regardless of the configured mode.
pub fn cmd_interf(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    cmd_charfn(&ScenarioConfig {
        mode: Mode::Interferometric,
        ..cfg.clone()
    })
}

/// Channel pipeline regardless of the configured mode.
pub fn cmd_open_charfn(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    let cfg = ScenarioConfig {
        mode: Mode::Open,
        ..cfg.clone()
    };
    let res = run(&cfg)?;
    let mut out = CommandOutput::default();
    out.lines.push(format!("open dimension {}", res.n_cut + 1));
    write_scenario(&res, &cfg.out_dir, "open_charfn.csv", &mut out)?;
    Ok(out)
}

/// Mean work and the Jarzynski sum at the configured cutoff.
pub fn cmd_jarzynski(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let n_cut = cfg.resolve_cutoff()?;
    let ens = thermal_weights_with_cutoff(cfg.beta_hw, n_cut)?;
    let t = build_matrix(cfg.q0, n_cut, 1e-12)?;
    let dist = workdist_direct(&ens, &t)?;
    let lhs = jarzynski_lhs(&dist, cfg.beta_hw);
    let df = free_energy_delta(Spectrum::HarmonicOscillator, Spectrum::HarmonicOscillator, cfg.beta_hw);
    let rhs = (-cfg.beta_hw * df).exp();
    let mut out = CommandOutput::default();
    out.lines.push(format!("n_cut {n_cut}"));
    out.lines.push(format!("mean work {:.12} (q0^2/2 = {:.12})", dist.mean(), cfg.q0 * cfg.q0 / 2.0));
    out.lines.push(format!("<exp(-beta u)> {lhs:.12}  exp(-beta dF) {rhs:.12}"));
    let p = cfg.out_dir.join("jarzynski.csv");
    csvio::write_table(
        &p,
        &["q0", "beta_hw", "n_cut", "mean_work", "exp_work_avg", "exp_free_energy"],
        [vec![cfg.q0, cfg.beta_hw, n_cut as f64, dist.mean(), lhs, rhs]],
    )?;
    out.file(p);
    Ok(out)
}

/// Eigenphase law of both FRFT implementations on modes `0..=n_max`.
pub fn cmd_frft_verify(out_dir: &Path, n_max: usize) -> Result<CommandOutput> {
    let alphas = [PI / 6.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
    let basis = HgBasis::new(GridSpec::new(2048, 30.0)?, n_max)?;
    let cases: Vec<(usize, f64)> = alphas
        .iter()
        .flat_map(|&a| (0..=n_max).map(move |n| (n, a)))
        .collect();
    let rows: Vec<Vec<f64>> = cases
        .par_iter()
        .map(|&(n, alpha)| {
            let phi = basis.mode(n);
            let expect = phi.scaled(num_complex::Complex64::from_polar(1.0, -alpha * (n as f64 + 0.5)));
            let spec = frft_spectral_with(&basis, &phi, alpha)?.sub(&expect)?.norm();
            let opt = distance_mod_phase(&frft_optical_matched(&phi, FrftOrder::new(alpha)?)?, &expect)?;
            Ok(vec![n as f64, alpha, spec, opt])
        })
        .collect::<Result<_>>()?;
    let mut out = CommandOutput::default();
    let p = out_dir.join("frft_verify.csv");
    csvio::write_table(&p, &["n", "alpha", "spectral_err", "optical_err"], rows.clone())?;
    out.file(p);
    let spec = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
    let opt = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    out.lines.push(format!("max spectral error {spec:.3e}, max optical error {opt:.3e}"));
    if spec > 1e-9 || opt > 1e-4 {
        return Err(Error::GateFailure(format!(
            "FRFT eigenphase law: spectral {spec:e} (limit 1e-9), optical {opt:e} (limit 1e-4)"
        )));
    }
    Ok(out)
}

/// Physical quantities of an FRFT stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitsReport {
    /// Free-space distance on each side of the lens, mm.
    pub z_mm: f64,
    /// Wavenumber `2 pi / lambda`, rad per mm.
    pub k_per_mm: f64,
    /// Physical length of one dimensionless transverse unit, mm; `None`
    /// at `alpha = pi`, where the stage is a pure mirror image.
    pub x_scale_mm: Option<f64>,
}

pub fn units(lambda_nm: f64, f_mm: f64, alpha: f64) -> Result<UnitsReport> {
    if !(lambda_nm > 0.0 && lambda_nm.is_finite()) {
        return Err(Error::Config(format!("wavelength must be positive, got {lambda_nm}")));
    }
    if !(f_mm > 0.0 && f_mm.is_finite()) {
        return Err(Error::Config(format!("focal length must be positive, got {f_mm}")));
    }
    if !(alpha > 0.0 && alpha < 2.0 * PI) {
        return Err(Error::Config(format!("alpha must lie in (0, 2 pi), got {alpha}")));
    }
    let k = 2.0 * PI / (lambda_nm * 1e-6);
    let reduced = if alpha > PI { alpha - PI } else { alpha };
    let x_scale_mm = (alpha != PI).then(|| (f_mm * reduced.sin() / k).sqrt());
    Ok(UnitsReport {
        z_mm: propagation_distance(alpha, f_mm),
        k_per_mm: k,
        x_scale_mm,
    })
}

pub fn cmd_units(lambda_nm: f64, f_mm: f64, alpha: f64) -> Result<CommandOutput> {
    let r = units(lambda_nm, f_mm, alpha)?;
    let mut out = CommandOutput::default();
    out.lines.push(format!("z_alpha = {:.9} mm", r.z_mm));
    out.lines.push(format!("k = {:.9e} rad/mm", r.k_per_mm));
    match r.x_scale_mm {
        Some(s) => out.lines.push(format!("x unit = {s:.9e} mm")),
        None => out.lines.push("x unit = any (alpha = pi images x -> -x)".to_string()),
    }
    Ok(out)
}

/// Runs a suite, writes its report, and fails if any check failed.
pub fn cmd_verify(suite: Suite, out_dir: &Path) -> Result<CommandOutput> {
    let report = run_suite(suite, Some(out_dir))?;
    let mut out = CommandOutput::default();
    out.lines.extend(report.table().lines().map(str::to_string));
    out.file(out_dir.join(format!("verify_{}.csv", suite.name())));
    if !report.passed() {
        let names: Vec<String> = report.failures().iter().map(|c| c.name.clone()).collect();
        out.failure = Some(format!("suite {} failed: {}", suite.name(), names.join("; ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_examples() {
        let r = units(633.0, 100.0, PI / 2.0).unwrap();
        assert_eq!(r.z_mm, 100.0);
        let r = units(633.0, 100.0, PI).unwrap();
        assert_eq!(r.z_mm, 200.0);
        assert!(r.x_scale_mm.is_none());
        assert!(units(633.0, 100.0, 1e-9).unwrap().z_mm < 1e-15);
        assert!(units(-1.0, 100.0, 1.0).is_err());
        assert!(units(633.0, 100.0, 0.0).is_err());
    }
}
