//! Scenario configuration and the three ways of producing `G(s)` and
//! `P(zeta)`: directly from the closed form, from simulated interferometer
//! traces, or from a Kraus channel.
//!
//! Config files are flat `key = value` text with `#` comments:
//!
//! ```text
//! q0 = 1.0
//! beta_hw = 0.1
//! mode = interferometric
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{GridSpec, HgBasis};
use crate::interferometer::{
    measure_charfn, FinalBasis, IntensityTrace, InterferometerConfig, Process, BASIS_MARGIN,
};
use crate::openmaps::{
    gamma_value, joint_prob_table, oscillator_hamiltonian, truncation_margin, ChannelSpec,
    DensityMatrix, FinalHamiltonian, KrausChannel, KrausTerm, OpenCharFn, DEFAULT_DIM,
};
use crate::thermo::{thermal_weights_with_cutoff, DEFAULT_TAIL_TOL};
use crate::transition::build_matrix;
use crate::workstats::{
    charfn_from_dist, default_sample_count, fluctuation_cutoff, uniform_s_grid, workdist_direct,
    workdist_from_trace, CharFnTrace, WorkDist,
};

/// Values reported from an open-dynamics run may move by at most this much
/// when the truncation dimension is doubled.
pub const DOUBLING_TOL: f64 = 1e-8;
const DOUBLING_PROBES: usize = 8;
const LEVEL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Analytic,
    Interferometric,
    Open,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Ok(Mode::Analytic),
            "interferometric" | "interf" => Ok(Mode::Interferometric),
            "open" => Ok(Mode::Open),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Interferometric => "interferometric",
            Mode::Open => "open",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub q0: f64,
    pub beta_hw: f64,
    /// Missing Boltzmann-weighted mass allowed by the automatic cutoff.
    pub tail_tol: f64,
    /// Explicit level cutoff; overrides `tail_tol`.
    pub n_cut: Option<usize>,
    pub s_samples: Option<usize>,
    pub grid_points: Option<usize>,
    pub grid_half_width: Option<f64>,
    pub mode: Mode,
    pub channel: Option<PathBuf>,
    /// Truncation dimension for open mode without a channel file.
    pub dim: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            q0: 1.0,
            beta_hw: 0.1,
            tail_tol: DEFAULT_TAIL_TOL,
            n_cut: None,
            s_samples: None,
            grid_points: None,
            grid_half_width: None,
            mode: Mode::Analytic,
            channel: None,
            dim: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: bad value '{}' for {key}", value.trim())))
}

impl ScenarioConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "q0" => cfg.q0 = parse_value(key, value, line_no)?,
                "beta_hw" => cfg.beta_hw = parse_value(key, value, line_no)?,
                "tail_tol" => cfg.tail_tol = parse_value(key, value, line_no)?,
                "n_cut" | "n_max" => cfg.n_cut = Some(parse_value(key, value, line_no)?),
                "s_samples" => cfg.s_samples = Some(parse_value(key, value, line_no)?),
                "grid_points" => cfg.grid_points = Some(parse_value(key, value, line_no)?),
                "grid_half_width" => cfg.grid_half_width = Some(parse_value(key, value, line_no)?),
                "mode" => cfg.mode = value.parse()?,
                "channel" => cfg.channel = Some(base_dir.join(value)),
                "dim" => cfg.dim = Some(parse_value(key, value, line_no)?),
                "out_dir" => cfg.out_dir = base_dir.join(value),
                other => {
                    return Err(Error::Config(format!("line {line_no}: unknown key '{other}'")))
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q0.is_finite() && (0.0..=10.0).contains(&self.q0)) {
            return Err(Error::Config(format!("q0 must lie in [0, 10], got {}", self.q0)));
        }
        if !(self.beta_hw > 0.0 && self.beta_hw.is_finite()) {
            return Err(Error::Config(format!("beta_hw must be positive, got {}", self.beta_hw)));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::Config(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol)));
        }
        if let Some(m) = self.s_samples {
            if m < 3 {
                return Err(Error::Config(format!("s_samples must be at least 3, got {m}")));
            }
        }
        if let Some(p) = self.grid_points {
            if p < 16 {
                return Err(Error::Config(format!("grid_points must be at least 16, got {p}")));
            }
        }
        if let Some(h) = self.grid_half_width {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("grid_half_width must be positive, got {h}")));
            }
        }
        if let Some(d) = self.dim {
            if d < 2 {
                return Err(Error::Config(format!("dim must be at least 2, got {d}")));
            }
        }
        Ok(())
    }

    /// Level cutoff: explicit, or large enough that the Jarzynski sum
    /// misses less than `tail_tol`.
    pub fn resolve_cutoff(&self) -> Result<usize> {
        match self.n_cut {
            Some(n) => Ok(n),
            None => fluctuation_cutoff(self.q0, self.beta_hw, self.tail_tol),
        }
    }
}

/// Output of any pipeline.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub mode: Mode,
    pub n_cut: usize,
    pub charfn: CharFnTrace,
    pub dist: WorkDist,
    /// `(theta = 0, theta = pi/2)` traces from the interferometric mode.
    pub traces: Option<(IntensityTrace, IntensityTrace)>,
    /// `gamma_value` from the open mode.
    pub gamma: Option<f64>,
    pub warnings: Vec<String>,
}

/// Sample count shared by the analytic and interferometric modes, wide
/// enough for the interferometer's reconstruction support.
fn quench_samples(cfg: &ScenarioConfig, m_max: usize, n_cut: usize) -> usize {
    cfg.s_samples
        .unwrap_or_else(|| default_sample_count(m_max + BASIS_MARGIN, n_cut))
}

pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Analytic => run_analytic(cfg),
        Mode::Interferometric => run_interferometric(cfg),
        Mode::Open => run_open(cfg),
    }
}

pub fn run_analytic(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let n_cut = cfg.resolve_cutoff()?;
    let ens = thermal_weights_with_cutoff(cfg.beta_hw, n_cut)?;
    let t = build_matrix(cfg.q0, n_cut, 1e-12)?;
    let dist = workdist_direct(&ens, &t)?;
    let m = quench_samples(cfg, t.m_max(), n_cut);
    let charfn = charfn_from_dist(&dist, m);
    Ok(ScenarioResult {
        mode: Mode::Analytic,
        n_cut,
        charfn,
        dist,
        traces: None,
        gamma: None,
        warnings: Vec::new(),
    })
}

pub fn interferometer_config(cfg: &ScenarioConfig, n_cut: usize) -> Result<InterferometerConfig> {
    let quench = InterferometerConfig::quench(cfg.q0, n_cut, 0.0)?;
    if cfg.grid_points.is_none() && cfg.grid_half_width.is_none() {
        return Ok(quench);
    }
    let n_basis = quench.basis().n_max();
    let default = *quench.grid();
    let grid = GridSpec::new(
        cfg.grid_points.unwrap_or(default.n_points()),
        cfg.grid_half_width.unwrap_or(default.half_width()),
    )?;
    InterferometerConfig::new(
        Process::Identity,
        FinalBasis::DisplacedBy(cfg.q0),
        0.0,
        HgBasis::new(grid, n_basis)?,
    )
}

pub fn run_interferometric(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let n_cut = cfg.resolve_cutoff()?;
    let ens = thermal_weights_with_cutoff(cfg.beta_hw, n_cut)?;
    let icfg = interferometer_config(cfg, n_cut)?;
    let m = quench_samples(cfg, icfg.basis().n_max() - BASIS_MARGIN, n_cut);
    let (re, im, charfn) = measure_charfn(&ens, &icfg, &uniform_s_grid(m))?;
    let dist = workdist_from_trace(&charfn)?;
    Ok(ScenarioResult {
        mode: Mode::Interferometric,
        n_cut,
        charfn,
        dist,
        traces: Some((re, im)),
        gamma: None,
        warnings: Vec::new(),
    })
}

/// Channel spec used by open mode: the file named in the config, or a
/// single unitary kick measured in the unchanged eigenbasis.
pub fn open_channel_spec(cfg: &ScenarioConfig, n_cut: usize) -> Result<ChannelSpec> {
    match &cfg.channel {
        Some(path) => ChannelSpec::from_file(path),
        None => Ok(ChannelSpec {
            dim: cfg
                .dim
                .unwrap_or_else(|| DEFAULT_DIM.max(n_cut + 1 + truncation_margin(cfg.q0))),
            terms: vec![(KrausTerm::Displacement(cfg.q0), 1.0)],
            final_hamiltonian: FinalHamiltonian::Initial,
        }),
    }
}

struct OpenModel {
    phi: KrausChannel,
    rho: DensityMatrix,
    h_i: crate::openmaps::TruncatedOperator,
    h_f: crate::openmaps::TruncatedOperator,
}

fn open_model(spec: &ChannelSpec, beta_hw: f64, dim: usize) -> Result<OpenModel> {
    Ok(OpenModel {
        phi: spec.build(dim)?,
        rho: DensityMatrix::thermal(beta_hw, dim)?,
        h_i: oscillator_hamiltonian(dim),
        h_f: spec.final_hamiltonian.build(dim),
    })
}

fn eval_many(model: &OpenModel, s: &[f64]) -> Result<Vec<Complex64>> {
    let g = OpenCharFn::new(&model.phi, &model.rho, &model.h_i, &model.h_f)?;
    s.par_iter()
        .map(|&s| g.eval(Complex64::new(s, 0.0)))
        .collect()
}

/// Joint distribution binned by integer work `u_F - u_I`.
fn open_workdist(model: &OpenModel) -> Result<WorkDist> {
    let g = OpenCharFn::new(&model.phi, &model.rho, &model.h_i, &model.h_f)?;
    let table = joint_prob_table(&model.phi, &model.rho, g.final_vectors())?;
    let (u_f, u_i) = (g.final_levels(), g.initial_levels());
    let mut bins: Vec<(i64, f64)> = Vec::new();
    for m in 0..u_f.len() {
        for n in 0..u_i.len() {
            let w = u_f[m] - u_i[n];
            let d = w.round();
            if (w - d).abs() > LEVEL_TOL {
                return Err(Error::InvalidArgument(format!(
                    "work value {w} is not an integer multiple of the level spacing"
                )));
            }
            bins.push((d as i64, table[(m, n)]));
        }
    }
    let d_min = bins.iter().map(|b| b.0).min().unwrap_or(0);
    let d_max = bins.iter().map(|b| b.0).max().unwrap_or(0);
    let mut probs = vec![0.0; (d_max - d_min + 1) as usize];
    for (d, p) in bins {
        probs[(d - d_min) as usize] += p;
    }
    Ok(WorkDist::new(d_min, probs))
}

pub fn run_open(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let n_cut = cfg.resolve_cutoff()?;
    let spec = open_channel_spec(cfg, n_cut)?;
    let dim = spec.dim;
    let model = open_model(&spec, cfg.beta_hw, dim)?;
    let m = cfg
        .s_samples
        .unwrap_or_else(|| default_sample_count(dim - 1, dim - 1));
    let s = uniform_s_grid(m);
    let values = eval_many(&model, &s)?;
    let support = (-(dim as i64 - 1), dim as i64 - 1);
    let charfn = CharFnTrace::new(s, values)?.with_support(support.0, support.1);
    let dist = open_workdist(&model)?;
    let gamma = gamma_value(&model.phi, &model.rho, cfg.beta_hw, &model.h_i, &model.h_f)?;

    let mut warnings = Vec::new();
    let drift = doubling_drift(&spec, cfg.beta_hw, dim, gamma)?;
    if drift > DOUBLING_TOL {
        warnings.push(format!(
            "open-mode values move by {drift:e} when the dimension doubles from {dim}; raise dim"
        ));
    }
    Ok(ScenarioResult {
        mode: Mode::Open,
        n_cut: dim - 1,
        charfn,
        dist,
        traces: None,
        gamma: Some(gamma),
        warnings,
    })
}

/// Largest change of `G` at a few probe points and of `gamma` between
/// dimension `dim` and `2 dim`.
pub fn doubling_drift(spec: &ChannelSpec, beta_hw: f64, dim: usize, gamma: f64) -> Result<f64> {
    let small = open_model(spec, beta_hw, dim)?;
    let large = open_model(spec, beta_hw, 2 * dim)?;
    let probes = uniform_s_grid(DOUBLING_PROBES);
    let a = eval_many(&small, &probes)?;
    let b = eval_many(&large, &probes)?;
    let g2 = gamma_value(&large.phi, &large.rho, beta_hw, &large.h_i, &large.h_f)?;
    let g_drift = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok(g_drift.max((gamma - g2).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_validate() {
        let text = "# Fig. 4 left column\nq0 = 1\nbeta_hw = 0.1 # hot\nmode = interferometric\nout_dir = res\n";
        let cfg = ScenarioConfig::parse(text, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.q0, 1.0);
        assert_eq!(cfg.mode, Mode::Interferometric);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x/res"));
        cfg.validate().unwrap();

        assert!(ScenarioConfig::parse("q0 1", Path::new(".")).is_err());
        assert!(ScenarioConfig::parse("colour = red", Path::new(".")).is_err());
        let bad = ScenarioConfig {
            q0: 11.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ScenarioConfig {
            s_samples: Some(2),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScenarioConfig {
            beta_hw: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_kick_is_a_delta() {
        let cfg = ScenarioConfig {
            q0: 0.0,
            beta_hw: 1.0,
            ..Default::default()
        };
        let r = run(&cfg).unwrap();
        for g in r.charfn.values() {
            assert!((g - 1.0).norm() < 1e-15);
        }
        let rows: Vec<(i64, f64)> = r.dist.iter().filter(|(_, p)| *p != 0.0).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].0, 0);
        assert!((rows[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn modes_agree() {
        let base = ScenarioConfig {
            q0: 1.0,
            beta_hw: 1.5,
            n_cut: Some(12),
            ..Default::default()
        };
        let a = run(&base).unwrap();
        let i = run(&ScenarioConfig {
            mode: Mode::Interferometric,
            ..base.clone()
        })
        .unwrap();
        assert_eq!(a.charfn.len(), i.charfn.len());
        assert!(a.charfn.max_distance(&i.charfn).unwrap() < 1e-6);
        assert!(a.dist.max_distance(&i.dist) < 1e-6);

        let o = run(&ScenarioConfig {
            mode: Mode::Open,
            dim: Some(48),
            ..base
        })
        .unwrap();
        assert!((o.gamma.unwrap() - 1.0).abs() < 1e-8);
        assert!((o.dist.mean() - 0.5).abs() < 1e-8);
    }
}
