//! Simulated interferometer: two phase settings give the real and
//! imaginary parts of G(s), from which the work distribution follows.

use worklab::interferometer::{measure_charfn, InterferometerConfig};
use worklab::thermo::thermal_weights_with_cutoff;
use worklab::workstats::{
    charfn_direct, default_sample_count, fluctuation_cutoff, uniform_s_grid, workdist_direct,
    workdist_from_trace,
};
use worklab::{build_matrix, Result};

fn main() -> Result<()> {
    let (q0, beta) = (3.0, 1.0);
    let n_cut = fluctuation_cutoff(q0, beta, 1e-8)?;
    let ens = thermal_weights_with_cutoff(beta, n_cut)?;
    let cfg = InterferometerConfig::quench(q0, n_cut, 0.0)?;
    let s = uniform_s_grid(default_sample_count(cfg.basis().n_max(), n_cut));

    let (theta0, theta90, g) = measure_charfn(&ens, &cfg, &s)?;
    println!("{} samples, {} modes on a {}-point grid", s.len(), cfg.basis().len(), cfg.grid().n_points());
    for k in [0, 1, 5, s.len() / 2] {
        println!(
            "s = {:.4}: out0 = {:.6} (theta 0), {:.6} (theta pi/2); offset {:.6}",
            s[k], theta0.out0()[k], theta90.out0()[k], theta0.offset()[k]
        );
    }

    let t = build_matrix(q0, n_cut, 1e-12)?;
    let worst = s
        .iter()
        .zip(g.values())
        .map(|(&s, v)| charfn_direct(&ens, &t, s).map(|d| (d - v).norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let dist = workdist_from_trace(&g)?;
    println!("max |G_measured - G_closed| = {worst:.2e}");
    println!("max |P_measured - P_closed| = {:.2e}", dist.max_distance(&workdist_direct(&ens, &t)?));
    Ok(())
}
