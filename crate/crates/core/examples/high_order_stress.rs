//! The hot regime: levels up to n ~ 150 at beta_hw = 0.1, where the
//! amplitudes need a recurrence that stays stable for large indices.

use worklab::thermo::{thermal_weights, thermal_weights_with_cutoff};
use worklab::workstats::{charfn_trace, default_sample_count, jarzynski_lhs, workdist_direct};
use worklab::{build_matrix, coeff_closed, Result};

fn main() -> Result<()> {
    let beta = 0.1;
    let n_cut = thermal_weights(beta, 1e-6)?.n_cut();
    println!("thermal cutoff at tail 1e-6: {n_cut}");
    for n in [138, 150] {
        let t = build_matrix(1.0, n, 1e-12)?;
        println!("n <= {n}: {} rows, unitarity defect {:.2e}", t.m_max() + 1, t.max_unitarity_defect());
    }
    println!("c(150, 150) = {:.15}", coeff_closed(150, 150, 1.0).re);
    println!("c(160, 150) = {:.15e}", coeff_closed(160, 150, 1.0).norm());

    let ens = thermal_weights_with_cutoff(beta, 150)?;
    let t = build_matrix(1.0, 150, 1e-12)?;
    let dist = workdist_direct(&ens, &t)?;
    let trace = charfn_trace(&ens, &t, default_sample_count(t.m_max(), 150))?;
    println!(
        "n_cut 150: sum P = {:.15}, G(0) = {:.15}, Jarzynski sum = {:.9}",
        dist.total(),
        trace.at_zero().unwrap().re,
        jarzynski_lhs(&dist, beta)
    );
    Ok(())
}
