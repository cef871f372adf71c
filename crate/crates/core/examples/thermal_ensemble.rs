//! Thermal populations of the oscillator and where the level cutoff lands.

use worklab::thermo::{thermal_weights, thermal_weights_with_cutoff};
use worklab::workstats::fluctuation_cutoff;
use worklab::Result;

fn main() -> Result<()> {
    for beta in [0.1, 1.0, 3.0] {
        let ens = thermal_weights(beta, 1e-8)?;
        println!(
            "beta_hw = {beta:>4}: n_cut = {:>3}, p_0 = {:.6}, ln Z = {:.6}",
            ens.n_cut(),
            ens.weight(0),
            ens.log_partition()
        );
    }

    // the Jarzynski average needs more levels than the thermal tail suggests
    for (q0, beta) in [(1.0, 0.1), (3.0, 1.0)] {
        let thermal = thermal_weights(beta, 1e-8)?.n_cut();
        let needed = fluctuation_cutoff(q0, beta, 1e-8)?;
        let ens = thermal_weights_with_cutoff(beta, needed)?;
        println!(
            "q0 = {q0}, beta_hw = {beta}: thermal cutoff {thermal}, fluctuation cutoff {needed} (weight kept {:.12})",
            ens.weights().iter().sum::<f64>()
        );
    }
    Ok(())
}
