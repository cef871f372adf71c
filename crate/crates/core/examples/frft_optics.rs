//! The lens-chain fractional Fourier transform against the eigenphase law.

use std::f64::consts::PI;

use worklab::optics::{
    distance_mod_phase, frft_optical_matched, frft_spectral_with, matched_focal_length,
    propagation_distance, FrftOrder,
};
use worklab::{Complex64, GridSpec, HgBasis, Result};

fn main() -> Result<()> {
    let basis = HgBasis::new(GridSpec::new(2048, 30.0)?, 10)?;
    for alpha in [PI / 6.0, PI / 2.0, 3.0 * PI / 4.0, 1.5 * PI] {
        let f = matched_focal_length(if alpha > PI { alpha - PI } else { alpha });
        println!("alpha = {alpha:.4}: f = {f:.4}, z = {:.4}", propagation_distance(alpha, f));
        for n in [0, 3, 10] {
            let phi = basis.mode(n);
            let expect = phi.scaled(Complex64::from_polar(1.0, -alpha * (n as f64 + 0.5)));
            let optical = frft_optical_matched(&phi, FrftOrder::new(alpha)?)?;
            let spectral = frft_spectral_with(&basis, &phi, alpha)?;
            println!(
                "  n = {n:>2}: optical error {:.2e}, spectral error {:.2e}",
                distance_mod_phase(&optical, &expect)?,
                spectral.sub(&expect)?.norm()
            );
        }
    }
    Ok(())
}
