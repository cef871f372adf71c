//! Kick amplitudes c_mn: closed form, grid quadrature and unitarity.

use worklab::transition::{build_matrix, coeff_quadrature};
use worklab::{coeff_closed, GridSpec, Result};

fn main() -> Result<()> {
    let q0 = 1.0;
    let grid = GridSpec::for_max_mode(20);
    println!("  m  n              closed                      quadrature");
    for (m, n) in [(0, 0), (1, 0), (3, 2), (10, 7), (20, 20)] {
        let a = coeff_closed(m, n, q0);
        let b = coeff_quadrature(m, n, q0, &grid)?;
        println!("{m:>3}{n:>3}  {:>+.12}{:>+.12}i  {:>+.12}{:>+.12}i", a.re, a.im, b.re, b.im);
    }

    let t = build_matrix(3.0, 138, 1e-12)?;
    println!(
        "q0 = 3, n <= 138: rows kept {}, worst column deficit {:.2e}, worst |c_mn| - |c_nm| {:.2e}",
        t.m_max() + 1,
        t.max_unitarity_defect(),
        t.max_asymmetry()
    );
    Ok(())
}
