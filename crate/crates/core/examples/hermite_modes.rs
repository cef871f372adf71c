//! Sample Hermite-Gaussian modes on a grid and check their orthonormality.

use worklab::{hg_mode, overlap, GridSpec, HgBasis, Result};

fn main() -> Result<()> {
    let grid = GridSpec::for_max_mode(40);
    println!("grid: {} points over [-{:.2}, {:.2}]", grid.n_points(), grid.half_width(), grid.half_width());

    let basis = HgBasis::new(grid, 40)?;
    let mut worst: f64 = 0.0;
    for m in 0..=40 {
        for n in 0..=40 {
            let ov = overlap(&basis.mode(m), &basis.mode(n))?;
            let target = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((ov.re - target).abs().max(ov.im.abs()));
        }
    }
    println!("max |<phi_m|phi_n> - delta_mn| for m, n <= 40: {worst:.2e}");

    for n in [0, 1, 10, 40] {
        let phi = hg_mode(n, &grid)?;
        println!("n = {n:>2}: <x^2> = {:.6} (expected {:.1})", phi.second_moment(), n as f64 + 0.5);
    }
    Ok(())
}
