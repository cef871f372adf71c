//! A graded-index channel with a parabolic profile acts as the oscillator's
//! free evolution. Split-step propagation keeps eigenmodes stationary and
//! converges at second order.

use std::f64::consts::PI;

use worklab::optics::{split_step_evolve, IndexChannel};
use worklab::{hg_mode, overlap, Complex64, GridSpec, Result};

fn main() -> Result<()> {
    let grid = GridSpec::new(128, 10.0)?;
    let length = 1.0;
    let channel = IndexChannel::harmonic(grid, length, 1)?;
    let channel = channel.with_steps(channel.min_steps())?;
    println!("{} steps of dz = {:.4}", channel.steps(), channel.dz());

    for n in 0..=5 {
        let phi = hg_mode(n, &grid)?;
        let ov = overlap(&phi, &split_step_evolve(&phi, &channel)?)?;
        let exact = -(n as f64 + 0.5) * length;
        let err = (ov.arg() - exact + PI).rem_euclid(2.0 * PI) - PI;
        println!("n = {n}: fidelity {:.12}, phase error {err:+.2e} rad", ov.norm_sqr());
    }

    let phi = hg_mode(2, &grid)?;
    let exact = phi.scaled(Complex64::from_polar(1.0, -2.5 * length));
    let mut previous: Option<f64> = None;
    for k in 0..4 {
        let steps = channel.min_steps() << k;
        let err = split_step_evolve(&phi, &channel.with_steps(steps)?)?.sub(&exact)?.norm();
        match previous {
            Some(p) => println!("{steps:>5} steps: error {err:.3e}, ratio {:.3}", p / err),
            None => println!("{steps:>5} steps: error {err:.3e}"),
        }
        previous = Some(err);
    }
    Ok(())
}
