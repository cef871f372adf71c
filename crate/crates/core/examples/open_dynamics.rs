//! Polarization-selective kick: tracing out the polarization turns the
//! kick into a dephasing channel. Shows the Kraus sets, gamma, and the
//! ancilla readout of G(s).

use worklab::openmaps::{
    ancilla_charfn, ancilla_state, diagonal_basis, diagonal_polarization, displacement,
    eigenbasis, exp_work_average, gamma_value, hv_basis, joint_prob_table, kraus_from_environment,
    open_charfn, oscillator_hamiltonian, DensityMatrix, JointUnitary, TruncatedOperator,
};
use worklab::{Complex64, Result};

fn main() -> Result<()> {
    let (q0, beta, dim) = (1.0, 1.0, 64);
    let joint = JointUnitary::polarization_controlled(displacement(q0, dim));
    let xi = diagonal_polarization();
    let hv = kraus_from_environment(&joint, &xi, &hv_basis())?;
    let diag = kraus_from_environment(&joint, &xi, &diagonal_basis())?;
    println!("H/V Kraus operators: {}, +-45 Kraus operators: {}", hv.operators().len(), diag.operators().len());

    let rho = DensityMatrix::thermal(beta, dim)?;
    let h = oscillator_hamiltonian(dim);
    let gamma = gamma_value(&hv, &rho, beta, &h, &h)?;
    let (vecs, levels) = eigenbasis(&h)?;
    let table = joint_prob_table(&hv, &rho, &vecs)?;
    let u_i: Vec<f64> = (0..dim).map(|n| n as f64 + 0.5).collect();
    println!("gamma = {gamma:.12}, <e^(-beta u)> = {:.12}", exp_work_average(&table, &u_i, &levels, beta));

    for s in [0.5, 1.0, 2.0] {
        let v = TruncatedOperator::new(free_evolution(dim, s))?;
        let rho_a = ancilla_state(&joint, &v, &v, &rho, &xi)?;
        let g = open_charfn(&hv, &rho, Complex64::new(s, 0.0), &h, &h)?;
        let a = ancilla_charfn(&rho_a);
        println!("s = {s}: G = {:+.9}{:+.9}i, ancilla = {:+.9}{:+.9}i", g.re, g.im, a.re, a.im);
    }
    Ok(())
}

fn free_evolution(dim: usize, s: f64) -> worklab::openmaps::CMatrix {
    worklab::openmaps::CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -s * (i as f64 + 0.5))
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
