//! Open dynamics on a truncated eigenbasis: Kraus channels, the
//! generalized characteristic function `G(s) = Tr{V_F^dagger Phi[M_I(rho) V_I]}`,
//! the fluctuation value `gamma_value` and the ancilla reduced state.
//!
//! Operators live on the first `D` eigenstates of the initial oscillator.
//! The truncated kick is `exp(-i q0 X_D)` with `X_D` the truncated position
//! matrix, so it is unitary to rounding; it agrees with the untruncated
//! amplitudes for indices below `D - margin(q0)`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermite::{GridSpec, SampledField};
use crate::thermo::thermal_weights_with_cutoff;
use crate::transition::process_from_grid;

pub type CMatrix = DMatrix<Complex64>;

/// Default truncation dimension.
pub const DEFAULT_DIM: usize = 64;
/// Kraus completeness tolerance.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Hermiticity, trace and positivity tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Imaginary residue tolerated in [`gamma_value`].
pub const GAMMA_IMAG_TOL: f64 = 1e-10;
/// Largest real exponent accepted when forming `e^{beta u} rho`.
pub const MAX_EXPONENT: f64 = 700.0;

const ZERO_KRAUS: f64 = 1e-14;
const PROJECTOR_TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Indices below `D - margin` are trusted; `margin = ceil(4 q0^2 + 8)`.
pub fn truncation_margin(q0: f64) -> usize {
    (4.0 * q0 * q0 + 8.0).ceil() as usize
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Square operator in the initial eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    m: CMatrix,
}

impl TruncatedOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator entries".into()));
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        Self {
            m: CMatrix::from_fn(d, d, |i, j| if i == j { c(values[i]) } else { c(0.0) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn scaled(&self, f: Complex64) -> Self {
        Self { m: &self.m * f }
    }

    pub fn mul(&self, other: &TruncatedOperator) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self {
            m: &self.m * &other.m,
        })
    }

    /// Largest entry of `U^dagger U - 1`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.m.adjoint() * &self.m - CMatrix::identity(d, d)))
    }

    /// Largest entry of `A - A^dagger`.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.m - self.m.adjoint()))
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("dimension {a} vs {b}")));
    }
    Ok(())
}

/// `H = diag(n + 1/2)`.
pub fn oscillator_hamiltonian(dim: usize) -> TruncatedOperator {
    let levels: Vec<f64> = (0..dim).map(|n| n as f64 + 0.5).collect();
    TruncatedOperator::diagonal(&levels)
}

/// Truncated position matrix, `<n|X|n+1> = sqrt((n+1)/2)`.
pub fn position_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            ((i + 1) as f64 / 2.0).sqrt()
        } else if i == j + 1 {
            ((j + 1) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    })
}

/// `exp(-i q0 X_D)` through the eigendecomposition of `X_D`.
pub fn displacement(q0: f64, dim: usize) -> TruncatedOperator {
    let eig = SymmetricEigen::new(position_matrix(dim));
    let v = eig.eigenvectors.map(c);
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -q0 * l)));
    TruncatedOperator {
        m: &v * phases * v.transpose(),
    }
}

/// Closest unitary (polar factor) to `m`.
fn polar_unitary(m: CMatrix) -> CMatrix {
    let svd = m.svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Pure-phase mask as an operator on the first `dim` modes: the grid
/// matrix `<phi_m| mask |phi_n>` made exactly unitary by its polar factor.
pub fn phase_mask_operator(mask: &SampledField, dim: usize) -> Result<TruncatedOperator> {
    let t = process_from_grid(mask, dim - 1, mask.grid())?;
    let m = CMatrix::from_fn(dim, dim, |i, j| t.get(i, j));
    TruncatedOperator::new(polar_unitary(m))
}

/// `H_F = D H D^dagger`, whose eigenvectors are `D|m>` with levels `m + 1/2`.
pub fn displaced_hamiltonian(q0: f64, dim: usize) -> TruncatedOperator {
    let d = displacement(q0, dim);
    let h = oscillator_hamiltonian(dim);
    TruncatedOperator {
        m: &d.m * &h.m * d.m.adjoint(),
    }
}

/// Validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch("density matrix must be square".into()));
        }
        let herm = max_abs(&(&m - m.adjoint()));
        if herm > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian ({herm:e})")));
        }
        let tr = m.trace();
        if (tr - 1.0).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let sym = (&m + m.adjoint()) * c(0.5);
        let lowest = SymmetricEigen::new(sym).eigenvalues.min();
        if lowest < -DENSITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {lowest:e}"
            )));
        }
        Ok(Self { m })
    }

    /// Gibbs state `e^{-beta H}/Z` on the first `dim` levels.
    pub fn thermal(beta_hw: f64, dim: usize) -> Result<Self> {
        let ens = thermal_weights_with_cutoff(beta_hw, dim - 1)?;
        Ok(Self {
            m: CMatrix::from_fn(dim, dim, |i, j| if i == j { c(ens.weight(i)) } else { c(0.0) }),
        })
    }

    /// `|psi><psi|` for a normalized vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self::new(&v * v.adjoint())
    }

    /// `|n><n|`.
    pub fn eigenstate(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::DimensionMismatch(format!("level {n} outside dimension {dim}")));
        }
        Ok(Self {
            m: CMatrix::from_fn(dim, dim, |i, j| if i == n && j == n { c(1.0) } else { c(0.0) }),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m[(i, i)].re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.m + self.m.adjoint()) * c(0.5);
        SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    }

    /// Largest entry of `self - other`.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.m - &other.m))
    }
}

/// CPTP map `rho -> sum_m G_m rho G_m^dagger`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    ops: Vec<TruncatedOperator>,
    completeness_defect: f64,
}

impl KrausChannel {
    pub fn new(ops: Vec<TruncatedOperator>) -> Result<Self> {
        let dim = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("a channel needs at least one Kraus operator".into()))?
            .dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for op in &ops {
            same_dim(dim, op.dim())?;
            sum += op.m.adjoint() * &op.m;
        }
        let defect = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if defect > COMPLETENESS_TOL {
            return Err(Error::CompletenessViolation(defect));
        }
        Ok(Self {
            ops,
            completeness_defect: defect,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::unitary(TruncatedOperator::identity(dim)).expect("identity is complete")
    }

    pub fn unitary(u: TruncatedOperator) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Random-unitary channel `{sqrt(w_k) U_k}`.
    pub fn mixture(terms: Vec<(f64, TruncatedOperator)>) -> Result<Self> {
        let mut ops = Vec::with_capacity(terms.len());
        for (w, u) in terms {
            if !(w >= 0.0) {
                return Err(Error::InvalidArgument(format!("Kraus weight {w} is negative")));
            }
            ops.push(u.scaled(c(w.sqrt())));
        }
        Self::new(ops)
    }

    pub fn operators(&self) -> &[TruncatedOperator] {
        &self.ops
    }

    pub fn completeness_defect(&self) -> f64 {
        self.completeness_defect
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    fn apply_raw(&self, x: &CMatrix) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for op in &self.ops {
            out += &op.m * x * op.m.adjoint();
        }
        out
    }
}

/// `Phi(rho)`.
pub fn apply_channel(phi: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    same_dim(phi.dim(), rho.dim())?;
    let out = phi.apply_raw(&rho.m);
    Ok(DensityMatrix { m: out })
}

/// System-environment unitary in block form,
/// `U = sum_{ij} U_ij (x) |i><j|` over an environment basis.
#[derive(Debug, Clone, PartialEq)]
pub struct JointUnitary {
    env_dim: usize,
    sys_dim: usize,
    blocks: Vec<Vec<Option<TruncatedOperator>>>,
}

impl JointUnitary {
    pub fn from_blocks(blocks: Vec<Vec<Option<TruncatedOperator>>>) -> Result<Self> {
        let env_dim = blocks.len();
        if env_dim == 0 || blocks.iter().any(|r| r.len() != env_dim) {
            return Err(Error::DimensionMismatch("blocks must form a square grid".into()));
        }
        let sys_dim = blocks
            .iter()
            .flatten()
            .flatten()
            .map(|b| b.dim())
            .next()
            .ok_or_else(|| Error::InvalidArgument("all blocks are empty".into()))?;
        for b in blocks.iter().flatten().flatten() {
            same_dim(sys_dim, b.dim())?;
        }
        Ok(Self {
            env_dim,
            sys_dim,
            blocks,
        })
    }

    /// `U (x) 1`: no coupling to a qubit environment.
    pub fn uncoupled(u: TruncatedOperator) -> Self {
        Self::from_blocks(vec![vec![Some(u.clone()), None], vec![None, Some(u)]])
            .expect("well-formed")
    }

    /// `U (x) |H><H| + 1 (x) |V><V|`: the mask acts on one polarization only.
    pub fn polarization_controlled(u: TruncatedOperator) -> Self {
        let id = TruncatedOperator::identity(u.dim());
        Self::from_blocks(vec![vec![Some(u), None], vec![None, Some(id)]]).expect("well-formed")
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    /// `<a| U |b>` as a system operator.
    fn contract(&self, a: &[Complex64], b: &[Complex64]) -> CMatrix {
        let d = self.sys_dim;
        let mut out = CMatrix::zeros(d, d);
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, blk) in row.iter().enumerate() {
                if let Some(u) = blk {
                    let w = a[i].conj() * b[j];
                    if w != c(0.0) {
                        out += &u.m * w;
                    }
                }
            }
        }
        out
    }

    /// Full `(D E) x (D E)` matrix, system index major.
    pub fn full_matrix(&self) -> CMatrix {
        let (d, e) = (self.sys_dim, self.env_dim);
        let mut out = CMatrix::zeros(d * e, d * e);
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, blk) in row.iter().enumerate() {
                if let Some(u) = blk {
                    for r in 0..d {
                        for s in 0..d {
                            out[(r * e + i, s * e + j)] = u.m[(r, s)];
                        }
                    }
                }
            }
        }
        out
    }
}

fn check_env_vector(v: &[Complex64], env_dim: usize) -> Result<()> {
    if v.len() != env_dim {
        return Err(Error::DimensionMismatch(format!(
            "environment vector has {} entries, expected {env_dim}",
            v.len()
        )));
    }
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("environment vector norm^2 is {n}")));
    }
    Ok(())
}

/// `Gamma_m = <zeta_m| U |xi>`; vanishing operators are dropped.
pub fn kraus_from_environment(
    joint: &JointUnitary,
    env_state: &[Complex64],
    env_basis: &[Vec<Complex64>],
) -> Result<KrausChannel> {
    check_env_vector(env_state, joint.env_dim)?;
    if env_basis.len() != joint.env_dim {
        return Err(Error::DimensionMismatch("environment basis is incomplete".into()));
    }
    for z in env_basis {
        check_env_vector(z, joint.env_dim)?;
    }
    let ops: Vec<TruncatedOperator> = env_basis
        .iter()
        .map(|z| TruncatedOperator {
            m: joint.contract(z, env_state),
        })
        .filter(|op| max_abs(&op.m) > ZERO_KRAUS)
        .collect();
    KrausChannel::new(ops)
}

/// `(|H> + |V>)/sqrt 2`.
pub fn diagonal_polarization() -> Vec<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![c(h), c(h)]
}

/// `{|H>, |V>}`.
pub fn hv_basis() -> Vec<Vec<Complex64>> {
    vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]]
}

/// `{|+45>, |-45>}`.
pub fn diagonal_basis() -> Vec<Vec<Complex64>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![c(h), c(h)], vec![c(h), c(-h)]]
}

/// Eigenvectors (columns) and levels of a Hermitian final Hamiltonian,
/// sorted by level.
pub fn eigenbasis(h: &TruncatedOperator) -> Result<(CMatrix, Vec<f64>)> {
    let herm = h.hermiticity_defect();
    if herm > DENSITY_TOL {
        return Err(Error::InvalidArgument(format!(
            "Hamiltonian is not Hermitian ({herm:e})"
        )));
    }
    let eig = SymmetricEigen::new(h.m.clone());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vecs = CMatrix::from_fn(h.dim(), h.dim(), |i, k| eig.eigenvectors[(i, order[k])]);
    let levels = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok((vecs, levels))
}

/// Rank-one projectors onto the columns of `vectors`.
pub fn projectors(vectors: &CMatrix) -> Vec<TruncatedOperator> {
    (0..vectors.ncols())
        .map(|k| {
            let v = vectors.column(k);
            TruncatedOperator { m: &v * v.adjoint() }
        })
        .collect()
}

fn diagonal_levels(h: &TruncatedOperator) -> Result<Vec<f64>> {
    let d = h.dim();
    for i in 0..d {
        for j in 0..d {
            if i != j && h.m[(i, j)].norm() > PROJECTOR_TOL {
                return Err(Error::InvalidArgument(
                    "initial Hamiltonian must be diagonal in the working basis".into(),
                ));
            }
        }
    }
    Ok((0..d).map(|i| h.m[(i, i)].re).collect())
}

/// `p_mn = Tr{Pi_m^F Phi[Pi_n^I rho Pi_n^I]}` with `Pi_n^I = |n><n|`.
pub fn joint_prob_open(
    m: usize,
    n: usize,
    phi: &KrausChannel,
    rho0: &DensityMatrix,
    final_basis: &[TruncatedOperator],
) -> Result<f64> {
    let d = phi.dim();
    same_dim(d, rho0.dim())?;
    if final_basis.len() != d || m >= d || n >= d {
        return Err(Error::DimensionMismatch(format!(
            "indices ({m}, {n}) or {} projectors do not fit dimension {d}",
            final_basis.len()
        )));
    }
    let pm = &final_basis[m];
    same_dim(d, pm.dim())?;
    let idem = max_abs(&(&pm.m * &pm.m - &pm.m));
    if idem > PROJECTOR_TOL {
        return Err(Error::InvalidArgument(format!(
            "final projector {m} is not idempotent ({idem:e})"
        )));
    }
    let mut x = CMatrix::zeros(d, d);
    x[(n, n)] = rho0.m[(n, n)];
    let p = (&pm.m * phi.apply_raw(&x)).trace().re;
    Ok(if p < 0.0 { 0.0 } else { p })
}

/// All `p_mn` at once; `final_vectors` holds the final eigenvectors as
/// columns. Row `m`, column `n`.
pub fn joint_prob_table(
    phi: &KrausChannel,
    rho0: &DensityMatrix,
    final_vectors: &CMatrix,
) -> Result<DMatrix<f64>> {
    let d = phi.dim();
    same_dim(d, rho0.dim())?;
    same_dim(d, final_vectors.ncols())?;
    let pops = rho0.populations();
    let mut p = DMatrix::<f64>::zeros(d, d);
    for op in phi.operators() {
        let a = final_vectors.adjoint() * &op.m;
        for m in 0..d {
            for n in 0..d {
                p[(m, n)] += pops[n] * a[(m, n)].norm_sqr();
            }
        }
    }
    Ok(p)
}

/// `G(s) = Tr{ e^{i s H_F} Phi[M_I(rho) e^{-i s H_I}] }` for complex `s`.
///
/// `M_I(rho) e^{-i s H_I}` is diagonal with entries `rho_nn e^{-i s u_n}`;
/// each is formed from a single exponent `ln rho_nn - i s u_n`, so the
/// growth of `e^{beta u_n}` at `s = i beta` is absorbed by the weights.
pub fn open_charfn(
    phi: &KrausChannel,
    rho0: &DensityMatrix,
    s: Complex64,
    h_i: &TruncatedOperator,
    h_f: &TruncatedOperator,
) -> Result<Complex64> {
    OpenCharFn::new(phi, rho0, h_i, h_f)?.eval(s)
}

/// [`open_charfn`] with the final eigenbasis and initial levels prepared
/// once, for evaluation at many `s`.
#[derive(Debug, Clone)]
pub struct OpenCharFn<'a> {
    phi: &'a KrausChannel,
    pops: Vec<f64>,
    u_i: Vec<f64>,
    w_f: CMatrix,
    u_f: Vec<f64>,
}

impl<'a> OpenCharFn<'a> {
    pub fn new(
        phi: &'a KrausChannel,
        rho0: &DensityMatrix,
        h_i: &TruncatedOperator,
        h_f: &TruncatedOperator,
    ) -> Result<Self> {
        let d = phi.dim();
        same_dim(d, rho0.dim())?;
        same_dim(d, h_i.dim())?;
        same_dim(d, h_f.dim())?;
        let u_i = diagonal_levels(h_i)?;
        let (w_f, u_f) = eigenbasis(h_f)?;
        Ok(Self {
            phi,
            pops: rho0.populations(),
            u_i,
            w_f,
            u_f,
        })
    }

    pub fn final_levels(&self) -> &[f64] {
        &self.u_f
    }

    pub fn initial_levels(&self) -> &[f64] {
        &self.u_i
    }

    pub fn final_vectors(&self) -> &CMatrix {
        &self.w_f
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = self.pops.len();
        let mut x = CMatrix::zeros(d, d);
        for n in 0..d {
            if self.pops[n] <= 0.0 {
                continue;
            }
            let expo = c(self.pops[n].ln()) - Complex64::i() * s * self.u_i[n];
            if expo.re > MAX_EXPONENT {
                return Err(Error::NonFinite(format!(
                    "weight exponent {} for level {n}",
                    expo.re
                )));
            }
            x[(n, n)] = expo.exp();
        }
        let y = self.phi.apply_raw(&x);
        let rotated = self.w_f.adjoint() * y * &self.w_f;
        let mut g = c(0.0);
        for m in 0..d {
            let expo = Complex64::i() * s * self.u_f[m];
            if expo.re > MAX_EXPONENT {
                return Err(Error::NonFinite(format!("final level {m} exponent {}", expo.re)));
            }
            g += expo.exp() * rotated[(m, m)];
        }
        Ok(g)
    }
}

/// `gamma = Tr{ V_F^dagger Phi[V_I M_I(rho)] }` at `s = i beta`.
pub fn gamma_value(
    phi: &KrausChannel,
    rho0: &DensityMatrix,
    beta_hw: f64,
    h_i: &TruncatedOperator,
    h_f: &TruncatedOperator,
) -> Result<f64> {
    if !(beta_hw > 0.0) {
        return Err(Error::DegenerateTemperature(beta_hw));
    }
    let g = open_charfn(phi, rho0, Complex64::new(0.0, beta_hw), h_i, h_f)?;
    if g.im.abs() > GAMMA_IMAG_TOL * g.re.abs().max(1.0) {
        return Err(Error::NonRealGamma(g.im.abs()));
    }
    Ok(g.re)
}

/// `<e^{-beta u}> = sum_{mn} p_mn e^{-beta (u_m^F - u_n^I)}`.
pub fn exp_work_average(p: &DMatrix<f64>, u_i: &[f64], u_f: &[f64], beta_hw: f64) -> f64 {
    let mut acc = 0.0;
    for m in 0..p.nrows() {
        for n in 0..p.ncols() {
            if p[(m, n)] != 0.0 {
                acc += p[(m, n)] * (-beta_hw * (u_f[m] - u_i[n])).exp();
            }
        }
    }
    acc
}

/// Ancilla state after the two-ordering interferometer with the
/// environment attached:
/// `rho_A[a][b] = Tr[chi_a chi_b^dagger] / 4` with
/// `chi_0 = (V'U + UV)|psi, xi>`, `chi_1 = (V'U - UV)|psi, xi>`,
/// `V = v (x) 1_E`, `V' = v' (x) 1_E`, extended linearly to mixed `rho`.
pub fn ancilla_state(
    joint: &JointUnitary,
    v: &TruncatedOperator,
    vprime: &TruncatedOperator,
    rho_system: &DensityMatrix,
    env_state: &[Complex64],
) -> Result<Matrix2<Complex64>> {
    let (d, e) = (joint.sys_dim, joint.env_dim);
    same_dim(d, v.dim())?;
    same_dim(d, vprime.dim())?;
    same_dim(d, rho_system.dim())?;
    check_env_vector(env_state, e)?;
    let lift = |op: &CMatrix| {
        let mut out = CMatrix::zeros(d * e, d * e);
        for r in 0..d {
            for s in 0..d {
                for k in 0..e {
                    out[(r * e + k, s * e + k)] = op[(r, s)];
                }
            }
        }
        out
    };
    let u = joint.full_matrix();
    let big_v = lift(&v.m);
    let big_vp = lift(&vprime.m);
    let b = &big_vp * &u;
    let a = &u * &big_v;
    let k0 = &b + &a;
    let k1 = &b - &a;
    let mut rho = CMatrix::zeros(d * e, d * e);
    for r in 0..d {
        for s in 0..d {
            for i in 0..e {
                for j in 0..e {
                    rho[(r * e + i, s * e + j)] = rho_system.m[(r, s)] * env_state[i] * env_state[j].conj();
                }
            }
        }
    }
    let ks = [k0, k1];
    let mut out = Matrix2::zeros();
    for x in 0..2 {
        for y in 0..2 {
            out[(x, y)] = (&ks[x] * &rho * ks[y].adjoint()).trace() / 4.0;
        }
    }
    Ok(out)
}

/// `<sigma_z>`, `<sigma_y>` of a qubit state.
pub fn pauli_expectations(rho_a: &Matrix2<Complex64>) -> (f64, f64) {
    let z = (rho_a[(0, 0)] - rho_a[(1, 1)]).re;
    // Tr(rho sigma_y) with sigma_y = [[0, -i], [i, 0]]
    let y = (Complex64::i() * rho_a[(0, 1)] - Complex64::i() * rho_a[(1, 0)]).re;
    (z, y)
}

/// `Tr O = <sigma_z> - i <sigma_y>` recovered from the ancilla.
pub fn ancilla_charfn(rho_a: &Matrix2<Complex64>) -> Complex64 {
    let (z, y) = pauli_expectations(rho_a);
    Complex64::new(z, -y)
}

/// Kraus term in a channel spec file.
#[derive(Debug, Clone, PartialEq)]
pub enum KrausTerm {
    Identity,
    Displacement(f64),
    PhaseMask(PathBuf),
}

/// Final Hamiltonian named in a channel spec file.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FinalHamiltonian {
    #[default]
    Initial,
    Displaced(f64),
}

impl FinalHamiltonian {
    pub fn build(self, dim: usize) -> TruncatedOperator {
        match self {
            FinalHamiltonian::Initial => oscillator_hamiltonian(dim),
            FinalHamiltonian::Displaced(q) => displaced_hamiltonian(q, dim),
        }
    }
}

/// Parsed channel spec:
///
/// ```text
/// # dephasing through a polarization-selective prism
/// dim = 64
/// kraus displacement(1.0) weight = 0.5
/// kraus identity weight = 0.5
/// final_hamiltonian = initial
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub dim: usize,
    pub terms: Vec<(KrausTerm, f64)>,
    pub final_hamiltonian: FinalHamiltonian,
}

fn parse_call(text: &str) -> Option<(&str, &str)> {
    let open = text.find('(')?;
    let close = text.rfind(')')?;
    (close > open).then(|| (text[..open].trim(), text[open + 1..close].trim()))
}

fn parse_f64(s: &str, what: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("line {line}: bad {what} '{s}'")))
}

impl ChannelSpec {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut dim = DEFAULT_DIM;
        let mut terms = Vec::new();
        let mut final_hamiltonian = FinalHamiltonian::Initial;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("kraus") {
                let rest = rest.trim();
                let (term_text, weight) = match rest.find("weight") {
                    Some(pos) => {
                        let w = rest[pos + "weight".len()..].trim().trim_start_matches('=');
                        (rest[..pos].trim(), parse_f64(w, "weight", line_no)?)
                    }
                    None => (rest, 1.0),
                };
                let term = if term_text == "identity" {
                    KrausTerm::Identity
                } else if let Some((name, arg)) = parse_call(term_text) {
                    match name {
                        "displacement" => KrausTerm::Displacement(parse_f64(arg, "q0", line_no)?),
                        "phase_mask" => KrausTerm::PhaseMask(base_dir.join(arg)),
                        "identity" => KrausTerm::Identity,
                        _ => {
                            return Err(Error::Config(format!(
                                "line {line_no}: unknown Kraus term '{name}'"
                            )))
                        }
                    }
                } else {
                    return Err(Error::Config(format!(
                        "line {line_no}: cannot parse Kraus term '{term_text}'"
                    )));
                };
                terms.push((term, weight));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
            match key.trim() {
                "dim" => {
                    dim = value
                        .trim()
                        .parse()
                        .ok()
                        .filter(|d| *d >= 1)
                        .ok_or_else(|| Error::Config(format!("line {line_no}: bad dim")))?;
                }
                "final_hamiltonian" => {
                    let v = value.trim();
                    final_hamiltonian = if v == "initial" {
                        FinalHamiltonian::Initial
                    } else if let Some(("displaced", arg)) = parse_call(v) {
                        FinalHamiltonian::Displaced(parse_f64(arg, "q0", line_no)?)
                    } else {
                        return Err(Error::Config(format!(
                            "line {line_no}: unknown final Hamiltonian '{v}'"
                        )));
                    };
                }
                other => {
                    return Err(Error::Config(format!("line {line_no}: unknown key '{other}'")))
                }
            }
        }
        if terms.is_empty() {
            return Err(Error::Config("channel spec lists no Kraus terms".into()));
        }
        Ok(Self {
            dim,
            terms,
            final_hamiltonian,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Builds the channel at dimension `dim` (normally `self.dim`).
    pub fn build(&self, dim: usize) -> Result<KrausChannel> {
        let mut parts = Vec::with_capacity(self.terms.len());
        for (term, w) in &self.terms {
            let u = match term {
                KrausTerm::Identity => TruncatedOperator::identity(dim),
                KrausTerm::Displacement(q) => displacement(*q, dim),
                KrausTerm::PhaseMask(path) => phase_mask_operator(&load_phase_mask(path, dim)?, dim)?,
            };
            parts.push((*w, u));
        }
        KrausChannel::mixture(parts)
    }
}

/// Reads a `x,theta` CSV and samples `exp(i theta(x))` on a grid that hosts
/// `dim` modes, interpolating linearly and holding the end values.
pub fn load_phase_mask(path: &Path, dim: usize) -> Result<SampledField> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let x: f64 = rec.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
            Error::Config(format!("{}: bad x value", path.display()))
        })?;
        let t: f64 = rec.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
            Error::Config(format!("{}: bad theta value", path.display()))
        })?;
        pts.push((x, t));
    }
    if pts.len() < 2 {
        return Err(Error::Config(format!("{}: need at least two samples", path.display())));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let grid = GridSpec::for_max_mode(dim);
    Ok(SampledField::phase_mask(grid, |x| interpolate(&pts, x)))
}

fn interpolate(pts: &[(f64, f64)], x: f64) -> f64 {
    if x <= pts[0].0 {
        return pts[0].1;
    }
    let last = pts[pts.len() - 1];
    if x >= last.0 {
        return last.1;
    }
    let k = pts.partition_point(|p| p.0 <= x);
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
