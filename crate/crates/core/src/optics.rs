//! Paraxial wave engine in dimensionless units (`k = 1`, transverse
//! coordinate = oscillator coordinate).
//!
//! The free paraxial equation `i dPsi/dz = -(1/2) d^2 Psi/dx^2 + V(x) Psi`
//! is the Schrodinger equation with `z` as time, so a lens chain
//! free space `z_alpha` / lens `f` / free space `z_alpha` realizes the
//! oscillator rotation `exp(-i alpha (P^2 + X^2)/2)`.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::csvio;
use crate::error::{Error, Result};
use crate::hermite::{overlap, GridSpec, HgBasis, SampledField};

/// Largest `max|V| dz` accepted by [`split_step_evolve`].
pub const MAX_STEP_PHASE: f64 = 0.1;
/// Relative projection residual tolerated by [`frft_spectral`].
pub const BASIS_RESIDUAL_TOL: f64 = 1e-6;
/// Fraction of the grid (split between both edges) watched for leakage.
pub const GUARD_FRACTION: f64 = 0.1;
/// Energy fraction allowed inside the guard band.
pub const GUARD_TOL: f64 = 1e-6;

const MASK_MODULUS_TOL: f64 = 1e-9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Fractional order `alpha` in `[0, 2 pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrftOrder(f64);

impl FrftOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=TAU).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "FRFT order must lie in [0, 2 pi], got {alpha}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

/// `1 - cos(alpha)` without cancellation near 0 and exact at `pi/2`, `pi`.
fn versine(alpha: f64) -> f64 {
    if alpha.abs() < PI / 2.0 {
        let h = (alpha / 2.0).sin();
        2.0 * h * h
    } else {
        1.0 + (alpha - PI / 2.0).sin()
    }
}

/// `z_alpha = 2 f sin^2(alpha/2)`.
pub fn propagation_distance(alpha: f64, f: f64) -> f64 {
    f * versine(alpha)
}

/// Focal length `1/|sin alpha|` for which the lens chain is the FRFT of
/// order `alpha` with unit scale, so `phi_0` maps onto itself.
pub fn matched_focal_length(alpha: f64) -> f64 {
    1.0 / alpha.sin().abs()
}

/// Weak index modulation `Delta n(x)/n0`, acting as the potential `V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexChannel {
    potential: Vec<f64>,
    grid: GridSpec,
    length: f64,
    steps: usize,
}

impl IndexChannel {
    pub fn new(grid: GridSpec, potential: Vec<f64>, length: f64, steps: usize) -> Result<Self> {
        if potential.len() != grid.n_points() {
            return Err(Error::DimensionMismatch(format!(
                "potential has {} samples, grid has {}",
                potential.len(),
                grid.n_points()
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        if !(length >= 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "channel length must be finite and >= 0, got {length}"
            )));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("channel potential".into()));
        }
        Ok(Self {
            potential,
            grid,
            length,
            steps,
        })
    }

    pub fn from_fn(
        grid: GridSpec,
        v: impl Fn(f64) -> f64,
        length: f64,
        steps: usize,
    ) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(v).collect(), length, steps)
    }

    /// The oscillator channel `V(x) = x^2 / 2`.
    pub fn harmonic(grid: GridSpec, length: f64, steps: usize) -> Result<Self> {
        Self::from_fn(grid, |x| 0.5 * x * x, length, steps)
    }

    /// Fewest steps that keep `max|V| dz` below the step limit.
    pub fn min_steps(&self) -> usize {
        let vmax = self.max_potential();
        ((vmax * self.length / MAX_STEP_PHASE).floor() as usize + 1).max(1)
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        Self::new(self.grid, self.potential.clone(), self.length, steps)
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dz(&self) -> f64 {
        self.length / self.steps as f64
    }

    fn max_potential(&self) -> f64 {
        self.potential.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpticalElement {
    FreeSpace(f64),
    ThinLens(f64),
    PhaseMask(SampledField),
    IndexChannel(IndexChannel),
}

impl OpticalElement {
    pub fn apply(&self, field: &SampledField) -> Result<SampledField> {
        match self {
            OpticalElement::FreeSpace(z) => fresnel_propagate(field, *z),
            OpticalElement::ThinLens(f) => thin_lens(field, *f),
            OpticalElement::PhaseMask(mask) => apply_mask(field, mask),
            OpticalElement::IndexChannel(ch) => split_step_evolve(field, ch),
        }
    }
}

/// Multiplies the spectrum by `e^{-i z k^2 / 2}` for any real `z`.
fn fresnel_transfer(field: &SampledField, z: f64) -> SampledField {
    let grid = *field.grid();
    let n = grid.n_points();
    let (fwd, inv) = plans(n);
    let mut buf = field.values().to_vec();
    fwd.process(&mut buf);
    for (j, v) in buf.iter_mut().enumerate() {
        let k = grid.kx(j);
        *v *= Complex64::from_polar(1.0 / n as f64, -0.5 * z * k * k);
    }
    inv.process(&mut buf);
    SampledField::new(grid, buf).expect("length preserved")
}

/// Free-space paraxial propagation over `z >= 0`.
pub fn fresnel_propagate(field: &SampledField, z: f64) -> Result<SampledField> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "propagation distance must be finite and >= 0, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(field.clone());
    }
    Ok(fresnel_transfer(field, z))
}

/// Backward propagation, the inverse of [`fresnel_propagate`].
pub fn fresnel_backpropagate(field: &SampledField, z: f64) -> Result<SampledField> {
    fresnel_propagate(field, z)?;
    Ok(fresnel_transfer(field, -z))
}

/// Thin lens `e^{-i x^2 / (2 f)}`; an infinite `f` is the identity.
pub fn thin_lens(field: &SampledField, f: f64) -> Result<SampledField> {
    if f == 0.0 {
        return Err(Error::ZeroFocalLength);
    }
    if f.is_nan() {
        return Err(Error::InvalidArgument("focal length is NaN".into()));
    }
    if f.is_infinite() {
        return Ok(field.clone());
    }
    let grid = *field.grid();
    let values = field
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let x = grid.x(j);
            v * Complex64::from_polar(1.0, -x * x / (2.0 * f))
        })
        .collect();
    SampledField::new(grid, values)
}

/// Pointwise multiplication by a unit-modulus mask.
pub fn apply_mask(field: &SampledField, mask: &SampledField) -> Result<SampledField> {
    let worst = mask
        .values()
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    if worst > MASK_MODULUS_TOL {
        return Err(Error::NonUnitaryMask(worst));
    }
    field.multiplied(mask)
}

/// Energy fraction in the outer [`GUARD_FRACTION`] of the grid.
pub fn guard_band_fraction(field: &SampledField) -> f64 {
    let n = field.grid().n_points();
    let edge = ((GUARD_FRACTION * n as f64) / 2.0).ceil() as usize;
    let v = field.values();
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = v[..edge]
        .iter()
        .chain(&v[n - edge..])
        .map(|z| z.norm_sqr())
        .sum();
    outer / total
}

fn check_guard(field: &SampledField) -> Result<()> {
    let leak = guard_band_fraction(field);
    if leak > GUARD_TOL {
        return Err(Error::WrapAround(leak));
    }
    Ok(())
}

fn lens_chain(field: &SampledField, alpha: f64, f: f64) -> Result<SampledField> {
    let z = propagation_distance(alpha, f);
    let a = fresnel_propagate(field, z)?;
    check_guard(&a)?;
    let b = thin_lens(&a, f)?;
    let c = fresnel_propagate(&b, z)?;
    check_guard(&c)?;
    Ok(c)
}

/// Optical FRFT: free space `z_alpha`, lens `f`, free space `z_alpha`.
///
/// The chain has ray matrix `[[cos a, f sin^2 a], [-1/f, cos a]]`, which is
/// the unit-scale rotation by `a` when `f` = [`matched_focal_length`]; any
/// other `f` yields the same rotation in coordinates scaled by
/// `sqrt(f |sin a|)`. Orders past `pi` would need `z < 0`, so they are
/// realized as the mirror image `x -> -x` (an exact rotation by `pi`)
/// followed by the chain for `alpha - pi`.
pub fn frft_optical(field: &SampledField, order: FrftOrder, f: f64) -> Result<SampledField> {
    let alpha = order.alpha();
    if !(alpha > 0.0 && alpha < TAU) {
        return Err(Error::InvalidArgument(format!(
            "optical FRFT needs an order in (0, 2 pi), got {alpha}"
        )));
    }
    if f == 0.0 {
        return Err(Error::ZeroFocalLength);
    }
    check_guard(field)?;
    if alpha == PI {
        return Ok(field.mirrored());
    }
    if alpha < PI {
        lens_chain(field, alpha, f.abs())
    } else {
        lens_chain(&field.mirrored(), alpha - PI, f.abs())
    }
}

/// [`frft_optical`] with the matched focal length.
pub fn frft_optical_matched(field: &SampledField, order: FrftOrder) -> Result<SampledField> {
    let alpha = order.alpha();
    let reduced = if alpha > PI { alpha - PI } else { alpha };
    frft_optical(field, order, matched_focal_length(reduced))
}

/// Spectral FRFT in a precomputed basis: `phi_n -> e^{-i alpha (n + 1/2)} phi_n`.
pub fn frft_spectral_with(
    basis: &HgBasis,
    field: &SampledField,
    alpha: f64,
) -> Result<SampledField> {
    let coeffs = basis.project(field)?;
    let residual = basis.residual(field, &coeffs)?;
    if residual > BASIS_RESIDUAL_TOL {
        return Err(Error::BasisDeficit {
            n_basis: basis.n_max(),
            residual,
        });
    }
    let rotated: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| c * Complex64::from_polar(1.0, -alpha * (n as f64 + 0.5)))
        .collect();
    Ok(basis.synthesize(&rotated))
}

/// Spectral FRFT over the modes `phi_0..=phi_{n_basis}`.
pub fn frft_spectral(field: &SampledField, order: FrftOrder, n_basis: usize) -> Result<SampledField> {
    let basis = HgBasis::new(*field.grid(), n_basis)?;
    frft_spectral_with(&basis, field, order.alpha())
}

/// `F(x_k) = (dx / sqrt(2 pi)) sum_j f_j e^{-i x_k x_j}` on the same grid.
pub fn grid_fourier_transform(field: &SampledField) -> SampledField {
    let grid = *field.grid();
    let n = grid.n_points();
    let scale = grid.dx() / TAU.sqrt();
    let xs = grid.points();
    let values = xs
        .iter()
        .map(|&xk| {
            field
                .values()
                .iter()
                .zip(&xs)
                .fold(Complex64::new(0.0, 0.0), |acc, (v, &xj)| {
                    acc + v * Complex64::from_polar(1.0, -xk * xj)
                })
                * scale
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(values.len(), n);
    SampledField::new(grid, values).expect("length preserved")
}

/// Strang-split evolution through an index channel.
pub fn split_step_evolve(field: &SampledField, channel: &IndexChannel) -> Result<SampledField> {
    if field.grid() != &channel.grid {
        return Err(Error::GridMismatch);
    }
    let dz = channel.dz();
    let excursion = channel.max_potential() * dz;
    if excursion >= MAX_STEP_PHASE {
        return Err(Error::StepTooCoarse(excursion));
    }
    let grid = *field.grid();
    let n = grid.n_points();
    let (fwd, inv) = plans(n);
    let half: Vec<Complex64> = channel
        .potential
        .iter()
        .map(|v| Complex64::from_polar(1.0, -0.5 * v * dz))
        .collect();
    let full: Vec<Complex64> = half.iter().map(|h| h * h).collect();
    let kinetic: Vec<Complex64> = (0..n)
        .map(|j| {
            let k = grid.kx(j);
            Complex64::from_polar(1.0 / n as f64, -0.5 * dz * k * k)
        })
        .collect();

    let mut buf = field.values().to_vec();
    for step in 0..channel.steps {
        let pot = if step == 0 { &half } else { &full };
        for (v, p) in buf.iter_mut().zip(pot) {
            *v *= p;
        }
        fwd.process(&mut buf);
        for (v, k) in buf.iter_mut().zip(&kinetic) {
            *v *= k;
        }
        inv.process(&mut buf);
    }
    for (v, p) in buf.iter_mut().zip(&half) {
        *v *= p;
    }
    SampledField::new(grid, buf)
}

/// `||a - e^{i theta} b||` with `theta = arg <b|a>`.
pub fn distance_mod_phase(a: &SampledField, b: &SampledField) -> Result<f64> {
    let ov = overlap(b, a)?;
    let phase = if ov.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        ov / ov.norm()
    };
    Ok(a.sub(&b.scaled(phase))?.norm())
}

/// Field snapshot CSV with header `x,re,im`.
pub fn write_field_csv(field: &SampledField, path: &Path) -> Result<()> {
    let grid = *field.grid();
    csvio::write_table(
        path,
        &["x", "re", "im"],
        field
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| vec![grid.x(j), v.re, v.im]),
    )
}
