//! Scalar and vector spherical harmonics for `l ≤ 2`, the angular Laplacian
//! on the vector families, and transverse-field assembly.
//!
//! Three angle-dependent vector families span vector functions on the
//! sphere per `(l, m)`:
//!
//! ```text
//! Υ_lm = x̂ Y_lm          (l ≥ 0)
//! Ψ_lm = L^{-1/2} r ∇Y_lm (l ≥ 1),   L = l(l+1)
//! Φ_lm = L^{-1/2} ∇ × (x Y_lm) (l ≥ 1)
//! ```
//!
//! All values here come from hand-coded closed forms on the unit sphere
//! (degree-`l` solid harmonics and their gradients), so evaluations are
//! scale invariant by construction and carry no special-function
//! dependency.  The positive angular Laplacian `Δ_Ω` (the one with
//! `Δ_Ω Y_lm = l(l+1) Y_lm`) is *not* diagonal on `(Υ, Ψ, Φ)`; its exact
//! `3×3` matrix is [`angular_laplacian_matrix`], the orthogonal change of
//! basis diagonalizing the `Υ–Ψ` block is [`basis_change`], and
//! [`angular_laplacian_fd_matrix`] reproduces the matrix numerically from
//! angular finite differences.
//!
//! A [`TransverseField`] combines radial profiles `u_lm` with the pair
//! `√L·u/r²·Υ + u′/r·Ψ`, which is divergence-free for any differentiable
//! profile; [`divergence_ratio`] verifies that numerically at a point.
//!
//! ```
//! use radial4::vsh::{basis_change, eval_vsh, AngularPoint, VshFamily};
//!
//! // At the north pole Υ_00 points along +z with length (4π)^{-1/2}.
//! let pole = AngularPoint::new(0.0, 0.0).unwrap();
//! let v = eval_vsh(VshFamily::Upsilon, 0, 0, pole).unwrap();
//! assert!((v[2].re - 0.25f64.sqrt() / std::f64::consts::PI.sqrt()).abs() < 1e-15);
//!
//! // The l = 1 diagonalizing change of basis is (1/√3)[[1, √2], [−√2, 1]].
//! let m = basis_change(1).unwrap();
//! assert!((m[0][0] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
//! ```

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::numerics::{self, NumericsError};
use crate::radialfn::{RadialError, RadialFunction};

/// Tolerance on `| |x| − 1 |` for a vector claimed to lie on the unit
/// sphere.
pub const UNIT_SPHERE_TOLERANCE: f64 = 1e-14;

/// Angular finite-difference step (radians) used by the numerical
/// reproduction of the angular Laplacian; combined with one Richardson
/// level inside [`crate::numerics::finite_diff`].
pub const ANGULAR_STEP: f64 = 1e-4;

/// Errors from harmonic evaluation and field assembly.
#[derive(Debug, Clone, PartialEq)]
pub enum VshError {
    /// An `(l, m)` pair outside the implemented ranges (`l ≤ 2`, `|m| ≤ l`,
    /// and `l ≥ 1` for the Ψ/Φ families).
    InvalidIndices {
        /// Which family was requested.
        family: &'static str,
        /// The rejected angular momentum.
        l: i64,
        /// The rejected azimuthal index.
        m: i64,
    },
    /// A polar angle outside `[0, π]` or a non-finite angle.
    InvalidAngle {
        /// Name of the offending angle.
        what: &'static str,
        /// The rejected value.
        value: f64,
    },
    /// A direction vector whose norm is not 1 within
    /// [`UNIT_SPHERE_TOLERANCE`] (or not normalizable at all).
    OffUnitSphere {
        /// The rejected norm.
        norm: f64,
    },
    /// Field evaluation at the origin, where the radial profiles `u/r²`
    /// are not defined.
    OriginEvaluation,
    /// An exact radial-profile operation failed.
    Radial(RadialError),
    /// A finite-difference request failed.
    Numerics(NumericsError),
}

impl fmt::Display for VshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VshError::InvalidIndices { family, l, m } => {
                write!(f, "no {family} harmonic with l = {l}, m = {m}")
            }
            VshError::InvalidAngle { what, value } => {
                write!(f, "invalid {what} = {value}")
            }
            VshError::OffUnitSphere { norm } => {
                write!(f, "direction vector has norm {norm}, not a unit vector")
            }
            VshError::OriginEvaluation => write!(f, "field evaluation at the origin"),
            VshError::Radial(e) => write!(f, "radial profile operation failed: {e}"),
            VshError::Numerics(e) => write!(f, "finite differencing failed: {e}"),
        }
    }
}

impl std::error::Error for VshError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            VshError::Radial(e) => Some(e),
            VshError::Numerics(e) => Some(e),
            _ => None,
        }
    }
}

impl From<RadialError> for VshError {
    fn from(e: RadialError) -> Self {
        VshError::Radial(e)
    }
}

impl From<NumericsError> for VshError {
    fn from(e: NumericsError) -> Self {
        VshError::Numerics(e)
    }
}

/// Convenience alias for results of harmonic operations.
pub type VshResult<T> = Result<T, VshError>;

// ─────────────────────────────────────────────────────────────────────────
// Points on the sphere
// ─────────────────────────────────────────────────────────────────────────

/// A point on the unit sphere, stored as polar/azimuthal angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularPoint {
    theta: f64,
    phi: f64,
}

impl AngularPoint {
    /// Point from angles; `theta` must lie in `[0, π]`, `phi` is reduced
    /// modulo `2π` into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> VshResult<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(VshError::InvalidAngle { what: "theta", value: theta });
        }
        if !phi.is_finite() {
            return Err(VshError::InvalidAngle { what: "phi", value: phi });
        }
        Ok(AngularPoint { theta, phi: phi.rem_euclid(2.0 * PI) })
    }

    /// Point from a vector already on the unit sphere (norm 1 within
    /// [`UNIT_SPHERE_TOLERANCE`]).
    pub fn from_unit_vector(x: [f64; 3]) -> VshResult<Self> {
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_SPHERE_TOLERANCE {
            return Err(VshError::OffUnitSphere { norm });
        }
        Ok(Self::from_direction_unchecked(x, norm))
    }

    /// Point in the direction of an arbitrary nonzero vector (normalized
    /// internally).
    pub fn from_direction(x: [f64; 3]) -> VshResult<Self> {
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(VshError::OffUnitSphere { norm });
        }
        Ok(Self::from_direction_unchecked(x, norm))
    }

    fn from_direction_unchecked(x: [f64; 3], norm: f64) -> Self {
        let theta = (x[2] / norm).clamp(-1.0, 1.0).acos();
        let phi = f64::atan2(x[1], x[0]).rem_euclid(2.0 * PI);
        AngularPoint { theta, phi }
    }

    /// Angles used by finite differencing, without range validation: the
    /// unit-vector map below extends smoothly to all real angles.
    fn from_raw_angles(theta: f64, phi: f64) -> Self {
        AngularPoint { theta, phi }
    }

    /// Polar angle in `[0, π]`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Azimuthal angle in `[0, 2π)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The unit vector `x̂ = (sin θ cos φ, sin θ sin φ, cos θ)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Scalar harmonics and solid-harmonic gradients
// ─────────────────────────────────────────────────────────────────────────

/// The three vector families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VshFamily {
    /// Radial family `x̂ Y_lm`, defined for `l ≥ 0`.
    Upsilon,
    /// Gradient family `L^{-1/2} r ∇Y_lm`, defined for `l ≥ 1`.
    Psi,
    /// Rotational family `L^{-1/2} ∇ × (x Y_lm)`, defined for `l ≥ 1`.
    Phi,
}

impl VshFamily {
    fn name(self) -> &'static str {
        match self {
            VshFamily::Upsilon => "Upsilon",
            VshFamily::Psi => "Psi",
            VshFamily::Phi => "Phi",
        }
    }
}

fn validate_scalar_indices(l: i64, m: i64) -> VshResult<()> {
    if (0..=2).contains(&l) && m.abs() <= l {
        Ok(())
    } else {
        Err(VshError::InvalidIndices { family: "scalar", l, m })
    }
}

fn validate_vsh_indices(family: VshFamily, l: i64, m: i64) -> VshResult<()> {
    let l_min = match family {
        VshFamily::Upsilon => 0,
        VshFamily::Psi | VshFamily::Phi => 1,
    };
    if (l_min..=2).contains(&l) && m.abs() <= l {
        Ok(())
    } else {
        Err(VshError::InvalidIndices { family: family.name(), l, m })
    }
}

/// `Y_lm` evaluated through its solid-harmonic closed form on the unit
/// sphere (complex convention with the Condon–Shortley sign).
pub fn eval_y(l: i64, m: i64, p: AngularPoint) -> VshResult<Complex64> {
    validate_scalar_indices(l, m)?;
    let n = p.unit_vector();
    Ok(solid_harmonic(l, m, n))
}

/// Degree-`l` solid harmonic `r^l Y_lm`, evaluated at a unit vector.
fn solid_harmonic(l: i64, m: i64, n: [f64; 3]) -> Complex64 {
    let c00 = 0.5 / PI.sqrt();
    let c10 = (3.0 / (4.0 * PI)).sqrt();
    let c11 = (3.0 / (8.0 * PI)).sqrt();
    let c20 = (5.0 / (16.0 * PI)).sqrt();
    let c21 = (15.0 / (8.0 * PI)).sqrt();
    let c22 = (15.0 / (32.0 * PI)).sqrt();
    let xy = |sign: f64| Complex64::new(n[0], sign * n[1]);
    match (l, m) {
        (0, 0) => Complex64::new(c00, 0.0),
        (1, 0) => Complex64::new(c10 * n[2], 0.0),
        (1, _) => -(m as f64) * c11 * xy(m as f64),
        (2, 0) => Complex64::new(c20 * (2.0 * n[2] * n[2] - n[0] * n[0] - n[1] * n[1]), 0.0),
        (2, 1) | (2, -1) => -(m as f64) * c21 * n[2] * xy(m as f64),
        (2, _) => c22 * xy(m.signum() as f64) * xy(m.signum() as f64),
        _ => unreachable!("indices validated"),
    }
}

/// Cartesian gradient of the degree-`l` solid harmonic, at a unit vector.
fn solid_harmonic_gradient(l: i64, m: i64, n: [f64; 3]) -> [Complex64; 3] {
    let c10 = (3.0 / (4.0 * PI)).sqrt();
    let c11 = (3.0 / (8.0 * PI)).sqrt();
    let c20 = (5.0 / (16.0 * PI)).sqrt();
    let c21 = (15.0 / (8.0 * PI)).sqrt();
    let c22 = (15.0 / (32.0 * PI)).sqrt();
    let zero = Complex64::new(0.0, 0.0);
    let re = |v: f64| Complex64::new(v, 0.0);
    match (l, m) {
        (0, 0) => [zero, zero, zero],
        (1, 0) => [zero, zero, re(c10)],
        (1, _) => {
            let s = m as f64;
            [re(-s * c11), Complex64::new(0.0, -c11), zero]
        }
        (2, 0) => [re(-2.0 * c20 * n[0]), re(-2.0 * c20 * n[1]), re(4.0 * c20 * n[2])],
        (2, 1) | (2, -1) => {
            let s = m as f64;
            let xy = Complex64::new(n[0], s * n[1]);
            [re(-s * c21 * n[2]), Complex64::new(0.0, -c21 * n[2]), -s * c21 * xy]
        }
        (2, _) => {
            let s = m.signum() as f64;
            let xy = Complex64::new(n[0], s * n[1]);
            [2.0 * c22 * xy, Complex64::new(0.0, s * 2.0 * c22) * xy, zero]
        }
        _ => unreachable!("indices validated"),
    }
}

/// One vector harmonic at a point, as Cartesian components.
pub fn eval_vsh(family: VshFamily, l: i64, m: i64, p: AngularPoint) -> VshResult<[Complex64; 3]> {
    validate_vsh_indices(family, l, m)?;
    let n = p.unit_vector();
    let y = solid_harmonic(l, m, n);
    Ok(match family {
        VshFamily::Upsilon => [y * n[0], y * n[1], y * n[2]],
        VshFamily::Psi => {
            // Ψ = L^{-1/2} (∇S − l·Y·x̂) on the unit sphere.
            let g = solid_harmonic_gradient(l, m, n);
            let root = ((l * (l + 1)) as f64).sqrt();
            let lf = l as f64;
            [
                (g[0] - lf * y * n[0]) / root,
                (g[1] - lf * y * n[1]) / root,
                (g[2] - lf * y * n[2]) / root,
            ]
        }
        VshFamily::Phi => {
            // Φ = L^{-1/2} ∇ × (x Y) = L^{-1/2} ∇S × x̂ on the unit sphere
            // (the x̂ × x̂ Y piece drops out); this orientation is the one
            // that gives the curl representation of transverse fields a
            // plus sign.
            let g = solid_harmonic_gradient(l, m, n);
            let root = ((l * (l + 1)) as f64).sqrt();
            [
                (g[1] * n[2] - g[2] * n[1]) / root,
                (g[2] * n[0] - g[0] * n[2]) / root,
                (g[0] * n[1] - g[1] * n[0]) / root,
            ]
        }
    })
}

/// Every valid `(family, l, m)` triple with `l ≤ 2`, in a fixed order
/// (25 entries: nine Υ, eight Ψ, eight Φ).
pub fn vsh_index_set() -> Vec<(VshFamily, i64, i64)> {
    let mut set = Vec::with_capacity(25);
    for family in [VshFamily::Upsilon, VshFamily::Psi, VshFamily::Phi] {
        let l_min = if family == VshFamily::Upsilon { 0 } else { 1 };
        for l in l_min..=2 {
            for m in -l..=l {
                set.push((family, l, m));
            }
        }
    }
    set
}

// ─────────────────────────────────────────────────────────────────────────
// Sphere quadrature and Gram matrix
// ─────────────────────────────────────────────────────────────────────────

/// Product quadrature on the sphere: 16-point Gauss–Legendre in `cos θ`
/// times a 16-point periodic trapezoid in `φ`, returned as `(point, weight)`
/// pairs.  Exact for integrands that are polynomials of degree ≤ 31 in
/// `cos θ` and Fourier modes `|k| ≤ 15` in `φ` — far beyond every `l ≤ 2`
/// Gram integrand here.
pub fn sphere_quadrature() -> Vec<(AngularPoint, f64)> {
    let (xs, ws) = numerics::gl16_nodes();
    let n_phi = 16usize;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut quad = Vec::with_capacity(xs.len() * n_phi);
    for (&t, &w) in xs.iter().zip(ws.iter()) {
        let theta = t.clamp(-1.0, 1.0).acos();
        for j in 0..n_phi {
            quad.push((AngularPoint { theta, phi: j as f64 * dphi }, w * dphi));
        }
    }
    quad
}

/// Gram matrix `⟨Z_i, Z_j⟩ = ∫ Z̄_i · Z_j dΩ` over all 25 triples of
/// [`vsh_index_set`], by sphere quadrature (exact for these integrands).
pub fn vsh_gram_matrix() -> VshResult<Vec<Vec<Complex64>>> {
    let indices = vsh_index_set();
    let quad = sphere_quadrature();
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); indices.len()]; indices.len()];
    for (p, w) in quad {
        let values: Vec<[Complex64; 3]> = indices
            .iter()
            .map(|&(f, l, m)| eval_vsh(f, l, m, p))
            .collect::<VshResult<_>>()?;
        for (i, vi) in values.iter().enumerate() {
            for (j, vj) in values.iter().enumerate() {
                let dot = vi[0].conj() * vj[0] + vi[1].conj() * vj[1] + vi[2].conj() * vj[2];
                gram[i][j] += w * dot;
            }
        }
    }
    Ok(gram)
}

// ─────────────────────────────────────────────────────────────────────────
// Angular Laplacian on the vector families
// ─────────────────────────────────────────────────────────────────────────

/// Exact matrix of the positive angular Laplacian on `(Υ, Ψ, Φ)_lm`:
///
/// ```text
/// [[2 + L, −2√L, 0],
///  [−2√L,     L, 0],
///  [    0,     0, L]],   L = l(l+1)
/// ```
///
/// Symmetric; the `Υ–Ψ` block has eigenvalues `(l−1)l` and `(l+1)(l+2)`.
pub fn angular_laplacian_matrix(l: i64) -> VshResult<[[f64; 3]; 3]> {
    if !(1..=2).contains(&l) {
        return Err(VshError::InvalidIndices { family: "vector", l, m: 0 });
    }
    let big_l = (l * (l + 1)) as f64;
    let root = big_l.sqrt();
    Ok([
        [2.0 + big_l, -2.0 * root, 0.0],
        [-2.0 * root, big_l, 0.0],
        [0.0, 0.0, big_l],
    ])
}

/// Positive angular Laplacian of a smooth angle-dependent scalar by central
/// differences ([`ANGULAR_STEP`] radians, one Richardson level):
/// `Δ_Ω f = −(f_θθ + cot θ · f_θ + f_φφ / sin²θ)`.
fn angular_laplacian_fd_scalar(
    f: &dyn Fn(AngularPoint) -> Complex64,
    p: AngularPoint,
) -> VshResult<Complex64> {
    let h = ANGULAR_STEP;
    let (theta, phi) = (p.theta, p.phi);
    let along_theta = |t: f64| f(AngularPoint::from_raw_angles(t, phi));
    let along_phi = |t: f64| f(AngularPoint::from_raw_angles(theta, t));
    let f_t = numerics::finite_diff(&along_theta, theta, 1, h)?;
    let f_tt = numerics::finite_diff(&along_theta, theta, 2, h)?;
    let f_pp = numerics::finite_diff(&along_phi, phi, 2, h)?;
    let st = theta.sin();
    let ct = theta.cos();
    Ok(-(f_tt + (ct / st) * f_t + f_pp / (st * st)))
}

/// Numerical counterpart of [`angular_laplacian_matrix`]: projections
/// `∫ Z̄_i · Δ_Ω Z_j dΩ` with the Laplacian applied componentwise by the
/// angular stencil, at `m = 0`, real parts.  Agrees with the exact matrix
/// to the stencil accuracy (≲ 1e−7 per entry).
pub fn angular_laplacian_fd_matrix(l: i64) -> VshResult<[[f64; 3]; 3]> {
    if !(1..=2).contains(&l) {
        return Err(VshError::InvalidIndices { family: "vector", l, m: 0 });
    }
    let families = [VshFamily::Upsilon, VshFamily::Psi, VshFamily::Phi];
    let quad = sphere_quadrature();
    let mut out = [[0.0f64; 3]; 3];
    for (p, w) in quad {
        let mut values = [[Complex64::new(0.0, 0.0); 3]; 3];
        let mut lap = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (a, &fam) in families.iter().enumerate() {
            values[a] = eval_vsh(fam, l, 0, p)?;
            for c in 0..3 {
                let component =
                    |q: AngularPoint| eval_vsh(fam, l, 0, q).expect("validated indices")[c];
                lap[a][c] = angular_laplacian_fd_scalar(&component, p)?;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot = values[i][0].conj() * lap[j][0]
                    + values[i][1].conj() * lap[j][1]
                    + values[i][2].conj() * lap[j][2];
                out[i][j] += w * dot.re;
            }
        }
    }
    Ok(out)
}

/// Orthogonal change of basis diagonalizing the `Υ–Ψ` block:
///
/// ```text
/// M = (2l+1)^{-1/2} [[√l, √(l+1)], [−√(l+1), √l]]
/// ```
///
/// `M · block · Mᵀ = diag((l−1)l, (l+1)(l+2))`.
pub fn basis_change(l: i64) -> VshResult<[[f64; 2]; 2]> {
    if l < 1 {
        return Err(VshError::InvalidIndices { family: "vector", l, m: 0 });
    }
    let norm = 1.0 / ((2 * l + 1) as f64).sqrt();
    let rl = (l as f64).sqrt();
    let rl1 = ((l + 1) as f64).sqrt();
    Ok([[norm * rl, norm * rl1], [-norm * rl1, norm * rl]])
}

// ─────────────────────────────────────────────────────────────────────────
// Transverse fields
// ─────────────────────────────────────────────────────────────────────────

/// One `(l, m)` component of a transverse field with its radial profile.
#[derive(Debug, Clone)]
pub struct FieldComponent {
    l: i64,
    m: i64,
    u: RadialFunction,
    du: RadialFunction,
}

impl FieldComponent {
    /// Angular momentum of this component.
    pub fn l(&self) -> i64 {
        self.l
    }

    /// Azimuthal index of this component.
    pub fn m(&self) -> i64 {
        self.m
    }

    /// The radial profile `u_lm`.
    pub fn profile(&self) -> &RadialFunction {
        &self.u
    }
}

/// A divergence-free vector field `Σ_lm √L·u_lm/r²·Υ_lm + u′_lm/r·Ψ_lm`.
///
/// The combination is transverse for *any* differentiable radial profile;
/// the profile choice `u` (rather than, say, the pair `(y, ψ)` separately)
/// is what turns the vector Laplacian's quadratic form into the fourth-order
/// radial operators studied in [`crate::quadform`].
#[derive(Debug, Clone, Default)]
pub struct TransverseField {
    components: Vec<FieldComponent>,
}

impl TransverseField {
    /// Empty field (identically zero).
    pub fn new() -> Self {
        TransverseField { components: Vec::new() }
    }

    /// Add a component with angular indices `l ∈ {1, 2}`, `|m| ≤ l` and a
    /// radial profile `u`.
    pub fn with_component(mut self, l: i64, m: i64, u: RadialFunction) -> VshResult<Self> {
        if !(1..=2).contains(&l) || m.abs() > l {
            return Err(VshError::InvalidIndices { family: "transverse", l, m });
        }
        let du = u.differentiate(1);
        self.components.push(FieldComponent { l, m, u, du });
        Ok(self)
    }

    /// The assembled components.
    pub fn components(&self) -> &[FieldComponent] {
        &self.components
    }

    /// Field value at a Cartesian point `x ≠ 0`.
    pub fn eval(&self, x: [f64; 3]) -> VshResult<[Complex64; 3]> {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 || !r.is_finite() {
            return Err(VshError::OriginEvaluation);
        }
        let p = AngularPoint::from_direction(x)?;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for c in &self.components {
            let root = ((c.l * (c.l + 1)) as f64).sqrt();
            let radial_y = root * c.u.evaluate(r)? / (r * r);
            let radial_psi = c.du.evaluate(r)? / r;
            let ups = eval_vsh(VshFamily::Upsilon, c.l, c.m, p)?;
            let psi = eval_vsh(VshFamily::Psi, c.l, c.m, p)?;
            for i in 0..3 {
                out[i] += radial_y * ups[i] + radial_psi * psi[i];
            }
        }
        Ok(out)
    }
}

/// `|∇·f| / ‖∇f‖` at a point, both sides by central differences with one
/// Richardson level (step `1e−4·|x|`).  A transverse field keeps this ratio
/// at the differencing floor; the zero field reports 0.
pub fn divergence_ratio(field: &TransverseField, x: [f64; 3]) -> VshResult<f64> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 || !r.is_finite() {
        return Err(VshError::OriginEvaluation);
    }
    let h = 1e-4 * r;
    let mut jacobian = [[Complex64::new(0.0, 0.0); 3]; 3];
    for axis in 0..3 {
        for comp in 0..3 {
            let g = |t: f64| -> Complex64 {
                let mut y = x;
                y[axis] = t;
                field.eval(y).expect("perturbed point stays off the origin")[comp]
            };
            jacobian[axis][comp] = numerics::finite_diff(&g, x[axis], 1, h)?;
        }
    }
    let div = jacobian[0][0] + jacobian[1][1] + jacobian[2][2];
    let mut frob = 0.0f64;
    for row in &jacobian {
        for v in row {
            frob += v.norm_sqr();
        }
    }
    let frob = frob.sqrt();
    if frob == 0.0 {
        return Ok(if div.norm() == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(div.norm() / frob)
}

/// CSV sampling of a field: header plus one row
/// `x,y,z,re_f1,im_f1,re_f2,im_f2,re_f3,im_f3` per point.
pub fn field_csv(field: &TransverseField, points: &[[f64; 3]]) -> VshResult<String> {
    let mut out = String::from("x,y,z,re_f1,im_f1,re_f2,im_f2,re_f3,im_f3\n");
    for &x in points {
        let f = field.eval(x)?;
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            x[0], x[1], x[2], f[0].re, f[0].im, f[1].re, f[1].im, f[2].re, f[2].im
        ));
    }
    Ok(out)
}

// ─────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────
