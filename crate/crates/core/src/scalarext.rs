//! Self-adjoint extensions of the scalar half-line operator `T = −d²/dr²`.
//!
//! The minimal operator on functions vanishing at the origin has deficiency
//! indices (1, 1); its extensions form a one-parameter family labelled by
//! `a ∈ [0, π)` together with a dimensional scale `ρ > 0`.  This module
//! constructs the deficiency elements `g_± = exp{e^{∓i3π/4} ρ r}`, the real
//! extension element `h^a`, the boundary-condition slope `κ(a)`, and the
//! extended quadratic form
//! `Q_a(u) = −κ(a)|u(0)|² + ∫₀^∞ |u′|² dr`.
//!
//! Everything is exact in the term algebra; boundary values come from
//! series expansion at the origin.
//!
//! # Example
//!
//! ```
//! use radial4::scalarext::{scalar_kappa, ScalarExtension};
//!
//! let ext = ScalarExtension::new(std::f64::consts::FRAC_PI_2, 1.0).unwrap();
//! assert!((scalar_kappa(&ext) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
//! ```

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

use crate::radialfn::{boundary_values, inner_product, RadialError, RadialFunction};

/// Sign selector for deficiency elements (`+i` or `−i` spectral side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// The `+` family (eigenvalue `+i·scale`).
    Plus,
    /// The `−` family (eigenvalue `−i·scale`).
    Minus,
}

/// Errors from the scalar-extension constructions.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarError {
    /// Parameter out of range (`a ∉ [0, π)` or `ρ ≤ 0`).
    InvalidParameter { name: &'static str, value: f64 },
    /// An underlying exact-integration or boundary-value failure.
    Radial(RadialError),
}

impl fmt::Display for ScalarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarError::InvalidParameter { name, value } => {
                write!(f, "invalid scalar extension parameter {name} = {value}")
            }
            ScalarError::Radial(e) => write!(f, "term-algebra failure: {e}"),
        }
    }
}

impl std::error::Error for ScalarError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ScalarError::Radial(e) => Some(e),
            _ => None,
        }
    }
}

impl From<RadialError> for ScalarError {
    fn from(e: RadialError) -> Self {
        ScalarError::Radial(e)
    }
}

/// Convenience alias for results of scalar-extension operations.
pub type ScalarResult<T> = Result<T, ScalarError>;

/// One self-adjoint extension of `−d²/dr²`, labelled by the unitary
/// parameter `a ∈ [0, π)` (from `e^{2ia}`) and the scale `ρ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarExtension {
    a: f64,
    rho: f64,
}

impl ScalarExtension {
    /// Validated constructor: requires `0 ≤ a < π` and `ρ > 0`.
    pub fn new(a: f64, rho: f64) -> ScalarResult<Self> {
        if !(0.0..PI).contains(&a) {
            return Err(ScalarError::InvalidParameter { name: "a", value: a });
        }
        if !(rho > 0.0) {
            return Err(ScalarError::InvalidParameter { name: "rho", value: rho });
        }
        Ok(ScalarExtension { a, rho })
    }

    /// Unitary extension parameter `a`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Dimensional scale `ρ` (inverse length).
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Deficiency element `g_± = exp{e^{∓i3π/4} ρ r}`, the decaying solution of
/// `g″ = ±iρ² g` (equivalently `T g_± = ∓iρ² g_±` for `T = −d²/dr²`).
pub fn scalar_deficiency(sign: Sign, ext: &ScalarExtension) -> RadialFunction {
    let angle = match sign {
        Sign::Plus => -3.0 * PI / 4.0,
        Sign::Minus => 3.0 * PI / 4.0,
    };
    RadialFunction::exponential(Complex64::new(1.0, 0.0), Complex64::from_polar(ext.rho, angle))
}

/// Extension element `h^a = (e^{ia} g_+ − e^{−ia} g_−)/(2iρ²)`,
/// real-valued on `r > 0`.
pub fn scalar_extension_element(ext: &ScalarExtension) -> RadialFunction {
    let gp = scalar_deficiency(Sign::Plus, ext);
    let gm = scalar_deficiency(Sign::Minus, ext);
    let denom = Complex64::new(0.0, 2.0 * ext.rho * ext.rho);
    let cp = Complex64::from_polar(1.0, ext.a) / denom;
    let cm = Complex64::from_polar(1.0, -ext.a) / denom;
    &gp.scale(cp) - &gm.scale(cm)
}

/// Boundary-condition slope `κ(a) = ρ sin(a − π/4)/sin a`.
///
/// Returns the `−∞` sentinel at `a = 0` (the Friedrichs extension, where the
/// boundary condition degenerates to `u(0) = 0`).  `κ > 0` exactly on the
/// discrete-spectrum window `π/4 < a < π`.
pub fn scalar_kappa(ext: &ScalarExtension) -> f64 {
    if ext.a == 0.0 {
        return f64::NEG_INFINITY;
    }
    ext.rho * (ext.a - PI / 4.0).sin() / ext.a.sin()
}

/// Extended quadratic form `Q_a(u) = −κ(a)|u(0)|² + ∫₀^∞ |u′|² dr`.
///
/// At the Friedrichs sentinel (`κ = −∞`) the form is `+∞` unless
/// `u(0) = 0`, in which case the boundary term drops.  For any `u` with
/// `u(0) = 0` the value is independent of `a`.
pub fn scalar_form(u: &RadialFunction, ext: &ScalarExtension) -> ScalarResult<f64> {
    let kappa = scalar_kappa(ext);
    let u0 = boundary_values(u, 0)?[0];
    let du = u.differentiate(1);
    let gradient = inner_product(&du, &du)?.re;
    if kappa == f64::NEG_INFINITY {
        let scale = u.max_abs_coeff().max(1e-300);
        if u0.norm() > 1e-10 * scale {
            return Ok(f64::INFINITY);
        }
        return Ok(gradient);
    }
    Ok(-kappa * u0.norm_sqr() + gradient)
}
