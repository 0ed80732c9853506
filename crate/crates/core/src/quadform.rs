//! Quadratic forms of the transverse vector Laplacian: the radial
//! sesquilinear form it induces, the identity chain tying that form to the
//! fourth-order operators, and the renormalized extension of the
//! three-dimensional form to profiles that are singular at the origin.
//!
//! For a transverse component with radial profile `u` the three-dimensional
//! scalar product contracts to the radial form
//!
//! ```text
//! ⟨v, u⟩_l = ∫₀^∞ ( v̄′u′ + l(l+1)/r² · v̄u ) dr
//! ```
//!
//! ([`angular_product`]).  On profiles vanishing at the origin together
//! with their derivatives, the form of the Laplacian obeys the chain
//! `⟨v, T_l u⟩_l = (T_l v, T_l u) = (v, T_l² u)` ([`form_chain_check`]) and
//! reduces through `ψ = E_l u` to a plain second-order form
//! ([`psi_map_check`]), which is how the fourth-order operators `T_l²`
//! enter in the first place.
//!
//! [`extended_form`] evaluates the renormalized quadratic form
//!
//! ```text
//! Q(f) = lim_{r→0} (  ∫_{|x|>r} Σ|∂_j f_k|² d³x  −  counterterms(r) )
//! ```
//!
//! on fields whose `l = 1` or `l = 2` components diverge at the origin as
//! `r^{−1}` or `r^{−2}`.  The integral over the ball complement equals the
//! exact radial integral `∫_r^∞ ū T_l² u` plus the closed-form boundary
//! term of [`sharp_cutoff_boundary_term`]; the counterterms are multiples
//! of the boundary density `f_l²(r) = |u′(r)|² + l(l+1)/r²·|u(r)|²`
//! ([`boundary_density`]).  The `κ`-dependent counterterm coefficients are
//! configurable ([`CounterTermCoefficients`]): the nominal constant set is
//! kept for comparison, and the internally consistent set — the one fixed
//! by requiring cutoff convergence together with the eigenvalue identity
//! `Q(ṽ) = −κ⁴‖ṽ‖²` — can be derived at runtime by
//! [`calibrate_kappa_coefficient`].
//!
//! ```
//! use num_complex::Complex64;
//! use radial4::quadform::angular_product;
//! use radial4::radialfn::{apply_e, inner_product, RadialFunction};
//!
//! // ⟨re^{−r}, re^{−r}⟩₁ = 5/4, and the E₁-factorized route agrees.
//! let u = RadialFunction::term(Complex64::new(1.0, 0.0), 1, Complex64::new(-1.0, 0.0));
//! let direct = angular_product(1, &u, &u).unwrap();
//! let e = apply_e(1, &u, false);
//! let factored = inner_product(&e, &e).unwrap();
//! assert!((direct.re - 1.25).abs() < 1e-14);
//! assert!((direct - factored).norm() < 1e-14);
//! ```

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::radialfn::{
    apply_e, apply_t, apply_t_squared, inner_product, RadialError, RadialFunction,
    POLE_CANCEL_RELATIVE,
};
use crate::spectral::{self, SpectralError};
use crate::vsh::TransverseField;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest boundary-condition residual (see
/// [`crate::spectral::boundary_residual`]) accepted by [`extended_form`]:
/// profiles must actually lie in the extension domain their `κ` describes,
/// otherwise the counterterms cannot renormalize the cutoff divergence.
pub const DOMAIN_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Convergence goal for the cutoff extrapolation: successive extrapolated
/// estimates must differ by less than this (relative to the value's scale)
/// before the limit is accepted.
pub const CUTOFF_CONVERGENCE_TOLERANCE: f64 = 1e-8;

/// Errors from form evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadformError {
    /// A malformed argument (cutoff sequence, power, …).
    InvalidParameter {
        /// Name of the offending argument.
        name: &'static str,
        /// The rejected value.
        value: f64,
    },
    /// A field component has no `κ` assigned in the map.
    MissingKappa {
        /// Angular momentum of the component.
        l: i64,
        /// Azimuthal index of the component.
        m: i64,
    },
    /// A profile whose boundary values violate the extension domain its
    /// `κ` describes.
    NotInDomain {
        /// Angular momentum of the component.
        l: i64,
        /// Azimuthal index of the component.
        m: i64,
        /// The measured boundary residual.
        residual: f64,
    },
    /// The regularized cutoff sequence did not settle within
    /// [`CUTOFF_CONVERGENCE_TOLERANCE`].
    NonConvergent {
        /// The smallest gap between successive extrapolated estimates.
        delta: f64,
    },
    /// An exact integration or evaluation failed.
    Radial(RadialError),
    /// A boundary-condition or eigenfunction request failed.
    Spectral(SpectralError),
}

impl fmt::Display for QuadformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadformError::InvalidParameter { name, value } => {
                write!(f, "invalid {name} = {value}")
            }
            QuadformError::MissingKappa { l, m } => {
                write!(f, "no extension parameter assigned for component l = {l}, m = {m}")
            }
            QuadformError::NotInDomain { l, m, residual } => write!(
                f,
                "component l = {l}, m = {m} violates its extension domain \
                 (boundary residual {residual:e})"
            ),
            QuadformError::NonConvergent { delta } => write!(
                f,
                "regularized cutoff sequence did not converge (last gap {delta:e})"
            ),
            QuadformError::Radial(e) => write!(f, "exact integration failed: {e}"),
            QuadformError::Spectral(e) => write!(f, "boundary analysis failed: {e}"),
        }
    }
}

impl std::error::Error for QuadformError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            QuadformError::Radial(e) => Some(e),
            QuadformError::Spectral(e) => Some(e),
            _ => None,
        }
    }
}

impl From<RadialError> for QuadformError {
    fn from(e: RadialError) -> Self {
        QuadformError::Radial(e)
    }
}

impl From<SpectralError> for QuadformError {
    fn from(e: SpectralError) -> Self {
        QuadformError::Spectral(e)
    }
}

/// Convenience alias for results of form operations.
pub type QuadformResult<T> = Result<T, QuadformError>;

/// Highest order kept by the stable small-radius series evaluator.
const SERIES_EVAL_ORDER: i64 = 64;

/// Largest `|rate|·r` for which the origin series is the better-conditioned
/// evaluation route; beyond it, direct term summation is already stable.
const SERIES_PHASE_LIMIT: f64 = 4.0;

fn cre(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn validate_l(l: i64) -> QuadformResult<()> {
    if (1..=2).contains(&l) {
        Ok(())
    } else {
        Err(QuadformError::InvalidParameter { name: "l", value: l as f64 })
    }
}

// ─────────────────────────────────────────────────────────────────────────
// The radial sesquilinear form and its identity chain
// ─────────────────────────────────────────────────────────────────────────

/// The radial form `⟨v, u⟩_l = ∫₀^∞ (v̄′u′ + l(l+1)/r²·v̄u) dr`, by exact
/// integration.
///
/// This is what the three-dimensional scalar product of two transverse
/// fields with profiles `v`, `u` contracts to; it also equals the
/// factorized plain product `(E_l v, E_l u)`.
pub fn angular_product(
    l: i64,
    v: &RadialFunction,
    u: &RadialFunction,
) -> QuadformResult<Complex64> {
    validate_l(l)?;
    let big_l = (l * (l + 1)) as f64;
    let derivative_part = inner_product(&v.differentiate(1), &u.differentiate(1))?;
    let angular_part = inner_product(&v.mul_power(-1), &u.mul_power(-1))?;
    Ok(derivative_part + big_l * angular_part)
}

/// Maximum relative discrepancy among the three-way identity
/// `⟨v, T_l u⟩_l = (T_l v, T_l u) = (v, T_l² u)`.
///
/// The integrations by parts behind the identity carry boundary residues
/// like `v̄′(0)·(T_l u)(0)` — but whenever such a residue is nonzero, one
/// of the three integrals diverges at the origin (the residue's profile
/// pair makes the centrifugal integrand non-integrable), surfacing as a
/// `Radial` error.  On every profile pair for which all integrals
/// converge the chain is exact, so the returned discrepancy is a rounding
/// diagnostic.
pub fn form_chain_check(
    l: i64,
    v: &RadialFunction,
    u: &RadialFunction,
) -> QuadformResult<f64> {
    validate_l(l)?;
    let tu = apply_t(l, u);
    let first = angular_product(l, v, &tu)?;
    let second = inner_product(&apply_t(l, v), &tu)?;
    let third = inner_product(v, &apply_t_squared(l, u))?;
    let scale = first.norm().max(second.norm()).max(third.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    let spread = (first - second)
        .norm()
        .max((first - third).norm())
        .max((second - third).norm());
    Ok(spread / scale)
}

/// Relative discrepancy of the order reduction `⟨u, T_l u⟩_l =
/// (ψ_u, T_{l−1} ψ_u)` with `ψ_u = E_l u`.
///
/// This is the map that carries the form of `T_l` in the radial product
/// into the plain form of the lower operator `T_{l−1}` (a plain second
/// derivative for `l = 1`).
pub fn psi_map_check(l: i64, u: &RadialFunction) -> QuadformResult<f64> {
    validate_l(l)?;
    let direct = angular_product(l, u, &apply_t(l, u))?;
    let psi = apply_e(l, u, false);
    let reduced = inner_product(&psi, &apply_t(l - 1, &psi))?;
    let scale = direct.norm().max(reduced.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((direct - reduced).norm() / scale)
}

// ─────────────────────────────────────────────────────────────────────────
// Boundary quantities at a sharp cutoff
// ─────────────────────────────────────────────────────────────────────────

/// The boundary density `f_l²(r) = |u′(r)|² + l(l+1)/r²·|u(r)|²`.
///
/// This is the nonnegative quantity the counterterms of [`extended_form`]
/// multiply: the squared field strength of the transverse component on the
/// sphere of radius `r`, gathered back into the radial profile.
///
/// # Panics
///
/// Panics if `r ≤ 0` or is not finite.
pub fn boundary_density(l: i64, u: &RadialFunction, r: f64) -> f64 {
    assert!(r > 0.0 && r.is_finite(), "boundary density requires r > 0, got {r}");
    let big_l = (l * (l + 1)) as f64;
    let du = u.differentiate(1).evaluate(r).expect("positive radius");
    let val = u.evaluate(r).expect("positive radius");
    du.norm_sqr() + big_l / (r * r) * val.norm_sqr()
}

fn density_function(l: i64, u: &RadialFunction) -> RadialFunction {
    let big_l = (l * (l + 1)) as f64;
    let ubar = u.conj();
    let derivative_part = ubar.differentiate(1).product(&u.differentiate(1));
    let angular_part = ubar.product(u).mul_power(-2).scale(cre(big_l));
    &derivative_part + &angular_part
}

/// The exact boundary term `B_l(r)` of the sharp cutoff: for any profile,
///
/// ```text
/// ∫_{|x|>r} Σ|∂_j f_k|² d³x  =  ∫_r^∞ ū T_l² u dr  +  B_l(r) ,
///
/// B_l = ū u‴ − ū′u″ + ū′u′/r − 2l(l+1)·ū u′/r² + 4l(l+1)·ū u/r³ ,
/// ```
///
/// returned as a closed-form object in the term algebra.  The identity is
/// algebraic (two integrations by parts in `r` plus the surface flux of
/// the vector field), so the sum on the right is real for every profile
/// even though the two summands individually are not.
pub fn sharp_cutoff_boundary_term(l: i64, u: &RadialFunction) -> RadialFunction {
    let big_l = (l * (l + 1)) as f64;
    let ubar = u.conj();
    let dubar = ubar.differentiate(1);
    let third = ubar.product(&u.differentiate(3));
    let second = dubar.product(&u.differentiate(2)).scale(cre(-1.0));
    let gradient = dubar.product(&u.differentiate(1)).mul_power(-1);
    let mixed = ubar.product(&u.differentiate(1)).mul_power(-2).scale(cre(-2.0 * big_l));
    let centrifugal = ubar.product(u).mul_power(-3).scale(cre(4.0 * big_l));
    &(&(&third + &second) + &gradient) + &(&mixed + &centrifugal)
}

fn fastest_rate(g: &RadialFunction) -> f64 {
    g.terms().iter().map(|t| t.rate.norm()).fold(0.0, f64::max)
}

/// Evaluate `g(r)` through its origin series when `r` is small.
///
/// Products of domain profiles carry individual `r^{−k}` terms whose exact
/// cancellation leaves values many orders below the summands, so direct
/// term summation loses all precision at small radii; the series
/// coefficients are assembled without that inflation.  Negative-power
/// coefficients below the algebra's cancellation threshold are exact zeros
/// analytically and are dropped; genuine divergences are kept so that
/// sequences which must blow up do blow up.
fn stable_value(g: &RadialFunction, r: f64) -> Complex64 {
    if g.is_zero() {
        return Complex64::new(0.0, 0.0);
    }
    if fastest_rate(g) * r > SERIES_PHASE_LIMIT {
        return g.evaluate(r).expect("positive radius");
    }
    let lowest = g.min_power().unwrap_or(0).min(0);
    let series = g.series_at_zero(lowest, SERIES_EVAL_ORDER);
    let scale = g.max_abs_coeff();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in lowest..=SERIES_EVAL_ORDER {
        let c = series.coeff(n);
        if n < 0 && c.norm() <= POLE_CANCEL_RELATIVE * scale {
            continue;
        }
        sum += c * r.powi(n as i32);
    }
    sum
}

/// `∫₀^r g` through the origin series when `r` is small (same conditioning
/// argument as [`stable_value`]: the finite-part antiderivatives of the
/// individual poles grow like `r^{1−m}` while their sum stays `O(r)`).
/// Any genuinely divergent coefficient defers to the exact integrator,
/// whose verdict on integrability is authoritative.
fn stable_partial_integral(g: &RadialFunction, r: f64) -> QuadformResult<Complex64> {
    if g.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if fastest_rate(g) * r > SERIES_PHASE_LIMIT {
        return Ok(g.integrate(0.0, r)?);
    }
    let lowest = g.min_power().unwrap_or(0).min(0);
    let series = g.series_at_zero(lowest, SERIES_EVAL_ORDER);
    let scale = g.max_abs_coeff();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in lowest..=SERIES_EVAL_ORDER {
        let c = series.coeff(n);
        if n < 0 {
            if c.norm() > POLE_CANCEL_RELATIVE * scale {
                return Ok(g.integrate(0.0, r)?);
            }
            continue;
        }
        sum += c * r.powi(n as i32 + 1) / (n + 1) as f64;
    }
    Ok(sum)
}

// ─────────────────────────────────────────────────────────────────────────
// Counterterm coefficients and extension parameters
// ─────────────────────────────────────────────────────────────────────────

/// Coefficients of the `κ`-dependent parts of the boundary counterterms.
///
/// The full counterterms subtracted at cutoff `r` are
///
/// ```text
/// l = 1:  ( l1_kappa·κ  + 5/(3r) ) · f₁²(r)
/// l = 2:  ( l2_kappa·κ³·r^l2_cutoff_power + 4/r ) · f₂²(r)
/// ```
///
/// The `5/(3r)` and `4/r` parts match the cutoff divergence of the bulk
/// integral exactly and are not configurable.  Two coefficient sets ship
/// with the crate:
///
/// * [`CounterTermCoefficients::nominal`] — the constants `22√2/9` and
///   `80√2/750` with no cutoff factor on the `l = 2` term.  This set is
///   the [`Default`], kept for traceability, but it does **not** pass the
///   consistency checks: the `l = 2` member multiplies a density diverging
///   as `r^{−2}`, so no nonzero constant can give a convergent limit.
/// * [`CounterTermCoefficients::calibrated`] — `22√2/27` and `√2/3` with
///   an `r²` factor on the `l = 2` term.  These are the unique values for
///   which the limit exists on every extension domain and equals the
///   spectral value `−κ⁴‖ṽ‖²` on the exact eigenfunctions;
///   [`calibrate_kappa_coefficient`] re-derives them numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterTermCoefficients {
    /// Multiplies `κ·f₁²(r)` in the `l = 1` counterterm.
    pub l1_kappa: f64,
    /// Multiplies `κ³·r^l2_cutoff_power·f₂²(r)` in the `l = 2` counterterm.
    pub l2_kappa: f64,
    /// Power of the cutoff radius attached to the `l = 2` `κ³` term.
    pub l2_cutoff_power: i64,
}

impl CounterTermCoefficients {
    /// The nominal constant set (`22√2/9`, `80√2/750`, no cutoff factor).
    pub fn nominal() -> Self {
        CounterTermCoefficients {
            l1_kappa: 22.0 * SQRT_2 / 9.0,
            l2_kappa: 80.0 * SQRT_2 / 750.0,
            l2_cutoff_power: 0,
        }
    }

    /// The internally consistent set (`22√2/27`, `√2/3` carrying `r²`).
    pub fn calibrated() -> Self {
        CounterTermCoefficients {
            l1_kappa: 22.0 * SQRT_2 / 27.0,
            l2_kappa: SQRT_2 / 3.0,
            l2_cutoff_power: 2,
        }
    }
}

impl Default for CounterTermCoefficients {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Assignment of extension parameters `κ` to field components.
///
/// `κ = −∞` is the Friedrichs-type sentinel: the component's domain pins
/// the singular boundary value to zero and the `κ`-dependent counterterm
/// is absent.
#[derive(Debug, Clone, Default)]
pub struct KappaMap {
    default: Option<f64>,
    entries: BTreeMap<(i64, i64), f64>,
}

impl KappaMap {
    /// Empty map: every component must be assigned explicitly.
    pub fn new() -> Self {
        Self::default()
    }

    /// Map assigning the same `κ` to every component.
    pub fn uniform(kappa: f64) -> Self {
        KappaMap { default: Some(kappa), entries: BTreeMap::new() }
    }

    /// Assign `κ` to the component `(l, m)`, overriding any uniform value.
    pub fn with_component(mut self, l: i64, m: i64, kappa: f64) -> Self {
        self.entries.insert((l, m), kappa);
        self
    }

    /// The parameter assigned to `(l, m)`, if any.
    pub fn kappa(&self, l: i64, m: i64) -> Option<f64> {
        self.entries.get(&(l, m)).copied().or(self.default)
    }
}

// ─────────────────────────────────────────────────────────────────────────
// The extended quadratic form
// ─────────────────────────────────────────────────────────────────────────

/// One component's share of an extended-form evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentContribution {
    /// Angular momentum of the component.
    pub l: i64,
    /// Azimuthal index of the component.
    pub m: i64,
    /// The extension parameter used (non-finite values serialize as null).
    pub kappa: f64,
    /// The full Dirichlet integral over the ball complement at the finest
    /// cutoff — always nonnegative.
    pub bulk: f64,
    /// The counterterm subtracted at the finest cutoff.
    pub counterterm: f64,
    /// This component's extrapolated limit.
    pub limit: f64,
}

/// Result of an [`extended_form`] evaluation with its convergence
/// diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FormValue {
    /// The extrapolated limit of the regularized expression.
    pub value: f64,
    /// Per-component breakdown.
    pub per_component: Vec<ComponentContribution>,
    /// The cutoff radii that were evaluated, in decreasing order.
    pub cutoffs: Vec<f64>,
    /// The total regularized value at each cutoff.
    pub regularized: Vec<f64>,
    /// Largest gap between the accepted successive extrapolated estimates
    /// across components.
    pub achieved_delta: f64,
}

impl FormValue {
    /// Serialize the report (value, per-component breakdown, cutoffs and
    /// convergence diagnostics) as JSON.  Non-finite `κ` entries — the
    /// Friedrichs sentinel — appear as `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("form reports always serialize")
    }
}

/// Geometrically halving cutoff radii `start, start/2, …` (`count` values),
/// the natural input sequence for [`extended_form`]'s extrapolation.
pub fn halving_cutoffs(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start / (1u64 << i) as f64).collect()
}

/// The cutoff sequence used by the crate's own tests and the command-line
/// tools: ten halvings from `0.4`.  The deep end of the sequence is safe
/// because the pipeline evaluates the boundary algebra through its origin
/// series rather than by direct term summation.
pub fn default_cutoffs() -> Vec<f64> {
    halving_cutoffs(0.4, 10)
}

/// Polynomial extrapolation of the regularized values to cutoff zero
/// (Neville scheme on the nodes `hs`).  The diagonal estimate with the
/// smallest gap to its predecessor wins — for analytic sequences the gaps
/// shrink geometrically until the rounding floor and then turn around, so
/// this picks the bottom of that valley.  Returns the winning estimate and
/// gap, or the gap alone when it never met the convergence goal.
fn extrapolate_to_zero(hs: &[f64], ys: &[f64]) -> Result<(f64, f64), f64> {
    let n = hs.len();
    let mut table = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        table[i][0] = ys[i];
        for j in 1..=i {
            table[i][j] = (hs[i - j] * table[i][j - 1] - hs[i] * table[i - 1][j - 1])
                / (hs[i - j] - hs[i]);
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for i in 1..n {
        let gap = (table[i][i] - table[i - 1][i - 1]).abs();
        if best.map_or(true, |(_, smallest)| gap < smallest) {
            best = Some((table[i][i], gap));
        }
    }
    let (value, gap) = best.expect("at least two cutoffs");
    if gap < CUTOFF_CONVERGENCE_TOLERANCE * value.abs().max(1.0) {
        Ok((value, gap))
    } else {
        Err(gap)
    }
}

struct ComponentOutcome {
    contribution: ComponentContribution,
    regularized: Vec<f64>,
}

fn component_form(
    l: i64,
    m: i64,
    kappa: f64,
    u: &RadialFunction,
    cutoffs: &[f64],
    coefficients: &CounterTermCoefficients,
) -> QuadformResult<ComponentOutcome> {
    let residual = spectral::boundary_residual(l, u, kappa)?;
    if residual > DOMAIN_RESIDUAL_TOLERANCE {
        return Err(QuadformError::NotInDomain { l, m, residual });
    }

    let integrand = u.conj().product(&apply_t_squared(l, u));
    let whole_line = integrand.integrate_halfline()?;
    let boundary = sharp_cutoff_boundary_term(l, u);
    let density = density_function(l, u);
    let counterterm = {
        let kappa_coeff = match l {
            1 if kappa.is_finite() => coefficients.l1_kappa * kappa,
            2 if kappa.is_finite() => coefficients.l2_kappa * kappa.powi(3),
            _ => 0.0,
        };
        let structural = match l {
            1 => density.mul_power(-1).scale(cre(5.0 / 3.0)),
            _ => density.mul_power(-1).scale(cre(4.0)),
        };
        let kappa_power = if l == 1 { 0 } else { coefficients.l2_cutoff_power };
        &structural + &density.mul_power(kappa_power).scale(cre(kappa_coeff))
    };
    // The regularized expression at one cutoff; the divergent pieces of
    // the boundary term and counterterm cancel inside this difference, so
    // it is evaluated as a single canonical object.
    let regular_part = &boundary - &counterterm;

    let mut regularized = Vec::with_capacity(cutoffs.len());
    for &r in cutoffs {
        let tail = whole_line - stable_partial_integral(&integrand, r)?;
        regularized.push((tail + stable_value(&regular_part, r)).re);
    }

    let (limit, delta) = extrapolate_to_zero(cutoffs, &regularized)
        .map_err(|delta| QuadformError::NonConvergent { delta })?;

    let finest = *cutoffs.last().expect("validated nonempty");
    let tail = whole_line - stable_partial_integral(&integrand, finest)?;
    let bulk = (tail + stable_value(&boundary, finest)).re;
    let subtracted = stable_value(&counterterm, finest).re;
    Ok(ComponentOutcome {
        contribution: ComponentContribution { l, m, kappa, bulk, counterterm: subtracted, limit },
        regularized,
    })
}

/// The renormalized quadratic form of a transverse field.
///
/// For each `(l, m)` component (components sharing indices are first merged
/// by profile addition — the form has cross terms within one index pair,
/// while distinct pairs are orthogonal), the Dirichlet integral over the
/// complement of the ball of radius `r` is evaluated exactly, the
/// counterterm `(c_κ + structural/r)·f_l²(r)` is subtracted, and the
/// cutoff sequence is extrapolated to zero.
///
/// The cutoff radii must be finite, positive, strictly decreasing, and at
/// least three.  Every component's profile must satisfy the boundary
/// conditions of the extension its `κ` describes within
/// [`DOMAIN_RESIDUAL_TOLERANCE`]; regular profiles (vanishing at the origin
/// with their derivatives) satisfy every extension at once, and on them the
/// value is `κ`-independent and equals the plain form `(u, T_l² u)`.
pub fn extended_form(
    field: &TransverseField,
    kappas: &KappaMap,
    cutoffs: &[f64],
    coefficients: &CounterTermCoefficients,
) -> QuadformResult<FormValue> {
    if cutoffs.len() < 3 {
        return Err(QuadformError::InvalidParameter {
            name: "cutoff count",
            value: cutoffs.len() as f64,
        });
    }
    for pair in cutoffs.windows(2) {
        if !(pair[1] > 0.0) || !pair[1].is_finite() || pair[1] >= pair[0] {
            return Err(QuadformError::InvalidParameter { name: "cutoff", value: pair[1] });
        }
    }
    if !(cutoffs[0].is_finite() && cutoffs[0] > 0.0) {
        return Err(QuadformError::InvalidParameter { name: "cutoff", value: cutoffs[0] });
    }

    let mut merged: BTreeMap<(i64, i64), RadialFunction> = BTreeMap::new();
    for component in field.components() {
        let key = (component.l(), component.m());
        let entry = merged.remove(&key);
        let combined = match entry {
            Some(existing) => &existing + component.profile(),
            None => component.profile().clone(),
        };
        merged.insert(key, combined);
    }

    let jobs: Vec<((i64, i64), RadialFunction)> = merged.into_iter().collect();
    let run = |((l, m), u): &((i64, i64), RadialFunction)| -> QuadformResult<ComponentOutcome> {
        let kappa = kappas
            .kappa(*l, *m)
            .ok_or(QuadformError::MissingKappa { l: *l, m: *m })?;
        component_form(*l, *m, kappa, u, cutoffs, coefficients)
    };
    #[cfg(feature = "parallel")]
    let outcomes: QuadformResult<Vec<ComponentOutcome>> = jobs.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: QuadformResult<Vec<ComponentOutcome>> = jobs.iter().map(run).collect();
    let outcomes = outcomes?;

    let mut regularized = vec![0.0f64; cutoffs.len()];
    let mut value = 0.0f64;
    let mut per_component = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        for (total, q) in regularized.iter_mut().zip(&outcome.regularized) {
            *total += q;
        }
        value += outcome.contribution.limit;
        per_component.push(outcome.contribution);
    }
    // The sum of convergent sequences converges at the slowest member's
    // rate, so the total's extrapolation gap is the honest diagnostic.
    let achieved_delta = if per_component.is_empty() {
        0.0
    } else {
        match extrapolate_to_zero(cutoffs, &regularized) {
            Ok((_, delta)) | Err(delta) => delta,
        }
    };

    Ok(FormValue { value, per_component, cutoffs: cutoffs.to_vec(), regularized, achieved_delta })
}

/// Derive the `κ`-part counterterm coefficient for one `l` from first
/// principles: the regularized limit is affine in the coefficient, so two
/// trial evaluations on the exact eigenfunction `ṽ_l^κ` determine the
/// unique value for which the limit equals the spectral identity
/// `Q(ṽ) = −κ⁴·(ṽ, ṽ)`.
///
/// The returned value is dimensionless (`κ` scaled out) and matches
/// [`CounterTermCoefficients::calibrated`]: `22√2/27 ≈ 1.1524` for `l = 1`
/// and `√2/3 ≈ 0.4714` for `l = 2` (the latter defined with the `r²`
/// cutoff factor, the only structure for which any nonzero coefficient
/// converges).
pub fn calibrate_kappa_coefficient(l: i64, kappa: f64) -> QuadformResult<f64> {
    validate_l(l)?;
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(QuadformError::InvalidParameter { name: "kappa", value: kappa });
    }
    let u = spectral::discrete_eigenfunction(l, kappa, false)?;
    let target = -kappa.powi(4) * inner_product(&u, &u)?.re;
    let cutoffs = default_cutoffs();
    let trial = |coefficient: f64| -> QuadformResult<f64> {
        let mut coefficients = CounterTermCoefficients::calibrated();
        match l {
            1 => coefficients.l1_kappa = coefficient,
            _ => coefficients.l2_kappa = coefficient,
        }
        Ok(component_form(l, 0, kappa, &u, &cutoffs, &coefficients)?.contribution.limit)
    };
    let at_zero = trial(0.0)?;
    let at_one = trial(1.0)?;
    let slope = at_one - at_zero;
    if slope == 0.0 {
        return Err(QuadformError::NonConvergent { delta: f64::INFINITY });
    }
    Ok((target - at_zero) / slope)
}

// ─────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────
