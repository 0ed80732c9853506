//! Resolvent and inverse-operator kernels for the extended fourth-order
//! operators.
//!
//! For spectral parameter `z⁴` with `z` in the open sector `0 < arg z < π/2`,
//! the resolvent of the extension `T_l²(κ)` is an integral operator whose
//! kernel splits into two ordered separable blocks and one unordered smooth
//! part:
//!
//! ```text
//! R(r,s;z) = (1/2z²W₋)·h̃₋(r<)g₋(r>) − (1/2z²W₊)·h̃₊(r<)g₊(r>)
//!            + (β₋/2z²W₋)·(g₊(r)g₋(s) + g₊(s)g₋(r))
//! ```
//!
//! Here `g₋, g₊` are the decaying images `D_l e^{izr}, D_l e^{−zr}`, and
//! `h̃∓` combine the growing exponential with a decaying partner so that the
//! second-order factor equations `(T_l ∓ z²)h̃∓ = 0` hold exactly while the
//! full `r<`-profile satisfies the extension's boundary condition at zero.
//! The mixing coefficients `α±, β±` and the Wronskian normalizations `W±`
//! are closed forms in `z` and `κ`; the identity `β₋/W₋ = −β₊/W₊` is what
//! makes the two `β`-cross terms symmetrize into the smooth part and cancels
//! the kernel's would-be pole at the origin.
//!
//! The `z → 0` limits for `κ ≠ 0` are the inverse kernels `Θ_l`, built from
//! the polynomial kernels of `T_l^{−2}` plus a rank-one term that restores
//! the boundary condition ([`inverse_kernel`]).  [`apply_kernel`] realizes
//! the integral operator, exactly in the term algebra when the operand is a
//! [`RadialFunction`] and by adaptive quadrature otherwise.
//!
//! ```
//! use radial4::kernels::inverse_kernel;
//!
//! // Θ₁(1,1) at κ = 1 is (1/6)(4/5 − 3/√2).
//! let theta = inverse_kernel(1, 1.0).unwrap();
//! let v = theta.evaluate(1.0, 1.0).unwrap();
//! let want = (0.8 - 3.0 / f64::sqrt(2.0)) / 6.0;
//! assert!((v.re - want).abs() < 1e-14 && v.im.abs() < 1e-14);
//! ```

use std::fmt;

use num_complex::Complex64;

use crate::numerics::{self, NumericsError, QuadratureSpec};
use crate::radialfn::{apply_d, RadialError, RadialFunction};

/// A coefficient denominator smaller than this, relative to its natural
/// scale, is treated as an exact resonance (`z⁴` hitting the discrete
/// eigenvalue `−κ⁴`).
pub const DEGENERATE_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Errors produced by kernel constructions.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    /// `z` is not strictly inside the sector `0 < arg z < π/2`.
    OutsideSector {
        /// The rejected spectral parameter.
        z: Complex64,
    },
    /// A coefficient denominator vanishes: `z⁴` coincides with the discrete
    /// eigenvalue `−κ⁴` of the extension.
    DegenerateZ {
        /// The resonant spectral parameter.
        z: Complex64,
    },
    /// A parameter is outside its admissible range (`l ∉ {1,2}`, `κ = 0`
    /// for an inverse kernel, nonpositive evaluation point, …).
    InvalidParameter {
        /// Name of the offending parameter.
        name: &'static str,
        /// The rejected value.
        value: f64,
    },
    /// An exact term-algebra operation failed (non-integrable input, …).
    Radial(RadialError),
    /// A numerical quadrature failed.
    Numerics(NumericsError),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::OutsideSector { z } => {
                write!(f, "spectral parameter z = {z} is outside the open sector 0 < arg z < π/2")
            }
            KernelError::DegenerateZ { z } => {
                write!(f, "resolvent degenerate at z = {z} (z⁴ hits the discrete eigenvalue)")
            }
            KernelError::InvalidParameter { name, value } => {
                write!(f, "invalid kernel parameter {name} = {value}")
            }
            KernelError::Radial(e) => write!(f, "term-algebra operation failed: {e}"),
            KernelError::Numerics(e) => write!(f, "quadrature failed: {e}"),
        }
    }
}

impl std::error::Error for KernelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            KernelError::Radial(e) => Some(e),
            KernelError::Numerics(e) => Some(e),
            _ => None,
        }
    }
}

impl From<RadialError> for KernelError {
    fn from(e: RadialError) -> Self {
        KernelError::Radial(e)
    }
}

impl From<NumericsError> for KernelError {
    fn from(e: NumericsError) -> Self {
        KernelError::Numerics(e)
    }
}

/// Convenience alias for results of kernel operations.
pub type KernelResult<T> = Result<T, KernelError>;

fn validate_l(l: i64) -> KernelResult<()> {
    if l == 1 || l == 2 {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter { name: "l", value: l as f64 })
    }
}

/// Require `z` strictly inside the open quarter sector.
fn validate_sector(z: Complex64) -> KernelResult<()> {
    if z.re > 0.0 && z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(KernelError::OutsideSector { z })
    }
}

/// `κ` may be any finite real or the `−∞` sentinel of the limiting
/// extension; `NaN` and `+∞` are rejected.
fn validate_kappa(kappa: f64) -> KernelResult<()> {
    if kappa.is_nan() || kappa == f64::INFINITY {
        Err(KernelError::InvalidParameter { name: "kappa", value: kappa })
    } else {
        Ok(())
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Resolvent coefficients
// ─────────────────────────────────────────────────────────────────────────

/// Closed-form mixing and normalization coefficients of the resolvent kernel.
///
/// The `α`/`β` pairs mix the decaying exponential images into the two
/// boundary solutions; `W∓` are the Wronskian normalizations of the
/// `(T_l ∓ z²)` solution pairs.  The cancellation identity
/// `β₋/W₋ = −β₊/W₊` holds for every admissible `(z, κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventCoefficients {
    /// Coefficient of `e^{−zr}` inside `h̃₊`.
    pub alpha_plus: Complex64,
    /// Coefficient of `e^{izr}` inside `h̃₋`.
    pub alpha_minus: Complex64,
    /// Cross coefficient of `e^{izr}` attached to the `+` boundary solution.
    pub beta_plus: Complex64,
    /// Cross coefficient of `e^{−zr}` attached to the `−` boundary solution.
    pub beta_minus: Complex64,
    /// Wronskian normalization of the `(T_l + z²)` pair.
    pub w_plus: Complex64,
    /// Wronskian normalization of the `(T_l − z²)` pair.
    pub w_minus: Complex64,
    /// The spectral parameter, strictly inside the sector `0 < arg z < π/2`.
    pub z: Complex64,
}

/// Compute the resolvent coefficients for angular number `l`, spectral
/// parameter `z` (open sector), and boundary parameter `κ`.
///
/// With `d = (i−1)z + √2κ` (`l = 1`) or `d = (i+1)z³ + √2κ³` (`l = 2`):
///
/// * `l = 1`: `α₊ = −((i+1)z + √2κ)/d`, `β₊ = 2z/d`,
///   `α₋ = ((i+1)z − √2κ)/d`, `β₋ = −2iz/d`, `W₋ = −2iz³`, `W₊ = −2z³`;
/// * `l = 2`: `α₊ = −((i−1)z³ + √2κ³)/d`, `β₊ = −2z³/d`,
///   `α₋ = −((1−i)z³ + √2κ³)/d`, `β₋ = −2iz³/d`, `W₋ = −2iz⁵`, `W₊ = 2z⁵`.
///
/// The `κ = −∞` sentinel takes the limiting values `α± = −1`, `β± = 0`.
///
/// Errors: [`KernelError::OutsideSector`] off the open sector;
/// [`KernelError::DegenerateZ`] when `d` vanishes, which happens exactly at
/// `z = κe^{iπ/4}` for `κ > 0` (the spectral point `z⁴ = −κ⁴`).
pub fn resolvent_coefficients(
    l: i64,
    z: Complex64,
    kappa: f64,
) -> KernelResult<ResolventCoefficients> {
    validate_l(l)?;
    validate_sector(z)?;
    validate_kappa(kappa)?;
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let (w_minus, w_plus) = match l {
        1 => (-2.0 * i * z.powi(3), Complex64::new(-2.0, 0.0) * z.powi(3)),
        _ => (-2.0 * i * z.powi(5), Complex64::new(2.0, 0.0) * z.powi(5)),
    };
    if kappa == f64::NEG_INFINITY {
        return Ok(ResolventCoefficients {
            alpha_plus: -one,
            alpha_minus: -one,
            beta_plus: Complex64::new(0.0, 0.0),
            beta_minus: Complex64::new(0.0, 0.0),
            w_plus,
            w_minus,
            z,
        });
    }
    let sqrt2 = Complex64::new(f64::sqrt(2.0), 0.0);
    let (denom, scale) = match l {
        1 => ((i - one) * z + sqrt2 * kappa, z.norm().max(kappa.abs())),
        _ => ((i + one) * z.powi(3) + sqrt2 * kappa.powi(3), z.norm().max(kappa.abs()).powi(3)),
    };
    if denom.norm() <= DEGENERATE_RELATIVE_TOLERANCE * f64::sqrt(2.0) * scale {
        return Err(KernelError::DegenerateZ { z });
    }
    let (alpha_plus, beta_plus, alpha_minus, beta_minus) = match l {
        1 => (
            -((i + one) * z + sqrt2 * kappa) / denom,
            2.0 * z / denom,
            ((i + one) * z - sqrt2 * kappa) / denom,
            -2.0 * i * z / denom,
        ),
        _ => (
            -((i - one) * z.powi(3) + sqrt2 * kappa.powi(3)) / denom,
            -2.0 * z.powi(3) / denom,
            -((one - i) * z.powi(3) + sqrt2 * kappa.powi(3)) / denom,
            -2.0 * i * z.powi(3) / denom,
        ),
    };
    Ok(ResolventCoefficients { alpha_plus, alpha_minus, beta_plus, beta_minus, w_plus, w_minus, z })
}

// ─────────────────────────────────────────────────────────────────────────
// Separable kernels
// ─────────────────────────────────────────────────────────────────────────

/// One ordered block `coefficient · lesser(min(r,s)) · greater(max(r,s))`.
#[derive(Debug, Clone)]
pub struct KernelBlock {
    /// Scalar weight of the block.
    pub coefficient: Complex64,
    /// Factor evaluated at the smaller of the two arguments.
    pub lesser: RadialFunction,
    /// Factor evaluated at the larger of the two arguments (decaying for
    /// resolvent kernels).
    pub greater: RadialFunction,
}

/// One unordered smooth pair
/// `coefficient · (first(r)·second(s) + first(s)·second(r))`.
#[derive(Debug, Clone)]
pub struct SmoothPair {
    /// Scalar weight of the pair.
    pub coefficient: Complex64,
    /// First factor.
    pub first: RadialFunction,
    /// Second factor.
    pub second: RadialFunction,
}

/// A symmetric kernel `K(r,s)` made of ordered separable blocks plus an
/// optional unordered smooth part.
///
/// Evaluation is symmetric by construction; on the diagonal the ordering is
/// irrelevant because all blocks are continuous across `r = s`.
#[derive(Debug, Clone)]
pub struct SeparableKernel {
    blocks: Vec<KernelBlock>,
    smooth: Vec<SmoothPair>,
}

impl SeparableKernel {
    /// Assemble a kernel from ordered blocks and unordered smooth pairs.
    pub fn new(blocks: Vec<KernelBlock>, smooth: Vec<SmoothPair>) -> Self {
        SeparableKernel { blocks, smooth }
    }

    /// The kernel that is identically zero.
    pub fn zero() -> Self {
        SeparableKernel { blocks: Vec::new(), smooth: Vec::new() }
    }

    /// The ordered blocks.
    pub fn blocks(&self) -> &[KernelBlock] {
        &self.blocks
    }

    /// The unordered smooth pairs.
    pub fn smooth(&self) -> &[SmoothPair] {
        &self.smooth
    }

    /// Evaluate `K(r,s)` for `r, s > 0`.
    pub fn evaluate(&self, r: f64, s: f64) -> KernelResult<Complex64> {
        if !(r > 0.0) {
            return Err(KernelError::InvalidParameter { name: "r", value: r });
        }
        if !(s > 0.0) {
            return Err(KernelError::InvalidParameter { name: "s", value: s });
        }
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        let mut sum = Complex64::new(0.0, 0.0);
        for b in &self.blocks {
            sum += b.coefficient * b.lesser.evaluate(lo)? * b.greater.evaluate(hi)?;
        }
        for p in &self.smooth {
            sum += p.coefficient
                * (p.first.evaluate(r)? * p.second.evaluate(s)?
                    + p.first.evaluate(s)? * p.second.evaluate(r)?);
        }
        Ok(sum)
    }

    /// The profile `K(·, s₀)` on the near side `r < s₀`, as an exact
    /// [`RadialFunction`] of `r`.
    ///
    /// For resolvent kernels this slice lies in the extension domain: its
    /// origin poles cancel (the `β/W` identity) and it satisfies the
    /// boundary condition of the extension.
    pub fn lesser_slice(&self, s0: f64) -> KernelResult<RadialFunction> {
        if !(s0 > 0.0) {
            return Err(KernelError::InvalidParameter { name: "s0", value: s0 });
        }
        let mut out = RadialFunction::zero();
        for b in &self.blocks {
            out = &out + &b.lesser.scale(b.coefficient * b.greater.evaluate(s0)?);
        }
        for p in &self.smooth {
            out = &out + &p.second.scale(p.coefficient * p.first.evaluate(s0)?);
            out = &out + &p.first.scale(p.coefficient * p.second.evaluate(s0)?);
        }
        Ok(out)
    }

    /// The profile `K(·, s₀)` on the far side `r > s₀`, as an exact
    /// [`RadialFunction`] of `r`.
    pub fn greater_slice(&self, s0: f64) -> KernelResult<RadialFunction> {
        if !(s0 > 0.0) {
            return Err(KernelError::InvalidParameter { name: "s0", value: s0 });
        }
        let mut out = RadialFunction::zero();
        for b in &self.blocks {
            out = &out + &b.greater.scale(b.coefficient * b.lesser.evaluate(s0)?);
        }
        for p in &self.smooth {
            out = &out + &p.second.scale(p.coefficient * p.first.evaluate(s0)?);
            out = &out + &p.first.scale(p.coefficient * p.second.evaluate(s0)?);
        }
        Ok(out)
    }
}

/// Tabulate `K` on the product grid `rs × ss`, one row per entry of `rs`
/// (rows computed in parallel when the `parallel` feature is enabled).
pub fn kernel_grid(
    k: &SeparableKernel,
    rs: &[f64],
    ss: &[f64],
) -> KernelResult<Vec<Vec<Complex64>>> {
    let rows: Vec<KernelResult<Vec<Complex64>>> = numerics::map_grid(rs, |r| {
        ss.iter().map(|&s| k.evaluate(r, s)).collect::<KernelResult<Vec<Complex64>>>()
    });
    rows.into_iter().collect()
}

// ─────────────────────────────────────────────────────────────────────────
// Resolvent kernel
// ─────────────────────────────────────────────────────────────────────────

/// `D_l e^{br}` as an exact term-algebra element.
fn d_exponential(l: i64, b: Complex64) -> KernelResult<RadialFunction> {
    Ok(apply_d(l, &RadialFunction::exponential(Complex64::new(1.0, 0.0), b))?)
}

/// Build the resolvent kernel of the extension `T_l²(κ)` at spectral
/// parameter `z⁴`, `z` in the open sector.
///
/// The two ordered blocks hold the second-order solutions
/// `h̃₋ = D_l(e^{−izr} + α₋e^{izr})`, `g₋ = D_l e^{izr}` and
/// `h̃₊ = D_l(e^{zr} + α₊e^{−zr})`, `g₊ = D_l e^{−zr}` with weights
/// `1/(2z²W₋)` and `−1/(2z²W₊)`; the smooth part carries
/// `(β₋/2z²W₋)(g₊(r)g₋(s) + g₊(s)g₋(r))`.
pub fn build_resolvent(l: i64, z: Complex64, kappa: f64) -> KernelResult<SeparableKernel> {
    let c = resolvent_coefficients(l, z, kappa)?;
    let i = Complex64::new(0.0, 1.0);
    let g_minus = d_exponential(l, i * z)?;
    let g_plus = d_exponential(l, -z)?;
    let h_minus = &d_exponential(l, -i * z)? + &g_minus.scale(c.alpha_minus);
    let h_plus = &d_exponential(l, z)? + &g_plus.scale(c.alpha_plus);
    let two_z2 = 2.0 * z * z;
    let c_minus = (two_z2 * c.w_minus).finv();
    let c_plus = -(two_z2 * c.w_plus).finv();
    Ok(SeparableKernel::new(
        vec![
            KernelBlock { coefficient: c_minus, lesser: h_minus, greater: g_minus.clone() },
            KernelBlock { coefficient: c_plus, lesser: h_plus, greater: g_plus.clone() },
        ],
        vec![SmoothPair { coefficient: c.beta_minus * c_minus, first: g_plus, second: g_minus }],
    ))
}

// ─────────────────────────────────────────────────────────────────────────
// Inverse kernels
// ─────────────────────────────────────────────────────────────────────────

fn real_monomial(c: f64, k: i64) -> RadialFunction {
    RadialFunction::monomial(Complex64::new(c, 0.0), k)
}

/// The polynomial kernel of `T_l^{−1}` (`order = 1`) or `T_l^{−2}`
/// (`order = 2`), with zero boundary data at the origin:
///
/// * `T₁^{−1} = (1/3)·r<²/r>`, `T₂^{−1} = (1/5)·r<³/r>²`;
/// * `T₁^{−2} = (1/6)(r<²r> − r<⁴/(5r>))`,
///   `T₂^{−2} = (1/10)(r<³/3 − r<⁵/(7r>²))`.
pub fn t_inverse_kernel(l: i64, order: u32) -> KernelResult<SeparableKernel> {
    validate_l(l)?;
    let blocks = match (l, order) {
        (1, 1) => vec![KernelBlock {
            coefficient: Complex64::new(1.0 / 3.0, 0.0),
            lesser: real_monomial(1.0, 2),
            greater: real_monomial(1.0, -1),
        }],
        (2, 1) => vec![KernelBlock {
            coefficient: Complex64::new(1.0 / 5.0, 0.0),
            lesser: real_monomial(1.0, 3),
            greater: real_monomial(1.0, -2),
        }],
        (1, 2) => vec![
            KernelBlock {
                coefficient: Complex64::new(1.0 / 6.0, 0.0),
                lesser: real_monomial(1.0, 2),
                greater: real_monomial(1.0, 1),
            },
            KernelBlock {
                coefficient: Complex64::new(-1.0 / 30.0, 0.0),
                lesser: real_monomial(1.0, 4),
                greater: real_monomial(1.0, -1),
            },
        ],
        (2, 2) => vec![
            KernelBlock {
                coefficient: Complex64::new(1.0 / 30.0, 0.0),
                lesser: real_monomial(1.0, 3),
                greater: real_monomial(1.0, 0),
            },
            KernelBlock {
                coefficient: Complex64::new(-1.0 / 70.0, 0.0),
                lesser: real_monomial(1.0, 5),
                greater: real_monomial(1.0, -2),
            },
        ],
        _ => return Err(KernelError::InvalidParameter { name: "order", value: order as f64 }),
    };
    Ok(SeparableKernel::new(blocks, Vec::new()))
}

/// The inverse kernel `Θ_l` of the extension `T_l²(κ)` — the `z → 0` limit
/// of the resolvent:
///
/// * `Θ₁(r,s) = T₁^{−2}(r,s) − rs/(2√2κ)`;
/// * `Θ₂(r,s) = T₂^{−2}(r,s) − 1/(2√2κ³)`.
///
/// The rank-one terms lie in `ker T_l²` and restore the boundary condition
/// at the origin.  `κ = −∞` yields the bare `T_l^{−2}`; `κ = 0` is rejected
/// (the correction is unbounded there).
pub fn inverse_kernel(l: i64, kappa: f64) -> KernelResult<SeparableKernel> {
    validate_l(l)?;
    validate_kappa(kappa)?;
    if kappa == 0.0 {
        return Err(KernelError::InvalidParameter { name: "kappa", value: kappa });
    }
    let mut k = t_inverse_kernel(l, 2)?;
    if kappa == f64::NEG_INFINITY {
        return Ok(k);
    }
    let sqrt2 = f64::sqrt(2.0);
    let smooth = match l {
        1 => SmoothPair {
            coefficient: Complex64::new(-1.0 / (4.0 * sqrt2 * kappa), 0.0),
            first: real_monomial(1.0, 1),
            second: real_monomial(1.0, 1),
        },
        _ => SmoothPair {
            coefficient: Complex64::new(-1.0 / (4.0 * sqrt2 * kappa.powi(3)), 0.0),
            first: real_monomial(1.0, 0),
            second: real_monomial(1.0, 0),
        },
    };
    k.smooth.push(smooth);
    Ok(k)
}

// ─────────────────────────────────────────────────────────────────────────
// Applying a kernel
// ─────────────────────────────────────────────────────────────────────────

/// Operand of [`apply_kernel`]: either an exact term-algebra element or a
/// sampled profile with compact support.
pub enum KernelOperand<'a> {
    /// Exact operand; integrals split at `s = r` and evaluate in closed form.
    Exact(&'a RadialFunction),
    /// Sampled operand, integrated by adaptive quadrature over its support
    /// (the function is treated as zero outside).
    Sampled {
        /// The profile.
        f: &'a (dyn Fn(f64) -> Complex64 + Sync),
        /// Support interval `(lo, hi)`, `0 ≤ lo < hi < ∞`.
        support: (f64, f64),
    },
}

/// Evaluate `(K f)(r) = ∫₀^∞ K(r,s) f(s) ds`.
///
/// For [`KernelOperand::Exact`] the integral splits at `s = r` into
/// `∫₀^r K(·,s<r-side) f` plus `∫_r^∞ K(·,s>r-side) f`, each a closed-form
/// term-algebra integral; non-integrable combinations (non-decaying tails,
/// uncancelled origin poles) surface as [`KernelError::Radial`].  For
/// [`KernelOperand::Sampled`] both pieces run through adaptive quadrature
/// with the supplied spec.
pub fn apply_kernel(
    k: &SeparableKernel,
    f: &KernelOperand<'_>,
    quad: &QuadratureSpec,
    r: f64,
) -> KernelResult<Complex64> {
    if !(r > 0.0) {
        return Err(KernelError::InvalidParameter { name: "r", value: r });
    }
    match f {
        KernelOperand::Exact(g) => {
            let below = k.lesser_slice(r)?.product(g);
            let above = k.greater_slice(r)?.product(g);
            let mut sum = Complex64::new(0.0, 0.0);
            if !below.is_zero() {
                sum += below.integrate(0.0, r)?;
            }
            if !above.is_zero() {
                sum += above.integrate(r, f64::INFINITY)?;
            }
            Ok(sum)
        }
        KernelOperand::Sampled { f, support } => {
            let (lo, hi) = *support;
            if !(lo >= 0.0) || !(hi > lo) || !hi.is_finite() {
                return Err(KernelError::InvalidParameter { name: "support", value: hi });
            }
            if k.blocks.is_empty() && k.smooth.is_empty() {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let integrand = |s: f64| -> Complex64 {
                // Quadrature nodes are strictly interior, so s > 0 here.
                k.evaluate(r, s).expect("interior quadrature node") * f(s)
            };
            let mut sum = Complex64::new(0.0, 0.0);
            if lo < r.min(hi) {
                sum += numerics::integrate_interval(&integrand, lo, r.min(hi), quad)?;
            }
            if r.max(lo) < hi {
                sum += numerics::integrate_interval(&integrand, r.max(lo), hi, quad)?;
            }
            Ok(sum)
        }
    }
}

/// Evaluate `(K f)(r)` for an exact operand supported on `[0, end]` —
/// typically a bump's polynomial part, cut off at the support edge.
///
/// Both pieces (`∫₀^{min(r,end)}` against the lesser slice, `∫_r^{end}`
/// against the greater slice) are closed-form term-algebra integrals, so the
/// image is exact and cheap to evaluate pointwise.  Unlike
/// [`apply_kernel`] with [`KernelOperand::Exact`], polynomially growing
/// kernels (the operator inverses `Θ_l`, `T_l^{−1}`) stay integrable here
/// because nothing extends past `end`.
pub fn apply_kernel_compact(
    k: &SeparableKernel,
    f: &RadialFunction,
    end: f64,
    r: f64,
) -> KernelResult<Complex64> {
    if !(r > 0.0) {
        return Err(KernelError::InvalidParameter { name: "r", value: r });
    }
    if !(end > 0.0) || !end.is_finite() {
        return Err(KernelError::InvalidParameter { name: "end", value: end });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let below = k.lesser_slice(r)?.product(f);
    if !below.is_zero() {
        sum += below.integrate(0.0, r.min(end))?;
    }
    if r < end {
        let above = k.greater_slice(r)?.product(f);
        if !above.is_zero() {
            sum += above.integrate(r, end)?;
        }
    }
    Ok(sum)
}

// ─────────────────────────────────────────────────────────────────────────
// Zero-spectral-parameter limit
// ─────────────────────────────────────────────────────────────────────────

/// Sample grid for kernel-limit deviations.
const LIMIT_GRID: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

/// Maximum deviation `max_{r,s} |R(r,s;z) − Θ_l(r,s)|` over a fixed 5×5
/// sample grid, one entry per element of `z_sequence`.
///
/// For a sequence shrinking to zero inside the sector the deviations must
/// decrease: `Θ_l` is the `z → 0` limit of the resolvent.
pub fn resolvent_zero_limit_check(
    l: i64,
    kappa: f64,
    z_sequence: &[Complex64],
) -> KernelResult<Vec<f64>> {
    let theta = inverse_kernel(l, kappa)?;
    let mut deviations = Vec::with_capacity(z_sequence.len());
    for &z in z_sequence {
        let res = build_resolvent(l, z, kappa)?;
        let mut max_dev = 0.0f64;
        for &r in &LIMIT_GRID {
            for &s in &LIMIT_GRID {
                let dev = (res.evaluate(r, s)? - theta.evaluate(r, s)?).norm();
                max_dev = max_dev.max(dev);
            }
        }
        deviations.push(max_dev);
    }
    Ok(deviations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BumpTestFunction;
    use crate::radialfn::apply_t;
    use crate::radialfn::apply_t_squared;
    use crate::spectral::boundary_residual;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, SQRT_2};

    fn assert_negligible(resid: &RadialFunction, scale: f64, tol: f64, what: &str) {
        assert!(
            resid.is_zero() || resid.max_abs_coeff() <= tol * scale,
            "{what}: residual {} vs scale {scale}",
            resid.max_abs_coeff()
        );
    }

    fn sector_samples(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let modulus = 0.3 + 2.0 * rng.gen::<f64>();
                let arg = 0.05 + 1.47 * rng.gen::<f64>();
                Complex64::from_polar(modulus, arg)
            })
            .collect()
    }

    // ---------------------------------------------------------------
    // coefficients
    // ---------------------------------------------------------------

    #[test]
    fn coefficients_satisfy_closed_form_identities() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        for l in [1i64, 2] {
            for (j, &z) in sector_samples(20, 41 + l as u64).iter().enumerate() {
                for kappa in [-1.3, 0.0, 0.7, f64::NEG_INFINITY] {
                    let c = resolvent_coefficients(l, z, kappa).unwrap();
                    // Regularity at the origin: 1 + α + β = 0 on both sides.
                    assert!((one + c.alpha_minus + c.beta_minus).norm() < 1e-13);
                    assert!((one + c.alpha_plus + c.beta_plus).norm() < 1e-13);
                    // Wronskian closed forms.
                    let (wm, wp) = match l {
                        1 => (-2.0 * i * z.powi(3), -2.0 * one * z.powi(3)),
                        _ => (-2.0 * i * z.powi(5), 2.0 * one * z.powi(5)),
                    };
                    assert!((c.w_minus - wm).norm() <= 1e-14 * wm.norm());
                    assert!((c.w_plus - wp).norm() <= 1e-14 * wp.norm());
                    // The cancellation identity and its closed form.
                    let lhs = c.beta_minus / c.w_minus;
                    let rhs = -c.beta_plus / c.w_plus;
                    assert!(
                        (lhs - rhs).norm() <= 1e-13 * lhs.norm().max(1e-300),
                        "l={l} sample {j}: {lhs} vs {rhs}"
                    );
                    if kappa.is_finite() {
                        let closed = match l {
                            1 => ((i - one) * z.powi(3)
                                + Complex64::new(SQRT_2 * kappa, 0.0) * z.powi(2))
                            .finv(),
                            _ => ((i + one) * z.powi(5)
                                + Complex64::new(SQRT_2 * kappa.powi(3), 0.0) * z.powi(2))
                            .finv(),
                        };
                        assert!((lhs - closed).norm() <= 1e-12 * closed.norm());
                    }
                }
            }
        }
    }

    #[test]
    fn coefficient_reference_values() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        // l=1, κ = 1: β₋/W₋ against its closed form, just off the arg(z)=π/4
        // ray's resonance |z| = κ (where the denominator vanishes and the
        // construction correctly refuses; see the degeneracy test below).
        let z = Complex64::from_polar(1.2, FRAC_PI_4);
        let c = resolvent_coefficients(1, z, 1.0).unwrap();
        let closed = ((i - one) * z.powi(3) + Complex64::new(SQRT_2, 0.0) * z.powi(2)).finv();
        assert!((c.beta_minus / c.w_minus - closed).norm() < 1e-14);
        // l=2: W₊ = 2z⁵ for any admissible z.
        let z2 = Complex64::from_polar(1.7, 0.9);
        let c2 = resolvent_coefficients(2, z2, -0.4).unwrap();
        assert!((c2.w_plus - 2.0 * one * z2.powi(5)).norm() < 1e-13 * z2.norm().powi(5));
        // l=1, κ = 0: the reflection coefficient is unimodular.
        let c0 = resolvent_coefficients(1, z, 0.0).unwrap();
        assert_abs_diff_eq!(c0.alpha_plus.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sector_and_degeneracy_are_rejected() {
        for z in [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-0.5, 0.5),
            Complex64::new(0.0, 0.0),
            Complex64::new(f64::NAN, 1.0),
        ] {
            assert!(matches!(
                resolvent_coefficients(1, z, 1.0),
                Err(KernelError::OutsideSector { .. })
            ));
        }
        // z = κe^{iπ/4} puts z⁴ on the discrete eigenvalue −κ⁴.
        for l in [1, 2] {
            let z = Complex64::from_polar(1.0, FRAC_PI_4);
            assert!(matches!(
                resolvent_coefficients(l, z, 1.0),
                Err(KernelError::DegenerateZ { .. })
            ));
            assert!(matches!(build_resolvent(l, z, 1.0), Err(KernelError::DegenerateZ { .. })));
            // The same z is fine for the extension without a bound state.
            assert!(resolvent_coefficients(l, z, -1.0).is_ok());
        }
        assert!(matches!(
            resolvent_coefficients(3, Complex64::new(1.0, 1.0), 1.0),
            Err(KernelError::InvalidParameter { .. })
        ));
    }

    // ---------------------------------------------------------------
    // resolvent kernel structure
    // ---------------------------------------------------------------

    #[test]
    fn factor_solutions_solve_second_order_equations() {
        let z = Complex64::from_polar(0.9, FRAC_PI_3);
        for l in [1i64, 2] {
            for kappa in [1.2, -0.7, f64::NEG_INFINITY] {
                let k = build_resolvent(l, z, kappa).unwrap();
                let z2 = z * z;
                let scale = z2.norm();
                // (T_l − z²) kills the h̃₋/g₋ pair, (T_l + z²) the h̃₊/g₊ pair.
                for (f, sign, what) in [
                    (&k.blocks()[0].lesser, -1.0, "h_minus"),
                    (&k.blocks()[0].greater, -1.0, "g_minus"),
                    (&k.blocks()[1].lesser, 1.0, "h_plus"),
                    (&k.blocks()[1].greater, 1.0, "g_plus"),
                ] {
                    let resid = &apply_t(l, f) + &f.scale(z2 * sign);
                    assert_negligible(&resid, scale * f.max_abs_coeff(), 1e-13, what);
                }
            }
        }
    }

    #[test]
    fn resolvent_kernel_is_symmetric_and_decays() {
        // arg z = π/4 balances the e^{izr} and e^{−zr} decay rates, so the
        // far-field bound below reflects both exponential families.
        let z = Complex64::from_polar(0.8, FRAC_PI_4);
        for l in [1i64, 2] {
            let k = build_resolvent(l, z, 1.3).unwrap();
            for (r, s) in [(1.3, 2.1), (0.4, 3.0), (2.0, 2.0)] {
                let a = k.evaluate(r, s).unwrap();
                let b = k.evaluate(s, r).unwrap();
                assert!((a - b).norm() <= 1e-13 * a.norm(), "l={l} ({r},{s})");
            }
            // greater factors all decay.
            for b in k.blocks() {
                for t in b.greater.terms() {
                    assert!(t.rate.re < 0.0, "greater factor must decay");
                }
            }
            let far = k.evaluate(20.0, 1.0).unwrap().norm();
            let mid = k.evaluate(10.0, 1.0).unwrap().norm();
            assert!(far < mid && far < 1e-4, "l={l}: far {far} mid {mid}");
        }
    }

    #[test]
    fn resolvent_diagonal_smooth_with_unit_third_jump() {
        let z = Complex64::from_polar(0.9, FRAC_PI_3);
        for l in [1i64, 2] {
            for kappa in [1.3, -1.0, f64::NEG_INFINITY] {
                let k = build_resolvent(l, z, kappa).unwrap();
                for s in [0.7, 1.6] {
                    let below = k.lesser_slice(s).unwrap();
                    let above = k.greater_slice(s).unwrap();
                    let scale = below.evaluate(s).unwrap().norm().max(1.0);
                    for order in 0..3u32 {
                        let a = below.differentiate(order).evaluate(s).unwrap();
                        let b = above.differentiate(order).evaluate(s).unwrap();
                        assert!(
                            (a - b).norm() <= 1e-11 * a.norm().max(scale),
                            "l={l} κ={kappa} s={s}: order {order} mismatch {a} vs {b}"
                        );
                    }
                    let jump = above.differentiate(3).evaluate(s).unwrap()
                        - below.differentiate(3).evaluate(s).unwrap();
                    assert!(
                        (jump - Complex64::new(1.0, 0.0)).norm() < 1e-9,
                        "l={l} κ={kappa} s={s}: third-derivative jump {jump}"
                    );
                }
            }
        }
    }

    #[test]
    fn resolvent_slices_satisfy_boundary_conditions() {
        let z = Complex64::from_polar(0.8, FRAC_PI_3);
        for l in [1i64, 2] {
            for kappa in [-1.0, 0.0, 1.3, f64::NEG_INFINITY] {
                let k = build_resolvent(l, z, kappa).unwrap();
                for s0 in [0.5, 2.0] {
                    let slice = k.lesser_slice(s0).unwrap();
                    let res = boundary_residual(l, &slice, kappa).unwrap();
                    assert!(res < 1e-10, "l={l} κ={kappa} s0={s0}: residual {res}");
                }
            }
        }
    }

    // ---------------------------------------------------------------
    // applying kernels
    // ---------------------------------------------------------------

    fn core_function(l: i64) -> RadialFunction {
        // r^{l+2} e^{−r} has enough vanishing at zero to sit in every
        // extension domain for its l.
        RadialFunction::term(Complex64::new(1.0, 0.0), l + 2, Complex64::new(-1.0, 0.0))
    }

    #[test]
    fn resolvent_inverts_operator_on_core_functions() {
        let z = Complex64::from_polar(0.9, FRAC_PI_3);
        let quad = QuadratureSpec::default();
        for (l, kappa) in [(1i64, 1.2), (1, -0.7), (2, 1.2), (2, f64::NEG_INFINITY)] {
            let u = core_function(l);
            let f = &apply_t_squared(l, &u) - &u.scale(z.powi(4));
            let k = build_resolvent(l, z, kappa).unwrap();
            for r in [0.4, 1.0, 2.5] {
                let got = apply_kernel(&k, &KernelOperand::Exact(&f), &quad, r).unwrap();
                let want = u.evaluate(r).unwrap();
                assert!(
                    (got - want).norm() < 1e-10,
                    "l={l} κ={kappa} r={r}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn theta_inverts_t_squared_on_core_functions() {
        let quad = QuadratureSpec::default();
        for (l, kappa) in [(1i64, 1.0), (1, -2.0), (2, 0.8), (2, f64::NEG_INFINITY)] {
            let u = core_function(l);
            let f = apply_t_squared(l, &u);
            let k = inverse_kernel(l, kappa).unwrap();
            for r in [0.4, 1.0, 2.5] {
                let got = apply_kernel(&k, &KernelOperand::Exact(&f), &quad, r).unwrap();
                let want = u.evaluate(r).unwrap();
                assert!(
                    (got - want).norm() < 1e-10,
                    "l={l} κ={kappa} r={r}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn sampled_route_matches_exact_route() {
        let quad = QuadratureSpec::default();
        let f = RadialFunction::term(Complex64::new(1.0, 0.0), 2, Complex64::new(-1.0, 0.0));
        let closure = |s: f64| Complex64::new(s * s * (-s).exp(), 0.0);
        let k = inverse_kernel(1, 1.0).unwrap();
        for r in [0.7, 1.9] {
            let exact = apply_kernel(&k, &KernelOperand::Exact(&f), &quad, r).unwrap();
            let sampled = apply_kernel(
                &k,
                &KernelOperand::Sampled { f: &closure, support: (0.0, 40.0) },
                &quad,
                r,
            )
            .unwrap();
            assert!((exact - sampled).norm() < 1e-8, "r={r}: {exact} vs {sampled}");
        }
    }

    #[test]
    fn zero_kernel_maps_everything_to_zero() {
        let quad = QuadratureSpec::default();
        let k = SeparableKernel::zero();
        let f = core_function(1);
        assert_eq!(
            apply_kernel(&k, &KernelOperand::Exact(&f), &quad, 1.0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let closure = |_: f64| Complex64::new(1.0, 0.0);
        assert_eq!(
            apply_kernel(&k, &KernelOperand::Sampled { f: &closure, support: (0.0, 1.0) }, &quad, 1.0)
                .unwrap(),
            Complex64::new(0.0, 0.0)
        );
        assert_eq!(k.evaluate(1.0, 2.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn non_integrable_operand_is_an_error() {
        let quad = QuadratureSpec::default();
        let k = inverse_kernel(1, 1.0).unwrap();
        let f = RadialFunction::constant(Complex64::new(1.0, 0.0));
        assert!(matches!(
            apply_kernel(&k, &KernelOperand::Exact(&f), &quad, 1.0),
            Err(KernelError::Radial(_))
        ));
    }

    // ---------------------------------------------------------------
    // inverse kernels
    // ---------------------------------------------------------------

    #[test]
    fn inverse_kernel_spot_values() {
        let theta1 = inverse_kernel(1, 1.0).unwrap();
        let got = theta1.evaluate(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(got.re, (0.8 - 3.0 / SQRT_2) / 6.0, epsilon = 1e-14);
        assert_eq!(got.im, 0.0);

        let theta2 = inverse_kernel(2, 1.0).unwrap();
        let got = theta2.evaluate(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            got.re,
            (1.0 / 3.0 - 5.0 / SQRT_2 - 1.0 / 7.0) / 10.0,
            epsilon = 1e-14
        );

        let t1 = t_inverse_kernel(1, 1).unwrap();
        assert_abs_diff_eq!(t1.evaluate(1.0, 2.0).unwrap().re, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t1.evaluate(2.0, 1.0).unwrap().re, 1.0 / 6.0, epsilon = 1e-15);
        let t2 = t_inverse_kernel(2, 1).unwrap();
        assert_abs_diff_eq!(t2.evaluate(1.0, 2.0).unwrap().re, 1.0 / 20.0, epsilon = 1e-15);

        assert!(matches!(
            inverse_kernel(1, 0.0),
            Err(KernelError::InvalidParameter { name: "kappa", .. })
        ));
        assert!(matches!(inverse_kernel(2, f64::NAN), Err(KernelError::InvalidParameter { .. })));
        assert!(matches!(t_inverse_kernel(1, 3), Err(KernelError::InvalidParameter { .. })));
    }

    #[test]
    fn theta_slices_satisfy_boundary_conditions() {
        for l in [1i64, 2] {
            for kappa in [0.9, -1.1, f64::NEG_INFINITY] {
                let k = inverse_kernel(l, kappa).unwrap();
                for s0 in [0.5, 1.7] {
                    let slice = k.lesser_slice(s0).unwrap();
                    let res = boundary_residual(l, &slice, kappa).unwrap();
                    assert!(res < 1e-12, "l={l} κ={kappa} s0={s0}: residual {res}");
                }
            }
        }
    }

    #[test]
    fn inverse_kernels_have_unit_third_jump() {
        for l in [1i64, 2] {
            for kernel in [t_inverse_kernel(l, 2).unwrap(), inverse_kernel(l, 0.9).unwrap()] {
                for s in [0.6, 1.4] {
                    let below = kernel.lesser_slice(s).unwrap();
                    let above = kernel.greater_slice(s).unwrap();
                    let jump = above.differentiate(3).evaluate(s).unwrap()
                        - below.differentiate(3).evaluate(s).unwrap();
                    assert!((jump - Complex64::new(1.0, 0.0)).norm() < 1e-12, "l={l} s={s}");
                }
            }
            // Second-order inverses jump by −1 in the first derivative.
            let k1 = t_inverse_kernel(l, 1).unwrap();
            let s = 1.0;
            let jump = k1.greater_slice(s).unwrap().differentiate(1).evaluate(s).unwrap()
                - k1.lesser_slice(s).unwrap().differentiate(1).evaluate(s).unwrap();
            assert!((jump + Complex64::new(1.0, 0.0)).norm() < 1e-14, "l={l}");
        }
    }

    // ---------------------------------------------------------------
    // weak delta identities (exact algebra route)
    // ---------------------------------------------------------------

    /// Antiderivative of a polynomial×exponential element with no negative
    /// powers (enough for bump-weighted factors).
    fn antiderivative(f: &RadialFunction) -> RadialFunction {
        let mut out = RadialFunction::zero();
        for t in f.terms() {
            assert!(t.power >= 0, "antiderivative helper requires nonnegative powers");
            if t.rate == Complex64::new(0.0, 0.0) {
                out = &out
                    + &RadialFunction::monomial(t.coeff / (t.power + 1) as f64, t.power + 1);
            } else {
                // ∫ r^k e^{ar} dr by downward recursion on k.
                let mut piece = RadialFunction::zero();
                let mut coeff = t.coeff / t.rate;
                let mut k = t.power;
                loop {
                    piece = &piece + &RadialFunction::term(coeff, k, t.rate);
                    if k == 0 {
                        break;
                    }
                    coeff = -coeff * (k as f64) / t.rate;
                    k -= 1;
                }
                out = &out + &piece;
            }
        }
        out
    }

    /// Value of the antiderivative at r = 0 (its constant-term sum).
    fn value_at_zero(f: &RadialFunction) -> Complex64 {
        f.terms()
            .iter()
            .filter(|t| t.power == 0)
            .map(|t| t.coeff)
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
    }

    /// The kernel image of a compactly supported polynomial, as the exact
    /// term-algebra formula valid on (0, R).
    fn kernel_image_of_polynomial(
        k: &SeparableKernel,
        phi: &RadialFunction,
        support_end: f64,
    ) -> RadialFunction {
        let rr = support_end;
        let mut out = RadialFunction::zero();
        for b in k.blocks() {
            let fa = antiderivative(&b.lesser.product(phi));
            let fa0 = value_at_zero(&fa);
            let ga = antiderivative(&b.greater.product(phi));
            let ga_end = ga.evaluate(rr).unwrap();
            // greater(r)·(F(r) − F(0)) + lesser(r)·(G(R) − G(r))
            out = &out + &b.greater.product(&(&fa - &RadialFunction::constant(fa0))).scale(b.coefficient);
            out = &out
                + &b.lesser
                    .product(&(&RadialFunction::constant(ga_end) - &ga))
                    .scale(b.coefficient);
        }
        for p in k.smooth() {
            let first_w = p.first.product(phi).integrate(0.0, rr).unwrap();
            let second_w = p.second.product(phi).integrate(0.0, rr).unwrap();
            out = &out + &p.first.scale(p.coefficient * second_w);
            out = &out + &p.second.scale(p.coefficient * first_w);
        }
        out
    }

    #[test]
    fn resolvent_weak_delta_exact_algebra() {
        let phi = BumpTestFunction::new(2.0).unwrap().polynomial_part();
        let z = Complex64::from_polar(0.9, FRAC_PI_4);
        for l in [1i64, 2] {
            for kappa in [1.2, -0.8, f64::NEG_INFINITY] {
                let k = build_resolvent(l, z, kappa).unwrap();
                let image = kernel_image_of_polynomial(&k, &phi, 2.0);
                let resid = &(&apply_t_squared(l, &image) - &image.scale(z.powi(4))) - &phi;
                let scale = phi.max_abs_coeff() + image.max_abs_coeff() * z.norm().powi(4);
                assert_negligible(&resid, scale, 1e-11, "resolvent weak delta");
            }
        }
    }

    #[test]
    fn inverse_kernels_weak_delta_exact_algebra() {
        let phi = BumpTestFunction::new(2.0).unwrap().polynomial_part();
        for l in [1i64, 2] {
            for kappa in [0.9, -1.1, f64::NEG_INFINITY] {
                let k = inverse_kernel(l, kappa).unwrap();
                let image = kernel_image_of_polynomial(&k, &phi, 2.0);
                let resid = &apply_t_squared(l, &image) - &phi;
                let scale = phi.max_abs_coeff() + image.max_abs_coeff();
                assert_negligible(&resid, scale, 1e-11, "theta weak delta");
            }
            // T_l^{−1} against the second-order operator.
            let k1 = t_inverse_kernel(l, 1).unwrap();
            let image = kernel_image_of_polynomial(&k1, &phi, 2.0);
            let resid = &apply_t(l, &image) - &phi;
            assert_negligible(&resid, phi.max_abs_coeff(), 1e-12, "t inverse weak delta");
        }
    }

    #[test]
    fn resolvent_weak_delta_smeared_quadrature() {
        // Numeric counterpart of the exact check: the operator is applied
        // under the integral by finite differences; only the image itself is
        // evaluated exactly.  κ = 1.5 keeps z = e^{iπ/4} off the |z| = κ
        // resonance of that ray.
        let phi = BumpTestFunction::new(2.0).unwrap();
        let poly = phi.polynomial_part();
        for (l, z, kappa) in [
            (1i64, Complex64::from_polar(1.0, FRAC_PI_4), 1.5),
            (2i64, Complex64::from_polar(0.9, FRAC_PI_3), -0.8),
        ] {
            let k = build_resolvent(l, z, kappa).unwrap();
            let image =
                |r: f64| -> Complex64 { apply_kernel_compact(&k, &poly, 2.0, r).unwrap() };
            let resid = numerics::smear_check(&image, l, z, &phi, &phi).unwrap();
            assert!(
                resid < numerics::SMEAR_TOLERANCE,
                "l={l} z={z} κ={kappa}: smeared residual {resid}"
            );
        }
    }

    #[test]
    fn inverse_kernels_weak_delta_smeared_quadrature() {
        // Same machinery with z = 0: Θ_l smeared against T_l² alone.
        let phi = BumpTestFunction::new(2.0).unwrap();
        let poly = phi.polynomial_part();
        for (l, kappa) in [(1i64, 1.0), (2i64, -1.2)] {
            let k = inverse_kernel(l, kappa).unwrap();
            let image =
                |r: f64| -> Complex64 { apply_kernel_compact(&k, &poly, 2.0, r).unwrap() };
            let resid =
                numerics::smear_check(&image, l, Complex64::new(0.0, 0.0), &phi, &phi).unwrap();
            assert!(resid < numerics::SMEAR_TOLERANCE, "l={l} κ={kappa}: residual {resid}");
        }
    }

    #[test]
    fn compact_application_matches_assembled_image() {
        let phi = BumpTestFunction::new(2.0).unwrap().polynomial_part();
        let z = Complex64::from_polar(0.9, FRAC_PI_4);
        let k = build_resolvent(1, z, 1.2).unwrap();
        let assembled = kernel_image_of_polynomial(&k, &phi, 2.0);
        for r in [0.3, 1.0, 1.9] {
            let a = apply_kernel_compact(&k, &phi, 2.0, r).unwrap();
            let b = assembled.evaluate(r).unwrap();
            assert!((a - b).norm() < 1e-9 * b.norm().max(1.0), "r={r}: {a} vs {b}");
        }
        // Beyond the support only the lesser-side integral contributes.
        let tail = apply_kernel_compact(&k, &phi, 2.0, 30.0).unwrap();
        assert!(tail.norm() < 1e-6, "image must decay past the support");
        assert!(matches!(
            apply_kernel_compact(&k, &phi, 2.0, 0.0),
            Err(KernelError::InvalidParameter { name: "r", .. })
        ));
        assert!(matches!(
            apply_kernel_compact(&k, &phi, f64::INFINITY, 1.0),
            Err(KernelError::InvalidParameter { name: "end", .. })
        ));
    }

    // ---------------------------------------------------------------
    // zero-spectral-parameter limit
    // ---------------------------------------------------------------

    #[test]
    fn resolvent_approaches_theta_as_z_shrinks() {
        let zs: Vec<Complex64> =
            [0.3, 0.2, 0.1, 0.05].iter().map(|&m| Complex64::from_polar(m, FRAC_PI_4)).collect();
        for l in [1i64, 2] {
            let dev = resolvent_zero_limit_check(l, 1.0, &zs).unwrap();
            for w in dev.windows(2) {
                assert!(w[1] < w[0], "l={l}: deviations not decreasing: {dev:?}");
            }
            assert!(
                dev[dev.len() - 1] < dev[0] / 4.0,
                "l={l}: weak convergence: {dev:?}"
            );
        }
    }

    #[test]
    fn kernel_values_are_kappa_continuous() {
        let z = Complex64::from_polar(0.2, FRAC_PI_4);
        for l in [1i64, 2] {
            let a = build_resolvent(l, z, 1.0).unwrap().evaluate(1.0, 1.5).unwrap();
            let b = build_resolvent(l, z, 1.0 + 1e-6).unwrap().evaluate(1.0, 1.5).unwrap();
            assert!((a - b).norm() < 1e-4, "l={l}: jump under tiny κ change");
        }
    }

    #[test]
    fn kernel_grid_matches_pointwise_evaluation() {
        let k = inverse_kernel(1, 1.0).unwrap();
        let rs = [0.5, 1.0, 2.0];
        let ss = [0.7, 1.3];
        let grid = kernel_grid(&k, &rs, &ss).unwrap();
        for (i, &r) in rs.iter().enumerate() {
            for (j, &s) in ss.iter().enumerate() {
                let direct = k.evaluate(r, s).unwrap();
                assert_eq!(grid[i][j], direct);
            }
        }
    }
}
