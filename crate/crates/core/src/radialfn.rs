//! Exact term algebra for radial functions of the form Σ c·r^k·e^{a·r}.
//!
//! Every function handled by this crate — deficiency elements, extension
//! elements, eigenfunctions, kernel factors — is a *finite* sum of terms
//! `c · r^k · e^{a r}` with complex coefficient `c`, integer power `k`
//! (possibly negative), and complex rate `a`.  The class is closed under
//! differentiation, multiplication, the radial operators `T_l`, `D_l`,
//! `E_l`, and admits closed-form integration over `[0, ∞)`, `[r0, r1]`
//! and `[r0, ∞)`.
//!
//! # Canonical form
//!
//! A [`RadialFunction`] always stores its terms merged over equal
//! `(power, rate)` keys and sorted, so that analytically-equal expressions
//! compare equal and analytic cancellations actually produce the empty
//! (zero) function.  After every arithmetic operation, coefficients with
//! `|c| < 1e−13 · max|c|` are dropped: rounding residue from exact
//! cancellations must not masquerade as a pole or a spurious rate.
//!
//! # Integration
//!
//! Absolutely convergent pieces reduce to Γ-integrals
//! `∫₀^∞ r^k e^{a r} dr = k!/(−a)^{k+1}` (`k ≥ 0`, `Re a < 0`).
//! Negative powers are handled by finite-part integration: each term
//! `r^{−m} e^{a r}` contributes
//! `a^{m−1}/(m−1)! · (H_{m−1} − γ − ln(−a))`,
//! which sums to the true integral exactly when the series of the *whole*
//! canonical integrand at zero has vanishing coefficients at all negative
//! powers (checked; otherwise [`RadialError::DivergentAtZero`]).
//! Tails `[r0, ∞)` use incomplete-Γ recursions; negative powers bottom out
//! in the complex exponential integral `E₁`.
//!
//! # Example
//!
//! ```
//! use num_complex::Complex64;
//! use radial4::radialfn::RadialFunction;
//!
//! // f(r) = r·e^{−r}
//! let f = RadialFunction::term(Complex64::new(1.0, 0.0), 1, Complex64::new(-1.0, 0.0));
//! let df = f.differentiate(1); // e^{−r} − r·e^{−r}
//! assert_eq!(df.terms().len(), 2);
//! let norm = f.integrate_halfline().unwrap(); // ∫₀^∞ r e^{−r} dr = 1
//! assert!((norm.re - 1.0).abs() < 1e-14);
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Relative magnitude below which a coefficient is dropped after arithmetic.
///
/// Analytic cancellations (pole removal in operator combinations, conjugate
/// pairing) are exact in the algebra; what survives below this threshold is
/// floating-point residue.  1e−13 leaves ~2.5 decimal digits of headroom
/// above f64 rounding while staying far below any genuine coefficient.
pub const COEFF_DROP_RELATIVE: f64 = 1e-13;

/// Relative tolerance for pole-cancellation checks at the origin.
///
/// Series coefficients at negative powers must vanish for an integrand to
/// be integrable down to zero; they are compared against the largest term
/// coefficient at this relative level (looser than `COEFF_DROP_RELATIVE`
/// because series coefficients accumulate factorially-weighted sums).
pub const POLE_CANCEL_RELATIVE: f64 = 1e-10;

/// Euler–Mascheroni constant γ.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Errors raised by the term algebra.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialError {
    /// A surviving term has `Re(rate) ≥ 0`, so the integral over an
    /// unbounded interval does not converge absolutely.
    NonDecaying { power: i64, rate: Complex64 },
    /// The canonical integrand keeps a genuine singularity at `r = 0`:
    /// some series coefficient at a negative power fails to cancel.
    DivergentAtZero { power: i64, magnitude: f64 },
    /// Evaluation at `r ≤ 0` was requested for a function with a
    /// negative-power term.
    NegativePowerAtOrigin { power: i64 },
    /// Boundary values were requested but a negative-power series
    /// coefficient fails to cancel at the origin.
    PoleAtZero { power: i64, magnitude: f64 },
    /// An integration bound or interval is invalid (reversed or negative).
    InvalidInterval { lo: f64, hi: f64 },
    /// An operator index outside its supported range was requested.
    UnsupportedIndex { name: &'static str, value: i64 },
}

impl fmt::Display for RadialError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialError::NonDecaying { power, rate } => write!(
                f,
                "integral diverges at infinity: term r^{power}·e^{{({rate})r}} has Re(rate) >= 0"
            ),
            RadialError::DivergentAtZero { power, magnitude } => write!(
                f,
                "integral diverges at zero: series coefficient {magnitude:.3e} survives at power {power}"
            ),
            RadialError::NegativePowerAtOrigin { power } => write!(
                f,
                "cannot evaluate a term with power {power} at r <= 0"
            ),
            RadialError::PoleAtZero { power, magnitude } => write!(
                f,
                "no boundary values: series coefficient {magnitude:.3e} survives at power {power}"
            ),
            RadialError::InvalidInterval { lo, hi } => {
                write!(f, "invalid integration interval [{lo}, {hi}]")
            }
            RadialError::UnsupportedIndex { name, value } => {
                write!(f, "operator index {name} = {value} is outside the supported range")
            }
        }
    }
}

impl std::error::Error for RadialError {}

/// Convenience alias for results in the term algebra.
pub type RadialResult<T> = Result<T, RadialError>;

/// One exact term `coeff · r^power · e^{rate·r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    /// Complex coefficient `c`.
    pub coeff: Complex64,
    /// Integer exponent `k` of `r`; may be negative.
    pub power: i64,
    /// Complex rate `a` in `e^{a r}` (units of inverse length).
    pub rate: Complex64,
}

/// JSON wire form of a [`Term`]; round-trips are bit-stable for finite doubles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TermRecord {
    re_coeff: f64,
    im_coeff: f64,
    power: i64,
    re_rate: f64,
    im_rate: f64,
}

impl From<&Term> for TermRecord {
    fn from(t: &Term) -> Self {
        TermRecord {
            re_coeff: t.coeff.re,
            im_coeff: t.coeff.im,
            power: t.power,
            re_rate: t.rate.re,
            im_rate: t.rate.im,
        }
    }
}

impl From<&TermRecord> for Term {
    fn from(rec: &TermRecord) -> Self {
        Term {
            coeff: Complex64::new(rec.re_coeff, rec.im_coeff),
            power: rec.power,
            rate: Complex64::new(rec.re_rate, rec.im_rate),
        }
    }
}

/// Exact finite sum of terms `c·r^k·e^{a r}` in canonical form.
///
/// The zero function is the empty term list.  Canonical form is unique:
/// no two stored terms share the same `(power, rate)` key, and terms are
/// sorted by `(power, Re rate, Im rate)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadialFunction {
    terms: Vec<Term>,
}

/// Merge key: rates are compared bitwise (they are constructed, not computed,
/// so equal rates are equal to the last bit; `-0.0` is normalized to `0.0`).
fn rate_key(x: f64) -> u64 {
    if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() }
}

impl RadialFunction {
    /// The zero function (empty term list).
    pub fn zero() -> Self {
        RadialFunction { terms: Vec::new() }
    }

    /// Single term `coeff · r^power · e^{rate·r}`.
    pub fn term(coeff: Complex64, power: i64, rate: Complex64) -> Self {
        Self::from_terms(vec![Term { coeff, power, rate }])
    }

    /// Pure power `coeff · r^power`.
    pub fn monomial(coeff: Complex64, power: i64) -> Self {
        Self::term(coeff, power, Complex64::new(0.0, 0.0))
    }

    /// Pure exponential `coeff · e^{rate·r}`.
    pub fn exponential(coeff: Complex64, rate: Complex64) -> Self {
        Self::term(coeff, 0, rate)
    }

    /// The constant function `c`.
    pub fn constant(c: Complex64) -> Self {
        Self::monomial(c, 0)
    }

    /// Build from an arbitrary term list, canonicalizing.
    pub fn from_terms(terms: Vec<Term>) -> Self {
        let mut f = RadialFunction { terms };
        f.canonicalize();
        f
    }

    /// Canonical term list, sorted by `(power, Re rate, Im rate)`.
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// True for the (canonical) zero function.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude, or 0 for the zero function.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max)
    }

    /// Smallest power of `r` present, if any.
    pub fn min_power(&self) -> Option<i64> {
        self.terms.iter().map(|t| t.power).min()
    }

    fn canonicalize(&mut self) {
        let mut map: BTreeMap<(i64, u64, u64), Complex64> = BTreeMap::new();
        for t in &self.terms {
            debug_assert!(t.coeff.is_finite() && t.rate.is_finite());
            let key = (t.power, rate_key(t.rate.re), rate_key(t.rate.im));
            let entry = map.entry(key).or_insert_with(|| Complex64::new(0.0, 0.0));
            *entry += t.coeff;
        }
        let max_abs = map.values().map(|c| c.norm()).fold(0.0, f64::max);
        let cutoff = COEFF_DROP_RELATIVE * max_abs;
        self.terms = map
            .into_iter()
            .filter(|(_, c)| c.norm() > cutoff)
            .map(|((power, re_bits, im_bits), coeff)| Term {
                coeff,
                power,
                rate: Complex64::new(f64::from_bits(re_bits), f64::from_bits(im_bits)),
            })
            .collect();
    }

    /// Multiply by a complex scalar.
    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term { coeff: t.coeff * s, ..*t })
                .collect(),
        )
    }

    /// Multiply by `r^n` (shift every power by `n`; `n` may be negative).
    pub fn mul_power(&self, n: i64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term { power: t.power + n, ..*t })
                .collect(),
        )
    }

    /// Complex conjugate `f̄(r)` (for real `r`): conjugates coefficients and rates.
    pub fn conj(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term { coeff: t.coeff.conj(), power: t.power, rate: t.rate.conj() })
                .collect(),
        )
    }

    /// Exact `n`-th derivative.
    ///
    /// Each application maps `c·r^k·e^{ar} ↦ c·k·r^{k−1}·e^{ar} + c·a·r^k·e^{ar}`,
    /// so the term count grows at most linearly in `n` per input term.
    pub fn differentiate(&self, n: u32) -> Self {
        let mut current = self.clone();
        for _ in 0..n {
            let mut out = Vec::with_capacity(2 * current.terms.len());
            for t in &current.terms {
                if t.power != 0 {
                    out.push(Term {
                        coeff: t.coeff * (t.power as f64),
                        power: t.power - 1,
                        rate: t.rate,
                    });
                }
                if t.rate != Complex64::new(0.0, 0.0) {
                    out.push(Term { coeff: t.coeff * t.rate, power: t.power, rate: t.rate });
                }
            }
            current = Self::from_terms(out);
        }
        current
    }

    /// Exact pointwise product.
    pub fn product(&self, other: &RadialFunction) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for s in &self.terms {
            for t in &other.terms {
                out.push(Term {
                    coeff: s.coeff * t.coeff,
                    power: s.power + t.power,
                    rate: s.rate + t.rate,
                });
            }
        }
        Self::from_terms(out)
    }

    /// Evaluate `Σ c·r^k·e^{ar}` at `r`.
    ///
    /// Errors with [`RadialError::NegativePowerAtOrigin`] when `r ≤ 0` and a
    /// negative-power term is present.
    pub fn evaluate(&self, r: f64) -> RadialResult<Complex64> {
        if r <= 0.0 {
            if let Some(t) = self.terms.iter().find(|t| t.power < 0) {
                return Err(RadialError::NegativePowerAtOrigin { power: t.power });
            }
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let radial = if t.power == 0 { 1.0 } else { r.powi(t.power as i32) };
            sum += t.coeff * radial * (t.rate * r).exp();
        }
        Ok(sum)
    }

    /// Series expansion around `r = 0` on the power window `[n_min, n_max]`.
    ///
    /// Each term `c·r^k·e^{ar}` contributes `c·a^{n−k}/(n−k)!` to the
    /// coefficient of `r^n` for every `n ≥ k` in the window.
    pub fn series_at_zero(&self, n_min: i64, n_max: i64) -> SeriesAtZero {
        assert!(n_min <= n_max, "series window must satisfy n_min <= n_max");
        let mut coefficients: BTreeMap<i64, Complex64> = BTreeMap::new();
        for t in &self.terms {
            let start = n_min.max(t.power);
            let mut j = start - t.power; // order of the exponential-series factor
            let mut pow = t.rate.powi(j as i32) / factorial(j as u64);
            for n in start..=n_max {
                if j > 0 || t.rate != Complex64::new(0.0, 0.0) || n == t.power {
                    let entry = coefficients.entry(n).or_insert_with(|| Complex64::new(0.0, 0.0));
                    *entry += t.coeff * pow;
                }
                j += 1;
                pow = pow * t.rate / (j as f64);
            }
        }
        SeriesAtZero { n_min, n_max, coefficients }
    }

    /// Exact integral over `[0, ∞)`.
    ///
    /// Errors: [`RadialError::NonDecaying`] when any canonical term has
    /// `Re(rate) ≥ 0`; [`RadialError::DivergentAtZero`] when negative-power
    /// series coefficients fail to cancel.
    pub fn integrate_halfline(&self) -> RadialResult<Complex64> {
        self.integrate(0.0, f64::INFINITY)
    }

    /// Exact integral over `[lo, hi]`, where `0 ≤ lo < hi ≤ ∞`.
    ///
    /// `lo = 0` with negative powers requires their series cancellation (the
    /// finite parts of the individual terms then sum to the true integral);
    /// `hi = ∞` requires `Re(rate) < 0` on every term (pure powers with
    /// `power ≤ −2` are also accepted for `lo > 0`).
    pub fn integrate(&self, lo: f64, hi: f64) -> RadialResult<Complex64> {
        if !(lo >= 0.0) || !(hi > lo) {
            return Err(RadialError::InvalidInterval { lo, hi });
        }
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if lo == 0.0 {
            self.check_pole_cancellation()?;
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            sum += t.coeff * integrate_term(t.power, t.rate, lo, hi)?;
        }
        Ok(sum)
    }

    /// Verify that all negative-power series coefficients of the canonical
    /// form vanish (relative to the largest term coefficient).
    fn check_pole_cancellation(&self) -> RadialResult<()> {
        let min_power = match self.min_power() {
            Some(p) if p < 0 => p,
            _ => return Ok(()),
        };
        let series = self.series_at_zero(min_power, -1);
        let scale = self.max_abs_coeff().max(1e-300);
        for n in min_power..=-1 {
            let c = series.coeff(n);
            if c.norm() > POLE_CANCEL_RELATIVE * scale {
                return Err(RadialError::DivergentAtZero { power: n, magnitude: c.norm() });
            }
        }
        Ok(())
    }

    /// Serialize to the JSON array-of-records wire format.
    pub fn to_json(&self) -> String {
        let records: Vec<TermRecord> = self.terms.iter().map(TermRecord::from).collect();
        serde_json::to_string(&records).expect("term records always serialize")
    }

    /// Deserialize from the JSON array-of-records wire format.
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let records: Vec<TermRecord> = serde_json::from_str(s)?;
        Ok(Self::from_terms(records.iter().map(Term::from).collect()))
    }
}

impl Serialize for RadialFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let records: Vec<TermRecord> = self.terms.iter().map(TermRecord::from).collect();
        records.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RadialFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let records = Vec::<TermRecord>::deserialize(deserializer)?;
        Ok(Self::from_terms(records.iter().map(|r| Term::from(r)).collect()))
    }
}

impl Add for &RadialFunction {
    type Output = RadialFunction;
    fn add(self, rhs: &RadialFunction) -> RadialFunction {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&rhs.terms);
        RadialFunction::from_terms(terms)
    }
}

impl Sub for &RadialFunction {
    type Output = RadialFunction;
    fn sub(self, rhs: &RadialFunction) -> RadialFunction {
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().map(|t| Term { coeff: -t.coeff, ..*t }));
        RadialFunction::from_terms(terms)
    }
}

impl Neg for &RadialFunction {
    type Output = RadialFunction;
    fn neg(self) -> RadialFunction {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &RadialFunction {
    type Output = RadialFunction;
    fn mul(self, rhs: &RadialFunction) -> RadialFunction {
        self.product(rhs)
    }
}

/// Series expansion of a [`RadialFunction`] around `r = 0`.
///
/// Coefficients are reported for powers `n` in the requested window
/// `[n_min, n_max]`; powers without contributions read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAtZero {
    n_min: i64,
    n_max: i64,
    coefficients: BTreeMap<i64, Complex64>,
}

impl SeriesAtZero {
    /// Coefficient of `r^n` (zero when absent or outside the window).
    pub fn coeff(&self, n: i64) -> Complex64 {
        self.coefficients.get(&n).copied().unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Requested window `[n_min, n_max]`.
    pub fn window(&self) -> (i64, i64) {
        (self.n_min, self.n_max)
    }

    /// Boundary value `f^{(j)}(0) = j! · [r^j] f` of a function regular at zero.
    ///
    /// Only meaningful when all negative-power coefficients cancel.
    pub fn boundary_value(&self, j: u32) -> Complex64 {
        self.coeff(j as i64) * factorial(j as u64)
    }

    /// Largest magnitude among negative-power coefficients in the window.
    pub fn max_negative_power_magnitude(&self) -> f64 {
        self.coefficients
            .iter()
            .filter(|(&n, _)| n < 0)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Radial differential operators
// ─────────────────────────────────────────────────────────────────────────

/// Apply `D_l w = r^{l+1} (r^{−1} d/dr)^l (w/r)`.
///
/// Supported for `l ∈ {1, 2}` (the range in which the fourth-order radial
/// operators have extension freedom).  `D_1 w = w′ − w/r`.
pub fn apply_d(l: i64, w: &RadialFunction) -> RadialResult<RadialFunction> {
    if !(1..=2).contains(&l) {
        return Err(RadialError::UnsupportedIndex { name: "l", value: l });
    }
    let mut u = w.mul_power(-1);
    for _ in 0..l {
        u = u.differentiate(1).mul_power(-1);
    }
    Ok(u.mul_power(l + 1))
}

/// Apply `T_l f = −f″ + l(l+1)/r² · f` (the radial Schrödinger-type operator).
pub fn apply_t(l: i64, f: &RadialFunction) -> RadialFunction {
    assert!(l >= 0, "angular index must be nonnegative");
    let second = f.differentiate(2);
    let centrifugal = f.mul_power(-2).scale(Complex64::new((l * (l + 1)) as f64, 0.0));
    &(-&second) + &centrifugal
}

/// Apply `T_l` twice: the fourth-order operator `T_l²`.
pub fn apply_t_squared(l: i64, f: &RadialFunction) -> RadialFunction {
    apply_t(l, &apply_t(l, f))
}

/// Apply the first-order factor `E_l f = r^{−l}(r^l f)′ = f′ + (l/r)f`,
/// or its formal adjoint `E_l* f = −r^l (r^{−l} f)′ = −f′ + (l/r)f`
/// when `adjoint` is set.  Satisfies `E_l* E_l = T_l` and `E_l E_l* = T_{l−1}`.
pub fn apply_e(l: i64, f: &RadialFunction, adjoint: bool) -> RadialFunction {
    assert!(l >= 1, "factorization index must be positive");
    if adjoint {
        -&f.mul_power(-l).differentiate(1).mul_power(l)
    } else {
        f.mul_power(l).differentiate(1).mul_power(-l)
    }
}

/// Exact inner product `(f, g) = ∫₀^∞ f̄(r) g(r) dr`.
///
/// Propagates the convergence errors of [`RadialFunction::integrate_halfline`].
pub fn inner_product(f: &RadialFunction, g: &RadialFunction) -> RadialResult<Complex64> {
    f.conj().product(g).integrate_halfline()
}

/// Boundary values `[f(0), f′(0), …, f^{(max_order)}(0)]` via the series at
/// zero.
///
/// Negative-power coefficients of the canonical form must cancel (individual
/// terms may carry poles as long as the combination is regular); otherwise
/// [`RadialError::PoleAtZero`] is returned.
pub fn boundary_values(f: &RadialFunction, max_order: u32) -> RadialResult<Vec<Complex64>> {
    let min_p = f.min_power().unwrap_or(0).min(0);
    let series = f.series_at_zero(min_p, max_order as i64);
    let scale = f.max_abs_coeff().max(1e-300);
    for n in min_p..0 {
        let c = series.coeff(n);
        if c.norm() > POLE_CANCEL_RELATIVE * scale {
            return Err(RadialError::PoleAtZero { power: n, magnitude: c.norm() });
        }
    }
    Ok((0..=max_order).map(|j| series.boundary_value(j)).collect())
}

// ─────────────────────────────────────────────────────────────────────────
// Exact term integration
// ─────────────────────────────────────────────────────────────────────────

fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn harmonic(n: u64) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// `∫ r^k e^{a r}` over `[lo, hi]` for a single term; the convergence and
/// cancellation preconditions are enforced by the caller for `lo = 0`.
fn integrate_term(k: i64, a: Complex64, lo: f64, hi: f64) -> RadialResult<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if hi.is_infinite() {
        if a == zero {
            // Pure powers: only tails of power ≤ −2 converge, and only away from 0.
            if lo > 0.0 && k <= -2 {
                return Ok(Complex64::new(-lo.powi((k + 1) as i32) / (k + 1) as f64, 0.0));
            }
            return Err(RadialError::NonDecaying { power: k, rate: a });
        }
        if a.re >= 0.0 {
            return Err(RadialError::NonDecaying { power: k, rate: a });
        }
        if lo == 0.0 {
            return Ok(if k >= 0 { gamma_halfline(k as u64, a) } else { finite_part_halfline((-k) as u64, a) });
        }
        return Ok(if k >= 0 {
            upper_incomplete_nonneg(k as u64, a, lo)
        } else {
            upper_incomplete_negpow((-k) as u64, a, lo)
        });
    }

    // Finite interval [lo, hi].
    if a == zero {
        return Ok(Complex64::new(power_rule(k, lo, hi), 0.0));
    }
    if k >= 0 {
        // The antiderivative's constant coefficient is k!/a^{k+1}; when
        // |a|·hi is small the endpoint difference cancels those inflated
        // intermediates catastrophically (rounding ~ ε·k!/|a|^{k+1} while
        // the integral is ~ hi^{k+1}).  Integrating the exponential's
        // Taylor series termwise has no such inflation; the crossover is
        // set where both routes carry only a couple digits of cancellation.
        if a.norm() * hi <= 0.35 * k as f64 + 2.0 {
            return Ok(taylor_integral_nonneg(k as u64, a, lo, hi));
        }
        let p = poly_antiderivative(k as u64, a);
        let at = |r: f64| (a * r).exp() * eval_poly(&p, r);
        return Ok(at(hi) - at(lo));
    }
    let m = (-k) as u64;
    if a.re < 0.0 {
        // Difference of convergent tails; finite parts subtract consistently at lo = 0.
        let upper = upper_incomplete_negpow(m, a, hi);
        let lower = if lo == 0.0 {
            finite_part_halfline(m, a) - upper
        } else {
            upper_incomplete_negpow(m, a, lo) - upper
        };
        return Ok(lower);
    }
    // Growing or oscillatory rate on a finite interval: series antiderivative.
    Ok(series_antiderivative(m, a, hi) - if lo == 0.0 { zero } else { series_antiderivative(m, a, lo) })
}

/// `∫_{lo}^{hi} r^k dr` with the finite-part convention at `lo = 0` for k < 0:
/// the ε-singular parts are dropped (they cancel across the canonical sum).
fn power_rule(k: i64, lo: f64, hi: f64) -> f64 {
    if k == -1 {
        if lo == 0.0 {
            hi.ln()
        } else {
            (hi / lo).ln()
        }
    } else {
        let kk = (k + 1) as i32;
        let upper = hi.powi(kk) / kk as f64;
        let lower = if lo == 0.0 { 0.0 } else { lo.powi(kk) / kk as f64 };
        upper - lower
    }
}

/// `∫₀^∞ r^k e^{a r} dr = k!/(−a)^{k+1}` for `k ≥ 0`, `Re a < 0`.
fn gamma_halfline(k: u64, a: Complex64) -> Complex64 {
    factorial(k) / (-a).powi(k as i32 + 1)
}

/// Finite part of `∫₀^∞ r^{−m} e^{a r} dr` for `m ≥ 1`, `Re a < 0`:
/// `a^{m−1}/(m−1)! · (H_{m−1} − γ − ln(−a))`.
fn finite_part_halfline(m: u64, a: Complex64) -> Complex64 {
    a.powi(m as i32 - 1) / factorial(m - 1)
        * (Complex64::new(harmonic(m - 1) - EULER_GAMMA, 0.0) - (-a).ln())
}

/// `∫_lo^hi s^k e^{as} ds` by integrating the exponential series termwise:
/// `Σ_n a^n/n! · (hi^{k+n+1} − lo^{k+n+1})/(k+n+1)`.
///
/// Accurate to rounding for `|a|·hi` up to a few: every intermediate is
/// bounded by `e^{|a|·hi} · hi^{k+1}`, unlike the antiderivative form whose
/// constant term is `k!/a^{k+1}`.
fn taylor_integral_nonneg(k: u64, a: Complex64, lo: f64, hi: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut apow = Complex64::new(1.0, 0.0); // a^n / n!
    let mut hi_pow = hi.powi(k as i32 + 1);
    let mut lo_pow = if lo == 0.0 { 0.0 } else { lo.powi(k as i32 + 1) };
    let mut tail_small = 0u32;
    for n in 0..400u64 {
        let den = (k + n + 1) as f64;
        let term = apow * ((hi_pow - lo_pow) / den);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            tail_small += 1;
            if tail_small >= 3 {
                break;
            }
        } else {
            tail_small = 0;
        }
        apow = apow * a / (n as f64 + 1.0);
        hi_pow *= hi;
        lo_pow *= lo;
    }
    sum
}

/// Coefficients of the polynomial `P` with `d/dr [e^{ar} P(r)] = r^k e^{ar}`:
/// `c_k = 1/a`, `c_{j−1} = −j·c_j/a`. Index = power of `r`.
fn poly_antiderivative(k: u64, a: Complex64) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); (k + 1) as usize];
    c[k as usize] = 1.0 / a;
    let mut j = k;
    while j >= 1 {
        c[(j - 1) as usize] = -(j as f64) * c[j as usize] / a;
        j -= 1;
    }
    c
}

fn eval_poly(c: &[Complex64], r: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &ci in c.iter().rev() {
        acc = acc * r + ci;
    }
    acc
}

/// `∫_{r0}^∞ t^k e^{a t} dt` for `k ≥ 0`, `Re a < 0`.
fn upper_incomplete_nonneg(k: u64, a: Complex64, r0: f64) -> Complex64 {
    let p = poly_antiderivative(k, a);
    -(a * r0).exp() * eval_poly(&p, r0)
}

/// `G_m(r0) = ∫_{r0}^∞ t^{−m} e^{a t} dt` for `m ≥ 1`, `Re a < 0`:
/// `G_1 = E₁(−a r0)`, `G_m = r0^{1−m} e^{a r0}/(m−1) + a/(m−1) · G_{m−1}`.
fn upper_incomplete_negpow(m: u64, a: Complex64, r0: f64) -> Complex64 {
    let mut g = exp_integral_e1(-a * r0);
    for j in 2..=m {
        g = r0.powi(1 - j as i32) * (a * r0).exp() / (j as f64 - 1.0) + a * g / (j as f64 - 1.0);
    }
    g
}

/// Finite-part antiderivative of `r^{−m} e^{a r}` evaluated at `r` (constant
/// of integration fixed to zero at every series order, `ln r` at order m−1):
/// `Σ_{j≠m−1} a^j/j! · r^{j−m+1}/(j−m+1) + a^{m−1}/(m−1)! · ln r`.
/// Used for growing/oscillatory rates where tail subtraction is unavailable.
fn series_antiderivative(m: u64, a: Complex64, r: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coeff = Complex64::new(1.0, 0.0); // a^j / j!
    let budget = (40.0 + 2.0 * (a.norm() * r)).ceil() as u64;
    let mut tail_small = 0u32;
    for j in 0..(budget.max(60)) {
        let term = if j == m - 1 {
            coeff * r.ln()
        } else {
            let e = j as i64 - m as i64 + 1;
            coeff * r.powi(e as i32) / e as f64
        };
        sum += term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) && j > m {
            tail_small += 1;
            if tail_small >= 3 {
                break;
            }
        } else {
            tail_small = 0;
        }
        coeff = coeff * a / (j as f64 + 1.0);
    }
    sum
}

/// Complex exponential integral `E₁(z)` for `Re z ≥ 0`, `z ≠ 0`.
///
/// Power series `−γ − ln z − Σ (−z)^k/(k·k!)` for `|z| ≤ 7.5` (the
/// continued fraction still loses ~8 digits near that radius), otherwise
/// the continued fraction `e^{−z}/(z + 1 − 1/(z + 3 − 4/(z + 5 − ...)))`
/// evaluated with the modified Lentz algorithm.
pub(crate) fn exp_integral_e1(z: Complex64) -> Complex64 {
    debug_assert!(z.norm() > 0.0, "E1 is singular at zero");
    if z.norm() <= 7.5 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0); // (−z)^k / k!
        for k in 1..=120u32 {
            pow = pow * (-z) / (k as f64);
            let term = pow / (k as f64);
            sum += term;
            if term.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        Complex64::new(-EULER_GAMMA, 0.0) - z.ln() - sum
    } else {
        let tiny = Complex64::new(1e-300, 0.0);
        let mut b = z + 1.0;
        let mut c = Complex64::new(1e300, 0.0);
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=500u32 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = an * d + b;
            if d.norm() < 1e-300 {
                d = tiny;
            }
            c = b + an / c;
            if c.norm() < 1e-300 {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).norm() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}
