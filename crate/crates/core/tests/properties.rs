//! Randomized invariant checks for the term algebra and the operator
//! identities built on it: linearity and canonicalization, intertwining and
//! factorization, eigen-equations, kernel coefficient identities, and the
//! sesquilinear-form chain, each over generated inputs rather than pinned
//! examples.

use num_complex::Complex64;
use proptest::prelude::*;

use radial4::kernels::{resolvent_coefficients, KernelError};
use radial4::quadform::{angular_product, form_chain_check, psi_map_check};
use radial4::radialfn::{apply_d, apply_e, apply_t, apply_t_squared, RadialFunction};
use radial4::spectral::{boundary_residual, discrete_eigenfunction};
use radial4::vsh::{eval_vsh, vsh_index_set, AngularPoint};

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A coefficient component, kept away from zero so canonicalization never
/// silently drops a generated term.
fn coeff_part() -> impl Strategy<Value = f64> {
    prop_oneof![0.1..2.0f64, -2.0..-0.1f64]
}

/// Decay rates for half-line integrability.
fn decay() -> impl Strategy<Value = f64> {
    -2.5..-0.3f64
}

/// Terms `c·r^k·e^{ar}` with `k ∈ [lo, hi]`, up to four of them.
fn profile(lo: i64, hi: i64) -> impl Strategy<Value = RadialFunction> {
    prop::collection::vec((coeff_part(), coeff_part(), lo..=hi, decay()), 1..=4).prop_map(
        |terms| {
            terms.into_iter().fold(RadialFunction::zero(), |acc, (re, im, k, a)| {
                &acc + &RadialFunction::term(cx(re, im), k, cx(a, 0.0))
            })
        },
    )
}

/// Profiles vanishing fast enough at the origin for every fourth-order
/// identity to integrate by parts without residue.
fn core_profile() -> impl Strategy<Value = RadialFunction> {
    profile(3, 6)
}

/// Unconstrained smooth decaying generators (inputs of the first-order maps).
fn generator_profile() -> impl Strategy<Value = RadialFunction> {
    profile(0, 4)
}

fn angular_l() -> impl Strategy<Value = i64> {
    1..=2i64
}

fn kappa_positive() -> impl Strategy<Value = f64> {
    0.3..2.5f64
}

fn sector_z() -> impl Strategy<Value = Complex64> {
    (0.3..2.0f64, 0.05..1.52f64).prop_map(|(m, arg)| Complex64::from_polar(m, arg))
}

fn interior_angle() -> impl Strategy<Value = AngularPoint> {
    (0.05..3.09f64, 0.0..6.28f64).prop_map(|(theta, phi)| AngularPoint::new(theta, phi).unwrap())
}

/// Assert a symbolic residual is pure roundoff relative to `scale`.
fn assert_negligible(resid: &RadialFunction, scale: f64, tol: f64, what: &str) {
    assert!(
        resid.is_zero() || resid.max_abs_coeff() <= tol * scale,
        "{what}: residual {} vs scale {scale}",
        resid.max_abs_coeff()
    );
}

proptest! {
    #[test]
    fn evaluation_is_linear(
        f in profile(0, 5),
        g in profile(0, 5),
        re in -1.5..1.5f64,
        im in -1.5..1.5f64,
        r in 0.1..5.0f64,
    ) {
        let c = cx(re, im);
        let sum = (&f + &g).evaluate(r).unwrap();
        let parts = f.evaluate(r).unwrap() + g.evaluate(r).unwrap();
        prop_assert!((sum - parts).norm() <= 1e-12 * parts.norm().max(1.0));
        let scaled = f.scale(c).evaluate(r).unwrap();
        prop_assert!((scaled - c * f.evaluate(r).unwrap()).norm() <= 1e-12 * scaled.norm().max(1.0));
    }

    #[test]
    fn canonicalization_merges_identical_terms(
        re1 in coeff_part(), im1 in coeff_part(),
        re2 in coeff_part(), im2 in coeff_part(),
        k in -2..6i64,
        a in decay(),
    ) {
        let split = &RadialFunction::term(cx(re1, im1), k, cx(a, 0.0))
            + &RadialFunction::term(cx(re2, im2), k, cx(a, 0.0));
        let merged = RadialFunction::term(cx(re1 + re2, im1 + im2), k, cx(a, 0.0));
        let diff = &split - &merged;
        assert_negligible(&diff, merged.max_abs_coeff().max(1.0), 1e-14, "canonical merge");
    }

    #[test]
    fn conjugation_commutes_with_evaluation(f in profile(0, 5), r in 0.1..5.0f64) {
        let direct = f.conj().evaluate(r).unwrap();
        let swapped = f.evaluate(r).unwrap().conj();
        prop_assert!((direct - swapped).norm() <= 1e-13 * direct.norm().max(1.0));
    }

    #[test]
    fn differentiation_obeys_the_product_rule(f in profile(0, 3), g in profile(0, 3)) {
        let lhs = f.product(&g).differentiate(1);
        let rhs = &f.differentiate(1).product(&g) + &f.product(&g.differentiate(1));
        let diff = &lhs - &rhs;
        assert_negligible(&diff, rhs.max_abs_coeff().max(1.0), 1e-12, "product rule");
    }

    #[test]
    fn json_round_trip_is_identity(f in profile(-2, 6)) {
        let back = RadialFunction::from_json(&f.to_json()).unwrap();
        let diff = &f - &back;
        assert_negligible(&diff, f.max_abs_coeff().max(1.0), 1e-15, "json round trip");
    }

    #[test]
    fn intertwining_passes_through_the_first_order_map(
        w in generator_profile(),
        l in angular_l(),
    ) {
        // T_l (D_l w) equals D_l (−w″): the map carries the zero-momentum
        // operator into the angular one.
        let lhs = apply_t(l, &apply_d(l, &w).unwrap());
        let rhs = apply_d(l, &w.differentiate(2)).unwrap();
        let resid = &lhs + &rhs;
        assert_negligible(&resid, lhs.max_abs_coeff().max(1.0), 1e-12, "intertwining");
    }

    #[test]
    fn first_order_factorizations_recover_the_operators(
        u in core_profile(),
        l in angular_l(),
    ) {
        let e = apply_e(l, &u, false);
        let lhs = apply_e(l, &e, true);
        let rhs = apply_t(l, &u);
        let diff = &lhs - &rhs;
        assert_negligible(&diff, rhs.max_abs_coeff().max(1.0), 1e-12, "E*E = T_l");

        let e_adj = apply_e(l, &u, true);
        let lhs = apply_e(l, &e_adj, false);
        let rhs = apply_t(l - 1, &u);
        let diff = &lhs - &rhs;
        assert_negligible(&diff, rhs.max_abs_coeff().max(1.0), 1e-12, "EE* = T_{l-1}");
    }

    #[test]
    fn fourth_order_composition_matches_squaring(u in core_profile(), l in angular_l()) {
        let twice = apply_t(l, &apply_t(l, &u));
        let squared = apply_t_squared(l, &u);
        let diff = &twice - &squared;
        assert_negligible(&diff, squared.max_abs_coeff().max(1.0), 1e-12, "T∘T = T²");
    }

    #[test]
    fn integration_is_interval_additive(u in core_profile(), v in core_profile(), r in 0.3..3.0f64) {
        let g = u.conj().product(&v);
        let whole = g.integrate_halfline().unwrap();
        let split = g.integrate(0.0, r).unwrap() + g.integrate(r, f64::INFINITY).unwrap();
        let scale = whole.norm().max(g.max_abs_coeff());
        prop_assert!((whole - split).norm() <= 1e-12 * scale.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discrete_eigenfunctions_solve_their_equation(
        kappa in kappa_positive(),
        l in angular_l(),
    ) {
        let v = discrete_eigenfunction(l, kappa, false).unwrap();
        let resid = &apply_t_squared(l, &v) + &v.scale(cx(kappa.powi(4), 0.0));
        assert_negligible(&resid, kappa.powi(4) * v.max_abs_coeff(), 1e-12, "eigen-equation");
        let boundary = boundary_residual(l, &v, kappa).unwrap();
        prop_assert!(boundary <= 1e-12, "boundary residual {boundary:e}");
    }

    #[test]
    fn resolvent_coefficients_satisfy_the_cross_identity(
        z in sector_z(),
        kappa in -1.5..1.5f64,
        l in angular_l(),
    ) {
        match resolvent_coefficients(l, z, kappa) {
            Ok(c) => {
                let lhs = c.beta_minus / c.w_minus;
                let rhs = -c.beta_plus / c.w_plus;
                prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1e-12));
                let i = cx(0.0, 1.0);
                let (wm, wp) = match l {
                    1 => (-2.0 * i * z.powi(3), cx(-2.0, 0.0) * z.powi(3)),
                    _ => (-2.0 * i * z.powi(5), cx(2.0, 0.0) * z.powi(5)),
                };
                prop_assert!((c.w_minus - wm).norm() <= 1e-13 * wm.norm());
                prop_assert!((c.w_plus - wp).norm() <= 1e-13 * wp.norm());
            }
            // The spectral point z = κe^{iπ/4} is genuinely excluded.
            Err(KernelError::DegenerateZ { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error: {e}"))),
        }
    }

    #[test]
    fn form_chain_and_order_reduction_hold_on_the_core(
        u in core_profile(),
        v in core_profile(),
        l in angular_l(),
    ) {
        prop_assert!(form_chain_check(l, &v, &u).unwrap() <= 1e-10);
        prop_assert!(psi_map_check(l, &u).unwrap() <= 1e-10);
    }

    #[test]
    fn angular_product_is_hermitian(
        u in core_profile(),
        v in core_profile(),
        l in angular_l(),
    ) {
        let uv = angular_product(l, &v, &u).unwrap();
        let vu = angular_product(l, &u, &v).unwrap();
        prop_assert!((uv - vu.conj()).norm() <= 1e-12 * uv.norm().max(1.0));
        let uu = angular_product(l, &u, &u).unwrap();
        prop_assert!(uu.re > 0.0 && uu.im.abs() <= 1e-12 * uu.re);
    }

    #[test]
    fn vector_harmonics_split_along_the_radial_direction(p in interior_angle()) {
        let n = p.unit_vector();
        for &(family, l, m) in vsh_index_set().iter() {
            let v = eval_vsh(family, l, m, p).unwrap();
            let radial = v[0] * n[0] + v[1] * n[1] + v[2] * n[2];
            let norm_sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            match family {
                radial4::vsh::VshFamily::Upsilon => {
                    // Υ is n times a scalar: its tangential part vanishes.
                    let tangential_sq = norm_sq - radial.norm_sqr();
                    prop_assert!(tangential_sq.abs() <= 1e-12 * norm_sq.max(1e-12));
                }
                _ => {
                    prop_assert!(radial.norm() <= 1e-12 * norm_sq.sqrt().max(1e-12));
                }
            }
        }
    }
}
