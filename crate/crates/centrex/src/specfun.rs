//! Self-contained special functions: the regularized incomplete gamma
//! function and the chi-squared CDF, survival function and quantile.
//!
//! These are the numeric substrate of the Wald kernel and the Wald test.
//! The survival function is computed directly from the upper-gamma
//! continued fraction rather than as `1 - cdf`, because the clustering
//! weights need tail probabilities with full relative precision: naive
//! subtraction flushes them to zero long before the floating-point
//! representation does.

use crate::error::{Error, Result};

const MAX_ITERS: usize = 2_000;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0`.
///
/// Lanczos approximation with g = 671/128 and 14 coefficients; relative
/// error is a few ulps over the range used here (arguments up to a few
/// hundred from chi-squared degrees of freedom).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    const COF: [f64; 14] = [
        57.156_235_665_862_923_5,
        -59.597_960_355_475_491_2,
        14.136_097_974_741_747_1,
        -0.491_913_816_097_620_199,
        0.339_946_499_848_118_887e-4,
        0.465_236_289_270_485_756e-4,
        -0.983_744_753_048_795_646e-4,
        0.158_088_703_224_912_494e-3,
        -0.210_264_441_724_104_883e-3,
        0.217_439_618_115_212_643e-3,
        -0.164_318_106_536_763_890e-3,
        0.844_182_239_838_527_433e-4,
        -0.261_908_384_015_814_087e-4,
        0.368_991_826_595_316_234e-5,
    ];
    let mut y = x;
    let tmp = x + 5.242_187_5;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_092;
    for c in COF {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("gamma shape must be positive, got {a}")));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("gamma argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Series expansion for the regularized lower incomplete gamma P(a, x).
/// Converges quickly for `x < a + 1`.
fn lower_gamma_series(a: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITERS {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            let ln_pre = a * x.ln() - x - ln_gamma(a);
            return Ok((sum * ln_pre.exp()).min(1.0));
        }
    }
    Err(Error::Numeric(format!("lower gamma series did not converge for a={a}, x={x}")))
}

/// Modified Lentz continued fraction for the upper incomplete gamma,
/// without the `x^a e^{-x} / Γ(a)` prefactor: returns `h` such that
/// Q(a, x) = exp(a ln x - x - ln Γ(a)) · h. Converges quickly for
/// `x >= a + 1`; `h` stays of moderate size even when Q underflows.
fn upper_gamma_cf_factor(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITERS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!("upper gamma continued fraction did not converge for a={a}, x={x}")))
}

/// Regularized upper incomplete gamma Q(a, x) via the continued fraction,
/// keeping full relative precision deep in the tail.
fn upper_gamma_cf(a: f64, x: f64) -> Result<f64> {
    let h = upper_gamma_cf_factor(a, x)?;
    let ln_pre = a * x.ln() - x - ln_gamma(a);
    Ok(ln_pre.exp() * h)
}

/// Regularized upper incomplete gamma function Q(a, x) = Γ(a, x) / Γ(a).
///
/// Strictly decreasing in `x`, with Q(a, 0) = 1. Computed by the series
/// expansion for `x < a + 1` (as `1 - P`, both terms then of moderate size)
/// and by the continued fraction otherwise, so tail values keep relative
/// precision down to the underflow threshold.
pub fn regularized_upper_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x < a + 1.0 {
        Ok(1.0 - lower_gamma_series(a, x)?)
    } else {
        upper_gamma_cf(a, x)
    }
}

/// Regularized lower incomplete gamma function P(a, x) = γ(a, x) / Γ(a).
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x < a + 1.0 {
        lower_gamma_series(a, x)
    } else {
        Ok(1.0 - upper_gamma_cf(a, x)?)
    }
}

fn check_dof(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("degrees of freedom must be >= 1".into()));
    }
    Ok(d as f64)
}

/// Chi-squared CDF with `d` degrees of freedom: F(t) = P(d/2, t/2).
pub fn chi2_cdf(d: usize, t: f64) -> Result<f64> {
    let df = check_dof(d)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("chi-squared argument must be nonnegative, got {t}")));
    }
    regularized_lower_gamma(df / 2.0, t / 2.0)
}

/// Chi-squared survival function Q(d/2, t/2) = 1 - F(t), computed directly
/// (not as a subtraction) so that tail values stay strictly positive with
/// full relative precision until they underflow.
pub fn chi2_survival(d: usize, t: f64) -> Result<f64> {
    let df = check_dof(d)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("chi-squared argument must be nonnegative, got {t}")));
    }
    regularized_upper_gamma(df / 2.0, t / 2.0)
}

/// Log-density of the chi-squared distribution at `t > 0`.
pub(crate) fn chi2_ln_pdf(d: usize, t: f64) -> f64 {
    let a = d as f64 / 2.0;
    (a - 1.0) * t.ln() - t / 2.0 - a * std::f64::consts::LN_2 - ln_gamma(a)
}

/// Natural log of the chi-squared survival function, finite deep into the
/// tail where the survival probability itself underflows f64 (arguments up
/// to t/2 ~ 1e6 and beyond). Computed from the continued-fraction factor
/// with the log-prefactor kept symbolic.
pub(crate) fn chi2_ln_survival(d: usize, t: f64) -> Result<f64> {
    let df = check_dof(d)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("chi-squared argument must be nonnegative, got {t}")));
    }
    let a = df / 2.0;
    let x = t / 2.0;
    if x < a + 1.0 {
        // Q(a, x) >= Q(a, a + 1), which is far from the underflow threshold.
        let q = 1.0 - lower_gamma_series(a, x)?;
        return Ok(q.ln());
    }
    let h = upper_gamma_cf_factor(a, x)?;
    Ok(a * x.ln() - x - ln_gamma(a) + h.ln())
}

/// Chi-squared quantile: the `t` with F(t) = p, for `0 <= p < 1`.
///
/// Bracketed bisection starting from `[0, d + 40*sqrt(2d)]` (widened in the
/// unlikely case the CDF has not reached `p` there), refined by Newton steps
/// on the CDF. The result satisfies |chi2_cdf(d, t) - p| <= 1e-12.
pub fn chi2_quantile(d: usize, p: f64) -> Result<f64> {
    let df = check_dof(d)?;
    if !p.is_finite() || !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile probability must lie in [0, 1), got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = df + 40.0 * (2.0 * df).sqrt();
    let mut grow = 0;
    while chi2_cdf(d, hi)? < p {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Numeric(format!("quantile bracket failed for d={d}, p={p}")));
        }
    }
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(d, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    let mut best = t;
    let mut best_err = f64::INFINITY;
    for _ in 0..12 {
        let err = chi2_cdf(d, t)? - p;
        if err.abs() < best_err {
            best_err = err.abs();
            best = t;
        }
        if err.abs() <= 1e-15 * p.max(1e-3) {
            break;
        }
        let pdf = chi2_ln_pdf(d, t).exp();
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        let step = err / pdf;
        let next = t - step;
        if !(lo..=hi).contains(&next) || !next.is_finite() {
            break;
        }
        t = next;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_gamma_trivial_closed_forms() {
        // Q(1, x) = e^{-x}
        let q = regularized_upper_gamma(1.0, 3.0).unwrap();
        assert!((q - (-3.0_f64).exp()).abs() < 1e-14, "got {q}");
        // Q(a, 0) = 1
        assert_eq!(regularized_upper_gamma(2.5, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn upper_gamma_frozen_half_integer() {
        // Q(0.5, 2) computed by the adaptive-quadrature oracle in tests/.
        let q = regularized_upper_gamma(0.5, 2.0).unwrap();
        assert!((q - 0.045_500_263_896_358_57).abs() < 1e-12, "got {q}");
    }

    #[test]
    fn upper_gamma_deep_tail_positive() {
        // 1 - cdf would flush these to zero; the direct path must not.
        let q = regularized_upper_gamma(5.0, 300.0).unwrap();
        assert!(q > 0.0 && q < 1e-110, "got {q}");
        let q = regularized_upper_gamma(50.0, 700.0).unwrap();
        assert!(q > 0.0 && q < 1e-180, "got {q}");
    }

    #[test]
    fn upper_gamma_large_shape() {
        // a = 500 exercises the slow-convergence corner near x = a.
        for x in [400.0, 499.0, 501.5, 650.0, 1e4] {
            let q = regularized_upper_gamma(500.0, x).unwrap();
            let p = regularized_lower_gamma(500.0, x).unwrap();
            assert!((p + q - 1.0).abs() < 1e-12, "x={x}: p+q={}", p + q);
        }
    }

    #[test]
    fn gamma_domain_errors() {
        assert!(regularized_upper_gamma(0.0, 1.0).is_err());
        assert!(regularized_upper_gamma(-1.0, 1.0).is_err());
        assert!(regularized_upper_gamma(1.0, -0.5).is_err());
        assert!(regularized_upper_gamma(f64::NAN, 1.0).is_err());
        assert!(regularized_upper_gamma(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_closed_form_d2() {
        // F(t) = 1 - e^{-t/2} for d = 2.
        let t = 2.0 * std::f64::consts::LN_2;
        assert!((chi2_cdf(2, t).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(chi2_cdf(2, 0.0).unwrap(), 0.0);
        for i in 0..200 {
            let t = 0.1 * i as f64;
            let exact = 1.0 - (-t / 2.0).exp();
            assert!((chi2_cdf(2, t).unwrap() - exact).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn cdf_frozen_d1() {
        // F(1) for d=1 equals 2*Phi(1) - 1; value frozen from the
        // error-function oracle in tests/.
        let c = chi2_cdf(1, 1.0).unwrap();
        assert!((c - 0.682_689_492_137_085_9).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn survival_closed_form_and_frozen() {
        let s = chi2_survival(2, 40.0).unwrap();
        let exact = (-20.0_f64).exp();
        assert!((s - exact).abs() / exact < 1e-12, "got {s}");
        assert_eq!(chi2_survival(7, 0.0).unwrap(), 1.0);
        // Frozen from the quadrature oracle.
        let s = chi2_survival(10, 25.0).unwrap();
        assert!((s - 0.005_345_505_487_134_069).abs() < 1e-12, "got {s}");
    }

    #[test]
    fn survival_tail_keeps_relative_precision() {
        // d=2 closed form deep in the tail: Q = e^{-t/2}.
        for t in [100.0, 500.0, 1000.0, 1300.0] {
            let s = chi2_survival(2, t).unwrap();
            let exact = (-t / 2.0).exp();
            assert!((s - exact).abs() / exact < 1e-12, "t={t}: {s} vs {exact}");
        }
    }

    #[test]
    fn ln_survival_matches_survival_where_both_representable() {
        for d in [1, 2, 5, 10, 100] {
            for t in [0.5, 3.0, 20.0, 120.0, 600.0] {
                let s = chi2_survival(d, t).unwrap();
                let ls = chi2_ln_survival(d, t).unwrap();
                assert!(
                    (ls - s.ln()).abs() <= 1e-11 * s.ln().abs().max(1.0),
                    "d={d} t={t}: {ls} vs {}",
                    s.ln()
                );
            }
        }
        assert_eq!(chi2_ln_survival(5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ln_survival_frozen_deep_tail() {
        // 50-digit reference values, far past f64 underflow of the survival
        // probability itself
        let cases = [
            (100, 2e6, -999_467.605_677_604_9),
            (10, 1e4, -4_969.108_480_904_704_4),
            (2, 500.0, -250.0),
            (100, 1e6, -499_501.569_840_448_9),
            (1, 3e5, -150_006.531_563_562_77),
        ];
        for (d, t, expected) in cases {
            let ls = chi2_ln_survival(d, t).unwrap();
            assert!(
                (ls - expected).abs() <= 1e-10 * expected.abs(),
                "d={d} t={t}: {ls} vs {expected}"
            );
        }
    }

    #[test]
    fn ln_survival_monotone_decreasing() {
        // Non-increasing everywhere; strictly decreasing once the survival
        // probability is measurably below 1 (for small arguments in high
        // dimension it rounds to exactly 1, so consecutive logs tie at 0).
        for d in [1, 10, 100] {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let t = 10.0_f64.powf(-2.0 + 8.0 * i as f64 / 199.0);
                let ls = chi2_ln_survival(d, t).unwrap();
                assert!(ls.is_finite());
                assert!(ls <= prev, "d={d} t={t}");
                if prev < -1e-12 {
                    assert!(ls < prev, "d={d} t={t}");
                }
                prev = ls;
            }
        }
    }

    #[test]
    fn quantile_closed_form_d2() {
        let q = chi2_quantile(2, 0.95).unwrap();
        let exact = -2.0 * 0.05_f64.ln();
        assert!((q - exact).abs() < 1e-12, "got {q} want {exact}");
        assert_eq!(chi2_quantile(17, 0.0).unwrap(), 0.0);
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let exact = -2.0 * (1.0 - p).ln();
            let q = chi2_quantile(2, p).unwrap();
            assert!((q - exact).abs() < 1e-12, "p={p}: {q} vs {exact}");
        }
    }

    #[test]
    fn quantile_frozen_d100() {
        // Frozen from bisection against the quadrature-oracle CDF.
        let q = chi2_quantile(100, 0.999).unwrap();
        assert!((q - 149.449_252_779_038_86).abs() < 1e-8, "got {q}");
    }

    #[test]
    fn quantile_domain_errors() {
        assert!(chi2_quantile(2, 1.0).is_err());
        assert!(chi2_quantile(2, -0.1).is_err());
        assert!(chi2_quantile(2, f64::NAN).is_err());
        assert!(chi2_quantile(0, 0.5).is_err());
    }

    #[test]
    fn roundtrip_quantile_cdf() {
        for d in [1usize, 2, 5, 10, 100] {
            for p in [1e-6, 1e-3, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-6] {
                let t = chi2_quantile(d, p).unwrap();
                let back = chi2_cdf(d, t).unwrap();
                assert!((back - p).abs() < 1e-10, "d={d}, p={p}: roundtrip {back}");
            }
        }
    }

    #[test]
    fn ln_gamma_reference_points() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        // Gamma(0.5) = sqrt(pi)
        let exact = std::f64::consts::PI.sqrt().ln();
        assert!((ln_gamma(0.5) - exact).abs() < 1e-14);
        // Gamma(11) = 10!
        let exact = (3_628_800.0_f64).ln();
        assert!((ln_gamma(11.0) - exact).abs() < 1e-12);
    }

    mod proptests {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(300))]

            #[test]
            fn cdf_monotone_and_complementary(t1 in 0.0_f64..300.0, t2 in 0.0_f64..300.0, di in 0usize..5) {
                let d = [1, 2, 5, 10, 100][di];
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                let c_lo = chi2_cdf(d, lo).unwrap();
                let c_hi = chi2_cdf(d, hi).unwrap();
                prop_assert!(c_lo <= c_hi + 1e-15, "cdf not monotone: d={} {} {}", d, c_lo, c_hi);
                let s = chi2_survival(d, hi).unwrap();
                prop_assert!((c_hi + s - 1.0).abs() < 1e-12, "cdf+sf != 1: {}", c_hi + s);
            }

            #[test]
            fn quantile_roundtrip(p in 1e-6_f64..0.999_999, di in 0usize..5) {
                let d = [1, 2, 5, 10, 100][di];
                let t = chi2_quantile(d, p).unwrap();
                let back = chi2_cdf(d, t).unwrap();
                prop_assert!((back - p).abs() < 1e-10, "d={} p={} back={}", d, p, back);
            }

            #[test]
            fn upper_gamma_decreasing(a in 0.1_f64..250.0, x in 0.0_f64..500.0, dx in 0.01_f64..50.0) {
                let q1 = regularized_upper_gamma(a, x).unwrap();
                let q2 = regularized_upper_gamma(a, x + dx).unwrap();
                prop_assert!(q2 <= q1 + 1e-15, "Q increased: a={} x={} {} -> {}", a, x, q1, q2);
            }
        }
    }
}
