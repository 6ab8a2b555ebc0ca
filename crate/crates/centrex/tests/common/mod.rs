//! Shared oracles for the integration suites: a quadrature reference for the
//! chi-square distribution (independent of the library's special-function
//! code) and a dense-linear-algebra rotation sampler.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// ln of the chi-square density at `t > 0`, written against an external
/// ln-gamma so the reference shares nothing with the library implementation.
pub fn chi2_ln_pdf_oracle(d: usize, t: f64) -> f64 {
    let a = d as f64 / 2.0;
    (a - 1.0) * t.ln()
        - t / 2.0
        - a * std::f64::consts::LN_2
        - statrs::function::gamma::ln_gamma(a)
}

/// Chi-square CDF at `x` by composite Simpson under the substitution
/// t = u^2, which regularizes the d = 1 endpoint singularity; `panels` must
/// be even.
pub fn chi2_cdf_quadrature(d: usize, x: f64, panels: usize) -> f64 {
    assert!(x >= 0.0 && panels >= 2 && panels % 2 == 0);
    if x == 0.0 {
        return 0.0;
    }
    let b = x.sqrt();
    let h = b / panels as f64;
    let g = |u: f64| -> f64 {
        if u <= 0.0 {
            // 2u f_d(u^2) -> sqrt(2/pi) for d = 1, 0 for d >= 2
            return if d == 1 { (2.0 / std::f64::consts::PI).sqrt() } else { 0.0 };
        }
        2.0 * u * chi2_ln_pdf_oracle(d, u * u).exp()
    };
    let mut acc = g(0.0) + g(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(i as f64 * h);
    }
    acc * h / 3.0
}

/// A uniformly random orthonormal matrix as rows, via QR of a Gaussian
/// matrix.
pub fn random_rotation_rows(dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = m.qr().q();
    (0..dim).map(|i| q.row(i).iter().copied().collect()).collect()
}
