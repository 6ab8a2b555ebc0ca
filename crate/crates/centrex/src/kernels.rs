//! Weight kernels w: [0, inf) -> (0, inf) used inside the mean-shift map.
//!
//! Every kernel is non-increasing and strictly positive where representable;
//! positivity keeps the map's denominator invertible. Each kernel also knows
//! its antiderivative R (with R(0) = 0 and R' = w), which the cost function
//! needs for monotonicity checks.

use crate::error::{Error, Result};
use crate::specfun;

/// Floor used by the flat kernel outside its bandwidth so weights never
/// vanish exactly.
pub const FLAT_FLOOR: f64 = 1e-30;

/// Default empirical coefficient for the squared-exponent Gaussian kernel.
pub const GAUSSIAN_DEFAULT_C: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// w(t) = 1 - F_{chi2_d}(t): the p-value of the Wald test at statistic t.
    Wald { dim: usize },
    /// w(t) = exp(-t^2 / (2 c sigma^2)), the benchmark-grade Gaussian form.
    Gaussian { c: f64, sigma: f64 },
    /// w(t) = exp(-t / (2 h)), the classic kernel-density Gaussian profile.
    Exponential { h: f64 },
    /// w(t) = 1 for t <= h^2, floor otherwise.
    Flat { h: f64 },
}

impl Kernel {
    pub fn wald(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("Wald kernel needs dimension >= 1".into()));
        }
        Ok(Kernel::Wald { dim })
    }

    pub fn gaussian(c: f64, sigma: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::Domain(format!("Gaussian kernel needs c > 0 and sigma > 0, got c={c}, sigma={sigma}")));
        }
        Ok(Kernel::Gaussian { c, sigma })
    }

    pub fn exponential(h: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::Domain(format!("exponential kernel needs h > 0, got {h}")));
        }
        Ok(Kernel::Exponential { h })
    }

    pub fn flat(h: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::Domain(format!("flat kernel needs h > 0, got {h}")));
        }
        Ok(Kernel::Flat { h })
    }

    /// Evaluate the kernel at a squared statistic t >= 0.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("kernel argument must be finite and >= 0, got {t}")));
        }
        // Clamping at the smallest positive normal keeps weights strictly
        // positive and non-increasing even where the true value underflows
        // (subnormals would otherwise dip below the later clamped values).
        let w = match self {
            Kernel::Wald { dim } => specfun::chi2_survival(*dim, t)?.max(f64::MIN_POSITIVE),
            Kernel::Gaussian { c, sigma } => {
                (-t * t / (2.0 * c * sigma * sigma)).exp().max(f64::MIN_POSITIVE)
            }
            Kernel::Exponential { h } => (-t / (2.0 * h)).exp().max(f64::MIN_POSITIVE),
            Kernel::Flat { h } => {
                if t <= h * h {
                    1.0
                } else {
                    FLAT_FLOOR
                }
            }
        };
        Ok(w)
    }

    /// Antiderivative R(t) = integral of w over [0, t], so R(0) = 0 and R' = w.
    ///
    /// For the Wald kernel, integrating the survival function by parts and
    /// using s f_d(s) = d f_{d+2}(s) for the chi-square density gives the
    /// closed form R(t) = t (1 - F_d(t)) + d F_{d+2}(t).
    pub fn antiderivative(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("kernel argument must be finite and >= 0, got {t}")));
        }
        Ok(match self {
            Kernel::Wald { dim } => {
                let surv = specfun::chi2_survival(*dim, t)?;
                let lower = specfun::regularized_lower_gamma(*dim as f64 / 2.0 + 1.0, t / 2.0)?;
                t * surv + *dim as f64 * lower
            }
            Kernel::Gaussian { c, sigma } => {
                // integral of exp(-s^2/(2 c sigma^2)) = sqrt(pi c sigma^2 / 2) erf(t / sqrt(2 c sigma^2))
                let a2 = 2.0 * c * sigma * sigma;
                let x = t / a2.sqrt();
                let erf = specfun::regularized_lower_gamma(0.5, x * x)?;
                (std::f64::consts::PI * a2 / 4.0).sqrt() * erf
            }
            Kernel::Exponential { h } => 2.0 * h * (1.0 - (-t / (2.0 * h)).exp()),
            Kernel::Flat { h } => {
                let h2 = h * h;
                t.min(h2) + FLAT_FLOOR * (t - h2).max(0.0)
            }
        })
    }

    /// Parse a kernel description string.
    ///
    /// Grammar: `wald` | `gauss:c=5,sigma=2.0` (c optional, default 5) |
    /// `gauss:h=1.5` or `exp:h=1.5` (classic profile) | `flat:h=2`.
    /// `dim` supplies the degrees of freedom for the Wald kernel.
    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        let s = s.trim();
        let bad = |msg: &str| Error::Config(format!("invalid kernel spec {s:?}: {msg}"));
        if s == "wald" {
            return Kernel::wald(dim);
        }
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| bad("expected \"wald\", \"gauss:...\", \"exp:...\", or \"flat:...\""))?;
        let mut params: Vec<(&str, f64)> = Vec::new();
        for pair in args.split(',') {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| bad("parameters must look like key=value"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(&format!("cannot parse number {:?}", value.trim())))?;
            params.push((key.trim(), value));
        }
        let get = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let known = |allowed: &[&str]| -> Result<()> {
            for (k, _) in &params {
                if !allowed.contains(k) {
                    return Err(bad(&format!("unknown parameter {k:?}")));
                }
            }
            Ok(())
        };
        match name {
            "gauss" | "gaussian" => {
                known(&["c", "sigma", "h"])?;
                match (get("sigma"), get("h")) {
                    (Some(sigma), None) => {
                        Kernel::gaussian(get("c").unwrap_or(GAUSSIAN_DEFAULT_C), sigma)
                    }
                    (None, Some(h)) => {
                        if get("c").is_some() {
                            return Err(bad("c applies to the sigma form only"));
                        }
                        Kernel::exponential(h)
                    }
                    _ => Err(bad("need exactly one of sigma=... (benchmark form) or h=... (classic form)")),
                }
            }
            "exp" | "exponential" => {
                known(&["h"])?;
                Kernel::exponential(get("h").ok_or_else(|| bad("need h=..."))?)
            }
            "flat" => {
                known(&["h"])?;
                Kernel::flat(get("h").ok_or_else(|| bad("need h=..."))?)
            }
            _ => Err(bad("unknown kernel name")),
        }
    }

    /// Canonical string form, matching what [`Kernel::parse`] accepts.
    pub fn describe(&self) -> String {
        match self {
            Kernel::Wald { .. } => "wald".to_string(),
            Kernel::Gaussian { c, sigma } => format!("gauss:c={c},sigma={sigma}"),
            Kernel::Exponential { h } => format!("exp:h={h}"),
            Kernel::Flat { h } => format!("flat:h={h}"),
        }
    }
}

/// Outcome of checking the kernel assumptions on a grid.
#[derive(Debug, Clone)]
pub struct KernelReport {
    pub positive: bool,
    pub non_increasing: bool,
    pub tail_decay: bool,
    pub violations: Vec<String>,
}

impl KernelReport {
    pub fn all_pass(&self) -> bool {
        self.positive && self.non_increasing && self.tail_decay
    }
}

/// Check positivity and monotonicity of w on the given ascending grid, and
/// that t * w(t) keeps decreasing toward 0 past the grid's tail.
pub fn verify_kernel_assumptions(kernel: &Kernel, grid: &[f64]) -> Result<KernelReport> {
    if grid.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::Domain("grid must be sorted ascending".into()));
    }
    let mut report = KernelReport {
        positive: true,
        non_increasing: true,
        tail_decay: true,
        violations: Vec::new(),
    };
    let mut prev: Option<(f64, f64)> = None;
    for &t in grid {
        let w = kernel.eval(t)?;
        if w <= 0.0 {
            report.positive = false;
            report.violations.push(format!("w({t}) = {w} is not positive"));
        }
        if let Some((tp, wp)) = prev {
            if w > wp * (1.0 + 1e-12) {
                report.non_increasing = false;
                report.violations.push(format!("w({t}) = {w} > w({tp}) = {wp}"));
            }
        }
        prev = Some((t, w));
    }
    // Probe t * w(t) on a geometric extension past the grid: it must shrink
    // monotonically toward 0, where anything at representation-underflow
    // scale (the weight has been clamped to the smallest normal) counts as 0.
    const EFFECTIVE_ZERO: f64 = 1e-250;
    let t0 = grid.last().copied().unwrap_or(1.0).max(1.0);
    let probes: Vec<f64> = (0..6).map(|i| t0 * 4f64.powi(i)).collect();
    let mut tail: Vec<f64> = Vec::with_capacity(probes.len());
    for &t in &probes {
        let u = t * kernel.eval(t)?;
        tail.push(if u < EFFECTIVE_ZERO { 0.0 } else { u });
    }
    let decreasing = tail.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12));
    let last = *tail.last().unwrap();
    let vanishing = last == 0.0 || last <= tail[0] * 1e-3 || last < 1e-12;
    if !(decreasing && vanishing) {
        report.tail_decay = false;
        report
            .violations
            .push(format!("t*w(t) over {probes:?} gives {tail:?}, not decaying to 0"));
    }
    Ok(report)
}
