//! Order-α Rényi divergence of a one-dimensional Bernoulli-subsampled
//! Gaussian against the centred Gaussian,
//! `D_α(γ N(κ, σ²) + (1-γ) N(0, σ²) ‖ N(0, σ²))`.
//!
//! Two independent routes are provided. The closed form expands
//! `E_q[(1 - γ + γ p/q)^α]` binomially and uses the Gaussian moment
//! generating function; the quadrature route integrates the density ratio
//! numerically over the real line.

use super::quadrature;
use crate::error::{Error, Result};

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(e^x - 1)` for `x > 0`.
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp_m1()).ln()
    } else {
        x.exp_m1().ln()
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln C(n, k)` for `k = 0..=n`, mirrored so that both ends are exactly zero.
pub(crate) fn log_binomials(n: u32) -> Vec<f64> {
    let n_us = n as usize;
    let mut out = vec![0.0; n_us + 1];
    for k in 1..=n_us / 2 {
        out[k] = out[k - 1] + ((n_us - k + 1) as f64).ln() - (k as f64).ln();
    }
    for k in n_us / 2 + 1..=n_us {
        out[k] = out[n_us - k];
    }
    out
}

/// `ln Σ_{ℓ=0}^{α} C(α,ℓ)(1-γ)^{α-ℓ} γ^ℓ exp(ℓ(ℓ-1)·x)` for `x ≥ 0`.
///
/// The binomial weights sum to one, so the sum is `1 + S` with
/// `S = Σ_ℓ w_ℓ·expm1(ℓ(ℓ-1)x) ≥ 0`. `ln S` is accumulated in log space
/// and `ln(1 + S)` recovered through a softplus, which stays accurate both
/// when `S` underflows relative to one and when it overflows `f64`.
pub fn log_moment(alpha: u32, gamma: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let lc = log_binomials(alpha);
    let ln_gamma = gamma.ln();
    let ln_keep = (-gamma).ln_1p();
    let a = alpha as usize;
    let ln_s = log_sum_exp((2..=a).filter_map(|l| {
        let ln_w = if l == a {
            lc[l] + l as f64 * ln_gamma
        } else {
            if gamma == 1.0 {
                return None;
            }
            lc[l] + (a - l) as f64 * ln_keep + l as f64 * ln_gamma
        };
        let e = (l * (l - 1)) as f64 * x;
        Some(ln_w + ln_expm1(e))
    }));
    softplus(ln_s)
}

/// Closed-form per-coordinate divergence.
pub fn closed_form(kappa: f64, gamma: f64, sigma: f64, alpha: u32) -> f64 {
    let x = kappa * kappa / (2.0 * sigma * sigma);
    log_moment(alpha, gamma, x) / (alpha as f64 - 1.0)
}

/// Stable `(1+u)^α - 1 - αu` for `u > -1`; nonnegative by Bernoulli's
/// inequality.
fn bernoulli_gap(u: f64, alpha: f64) -> f64 {
    let lp = u.ln_1p();
    let w = alpha * lp;
    let exp_gap = if w.abs() < 0.5 {
        // e^w - 1 - w
        let mut term = w * w / 2.0;
        let mut sum = term;
        let mut k = 3.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= w / k;
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        w.exp_m1() - w
    };
    let log_gap = if u.abs() < 0.5 {
        // ln(1+u) - u
        let mut power = u * u;
        let mut sum = -power / 2.0;
        let mut k = 3.0;
        loop {
            power *= -u;
            let term = -power / k;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        lp - u
    };
    (exp_gap + alpha * log_gap).max(0.0)
}

/// Per-coordinate divergence by adaptive quadrature.
///
/// When the log of the moment exceeds `1e-2` the integrand is normalised by
/// its maximum and integrated in log space. Below that, the integrand
/// `q·((1 + γ(p/q - 1))^α - 1 - αγ(p/q - 1))` is used instead: it is
/// nonnegative and its integral is exactly the moment minus one, because
/// `E_q[p/q - 1] = 0`.
pub fn quadrature(kappa: f64, gamma: f64, sigma: f64, alpha: u32) -> Result<f64> {
    if !kappa.is_finite() {
        return Err(Error::domain("kappa must be finite"));
    }
    let k = kappa.abs();
    if k == 0.0 {
        return Ok(0.0);
    }
    let a = alpha as f64;
    let s2 = sigma * sigma;
    let ln_norm = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let ln_q = move |x: f64| -x * x / (2.0 * s2) + ln_norm;
    let r = move |x: f64| k * (x - 0.5 * k) / s2;
    let ln_keep = (-gamma).ln_1p();
    let ln_gamma = gamma.ln();
    let ln_h = move |x: f64| {
        let mix = if gamma == 1.0 {
            r(x)
        } else {
            ln_add_exp(ln_keep, ln_gamma + r(x))
        };
        ln_q(x) + a * mix
    };

    let lo = -40.0 * sigma;
    let hi = a * k + 40.0 * sigma;
    let step = (0.5 * sigma).max((hi - lo) / 4000.0);
    let panels = ((hi - lo) / step).ceil() as usize;
    let points: Vec<f64> = (0..=panels)
        .map(|i| if i == panels { hi } else { lo + i as f64 * step })
        .collect();
    let shift = points
        .windows(2)
        .flat_map(|w| [ln_h(w[0]), ln_h(0.5 * (w[0] + w[1]))])
        .fold(ln_h(hi), f64::max);

    let main = quadrature::integrate(|x| (ln_h(x) - shift).exp(), &points, 1e-13, 0.0, 200_000)?;
    let ln_moment = shift + main.value.ln();
    if ln_moment > 1e-2 {
        return Ok(ln_moment / (a - 1.0));
    }

    let gap = move |x: f64| {
        let u = gamma * r(x).exp_m1();
        ln_q(x).exp() * bernoulli_gap(u, a)
    };
    let small = quadrature::integrate(gap, &points, 1e-13, 1e-300, 200_000)?;
    Ok(small.value.ln_1p() / (a - 1.0))
}
