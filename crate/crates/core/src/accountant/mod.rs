//! Rényi-DP accounting for the Gaussian, coordinate-subsampled Gaussian
//! (CSGM) and sparsified Gaussian matrix-factorization (SGMF) mechanisms,
//! conversion to `(ε, δ)`, and noise calibration.

pub mod divergence;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default order grid, `α ∈ {2, …, 256}`.
pub fn default_orders() -> Vec<u32> {
    (2..=256).collect()
}

/// L2 / L∞ clipping norms together with the vector dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryBounds {
    pub delta2: f64,
    pub delta_inf: f64,
    pub dim: usize,
}

impl GeometryBounds {
    pub fn new(delta2: f64, delta_inf: f64, dim: usize) -> Result<Self> {
        let b = Self {
            delta2,
            delta_inf,
            dim,
        };
        b.validate()?;
        Ok(b)
    }

    /// Bounds for a pure L2 constraint, where Δ∞ = Δ2.
    pub fn l2_only(delta2: f64, dim: usize) -> Result<Self> {
        Self::new(delta2, delta2, dim)
    }

    /// Smallest dimension compatible with the given norms.
    pub fn with_min_dim(delta2: f64, delta_inf: f64) -> Result<Self> {
        let r = delta2 / delta_inf;
        let dim = ((r * r) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::new(delta2, delta_inf, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta2 > 0.0 && self.delta2.is_finite()) {
            return Err(Error::domain(format!("delta2 must be positive, got {}", self.delta2)));
        }
        if !(self.delta_inf > 0.0 && self.delta_inf.is_finite()) {
            return Err(Error::domain(format!(
                "delta_inf must be positive, got {}",
                self.delta_inf
            )));
        }
        if self.dim == 0 {
            return Err(Error::domain("dim must be at least 1"));
        }
        let slack = 1.0 + 1e-12;
        if self.delta_inf > self.delta2 * slack {
            return Err(Error::domain(format!(
                "delta_inf ({}) exceeds delta2 ({})",
                self.delta_inf, self.delta2
            )));
        }
        if self.delta2 > self.delta_inf * (self.dim as f64).sqrt() * slack {
            return Err(Error::domain(format!(
                "delta2 ({}) exceeds sqrt(dim) * delta_inf ({} * sqrt({}))",
                self.delta2, self.delta_inf, self.dim
            )));
        }
        Ok(())
    }

    /// `Δ2² / Δ∞²`, the real-valued number of saturated coordinates.
    pub fn saturation_ratio(&self) -> f64 {
        let r = self.delta2 / self.delta_inf;
        r * r
    }

    /// Both norms multiplied by `s` (the matrix-mechanism sensitivities).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            delta2: self.delta2 * s,
            delta_inf: self.delta_inf * s,
            dim: self.dim,
        }
    }
}

/// A Rényi-DP curve evaluated on an integer order grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpProfile {
    orders: Vec<u32>,
    epsilons: Vec<f64>,
}

impl RdpProfile {
    pub fn new(orders: Vec<u32>, epsilons: Vec<f64>) -> Result<Self> {
        if orders.len() != epsilons.len() {
            return Err(Error::domain("orders and epsilons differ in length"));
        }
        if orders.iter().any(|&a| a < 2) {
            return Err(Error::domain("Rényi orders must be at least 2"));
        }
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("Rényi orders must be strictly increasing"));
        }
        if epsilons.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::domain("Rényi epsilons must be nonnegative"));
        }
        Ok(Self { orders, epsilons })
    }

    /// Evaluates `curve` at every order.
    pub fn from_fn<F>(orders: &[u32], curve: F) -> Result<Self>
    where
        F: Fn(u32) -> Result<f64>,
    {
        let eps = orders.iter().map(|&a| curve(a)).collect::<Result<Vec<_>>>()?;
        Self::new(orders.to_vec(), eps)
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.orders.iter().copied().zip(self.epsilons.iter().copied())
    }

    /// Adaptive composition: pointwise sum over a shared grid.
    pub fn compose(&self, other: &RdpProfile) -> Result<RdpProfile> {
        if self.orders != other.orders {
            return Err(Error::domain("cannot compose profiles on different order grids"));
        }
        let eps = self
            .epsilons
            .iter()
            .zip(&other.epsilons)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.orders.clone(), eps)
    }

    /// `k`-fold self-composition.
    pub fn repeat(&self, k: usize) -> RdpProfile {
        RdpProfile {
            orders: self.orders.clone(),
            epsilons: self.epsilons.iter().map(|e| e * k as f64).collect(),
        }
    }
}

/// Sparsification rate, noise scale and cohort size of one CSGM release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsgmParams {
    pub gamma: f64,
    pub sigma: f64,
    pub cohort: usize,
}

impl CsgmParams {
    /// `sigma = 0` is accepted so that noiseless runs can be expressed; the
    /// accountant itself requires a positive noise scale.
    pub fn new(gamma: f64, sigma: f64, cohort: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be nonnegative, got {sigma}")));
        }
        if cohort == 0 {
            return Err(Error::domain("cohort must be at least 1"));
        }
        Ok(Self {
            gamma,
            sigma,
            cohort,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpTarget {
    pub epsilon: f64,
    pub delta: f64,
}

impl DpTarget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
        }
        check_delta(delta)?;
        Ok(Self { epsilon, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Gaussian,
    Csgm,
    Sgmf,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mechanism::Gaussian => "gaussian",
            Mechanism::Csgm => "csgm",
            Mechanism::Sgmf => "sgmf",
        })
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gm" => Ok(Mechanism::Gaussian),
            "csgm" => Ok(Mechanism::Csgm),
            "sgmf" => Ok(Mechanism::Sgmf),
            other => Err(Error::domain(format!("unknown mechanism `{other}`"))),
        }
    }
}

fn check_alpha(alpha: u32) -> Result<()> {
    if alpha < 2 {
        return Err(Error::domain(format!("Rényi order must be an integer >= 2, got {alpha}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Gaussian mechanism with L2 sensitivity `delta2`: `α·Δ2²/(2σ²)`.
pub fn gaussian_rdp(alpha: u32, delta2: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_sigma(sigma)?;
    if !(delta2 >= 0.0) {
        return Err(Error::domain("delta2 must be nonnegative"));
    }
    Ok(alpha as f64 * delta2 * delta2 / (2.0 * sigma * sigma))
}

/// L2-CSGM bound: `(Δ2²/Δ∞²) · D_α(γN(Δ∞,σ²) + (1-γ)N(0,σ²) ‖ N(0,σ²))`,
/// with the divergence taken over the full binomial sum `ℓ = 0..=α`.
pub fn csgm_rdp(alpha: u32, bounds: &GeometryBounds, gamma: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    check_sigma(sigma)?;
    bounds.validate()?;
    if gamma == 1.0 {
        return gaussian_rdp(alpha, bounds.delta2, sigma);
    }
    let per = divergence::closed_form(bounds.delta_inf, gamma, sigma, alpha);
    Ok(bounds.saturation_ratio() * per)
}

/// SGMF bound: the CSGM bound at sensitivities `κ2 = Δ(C)·Δ2`,
/// `κ∞ = Δ(C)·Δ∞`.
pub fn sgmf_rdp(
    alpha: u32,
    bounds: &GeometryBounds,
    sens_c: f64,
    gamma: f64,
    sigma: f64,
) -> Result<f64> {
    if !(sens_c > 0.0 && sens_c.is_finite()) {
        return Err(Error::domain(format!("sensitivity must be positive, got {sens_c}")));
    }
    csgm_rdp(alpha, &bounds.scaled(sens_c), gamma, sigma)
}

/// Bound of the L∞-geometry analysis: `d · D_α(Δ∞ S + Z ‖ Z)`.
pub fn linf_csgm_rdp(alpha: u32, bounds: &GeometryBounds, gamma: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    check_sigma(sigma)?;
    bounds.validate()?;
    let per = divergence::closed_form(bounds.delta_inf, gamma, sigma, alpha);
    Ok(bounds.dim as f64 * per)
}

/// Both evaluations of the per-coordinate divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceCheck {
    pub closed_form: f64,
    pub quadrature: f64,
}

impl DivergenceCheck {
    pub fn relative_difference(&self) -> f64 {
        let scale = self.closed_form.abs().max(self.quadrature.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.closed_form - self.quadrature).abs() / scale
        }
    }
}

/// `D_α(γN(κ,σ²) + (1-γ)N(0,σ²) ‖ N(0,σ²))` by closed form and by quadrature.
pub fn per_coordinate_divergence_oracle(
    kappa: f64,
    gamma: f64,
    sigma: f64,
    alpha: u32,
) -> Result<DivergenceCheck> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    check_sigma(sigma)?;
    if !kappa.is_finite() {
        return Err(Error::domain("kappa must be finite"));
    }
    Ok(DivergenceCheck {
        closed_form: divergence::closed_form(kappa, gamma, sigma, alpha),
        quadrature: divergence::quadrature(kappa, gamma, sigma, alpha)?,
    })
}

/// Result of an RDP to `(ε, δ)` conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub epsilon: f64,
    pub alpha: u32,
}

/// `ε = min_α ε(α) + ln(1/(αδ))/(α-1) + ln(1 - 1/α)`, clamped at zero.
pub fn rdp_to_dp(profile: &RdpProfile, delta: f64) -> Result<Conversion> {
    check_delta(delta)?;
    if profile.is_empty() {
        return Err(Error::domain("cannot convert an empty RDP profile"));
    }
    let mut best = Conversion {
        epsilon: f64::INFINITY,
        alpha: profile.orders[0],
    };
    for (alpha, eps) in profile.iter() {
        let a = alpha as f64;
        let converted = eps + (1.0 / (a * delta)).ln() / (a - 1.0) + (-1.0 / a).ln_1p();
        if converted < best.epsilon {
            best = Conversion {
                epsilon: converted,
                alpha,
            };
        }
    }
    best.epsilon = best.epsilon.max(0.0);
    Ok(best)
}

/// RDP profile of `mechanism` at noise scale `sigma`.
pub fn mechanism_profile(
    mechanism: Mechanism,
    bounds: &GeometryBounds,
    gamma: f64,
    sens_c: f64,
    sigma: f64,
    orders: &[u32],
) -> Result<RdpProfile> {
    match mechanism {
        Mechanism::Gaussian => RdpProfile::from_fn(orders, |a| gaussian_rdp(a, bounds.delta2, sigma)),
        Mechanism::Csgm => RdpProfile::from_fn(orders, |a| csgm_rdp(a, bounds, gamma, sigma)),
        Mechanism::Sgmf => {
            RdpProfile::from_fn(orders, |a| sgmf_rdp(a, bounds, sens_c, gamma, sigma))
        }
    }
}

/// Lower and upper ends of the noise-multiplier search bracket.
pub const MULTIPLIER_BRACKET: (f64, f64) = (1e-3, 1e6);

/// Smallest `σ` whose converted `ε` meets `target`, by bisection in
/// `ln σ`. The result is the upper end of the final bracket, so it always
/// satisfies the target.
pub fn calibrate_sigma(
    mechanism: Mechanism,
    target: &DpTarget,
    bounds: &GeometryBounds,
    gamma: f64,
    sens_c: f64,
    orders: &[u32],
) -> Result<f64> {
    DpTarget::new(target.epsilon, target.delta)?;
    bounds.validate()?;
    if mechanism != Mechanism::Gaussian {
        check_gamma(gamma)?;
    }
    if orders.is_empty() {
        return Err(Error::domain("order grid is empty"));
    }
    let eps_at = |sigma: f64| -> Result<f64> {
        let profile = mechanism_profile(mechanism, bounds, gamma, sens_c, sigma, orders)?;
        Ok(rdp_to_dp(&profile, target.delta)?.epsilon)
    };
    let mut lo = MULTIPLIER_BRACKET.0 * bounds.delta2;
    let mut hi = MULTIPLIER_BRACKET.1 * bounds.delta2;
    if eps_at(hi)? > target.epsilon {
        return Err(Error::Infeasible(format!(
            "epsilon {} unreachable even at noise multiplier {:e}",
            target.epsilon,
            MULTIPLIER_BRACKET.1
        )));
    }
    if eps_at(lo)? <= target.epsilon {
        return Err(Error::Infeasible(format!(
            "epsilon {} already met at noise multiplier {:e}; no bracket",
            target.epsilon,
            MULTIPLIER_BRACKET.0
        )));
    }
    while hi / lo > 1.0 + 1e-7 {
        let mid = (lo * hi).sqrt();
        if eps_at(mid)? <= target.epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Upper bound on `E‖μ̂ − μ‖²`: `d·σ²/(n²γ²) + Δ2²/(nγ)`.
///
/// The noise term carries the dimension explicitly, since `Z ~ N(0, σ²I_d)`.
pub fn csgm_mse(params: &CsgmParams, bounds: &GeometryBounds) -> f64 {
    let n = params.cohort as f64;
    let g = params.gamma;
    let noise = bounds.dim as f64 * params.sigma * params.sigma / (n * n * g * g);
    let sampling = if g == 1.0 {
        0.0
    } else {
        bounds.delta2 * bounds.delta2 / (n * g)
    };
    noise + sampling
}

/// Gaussian-mechanism noise scale with the same MSE as CSGM at
/// `sigma_csgm`: `σ_GM² = σ_CSGM²/γ² + nΔ2²/γ`.
///
/// With `cohort = None` only the noise terms are matched (`σ_GM = σ/γ`),
/// which is the comparison used for noise multipliers.
pub fn equal_mse_gaussian_sigma(
    sigma_csgm: f64,
    gamma: f64,
    cohort: Option<usize>,
    delta2: f64,
) -> f64 {
    let noise = sigma_csgm * sigma_csgm / (gamma * gamma);
    let sampling = match cohort {
        Some(n) => n as f64 * delta2 * delta2 / gamma,
        None => 0.0,
    };
    (noise + sampling).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bounds() -> GeometryBounds {
        GeometryBounds::new(1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_rdp(2, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(gaussian_rdp(2, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(gaussian_rdp(16, 1.0, 2.0).unwrap(), 2.0);
        assert!(gaussian_rdp(2, 1.0, 0.0).is_err());
        assert!(gaussian_rdp(2, 1.0, -1.0).is_err());
        assert!(gaussian_rdp(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn csgm_three_term_example() {
        let v = csgm_rdp(2, &unit_bounds(), 0.5, 1.0).unwrap();
        let hand = (0.25 * (1.0 + 2.0 + 1f64.exp())).ln();
        assert!((v - hand).abs() < 1e-14);
        assert!((v - 0.35738).abs() < 1e-5);
    }

    #[test]
    fn csgm_degenerate_gamma() {
        let b = GeometryBounds::new(2.0, 0.5, 64).unwrap();
        let g = csgm_rdp(7, &b, 1.0, 1.5).unwrap();
        let want = gaussian_rdp(7, 2.0, 1.5).unwrap();
        assert!((g - want).abs() <= 1e-14 * want);
        assert!(csgm_rdp(7, &b, 1e-12, 1.5).unwrap() < 1e-9);
    }

    #[test]
    fn csgm_domain_errors() {
        let b = unit_bounds();
        assert!(csgm_rdp(1, &b, 0.5, 1.0).is_err());
        assert!(csgm_rdp(2, &b, 0.0, 1.0).is_err());
        assert!(csgm_rdp(2, &b, 1.5, 1.0).is_err());
        assert!(csgm_rdp(2, &b, 0.5, 0.0).is_err());
    }

    #[test]
    fn sgmf_examples() {
        let b = unit_bounds();
        assert_eq!(
            sgmf_rdp(5, &b, 1.0, 0.3, 1.2).unwrap(),
            csgm_rdp(5, &b, 0.3, 1.2).unwrap()
        );
        let s: f64 = 1.7;
        let v = sgmf_rdp(2, &b, s, 1.0, 1.0).unwrap();
        assert!((v - 2.0 * s * s / 2.0).abs() < 1e-13);
        let v = sgmf_rdp(2, &b, 2f64.sqrt(), 0.5, 1.0).unwrap();
        let hand = (0.25 * (1.0 + 2.0 + 2f64.exp())).ln();
        assert!((v - hand).abs() < 1e-13);
        assert!((v - 0.954_458_6).abs() < 1e-6);
        assert!(sgmf_rdp(2, &b, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn linf_examples() {
        let b = GeometryBounds::new(1.0, 1.0, 1).unwrap();
        assert_eq!(
            linf_csgm_rdp(3, &b, 0.4, 0.8).unwrap(),
            csgm_rdp(3, &b, 0.4, 0.8).unwrap()
        );
        let b = GeometryBounds::new(1.0, 0.1, 100).unwrap();
        let per = per_coordinate_divergence_oracle(0.1, 0.5, 1.0, 2).unwrap();
        let v = linf_csgm_rdp(2, &b, 0.5, 1.0).unwrap();
        assert!((v - 100.0 * per.quadrature).abs() < 1e-8 * v);
    }

    #[test]
    fn oracle_examples() {
        let zero = per_coordinate_divergence_oracle(0.0, 0.3, 2.0, 5).unwrap();
        assert_eq!(zero.closed_form, 0.0);
        assert_eq!(zero.quadrature, 0.0);
        let shift = per_coordinate_divergence_oracle(1.0, 1.0, 1.0, 2).unwrap();
        assert!((shift.closed_form - 1.0).abs() < 1e-14);
        assert!((shift.quadrature - 1.0).abs() < 1e-9);
        let mix = per_coordinate_divergence_oracle(1.0, 0.5, 1.0, 2).unwrap();
        assert!(mix.relative_difference() < 1e-8);
        assert!((mix.quadrature - 0.35738).abs() < 1e-5);
    }

    #[test]
    fn conversion_clamps_to_zero() {
        let p = RdpProfile::new(vec![2], vec![0.0]).unwrap();
        let c = rdp_to_dp(&p, 0.5).unwrap();
        assert_eq!(c.epsilon, 0.0);
        assert_eq!(c.alpha, 2);
        let empty = RdpProfile::new(vec![], vec![]).unwrap();
        assert!(rdp_to_dp(&empty, 0.5).is_err());
        assert!(rdp_to_dp(&p, 0.0).is_err());
        assert!(rdp_to_dp(&p, 1.0).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(RdpProfile::new(vec![2, 2], vec![0.0, 0.0]).is_err());
        assert!(RdpProfile::new(vec![1], vec![0.0]).is_err());
        assert!(RdpProfile::new(vec![2], vec![-1.0]).is_err());
        assert!(RdpProfile::new(vec![2, 3], vec![0.0]).is_err());
    }

    #[test]
    fn bounds_validation() {
        assert!(GeometryBounds::new(1.0, 2.0, 10).is_err());
        assert!(GeometryBounds::new(10.0, 1.0, 4).is_err());
        assert!(GeometryBounds::new(2.0, 1.0, 4).is_ok());
        assert!(GeometryBounds::new(0.0, 0.0, 4).is_err());
        assert!(GeometryBounds::new(1.0, 1.0, 0).is_err());
        let b = GeometryBounds::with_min_dim(1.0, 1e-4).unwrap();
        assert_eq!(b.dim, 100_000_000);
    }

    #[test]
    fn mse_examples() {
        let b = GeometryBounds::new(1.0, 0.5, 4).unwrap();
        let p = CsgmParams::new(1.0, 0.0, 10).unwrap();
        assert_eq!(csgm_mse(&p, &b), 0.0);
        let p = CsgmParams::new(1.0, 2.0, 10).unwrap();
        assert!((csgm_mse(&p, &b) - 4.0 * 4.0 / 100.0).abs() < 1e-15);
        let p = CsgmParams::new(0.5, 1.0, 10).unwrap();
        assert!((csgm_mse(&p, &b) - 0.36).abs() < 1e-15);
    }

    #[test]
    fn calibration_self_consistency() {
        let b = GeometryBounds::l2_only(1.0, 1).unwrap();
        let orders = default_orders();
        let target = DpTarget::new(20.0, 1e-8).unwrap();
        let sigma = calibrate_sigma(Mechanism::Gaussian, &target, &b, 1.0, 1.0, &orders).unwrap();
        let p = mechanism_profile(Mechanism::Gaussian, &b, 1.0, 1.0, sigma, &orders).unwrap();
        let eps = rdp_to_dp(&p, 1e-8).unwrap().epsilon;
        assert!((20.0 * (1.0 - 1e-3)..=20.0).contains(&eps), "{eps}");

        let csgm = calibrate_sigma(Mechanism::Csgm, &target, &b, 1.0, 1.0, &orders).unwrap();
        assert!((csgm - sigma).abs() <= 1e-6 * sigma);
    }

    #[test]
    fn calibration_reports_infeasible_targets() {
        let b = GeometryBounds::l2_only(1.0, 1).unwrap();
        let orders = default_orders();
        let tiny = DpTarget::new(1e-9, 1e-8).unwrap();
        let err = calibrate_sigma(Mechanism::Gaussian, &tiny, &b, 1.0, 1.0, &orders).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn equal_mse_coupling() {
        assert_eq!(equal_mse_gaussian_sigma(0.5, 0.5, None, 1.0), 1.0);
        let s = equal_mse_gaussian_sigma(0.5, 0.5, Some(3), 1.0);
        assert!((s * s - (1.0 + 6.0)).abs() < 1e-12);
    }
}
