//! Closed-form signal, noise, sensitivity and photon-count expressions for the
//! teleportation protocol at unit feedback gains, plus the coherent-probe
//! baselines the optimizer compares against.

use crate::error::{ensure_finite, ensure_non_negative, ensure_unit_interval, Error, Result};
use crate::protocol::ProtocolParams;
use crate::real::{from_usize, lit, Real};

/// Below this distance from unit transmission the geometric ratios are summed term by term.
const NEAR_UNIT_TRANSMISSION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealMoments<T> {
    pub mean_x: T,
    pub var_x: T,
    pub sigma: T,
    /// Photons in the final probe state.
    pub n_m: T,
    pub n_total: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossyMoments<T> {
    pub mean_x: T,
    pub var_x: T,
    pub sigma: T,
    pub n_total: T,
}

/// Lossless protocol after `m` teleportations with unit gains.
pub fn ideal_moments<T: Real>(alpha: T, phi: T, r: T, m: usize) -> Result<IdealMoments<T>> {
    ensure_non_negative("alpha", alpha)?;
    ensure_finite("phi", phi)?;
    ensure_non_negative("r", r)?;
    let passes = from_usize::<T>(m + 1);
    let teleports = from_usize::<T>(m);
    let squeeze = (-(r + r)).exp();
    let angle = passes * phi;
    let var_x = readout_variance(teleports, squeeze);
    let sigma = sensitivity(var_x, passes, alpha, T::one(), angle.cos())?;
    Ok(IdealMoments {
        mean_x: alpha * angle.sin(),
        var_x,
        sigma,
        n_m: alpha * alpha + teleports * squeeze,
        n_total: passes * alpha * alpha + from_usize::<T>(m * (m + 1)) / lit(2.0) * squeeze,
    })
}

/// Protocol with probe loss `eta1` after every phase pass and resource loss `eta2`
/// (with `n_th` excess thermal photons) on both squeezed modes, unit gains.
pub fn lossy_moments<T: Real>(params: &ProtocolParams<T>) -> Result<LossyMoments<T>> {
    params.validate()?;
    let ProtocolParams {
        alpha,
        phi,
        r,
        m,
        eta1,
        eta2,
        n_th,
        ..
    } = *params;
    let passes = from_usize::<T>(m + 1);
    let noise = resource_noise(r, eta2, n_th)?;
    let amplitude = eta1.powf(passes / lit(2.0));
    let angle = passes * phi;
    let var_x = readout_variance(transmitted_sum(eta1, m), noise);
    let sigma = sensitivity(var_x, passes, alpha, amplitude, angle.cos())?;
    Ok(LossyMoments {
        mean_x: alpha * amplitude * angle.sin(),
        var_x,
        sigma,
        n_total: probe_photon_sum(eta1, m) * alpha * alpha + added_photon_sum(eta1, m) * noise,
    })
}

/// Effective two-mode squeezing `r_lim = −½ ln(η₂e^{−2r} + (1+2n_th)(1−η₂))`.
pub fn effective_squeezing<T: Real>(r: T, eta2: T, n_th: T) -> Result<T> {
    let bracket = resource_noise(r, eta2, n_th)?;
    if !(bracket > T::zero()) {
        return Err(Error::Internal(format!("non-positive noise bracket {bracket}")));
    }
    Ok(-bracket.ln() / lit(2.0))
}

/// `2·Var(x₂ − x₃)` of the lossy resource: `η₂e^{−2r} + (1+2n_th)(1−η₂)`.
pub fn resource_noise<T: Real>(r: T, eta2: T, n_th: T) -> Result<T> {
    ensure_non_negative("r", r)?;
    ensure_unit_interval("eta2", eta2)?;
    ensure_non_negative("n_th", n_th)?;
    Ok(eta2 * (-(r + r)).exp() + (T::one() + n_th + n_th) * (T::one() - eta2))
}

/// Sensitivity of a coherent probe carrying `n_total` photons through loss `eta1`.
pub fn coherent_baseline_sigma<T: Real>(n_total: T, phi: T, eta1: T) -> Result<T> {
    ensure_finite("n_total", n_total)?;
    if !(n_total > T::zero()) {
        return Err(Error::invalid("n_total", "must be > 0"));
    }
    ensure_finite("phi", phi)?;
    ensure_unit_interval("eta1", eta1)?;
    let denom = lit::<T>(2.0) * (eta1 * n_total).sqrt() * phi.cos().abs();
    if denom == T::zero() {
        return Err(Error::SensitivityUndefined);
    }
    Ok(T::one() / denom)
}

/// `Σ_{j=1}^{m} η^j`: accumulated teleportation noise weight at readout.
pub fn transmitted_sum<T: Real>(eta: T, m: usize) -> T {
    if near_unit(eta) {
        (1..=m).fold(T::zero(), |acc, j| acc + eta.powi(j as i32))
    } else {
        eta * (T::one() - eta.powi(m as i32)) / (T::one() - eta)
    }
}

/// `Σ_{i=0}^{m} η^i`: probe photon weight summed over all phase passes.
pub fn probe_photon_sum<T: Real>(eta: T, m: usize) -> T {
    if near_unit(eta) {
        (0..=m).fold(T::zero(), |acc, i| acc + eta.powi(i as i32))
    } else {
        (T::one() - eta.powi(m as i32 + 1)) / (T::one() - eta)
    }
}

/// `Σ_{j=0}^{m−1} (m−j)·η^j = [m(1−η) − η(1−η^m)]/(1−η)²`: teleportation-added photons
/// summed over all phase passes, per unit of resource noise.
pub fn added_photon_sum<T: Real>(eta: T, m: usize) -> T {
    if near_unit(eta) {
        (0..m).fold(T::zero(), |acc, j| acc + from_usize::<T>(m - j) * eta.powi(j as i32))
    } else {
        let one_minus = T::one() - eta;
        (from_usize::<T>(m) * one_minus - eta * (T::one() - eta.powi(m as i32))) / (one_minus * one_minus)
    }
}

fn near_unit<T: Real>(eta: T) -> bool {
    (T::one() - eta).abs() < lit(NEAR_UNIT_TRANSMISSION)
}

fn readout_variance<T: Real>(weight: T, noise: T) -> T {
    (T::one() + lit::<T>(2.0) * weight * noise) / lit(4.0)
}

fn sensitivity<T: Real>(var_x: T, passes: T, alpha: T, amplitude: T, cos: T) -> Result<T> {
    let slope = passes * alpha * amplitude * cos.abs();
    if slope == T::zero() {
        return Err(Error::SensitivityUndefined);
    }
    Ok(var_x.sqrt() / slope)
}
