//! Closed-form SINR statistics, rate integrals and the asymptotic EE model.
//!
//! For users with i.i.d. `CN(0, βI)` channels and a unitary beam matrix, the
//! SINR on any beam is `z / (y + L/ρ)` with `z ~ Exp(1)`, `y ~ Gamma(L−1, 1)`
//! independent and `ρ = β P_T / σ²` (`snr_eff` below). Its CDF is
//! `F(γ) = 1 − e^{−Lγ/ρ} / (1+γ)^{L−1}` and the best of `K` users has CDF `F^K`.
//!
//! Rates are in bits (base-2 logs). The multiuser-diversity term of the
//! asymptotic rate, `log2(β · log K)`, uses a natural inner log by default;
//! [`InnerLog::Base2`] switches it for sensitivity runs.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::quadrature::{integrate_half_line, QuadOptions, QuadResult};
use crate::sysconfig::PowerModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerLog {
    #[default]
    Natural,
    Base2,
}

impl InnerLog {
    pub fn of(self, k: f64) -> f64 {
        match self {
            InnerLog::Natural => k.ln(),
            InnerLog::Base2 => k.log2(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats {
    pub l_beams: usize,
    /// `β P_T / σ²`
    pub snr_eff: f64,
    pub k_users: usize,
}

impl LinkStats {
    pub fn new(l_beams: usize, snr_eff: f64, k_users: usize) -> Result<Self> {
        if l_beams == 0 || k_users == 0 || !(snr_eff > 0.0 && snr_eff.is_finite()) {
            return Err(Error::Domain(format!(
                "need L >= 1, K >= 1 and a positive finite snr_eff, got L = {l_beams}, K = {k_users}, snr_eff = {snr_eff}"
            )));
        }
        Ok(LinkStats { l_beams, snr_eff, k_users })
    }

    /// `−ln(1 − F(γ)) = Lγ/ρ + (L−1) ln(1+γ)`
    fn tail_exponent(&self, gamma: f64) -> f64 {
        let l = self.l_beams as f64;
        l * gamma / self.snr_eff + (l - 1.0) * gamma.ln_1p()
    }
}

/// `F(γ)`, the CDF of one user's SINR on one beam.
pub fn sinr_cdf(gamma: f64, stats: &LinkStats) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    -(-stats.tail_exponent(gamma)).exp_m1()
}

/// Density of the largest of `K` i.i.d. SINRs, `d/dγ F(γ)^K`.
pub fn selected_sinr_pdf(gamma: f64, stats: &LinkStats) -> f64 {
    if gamma < 0.0 {
        return 0.0;
    }
    let l = stats.l_beams as f64;
    let k = stats.k_users as f64;
    let decay = (-(l * gamma / stats.snr_eff) - l * gamma.ln_1p()).exp();
    let bracket = l / stats.snr_eff * (1.0 + gamma) + l - 1.0;
    let order = if stats.k_users == 1 { 1.0 } else { sinr_cdf(gamma, stats).powf(k - 1.0) };
    k * decay * bracket * order
}

/// `L ∫₀^∞ log2(1+γ) f(γ) dγ` together with the quadrature diagnostics.
pub fn darb_sum_rate_quadrature(stats: &LinkStats, opts: &QuadOptions) -> Result<QuadResult> {
    let l = stats.l_beams as f64;
    let r = integrate_half_line(
        |g| {
            let pdf = selected_sinr_pdf(g, stats);
            if pdf == 0.0 {
                0.0
            } else {
                g.ln_1p() / LN_2 * pdf
            }
        },
        opts,
    )?;
    Ok(QuadResult { value: l * r.value, error: l * r.error, intervals: r.intervals })
}

/// Finite-`K` sum rate of max-SINR random beamforming, bits/s/Hz.
pub fn darb_sum_rate_integral(stats: &LinkStats) -> Result<f64> {
    Ok(darb_sum_rate_quadrature(stats, &QuadOptions::default())?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRate {
    pub bits_per_hz: f64,
    /// Set when the formula gives a negative rate, i.e. outside its range of validity.
    pub negative: bool,
}

/// Large-`K` sum rate `L log2(β log K) + L log2(P_T / (L σ²))`.
///
/// `P_T / σ²` is recovered as `snr_eff / beta`.
pub fn darb_sum_rate_asymptotic(stats: &LinkStats, beta: f64, inner_log: InnerLog) -> Result<AsymptoticRate> {
    if stats.k_users <= 1 {
        return Err(Error::Domain("the asymptotic rate needs K > 1".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let l = stats.l_beams as f64;
    let rate = l * (beta * inner_log.of(stats.k_users as f64)).log2() + l * (stats.snr_eff / beta / l).log2();
    if rate < 0.0 {
        log::warn!("asymptotic rate is negative ({rate:.4}) for K = {}, L = {}", stats.k_users, stats.l_beams);
    }
    Ok(AsymptoticRate { bits_per_hz: rate, negative: rate < 0.0 })
}

/// Threshold-feedback rate `[1 − F(α)^K] · R`.
pub fn tfs_sum_rate(stats: &LinkStats, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {alpha}")));
    }
    let outage = sinr_cdf(alpha, stats).powi(stats.k_users as i32);
    Ok((1.0 - outage) * darb_sum_rate_integral(stats)?)
}

/// Constants of the asymptotic energy-efficiency objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbEeModel {
    pub power: PowerModel,
    pub k_users: usize,
    /// Scalar path-loss gain.
    pub beta: f64,
    pub sigma2: f64,
    pub inner_log: InnerLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbEe {
    /// Asymptotic sum rate, bits/s/Hz, clamped at zero.
    pub rate: f64,
    /// Total RIS-system power, watts.
    pub power: f64,
    /// `rate / power`, bits/s/Hz per watt.
    pub ee: f64,
    pub clamped: bool,
}

impl DarbEeModel {
    /// `log2(β log K)`, the per-beam multiuser-diversity term.
    pub fn diversity_term(&self) -> f64 {
        (self.beta * self.inner_log.of(self.k_users as f64)).log2()
    }

    /// `P_FPGA + P_A + P_SR + K P_UK`
    pub fn static_power(&self) -> f64 {
        let pm = &self.power;
        pm.p_fpga + pm.p_a + pm.p_sr + self.k_users as f64 * pm.p_uk
    }

    /// Unclamped asymptotic rate with a real-valued number of rows.
    pub fn raw_rate(&self, l: f64, p_t: f64) -> f64 {
        l * (self.diversity_term() + (p_t / (l * self.sigma2)).log2())
    }

    pub fn total_power(&self, l: f64, p_t: f64) -> f64 {
        let pm = &self.power;
        p_t / pm.eta_t + l * l * pm.p_pin + l * pm.p_u + self.static_power()
    }

    /// Objective with a real-valued number of rows.
    pub fn evaluate(&self, l: f64, p_t: f64) -> DarbEe {
        let raw = self.raw_rate(l, p_t);
        let power = self.total_power(l, p_t);
        let clamped = !(raw > 0.0);
        let rate = if clamped { 0.0 } else { raw };
        DarbEe { rate, power, ee: rate / power, clamped }
    }
}

/// Asymptotic-rate energy efficiency of an `l_beams`-row surface at `p_t` watts.
pub fn ee_darb(l_beams: usize, p_t: f64, model: &DarbEeModel) -> DarbEe {
    let out = model.evaluate(l_beams as f64, p_t);
    if out.clamped {
        log::debug!("asymptotic rate clamped at zero for L = {l_beams}, P_T = {p_t} W");
    }
    out
}
