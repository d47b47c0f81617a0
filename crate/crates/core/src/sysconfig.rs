//! Scalar parameters and the power / energy-efficiency arithmetic.
//!
//! Everything is stored in linear units (watts, hertz). Decibel values only
//! exist at the boundary: [`ConfigFile`] carries `_dbm` / `_dbw` fields and
//! converts them once when it is applied.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::InnerLog;
use crate::channel::{Geometry, Placement};
use crate::{Error, Result};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn watts_to_dbw(watts: f64) -> f64 {
    10.0 * watts.log10()
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    watts_to_dbw(watts) + 30.0
}

/// Hardware power constants, all in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerModel {
    /// FPGA board driving the surface.
    pub p_fpga: f64,
    /// PIN diode, per surface element.
    pub p_pin: f64,
    /// Circuit power of one active antenna chain.
    pub p_a: f64,
    /// Circuit power of one receive chain.
    pub p_u: f64,
    /// Static power of the RIS transmitter.
    pub p_sr: f64,
    /// Static power of the multi-antenna transmitter.
    pub p_sa: f64,
    /// Static power of one user terminal.
    pub p_uk: f64,
    /// Power amplifier efficiency, in (0, 1].
    pub eta_t: f64,
}

impl PowerModel {
    /// The hardware constants used throughout the reference experiments.
    pub fn table_one() -> Self {
        PowerModel {
            p_fpga: dbm_to_watts(27.0),
            p_pin: dbm_to_watts(7.0),
            p_a: dbm_to_watts(20.0),
            p_u: dbm_to_watts(20.0),
            p_sr: dbm_to_watts(30.0),
            p_sa: dbm_to_watts(33.0),
            p_uk: dbm_to_watts(10.0),
            eta_t: 0.8,
        }
    }

    /// All powers zero, unit efficiency.
    pub fn zero() -> Self {
        PowerModel {
            p_fpga: 0.0,
            p_pin: 0.0,
            p_a: 0.0,
            p_u: 0.0,
            p_sr: 0.0,
            p_sa: 0.0,
            p_uk: 0.0,
            eta_t: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let powers = [
            ("p_fpga", self.p_fpga),
            ("p_pin", self.p_pin),
            ("p_a", self.p_a),
            ("p_u", self.p_u),
            ("p_sr", self.p_sr),
            ("p_sa", self.p_sa),
            ("p_uk", self.p_uk),
        ];
        for (name, value) in powers {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("{name} must be a finite nonnegative power, got {value}")));
            }
        }
        if !(self.eta_t > 0.0 && self.eta_t <= 1.0) {
            return Err(Error::Config(format!("eta_t must lie in (0, 1], got {}", self.eta_t)));
        }
        Ok(())
    }
}

impl Default for PowerModel {
    fn default() -> Self {
        Self::table_one()
    }
}

/// System-level parameters. Powers in watts, bandwidth in hertz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemConfig {
    pub k_users: usize,
    /// Number of surface rows; the surface has `l_beams²` elements and forms
    /// `l_beams` beams.
    pub l_beams: usize,
    pub p_t: f64,
    pub sigma2: f64,
    pub bandwidth: f64,
    pub area_side: f64,
    pub q_bits: u32,
    /// Feedback threshold on a user's best SINR.
    pub alpha: f64,
    /// Stop threshold on the EE increment of the alternating optimizer.
    pub epsilon: f64,
    pub l_max: usize,
    pub p_max: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            k_users: 100,
            l_beams: 18,
            p_t: dbw_to_watts(1.14),
            sigma2: dbm_to_watts(-80.0),
            bandwidth: 180e3,
            area_side: 60.0,
            q_bits: 4,
            alpha: 0.1,
            epsilon: 0.05,
            l_max: 20,
            p_max: dbw_to_watts(13.0),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_users == 0 {
            return Err(Error::Config("k_users must be at least 1".into()));
        }
        if self.l_max == 0 || self.l_beams == 0 || self.l_beams > self.l_max {
            return Err(Error::Config(format!(
                "need 1 <= l_beams <= l_max, got l_beams = {}, l_max = {}",
                self.l_beams, self.l_max
            )));
        }
        if !(self.p_t > 0.0 && self.p_t <= self.p_max) {
            return Err(Error::Config(format!(
                "need 0 < p_t <= p_max, got p_t = {} W, p_max = {} W",
                self.p_t, self.p_max
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.area_side > 0.0) {
            return Err(Error::Config(format!("area_side must be positive, got {}", self.area_side)));
        }
        if self.q_bits == 0 {
            return Err(Error::Config("q_bits must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Equal power split across beams.
    pub fn per_beam_power(&self) -> f64 {
        self.p_t / self.l_beams as f64
    }

    pub fn n_elements(&self) -> usize {
        self.l_beams * self.l_beams
    }
}

/// Power drawn by the surface itself: FPGA plus one PIN diode per element.
pub fn ris_power(pm: &PowerModel, n_elements: usize) -> f64 {
    pm.p_fpga + n_elements as f64 * pm.p_pin
}

/// Circuit power of the RIS system: one transmit chain plus `l_beams` receive chains.
pub fn circuit_power_ris(pm: &PowerModel, l_beams: usize) -> f64 {
    pm.p_a + l_beams as f64 * pm.p_u
}

pub fn total_power_ris(pm: &PowerModel, cfg: &SystemConfig) -> f64 {
    cfg.p_t / pm.eta_t
        + ris_power(pm, cfg.n_elements())
        + circuit_power_ris(pm, cfg.l_beams)
        + pm.p_sr
        + cfg.k_users as f64 * pm.p_uk
}

/// Total power of an `m_antennas` transmitter with one chain per antenna.
pub fn total_power_ma(pm: &PowerModel, cfg: &SystemConfig, m_antennas: usize) -> f64 {
    let m = m_antennas as f64;
    cfg.p_t / pm.eta_t + m * (pm.p_a + pm.p_u) + pm.p_sa + cfg.k_users as f64 * pm.p_uk
}

pub fn energy_efficiency(rate_bits_per_s: f64, power: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    Ok(rate_bits_per_s / power)
}

/// Unit in which energy efficiency is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EeUnits {
    /// bits per joule, rate = bandwidth × spectral rate.
    #[default]
    BitsPerJoule,
    /// bits/s/Hz per watt.
    Spectral,
}

impl EeUnits {
    /// Factor that turns a spectral rate (bits/s/Hz) into the reported rate.
    pub fn rate_scale(self, bandwidth: f64) -> f64 {
        match self {
            EeUnits::BitsPerJoule => bandwidth,
            EeUnits::Spectral => 1.0,
        }
    }

    pub fn column_suffix(self) -> &'static str {
        match self {
            EeUnits::BitsPerJoule => "bits_per_j",
            EeUnits::Spectral => "bps_hz_per_w",
        }
    }
}

/// Everything an experiment needs besides its sweep lists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub system: SystemConfig,
    pub power: PowerModel,
    pub geometry: Geometry,
    pub inner_log: InnerLog,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            system: SystemConfig::default(),
            power: PowerModel::table_one(),
            geometry: Geometry::default(),
            inner_log: InnerLog::Natural,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.power.validate()?;
        self.geometry.validate()
    }
}

/// On-disk configuration: a flat JSON object. Every key is optional and
/// overrides the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub p_fpga_dbm: Option<f64>,
    pub p_pin_dbm: Option<f64>,
    pub p_a_dbm: Option<f64>,
    pub p_u_dbm: Option<f64>,
    pub p_sr_dbm: Option<f64>,
    pub p_sa_dbm: Option<f64>,
    pub p_uk_dbm: Option<f64>,
    pub eta_t: Option<f64>,

    pub k_users: Option<usize>,
    pub l_beams: Option<usize>,
    pub p_t_dbw: Option<f64>,
    pub sigma2_dbm: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub area_side_m: Option<f64>,
    pub q_bits: Option<u32>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub l_max: Option<usize>,
    pub p_max_dbw: Option<f64>,

    pub placement: Option<Placement>,
    pub d_min_m: Option<f64>,
    pub d_ref_m: Option<f64>,
    pub inner_log: Option<InnerLog>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Overlays the keys present in this file onto `scenario`.
    pub fn apply(&self, scenario: &mut Scenario) {
        fn set<T: Copy>(dst: &mut T, src: Option<T>) {
            if let Some(v) = src {
                *dst = v;
            }
        }
        fn set_db(dst: &mut f64, src: Option<f64>, conv: fn(f64) -> f64) {
            if let Some(v) = src {
                *dst = conv(v);
            }
        }

        let pm = &mut scenario.power;
        set_db(&mut pm.p_fpga, self.p_fpga_dbm, dbm_to_watts);
        set_db(&mut pm.p_pin, self.p_pin_dbm, dbm_to_watts);
        set_db(&mut pm.p_a, self.p_a_dbm, dbm_to_watts);
        set_db(&mut pm.p_u, self.p_u_dbm, dbm_to_watts);
        set_db(&mut pm.p_sr, self.p_sr_dbm, dbm_to_watts);
        set_db(&mut pm.p_sa, self.p_sa_dbm, dbm_to_watts);
        set_db(&mut pm.p_uk, self.p_uk_dbm, dbm_to_watts);
        set(&mut pm.eta_t, self.eta_t);

        let sys = &mut scenario.system;
        set(&mut sys.k_users, self.k_users);
        set(&mut sys.l_beams, self.l_beams);
        set_db(&mut sys.p_t, self.p_t_dbw, dbw_to_watts);
        set_db(&mut sys.sigma2, self.sigma2_dbm, dbm_to_watts);
        set(&mut sys.bandwidth, self.bandwidth_hz);
        set(&mut sys.area_side, self.area_side_m);
        set(&mut sys.q_bits, self.q_bits);
        set(&mut sys.alpha, self.alpha);
        set(&mut sys.epsilon, self.epsilon);
        set(&mut sys.l_max, self.l_max);
        set_db(&mut sys.p_max, self.p_max_dbw, dbw_to_watts);

        let geo = &mut scenario.geometry;
        set(&mut geo.placement, self.placement);
        set(&mut geo.d_min, self.d_min_m);
        set(&mut geo.d_ref, self.d_ref_m);
        set(&mut scenario.inner_log, self.inner_log);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_cfg(l: usize, k: usize, p_t: f64) -> SystemConfig {
        SystemConfig {
            k_users: k,
            l_beams: l,
            p_t,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn dbm_conversion() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(0.0) - 0.001).abs() < 1e-15);
        assert!((dbm_to_watts(27.0) - 0.50119).abs() < 1e-5);
        for x in [-80.0, -3.0, 0.0, 1.14, 13.0] {
            let direct = 10f64.powf(x / 10.0);
            assert!((dbm_to_watts(x + 30.0) - direct).abs() <= 1e-12 * direct);
            assert!((dbw_to_watts(x) - direct).abs() <= 1e-12 * direct);
            assert!((watts_to_dbw(dbw_to_watts(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn ris_power_examples() {
        let pm = PowerModel::table_one();
        assert!((ris_power(&pm, 0) - 0.50119).abs() < 1e-5);
        assert!((ris_power(&pm, 324) - 2.1250).abs() < 1e-3);
        assert_eq!(ris_power(&PowerModel::zero(), 1000), 0.0);
    }

    #[test]
    fn circuit_power_examples() {
        let pm = PowerModel::table_one();
        assert!((circuit_power_ris(&pm, 18) - 1.9).abs() < 1e-12);
        assert!((circuit_power_ris(&pm, 1) - 0.2).abs() < 1e-12);
        assert_eq!(circuit_power_ris(&PowerModel::zero(), 7), 0.0);
    }

    #[test]
    fn total_power_examples() {
        let pm = PowerModel {
            eta_t: 0.5,
            ..PowerModel::zero()
        };
        let cfg = table_cfg(3, 10, 1.0);
        assert_eq!(total_power_ris(&pm, &cfg), 2.0);

        let pm = PowerModel::table_one();
        let cfg = table_cfg(18, 100, 1.3);
        assert!((total_power_ris(&pm, &cfg) - 7.65).abs() < 0.01);
        assert!((total_power_ma(&pm, &cfg, 18) - 8.22).abs() < 0.01);

        let tiny = table_cfg(1, 1, 1e-300);
        assert!(total_power_ma(&PowerModel { eta_t: 1.0, ..PowerModel::zero() }, &tiny, 4) < 1e-299);
    }

    #[test]
    fn total_power_strictly_increasing() {
        let pm = PowerModel::table_one();
        let base = table_cfg(8, 50, 1.0);
        let p0 = total_power_ris(&pm, &base);
        assert!(total_power_ris(&pm, &table_cfg(9, 50, 1.0)) > p0);
        assert!(total_power_ris(&pm, &table_cfg(8, 51, 1.0)) > p0);
        assert!(total_power_ris(&pm, &table_cfg(8, 50, 1.01)) > p0);
    }

    #[test]
    fn ma_minus_ris_independent_of_power_and_users() {
        let pm = PowerModel::table_one();
        for l in 1..=20 {
            let oracle = l as f64 * (pm.p_a + pm.p_u) + pm.p_sa
                > pm.p_fpga + (l * l) as f64 * pm.p_pin + pm.p_a + l as f64 * pm.p_u + pm.p_sr;
            let reference = {
                let c = table_cfg(l, 1, 0.5);
                total_power_ma(&pm, &c, l) - total_power_ris(&pm, &c)
            };
            for (k, p) in [(1, 0.01), (100, 1.3), (500, 19.0)] {
                let c = table_cfg(l, k, p);
                let diff = total_power_ma(&pm, &c, l) - total_power_ris(&pm, &c);
                assert!((diff - reference).abs() < 1e-9);
                assert_eq!(diff > 0.0, oracle, "L = {l}");
            }
        }
    }

    #[test]
    fn energy_efficiency_examples() {
        assert_eq!(energy_efficiency(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(energy_efficiency(100.0, 4.0).unwrap(), 25.0);
        assert!(matches!(energy_efficiency(1.0, 0.0), Err(Error::Domain(_))));
        assert!(energy_efficiency(1.0, -1.0).is_err());
        // rate = B × spectral rate
        let spectral = 3.5;
        let a = energy_efficiency(EeUnits::BitsPerJoule.rate_scale(180e3) * spectral, 7.0).unwrap();
        let b = energy_efficiency(EeUnits::BitsPerJoule.rate_scale(360e3) * spectral, 7.0).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        assert_eq!(EeUnits::Spectral.rate_scale(180e3), 1.0);
    }

    #[test]
    fn validation() {
        assert!(SystemConfig::default().validate().is_ok());
        assert!(PowerModel::table_one().validate().is_ok());
        let bad = SystemConfig { p_t: 0.0, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SystemConfig { l_beams: 21, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = PowerModel { eta_t: 1.5, ..PowerModel::table_one() };
        assert!(bad.validate().is_err());
        let bad = PowerModel { p_pin: -1.0, ..PowerModel::table_one() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_file_overlays_defaults() {
        let file = ConfigFile::from_json(
            r#"{"p_pin_dbm": 10, "k_users": 20, "p_t_dbw": 0, "placement": "center", "inner_log": "base2"}"#,
        )
        .unwrap();
        let mut sc = Scenario::default();
        file.apply(&mut sc);
        assert!((sc.power.p_pin - 0.01).abs() < 1e-15);
        assert_eq!(sc.system.k_users, 20);
        assert_eq!(sc.system.p_t, 1.0);
        assert_eq!(sc.geometry.placement, Placement::Center);
        assert_eq!(sc.inner_log, InnerLog::Base2);
        // untouched keys keep their defaults
        assert_eq!(sc.power.p_fpga, PowerModel::table_one().p_fpga);
        assert!(ConfigFile::from_json(r#"{"no_such_key": 1}"#).is_err());
    }
}
