//! Experiment recipes behind the `darb` binary.
//!
//! Every recipe is a pure function of its [`ExperimentSpec`]: user layouts
//! come from `seed.child(LAYOUT_STREAM)` and trials from
//! `seed.child(TRIAL_STREAM)`, so the same spec always produces the same
//! bytes. Layouts are drawn once for the largest `K` and prefixes are used for
//! smaller `K`, which keeps the sweep points on common random numbers.
//!
//! CSV output starts with one `#` provenance line (experiment, seed, a hash
//! of the resolved spec, crate version) followed by a header row. Column
//! layout is gnuplot-friendly: one row per sweep point, `.` decimals, LF.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytic::{darb_sum_rate_asymptotic, sinr_cdf, DarbEeModel, LinkStats};
use crate::beamsim::{
    feedback_overhead, monte_carlo_modes, monte_carlo_sum_rate, write_trace, BeamMethod, RateEstimate,
    SchedulingMode, TrialSpec,
};
use crate::channel::{place_users, path_loss, Seed, UserLayout};
use crate::optimizer::{
    alternating_optimize, grid_oracle, CVariant, EeProblem, GridOptimum, Interrupted, OptimizationResult,
    OptimizerConfig,
};
use crate::sysconfig::{total_power_ma, total_power_ris, watts_to_dbw, EeUnits, Scenario, SystemConfig};
use crate::{Error, Result};

pub const LAYOUT_STREAM: u64 = 1;
pub const TRIAL_STREAM: u64 = 2;

/// Powers that count as a match for the reference optimum, dBW.
pub const REFERENCE_P_T_DBW: (f64, f64) = (0.14, 2.14);
pub const REFERENCE_L: (usize, usize) = (16, 20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// EE versus K, RIS against multi-antenna, several L = M.
    Fig2,
    /// EE versus K for fixed Darb, optimized Darb and multi-antenna.
    Fig3,
    /// Rate and feedback with and without the threshold strategy.
    Fig4,
    /// One alternating-optimization run with its trace.
    Optimize,
    /// Optimizer optimum across reference distances and c variants.
    Sweep,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Experiment::Fig2),
            "fig3" => Ok(Experiment::Fig3),
            "fig4" => Ok(Experiment::Fig4),
            "optimize" => Ok(Experiment::Optimize),
            "sweep" => Ok(Experiment::Sweep),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Optimize => "optimize",
            Experiment::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub scenario: Scenario,
    pub k_list: Vec<usize>,
    pub l_list: Vec<usize>,
    pub d_ref_list: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub method: BeamMethod,
    pub units: EeUnits,
    pub c_variant: CVariant,
    /// Scheduler used for the EE curves of fig2/fig3.
    pub mode: SchedulingMode,
    /// When set, fig4 gives every user unit path loss and this `P_T/σ²`.
    pub iid_snr: Option<f64>,
    /// Run the exhaustive grid oracle after `optimize`.
    pub oracle: bool,
}

impl ExperimentSpec {
    /// Default sweep lists and trial counts for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        let decade: Vec<usize> = (1..=10).map(|i| 10 * i).collect();
        let (k_list, l_list) = match experiment {
            Experiment::Fig2 => (decade, vec![8, 18]),
            Experiment::Fig3 => (decade, vec![]),
            Experiment::Fig4 => {
                let mut k = vec![2, 5];
                k.extend(decade);
                (k, vec![4])
            }
            Experiment::Optimize | Experiment::Sweep => (vec![], vec![]),
        };
        ExperimentSpec {
            experiment,
            scenario: Scenario::default(),
            k_list,
            l_list,
            d_ref_list: vec![15.0, 30.0, 42.4],
            trials: 2000,
            seed: 1,
            method: BeamMethod::PhaseDft,
            units: EeUnits::BitsPerJoule,
            c_variant: CVariant::Corrected,
            mode: SchedulingMode::Full,
            iid_snr: Some(10.0),
            oracle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let needs_k = matches!(self.experiment, Experiment::Fig2 | Experiment::Fig3 | Experiment::Fig4);
        if needs_k && self.k_list.is_empty() {
            return Err(Error::Config(format!("{} needs a nonempty K list", self.experiment)));
        }
        if self.k_list.contains(&0) {
            return Err(Error::Config("K values must be positive".into()));
        }
        let needs_l = matches!(self.experiment, Experiment::Fig2 | Experiment::Fig4);
        if needs_l && self.l_list.is_empty() {
            return Err(Error::Config(format!("{} needs a nonempty L list", self.experiment)));
        }
        if self.l_list.iter().any(|&l| l == 0 || l > self.scenario.system.l_max) {
            return Err(Error::Config("L values must lie in [1, l_max]".into()));
        }
        if self.experiment == Experiment::Sweep && self.d_ref_list.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("reference distances must be positive".into()));
        }
        if self.experiment == Experiment::Sweep && self.d_ref_list.is_empty() {
            return Err(Error::Config("sweep needs a nonempty d_ref list".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if let Some(snr) = self.iid_snr {
            if !(snr > 0.0) {
                return Err(Error::Config(format!("iid snr must be positive, got {snr}")));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the resolved spec.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> String {
        format!(
            "# darb {} seed={} config={} version={}",
            self.experiment,
            self.seed,
            self.config_hash(),
            env!("CARGO_PKG_VERSION")
        )
    }

    fn layout(&self, k_max: usize) -> UserLayout {
        let sys = &self.scenario.system;
        place_users(Seed::new(self.seed).child(LAYOUT_STREAM), k_max, sys.area_side, &self.scenario.geometry)
    }

    fn trial_seed(&self) -> Seed {
        Seed::new(self.seed).child(TRIAL_STREAM)
    }

    fn rate_scale(&self) -> f64 {
        self.units.rate_scale(self.scenario.system.bandwidth)
    }

    fn system_with(&self, k_users: usize, l_beams: usize, p_t: f64) -> SystemConfig {
        SystemConfig { k_users, l_beams, p_t, ..self.scenario.system }
    }

    /// Asymptotic-rate EE model at `k_users` with the reference path loss.
    pub fn ee_model(&self, k_users: usize) -> DarbEeModel {
        DarbEeModel {
            power: self.scenario.power,
            k_users,
            beta: self.scenario.geometry.reference_beta(),
            sigma2: self.scenario.system.sigma2,
            inner_log: self.scenario.inner_log,
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let sys = &self.scenario.system;
        OptimizerConfig::new(sys.l_max, sys.p_max, sys.epsilon)
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn write_csv<W: Write>(out: W, provenance: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = out;
    writeln!(out, "{provenance}").map_err(|e| Error::io("<output>", e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Ris,
    Ma,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Ris => "ris",
            SystemKind::Ma => "ma",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig2Row {
    pub k_users: usize,
    pub system: SystemKind,
    pub l_or_m: usize,
    pub rate: RateEstimate,
    pub power_w: f64,
    pub ee_mean: f64,
    pub ee_stderr: f64,
}

/// EE versus `K` for the RIS transmitter and a multi-antenna transmitter
/// with `M = L`. Both systems share one Monte Carlo rate per point: random
/// beamforming over `M` antennas has the same rate statistics as over `L`
/// surface rows.
pub fn run_fig2(spec: &ExperimentSpec) -> Result<Vec<Fig2Row>> {
    spec.validate()?;
    let sys = &spec.scenario.system;
    let pm = &spec.scenario.power;
    let layout = spec.layout(*spec.k_list.iter().max().expect("validated"));
    let points: Vec<(usize, usize)> =
        spec.l_list.iter().flat_map(|&l| spec.k_list.iter().map(move |&k| (l, k))).collect();
    let scale = spec.rate_scale();
    let per_point = points
        .par_iter()
        .map(|&(l, k)| {
            let trial = TrialSpec {
                betas: layout.prefix(k).betas,
                l_beams: l,
                p_t: sys.p_t,
                sigma2: sys.sigma2,
                q_bits: sys.q_bits,
                method: spec.method,
            };
            let rate = monte_carlo_sum_rate(&trial, spec.trial_seed(), spec.trials, spec.mode)?;
            let cfg = spec.system_with(k, l, sys.p_t);
            let rows = [(SystemKind::Ris, total_power_ris(pm, &cfg)), (SystemKind::Ma, total_power_ma(pm, &cfg, l))]
                .map(|(system, power_w)| Fig2Row {
                    k_users: k,
                    system,
                    l_or_m: l,
                    rate,
                    power_w,
                    ee_mean: scale * rate.mean / power_w,
                    ee_stderr: scale * rate.std_error / power_w,
                });
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn write_fig2<W: Write>(spec: &ExperimentSpec, rows: &[Fig2Row], out: W) -> Result<()> {
    let u = spec.units.column_suffix();
    let header = vec![
        "k_users".into(),
        "system".into(),
        "l_or_m".into(),
        "rate_mean_bps_hz".into(),
        "rate_stderr_bps_hz".into(),
        "power_w".into(),
        format!("ee_mean_{u}"),
        format!("ee_stderr_{u}"),
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k_users.to_string(),
                r.system.to_string(),
                r.l_or_m.to_string(),
                fmt_f(r.rate.mean),
                fmt_f(r.rate.std_error),
                fmt_f(r.power_w),
                fmt_f(r.ee_mean),
                fmt_f(r.ee_stderr),
            ]
        })
        .collect();
    write_csv(out, &spec.provenance(), &header, &body)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fig3Scheme {
    /// Fixed `(L, P_T)` from the config.
    Darb,
    /// Optimizer-chosen `(L*, P_T*)`.
    Jeta,
    /// Multi-antenna baseline, `M = L` and `P_T` from the config.
    Ma,
}

impl fmt::Display for Fig3Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fig3Scheme::Darb => "darb",
            Fig3Scheme::Jeta => "jeta",
            Fig3Scheme::Ma => "ma",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Row {
    pub k_users: usize,
    pub scheme: Fig3Scheme,
    pub l: usize,
    pub p_t: f64,
    pub ee_mc: f64,
    pub ee_mc_stderr: f64,
    /// EE with the large-`K` rate, the quantity the optimizer maximizes.
    pub ee_asymptotic: f64,
    /// Optimizer trace, for the `jeta` rows only.
    pub trace: Option<OptimizationResult>,
}

pub fn run_fig3(spec: &ExperimentSpec) -> Result<Vec<Fig3Row>> {
    spec.validate()?;
    let sys = spec.scenario.system;
    let pm = spec.scenario.power;
    let layout = spec.layout(*spec.k_list.iter().max().expect("validated"));
    let scale = spec.rate_scale();
    let per_k = spec
        .k_list
        .par_iter()
        .map(|&k| -> Result<Vec<Fig3Row>> {
            let model = spec.ee_model(k);
            let problem = EeProblem { c_variant: spec.c_variant, ..EeProblem::new(model) };
            let opt = alternating_optimize(&problem, &spec.optimizer_config()).map_err(|e| e.error)?;

            let mc = |l: usize, p_t: f64| -> Result<RateEstimate> {
                let trial = TrialSpec {
                    betas: layout.prefix(k).betas,
                    l_beams: l,
                    p_t,
                    sigma2: sys.sigma2,
                    q_bits: sys.q_bits,
                    method: spec.method,
                };
                monte_carlo_sum_rate(&trial, spec.trial_seed(), spec.trials, spec.mode)
            };
            let asymptotic_rate = |l: usize, p_t: f64| model.evaluate(l as f64, p_t).rate;

            let (l_fix, p_fix) = (sys.l_beams, sys.p_t);
            let fixed_rate = mc(l_fix, p_fix)?;
            let cfg = spec.system_with(k, l_fix, p_fix);
            let p_ris = total_power_ris(&pm, &cfg);
            let p_ma = total_power_ma(&pm, &cfg, l_fix);

            let jeta_rate = mc(opt.l, opt.p_t)?;
            let p_jeta = total_power_ris(&pm, &spec.system_with(k, opt.l, opt.p_t));

            Ok(vec![
                Fig3Row {
                    k_users: k,
                    scheme: Fig3Scheme::Darb,
                    l: l_fix,
                    p_t: p_fix,
                    ee_mc: scale * fixed_rate.mean / p_ris,
                    ee_mc_stderr: scale * fixed_rate.std_error / p_ris,
                    ee_asymptotic: scale * asymptotic_rate(l_fix, p_fix) / p_ris,
                    trace: None,
                },
                Fig3Row {
                    k_users: k,
                    scheme: Fig3Scheme::Jeta,
                    l: opt.l,
                    p_t: opt.p_t,
                    ee_mc: scale * jeta_rate.mean / p_jeta,
                    ee_mc_stderr: scale * jeta_rate.std_error / p_jeta,
                    ee_asymptotic: scale * opt.ee,
                    trace: Some(opt),
                },
                Fig3Row {
                    k_users: k,
                    scheme: Fig3Scheme::Ma,
                    l: l_fix,
                    p_t: p_fix,
                    ee_mc: scale * fixed_rate.mean / p_ma,
                    ee_mc_stderr: scale * fixed_rate.std_error / p_ma,
                    ee_asymptotic: scale * asymptotic_rate(l_fix, p_fix) / p_ma,
                    trace: None,
                },
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_k.into_iter().flatten().collect())
}

pub fn write_fig3<W: Write>(spec: &ExperimentSpec, rows: &[Fig3Row], out: W) -> Result<()> {
    let u = spec.units.column_suffix();
    let header = vec![
        "k_users".into(),
        "scheme".into(),
        "l".into(),
        "p_t_w".into(),
        "p_t_dbw".into(),
        format!("ee_mc_{u}"),
        format!("ee_mc_stderr_{u}"),
        format!("ee_asymptotic_{u}"),
        "iterations".into(),
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k_users.to_string(),
                r.scheme.to_string(),
                r.l.to_string(),
                fmt_f(r.p_t),
                fmt_f(watts_to_dbw(r.p_t)),
                fmt_f(r.ee_mc),
                fmt_f(r.ee_mc_stderr),
                fmt_f(r.ee_asymptotic),
                r.trace.as_ref().map_or(String::new(), |t| t.iterations.to_string()),
            ]
        })
        .collect();
    write_csv(out, &spec.provenance(), &header, &body)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig4Row {
    pub l_beams: usize,
    pub k_users: usize,
    pub rate_no_tfs: RateEstimate,
    pub rate_tfs: RateEstimate,
    pub fo_no_tfs_bits: f64,
    pub fo_tfs_bits: f64,
    pub fo_tfs_stderr_bits: f64,
    /// `(1 − F(α)) · FO` with `F` the single-beam SINR CDF.
    pub fo_tfs_model_bits: f64,
}

/// Rate and feedback overhead with and without threshold feedback, both
/// modes evaluated on the same draws.
pub fn run_fig4(spec: &ExperimentSpec) -> Result<Vec<Fig4Row>> {
    spec.validate()?;
    let sys = spec.scenario.system;
    let alpha = sys.alpha;
    let k_max = *spec.k_list.iter().max().expect("validated");
    let (betas, sigma2, snr_model) = match spec.iid_snr {
        Some(snr) => (vec![1.0; k_max], sys.p_t / snr, snr),
        None => {
            let beta_ref = spec.scenario.geometry.reference_beta();
            (spec.layout(k_max).betas, sys.sigma2, beta_ref * sys.p_t / sys.sigma2)
        }
    };
    let points: Vec<(usize, usize)> =
        spec.l_list.iter().flat_map(|&l| spec.k_list.iter().map(move |&k| (l, k))).collect();
    points
        .par_iter()
        .map(|&(l, k)| {
            let trial = TrialSpec {
                betas: betas[..k].to_vec(),
                l_beams: l,
                p_t: sys.p_t,
                sigma2,
                q_bits: sys.q_bits,
                method: spec.method,
            };
            let modes = [SchedulingMode::Full, SchedulingMode::Tfs { alpha }];
            let summary = monte_carlo_modes(&trial, spec.trial_seed(), spec.trials, &modes)?;
            let f_alpha = sinr_cdf(alpha, &LinkStats::new(l, snr_model, k)?);
            let fo = feedback_overhead(k, l, sys.q_bits) as f64;
            Ok(Fig4Row {
                l_beams: l,
                k_users: k,
                rate_no_tfs: summary[0].rate,
                rate_tfs: summary[1].rate,
                fo_no_tfs_bits: summary[0].bits.mean,
                fo_tfs_bits: summary[1].bits.mean,
                fo_tfs_stderr_bits: summary[1].bits.std_error(),
                fo_tfs_model_bits: (1.0 - f_alpha) * fo,
            })
        })
        .collect()
}

pub fn write_fig4<W: Write>(spec: &ExperimentSpec, rows: &[Fig4Row], out: W) -> Result<()> {
    let header: Vec<String> = [
        "l_beams",
        "k_users",
        "rate_no_tfs_bps_hz",
        "rate_no_tfs_stderr_bps_hz",
        "rate_tfs_bps_hz",
        "rate_tfs_stderr_bps_hz",
        "fo_no_tfs_bits",
        "fo_tfs_bits",
        "fo_tfs_stderr_bits",
        "fo_tfs_model_bits",
    ]
    .map(String::from)
    .to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.l_beams.to_string(),
                r.k_users.to_string(),
                fmt_f(r.rate_no_tfs.mean),
                fmt_f(r.rate_no_tfs.std_error),
                fmt_f(r.rate_tfs.mean),
                fmt_f(r.rate_tfs.std_error),
                fmt_f(r.fo_no_tfs_bits),
                fmt_f(r.fo_tfs_bits),
                fmt_f(r.fo_tfs_stderr_bits),
                fmt_f(r.fo_tfs_model_bits),
            ]
        })
        .collect();
    write_csv(out, &spec.provenance(), &header, &body)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub result: OptimizationResult,
    /// Objective scale used for the reported EE values.
    pub scale: f64,
    pub oracle: Option<GridOptimum>,
    /// Monte Carlo EE at the returned optimum, reporting units.
    pub mc_ee: f64,
    pub mc_ee_stderr: f64,
}

/// Runs the alternating optimizer at the configured `K`, then evaluates the
/// optimum by Monte Carlo. Infeasibility is returned with the partial trace.
pub fn run_optimize(spec: &ExperimentSpec) -> std::result::Result<OptimizeReport, Interrupted> {
    spec.validate().map_err(|error| Interrupted { error, trace: vec![] })?;
    let sys = spec.scenario.system;
    let problem = EeProblem { c_variant: spec.c_variant, ..EeProblem::new(spec.ee_model(sys.k_users)) };
    let cfg = spec.optimizer_config();
    let result = alternating_optimize(&problem, &cfg)?;
    let oracle = spec.oracle.then(|| grid_oracle(&problem, cfg.l_max, cfg.p_max, 1000, 8.0));
    let wrap = |error| Interrupted { error, trace: result.trace.clone() };
    let trial = optimum_trial(spec, &result);
    let rate = monte_carlo_sum_rate(&trial, spec.trial_seed(), spec.trials, spec.mode).map_err(wrap)?;
    let scale = spec.rate_scale();
    let power = total_power_ris(&spec.scenario.power, &spec.system_with(sys.k_users, result.l, result.p_t));
    Ok(OptimizeReport {
        mc_ee: scale * rate.mean / power,
        mc_ee_stderr: scale * rate.std_error / power,
        result,
        scale,
        oracle,
    })
}

fn optimum_trial(spec: &ExperimentSpec, result: &OptimizationResult) -> TrialSpec {
    let sys = spec.scenario.system;
    TrialSpec {
        betas: spec.layout(sys.k_users).betas,
        l_beams: result.l,
        p_t: result.p_t,
        sigma2: sys.sigma2,
        q_bits: sys.q_bits,
        method: spec.method,
    }
}

/// Trial-level CSV at the optimizer's `(L*, P_T*)`.
pub fn write_optimum_trace<W: Write>(spec: &ExperimentSpec, report: &OptimizeReport, out: W) -> Result<()> {
    let trial = optimum_trial(spec, &report.result);
    write_trace(&trial, spec.trial_seed(), spec.trials, spec.mode, out)
}

/// Writes the iteration trace with header `t,L,P_T_w,P_T_dbw,EE`.
pub fn write_optimize_trace<W: Write>(spec: &ExperimentSpec, report: &OptimizeReport, out: W) -> Result<()> {
    let header: Vec<String> = ["t", "L", "P_T_w", "P_T_dbw", "EE"].map(String::from).to_vec();
    let body: Vec<Vec<String>> = report
        .result
        .trace
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                r.l.to_string(),
                fmt_f(r.p_t),
                fmt_f(watts_to_dbw(r.p_t)),
                fmt_f(report.scale * r.ee),
            ]
        })
        .collect();
    write_csv(out, &spec.provenance(), &header, &body)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub d_ref: f64,
    pub c_variant: CVariant,
    pub beta: f64,
    pub outcome: std::result::Result<OptimizationResult, String>,
}

impl SweepRow {
    /// Whether the optimum falls in the reference window of `L` and `P_T`.
    pub fn matches_reference(&self) -> bool {
        match &self.outcome {
            Ok(r) => {
                let dbw = watts_to_dbw(r.p_t);
                (REFERENCE_L.0..=REFERENCE_L.1).contains(&r.l)
                    && dbw >= REFERENCE_P_T_DBW.0
                    && dbw <= REFERENCE_P_T_DBW.1
            }
            Err(_) => false,
        }
    }
}

/// Sensitivity of the optimizer optimum to the reference distance used for
/// the scalar path loss and to the power-subproblem constant.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let k = spec.scenario.system.k_users;
    let cfg = spec.optimizer_config();
    let mut rows = Vec::new();
    for &d_ref in &spec.d_ref_list {
        for c_variant in [CVariant::Corrected, CVariant::Paper] {
            let beta = path_loss(d_ref, spec.scenario.geometry.d_min);
            let model = DarbEeModel { beta, ..spec.ee_model(k) };
            let problem = EeProblem { c_variant, ..EeProblem::new(model) };
            let outcome = alternating_optimize(&problem, &cfg).map_err(|e| e.to_string());
            rows.push(SweepRow { d_ref, c_variant, beta, outcome });
        }
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(spec: &ExperimentSpec, rows: &[SweepRow], out: W) -> Result<()> {
    let u = spec.units.column_suffix();
    let scale = spec.rate_scale();
    let header = vec![
        "d_ref_m".into(),
        "c_variant".into(),
        "beta".into(),
        "l".into(),
        "p_t_w".into(),
        "p_t_dbw".into(),
        format!("ee_{u}"),
        "iterations".into(),
        "converged".into(),
        "in_reference_window".into(),
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![fmt_f(r.d_ref), r.c_variant.to_string(), fmt_f(r.beta)];
            match &r.outcome {
                Ok(o) => row.extend([
                    o.l.to_string(),
                    fmt_f(o.p_t),
                    fmt_f(watts_to_dbw(o.p_t)),
                    fmt_f(scale * o.ee),
                    o.iterations.to_string(),
                    o.converged.to_string(),
                ]),
                Err(_) => row.extend(std::iter::repeat_n(String::new(), 5).chain(["false".to_string()])),
            }
            row.push(r.matches_reference().to_string());
            row
        })
        .collect();
    write_csv(out, &spec.provenance(), &header, &body)
}

/// Asymptotic sum rate at the reference path loss, bits/s/Hz.
pub fn asymptotic_rate(spec: &ExperimentSpec, k_users: usize, l_beams: usize, p_t: f64) -> Result<f64> {
    let sys = &spec.scenario.system;
    let beta = spec.scenario.geometry.reference_beta();
    let stats = LinkStats::new(l_beams, beta * p_t / sys.sigma2, k_users)?;
    Ok(darb_sum_rate_asymptotic(&stats, beta, spec.scenario.inner_log)?.bits_per_hz)
}

/// Runs `spec.experiment` and writes its CSV to `out`.
pub fn run_to_csv<W: Write>(spec: &ExperimentSpec, out: W) -> Result<()> {
    match spec.experiment {
        Experiment::Fig2 => write_fig2(spec, &run_fig2(spec)?, out),
        Experiment::Fig3 => write_fig3(spec, &run_fig3(spec)?, out),
        Experiment::Fig4 => write_fig4(spec, &run_fig4(spec)?, out),
        Experiment::Sweep => write_sweep(spec, &run_sweep(spec)?, out),
        Experiment::Optimize => {
            let report = run_optimize(spec).map_err(|e| e.error)?;
            write_optimize_trace(spec, &report, out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(experiment);
        spec.trials = 200;
        spec
    }

    #[test]
    fn fig2_rows_and_ordering() {
        let mut spec = small(Experiment::Fig2);
        spec.k_list = vec![10, 30, 60];
        let rows = run_fig2(&spec).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].system, SystemKind::Ris);
            assert_eq!(pair[1].system, SystemKind::Ma);
            assert!(pair[0].ee_mean > pair[1].ee_mean);
        }
    }

    #[test]
    fn fig3_optimizer_dominates_fixed_point() {
        let mut spec = small(Experiment::Fig3);
        spec.k_list = vec![10, 50, 100];
        let rows = run_fig3(&spec).unwrap();
        for triple in rows.chunks(3) {
            let (darb, jeta, ma) = (&triple[0], &triple[1], &triple[2]);
            assert_eq!((darb.scheme, jeta.scheme, ma.scheme), (Fig3Scheme::Darb, Fig3Scheme::Jeta, Fig3Scheme::Ma));
            assert!(jeta.ee_asymptotic >= darb.ee_asymptotic);
            assert!(darb.ee_mc > ma.ee_mc);
            let trace = &jeta.trace.as_ref().unwrap().trace;
            assert!(trace.windows(2).all(|w| w[1].ee >= w[0].ee));
        }
    }

    #[test]
    fn csv_is_deterministic_and_well_formed() {
        let mut spec = small(Experiment::Fig4);
        spec.k_list = vec![5, 20];
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_to_csv(&spec, &mut a).unwrap();
        run_to_csv(&spec, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# darb fig4 seed=1 config="));
        assert!(lines[1].starts_with("l_beams,k_users,rate_no_tfs_bps_hz"));
        assert_eq!(lines.len(), 4);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn zero_threshold_fig4_columns_coincide() {
        let mut spec = small(Experiment::Fig4);
        spec.k_list = vec![3, 12];
        spec.scenario.system.alpha = 0.0;
        for row in run_fig4(&spec).unwrap() {
            assert_eq!(row.rate_no_tfs, row.rate_tfs);
            assert_eq!(row.fo_no_tfs_bits, row.fo_tfs_bits);
        }
    }

    #[test]
    fn optimize_trace_header() {
        let spec = small(Experiment::Optimize);
        let mut out = Vec::new();
        run_to_csv(&spec, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1), Some("t,L,P_T_w,P_T_dbw,EE"));
    }

    #[test]
    fn config_hash_tracks_settings() {
        let a = small(Experiment::Fig2);
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.scenario.system.q_bits = 5;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn validation_rejects_empty_lists() {
        let mut spec = small(Experiment::Fig2);
        spec.k_list.clear();
        assert!(run_fig2(&spec).is_err());
        let mut spec = small(Experiment::Fig4);
        spec.l_list = vec![50];
        assert!(run_fig4(&spec).is_err());
    }
}
