//! Random beams, SINR evaluation, scheduling and Monte Carlo rate estimation.
//!
//! Three schedulers are provided:
//!
//! * [`schedule_max_sinr`]: every beam is given to the user with the largest
//!   SINR in its column. This is the idealized rule behind the closed-form
//!   rate integral.
//! * [`schedule_best_beam`]: each user reports only its own best beam and
//!   SINR; a beam nobody reported stays idle.
//! * [`schedule_with_threshold`]: as above, but a user stays silent unless its
//!   best SINR exceeds the threshold.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channels, ChannelRealization, Seed};
use crate::linalg::CMatrix;
use crate::stats::Moments;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamMethod {
    /// Isotropically distributed unitary matrix (QR of a complex Gaussian).
    Haar,
    /// Random diagonal phases times the normalized DFT matrix; every entry
    /// has modulus `1/√L`.
    #[default]
    PhaseDft,
}

impl FromStr for BeamMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(BeamMethod::Haar),
            "phase-dft" => Ok(BeamMethod::PhaseDft),
            other => Err(Error::Config(format!("unknown beam method `{other}`"))),
        }
    }
}

impl fmt::Display for BeamMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeamMethod::Haar => "haar",
            BeamMethod::PhaseDft => "phase-dft",
        })
    }
}

/// `L × L` unitary matrix whose columns are the beams.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix {
    pub phi: CMatrix,
    pub method: BeamMethod,
}

impl BeamMatrix {
    pub fn l_beams(&self) -> usize {
        self.phi.cols()
    }
}

pub fn random_unitary(seed: Seed, l_beams: usize, method: BeamMethod) -> BeamMatrix {
    let mut rng = seed.rng();
    let phi = match method {
        BeamMethod::Haar => {
            let scale = std::f64::consts::FRAC_1_SQRT_2;
            let mut g = CMatrix::from_fn(l_beams, l_beams, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(scale * re, scale * im)
            });
            // Gram-Schmidt leaves R with a positive real diagonal, which is
            // the phase normalization that makes Q Haar distributed.
            g.orthonormalize_columns();
            g
        }
        BeamMethod::PhaseDft => {
            let n = l_beams as f64;
            let tau = std::f64::consts::TAU;
            let thetas: Vec<f64> = (0..l_beams).map(|_| tau * rng.random::<f64>()).collect();
            CMatrix::from_fn(l_beams, l_beams, |r, c| {
                let angle = thetas[r] - tau * ((r * c) % l_beams) as f64 / n;
                Complex64::from_polar(1.0 / n.sqrt(), angle)
            })
        }
    };
    BeamMatrix { phi, method }
}

/// Row-major `k_users × l_beams` SINR values.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTable {
    pub k_users: usize,
    pub l_beams: usize,
    pub gamma: Vec<f64>,
}

impl SinrTable {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let l_beams = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == l_beams), "ragged SINR table");
        SinrTable { k_users: rows.len(), l_beams, gamma: rows.concat() }
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.gamma[k * self.l_beams + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.gamma[k * self.l_beams..(k + 1) * self.l_beams]
    }

    /// Index and value of the largest entry of row `k`, lowest index on ties.
    pub fn best_beam(&self, k: usize) -> (usize, f64) {
        first_argmax(self.row(k).iter().copied())
    }
}

fn first_argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// `γ[k][i] = |h_kᵀ φ_i|² / (Σ_{l≠i} |h_kᵀ φ_l|² + L σ² / P_T)`.
pub fn compute_sinr(h: &ChannelRealization, phi: &BeamMatrix, p_t: f64, sigma2: f64) -> Result<SinrTable> {
    if !(p_t > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("need p_t > 0 and sigma2 > 0, got {p_t} and {sigma2}")));
    }
    let l = h.l_beams;
    if phi.phi.rows() != l || phi.phi.cols() != l {
        return Err(Error::Domain(format!(
            "channel has {l} entries per user but beam matrix is {}×{}",
            phi.phi.rows(),
            phi.phi.cols()
        )));
    }
    let noise = l as f64 * sigma2 / p_t;
    let mut gamma = Vec::with_capacity(h.k_users * l);
    let mut z = vec![0.0; l];
    let mut suffix = vec![0.0; l + 1];
    for k in 0..h.k_users {
        let hk = h.row(k);
        for (i, zi) in z.iter_mut().enumerate() {
            let proj: Complex64 = hk.iter().enumerate().map(|(r, &hr)| hr * phi.phi[(r, i)]).sum();
            *zi = proj.norm_sqr();
        }
        for i in (0..l).rev() {
            suffix[i] = suffix[i + 1] + z[i];
        }
        let mut prefix = 0.0;
        for i in 0..l {
            let interference = prefix + suffix[i + 1];
            gamma.push(z[i] / (interference + noise));
            prefix += z[i];
        }
    }
    Ok(SinrTable { k_users: h.k_users, l_beams: l, gamma })
}

/// Bits needed to index one of `l_beams` beams, `ceil(log2 L)`.
pub fn beam_index_bits(l_beams: usize) -> u64 {
    if l_beams <= 1 {
        0
    } else {
        (usize::BITS - (l_beams - 1).leading_zeros()) as u64
    }
}

/// Full-feedback overhead `K·Q + K·ceil(log2 L)` in bits.
pub fn feedback_overhead(k_users: usize, l_beams: usize, q_bits: u32) -> u64 {
    k_users as u64 * (q_bits as u64 + beam_index_bits(l_beams))
}

/// Expected threshold-feedback overhead `(1 − F(α))·FO`.
pub fn feedback_overhead_tfs(k_users: usize, l_beams: usize, q_bits: u32, cdf_at_alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&cdf_at_alpha) {
        return Err(Error::Domain(format!("cdf_at_alpha must be a probability, got {cdf_at_alpha}")));
    }
    Ok((1.0 - cdf_at_alpha) * feedback_overhead(k_users, l_beams, q_bits) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGrant {
    pub user: usize,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    /// One entry per beam; `None` when no report reached that beam.
    pub beams: Vec<Option<BeamGrant>>,
    /// Users that sent a report.
    pub messages: usize,
    pub feedback_bits: u64,
}

impl ScheduleOutcome {
    /// `Σ_i log2(1 + γ_i)` over served beams.
    pub fn sum_rate(&self) -> f64 {
        self.beams.iter().flatten().map(|g| g.sinr.ln_1p() / std::f64::consts::LN_2).sum()
    }
}

/// Idealized per-column argmax; every user contends on every beam.
pub fn schedule_max_sinr(table: &SinrTable, q_bits: u32) -> ScheduleOutcome {
    let beams = (0..table.l_beams)
        .map(|i| {
            let (user, sinr) = first_argmax((0..table.k_users).map(|k| table.get(k, i)));
            (table.k_users > 0).then_some(BeamGrant { user, sinr })
        })
        .collect();
    ScheduleOutcome {
        beams,
        messages: table.k_users,
        feedback_bits: feedback_overhead(table.k_users, table.l_beams, q_bits),
    }
}

fn schedule_reports(table: &SinrTable, q_bits: u32, threshold: Option<f64>) -> ScheduleOutcome {
    let mut beams: Vec<Option<BeamGrant>> = vec![None; table.l_beams];
    let mut messages = 0;
    for k in 0..table.k_users {
        let (i, sinr) = table.best_beam(k);
        if threshold.is_some_and(|alpha| !(sinr > alpha)) {
            continue;
        }
        messages += 1;
        if beams[i].is_none_or(|g| sinr > g.sinr) {
            beams[i] = Some(BeamGrant { user: k, sinr });
        }
    }
    ScheduleOutcome {
        beams,
        messages,
        feedback_bits: messages as u64 * (q_bits as u64 + beam_index_bits(table.l_beams)),
    }
}

/// Every user reports its best `(SINR, beam)` pair; each beam goes to the
/// strongest user that reported it.
pub fn schedule_best_beam(table: &SinrTable, q_bits: u32) -> ScheduleOutcome {
    schedule_reports(table, q_bits, None)
}

/// Threshold feedback: a user reports its best pair only if that SINR
/// exceeds `alpha`.
pub fn schedule_with_threshold(table: &SinrTable, alpha: f64, q_bits: u32) -> Result<ScheduleOutcome> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {alpha}")));
    }
    Ok(schedule_reports(table, q_bits, Some(alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulingMode {
    /// Per-column argmax over all users.
    Ideal,
    /// Best-beam reports from every user.
    Full,
    /// Best-beam reports above a threshold.
    Tfs { alpha: f64 },
}

impl SchedulingMode {
    pub fn schedule(&self, table: &SinrTable, q_bits: u32) -> Result<ScheduleOutcome> {
        match *self {
            SchedulingMode::Ideal => Ok(schedule_max_sinr(table, q_bits)),
            SchedulingMode::Full => Ok(schedule_best_beam(table, q_bits)),
            SchedulingMode::Tfs { alpha } => schedule_with_threshold(table, alpha, q_bits),
        }
    }
}

/// Inputs shared by all trials of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    /// Path-loss gain of each user.
    pub betas: Vec<f64>,
    pub l_beams: usize,
    pub p_t: f64,
    pub sigma2: f64,
    pub q_bits: u32,
    pub method: BeamMethod,
}

impl TrialSpec {
    /// Beams are drawn from `trial_seed.child(0)`, channels from
    /// `trial_seed.child(1)`.
    pub fn sinr_table(&self, trial_seed: Seed) -> Result<SinrTable> {
        let phi = random_unitary(trial_seed.child(0), self.l_beams, self.method);
        let h = draw_channels(trial_seed.child(1), &self.betas, self.l_beams);
        compute_sinr(&h, &phi, self.p_t, self.sigma2)
    }
}

/// Runs `trials` independent trials in parallel. Trial `t` uses
/// `seed.child(t)`; results come back in trial order.
pub fn run_trials<T, F>(spec: &TrialSpec, seed: Seed, trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &SinrTable) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let table = spec.sinr_table(seed.child(t))?;
            f(t, &table)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// Mean spectral sum rate, bits/s/Hz.
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl From<Moments> for RateEstimate {
    fn from(m: Moments) -> Self {
        RateEstimate { mean: m.mean, std_error: m.std_error(), trials: m.count }
    }
}

/// Rate and feedback statistics of one scheduling mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSummary {
    pub mode: SchedulingMode,
    pub rate: RateEstimate,
    pub bits: Moments,
}

pub fn monte_carlo_sum_rate(spec: &TrialSpec, seed: Seed, trials: u64, mode: SchedulingMode) -> Result<RateEstimate> {
    Ok(monte_carlo_modes(spec, seed, trials, &[mode])?[0].rate)
}

/// Evaluates several scheduling modes on the same channel and beam draws.
pub fn monte_carlo_modes(spec: &TrialSpec, seed: Seed, trials: u64, modes: &[SchedulingMode]) -> Result<Vec<ModeSummary>> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let per_trial = run_trials(spec, seed, trials, |_, table| {
        modes
            .iter()
            .map(|m| m.schedule(table, spec.q_bits).map(|o| (o.sum_rate(), o.feedback_bits as f64)))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(modes
        .iter()
        .enumerate()
        .map(|(j, &mode)| {
            let rate: Moments = per_trial.iter().map(|r| r[j].0).collect();
            let bits: Moments = per_trial.iter().map(|r| r[j].1).collect();
            ModeSummary { mode, rate: rate.into(), bits }
        })
        .collect())
}

/// Writes one CSV row per trial and beam:
/// `trial,beam,selected_user,sinr,rate,fed_back_bits`. Idle beams leave
/// `selected_user` empty.
pub fn write_trace<W: Write>(spec: &TrialSpec, seed: Seed, trials: u64, mode: SchedulingMode, out: W) -> Result<()> {
    let outcomes = run_trials(spec, seed, trials, |_, table| mode.schedule(table, spec.q_bits))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["trial", "beam", "selected_user", "sinr", "rate", "fed_back_bits"])?;
    for (t, o) in outcomes.iter().enumerate() {
        for (i, grant) in o.beams.iter().enumerate() {
            let (user, sinr) = match grant {
                Some(g) => (g.user.to_string(), g.sinr),
                None => (String::new(), 0.0),
            };
            let rate = sinr.ln_1p() / std::f64::consts::LN_2;
            w.write_record([
                t.to_string(),
                i.to_string(),
                user,
                sinr.to_string(),
                rate.to_string(),
                o.feedback_bits.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}
