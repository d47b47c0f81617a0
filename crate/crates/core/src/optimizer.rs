//! Joint choice of surface rows `L` and transmit power `P_T` by alternating
//! optimization of the asymptotic energy efficiency.
//!
//! Each outer iteration solves two 1-D problems:
//!
//! * rows, at fixed power: `f(l) = l log2(G/l) / (l² P_PIN + l P_U + a)` with
//!   `G = β log K · P_T / σ²`, maximized over the relaxed interval `[1, L_max]`
//!   and then rounded to the better of the two neighbouring integers;
//! * power, at fixed rows: `f(p) = (L log2(p / (Lσ²)) + b) / (p/η + c)`,
//!   maximized over `(p_lo, P_max]` where `p_lo` is where the rate reaches zero.
//!
//! Both ratios are concave over positive affine/convex denominators, so the
//! sign of the derivative changes at most once and bisection on it finds the
//! maximizer.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ee_darb, DarbEeModel};
use crate::{Error, Result};

/// Which constant term the power subproblem puts in its denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CVariant {
    /// `c = L² P_PIN + L P_U + P_FPGA + P_A + P_SR + K P_UK`, the RIS-system
    /// power minus the amplifier term.
    #[default]
    Corrected,
    /// `c = L (P_A + P_U) + P_SA + K P_UK`, the multi-antenna circuit and
    /// static power with `M = L`.
    Paper,
}

impl FromStr for CVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(CVariant::Corrected),
            "paper" => Ok(CVariant::Paper),
            other => Err(Error::Config(format!("unknown c variant `{other}`"))),
        }
    }
}

impl fmt::Display for CVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CVariant::Corrected => "corrected",
            CVariant::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub l_max: usize,
    pub p_max: f64,
    /// Stop once an iteration improves the objective by less than this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Relative bisection tolerance in the search variable.
    pub rel_tol: f64,
    /// Starting power; `None` means `p_max / 2`.
    pub p_init: Option<f64>,
    pub l_init: usize,
}

impl OptimizerConfig {
    pub fn new(l_max: usize, p_max: f64, epsilon: f64) -> Self {
        OptimizerConfig { l_max, p_max, epsilon, max_iterations: 100, rel_tol: 1e-10, p_init: None, l_init: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_max == 0 || !(self.p_max > 0.0) || !(self.epsilon > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(format!(
                "need l_max >= 1, p_max > 0, epsilon > 0 and max_iterations >= 1, got {self:?}"
            )));
        }
        if let Some(p) = self.p_init {
            if !(p > 0.0 && p <= self.p_max) {
                return Err(Error::Config(format!("p_init must lie in (0, p_max], got {p}")));
            }
        }
        if self.l_init == 0 || self.l_init > self.l_max {
            return Err(Error::Config(format!("l_init must lie in [1, l_max], got {}", self.l_init)));
        }
        Ok(())
    }
}

/// The objective being maximized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EeProblem {
    pub model: DarbEeModel,
    pub c_variant: CVariant,
    /// Positive factor applied to the objective, e.g. the bandwidth for bits/J.
    pub scale: f64,
}

impl EeProblem {
    pub fn new(model: DarbEeModel) -> Self {
        EeProblem { model, c_variant: CVariant::Corrected, scale: 1.0 }
    }

    /// Objective value at an integer row count.
    pub fn objective(&self, l: usize, p_t: f64) -> f64 {
        self.scale * ee_darb(l, p_t, &self.model).ee
    }

    /// `β log K · P_T / σ²`; the rate at `l` rows is positive iff `l` is below it.
    fn rate_horizon(&self, p_t: f64) -> f64 {
        let m = &self.model;
        m.beta * m.inner_log.of(m.k_users as f64) * p_t / m.sigma2
    }

    fn p3_value(&self, l: f64, p_t: f64) -> f64 {
        self.scale * self.model.evaluate(l, p_t).ee
    }

    /// Sign-carrying numerator of `df/dl`: `N' D − N D'`.
    fn p3_slope(&self, l: f64, p_t: f64) -> f64 {
        let m = &self.model;
        let n = m.raw_rate(l, p_t);
        let dn = (self.rate_horizon(p_t) / l).log2() - 1.0 / LN_2;
        let d = m.total_power(l, p_t);
        let dd = 2.0 * l * m.power.p_pin + m.power.p_u;
        let slope = dn * d - n * dd;
        if slope.is_finite() {
            slope
        } else {
            central_difference(|x| self.p3_value(x, p_t), l, 1e-6 * l.max(1.0))
        }
    }

    /// Denominator constant of the power subproblem.
    pub fn p4_constant(&self, l: usize) -> f64 {
        let m = &self.model;
        let pm = &m.power;
        let lf = l as f64;
        match self.c_variant {
            CVariant::Corrected => lf * lf * pm.p_pin + lf * pm.p_u + m.static_power(),
            CVariant::Paper => lf * (pm.p_a + pm.p_u) + pm.p_sa + m.k_users as f64 * pm.p_uk,
        }
    }

    /// Power-subproblem objective `(L log2(p/(Lσ²)) + b) / (p/η + c)`, unclamped.
    pub fn p4_objective(&self, l: usize, p: f64) -> f64 {
        let m = &self.model;
        let lf = l as f64;
        let num = lf * (p / (lf * m.sigma2)).log2() + lf * m.diversity_term();
        self.scale * num / (p / m.power.eta_t + self.p4_constant(l))
    }

    /// Sign-carrying numerator of `df/dp`.
    fn p4_slope(&self, l: usize, p: f64) -> f64 {
        let m = &self.model;
        let lf = l as f64;
        let eta = m.power.eta_t;
        let num = lf * (p / (lf * m.sigma2)).log2() + lf * m.diversity_term();
        let den = p / eta + self.p4_constant(l);
        let slope = lf / (p * LN_2) * den - num / eta;
        if slope.is_finite() {
            slope
        } else {
            central_difference(|x| self.p4_objective(l, x), p, 1e-6 * p)
        }
    }

    /// Smallest power at which `l` rows have a positive rate.
    pub fn power_floor(&self, l: usize) -> f64 {
        let m = &self.model;
        l as f64 * m.sigma2 / (m.beta * m.inner_log.of(m.k_users as f64))
    }
}

pub(crate) fn central_difference(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Bisection for the sign change of a slope that is positive at `lo` and
/// negative at `hi`.
fn bisect_sign(mut lo: f64, mut hi: f64, rel_tol: f64, slope: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > rel_tol * hi.abs() {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowsSolution {
    /// Maximizer of the relaxed problem.
    pub l_continuous: f64,
    pub l: usize,
    pub objective: f64,
}

/// Best number of rows at fixed power.
pub fn solve_p3_elements(problem: &EeProblem, cfg: &OptimizerConfig, p_t: f64) -> Result<RowsSolution> {
    if !(p_t > 0.0) {
        return Err(Error::Domain(format!("transmit power must be positive, got {p_t}")));
    }
    let horizon = problem.rate_horizon(p_t);
    if !(horizon > 1.0) {
        return Err(Error::Infeasible {
            subproblem: "rows",
            reason: format!("no row count has a positive rate at P_T = {p_t} W"),
        });
    }
    let l_max = cfg.l_max as f64;
    let hi = l_max.min(horizon);
    let l_continuous = if hi <= 1.0 || problem.p3_slope(1.0, p_t) <= 0.0 {
        1.0
    } else if problem.p3_slope(hi, p_t) >= 0.0 {
        hi
    } else {
        bisect_sign(1.0, hi, cfg.rel_tol, |l| problem.p3_slope(l, p_t))
    };

    let floor = (l_continuous.floor() as usize).clamp(1, cfg.l_max);
    let ceil = (l_continuous.ceil() as usize).clamp(1, cfg.l_max);
    let (f_floor, f_ceil) = (problem.objective(floor, p_t), problem.objective(ceil, p_t));
    let (l, objective) = if f_ceil > f_floor { (ceil, f_ceil) } else { (floor, f_floor) };

    if !is_unimodal(problem, cfg.l_max, p_t) {
        log::warn!("EE over integer row counts is not unimodal at P_T = {p_t} W");
    }
    Ok(RowsSolution { l_continuous, l, objective })
}

/// True when `f(l+1) − f(l)` changes sign at most once over `1..=l_max`.
pub fn is_unimodal(problem: &EeProblem, l_max: usize, p_t: f64) -> bool {
    let values: Vec<f64> = (1..=l_max).map(|l| problem.objective(l, p_t)).collect();
    let mut descending = false;
    for w in values.windows(2) {
        if w[1] < w[0] {
            descending = true;
        } else if w[1] > w[0] && descending {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSolution {
    pub p_t: f64,
    /// False when the maximizer sits on `P_max`.
    pub interior: bool,
}

/// Best transmit power at fixed rows.
pub fn solve_p4_power(problem: &EeProblem, cfg: &OptimizerConfig, l: usize) -> Result<PowerSolution> {
    if l == 0 {
        return Err(Error::Domain("row count must be at least 1".into()));
    }
    let p_lo = problem.power_floor(l);
    if !(p_lo < cfg.p_max) {
        return Err(Error::Infeasible {
            subproblem: "power",
            reason: format!("L = {l} needs more than P_max = {} W for a positive rate", cfg.p_max),
        });
    }
    if problem.p4_slope(l, cfg.p_max) >= 0.0 {
        return Ok(PowerSolution { p_t: cfg.p_max, interior: false });
    }
    // bisect in log-power; the slope is positive just above p_lo
    let log_p = bisect_sign(p_lo.ln(), cfg.p_max.ln(), 0.0, |x| problem.p4_slope(l, x.exp()));
    let p_t = log_p.exp();
    let p_t = refine_power(problem, l, p_t, cfg.rel_tol);
    Ok(PowerSolution { p_t, interior: true })
}

/// Plain bisection in `p` around a log-space estimate, down to `rel_tol`.
fn refine_power(problem: &EeProblem, l: usize, p: f64, rel_tol: f64) -> f64 {
    let mut lo = p * (1.0 - 1e-6);
    let mut hi = p * (1.0 + 1e-6);
    if !(problem.p4_slope(l, lo) > 0.0 && problem.p4_slope(l, hi) <= 0.0) {
        return p;
    }
    while hi - lo > rel_tol.max(f64::EPSILON) * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if problem.p4_slope(l, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    pub l: usize,
    pub p_t: f64,
    pub ee: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub l: usize,
    pub p_t: f64,
    pub ee: f64,
    /// Starting point at `t = 0`, then one record per iteration.
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
}

/// A subproblem failed part way through; `trace` holds the iterations done.
#[derive(Debug, thiserror::Error)]
#[error("alternating optimization stopped after {} records: {error}", trace.len())]
pub struct Interrupted {
    #[source]
    pub error: Error,
    pub trace: Vec<IterationRecord>,
}

pub fn alternating_optimize(problem: &EeProblem, cfg: &OptimizerConfig) -> std::result::Result<OptimizationResult, Interrupted> {
    let mut trace = Vec::new();
    if let Err(error) = cfg.validate() {
        return Err(Interrupted { error, trace });
    }
    let mut p_t = cfg.p_init.unwrap_or(0.5 * cfg.p_max);
    let mut l = cfg.l_init;
    let mut ee = problem.objective(l, p_t);
    trace.push(IterationRecord { t: 0, l, p_t, ee });

    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.max_iterations {
        iterations = t;
        let step = solve_p3_elements(problem, cfg, p_t).and_then(|rows| {
            let power = solve_p4_power(problem, cfg, rows.l)?;
            Ok((rows.l, power.p_t))
        });
        let (l_next, p_next) = match step {
            Ok(v) => v,
            Err(error) => return Err(Interrupted { error, trace }),
        };
        let ee_next = problem.objective(l_next, p_next);
        trace.push(IterationRecord { t, l: l_next, p_t: p_next, ee: ee_next });
        let increment = ee_next - ee;
        l = l_next;
        p_t = p_next;
        ee = ee_next;
        if increment < cfg.epsilon {
            converged = true;
            break;
        }
    }
    Ok(OptimizationResult { l, p_t, ee, trace, converged, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub l: usize,
    pub p_t: f64,
    pub ee: f64,
}

/// Exhaustive search over `L ∈ 1..=l_max` and `points` log-spaced powers on
/// `[p_max · 10^-decades, p_max]`.
pub fn grid_oracle(problem: &EeProblem, l_max: usize, p_max: f64, points: usize, decades: f64) -> GridOptimum {
    let powers: Vec<f64> = (0..points)
        .map(|i| {
            let frac = if points == 1 { 1.0 } else { i as f64 / (points - 1) as f64 };
            p_max * 10f64.powf(-decades * (1.0 - frac))
        })
        .collect();
    (1..=l_max)
        .into_par_iter()
        .map(|l| {
            powers.iter().fold(GridOptimum { l, p_t: p_max, ee: f64::NEG_INFINITY }, |best, &p| {
                let ee = problem.objective(l, p);
                if ee > best.ee {
                    GridOptimum { l, p_t: p, ee }
                } else {
                    best
                }
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(GridOptimum { l: 1, p_t: p_max, ee: f64::NEG_INFINITY }, |a, b| if b.ee > a.ee { b } else { a })
}
