//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use darb::analytic::{
    darb_sum_rate_asymptotic, darb_sum_rate_integral, selected_sinr_pdf, sinr_cdf, DarbEeModel, InnerLog, LinkStats,
};
use darb::beamsim::{monte_carlo_sum_rate, run_trials, BeamMethod, SchedulingMode, TrialSpec};
use darb::channel::{path_loss, Seed};
use darb::experiments::{
    run_fig2, run_fig4, run_sweep, run_to_csv, Experiment, ExperimentSpec, SystemKind, REFERENCE_L,
    REFERENCE_P_T_DBW,
};
use darb::optimizer::{alternating_optimize, grid_oracle, EeProblem, OptimizerConfig};
use darb::quadrature::{integrate_half_line, QuadOptions};
use darb::stats::ks_statistic;
use darb::sysconfig::{dbm_to_watts, dbw_to_watts, watts_to_dbw, PowerModel};

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Report);

struct Report {
    passed: bool,
    detail: String,
}

impl Report {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Report { passed, detail: detail.into() }
    }
}

fn iid_spec(k: usize, l: usize, snr: f64, method: BeamMethod) -> TrialSpec {
    TrialSpec { betas: vec![1.0; k], l_beams: l, p_t: snr, sigma2: 1.0, q_bits: 4, method }
}

fn sinr_law() -> Report {
    const TRIALS: u64 = 100_000;
    const MAX_KS: f64 = 0.01;
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for method in [BeamMethod::Haar, BeamMethod::PhaseDft] {
        for l in [2, 4, 8] {
            for snr in [1.0, 10.0] {
                let start = Instant::now();
                let spec = iid_spec(1, l, snr, method);
                let mut gamma = run_trials(&spec, Seed::new(SEED).child(l as u64), TRIALS, |t, table| {
                    Ok(table.get(0, t as usize % l))
                })
                .expect("trials run");
                let stats = LinkStats::new(l, snr, 1).unwrap();
                let d = ks_statistic(&mut gamma, |g| sinr_cdf(g, &stats));
                worst = worst.max(d);
                lines.push(format!("{method}/L={l}/rho={snr}: D={d:.4} ({:.1}s)", start.elapsed().as_secs_f64()));
            }
        }
    }
    Report::new(worst < MAX_KS, format!("max KS {worst:.4} < {MAX_KS}; {}", lines.join(", ")))
}

fn order_statistics() -> Report {
    const SNR: f64 = 10.0;
    let mut ok = true;
    let mut worst_mass: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-14, ..QuadOptions::default() };
    for (k, l) in [(2, 2), (10, 4), (50, 8)] {
        let s = LinkStats::new(l, SNR, k).unwrap();
        let mass = integrate_half_line(|g| selected_sinr_pdf(g, &s), &opts).unwrap().value;
        worst_mass = worst_mass.max((mass - 1.0).abs());
        ok &= (mass - 1.0).abs() < 1e-6;

        let fk = |g: f64| sinr_cdf(g, &s).powi(k as i32);
        // upper end of the grid: where the selected SINR exceeds it with probability 1e-6
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - fk(mid) > 1e-6 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let top = hi;
        for i in 0..100 {
            let g = 0.01 + (top - 0.01) * i as f64 / 99.0;
            // F^K rises like a high power of g near the origin, so the step is relative
            let h = 1e-4 * g;
            let fd = (fk(g + h) - fk(g - h)) / (2.0 * h);
            let pdf = selected_sinr_pdf(g, &s);
            let rel = ((fd - pdf) / pdf).abs();
            worst_rel = worst_rel.max(rel);
            ok &= rel < 1e-4;
        }
    }
    Report::new(ok, format!("max |mass-1| = {worst_mass:.2e} (< 1e-6), max FD rel err = {worst_rel:.2e} (< 1e-4)"))
}

fn rate_consistency() -> Report {
    const TRIALS: u64 = 10_000;
    let mut ok = true;
    let mut lines = Vec::new();
    for (k, l, snr) in [(16, 4, 10.0), (64, 8, 10.0)] {
        let start = Instant::now();
        let exact = darb_sum_rate_integral(&LinkStats::new(l, snr, k).unwrap()).unwrap();
        let spec = iid_spec(k, l, snr, BeamMethod::PhaseDft);
        let mc = monte_carlo_sum_rate(&spec, Seed::new(SEED).child(k as u64), TRIALS, SchedulingMode::Ideal).unwrap();
        let z = (mc.mean - exact) / mc.std_error;
        ok &= z.abs() <= 3.0;
        lines.push(format!(
            "(K={k},L={l},rho={snr}): integral {exact:.4}, MC {:.4} ± {:.4}, z = {z:+.2} ({:.1}s)",
            mc.mean,
            mc.std_error,
            start.elapsed().as_secs_f64()
        ));
    }
    Report::new(ok, lines.join("; "))
}

fn asymptotic_trend() -> Report {
    let mut gaps = Vec::new();
    let mut lines = Vec::new();
    for k in [100, 1_000, 10_000] {
        let s = LinkStats::new(4, 10.0, k).unwrap();
        let exact = darb_sum_rate_integral(&s).unwrap();
        let asym = darb_sum_rate_asymptotic(&s, 1.0, InnerLog::Natural).unwrap().bits_per_hz;
        let ratio = exact / asym;
        gaps.push((ratio - 1.0).abs());
        lines.push(format!("K={k}: ratio {ratio:.4}"));
    }
    let ok = gaps.windows(2).all(|w| w[1] < w[0]);
    Report::new(ok, format!("|ratio-1| strictly decreasing; {}", lines.join(", ")))
}

fn threshold_feedback() -> Report {
    let mut spec = ExperimentSpec::new(Experiment::Fig4);
    spec.seed = SEED;
    spec.trials = 10_000;
    spec.scenario.system.alpha = 0.1;
    spec.scenario.system.q_bits = 4;
    let rows = run_fig4(&spec).unwrap();
    let mut fo_ok = true;
    let mut factor_ok = true;
    let mut rate_ok = true;
    let mut strictly_fewer = true;
    let mut worst_z: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut lines = Vec::new();
    for r in &rows {
        let se = r.fo_tfs_stderr_bits;
        let z_fo = (r.fo_tfs_bits - r.fo_tfs_model_bits).abs() / se;
        fo_ok &= (r.fo_tfs_bits - r.fo_tfs_model_bits).abs() <= 3.0 * se;
        let factor = r.fo_tfs_bits / r.fo_no_tfs_bits;
        let model_factor = r.fo_tfs_model_bits / r.fo_no_tfs_bits;
        factor_ok &= (factor - model_factor).abs() <= 3.0 * se / r.fo_no_tfs_bits;
        worst_z = worst_z.max(z_fo);
        strictly_fewer &= r.fo_tfs_bits < r.fo_no_tfs_bits;
        if r.k_users >= 20 {
            let gap = (r.rate_tfs.mean - r.rate_no_tfs.mean).abs() / r.rate_no_tfs.mean;
            worst_gap = worst_gap.max(gap);
            rate_ok &= gap < 0.02;
        }
        lines.push(format!("K={}: factor {factor:.4} vs 1-F(a) {model_factor:.4}", r.k_users));
    }
    let ok = fo_ok && factor_ok && rate_ok && strictly_fewer;
    Report::new(
        ok,
        format!(
            "FO within 3 SE: {fo_ok} (max |z| {worst_z:.3e}); reduction factor within 3 SE: {factor_ok}; \
             rate gap < 2% for K >= 20: {rate_ok} (max {:.3}%); \
             fewer bits at every K: {strictly_fewer}; {}",
            100.0 * worst_gap,
            lines.join(", ")
        ),
    )
}

fn jitter(rng: &mut impl Rng, w: f64) -> f64 {
    w * 10f64.powf(rng.random_range(-0.3..0.3))
}

fn optimizer_instances() -> Report {
    const INSTANCES: usize = 100;
    let start = Instant::now();
    let mut rng = Seed::new(SEED).child(6).rng();
    let mut monotone = 0;
    let mut converged = 0;
    let mut near_grid = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut drawn = 0;
    let mut done = 0;
    while done < INSTANCES {
        drawn += 1;
        let base = PowerModel::table_one();
        let power = PowerModel {
            p_fpga: jitter(&mut rng, base.p_fpga),
            p_pin: jitter(&mut rng, base.p_pin),
            p_a: jitter(&mut rng, base.p_a),
            p_u: jitter(&mut rng, base.p_u),
            p_sr: jitter(&mut rng, base.p_sr),
            p_sa: jitter(&mut rng, base.p_sa),
            p_uk: jitter(&mut rng, base.p_uk),
            eta_t: rng.random_range(0.3..0.95),
        };
        let model = DarbEeModel {
            power,
            k_users: rng.random_range(2..=500),
            beta: path_loss(rng.random_range(5.0..60.0), 1.0),
            sigma2: dbm_to_watts(rng.random_range(-90.0..-70.0)),
            inner_log: InnerLog::Natural,
        };
        let problem = EeProblem::new(model);
        let cfg = OptimizerConfig::new(rng.random_range(4..=32), dbw_to_watts(rng.random_range(5.0..20.0)), 0.05);
        let Ok(result) = alternating_optimize(&problem, &cfg) else {
            continue;
        };
        done += 1;
        if result.trace.windows(2).all(|w| w[1].ee >= w[0].ee) {
            monotone += 1;
        }
        if result.converged && result.iterations <= cfg.max_iterations {
            converged += 1;
        }
        let grid = grid_oracle(&problem, cfg.l_max, cfg.p_max, 4000, 10.0);
        let tol = cfg.epsilon.max(1e-6 * grid.ee.abs());
        let gap = grid.ee - result.ee;
        worst_gap = worst_gap.max(gap / tol);
        if result.ee >= grid.ee - tol {
            near_grid += 1;
        }
    }
    let ok = monotone == INSTANCES && converged == INSTANCES && near_grid == INSTANCES;
    Report::new(
        ok,
        format!(
            "{INSTANCES} instances ({} infeasible redrawn): nondecreasing {monotone}, converged {converged}, \
             within tol of grid {near_grid}; max (grid-final)/tol = {worst_gap:.3} ({:.1}s)",
            drawn - done,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn optimum_reproduction() -> Report {
    let mut spec = ExperimentSpec::new(Experiment::Sweep);
    spec.scenario.system.k_users = 100;
    spec.d_ref_list = vec![15.0, 30.0, 42.4];
    let rows = run_sweep(&spec).unwrap();
    let cells: Vec<String> = rows
        .iter()
        .map(|r| match &r.outcome {
            Ok(o) => format!(
                "d={} {}: L={} P={:.2}dBW{}",
                r.d_ref,
                r.c_variant,
                o.l,
                watts_to_dbw(o.p_t),
                if r.matches_reference() { " *" } else { "" }
            ),
            Err(e) => format!("d={} {}: {e}", r.d_ref, r.c_variant),
        })
        .collect();
    let ok = rows.iter().any(|r| r.matches_reference());
    Report::new(
        ok,
        format!(
            "window L in {:?}, P_T in {:?} dBW; {}",
            REFERENCE_L,
            REFERENCE_P_T_DBW,
            cells.join(", ")
        ),
    )
}

fn ee_ordering() -> Report {
    let mut spec = ExperimentSpec::new(Experiment::Fig2);
    spec.seed = SEED;
    spec.l_list = vec![8, 18];
    let rows = run_fig2(&spec).unwrap();
    let mut ordered = true;
    let mut increasing = true;
    for l in [8, 18] {
        let ris: Vec<_> = rows.iter().filter(|r| r.l_or_m == l && r.system == SystemKind::Ris).collect();
        let ma: Vec<_> = rows.iter().filter(|r| r.l_or_m == l && r.system == SystemKind::Ma).collect();
        for (r, m) in ris.iter().zip(&ma) {
            ordered &= r.ee_mean > m.ee_mean;
        }
        for series in [&ris, &ma] {
            increasing &= series.windows(2).all(|w| w[1].ee_mean > w[0].ee_mean);
        }
    }
    Report::new(
        ordered && increasing,
        format!(
            "K grid {:?}, L = M in {{8, 18}}: EE_ris > EE_ma everywhere: {ordered}; EE increasing in K: {increasing}",
            spec.k_list
        ),
    )
}

fn determinism() -> Report {
    let mut failures = Vec::new();
    for exp in [Experiment::Fig2, Experiment::Fig3, Experiment::Fig4, Experiment::Optimize, Experiment::Sweep] {
        let mut spec = ExperimentSpec::new(exp);
        spec.seed = SEED;
        spec.trials = 300;
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_to_csv(&spec, &mut a).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        single.install(|| run_to_csv(&spec, &mut b)).unwrap();
        if a != b {
            failures.push(exp.to_string());
        }
    }
    Report::new(
        failures.is_empty(),
        if failures.is_empty() {
            "all five experiments byte-identical across reruns and thread counts".to_string()
        } else {
            format!("differing output: {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("SINR law", sinr_law),
        ("order statistics", order_statistics),
        ("rate consistency", rate_consistency),
        ("asymptotic trend", asymptotic_trend),
        ("threshold feedback", threshold_feedback),
        ("optimizer correctness", optimizer_instances),
        ("optimum reproduction", optimum_reproduction),
        ("EE ordering", ee_ordering),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let report = check();
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        if !report.passed {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {verdict} ({:.1}s) {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            report.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
