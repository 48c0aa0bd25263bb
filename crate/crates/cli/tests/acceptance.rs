//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Run: cargo test --release -p envsense-cli --test acceptance

use std::process::Command;
use std::time::{Duration, Instant};

use envsense_cli::checks::{
    damping_inputs, measure_closed_form, measure_encoded_stationarity, measure_single_stationarity,
    measure_unconditional_distance,
};
use envsense_core::estimate::{
    dt_scaling_sweep, eta_coherence_sweep, recovery_infidelity, sense_experiment,
    sigma_x_phase_trace, sigma_z_failure_demo,
};
use envsense_core::protocol::{CompensationMode, ProtocolParams};
use envsense_core::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn criterion(id: &str, budget: Duration, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let started = Instant::now();
    let result = f();
    let elapsed = started.elapsed();
    let (passed, detail) = match result {
        Ok(o) => (o.passed && elapsed <= budget, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{id} {} {detail} [runtime {:.2}s, budget {}s]",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    passed
}

// A1: composed no-jump stepping against the closed form
fn a1() -> Result<Outcome> {
    let (mut amp, mut prob) = (0.0f64, 0.0f64);
    for (alpha, beta) in damping_inputs() {
        for gamma in [0.5, 1.0] {
            let (a, p) = measure_closed_form(alpha, beta, gamma, 1.0, 100)?;
            amp = amp.max(a);
            prob = prob.max(p);
        }
    }
    outcome(
        amp <= 1e-10 && prob <= 1e-10,
        format!("max amplitude error {amp:.2e}, max jump-probability error {prob:.2e} (tol 1e-10)"),
    )
}

// A2: compensation keeps the direction and decays the norm at the predicted rate
fn a2() -> Result<Outcome> {
    let dt = 1e-3;
    let (d1, n1) = measure_single_stationarity(0.6, 0.8, 1.0, dt, 100)?;
    let (d2, n2) = measure_single_stationarity(0.8, 0.6, 0.5, dt, 100)?;
    let (mut d3, mut n3) = (0.0f64, 0.0f64);
    for phi in [0.0, 0.7, 2.0] {
        let (d, n) = measure_encoded_stationarity(1.0, phi, dt, 100)?;
        d3 = d3.max(d);
        n3 = n3.max(n);
    }
    let dir = d1.max(d2).max(d3);
    let norm = n1.max(n2).max(n3);
    outcome(
        dir <= 1e-6 && norm <= 1e-6,
        format!("direction error {dir:.2e}, norm deviation {norm:.2e} after 100 cycles (tol 1e-6)"),
    )
}

// A3: error-corrected sensing at gamma=1, g=0.3, dt=1e-3, T=2, n=4000
fn a3() -> Result<Outcome> {
    let params = ProtocolParams {
        n_traj: 4000,
        ..ProtocolParams::default()
    };
    let rep = sense_experiment(&params)?;
    let target = 2.0 * params.g * params.t_final;
    let phase_err = (rep.final_phase - target).abs();
    outcome(
        rep.final_fidelity >= 0.99 && phase_err <= 5e-2,
        format!(
            "mean fidelity {:.6} (>= 0.99), phase {:.5} vs 2gT = {target} (tol 5e-2)",
            rep.final_fidelity, rep.final_phase
        ),
    )
}

// A4: infidelity against cycle length
fn a4() -> Result<Outcome> {
    let base = ProtocolParams {
        n_traj: 2000,
        ..ProtocolParams::default()
    };
    let res = dt_scaling_sweep(&base, &[4e-3, 2e-3, 1e-3, 5e-4])?;
    let slope_ok = (res.fit_slope - 1.0).abs() <= 0.15;
    let (intercept, sigma) = res
        .linear
        .map(|l| (l.intercept, l.intercept_stderr))
        .unwrap_or((f64::NAN, f64::NAN));
    let intercept_ok = intercept.abs() <= 2.0 * sigma;
    let points: Vec<String> = res
        .x_values
        .iter()
        .zip(&res.y_values)
        .map(|(x, y)| format!("{x:.0e}:{y:.3e}"))
        .collect();
    outcome(
        slope_ok && intercept_ok,
        format!(
            "log-log slope {:.3} (1.0 +/- 0.15), linear intercept {intercept:.3e} +/- {sigma:.1e} (|b| <= 2 sigma); infidelity {}",
            res.fit_slope,
            points.join(" ")
        ),
    )
}

// A5: coherence extension by photodetection
fn a5() -> Result<Outcome> {
    let base = ProtocolParams {
        n_traj: 2000,
        t_final: 300.0,
        ..ProtocolParams::default()
    };
    let res = eta_coherence_sweep(&base, &[0.0, 0.9, 0.99])?;
    let t0 = res.y_values[0];
    let r90 = res.y_values[1] / t0;
    let r99 = res.y_values[2] / t0;
    let censored = res.censored.iter().any(|c| *c);
    outcome(
        !censored && (30.0..=300.0).contains(&r99) && (4.0..=25.0).contains(&r90),
        format!(
            "T_eff = {:.3} / {:.3} / {:.3} at eta = 0 / 0.9 / 0.99; ratios {r90:.2} (in [4, 25]), {r99:.2} (in [30, 300]){}",
            res.y_values[0],
            res.y_values[1],
            res.y_values[2],
            if censored { "; censored" } else { "" }
        ),
    )
}

// A6: feedback-free trajectory average against the Lindblad solution
fn a6() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for gamma in [0.5, 1.0] {
        for g in [0.0, 0.3] {
            for mode in [
                CompensationMode::ContinuousDrive,
                CompensationMode::PulsedEcho,
            ] {
                let params = ProtocolParams {
                    gamma,
                    g,
                    mode,
                    dt: 1e-3,
                    t_final: 2.0 / gamma,
                    n_traj: 10_000,
                    ..ProtocolParams::default()
                };
                let times: Vec<f64> = (1..=5).map(|k| 0.4 * k as f64 / gamma).collect();
                let d = measure_unconditional_distance(&params, &times)?;
                if d > worst {
                    worst = d;
                    worst_at = format!("gamma={gamma} g={g} {mode}");
                }
            }
        }
    }
    outcome(
        worst <= 0.02,
        format!("max trace distance {worst:.4} over 8 configurations, 5 times each (tol 0.02; worst {worst_at})"),
    )
}

// A7: forced emission, detection and correction within one cycle
fn a7() -> Result<Outcome> {
    let mut bound_ok = true;
    let mut halving_ok = true;
    let mut parts = Vec::new();
    for mode in [
        CompensationMode::ContinuousDrive,
        CompensationMode::PulsedEcho,
    ] {
        let coarse = ProtocolParams {
            mode,
            dt: 1e-3,
            ..ProtocolParams::default()
        };
        let fine = ProtocolParams {
            dt: 5e-4,
            ..coarse.clone()
        };
        let mut worst_c = 0.0f64;
        let mut ratios = Vec::new();
        for substep in 0..coarse.substeps {
            let a = recovery_infidelity(&coarse, substep)?;
            let b = recovery_infidelity(&fine, substep)?;
            worst_c = worst_c.max(a / ((coarse.gamma + coarse.g) * coarse.dt));
            if a > 1e-14 {
                ratios.push(a / b);
            }
        }
        bound_ok &= worst_c <= 10.0;
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
        halving_ok &= !ratios.is_empty() && lo >= 1.6 && hi <= 2.4;
        parts.push(format!(
            "{mode}: C = {worst_c:.2e}, dt-halving ratio in [{lo:.3}, {hi:.3}]"
        ));
    }
    outcome(
        bound_ok && halving_ok,
        format!("{} (need C <= 10 and ratio 2 +/- 20%)", parts.join("; ")),
    )
}

// A8: echo cycles average away a signal that commutes with the noise
fn a8() -> Result<Outcome> {
    let (g, dt, t) = (0.3, 0.01, 1.0);
    let noiseless = sigma_z_failure_demo(g, 0.0, dt, t)?;
    let damped = sigma_z_failure_demo(g, 1.0, dt, t)?;
    let contrast = sigma_x_phase_trace(g, 0.0, dt, t)?
        .last()
        .map(|p| p.1)
        .unwrap_or(0.0);
    let bound = 2.0 * g * dt;
    outcome(
        noiseless.abs() <= bound && damped.abs() <= bound && (contrast - 2.0 * g * t).abs() <= 1e-6,
        format!(
            "sigma_z phase {noiseless:.2e} (gamma=0), {damped:.2e} (gamma=1), bound {bound:.1e}; sigma_x contrast {contrast:.9} vs 0.6"
        ),
    )
}

// A9: byte-identical CSV for different worker counts
fn a9() -> Result<Outcome> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let path = dir.path().join(format!("sense-{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_envsense"))
            .args([
                "sense",
                "--eta",
                "0.9",
                "--trajectories",
                "1000",
                "--threads",
                threads,
                "--out",
            ])
            .arg(&path)
            .output()
            .expect("spawn envsense");
        if !status.status.success() {
            return outcome(false, format!("sense exited with {}", status.status));
        }
        outputs.push(std::fs::read(&path).expect("read csv"));
    }
    outcome(
        outputs[0] == outputs[1],
        format!("{} bytes with --threads 1 vs --threads 4", outputs[0].len()),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion("A1", secs(1), a1),
        criterion("A2", secs(1), a2),
        criterion("A3", secs(120), a3),
        criterion("A4", secs(600), a4),
        criterion("A5", secs(900), a5),
        criterion("A6", secs(300), a6),
        criterion("A7", secs(60), a7),
        criterion("A8", secs(60), a8),
        criterion("A9", secs(120), a9),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
