//! Measurements behind the `validate` subcommand and the acceptance suite.
//!
//! Each `measure_*` function returns raw numbers; [`run_all`] applies the
//! built-in thresholds at sizes small enough for an interactive run.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;

use envsense_core::ensemble::reduce_ordered;
use envsense_core::estimate::{
    coherence_series, ramsey_experiment, sigma_x_phase_trace, sigma_z_failure_demo,
    worst_recovery_infidelity,
};
use envsense_core::hilbert::{self, r, Operator, StateVector, ZERO};
use envsense_core::noise::{effective_hamiltonian, step_no_jump, trajectory_stream, DampingModel};
use envsense_core::oracle::{
    analytic_damping, lindblad_series, trace_distance, DensityAccumulator, DensityMatrix,
    LindbladModel,
};
use envsense_core::protocol::{
    compensation_decay_trace, cycle_hamiltonian, CompensationMode, CycleSchedule, ProtocolParams,
    Trajectory, TrajectoryOptions, CODE_DIMS,
};
use envsense_core::Result;
use num_complex::Complex64;

/// Initial sensing amplitudes used for the damping checks.
pub fn damping_inputs() -> Vec<(Complex64, Complex64)> {
    vec![
        (r(1.0), ZERO),
        (ZERO, r(1.0)),
        (r(0.6), r(0.8)),
        (r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2)),
    ]
}

/// Composes `steps` no-jump steps up to `t` and compares with the closed
/// form. Returns `(max amplitude error, cumulative jump probability error)`.
pub fn measure_closed_form(
    alpha: Complex64,
    beta: Complex64,
    gamma: f64,
    t: f64,
    steps: usize,
) -> Result<(f64, f64)> {
    let model = DampingModel::new(gamma, 0)?;
    let h_eff = effective_hamiltonian(&Operator::zeros(2), &model, &[2])?;
    let mut psi = StateVector::qubit(alpha, beta);
    let mut cumulative = 0.0;
    for _ in 0..steps {
        let (next, p) = step_no_jump(&psi, &h_eff, t / steps as f64)?;
        cumulative += p;
        psi = next;
    }
    let (branch, weight) = analytic_damping(alpha, beta, gamma, t)?;
    let amp_err = psi
        .amps()
        .iter()
        .zip(branch.amps())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok((amp_err, (cumulative - weight).abs()))
}

/// Single-qubit compensation over `cycles` steps of `dt`:
/// `(max direction error, max |norm - e^{-gamma beta² t}|)`.
pub fn measure_single_stationarity(
    alpha: f64,
    beta: f64,
    gamma: f64,
    dt: f64,
    cycles: usize,
) -> Result<(f64, f64)> {
    let trace = compensation_decay_trace(alpha, beta, gamma, dt * cycles as f64, cycles)?;
    Ok(trace
        .iter()
        .fold((0.0f64, 0.0f64), |(d, n), &(t, norm, dir)| {
            (
                d.max(dir),
                n.max((norm - (-gamma * beta * beta * t).exp()).abs()),
            )
        }))
}

/// Encoded drive with `g = 0` applied to both codewords and logical-+:
/// `(max direction error, max |norm - e^{-gamma t / 2}|)`.
pub fn measure_encoded_stationarity(
    gamma: f64,
    phi: f64,
    dt: f64,
    cycles: usize,
) -> Result<(f64, f64)> {
    let params = ProtocolParams {
        gamma,
        g: 0.0,
        phi,
        dt,
        mode: CompensationMode::ContinuousDrive,
        ..ProtocolParams::default()
    };
    let h_eff = effective_hamiltonian(&cycle_hamiltonian(&params), &params.damping(), &CODE_DIMS)?;
    let u = hilbert::propagator(&h_eff, dt)?;
    let code = params.code();
    let (mut dir, mut norm) = (0.0f64, 0.0f64);
    for start in [code.zero(), code.one(), code.logical_plus()] {
        let mut psi = start.clone();
        for k in 1..=cycles {
            u.apply_in_place(psi.amps_mut());
            let t = k as f64 * dt;
            dir = dir.max(1.0 - hilbert::fidelity(&start, &psi)?);
            norm = norm.max((psi.norm() - (-gamma * t / 2.0).exp()).abs());
        }
    }
    Ok((dir, norm))
}

/// Largest trace distance between the feedback-free trajectory average and
/// the Lindblad solution at the given times (multiples of `params.dt`).
pub fn measure_unconditional_distance(params: &ProtocolParams, times: &[f64]) -> Result<f64> {
    params.validate()?;
    let cycles: BTreeSet<usize> = times
        .iter()
        .map(|t| (t / params.dt).round() as usize)
        .collect();
    let last = *cycles.iter().next_back().unwrap_or(&0);
    let schedule = CycleSchedule::new(params)?;
    let options = TrajectoryOptions {
        feedback: false,
        ..TrajectoryOptions::default()
    };
    let averages = reduce_ordered(
        params.n_traj,
        || vec![DensityAccumulator::new(4); cycles.len()],
        |i| {
            let stream = trajectory_stream(params.master_seed, i as u64);
            let mut tr = Trajectory::new(params, &schedule, options.clone(), stream)?;
            let mut states = Vec::with_capacity(cycles.len());
            loop {
                if cycles.contains(&tr.cycle()) {
                    states.push(tr.state().clone());
                }
                if tr.cycle() >= last {
                    break;
                }
                tr.step_cycle()?;
            }
            Ok(states)
        },
        |acc, states| {
            for (a, s) in acc.iter_mut().zip(&states) {
                a.add(s).expect("dimension fixed");
            }
        },
        |acc, other| {
            for (a, b) in acc.iter_mut().zip(other) {
                a.merge(b);
            }
        },
    )?;
    let model = LindbladModel::for_protocol(params)?;
    let rho0 = DensityMatrix::from_pure(&params.code().logical_plus())?;
    let series = lindblad_series(
        &rho0,
        &model,
        params.dt,
        model.required_substeps(params.dt),
        last,
    )?;
    let mut worst = 0.0f64;
    for (&k, acc) in cycles.iter().zip(&averages) {
        let exact = if k == 0 { &rho0 } else { &series[k - 1] };
        worst = worst.max(trace_distance(&acc.average()?, exact)?);
    }
    Ok(worst)
}

/// Envelope `2|mean coherence|` at `t_final` with and without feedback.
pub fn measure_feedback_gain(params: &ProtocolParams) -> Result<(f64, f64)> {
    let n = params.n_cycles();
    let on = coherence_series(params, &[n], true)?.envelope()[0];
    let off = coherence_series(params, &[n], false)?.envelope()[0];
    Ok((on, off))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// The built-in oracle and invariant suite.
pub fn run_all() -> Vec<Check> {
    vec![
        check(
            "propagator-unitarity",
            (|| {
                let h = envsense_core::protocol::signal_hamiltonian(0.3, 0.7);
                let u = hilbert::propagator(
                    &(&h + &envsense_core::protocol::compensation_hamiltonian_encoded(1.0, 0.7)),
                    0.5,
                )?;
                let e = u.unitarity_error();
                Ok((e < 1e-10, format!("unitarity error {e:.2e}")))
            })(),
        ),
        check(
            "no-jump-closed-form",
            (|| {
                let mut worst = 0.0f64;
                for (a, b) in damping_inputs() {
                    for gamma in [0.5, 1.0] {
                        let (x, y) = measure_closed_form(a, b, gamma, 1.0, 100)?;
                        worst = worst.max(x).max(y);
                    }
                }
                Ok((worst <= 1e-10, format!("max deviation {worst:.2e}")))
            })(),
        ),
        check(
            "compensation-single",
            (|| {
                let (d, n) = measure_single_stationarity(0.6, 0.8, 1.0, 1e-2, 100)?;
                Ok((
                    d <= 1e-6 && n <= 1e-6,
                    format!("direction {d:.2e}, norm {n:.2e}"),
                ))
            })(),
        ),
        check(
            "compensation-encoded",
            (|| {
                let (d, n) = measure_encoded_stationarity(1.0, 0.4, 1e-2, 100)?;
                Ok((
                    d <= 1e-6 && n <= 1e-6,
                    format!("direction {d:.2e}, norm {n:.2e}"),
                ))
            })(),
        ),
        check(
            "recovery-residual",
            (|| {
                let mut worst_ratio = 0.0f64;
                for mode in [
                    CompensationMode::ContinuousDrive,
                    CompensationMode::PulsedEcho,
                ] {
                    let p = ProtocolParams {
                        mode,
                        ..ProtocolParams::default()
                    };
                    let inf = worst_recovery_infidelity(&p)?;
                    worst_ratio = worst_ratio.max(inf / ((p.gamma + p.g) * p.dt));
                }
                Ok((
                    worst_ratio <= 10.0,
                    format!("infidelity / ((gamma+g)dt) = {worst_ratio:.2e}"),
                ))
            })(),
        ),
        check(
            "unconditional-vs-lindblad",
            (|| {
                let mut worst = 0.0f64;
                for mode in [
                    CompensationMode::ContinuousDrive,
                    CompensationMode::PulsedEcho,
                ] {
                    let p = ProtocolParams {
                        dt: 1e-2,
                        n_traj: 2000,
                        mode,
                        ..ProtocolParams::default()
                    };
                    worst = worst.max(measure_unconditional_distance(&p, &[0.5, 1.0, 2.0])?);
                }
                Ok((
                    worst <= 0.05,
                    format!("max trace distance {worst:.3} (n=2000)"),
                ))
            })(),
        ),
        check(
            "sigma-z-echo-cancellation",
            (|| {
                let phase = sigma_z_failure_demo(0.3, 0.0, 0.01, 1.0)?;
                let contrast = sigma_x_phase_trace(0.3, 0.0, 0.01, 1.0)?
                    .last()
                    .map(|p| p.1)
                    .unwrap_or(0.0);
                let ok = phase.abs() <= 2.0 * 0.3 * 0.01 && (contrast - 0.6).abs() < 1e-6;
                Ok((
                    ok,
                    format!("sigma_z phase {phase:.2e}, sigma_x phase {contrast:.9}"),
                ))
            })(),
        ),
        check(
            "noiseless-ramsey",
            (|| {
                let p = ProtocolParams {
                    gamma: 0.0,
                    dt: 1e-2,
                    n_traj: 2,
                    ..ProtocolParams::default()
                };
                let t: Vec<f64> = (1..=20).map(|k| k as f64 * 0.25).collect();
                let res = ramsey_experiment(&p, &t)?;
                let err = (res.g_estimate - p.g).abs();
                Ok((err < 1e-6, format!("g error {err:.2e}")))
            })(),
        ),
        check(
            "feedback-gain",
            (|| {
                let p = ProtocolParams {
                    dt: 1e-3,
                    t_final: 3.0,
                    n_traj: 200,
                    ..ProtocolParams::default()
                };
                let (on, off) = measure_feedback_gain(&p)?;
                Ok((
                    on >= 10.0 * (-3.0f64).exp() && on > off,
                    format!("visibility {on:.3} vs {off:.3} uncorrected"),
                ))
            })(),
        ),
        check(
            "thread-independence",
            (|| {
                let p = ProtocolParams {
                    dt: 1e-2,
                    n_traj: 130,
                    eta: 0.9,
                    ..ProtocolParams::default()
                };
                let cycles: Vec<usize> = (0..=p.n_cycles()).step_by(20).collect();
                let runs: Vec<Vec<u64>> = [1usize, 3]
                    .iter()
                    .map(|&n| {
                        let pool = rayon::ThreadPoolBuilder::new()
                            .num_threads(n)
                            .build()
                            .expect("pool");
                        pool.install(|| coherence_series(&p, &cycles, true))
                            .map(|s| s.mean_x.iter().map(|v| v.to_bits()).collect())
                    })
                    .collect::<Result<_>>()?;
                Ok((
                    runs[0] == runs[1],
                    "bitwise comparison of 1 vs 3 workers".into(),
                ))
            })(),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_suite_passes() {
        for c in run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
