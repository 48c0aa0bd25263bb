//! Monte-Carlo checks of the trajectory sampler against exact results.

use std::collections::BTreeSet;

use envsense_core::ensemble::reduce_ordered;
use envsense_core::estimate::{coherence_series, coherence_time};
use envsense_core::noise::trajectory_stream;
use envsense_core::oracle::{
    lindblad_series, trace_distance, DensityAccumulator, DensityMatrix, LindbladModel,
};
use envsense_core::protocol::{
    CompensationMode, CycleSchedule, ProtocolParams, Trajectory, TrajectoryOptions,
};

/// Kolmogorov–Smirnov distance between a sample and `Exp(rate)`.
fn ks_exponential(mut sample: Vec<f64>, rate: f64) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-rate * x).exp();
            (cdf - i as f64 / n)
                .abs()
                .max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn first_emission_times_are_exponential() {
    // with the drive holding the direction, the codeword excited population
    // stays 1/2 and the emission rate is 2γ · 1/2 = γ
    let params = ProtocolParams {
        g: 0.0,
        dt: 1e-3,
        t_final: 8.0,
        ..ProtocolParams::default()
    };
    let schedule = CycleSchedule::new(&params).unwrap();
    let n = 2000;
    let options = TrajectoryOptions {
        feedback: false,
        ..TrajectoryOptions::default()
    };
    let times: Vec<f64> = (0..n)
        .filter_map(|i| {
            let mut tr = Trajectory::new(
                &params,
                &schedule,
                options.clone(),
                trajectory_stream(11, i),
            )
            .unwrap();
            while tr.events().is_empty() && tr.cycle() < params.n_cycles() {
                tr.step_cycle().unwrap();
            }
            tr.events().first().map(|e| e.time)
        })
        .collect();
    // a trajectory surviving 8/γ has probability e^{-8}
    assert!(times.len() as f64 > 0.99 * n as f64);
    let d = ks_exponential(times, params.gamma);
    // 1% critical value 1.63/√n
    assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
}

#[test]
fn detected_fraction_follows_efficiency() {
    let params = ProtocolParams {
        eta: 0.5,
        dt: 1e-3,
        t_final: 1.0,
        n_traj: 400,
        ..ProtocolParams::default()
    };
    let schedule = CycleSchedule::new(&params).unwrap();
    let (total, detected) = reduce_ordered(
        params.n_traj,
        || (0usize, 0usize),
        |i| {
            let mut tr = Trajectory::new(
                &params,
                &schedule,
                TrajectoryOptions::default(),
                trajectory_stream(params.master_seed, i as u64),
            )?;
            for _ in 0..params.n_cycles() {
                tr.step_cycle()?;
            }
            Ok(tr.jump_counts())
        },
        |a, (t, d)| {
            a.0 += t;
            a.1 += d;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )
    .unwrap();
    let frac = detected as f64 / total as f64;
    let sigma = (0.25 / total as f64).sqrt();
    assert!((frac - 0.5).abs() < 4.0 * sigma, "{frac} of {total}");
}

fn unconditional_distance(params: &ProtocolParams, sample_cycles: &[usize]) -> f64 {
    let schedule = CycleSchedule::new(params).unwrap();
    let options = TrajectoryOptions {
        feedback: false,
        ..TrajectoryOptions::default()
    };
    let wanted: BTreeSet<usize> = sample_cycles.iter().copied().collect();
    let accs = reduce_ordered(
        params.n_traj,
        || vec![DensityAccumulator::new(4); wanted.len()],
        |i| {
            let mut tr = Trajectory::new(
                params,
                &schedule,
                options.clone(),
                trajectory_stream(params.master_seed, i as u64),
            )?;
            let mut states = Vec::new();
            let last = *wanted.iter().next_back().unwrap();
            while tr.cycle() <= last {
                if wanted.contains(&tr.cycle()) {
                    states.push(tr.state().clone());
                }
                if tr.cycle() == last {
                    break;
                }
                tr.step_cycle()?;
            }
            Ok(states)
        },
        |acc, states| {
            for (a, s) in acc.iter_mut().zip(&states) {
                a.add(s).unwrap();
            }
        },
        |acc, other| {
            for (a, b) in acc.iter_mut().zip(other) {
                a.merge(b);
            }
        },
    )
    .unwrap();
    let model = LindbladModel::for_protocol(params).unwrap();
    let rho0 = DensityMatrix::from_pure(&params.code().logical_plus()).unwrap();
    let series = lindblad_series(
        &rho0,
        &model,
        params.dt,
        2,
        *wanted.iter().next_back().unwrap(),
    )
    .unwrap();
    wanted
        .iter()
        .zip(&accs)
        .map(|(&k, acc)| {
            let exact = if k == 0 {
                rho0.clone()
            } else {
                series[k - 1].clone()
            };
            trace_distance(&acc.average().unwrap(), &exact).unwrap()
        })
        .fold(0.0, f64::max)
}

#[test]
fn unconditional_average_matches_lindblad_drive() {
    let params = ProtocolParams {
        dt: 1e-2,
        n_traj: 3000,
        ..ProtocolParams::default()
    };
    let d = unconditional_distance(&params, &[0, 50, 100, 150, 200]);
    assert!(d < 0.04, "{d}");
}

#[test]
fn unconditional_average_matches_lindblad_echo() {
    let params = ProtocolParams {
        dt: 1e-2,
        n_traj: 3000,
        mode: CompensationMode::PulsedEcho,
        gamma: 0.5,
        ..ProtocolParams::default()
    };
    let d = unconditional_distance(&params, &[0, 100, 200, 300, 400]);
    assert!(d < 0.04, "{d}");
}

#[test]
fn uncorrected_coherence_time_matches_channel() {
    let params = ProtocolParams {
        dt: 1e-2,
        t_final: 2.0,
        n_traj: 2000,
        eta: 0.0,
        ..ProtocolParams::default()
    };
    let cycles: Vec<usize> = (0..=params.n_cycles()).collect();
    let series = coherence_series(&params, &cycles, true).unwrap();
    let t_traj = coherence_time(&series.times, &series.envelope()).unwrap();

    let model = LindbladModel::for_protocol(&params).unwrap();
    let code = params.code();
    let rho0 = DensityMatrix::from_pure(&code.logical_plus()).unwrap();
    let exact = lindblad_series(&rho0, &model, params.dt, 2, params.n_cycles()).unwrap();
    let mut env = vec![1.0];
    env.extend(
        exact
            .iter()
            .map(|r| 2.0 * r.element(&code.one(), &code.zero()).unwrap().norm()),
    );
    let t_exact = coherence_time(&series.times, &env).unwrap();
    assert!(
        (t_traj / t_exact - 1.0).abs() < 0.1,
        "{t_traj} vs {t_exact}"
    );
}

#[test]
fn feedback_beats_uncorrected_channel() {
    let params = ProtocolParams {
        dt: 1e-3,
        t_final: 3.0,
        n_traj: 500,
        ..ProtocolParams::default()
    };
    let n = params.n_cycles();
    let on = coherence_series(&params, &[n], true).unwrap().envelope()[0];
    let off = coherence_series(&params, &[n], false).unwrap().envelope()[0];
    assert!(on >= 10.0 * (-3.0f64).exp(), "{on}");
    assert!(on > off, "{on} vs {off}");
}
