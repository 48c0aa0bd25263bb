//! Metrology experiments built on ensembles of protocol trajectories.

use std::collections::BTreeSet;
use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::Rng;

use crate::ensemble::{map_ordered, reduce_ordered, SeriesSum};
use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    self, embed, propagator, r, sigma_x, sigma_z, tensor_product, Operator, StateVector, ZERO,
};
use crate::noise::{derive_seed, effective_hamiltonian, trajectory_stream, DampingModel};
use crate::protocol::{
    CodeWords, CompensationMode, CycleSchedule, ForcedJump, ProtocolParams, SnapshotPlan,
    Trajectory, TrajectoryOptions, CODE_DIMS, SENSING,
};

/// Bootstrap resamples used for the frequency uncertainty.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// `<ψ|X_L|ψ>` with `X_L = |0_L><1_L| + |1_L><0_L|`.
pub fn logical_x_expectation(psi: &StateVector, code: &CodeWords) -> Result<f64> {
    Ok(2.0 * logical_coherence(psi, code)?.re)
}

/// `<1_L|ψ><ψ|0_L>`. Its real part is `<X_L>/2`, its modulus half the
/// phase-insensitive fringe envelope and its argument the relative phase
/// accumulated by `|1_L>` against `|0_L>`.
pub fn logical_coherence(psi: &StateVector, code: &CodeWords) -> Result<Complex64> {
    let (a0, a1) = code.project(psi)?;
    Ok(a1 * a0.conj())
}

fn cycles_for_times(params: &ProtocolParams, times: &[f64]) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let k = t / params.dt;
            if !(t >= 0.0) || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                Err(invalid(format!(
                    "time {t} is not a multiple of dt = {}",
                    params.dt
                )))
            } else {
                Ok(k.round() as usize)
            }
        })
        .collect()
}

/// Per-trajectory observable sampled at cycle boundaries.
fn run_sampled<T, F>(
    params: &ProtocolParams,
    schedule: &CycleSchedule,
    options: &TrajectoryOptions,
    cycles: &[usize],
    index: usize,
    mut observe: F,
) -> Result<Vec<T>>
where
    F: FnMut(&Trajectory<'_>) -> Result<T>,
{
    let horizon = cycles.iter().copied().max().unwrap_or(0);
    let stream = trajectory_stream(params.master_seed, index as u64);
    let mut traj = Trajectory::new(params, schedule, options.clone(), stream)?;
    let mut out = Vec::with_capacity(cycles.len());
    let mut next = cycles.iter().peekable();
    while let Some(&&c) = next.peek() {
        if c == traj.cycle() {
            out.push(observe(&traj)?);
            next.next();
            continue;
        }
        if traj.cycle() >= horizon {
            break;
        }
        traj.step_cycle()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyResult {
    pub t_points: Vec<f64>,
    /// Ensemble-mean `<X_L>` per time point.
    pub visibility: Vec<f64>,
    /// Fitted fringe amplitude `V0` of `V0 cos(2 g t)`.
    pub amplitude: f64,
    pub g_estimate: f64,
    pub g_std: f64,
    pub n_traj: usize,
}

/// Least-squares fit of `v0 cos(2 g t)` with `v0`, `g >= 0` free.
/// Returns `(v0, g)`.
pub fn fit_fringe(t: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if t.len() != y.len() {
        return Err(invalid("fit inputs differ in length"));
    }
    let mut distinct: Vec<f64> = t.iter().copied().filter(|v| *v > 0.0).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Estimation(
            "need at least two distinct positive times to fit a fringe".into(),
        ));
    }
    // Nyquist: 2 g Δ <= π for the smallest sample spacing
    let min_gap = distinct
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(distinct[0]))
        .fold(f64::INFINITY, f64::min);
    let g_max = PI / (2.0 * min_gap);

    // residual after optimally choosing v0 for a given g
    let profile = |g: f64| -> (f64, f64) {
        let (mut yc, mut cc) = (0.0, 0.0);
        for (ti, yi) in t.iter().zip(y) {
            let c = (2.0 * g * ti).cos();
            yc += yi * c;
            cc += c * c;
        }
        if cc <= 0.0 {
            return (f64::INFINITY, 0.0);
        }
        (-yc * yc / cc, yc / cc)
    };

    let grid = 4000;
    let step = g_max / grid as f64;
    let (best, _) = (0..=grid).map(|k| (k, profile(k as f64 * step).0)).fold(
        (0, f64::INFINITY),
        |acc, (k, s)| if s < acc.1 { (k, s) } else { acc },
    );

    // golden-section refinement on the bracketing cell pair
    let (mut a, mut b) = (
        (best as f64 - 1.0).max(0.0) * step,
        (best as f64 + 1.0).min(grid as f64) * step,
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (profile(x1).0, profile(x2).0);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = profile(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = profile(x2).0;
        }
    }
    let g = 0.5 * (a + b);
    let (s, v0) = profile(g);
    if !s.is_finite() {
        return Err(Error::Estimation("degenerate fringe design".into()));
    }
    Ok((v0, g))
}

/// Ramsey fringe from logical-+ with perfect logical readout of `<X_L>`.
pub fn ramsey_experiment(params: &ProtocolParams, t_points: &[f64]) -> Result<RamseyResult> {
    ramsey_experiment_with(params, t_points, true)
}

/// As [`ramsey_experiment`], optionally with the feedback disabled.
pub fn ramsey_experiment_with(
    params: &ProtocolParams,
    t_points: &[f64],
    feedback: bool,
) -> Result<RamseyResult> {
    if t_points.is_empty() {
        return Err(invalid("no Ramsey time points"));
    }
    let horizon = t_points.iter().copied().fold(0.0, f64::max);
    let mut run = params.clone();
    if horizon > 0.0 {
        run.t_final = horizon;
    }
    run.validate()?;
    let cycles = cycles_for_times(&run, t_points)?;
    let order: BTreeSet<usize> = cycles.iter().copied().collect();
    let sorted: Vec<usize> = order.iter().copied().collect();

    let schedule = CycleSchedule::new(&run)?;
    let options = TrajectoryOptions {
        feedback,
        ..TrajectoryOptions::default()
    };
    let code = run.code();
    let per_traj: Vec<Vec<f64>> = map_ordered(run.n_traj, |i| {
        run_sampled(&run, &schedule, &options, &sorted, i, |tr| {
            logical_x_expectation(tr.state(), &code)
        })
    })?;

    // back to the caller's ordering
    let column: Vec<usize> = cycles
        .iter()
        .map(|c| sorted.binary_search(c).expect("present"))
        .collect();
    let mean_curve = |weights: &[usize]| -> Vec<f64> {
        let total: usize = weights.iter().sum();
        column
            .iter()
            .map(|&j| {
                weights
                    .iter()
                    .zip(&per_traj)
                    .map(|(w, v)| *w as f64 * v[j])
                    .sum::<f64>()
                    / total as f64
            })
            .collect()
    };
    let ones = vec![1usize; run.n_traj];
    let visibility = mean_curve(&ones);
    let (amplitude, g_estimate) = fit_fringe(t_points, &visibility)?;

    let g_std = if run.n_traj > 1 {
        let mut rng = trajectory_stream(derive_seed(run.master_seed, 0xB007), 0);
        let mut estimates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let mut w = vec![0usize; run.n_traj];
            for _ in 0..run.n_traj {
                w[rng.gen_range(0..run.n_traj)] += 1;
            }
            estimates.push(fit_fringe(t_points, &mean_curve(&w))?.1);
        }
        estimates.sort_by(|a, b| a.total_cmp(b));
        0.5 * (percentile(&estimates, 0.8413) - percentile(&estimates, 0.1587))
    } else {
        0.0
    };

    Ok(RamseyResult {
        t_points: t_points.to_vec(),
        visibility,
        amplitude,
        g_estimate,
        g_std,
        n_traj: run.n_traj,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Shot-noise-limited standard deviation of `g` from `n` binary readouts
/// with `P(+) = (1 + V cos 2gt)/2`.
pub fn crb_std(visibility: f64, g: f64, t: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("need at least one readout"));
    }
    let p = 0.5 * (1.0 + visibility * (2.0 * g * t).cos());
    let slope = -visibility * t * (2.0 * g * t).sin();
    if slope.abs() < 1e-15 {
        return Err(invalid(
            "non-informative operating point (zero fringe slope)",
        ));
    }
    Ok((p * (1.0 - p) / n as f64).sqrt() / slope.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
}

/// Ordinary least squares; standard errors from the residual scatter.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let w = vec![1.0; x.len()];
    let mut fit = wls(x, y, &w)?;
    let n = x.len() as f64;
    if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - fit.intercept - fit.slope * xi).powi(2))
            .sum();
        let s2 = rss / (n - 2.0);
        fit.slope_stderr *= s2.sqrt();
        fit.intercept_stderr *= s2.sqrt();
    } else {
        fit.slope_stderr = f64::NAN;
        fit.intercept_stderr = f64::NAN;
    }
    Ok(fit)
}

/// Weighted least squares with weights `1/σ²`; standard errors assume the
/// `σ` are the true measurement errors.
pub fn wls(x: &[f64], y: &[f64], weights: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() != weights.len() || x.len() < 2 {
        return Err(Error::Estimation(
            "linear fit needs >= 2 matched points".into(),
        ));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((xi, yi), wi) in x.iter().zip(y).zip(weights) {
        s += wi;
        sx += wi * xi;
        sy += wi * yi;
        sxx += wi * xi * xi;
        sxy += wi * xi * yi;
    }
    let det = s * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return Err(Error::Estimation("degenerate linear design".into()));
    }
    Ok(LinearFit {
        slope: (s * sxy - sx * sy) / det,
        intercept: (sxx * sy - sx * sxy) / det,
        slope_stderr: (s / det).sqrt(),
        intercept_stderr: (sxx / det).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Standard error of each `y` (NaN where not applicable).
    pub y_stderr: Vec<f64>,
    /// Points whose `y` is a lower bound only.
    pub censored: Vec<bool>,
    /// Log–log fit (see the producing function for the axes).
    pub fit_slope: f64,
    pub fit_intercept: f64,
    /// Weighted linear fit of `y` against `x`, where meaningful.
    pub linear: Option<LinearFit>,
}

/// Mean logical infidelity `1 - |<ψ_ideal(T)|ψ(T)>|²` after `t_final` for
/// each cycle length, with a log–log OLS fit of infidelity against `dt`.
pub fn dt_scaling_sweep(base: &ProtocolParams, dt_values: &[f64]) -> Result<SweepResult> {
    if (base.eta - 1.0).abs() > 0.0 {
        return Err(invalid("the dt sweep assumes perfect detection (eta = 1)"));
    }
    let mut means = Vec::with_capacity(dt_values.len());
    let mut errs = Vec::with_capacity(dt_values.len());
    for (k, &dt) in dt_values.iter().enumerate() {
        let params = ProtocolParams {
            dt,
            master_seed: derive_seed(base.master_seed, k as u64),
            ..base.clone()
        };
        let (m, e) = mean_final_infidelity(&params)?;
        means.push(m);
        errs.push(e);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = dt_values
        .iter()
        .zip(&means)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    let (fit_slope, fit_intercept) = match ols(&lx, &ly) {
        Ok(f) => (f.slope, f.intercept),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let linear = if errs.iter().all(|e| *e > 0.0) {
        let w: Vec<f64> = errs.iter().map(|e| 1.0 / (e * e)).collect();
        wls(dt_values, &means, &w).ok()
    } else {
        None
    };
    Ok(SweepResult {
        x_values: dt_values.to_vec(),
        y_values: means,
        y_stderr: errs,
        censored: vec![false; dt_values.len()],
        fit_slope,
        fit_intercept,
        linear,
    })
}

/// `(mean, standard error)` of the final infidelity against the ideal
/// signal-only evolution of logical-+.
pub fn mean_final_infidelity(params: &ProtocolParams) -> Result<(f64, f64)> {
    params.validate()?;
    let schedule = CycleSchedule::new(params)?;
    let n = params.n_cycles();
    let ideal = params.code().ideal_state(params.g, params.t_final);
    let options = TrajectoryOptions::default();
    let (s, s2, count) = reduce_ordered(
        params.n_traj,
        || (0.0f64, 0.0f64, 0usize),
        |i| {
            let v = run_sampled(params, &schedule, &options, &[n], i, |tr| {
                Ok(1.0 - hilbert::fidelity(&ideal, tr.state())?)
            })?;
            Ok(v[0])
        },
        |acc, v| {
            acc.0 += v;
            acc.1 += v * v;
            acc.2 += 1;
        },
        |acc, b| {
            acc.0 += b.0;
            acc.1 += b.1;
            acc.2 += b.2;
        },
    )?;
    let n = count as f64;
    let mean = s / n;
    let var = if count > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// Ensemble coherence `mean <1_L|ψ><ψ|0_L>` and jump statistics on a grid of
/// cycle boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSeries {
    pub times: Vec<f64>,
    pub coherence: Vec<Complex64>,
    pub mean_x: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub mean_jumps: Vec<f64>,
    pub mean_detected: Vec<f64>,
    pub n_traj: usize,
}

impl CoherenceSeries {
    /// Phase-insensitive fringe envelope `2 |mean coherence|`.
    pub fn envelope(&self) -> Vec<f64> {
        self.coherence.iter().map(|c| 2.0 * c.norm()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    coherence: Complex64,
    x: f64,
    fidelity: f64,
    jumps: f64,
    detected: f64,
}

impl std::ops::AddAssign for Sample {
    fn add_assign(&mut self, o: Sample) {
        self.coherence += o.coherence;
        self.x += o.x;
        self.fidelity += o.fidelity;
        self.jumps += o.jumps;
        self.detected += o.detected;
    }
}

/// Runs `params.n_traj` trajectories from logical-+ and averages logical
/// observables at the requested cycles.
pub fn coherence_series(
    params: &ProtocolParams,
    cycles: &[usize],
    feedback: bool,
) -> Result<CoherenceSeries> {
    params.validate()?;
    let mut sorted = cycles.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let n = params.n_cycles();
    if sorted.last().is_some_and(|&c| c > n) {
        return Err(invalid("sample cycle beyond t_final"));
    }
    let schedule = CycleSchedule::new(params)?;
    let options = TrajectoryOptions {
        feedback,
        ..TrajectoryOptions::default()
    };
    let code = params.code();
    let sums = reduce_ordered(
        params.n_traj,
        || SeriesSum::<Sample>::new(sorted.len()),
        |i| {
            run_sampled(params, &schedule, &options, &sorted, i, |tr| {
                let psi = tr.state();
                let coherence = logical_coherence(psi, &code)?;
                let ideal = code.ideal_state(params.g, tr.time());
                let (jumps, detected) = tr.jump_counts();
                Ok(Sample {
                    coherence,
                    x: 2.0 * coherence.re,
                    fidelity: hilbert::fidelity(&ideal, psi)?,
                    jumps: jumps as f64,
                    detected: detected as f64,
                })
            })
        },
        |acc, v| acc.add(&v),
        |acc, b| acc.merge(b),
    )?;
    let inv = 1.0 / sums.count as f64;
    let pick = |f: fn(&Sample) -> f64| sums.sums.iter().map(|s| f(s) * inv).collect::<Vec<f64>>();
    Ok(CoherenceSeries {
        times: sorted.iter().map(|&c| c as f64 * params.dt).collect(),
        coherence: sums.sums.iter().map(|s| s.coherence * inv).collect(),
        mean_x: pick(|s| s.x),
        mean_fidelity: pick(|s| s.fidelity),
        mean_jumps: pick(|s| s.jumps),
        mean_detected: pick(|s| s.detected),
        n_traj: sums.count,
    })
}

/// First time the envelope falls to `1/e`, linearly interpolated between
/// samples. `None` when it never does within the series.
pub fn coherence_time(times: &[f64], envelope: &[f64]) -> Option<f64> {
    let level = 1.0 / E;
    for k in 1..times.len().min(envelope.len()) {
        if envelope[k] <= level {
            let (t0, t1, e0, e1) = (times[k - 1], times[k], envelope[k - 1], envelope[k]);
            if e0 == e1 {
                return Some(t1);
            }
            return Some(t0 + (e0 - level) * (t1 - t0) / (e0 - e1));
        }
    }
    None
}

/// Samples per coherence-time search; the envelope is resolved on cycle
/// boundaries every `ceil(N / ENVELOPE_SAMPLES)` cycles.
pub const ENVELOPE_SAMPLES: usize = 4000;

/// Effective coherence time per detection efficiency. `y` holds `T_eff`
/// (censored at `t_final` when the envelope never reaches `1/e`); the fit is
/// OLS of `ln T_eff` against `ln(1 - eta)` over uncensored `eta < 1` points.
pub fn eta_coherence_sweep(base: &ProtocolParams, eta_values: &[f64]) -> Result<SweepResult> {
    let eta_max = eta_values
        .iter()
        .copied()
        .filter(|e| *e < 1.0)
        .fold(0.0, f64::max);
    if base.gamma * base.dt > 0.1 * (1.0 - eta_max) {
        return Err(invalid(format!(
            "dt: gamma*dt = {} must be <= 0.1*(1 - eta_max) = {} so that cycle error stays below detection error",
            base.gamma * base.dt,
            0.1 * (1.0 - eta_max)
        )));
    }
    let n = base.n_cycles();
    let stride = n.div_ceil(ENVELOPE_SAMPLES).max(1);
    let mut cycles: Vec<usize> = (0..=n).step_by(stride).collect();
    if *cycles.last().expect("non-empty") != n {
        cycles.push(n);
    }
    let mut t_eff = Vec::new();
    let mut censored = Vec::new();
    for (k, &eta) in eta_values.iter().enumerate() {
        let params = ProtocolParams {
            eta,
            master_seed: derive_seed(base.master_seed, k as u64),
            ..base.clone()
        };
        let series = coherence_series(&params, &cycles, true)?;
        match coherence_time(&series.times, &series.envelope()) {
            Some(t) => {
                t_eff.push(t);
                censored.push(false);
            }
            None => {
                t_eff.push(base.t_final);
                censored.push(true);
            }
        }
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = eta_values
        .iter()
        .zip(&t_eff)
        .zip(&censored)
        .filter(|((e, _), c)| **e < 1.0 && !**c)
        .map(|((e, t), _)| ((1.0 - e).ln(), t.ln()))
        .unzip();
    let (fit_slope, fit_intercept) = match ols(&lx, &ly) {
        Ok(f) => (f.slope, f.intercept),
        Err(_) => (f64::NAN, f64::NAN),
    };
    Ok(SweepResult {
        x_values: eta_values.to_vec(),
        y_values: t_eff,
        y_stderr: vec![f64::NAN; eta_values.len()],
        censored,
        fit_slope,
        fit_intercept,
        linear: None,
    })
}

/// Wraps an angle into `(-π, π]`.
fn wrap(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

/// Echo cycles for a `g σz ⊗ I` signal on the states `|00>`, `|11>`: the
/// relative phase `arg(<11|ψ><ψ|00>)`, unwrapped, at every cycle boundary.
/// Emissions are not sampled; the no-jump branch is renormalized each cycle.
pub fn sigma_z_phase_trace(g: f64, gamma: f64, dt: f64, t_final: f64) -> Result<Vec<(f64, f64)>> {
    let signal = tensor_product(&sigma_z().scaled(r(g)), &Operator::identity(2));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi0 = StateVector::new(CODE_DIMS.to_vec(), vec![r(s), ZERO, ZERO, r(s)])?;
    let pulse = embed(&sigma_x(), &CODE_DIMS, SENSING)?;
    echo_phase_trace(&signal, &pulse, psi0, gamma, dt, t_final, |psi| {
        Ok(psi.amps()[3] * psi.amps()[0].conj())
    })
}

/// Contrast run: `g σx ⊗ I` on the proper code with the same echo cycles;
/// the relative logical phase grows as `2 g t`.
pub fn sigma_x_phase_trace(g: f64, gamma: f64, dt: f64, t_final: f64) -> Result<Vec<(f64, f64)>> {
    let code = CodeWords::new(0.0);
    let signal = crate::protocol::signal_hamiltonian(g, 0.0);
    let pulse = embed(&sigma_x(), &CODE_DIMS, SENSING)?;
    echo_phase_trace(
        &signal,
        &pulse,
        code.logical_plus(),
        gamma,
        dt,
        t_final,
        |psi| logical_coherence(psi, &code),
    )
}

fn echo_phase_trace<F>(
    signal: &Operator,
    pulse: &Operator,
    psi0: StateVector,
    gamma: f64,
    dt: f64,
    t_final: f64,
    coherence: F,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&StateVector) -> Result<Complex64>,
{
    let params = ProtocolParams {
        gamma,
        g: 0.0,
        dt,
        t_final,
        mode: CompensationMode::PulsedEcho,
        ..ProtocolParams::default()
    };
    params.validate()?;
    let h_eff = effective_hamiltonian(signal, &DampingModel::new(gamma, SENSING)?, &CODE_DIMS)?;
    let half = propagator(&h_eff, dt / 2.0)?;
    let cycle = pulse.matmul(&half).matmul(pulse).matmul(&half);

    let mut psi = psi0;
    let mut last = coherence(&psi)?.arg();
    let mut total = 0.0;
    let mut out = vec![(0.0, 0.0)];
    for k in 1..=params.n_cycles() {
        psi = hilbert::apply(&cycle, &psi)?.normalized()?;
        let now = coherence(&psi)?.arg();
        total += wrap(now - last);
        last = now;
        out.push((k as f64 * dt, total));
    }
    Ok(out)
}

/// Accumulated `σz`-signal phase after `t_final` under echo cycles.
pub fn sigma_z_failure_demo(g: f64, gamma: f64, dt: f64, t_final: f64) -> Result<f64> {
    Ok(sigma_z_phase_trace(g, gamma, dt, t_final)?
        .last()
        .map(|p| p.1)
        .unwrap_or(0.0))
}

/// Infidelity to the ideal one-cycle state after a detected emission forced
/// at the end of `substep` of the first cycle and the subsequent correction.
pub fn recovery_infidelity(params: &ProtocolParams, substep: usize) -> Result<f64> {
    params.validate()?;
    if substep >= params.substeps {
        return Err(invalid(format!(
            "substep {substep} outside 0..{}",
            params.substeps
        )));
    }
    let schedule = CycleSchedule::new(params)?;
    let options = TrajectoryOptions {
        random_jumps: false,
        forced_jump: Some(ForcedJump {
            cycle: 0,
            substep,
            detected: true,
        }),
        ..TrajectoryOptions::default()
    };
    let mut traj = Trajectory::new(
        params,
        &schedule,
        options,
        trajectory_stream(params.master_seed, 0),
    )?;
    traj.step_cycle()?;
    let ideal = params.code().ideal_state(params.g, params.dt);
    Ok(1.0 - hilbert::fidelity(&ideal, traj.state())?)
}

/// Largest [`recovery_infidelity`] over all emission substeps.
pub fn worst_recovery_infidelity(params: &ProtocolParams) -> Result<f64> {
    (0..params.substeps).try_fold(
        0.0f64,
        |acc, k| Ok(acc.max(recovery_infidelity(params, k)?)),
    )
}

/// One row per sample of the `sense` experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseRow {
    pub time: f64,
    pub mean_x_logical: f64,
    pub mean_fidelity: f64,
    pub n_jumps_mean: f64,
    pub n_detected_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseReport {
    pub rows: Vec<SenseRow>,
    /// `2 |mean coherence|` at `t_final`.
    pub final_visibility: f64,
    /// `arg(mean <1_L|ψ><ψ|0_L>)` at `t_final`, unwrapped along the samples.
    pub final_phase: f64,
    pub final_fidelity: f64,
}

/// Error-corrected sensing run sampled every `ceil(N/200)` cycles.
pub fn sense_experiment(params: &ProtocolParams) -> Result<SenseReport> {
    let n = params.n_cycles();
    let stride = params.default_snapshot_stride();
    let plan = SnapshotPlan::Stride(stride);
    let cycles: Vec<usize> = (0..=n).filter(|&c| c == 0 || plan.wants(c, n)).collect();
    let series = coherence_series(params, &cycles, true)?;
    let mut phase = 0.0;
    let mut last = series.coherence[0].arg();
    for c in &series.coherence[1..] {
        phase += wrap(c.arg() - last);
        last = c.arg();
    }
    let rows = (1..series.times.len())
        .map(|k| SenseRow {
            time: series.times[k],
            mean_x_logical: series.mean_x[k],
            mean_fidelity: series.mean_fidelity[k],
            n_jumps_mean: series.mean_jumps[k],
            n_detected_mean: series.mean_detected[k],
        })
        .collect();
    let envelope = series.envelope();
    Ok(SenseReport {
        rows,
        final_visibility: *envelope.last().expect("non-empty"),
        final_phase: phase,
        final_fidelity: *series.mean_fidelity.last().expect("non-empty"),
    })
}
