//! Error-corrected sensing with a monitored environment.
//!
//! A sensing qubit (subsystem 0, subject to amplitude damping) and a robust
//! qubit (subsystem 1, noiseless) hold the code
//!
//! ```text
//! |0_L> = (|0> + e^{iφ}|1>)/√2 ⊗ |0>
//! |1_L> = (|0> - e^{iφ}|1>)/√2 ⊗ |1>
//! ```
//!
//! whose members are eigenstates of the signal `g(cos φ σx + sin φ σy) ⊗ I`.
//! Each error-correction cycle of length `dt` evolves the pair under signal,
//! compensation and no-jump damping; emitted quanta are detected with
//! efficiency `eta`, and a cycle containing a detected emission ends with a
//! reset of the sensing qubit followed by the recovery unitary `V`.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    self, embed, propagator, r, sigma_x, sigma_y, tensor_product, Operator, StateVector, ONE, ZERO,
};
use crate::noise::{self, effective_hamiltonian, DampingModel, DetectionModel, JumpEvent, Stream};

pub const SENSING: usize = 0;
pub const ROBUST: usize = 1;
pub const CODE_DIMS: [usize; 2] = [2, 2];

/// Sign multiplying every compensation Hamiltonian. Fixed by the
/// stationarity tests below for `σy = [[0, -i], [i, 0]]` and `|1>` excited.
pub const COMPENSATION_SIGN: f64 = 1.0;

/// Default number of jump-resolution substeps per cycle.
pub const DEFAULT_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeWords {
    pub phi: f64,
}

impl CodeWords {
    pub fn new(phi: f64) -> Self {
        Self { phi }
    }

    fn sensing_phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi)
    }

    pub fn zero(&self) -> StateVector {
        let s = FRAC_1_SQRT_2;
        let e = self.sensing_phase() * s;
        StateVector::new(CODE_DIMS.to_vec(), vec![r(s), ZERO, e, ZERO]).expect("static dims")
    }

    pub fn one(&self) -> StateVector {
        let s = FRAC_1_SQRT_2;
        let e = self.sensing_phase() * s;
        StateVector::new(CODE_DIMS.to_vec(), vec![ZERO, r(s), ZERO, -e]).expect("static dims")
    }

    /// `c0 |0_L> + c1 |1_L>` without a normalization check.
    pub fn logical(&self, c0: Complex64, c1: Complex64) -> StateVector {
        self.zero().combine(c0, &self.one(), c1).expect("same dims")
    }

    /// `(|0_L> + |1_L>)/√2`, the Ramsey starting state.
    pub fn logical_plus(&self) -> StateVector {
        self.logical(r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2))
    }

    /// Logical amplitudes `(<0_L|ψ>, <1_L|ψ>)`.
    pub fn project(&self, psi: &StateVector) -> Result<(Complex64, Complex64)> {
        Ok((
            hilbert::inner(&self.zero(), psi)?,
            hilbert::inner(&self.one(), psi)?,
        ))
    }

    /// Noiseless target `exp(-i H_sig t)` applied to the logical-+ state:
    /// `(e^{-igt}|0_L> + e^{igt}|1_L>)/√2`.
    pub fn ideal_state(&self, g: f64, t: f64) -> StateVector {
        let s = FRAC_1_SQRT_2;
        self.logical(
            Complex64::from_polar(s, -g * t),
            Complex64::from_polar(s, g * t),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompensationMode {
    /// Two sensing-qubit π pulses per cycle, at `dt/2` and `dt`.
    PulsedEcho,
    /// Continuous state-dependent compensating drive.
    ContinuousDrive,
}

impl fmt::Display for CompensationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompensationMode::PulsedEcho => write!(f, "echo"),
            CompensationMode::ContinuousDrive => write!(f, "drive"),
        }
    }
}

/// Physical and numerical knobs of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub gamma: f64,
    pub g: f64,
    pub phi: f64,
    /// Error-correction cycle length.
    pub dt: f64,
    pub t_final: f64,
    pub eta: f64,
    pub mode: CompensationMode,
    pub n_traj: usize,
    pub master_seed: u64,
    /// Jump times are resolved on a grid of `dt / substeps` within a cycle.
    pub substeps: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            g: 0.3,
            phi: 0.0,
            dt: 1e-3,
            t_final: 2.0,
            eta: 1.0,
            mode: CompensationMode::ContinuousDrive,
            n_traj: 1000,
            master_seed: 42,
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

/// Relative tolerance when checking that `t_final` is a whole number of cycles.
const CYCLE_COUNT_TOL: f64 = 1e-9;

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(invalid(format!("{field}: {msg}")));
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("gamma", format!("must be >= 0, got {}", self.gamma));
        }
        if !self.g.is_finite() || !self.phi.is_finite() {
            return bad("g", "signal parameters must be finite".into());
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt", format!("must be > 0, got {}", self.dt));
        }
        if 2.0 * self.gamma * self.dt > 0.2 + 1e-12 {
            return bad(
                "dt",
                format!("2*gamma*dt = {} exceeds 0.2", 2.0 * self.gamma * self.dt),
            );
        }
        if (self.g * self.dt).abs() > 0.2 + 1e-12 {
            return bad("dt", format!("g*dt = {} exceeds 0.2", self.g * self.dt));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad("t-final", format!("must be > 0, got {}", self.t_final));
        }
        let cycles = self.t_final / self.dt;
        if cycles.round() < 1.0
            || (cycles - cycles.round()).abs() > CYCLE_COUNT_TOL * cycles.max(1.0)
        {
            return bad(
                "t-final",
                format!(
                    "{} is not a whole number of cycles of dt={}",
                    self.t_final, self.dt
                ),
            );
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad("eta", format!("must lie in [0, 1], got {}", self.eta));
        }
        if self.n_traj == 0 {
            return bad("trajectories", "must be >= 1".into());
        }
        if self.substeps == 0 {
            return bad("substeps", "must be >= 1".into());
        }
        if self.mode == CompensationMode::PulsedEcho && !self.substeps.is_multiple_of(2) {
            return bad(
                "substeps",
                "pulsed echo needs an even number of substeps".into(),
            );
        }
        Ok(())
    }

    pub fn n_cycles(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn code(&self) -> CodeWords {
        CodeWords::new(self.phi)
    }

    pub fn damping(&self) -> DampingModel {
        DampingModel::new(self.gamma, SENSING).expect("validated rate")
    }

    pub fn detection(&self) -> DetectionModel {
        DetectionModel::new(self.eta, self.master_seed).expect("validated eta")
    }

    /// Snapshot stride used by [`run_trajectory`]: every `ceil(N/200)` cycles.
    pub fn default_snapshot_stride(&self) -> usize {
        self.n_cycles().div_ceil(200).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub params: ProtocolParams,
    pub events: Vec<JumpEvent>,
    /// `(time, state)` at cycle boundaries.
    pub snapshots: Vec<(f64, StateVector)>,
    pub final_state: StateVector,
}

impl TrajectoryRecord {
    pub fn snapshot_at(&self, time: f64) -> Option<&StateVector> {
        let tol = 1e-9 * self.params.dt;
        self.snapshots
            .iter()
            .find(|(t, _)| (t - time).abs() <= tol)
            .map(|(_, s)| s)
    }
}

/// `g (cos φ σx + sin φ σy) ⊗ I`.
pub fn signal_hamiltonian(g: f64, phi: f64) -> Operator {
    let single = &sigma_x().scaled(r(g * phi.cos())) + &sigma_y().scaled(r(g * phi.sin()));
    tensor_product(&single, &Operator::identity(2))
}

/// `c0 |0_L> + c1 |1_L>`; the amplitudes must already be normalized.
pub fn encode(c0: Complex64, c1: Complex64, code: &CodeWords) -> Result<StateVector> {
    let n = c0.norm_sqr() + c1.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(invalid(format!(
            "logical amplitudes have norm² {n}, expected 1"
        )));
    }
    Ok(code.logical(c0, c1))
}

/// Single-qubit drive that keeps `alpha|0> + beta|1>` stationary in direction
/// under no-jump damping; its norm then decays as `exp(-gamma beta² t)`.
pub fn compensation_hamiltonian_single(alpha: f64, beta: f64, gamma: f64) -> Result<Operator> {
    if ((alpha * alpha + beta * beta) - 1.0).abs() > 1e-10 {
        return Err(invalid(format!(
            "alpha² + beta² = {} (expected 1)",
            alpha * alpha + beta * beta
        )));
    }
    Ok(sigma_y().scaled(r(COMPENSATION_SIGN * gamma * alpha * beta)))
}

/// State-dependent drive on the code: the robust qubit selects the sign.
pub fn compensation_hamiltonian_encoded(gamma: f64, phi: f64) -> Operator {
    let axis = &sigma_x().scaled(r(-phi.sin())) + &sigma_y().scaled(r(phi.cos()));
    let robust_parity = hilbert::sigma_z();
    tensor_product(&axis, &robust_parity).scaled(r(COMPENSATION_SIGN * gamma / 2.0))
}

/// π pulses on the sensing qubit within one cycle: `(time, unitary)`, each
/// `σx ⊗ I`.
pub fn pi_pulse_schedule(dt: f64) -> Result<Vec<(f64, Operator)>> {
    pi_pulse_schedule_for(dt, 0.0)
}

/// Pulses about the code axis `cos φ σx + sin φ σy`, so that they commute
/// with the signal for any code angle.
pub fn pi_pulse_schedule_for(dt: f64, phi: f64) -> Result<Vec<(f64, Operator)>> {
    if !(dt > 0.0) {
        return Err(invalid(format!("cycle length must be > 0, got {dt}")));
    }
    let pulse = sensing_flip(phi);
    Ok(vec![(dt / 2.0, pulse.clone()), (dt, pulse)])
}

fn sensing_flip(phi: f64) -> Operator {
    let axis = &sigma_x().scaled(r(phi.cos())) + &sigma_y().scaled(r(phi.sin()));
    embed(&axis, &CODE_DIMS, SENSING).expect("static dims")
}

/// `I ⊗ σz`, which acts as the logical phase flip on the code.
fn logical_phase_flip() -> Operator {
    embed(&hilbert::sigma_z(), &CODE_DIMS, ROBUST).expect("static dims")
}

/// Completes `|0_L><00| - |1_L><01|` to a 4x4 unitary; the remaining columns
/// are Gram–Schmidt orthonormalized `|10>`, `|11>`.
pub fn recovery_unitary(code: &CodeWords) -> Operator {
    let mut columns: Vec<Vec<Complex64>> = vec![
        code.zero().amps().to_vec(),
        code.one().amps().iter().map(|a| -a).collect(),
    ];
    for seed in [2usize, 3] {
        let mut v = vec![ZERO; 4];
        v[seed] = ONE;
        for _ in 0..2 {
            for col in &columns {
                let proj: Complex64 = col.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(col).for_each(|(x, a)| *x -= proj * a);
            }
        }
        let n = hilbert::norm_sqr(&v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        columns.push(v);
    }
    let mut op = Operator::zeros(4);
    for (j, col) in columns.iter().enumerate() {
        for (i, a) in col.iter().enumerate() {
            op.set(i, j, *a);
        }
    }
    op
}

/// Projects the sensing qubit onto `|0>` and renormalizes.
pub fn reset_sensing_qubit(psi: &StateVector) -> Result<StateVector> {
    let p0 = embed(&hilbert::proj0(), psi.dims(), SENSING)?;
    let out = hilbert::apply(&p0, psi)?;
    if !(out.norm_sqr() > 0.0) {
        return Err(Error::Logic(
            "sensing qubit has no |0> component to reset onto".into(),
        ));
    }
    out.normalized()
}

/// Coherent Hamiltonian in force during a cycle (signal plus, in drive mode,
/// the encoded compensation).
pub fn cycle_hamiltonian(params: &ProtocolParams) -> Operator {
    let h_sig = signal_hamiltonian(params.g, params.phi);
    match params.mode {
        CompensationMode::ContinuousDrive => {
            &h_sig + &compensation_hamiltonian_encoded(params.gamma, params.phi)
        }
        CompensationMode::PulsedEcho => h_sig,
    }
}

#[derive(Debug, Clone)]
enum Segment {
    /// One substep of no-jump evolution.
    Evolve(Operator),
    Pulse(Operator),
}

/// Precomputed propagators for one error-correction cycle.
#[derive(Debug, Clone)]
pub struct CycleSchedule {
    segments: Vec<Segment>,
    cycle_map: Operator,
    flip: Operator,
    substep: f64,
    dt: f64,
}

impl CycleSchedule {
    pub fn new(params: &ProtocolParams) -> Result<Self> {
        params.validate()?;
        let h_eff =
            effective_hamiltonian(&cycle_hamiltonian(params), &params.damping(), &CODE_DIMS)?;
        let substep = params.dt / params.substeps as f64;
        let u = propagator(&h_eff, substep)?;
        let mut segments = Vec::with_capacity(params.substeps + 2);
        match params.mode {
            CompensationMode::ContinuousDrive => {
                segments.extend((0..params.substeps).map(|_| Segment::Evolve(u.clone())));
            }
            CompensationMode::PulsedEcho => {
                let half = params.substeps / 2;
                for (_, pulse) in pi_pulse_schedule_for(params.dt, params.phi)? {
                    segments.extend((0..half).map(|_| Segment::Evolve(u.clone())));
                    segments.push(Segment::Pulse(pulse));
                }
            }
        }
        let mut cycle_map = Operator::identity(4);
        for seg in &segments {
            let m = match seg {
                Segment::Evolve(m) | Segment::Pulse(m) => m,
            };
            cycle_map = m.matmul(&cycle_map);
        }
        Ok(Self {
            segments,
            cycle_map,
            flip: sensing_flip(params.phi),
            substep,
            dt: params.dt,
        })
    }

    /// No-jump map of a whole cycle, pulses included.
    pub fn cycle_map(&self) -> &Operator {
        &self.cycle_map
    }

    pub fn substep(&self) -> f64 {
        self.substep
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// A jump imposed at the end of a given substep of a given cycle
/// (cycles counted from 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForcedJump {
    pub cycle: usize,
    pub substep: usize,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnapshotPlan {
    /// Every `k` cycles and at the final cycle.
    Stride(usize),
    /// At the listed cycle boundaries (0 is the initial state).
    Cycles(BTreeSet<usize>),
}

impl SnapshotPlan {
    pub fn wants(&self, cycle: usize, n_cycles: usize) -> bool {
        match self {
            SnapshotPlan::Stride(k) => cycle > 0 && (cycle.is_multiple_of(*k) || cycle == n_cycles),
            SnapshotPlan::Cycles(set) => set.contains(&cycle),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    /// Starting state; logical-+ when `None`.
    pub initial: Option<StateVector>,
    /// Apply reset and recovery after detected emissions.
    pub feedback: bool,
    /// Sample emissions stochastically; when off only forced jumps happen.
    pub random_jumps: bool,
    pub forced_jump: Option<ForcedJump>,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            initial: None,
            feedback: true,
            random_jumps: true,
            forced_jump: None,
        }
    }
}

/// Cycle-by-cycle stepper for one trajectory.
///
/// Emissions follow the waiting-time rule: a uniform threshold is drawn and
/// a jump fires at the end of the first substep where the squared norm of
/// the unnormalized no-jump state falls below it.
pub struct Trajectory<'a> {
    schedule: &'a CycleSchedule,
    damping: DampingModel,
    detection: DetectionModel,
    recovery: Operator,
    options: TrajectoryOptions,
    stream: Stream,
    psi: StateVector,
    threshold: f64,
    cycle: usize,
    events: Vec<JumpEvent>,
}

impl<'a> Trajectory<'a> {
    pub fn new(
        params: &ProtocolParams,
        schedule: &'a CycleSchedule,
        options: TrajectoryOptions,
        mut stream: Stream,
    ) -> Result<Self> {
        let psi = match &options.initial {
            Some(psi) => {
                if psi.dims() != CODE_DIMS {
                    return Err(invalid(format!("initial state has dims {:?}", psi.dims())));
                }
                psi.clone().normalized()?
            }
            None => params.code().logical_plus(),
        };
        let threshold = stream.gen::<f64>();
        Ok(Self {
            schedule,
            damping: params.damping(),
            detection: params.detection(),
            recovery: recovery_unitary(&params.code()),
            options,
            stream,
            psi,
            threshold,
            cycle: 0,
            events: Vec::new(),
        })
    }

    pub fn state(&self) -> &StateVector {
        &self.psi
    }

    /// Completed cycles.
    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn time(&self) -> f64 {
        self.cycle as f64 * self.schedule.dt
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<JumpEvent> {
        self.events
    }

    /// Jumps recorded so far as `(total, detected)`.
    pub fn jump_counts(&self) -> (usize, usize) {
        let detected = self.events.iter().filter(|e| e.detected).count();
        (self.events.len(), detected)
    }

    fn forced_here(&self) -> Option<ForcedJump> {
        self.options.forced_jump.filter(|f| f.cycle == self.cycle)
    }

    /// Advances one full error-correction cycle.
    pub fn step_cycle(&mut self) -> Result<()> {
        let forced = self.forced_here();
        if forced.is_none() {
            let mut trial = self.psi.clone();
            self.schedule.cycle_map.apply_in_place(trial.amps_mut());
            let n = trial.norm_sqr();
            if !self.options.random_jumps || n >= self.threshold {
                self.finish_cycle(trial, n, None, &[])?;
                return Ok(());
            }
        }
        self.replay_cycle(forced)
    }

    fn replay_cycle(&mut self, forced: Option<ForcedJump>) -> Result<()> {
        let start = self.time();
        let first_event = self.events.len();
        let mut psi = self.psi.clone();
        let mut substep = 0usize;
        // pulses applied since the most recent detected emission
        let mut pulses_since_click: Option<usize> = None;
        for seg in &self.schedule.segments {
            match seg {
                Segment::Pulse(u) => {
                    u.apply_in_place(psi.amps_mut());
                    if let Some(p) = pulses_since_click.as_mut() {
                        *p += 1;
                    }
                }
                Segment::Evolve(u) => {
                    u.apply_in_place(psi.amps_mut());
                    let is_forced = forced.is_some_and(|f| f.substep == substep);
                    substep += 1;
                    let fire =
                        is_forced || (self.options.random_jumps && psi.norm_sqr() < self.threshold);
                    if !fire {
                        continue;
                    }
                    psi = noise::apply_jump(&psi, &self.damping)?;
                    let detected = match forced {
                        Some(f) if is_forced => {
                            // consume the same draw either way
                            let _ =
                                noise::sample_detection(true, &self.detection, &mut self.stream);
                            f.detected
                        }
                        _ => noise::sample_detection(true, &self.detection, &mut self.stream),
                    };
                    self.events.push(JumpEvent {
                        time: start + substep as f64 * self.schedule.substep,
                        detected,
                        corrected: false,
                    });
                    if detected {
                        pulses_since_click = Some(0);
                    }
                    self.threshold = self.stream.gen::<f64>();
                }
            }
        }
        let n = psi.norm_sqr();
        self.finish_cycle(psi, n, pulses_since_click, &[first_event])
    }

    fn finish_cycle(
        &mut self,
        mut psi: StateVector,
        norm_sqr: f64,
        pulses_since_click: Option<usize>,
        first_event: &[usize],
    ) -> Result<()> {
        if !(norm_sqr > 0.0) || !norm_sqr.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "state norm collapsed to {norm_sqr} in cycle {}",
                self.cycle
            )));
        }
        psi.scale(r(1.0 / norm_sqr.sqrt()));
        if self.options.random_jumps {
            self.threshold /= norm_sqr;
        }
        if let (Some(pulses), true) = (pulses_since_click, self.options.feedback) {
            // An odd number of pulses after the click means the click fell
            // between the two pulses: the emitted qubit was flipped back to
            // |1>, and the code carried the logical phase flip of the first
            // pulse when it emitted.
            let odd = pulses % 2 == 1;
            if odd {
                self.schedule.flip.apply_in_place(psi.amps_mut());
            }
            psi = reset_onto_ground(&psi)?;
            self.recovery.apply_in_place(psi.amps_mut());
            if odd {
                logical_phase_flip().apply_in_place(psi.amps_mut());
            }
            let from = first_event.first().copied().unwrap_or(self.events.len());
            for e in &mut self.events[from..] {
                if e.detected {
                    e.corrected = true;
                }
            }
        }
        self.psi = psi;
        self.cycle += 1;
        Ok(())
    }
}

/// Projective reset; when the sensing qubit has no ground component at all
/// the pumping branch `|0><1|` is taken instead.
fn reset_onto_ground(psi: &StateVector) -> Result<StateVector> {
    match reset_sensing_qubit(psi) {
        Err(Error::Logic(_)) => {
            let lower = embed(&hilbert::sigma_minus(), psi.dims(), SENSING)?;
            hilbert::apply(&lower, psi)?.normalized()
        }
        other => other,
    }
}

/// Runs one trajectory, snapshotting with `plan`.
pub fn run_trajectory_with(
    params: &ProtocolParams,
    schedule: &CycleSchedule,
    options: TrajectoryOptions,
    plan: &SnapshotPlan,
    stream: Stream,
) -> Result<TrajectoryRecord> {
    let n = params.n_cycles();
    let mut traj = Trajectory::new(params, schedule, options, stream)?;
    let mut snapshots = Vec::new();
    if plan.wants(0, n) {
        snapshots.push((0.0, traj.state().clone()));
    }
    for _ in 0..n {
        traj.step_cycle()?;
        if plan.wants(traj.cycle(), n) {
            snapshots.push((traj.time(), traj.state().clone()));
        }
    }
    let final_state = traj.state().clone();
    Ok(TrajectoryRecord {
        params: params.clone(),
        events: traj.into_events(),
        snapshots,
        final_state,
    })
}

/// Runs the full protocol from logical-+ with feedback, snapshotting every
/// `ceil(N/200)` cycles.
pub fn run_trajectory(params: &ProtocolParams, stream: Stream) -> Result<TrajectoryRecord> {
    let schedule = CycleSchedule::new(params)?;
    let plan = SnapshotPlan::Stride(params.default_snapshot_stride());
    run_trajectory_with(
        params,
        &schedule,
        TrajectoryOptions::default(),
        &plan,
        stream,
    )
}

/// Single-qubit demonstration of the continuous compensation: evolves
/// `alpha|0> + beta|1>` under `H_com - i gamma |1><1|` and reports, at each
/// of `steps` equally spaced times up to `t`, the norm and the direction
/// error `1 - |<ψ0|ψ(t)>|² / ‖ψ(t)‖²`.
pub fn compensation_decay_trace(
    alpha: f64,
    beta: f64,
    gamma: f64,
    t: f64,
    steps: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if steps == 0 || !(t > 0.0) {
        return Err(invalid("decay trace needs t > 0 and at least one step"));
    }
    let model = DampingModel::new(gamma, 0)?;
    let h = effective_hamiltonian(
        &compensation_hamiltonian_single(alpha, beta, gamma)?,
        &model,
        &[2],
    )?;
    let u = propagator(&h, t / steps as f64)?;
    let psi0 = StateVector::qubit(r(alpha), r(beta));
    let mut psi = psi0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, 1.0, 0.0));
    for k in 1..=steps {
        u.apply_in_place(psi.amps_mut());
        let dir_err = 1.0 - hilbert::fidelity(&psi0, &psi)?;
        out.push((k as f64 * t / steps as f64, psi.norm(), dir_err.max(0.0)));
    }
    Ok(out)
}

/// Unit complex number `e^{i theta}`.
pub fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}
