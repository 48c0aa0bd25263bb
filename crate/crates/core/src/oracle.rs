//! Deterministic ground truth for the trajectory code: fixed-step RK4
//! integration of the Lindblad equation and closed-form amplitude damping.
//!
//! Only the unconditional channel (no feedback) is checked here.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{self, r, Operator, StateVector, I};
use crate::protocol::{self, CompensationMode, ProtocolParams, TrajectoryRecord, CODE_DIMS};

/// Largest allowed `‖L†L‖ · h` for one RK4 substep.
pub const MAX_RATE_STEP: f64 = 0.05;

#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Operator,
}

impl std::fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DensityMatrix {:?}", self.matrix)
    }
}

impl DensityMatrix {
    /// Wraps a matrix after checking unit trace, hermiticity and positivity.
    pub fn new(matrix: Operator) -> Result<Self> {
        let rho = Self { matrix };
        rho.check()?;
        Ok(rho)
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        let n = psi.norm_sqr();
        if !(n > 0.0) {
            return Err(invalid("density matrix of a zero vector"));
        }
        Ok(Self {
            matrix: Operator::outer(psi, psi)?.scaled(r(1.0 / n)),
        })
    }

    fn check(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("density matrix trace {tr}")));
        }
        let herm = self.matrix.hermiticity_error();
        if herm > 1e-10 {
            return Err(invalid(format!("density matrix not Hermitian ({herm:e})")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(invalid(format!("density matrix has eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix.get(row, col)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }

    /// `<a| ρ |b>`
    pub fn element(&self, a: &StateVector, b: &StateVector) -> Result<Complex64> {
        let rb = hilbert::apply(&self.matrix, b)?;
        hilbert::inner(a, &rb)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        // symmetrize so roundoff asymmetry never reaches the eigensolver
        DMatrix::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .to_nalgebra()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// `½ ‖a - b‖₁`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(invalid("trace distance between different dimensions"));
    }
    let diff = DensityMatrix {
        matrix: &a.matrix - &b.matrix,
    };
    Ok(0.5 * diff.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LindbladSegment {
    /// Constant Hamiltonian for a duration.
    Evolve {
        hamiltonian: Operator,
        duration: f64,
    },
    /// Instantaneous unitary, `ρ -> U ρ U†`.
    Unitary(Operator),
}

/// Piecewise-constant schedule for one cycle plus jump operators.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    segments: Vec<LindbladSegment>,
    jump_ops: Vec<Operator>,
    dim: usize,
}

impl LindbladModel {
    pub fn new(segments: Vec<LindbladSegment>, jump_ops: Vec<Operator>) -> Result<Self> {
        let mut dim = None;
        let mut check_dim = |d: usize| match dim {
            None => {
                dim = Some(d);
                Ok(())
            }
            Some(x) if x == d => Ok(()),
            Some(x) => Err(invalid(format!("operator of size {d} in a size-{x} model"))),
        };
        for seg in &segments {
            match seg {
                LindbladSegment::Evolve {
                    hamiltonian,
                    duration,
                } => {
                    if !(*duration >= 0.0) {
                        return Err(invalid(format!("negative segment duration {duration}")));
                    }
                    if hamiltonian.hermiticity_error() > 1e-12 {
                        return Err(invalid("segment Hamiltonian is not Hermitian"));
                    }
                    check_dim(hamiltonian.dim())?;
                }
                LindbladSegment::Unitary(u) => {
                    if u.unitarity_error() > 1e-10 {
                        return Err(invalid("instantaneous map is not unitary"));
                    }
                    check_dim(u.dim())?;
                }
            }
        }
        for l in &jump_ops {
            check_dim(l.dim())?;
        }
        let dim = dim.ok_or_else(|| invalid("empty Lindblad model"))?;
        Ok(Self {
            segments,
            jump_ops,
            dim,
        })
    }

    /// Unconditional (feedback-free) channel of one protocol cycle.
    pub fn for_protocol(params: &ProtocolParams) -> Result<Self> {
        params.validate()?;
        let h = protocol::cycle_hamiltonian(params);
        let jump = params.damping().jump_operator(&CODE_DIMS)?;
        let segments = match params.mode {
            CompensationMode::ContinuousDrive => vec![LindbladSegment::Evolve {
                hamiltonian: h,
                duration: params.dt,
            }],
            CompensationMode::PulsedEcho => {
                let mut segs = Vec::new();
                for (_, pulse) in protocol::pi_pulse_schedule_for(params.dt, params.phi)? {
                    segs.push(LindbladSegment::Evolve {
                        hamiltonian: h.clone(),
                        duration: params.dt / 2.0,
                    });
                    segs.push(LindbladSegment::Unitary(pulse));
                }
                segs
            }
        };
        Self::new(segments, vec![jump])
    }

    pub fn duration(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                LindbladSegment::Evolve { duration, .. } => *duration,
                LindbladSegment::Unitary(_) => 0.0,
            })
            .sum()
    }

    /// `max ‖L†L‖`, the fastest dissipative rate.
    /// Largest `‖L†L‖₁` over the jump operators.
    pub fn max_rate(&self) -> f64 {
        self.jump_ops
            .iter()
            .map(|l| l.adjoint().matmul(l).norm_one())
            .fold(0.0, f64::max)
    }

    /// Fewest RK4 substeps per cycle of length `dt` that keep
    /// `rate * h <= MAX_RATE_STEP`.
    pub fn required_substeps(&self, dt: f64) -> usize {
        ((self.max_rate() * dt / MAX_RATE_STEP).ceil() as usize).max(1)
    }
}

/// `dρ/dt = -i H_eff ρ + i ρ H_eff† + Σ L ρ L†`, `H_eff = H - (i/2) Σ L†L`.
struct Generator {
    h_eff: Operator,
    h_eff_adj: Operator,
    jumps: Vec<(Operator, Operator)>,
}

impl Generator {
    fn new(h: &Operator, jump_ops: &[Operator]) -> Self {
        let mut h_eff = h.clone();
        for l in jump_ops {
            h_eff = &h_eff - &l.adjoint().matmul(l).scaled(I * 0.5);
        }
        Self {
            h_eff_adj: h_eff.adjoint(),
            h_eff,
            jumps: jump_ops.iter().map(|l| (l.clone(), l.adjoint())).collect(),
        }
    }

    fn apply(&self, rho: &Operator) -> Operator {
        let mut out = &self.h_eff.matmul(rho).scaled(-I) + &rho.matmul(&self.h_eff_adj).scaled(I);
        for (l, ld) in &self.jumps {
            out = &out + &l.matmul(rho).matmul(ld);
        }
        out
    }

    fn rk4(&self, rho: &Operator, h: f64) -> Operator {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1.scaled(r(h / 2.0))));
        let k3 = self.apply(&(rho + &k2.scaled(r(h / 2.0))));
        let k4 = self.apply(&(rho + &k3.scaled(r(h))));
        let incr = &(&k1 + &k2.scaled(r(2.0))) + &(&k3.scaled(r(2.0)) + &k4);
        rho + &incr.scaled(r(h / 6.0))
    }
}

/// Integrates one scheduled cycle of length `dt` with `substeps` RK4 steps
/// shared between the evolution segments in proportion to their length.
pub fn lindblad_evolve(
    rho: &DensityMatrix,
    model: &LindbladModel,
    dt: f64,
    substeps: usize,
) -> Result<DensityMatrix> {
    if substeps == 0 {
        return Err(invalid("substeps must be >= 1"));
    }
    if rho.dim() != model.dim {
        return Err(invalid(format!(
            "state of size {} for a size-{} model",
            rho.dim(),
            model.dim
        )));
    }
    if (model.duration() - dt).abs() > 1e-12 * dt.max(1.0) {
        return Err(invalid(format!(
            "schedule covers {} but cycle length is {dt}",
            model.duration()
        )));
    }
    let rate_step = model.max_rate() * dt / substeps as f64;
    if rate_step > MAX_RATE_STEP + 1e-15 {
        return Err(invalid(format!(
            "substep too coarse: rate * h = {rate_step} exceeds {MAX_RATE_STEP}"
        )));
    }

    let mut state = rho.matrix.clone();
    for seg in &model.segments {
        match seg {
            LindbladSegment::Unitary(u) => {
                state = u.matmul(&state).matmul(&u.adjoint());
            }
            LindbladSegment::Evolve {
                hamiltonian,
                duration,
            } => {
                if *duration == 0.0 {
                    continue;
                }
                let steps = ((substeps as f64 * duration / dt).round() as usize).max(1);
                let h = duration / steps as f64;
                let gen = Generator::new(hamiltonian, &model.jump_ops);
                for _ in 0..steps {
                    state = gen.rk4(&state, h);
                }
            }
        }
    }

    let drift = (state.trace().re - 1.0).abs();
    if drift > 1e-6 {
        return Err(Error::NumericalFailure(format!(
            "trace drifted by {drift:e}; use more substeps"
        )));
    }
    if drift <= 1e-9 {
        state = state.scaled(r(1.0 / state.trace().re));
    }
    // hermitize roundoff
    let state = (&state + &state.adjoint()).scaled(r(0.5));
    Ok(DensityMatrix { matrix: state })
}

/// Evolves through `cycles` consecutive cycles, returning the state after
/// each one.
pub fn lindblad_series(
    rho0: &DensityMatrix,
    model: &LindbladModel,
    dt: f64,
    substeps: usize,
    cycles: usize,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(cycles);
    let mut rho = rho0.clone();
    for _ in 0..cycles {
        rho = lindblad_evolve(&rho, model, dt, substeps)?;
        out.push(rho.clone());
    }
    Ok(out)
}

/// Closed-form single-qubit damping: the unnormalized no-jump branch
/// `(alpha, beta e^{-gamma t})` and the cumulative jump probability
/// `|beta|² (1 - e^{-2 gamma t})`.
pub fn analytic_damping(
    alpha: Complex64,
    beta: Complex64,
    gamma: f64,
    t: f64,
) -> Result<(StateVector, f64)> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(invalid(format!("|alpha|² + |beta|² = {n}")));
    }
    let branch = StateVector::qubit(alpha, beta * (-gamma * t).exp());
    let weight = beta.norm_sqr() * (1.0 - (-2.0 * gamma * t).exp());
    Ok((branch, weight))
}

/// `(1/n) Σ |ψ_i><ψ_i|` over the records' snapshots at `time`.
pub fn trajectory_average(records: &[TrajectoryRecord], time: f64) -> Result<DensityMatrix> {
    let first = records
        .first()
        .ok_or_else(|| invalid("no trajectories to average"))?;
    let dim = first.final_state.dim();
    let mut acc = Operator::zeros(dim);
    for (k, rec) in records.iter().enumerate() {
        if rec.params != first.params {
            return Err(invalid(format!("record {k} has different parameters")));
        }
        let psi = rec
            .snapshot_at(time)
            .ok_or_else(|| invalid(format!("record {k} has no snapshot at t = {time}")))?;
        acc = &acc + &Operator::outer(psi, psi)?;
    }
    Ok(DensityMatrix {
        matrix: acc.scaled(r(1.0 / records.len() as f64)),
    })
}

/// Incremental form of [`trajectory_average`] for streaming ensembles.
#[derive(Debug, Clone)]
pub struct DensityAccumulator {
    sum: Operator,
    count: usize,
}

impl DensityAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: Operator::zeros(dim),
            count: 0,
        }
    }

    pub fn add(&mut self, psi: &StateVector) -> Result<()> {
        self.sum = &self.sum + &Operator::outer(psi, psi)?;
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: DensityAccumulator) {
        self.sum = &self.sum + &other.sum;
        self.count += other.count;
    }

    pub fn average(&self) -> Result<DensityMatrix> {
        if self.count == 0 {
            return Err(invalid("empty accumulator"));
        }
        Ok(DensityMatrix {
            matrix: self.sum.scaled(r(1.0 / self.count as f64)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{sigma_x, ONE, ZERO};
    use crate::noise::DampingModel;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn qubit_model(h: Operator, gamma: f64, dt: f64) -> LindbladModel {
        let l = DampingModel::new(gamma, 0)
            .unwrap()
            .jump_operator(&[2])
            .unwrap();
        LindbladModel::new(
            vec![LindbladSegment::Evolve {
                hamiltonian: h,
                duration: dt,
            }],
            vec![l],
        )
        .unwrap()
    }

    #[test]
    fn excited_population_decays_at_twice_gamma() {
        let rho = DensityMatrix::from_pure(&StateVector::qubit(ZERO, ONE)).unwrap();
        let model = qubit_model(Operator::zeros(2), 1.0, 0.5);
        let out = lindblad_evolve(&rho, &model, 0.5, 100).unwrap();
        assert!((out.get(1, 1).re - (-1.0f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn coherence_decays_at_gamma() {
        let s = FRAC_1_SQRT_2;
        let rho = DensityMatrix::from_pure(&StateVector::qubit(r(s), r(s))).unwrap();
        let model = qubit_model(Operator::zeros(2), 1.0, 0.5);
        let out = lindblad_evolve(&rho, &model, 0.5, 100).unwrap();
        assert!((out.get(0, 1).norm() - 0.5 * (-0.5f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn unitary_limit_keeps_purity() {
        let rho = DensityMatrix::from_pure(&StateVector::qubit(ONE, ZERO)).unwrap();
        let model = qubit_model(sigma_x().scaled(r(0.3)), 0.0, 0.1);
        let series = lindblad_series(&rho, &model, 0.1, 4, 50).unwrap();
        for rho in series {
            assert!((rho.purity() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_substeps_rejected() {
        let rho = DensityMatrix::from_pure(&StateVector::qubit(ZERO, ONE)).unwrap();
        let model = qubit_model(Operator::zeros(2), 1.0, 0.5);
        assert!(matches!(
            lindblad_evolve(&rho, &model, 0.5, 10),
            Err(Error::InvalidArgument(_))
        ));
        assert!(lindblad_evolve(&rho, &model, 0.4, 100).is_err());
    }

    #[test]
    fn analytic_examples() {
        let (branch, w) = analytic_damping(ONE, ZERO, 1.0, 3.0).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(branch.amps()[1], ZERO);
        let (branch, w) = analytic_damping(ZERO, ONE, 1.0, 2f64.ln()).unwrap();
        assert!((branch.amps()[1].re - 0.5).abs() < 1e-15);
        assert!((w - 0.75).abs() < 1e-15);
        assert!(analytic_damping(ONE, ONE, 1.0, 1.0).is_err());
    }

    #[test]
    fn density_matrix_checks() {
        let bad = Operator::diagonal(&[r(1.5), r(-0.5)]);
        assert!(DensityMatrix::new(bad).is_err());
        let ok = Operator::diagonal(&[r(0.5), r(0.5)]);
        let rho = DensityMatrix::new(ok).unwrap();
        assert!((rho.purity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_of_orthogonal_states_is_one() {
        let a = DensityMatrix::from_pure(&StateVector::qubit(ONE, ZERO)).unwrap();
        let b = DensityMatrix::from_pure(&StateVector::qubit(ZERO, ONE)).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a).unwrap() < 1e-12);
    }
}
