//! Amplitude-damping unfolding.
//!
//! Rate convention: the coherence amplitude of the target qubit decays as
//! `exp(-gamma t)` and the excited population as `exp(-2 gamma t)`. The
//! Lindblad jump operator is therefore `sqrt(2 gamma) σ₋` and the no-jump
//! generator carries `-i gamma |1><1|`. Everything else derives from
//! [`JUMP_RATE_FACTOR`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{self, embed, propagator, Operator, StateVector};

/// Excited-population decay rate in units of the amplitude rate `gamma`.
pub const JUMP_RATE_FACTOR: f64 = 2.0;

/// Random stream handed to a single trajectory.
pub type Stream = ChaCha8Rng;

/// Stream for trajectory `index` of an ensemble seeded by `master_seed`.
/// Streams for distinct indices are independent, so results do not depend
/// on execution order.
pub fn trajectory_stream(master_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds (sweep points, etc.).
pub fn derive_seed(master_seed: u64, salt: u64) -> u64 {
    let mut z = master_seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingModel {
    gamma: f64,
    target: usize,
}

impl DampingModel {
    pub fn new(gamma: f64, target: usize) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(invalid(format!("damping rate must be >= 0, got {gamma}")));
        }
        Ok(Self { gamma, target })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Rate at which an excited target emits, `2 gamma`.
    pub fn emission_rate(&self) -> f64 {
        JUMP_RATE_FACTOR * self.gamma
    }

    /// `|1><1|` on the target subsystem.
    pub fn excited_projector(&self, dims: &[usize]) -> Result<Operator> {
        embed(&hilbert::proj1(), dims, self.target)
    }

    /// `σ₋` on the target (unscaled; used for the pure-state jump).
    pub fn lowering(&self, dims: &[usize]) -> Result<Operator> {
        embed(&hilbert::sigma_minus(), dims, self.target)
    }

    /// Lindblad jump operator `sqrt(2 gamma) σ₋` on the target.
    pub fn jump_operator(&self, dims: &[usize]) -> Result<Operator> {
        Ok(self
            .lowering(dims)?
            .scaled(hilbert::r(self.emission_rate().sqrt())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub detected: bool,
    /// A recovery was applied in response to this event.
    pub corrected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    eta: f64,
    pub rng_seed: u64,
}

impl DetectionModel {
    pub fn new(eta: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid(format!(
                "detection efficiency {eta} outside [0, 1]"
            )));
        }
        Ok(Self { eta, rng_seed })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `h_coherent - i gamma P_excited` with `P_excited` on the model's target.
pub fn effective_hamiltonian(
    h_coherent: &Operator,
    model: &DampingModel,
    dims: &[usize],
) -> Result<Operator> {
    let total: usize = dims.iter().product();
    if h_coherent.dim() != total {
        return Err(invalid(format!(
            "Hamiltonian of size {} for composite space {dims:?}",
            h_coherent.dim()
        )));
    }
    if h_coherent.hermiticity_error() > 1e-12 {
        return Err(invalid("coherent Hamiltonian is not Hermitian"));
    }
    let damping = model
        .excited_projector(dims)?
        .scaled(Complex64::new(0.0, -model.emission_rate() / 2.0));
    Ok(h_coherent + &damping)
}

/// One no-jump step. Returns the unnormalized state and the jump
/// probability `‖ψ‖² - ‖ψ'‖²` clamped to `[0, 1]`.
pub fn step_no_jump(psi: &StateVector, h_eff: &Operator, dt: f64) -> Result<(StateVector, f64)> {
    if !(dt > 0.0) {
        return Err(invalid(format!("step length must be > 0, got {dt}")));
    }
    let u = propagator(h_eff, dt)?;
    let out = hilbert::apply(&u, psi)?;
    let p = (psi.norm_sqr() - out.norm_sqr()).clamp(0.0, 1.0);
    Ok((out, p))
}

/// `normalize(σ₋ ψ)` on the model's target.
pub fn apply_jump(psi: &StateVector, model: &DampingModel) -> Result<StateVector> {
    let lowered = hilbert::apply(&model.lowering(psi.dims())?, psi)?;
    if !(lowered.norm_sqr() > 0.0) {
        return Err(Error::Logic(
            "jump sampled from a state with no excited component".into(),
        ));
    }
    lowered.normalized()
}

/// Bernoulli(eta) draw when an emission occurred; always `false` otherwise.
pub fn sample_detection<R: Rng + ?Sized>(
    event_occurred: bool,
    det: &DetectionModel,
    stream: &mut R,
) -> bool {
    if !event_occurred {
        return false;
    }
    // keep the stream consumption independent of eta
    let u: f64 = stream.gen();
    u < det.eta
}
