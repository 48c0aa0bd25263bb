//! Dense complex linear algebra on small composite Hilbert spaces.
//!
//! Basis index convention: for subsystem dimensions `[d_0, d_1, ...]` the basis
//! state `|s_0 s_1 ...>` has index `sum_k s_k * prod_{j>k} d_j`, i.e. the
//! first-listed subsystem is the most significant digit. For the two-qubit
//! code space this gives `index = 2 * s_sensing + s_robust`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Largest composite dimension supported by the in-place kernels.
pub const MAX_DIM: usize = 16;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Pure state (or unnormalized ray) on a composite space.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(invalid(format!("bad subsystem dimensions {dims:?}")));
        }
        let total: usize = dims.iter().product();
        if total != amps.len() {
            return Err(invalid(format!(
                "{} amplitudes for dimensions {dims:?} (expected {total})",
                amps.len()
            )));
        }
        Ok(Self { dims, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dims: &[usize], index: usize) -> Result<Self> {
        let total: usize = dims.iter().product();
        if index >= total {
            return Err(invalid(format!("basis index {index} out of range {total}")));
        }
        let mut amps = vec![ZERO; total];
        amps[index] = ONE;
        Self::new(dims.to_vec(), amps)
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let total: usize = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            amps: vec![ZERO; total],
        }
    }

    pub fn qubit(alpha: Complex64, beta: Complex64) -> Self {
        Self {
            dims: vec![2],
            amps: vec![alpha, beta],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scales to unit norm. Fails on the zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// Linear combination `a * self + b * other` (dims must agree).
    pub fn combine(&self, a: Complex64, other: &StateVector, b: Complex64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(invalid(format!(
                "dimension mismatch {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let amps = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            dims: self.dims.clone(),
            amps,
        })
    }

    /// Product state `self ⊗ other`.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        StateVector { dims, amps }
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector{:?}[", self.dims)?;
        for (k, a) in self.amps.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}{:+.6}i", a.re, a.im)?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// `<a|b>`, conjugating the first argument.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.dims != b.dims {
        return Err(invalid(format!(
            "inner product of {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `|<a|b>|^2 / (<a|a><b|b>)`: overlap insensitive to global phase and norm.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    let ov = inner(a, b)?.norm_sqr();
    let den = a.norm_sqr() * b.norm_sqr();
    if !(den > 0.0) {
        return Err(invalid("fidelity with a zero vector"));
    }
    Ok(ov / den)
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl Operator {
    pub fn from_rows(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(invalid(format!(
                "{} entries for a {dim}x{dim} operator",
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    /// Constructor for operators that must be Hermitian (Hamiltonians).
    pub fn hermitian(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        let op = Self::from_rows(dim, entries)?;
        let dev = op.hermiticity_error();
        if dev > 1e-12 {
            return Err(invalid(format!(
                "operator not Hermitian (deviation {dev:e})"
            )));
        }
        Ok(op)
    }

    /// Constructor for operators that must be unitary (pulses, recovery).
    pub fn unitary(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        let op = Self::from_rows(dim, entries)?;
        let dev = op.unitarity_error();
        if dev > 1e-10 {
            return Err(invalid(format!("operator not unitary (deviation {dev:e})")));
        }
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for k in 0..dim {
            op.entries[k * dim + k] = ONE;
        }
        op
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (k, d) in diag.iter().enumerate() {
            op.entries[k * diag.len() + k] = *d;
        }
        op
    }

    /// `|a><b|`
    pub fn outer(a: &StateVector, b: &StateVector) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(invalid("outer product of vectors with different sizes"));
        }
        let n = a.dim();
        let mut entries = Vec::with_capacity(n * n);
        for x in a.amps() {
            for y in b.amps() {
                entries.push(x * y.conj());
            }
        }
        Ok(Self { dim: n, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |H - H†|`
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `max |U†U - I|`
    pub fn unitarity_error(&self) -> f64 {
        (&self.adjoint().matmul(self) - &Operator::identity(self.dim)).max_abs()
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        out
    }

    /// In-place `amps <- self * amps` without allocation.
    #[inline]
    pub fn apply_in_place(&self, amps: &mut [Complex64]) {
        let n = self.dim;
        debug_assert_eq!(amps.len(), n);
        debug_assert!(n <= MAX_DIM);
        let mut buf = [ZERO; MAX_DIM];
        buf[..n].copy_from_slice(amps);
        for (i, out) in amps.iter_mut().enumerate() {
            let row = &self.entries[i * n..(i + 1) * n];
            *out = row.iter().zip(&buf[..n]).map(|(a, b)| a * b).sum();
        }
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let e = self.get(i, j);
                write!(f, " {:+.4}{:+.4}i", e.re, e.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        Operator {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        Operator {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

pub fn sigma_x() -> Operator {
    Operator {
        dim: 2,
        entries: vec![ZERO, ONE, ONE, ZERO],
    }
}

pub fn sigma_y() -> Operator {
    Operator {
        dim: 2,
        entries: vec![ZERO, -I, I, ZERO],
    }
}

pub fn sigma_z() -> Operator {
    Operator::diagonal(&[ONE, -ONE])
}

/// `σ₋ = |0><1|`, lowering from the excited state `|1>`.
pub fn sigma_minus() -> Operator {
    Operator {
        dim: 2,
        entries: vec![ZERO, ONE, ZERO, ZERO],
    }
}

pub fn sigma_plus() -> Operator {
    sigma_minus().adjoint()
}

/// `|0><0|`
pub fn proj0() -> Operator {
    Operator::diagonal(&[ONE, ZERO])
}

/// `|1><1|`
pub fn proj1() -> Operator {
    Operator::diagonal(&[ZERO, ONE])
}

/// Kronecker product, first operand most significant.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.dim, b.dim);
    let n = na * nb;
    let mut out = Operator::zeros(n);
    for ia in 0..na {
        for ja in 0..na {
            let x = a.get(ia, ja);
            if x == ZERO {
                continue;
            }
            for ib in 0..nb {
                for jb in 0..nb {
                    out.set(ia * nb + ib, ja * nb + jb, x * b.get(ib, jb));
                }
            }
        }
    }
    out
}

/// Lifts a single-subsystem operator onto subsystem `target` of `dims`.
pub fn embed(op: &Operator, dims: &[usize], target: usize) -> Result<Operator> {
    if target >= dims.len() {
        return Err(invalid(format!(
            "subsystem {target} out of range for dims {dims:?}"
        )));
    }
    if dims[target] != op.dim {
        return Err(invalid(format!(
            "operator of size {} on subsystem of size {}",
            op.dim, dims[target]
        )));
    }
    let mut out = Operator::identity(1);
    for (k, &d) in dims.iter().enumerate() {
        let factor = if k == target {
            op.clone()
        } else {
            Operator::identity(d)
        };
        out = tensor_product(&out, &factor);
    }
    Ok(out)
}

/// Matrix-vector product; does not normalize.
pub fn apply(op: &Operator, psi: &StateVector) -> Result<StateVector> {
    if op.dim != psi.dim() {
        return Err(invalid(format!(
            "operator of size {} applied to state of size {}",
            op.dim,
            psi.dim()
        )));
    }
    let n = op.dim;
    let amps = (0..n)
        .map(|i| {
            op.entries[i * n..(i + 1) * n]
                .iter()
                .zip(&psi.amps)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(StateVector {
        dims: psi.dims.clone(),
        amps,
    })
}

/// Exact short-time map `exp(-i * dt * h_eff)` for a possibly non-Hermitian
/// generator.
pub fn propagator(h_eff: &Operator, dt: f64) -> Result<Operator> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(invalid(format!("propagator time step {dt} must be >= 0")));
    }
    if h_eff.dim > MAX_DIM {
        return Err(invalid(format!(
            "propagator supports dimension <= {MAX_DIM}, got {}",
            h_eff.dim
        )));
    }
    Ok(expm(&h_eff.scaled(c(0.0, -dt))))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor
/// series on the scaled matrix (norm ≤ 1/2, truncation below 1e-17 relative).
pub fn expm(a: &Operator) -> Operator {
    let n = a.dim;
    let norm = a.norm_one();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scaled(r(0.5f64.powi(squarings)));

    let mut result = Operator::identity(n);
    let mut term = Operator::identity(n);
    for k in 1..=30 {
        term = term.matmul(&scaled).scaled(r(1.0 / k as f64));
        result = &result + &term;
        if term.max_abs() <= 1e-18 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn max_diff(a: &Operator, b: &Operator) -> f64 {
        (a - b).max_abs()
    }

    #[test]
    fn tensor_identity_and_diagonal() {
        let id4 = tensor_product(&Operator::identity(2), &Operator::identity(2));
        assert_eq!(id4, Operator::identity(4));

        let zz = tensor_product(&sigma_z(), &sigma_z());
        let diag: Vec<f64> = (0..4).map(|k| zz.get(k, k).re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn tensor_first_operand_most_significant() {
        let xi = tensor_product(&sigma_x(), &Operator::identity(2));
        let out = apply(&xi, &StateVector::basis(&[2, 2], 0).unwrap()).unwrap();
        assert_eq!(out, StateVector::basis(&[2, 2], 2).unwrap());
    }

    #[test]
    fn apply_basic_actions() {
        let zero = StateVector::basis(&[2], 0).unwrap();
        let one = StateVector::basis(&[2], 1).unwrap();
        assert_eq!(apply(&sigma_x(), &zero).unwrap(), one);
        let lowered = apply(&sigma_minus(), &zero).unwrap();
        assert_eq!(lowered.norm_sqr(), 0.0);

        let s = FRAC_1_SQRT_2;
        let plus = StateVector::new(vec![2, 2], vec![r(s), ZERO, r(s), ZERO]).unwrap();
        let xi = tensor_product(&sigma_x(), &Operator::identity(2));
        let out = apply(&xi, &plus).unwrap();
        for (a, b) in out.amps().iter().zip(plus.amps()) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn apply_dimension_mismatch() {
        let psi = StateVector::basis(&[2, 2], 0).unwrap();
        assert!(matches!(
            apply(&sigma_x(), &psi),
            Err(crate::Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn inner_examples() {
        let zero = StateVector::basis(&[2], 0).unwrap();
        let one = StateVector::basis(&[2], 1).unwrap();
        let plus = StateVector::qubit(r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2));
        assert!(close(inner(&zero, &zero).unwrap(), ONE, 0.0));
        assert!(close(inner(&zero, &one).unwrap(), ZERO, 0.0));
        assert!(close(inner(&plus, &zero).unwrap(), r(FRAC_1_SQRT_2), 1e-16));
        let two = StateVector::basis(&[2, 2], 0).unwrap();
        assert!(inner(&zero, &two).is_err());
    }

    #[test]
    fn inner_conjugates_first_argument() {
        let a = StateVector::qubit(I, ZERO);
        let b = StateVector::qubit(ONE, ZERO);
        assert!(close(inner(&a, &b).unwrap(), -I, 0.0));
    }

    #[test]
    fn propagator_zero_generator_is_identity() {
        let u = propagator(&Operator::zeros(4), 0.7).unwrap();
        assert!(max_diff(&u, &Operator::identity(4)) < 1e-15);
    }

    #[test]
    fn propagator_pi_pulse() {
        let dt = 0.37;
        let h = sigma_x().scaled(r(PI / (2.0 * dt)));
        let u = propagator(&h, dt).unwrap();
        let expected = sigma_x().scaled(-I);
        assert!(max_diff(&u, &expected) < 1e-12, "{u:?}");
    }

    #[test]
    fn propagator_damps_excited_amplitude() {
        let gamma = 1.3;
        let dt = 0.25;
        let h = proj1().scaled(c(0.0, -gamma));
        let u = propagator(&h, dt).unwrap();
        assert!(close(u.get(0, 0), ONE, 1e-14));
        assert!(close(u.get(1, 1), r((-gamma * dt).exp()), 1e-14));
    }

    #[test]
    fn propagator_rejects_negative_time() {
        assert!(propagator(&sigma_x(), -1.0).is_err());
    }

    #[test]
    fn expm_large_norm_against_closed_form() {
        // exp(-i θ σ_y) = cos θ I - i sin θ σ_y, with θ large enough to force squarings
        let theta = 40.3;
        let u = propagator(&sigma_y(), theta).unwrap();
        let expected =
            &Operator::identity(2).scaled(r(theta.cos())) + &sigma_y().scaled(c(0.0, -theta.sin()));
        assert!(max_diff(&u, &expected) < 1e-11);
    }

    #[test]
    fn embed_matches_tensor() {
        let dims = [2, 2];
        let on_robust = embed(&sigma_x(), &dims, 1).unwrap();
        assert_eq!(
            on_robust,
            tensor_product(&Operator::identity(2), &sigma_x())
        );
        assert!(embed(&sigma_x(), &dims, 2).is_err());
        assert!(embed(&Operator::identity(3), &dims, 0).is_err());
    }

    #[test]
    fn hermitian_and_unitary_constructors() {
        assert!(Operator::hermitian(2, sigma_y().entries().to_vec()).is_ok());
        assert!(Operator::hermitian(2, sigma_minus().entries().to_vec()).is_err());
        assert!(Operator::unitary(2, sigma_minus().entries().to_vec()).is_err());
        assert!(Operator::unitary(2, sigma_y().entries().to_vec()).is_ok());
    }

    #[test]
    fn normalize_zero_vector_fails() {
        let mut z = StateVector::zeros(&[2]);
        assert!(z.normalize().is_err());
    }
}
