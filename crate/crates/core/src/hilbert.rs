//! Spin algebra and bookkeeping for the `C (x) A (x) B` tensor space.
//!
//! The central spin C sits in the left factor with its basis ordered by
//! descending magnetic quantum number. The two qubits use the basis
//! `(up, down)` each, so the joint qubit basis is `(uu, ud, du, dd)`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::densemat::{eigvalsh, kron, ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const PSD_TOLERANCE: f64 = 1e-10;
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Spin quantum number stored as `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinMagnitude {
    two_s: u32,
}

impl SpinMagnitude {
    pub const HALF: Self = Self { two_s: 1 };
    pub const ONE: Self = Self { two_s: 2 };
    pub const THREE_HALVES: Self = Self { two_s: 3 };

    pub const fn from_twice(two_s: u32) -> Self {
        Self { two_s }
    }

    /// Accepts non-negative integers and half-integers.
    pub fn from_f64(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !s.is_finite() || s < 0.0 || (twice - twice.round()).abs() > 1e-12 || twice > 64.0 {
            return Err(Error::InvalidParameter(format!(
                "spin magnitude must be a non-negative half-integer, got {s}"
            )));
        }
        Ok(Self {
            two_s: twice.round() as u32,
        })
    }

    pub const fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn value(self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub const fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    /// Magnetic quantum numbers in basis order, `S, S-1, ..., -S`.
    pub fn m_values(self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.value() - k as f64).collect()
    }
}

impl fmt::Display for SpinMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.two_s.is_multiple_of(2) {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

/// `(Sx, Sy, Sz)` for a spin of magnitude `s` in the descending-m basis.
pub fn spin_operators(s: SpinMagnitude) -> [ComplexMatrix; 3] {
    let d = s.dim();
    let sv = s.value();
    let m = s.m_values();
    let mut raise = ComplexMatrix::zeros(d, d);
    for k in 1..d {
        raise[(k - 1, k)] = C64::new((sv * (sv + 1.0) - m[k] * (m[k] + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let sx = (&raise + &lower).scale_real(0.5);
    let sy = (&raise - &lower).scale(C64::new(0.0, -0.5));
    let sz = ComplexMatrix::diag_real(&m);
    [sx, sy, sz]
}

/// Pauli matrices `(sigma_x, sigma_y, sigma_z)`.
pub fn pauli() -> [ComplexMatrix; 3] {
    let sx = ComplexMatrix::from_fn(2, 2, |r, c| if r != c { ONE } else { ZERO });
    let sy = ComplexMatrix::from_fn(2, 2, |r, c| match (r, c) {
        (0, 1) => C64::new(0.0, -1.0),
        (1, 0) => C64::new(0.0, 1.0),
        _ => ZERO,
    });
    let sz = ComplexMatrix::diag_real(&[1.0, -1.0]);
    [sx, sy, sz]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    C,
    A,
    B,
}

/// Dimensions of the full `C (x) A (x) B` space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDims {
    pub spin: SpinMagnitude,
}

impl SystemDims {
    pub const DIM_A: usize = 2;
    pub const DIM_B: usize = 2;

    pub fn new(spin: SpinMagnitude) -> Self {
        Self { spin }
    }

    pub fn dim_c(&self) -> usize {
        self.spin.dim()
    }

    pub fn total(&self) -> usize {
        self.dim_c() * 4
    }

    pub fn slot_dim(&self, slot: Slot) -> usize {
        match slot {
            Slot::C => self.dim_c(),
            Slot::A => Self::DIM_A,
            Slot::B => Self::DIM_B,
        }
    }
}

/// Lifts a single-slot operator to the full space with identities elsewhere.
pub fn embed(op: &ComplexMatrix, slot: Slot, dims: SystemDims) -> Result<ComplexMatrix> {
    let d = dims.slot_dim(slot);
    if op.rows() != d || op.cols() != d {
        return Err(Error::Dimension(format!(
            "{slot:?}-slot operator must be {d}x{d}, got {}x{}",
            op.rows(),
            op.cols()
        )));
    }
    let i_c = ComplexMatrix::identity(dims.dim_c());
    let i2 = ComplexMatrix::identity(2);
    Ok(match slot {
        Slot::C => kron(&kron(op, &i2), &i2),
        Slot::A => kron(&kron(&i_c, op), &i2),
        Slot::B => kron(&kron(&i_c, &i2), op),
    })
}

/// The space a state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Full(SystemDims),
    Qubits,
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Full(d) => d.total(),
            Space::Qubits => 4,
        }
    }
}

/// A trace-one, Hermitian, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    space: Space,
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates trace, Hermiticity and positivity before wrapping.
    pub fn new(space: Space, matrix: ComplexMatrix) -> Result<Self> {
        let n = space.dim();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::Dimension(format!(
                "density operator on a {n}-dimensional space given a {}x{} matrix",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > TRACE_TOLERANCE {
            return Err(Error::Precondition(format!("trace is {tr}, expected 1")));
        }
        let herm = matrix.hermiticity_deviation();
        if herm > HERMITIAN_TOLERANCE * matrix.frobenius_norm().max(1.0) {
            return Err(Error::Precondition(format!(
                "matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let lowest = eigvalsh(&matrix)?[0];
        if lowest < -PSD_TOLERANCE {
            return Err(Error::Precondition(format!(
                "matrix is not positive semidefinite (minimum eigenvalue {lowest:e})"
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Wraps a matrix known to be a density operator by construction.
    pub(crate) fn trusted(space: Space, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.rows(), space.dim());
        Self { space, matrix }
    }

    pub fn qubits(matrix: ComplexMatrix) -> Result<Self> {
        Self::new(Space::Qubits, matrix)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Tr(O rho).
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        Ok(op.matmul(&self.matrix)?.trace())
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    space: Space,
    amplitudes: Vec<C64>,
}

impl Ket {
    /// Validates the norm and rotates the global phase so the
    /// largest-magnitude amplitude is real and positive.
    pub fn new(space: Space, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "ket on a {}-dimensional space given {} amplitudes",
                space.dim(),
                amplitudes.len()
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Precondition(format!("ket norm is {norm}, expected 1")));
        }
        let pivot = amplitudes
            .iter()
            .copied()
            .reduce(|best, a| if a.norm() > best.norm() { a } else { best })
            .unwrap_or(ONE);
        let phase = pivot.conj() / pivot.norm();
        let amplitudes = amplitudes.into_iter().map(|a| a * phase).collect();
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// <self|other>.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::trusted(
            self.space,
            ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
        )
    }
}

/// Tr_C on a raw `(dim_c * 4)`-square matrix.
pub fn partial_trace_c_matrix(m: &ComplexMatrix, dim_c: usize) -> Result<ComplexMatrix> {
    let n = dim_c * 4;
    if m.rows() != n || m.cols() != n {
        return Err(Error::Dimension(format!(
            "partial trace over a {dim_c}-level environment needs a {n}x{n} matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(ComplexMatrix::from_fn(4, 4, |r, c| {
        (0..dim_c).map(|k| m[(4 * k + r, 4 * k + c)]).sum()
    }))
}

/// Reduced two-qubit state Tr_C(rho).
pub fn partial_trace_c(rho: &DensityOperator) -> Result<DensityOperator> {
    match rho.space {
        Space::Full(dims) => Ok(DensityOperator::trusted(
            Space::Qubits,
            partial_trace_c_matrix(&rho.matrix, dims.dim_c())?,
        )),
        Space::Qubits => Err(Error::Dimension(
            "partial trace over C requires a state on C (x) A (x) B".into(),
        )),
    }
}

fn check_two_qubit(m: &ComplexMatrix) -> Result<()> {
    if m.rows() != 4 || m.cols() != 4 {
        return Err(Error::Dimension(format!(
            "partial transpose needs a 4x4 two-qubit matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// `[rho^{T_B}]_{ab,a'b'} = rho_{ab',a'b}`.
pub fn partial_transpose_b_matrix(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_two_qubit(m)?;
    Ok(ComplexMatrix::from_fn(4, 4, |r, c| {
        let (a, b) = (r / 2, r % 2);
        let (ap, bp) = (c / 2, c % 2);
        m[(2 * a + bp, 2 * ap + b)]
    }))
}

/// `[rho^{T_A}]_{ab,a'b'} = rho_{a'b,ab'}`.
pub fn partial_transpose_a_matrix(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_two_qubit(m)?;
    Ok(ComplexMatrix::from_fn(4, 4, |r, c| {
        let (a, b) = (r / 2, r % 2);
        let (ap, bp) = (c / 2, c % 2);
        m[(2 * ap + b, 2 * a + bp)]
    }))
}

pub fn partial_transpose_b(rho: &DensityOperator) -> Result<ComplexMatrix> {
    if rho.space != Space::Qubits {
        return Err(Error::Dimension(
            "partial transpose is defined on the reduced two-qubit state".into(),
        ));
    }
    partial_transpose_b_matrix(&rho.matrix)
}

pub fn partial_transpose_a(rho: &DensityOperator) -> Result<ComplexMatrix> {
    if rho.space != Space::Qubits {
        return Err(Error::Dimension(
            "partial transpose is defined on the reduced two-qubit state".into(),
        ));
    }
    partial_transpose_a_matrix(&rho.matrix)
}

/// Ginibre-distributed density matrix `G G^dagger / Tr(G G^dagger)`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    gg.scale_real(1.0 / tr).hermitian_part()
}

/// Random two-qubit density operator from the Ginibre ensemble.
pub fn random_qubit_density<R: Rng + ?Sized>(rng: &mut R) -> DensityOperator {
    DensityOperator::trusted(Space::Qubits, random_density_matrix(rng, 4))
}
