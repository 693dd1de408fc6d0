//! Initial states: product spins, the Bell family, switch-parameter
//! weightings and the mixed or purified states built from them.

use std::fmt;
use std::str::FromStr;

use crate::densemat::{kron, kron_vec, ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, Ket, Space, SpinMagnitude, SystemDims};
use crate::model::ProductSpinSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellFamily {
    /// Parallel components, `|uu>` and `|dd>`.
    Alpha,
    /// Antiparallel components, `|ud>` and `|du>`.
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Member of the partially entangled Bell family; `p = 0` is maximally entangled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellKind {
    pub family: BellFamily,
    pub sign: Sign,
    pub p: f64,
}

impl BellKind {
    pub const fn new(family: BellFamily, sign: Sign, p: f64) -> Self {
        Self { family, sign, p }
    }

    /// The four maximally entangled states in weighting order
    /// `(alpha+, alpha-, beta+, beta-)`.
    pub const STANDARD: [BellKind; 4] = [
        BellKind::new(BellFamily::Alpha, Sign::Plus, 0.0),
        BellKind::new(BellFamily::Alpha, Sign::Minus, 0.0),
        BellKind::new(BellFamily::Beta, Sign::Plus, 0.0),
        BellKind::new(BellFamily::Beta, Sign::Minus, 0.0),
    ];
}

/// `sqrt((1+p)/2)|x> +- sqrt((1-p)/2)|y>` with `(x, y) = (uu, dd)` or `(ud, du)`.
pub fn bell_ket(kind: BellKind) -> Result<Ket> {
    if !(0.0..1.0).contains(&kind.p) {
        return Err(Error::InvalidParameter(format!(
            "Bell parameter p must lie in [0, 1), got {}",
            kind.p
        )));
    }
    let major = ((1.0 + kind.p) / 2.0).sqrt();
    let minor = kind.sign.value() * ((1.0 - kind.p) / 2.0).sqrt();
    let (i, j) = match kind.family {
        BellFamily::Alpha => (0, 3),
        BellFamily::Beta => (1, 2),
    };
    let mut amp = vec![ZERO; 4];
    amp[i] = C64::new(major, 0.0);
    amp[j] = C64::new(minor, 0.0);
    Ket::new(Space::Qubits, amp)
}

fn standard_bell(i: usize) -> Ket {
    bell_ket(BellKind::STANDARD[i]).expect("p = 0 is valid")
}

/// Tabulated weightings `W1..W14`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightingId(u8);

impl WeightingId {
    pub fn new(n: u8) -> Result<Self> {
        if (1..=14).contains(&n) {
            Ok(Self(n))
        } else {
            Err(Error::InvalidParameter(format!(
                "weighting index must be 1..=14, got {n}"
            )))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = WeightingId> {
        (1..=14).map(WeightingId)
    }

    /// Weights as `(p + q eps) / 12`, stored as `(p, q)` per Bell slot.
    pub fn coefficients(self) -> [(i32, i32); 4] {
        const A: (i32, i32) = (6, 6);
        const B: (i32, i32) = (6, -6);
        const C: (i32, i32) = (3, -3);
        const D: (i32, i32) = (2, -2);
        const O: (i32, i32) = (0, 0);
        match self.0 {
            1 => [A, B, O, O],
            2 => [A, O, B, O],
            3 => [A, O, O, B],
            4 => [O, A, B, O],
            5 => [O, A, O, B],
            6 => [O, O, A, B],
            7 => [A, C, C, O],
            8 => [O, A, C, C],
            9 => [C, O, A, C],
            10 => [C, C, O, A],
            11 => [A, D, D, D],
            12 => [D, A, D, D],
            13 => [D, D, A, D],
            14 => [D, D, D, A],
            _ => unreachable!("validated at construction"),
        }
    }

    pub fn bell_count(self) -> usize {
        self.coefficients().iter().filter(|c| **c != (0, 0)).count()
    }

    /// Environment spin whose level count matches the number of Bell components.
    pub fn matching_spin(self) -> SpinMagnitude {
        SpinMagnitude::from_twice(self.bell_count() as u32 - 1)
    }
}

impl fmt::Display for WeightingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}", self.0)
    }
}

impl FromStr for WeightingId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .strip_prefix('W')
            .or_else(|| s.strip_prefix('w'))
            .ok_or_else(|| Error::InvalidParameter(format!("weighting id must look like W1..W14, got {s:?}")))?;
        if digits.is_empty() || digits.len() > 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidParameter(format!(
                "weighting id must look like W1..W14, got {s:?}"
            )));
        }
        WeightingId::new(digits.parse().expect("one or two ascii digits"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EspClass {
    pub penetrable: bool,
    pub bell_count: usize,
}

/// Bell-mixture weights `(w_alpha+, w_alpha-, w_beta+, w_beta-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EspWeighting {
    pub id: Option<WeightingId>,
    pub epsilon: f64,
    pub weights: [f64; 4],
}

impl EspWeighting {
    /// Arbitrary weights; non-negative and summing to one within 1e-14.
    pub fn custom(weights: [f64; 4]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights must be non-negative, got {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            id: None,
            epsilon: f64::NAN,
            weights,
        })
    }

    pub fn class(&self) -> EspClass {
        let bell_count = self.weights.iter().filter(|w| **w != 0.0).count();
        EspClass {
            penetrable: bell_count > 2,
            bell_count,
        }
    }

    /// Indices (into the Bell order) of the non-zero weights.
    pub fn support(&self) -> Vec<usize> {
        (0..4).filter(|&i| self.weights[i] != 0.0).collect()
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Weights of a tabulated weighting at switch parameter `epsilon`.
pub fn esp_weighting(id: WeightingId, epsilon: f64) -> Result<EspWeighting> {
    if !(epsilon > -1.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "switch parameter must lie in (-1, 1), got {epsilon}"
        )));
    }
    let coeffs = id.coefficients();
    debug_assert_eq!(coeffs.iter().map(|c| c.0).sum::<i32>(), 12);
    debug_assert_eq!(coeffs.iter().map(|c| c.1).sum::<i32>(), 0);
    let weights = coeffs.map(|(p, q)| {
        let g = gcd(gcd(p.unsigned_abs(), q.unsigned_abs()), 12).max(1) as i32;
        (f64::from(p / g) + f64::from(q / g) * epsilon) / f64::from(12 / g)
    });
    Ok(EspWeighting {
        id: Some(id),
        epsilon,
        weights,
    })
}

/// `sum_i w_i |i><i|` over the standard Bell states.
pub fn bell_mixture(w: &EspWeighting) -> DensityOperator {
    let mut m = ComplexMatrix::zeros(4, 4);
    for (i, &wi) in w.weights.iter().enumerate() {
        if wi != 0.0 {
            let b = standard_bell(i);
            m = &m + &ComplexMatrix::outer(b.amplitudes(), b.amplitudes()).scale_real(wi);
        }
    }
    DensityOperator::trusted(Space::Qubits, m)
}

/// `|m=S><m=S| (x) sum_i w_i |i><i|`.
pub fn mixed_initial(w: &EspWeighting, s: SpinMagnitude) -> DensityOperator {
    let mut env = ComplexMatrix::zeros(s.dim(), s.dim());
    env[(0, 0)] = C64::new(1.0, 0.0);
    DensityOperator::trusted(
        Space::Full(SystemDims::new(s)),
        kron(&env, bell_mixture(w).matrix()),
    )
}

/// `sum_{w_i != 0} sqrt(w_i) |m_k> (x) |i>` with `m_k` descending.
pub fn pure_initial(w: &EspWeighting, s: SpinMagnitude) -> Result<Ket> {
    let support = w.support();
    if support.len() != s.dim() {
        return Err(Error::Precondition(format!(
            "{} non-zero weights need an environment with {} levels, got spin {s} with {}",
            support.len(),
            support.len(),
            s.dim()
        )));
    }
    let mut amp = vec![ZERO; 4 * s.dim()];
    for (k, &i) in support.iter().enumerate() {
        let b = standard_bell(i);
        let root = w.weights[i].sqrt();
        for (ab, a) in b.amplitudes().iter().enumerate() {
            amp[4 * k + ab] += a * root;
        }
    }
    Ket::new(Space::Full(SystemDims::new(s)), amp)
}

/// Qubit spinor pointing along `(theta, phi)`.
pub fn spinor(theta: f64, phi: f64) -> [C64; 2] {
    [
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phi),
    ]
}

/// Fully separable `rho_C (x) |n_A><n_A| (x) |n_B><n_B|`.
pub fn product_initial(spec: &ProductSpinSpec, s: SpinMagnitude) -> Result<DensityOperator> {
    let env = ComplexMatrix::diag_real(&spec.env_populations(s)?);
    let qa = spinor(spec.theta_a, spec.phi_a);
    let qb = spinor(spec.theta_b, spec.phi_b);
    let ab = kron_vec(&qa, &qb);
    let rho_ab = ComplexMatrix::outer(&ab, &ab);
    Ok(DensityOperator::trusted(
        Space::Full(SystemDims::new(s)),
        kron(&env, &rho_ab),
    ))
}
