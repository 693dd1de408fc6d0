//! Hamiltonians and leading-order direct-exchange concurrence.

use std::fmt;

use crate::densemat::{kron, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::hilbert::{embed, pauli, spin_operators, Slot, SpinMagnitude, SystemDims};

/// Largest |dt| for which the leading-order concurrence formulas are trusted.
pub const LEADING_ORDER_WINDOW: f64 = 0.05;

/// Exchange constants `(Jx, Jy, Jz)`, conventionally in units of |Jz|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeCoupling {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl ExchangeCoupling {
    pub const fn new(jx: f64, jy: f64, jz: f64) -> Self {
        Self { jx, jy, jz }
    }

    pub fn from_array(j: [f64; 3]) -> Result<Self> {
        if j.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exchange constants must be finite, got {j:?}"
            )));
        }
        Ok(Self::new(j[0], j[1], j[2]))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.jx, self.jy, self.jz]
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.jx * s, self.jy * s, self.jz * s)
    }

    /// Diagonal coupling tensor.
    pub fn tensor(&self) -> [[f64; 3]; 3] {
        [[self.jx, 0.0, 0.0], [0.0, self.jy, 0.0], [0.0, 0.0, self.jz]]
    }
}

impl fmt::Display for ExchangeCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.jx, self.jy, self.jz)
    }
}

/// `H = sum_a J_a (S_a (x) sigma_a (x) I + S_a (x) I (x) sigma_a)`.
pub fn spin_star_hamiltonian(j: ExchangeCoupling, s: SpinMagnitude) -> ComplexMatrix {
    let dims = SystemDims::new(s);
    let spins = spin_operators(s);
    let sigmas = pauli();
    let i2 = ComplexMatrix::identity(2);
    let mut h = ComplexMatrix::zeros(dims.total(), dims.total());
    for ((ja, sa), sig) in j.as_array().into_iter().zip(&spins).zip(&sigmas) {
        if ja == 0.0 {
            continue;
        }
        let on_a = kron(&kron(sa, sig), &i2);
        let on_b = kron(&kron(sa, &i2), sig);
        h = &h + &(&on_a + &on_b).scale_real(ja);
    }
    h
}

/// `H_dir = sum_a J_a sigma_a (x) sigma_a` on the two qubits.
pub fn direct_hamiltonian(jdir: ExchangeCoupling) -> ComplexMatrix {
    let sigmas = pauli();
    let mut h = ComplexMatrix::zeros(4, 4);
    for (ja, sig) in jdir.as_array().into_iter().zip(&sigmas) {
        h = &h + &kron(sig, sig).scale_real(ja);
    }
    h
}

/// Total z-magnetisation `S_z (x) I (x) I + I (x) sigma_z/2 (x) I + I (x) I (x) sigma_z/2`.
pub fn total_sz(s: SpinMagnitude) -> ComplexMatrix {
    let dims = SystemDims::new(s);
    let [_, _, sz] = spin_operators(s);
    let [_, _, pz] = pauli();
    let half_pz = pz.scale_real(0.5);
    let c = embed(&sz, Slot::C, dims).expect("C-slot operator");
    let a = embed(&half_pz, Slot::A, dims).expect("A-slot operator");
    let b = embed(&half_pz, Slot::B, dims).expect("B-slot operator");
    &(&c + &a) + &b
}

fn warn_outside_window(dt: f64) {
    if dt.abs() > LEADING_ORDER_WINDOW {
        log::warn!(
            "leading-order concurrence evaluated at |dt| = {} beyond the {LEADING_ORDER_WINDOW} window",
            dt.abs()
        );
    }
}

/// Leading-order concurrence `2|dt (Jy - Jx cos theta_B)|` for qubit A along
/// +z and qubit B tilted by `theta_b` in the xz-plane.
pub fn direct_immediate_concurrence(jdir: ExchangeCoupling, theta_b: f64, dt: f64) -> f64 {
    warn_outside_window(dt);
    2.0 * (dt * (jdir.jy - jdir.jx * theta_b.cos())).abs()
}

/// Bloch unit vector for polar angle `theta` and azimuth `phi`.
pub fn bloch_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn check_unit(n: &[f64; 3], name: &str) -> Result<()> {
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be a unit vector, got norm {norm}"
        )));
    }
    Ok(())
}

/// `M_n = I - n n^T + i [n]_x`, the transverse projector dressed with the
/// cross-product generator.
fn transverse_form(n: &[f64; 3]) -> [[C64; 3]; 3] {
    let cross = [
        [0.0, -n[2], n[1]],
        [n[2], 0.0, -n[0]],
        [-n[1], n[0], 0.0],
    ];
    let mut m = [[C64::new(0.0, 0.0); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let delta = if r == c { 1.0 } else { 0.0 };
            m[r][c] = C64::new(delta - n[r] * n[c], cross[r][c]);
        }
    }
    m
}

/// Leading-order concurrence for a general real coupling tensor and spin
/// directions `n_a`, `n_b`: `2|dt| sqrt(Tr(J M_B J^T conj(M_A)))`.
pub fn immediate_concurrence_tensor(
    j: &[[f64; 3]; 3],
    n_a: &[f64; 3],
    n_b: &[f64; 3],
    dt: f64,
) -> Result<f64> {
    check_unit(n_a, "n_a")?;
    check_unit(n_b, "n_b")?;
    warn_outside_window(dt);
    let ma = transverse_form(n_a);
    let mb = transverse_form(n_b);
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                for q in 0..3 {
                    tr += j[i][k] * mb[k][l] * j[q][l] * ma[q][i].conj();
                }
            }
        }
    }
    Ok(2.0 * dt.abs() * tr.re.max(0.0).sqrt())
}

/// Coordinate-free leading-order concurrence for direct exchange between
/// qubits pointing along `n_a` and `n_b`.
pub fn direct_immediate_concurrence_free(
    jdir: ExchangeCoupling,
    n_a: &[f64; 3],
    n_b: &[f64; 3],
    dt: f64,
) -> Result<f64> {
    immediate_concurrence_tensor(&jdir.tensor(), n_a, n_b, dt)
}

/// Environment preparation for product initial states.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvState {
    /// Pure level with magnetic quantum number `two_m / 2`.
    Level { two_m: i32 },
    /// Diagonal populations in descending-m order.
    Diagonal(Vec<f64>),
}

/// Qubit directions plus the environment preparation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpinSpec {
    pub theta_a: f64,
    pub phi_a: f64,
    pub theta_b: f64,
    pub phi_b: f64,
    pub env: EnvState,
}

impl ProductSpinSpec {
    /// Both qubits along the z axis, `up = true` meaning +z, env in the top level.
    pub fn z_basis(up_a: bool, up_b: bool, s: SpinMagnitude) -> Self {
        let angle = |up: bool| if up { 0.0 } else { std::f64::consts::PI };
        Self {
            theta_a: angle(up_a),
            phi_a: 0.0,
            theta_b: angle(up_b),
            phi_b: 0.0,
            env: EnvState::Level {
                two_m: s.two_s() as i32,
            },
        }
    }

    /// Environment populations in descending-m order after validation.
    pub fn env_populations(&self, s: SpinMagnitude) -> Result<Vec<f64>> {
        match &self.env {
            EnvState::Level { two_m } => {
                let two_s = s.two_s() as i32;
                if two_m.abs() > two_s || (two_s - two_m) % 2 != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "m = {two_m}/2 is not a level of spin {s}"
                    )));
                }
                let mut p = vec![0.0; s.dim()];
                p[((two_s - two_m) / 2) as usize] = 1.0;
                Ok(p)
            }
            EnvState::Diagonal(w) => {
                if w.len() != s.dim() {
                    return Err(Error::InvalidParameter(format!(
                        "spin {s} needs {} environment populations, got {}",
                        s.dim(),
                        w.len()
                    )));
                }
                if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(Error::InvalidParameter(
                        "environment populations must be non-negative".into(),
                    ));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "environment populations sum to {sum}, expected 1"
                    )));
                }
                Ok(w.clone())
            }
        }
    }
}
