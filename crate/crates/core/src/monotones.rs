//! Entanglement quantifiers for two-qubit states.

use crate::densemat::{eigvalsh, hermitian_eig, kron, ComplexMatrix, HermitianSpectrum, ZERO};
use crate::error::{Error, Result};
use crate::hilbert::{partial_transpose_b_matrix, pauli, DensityOperator};

/// Eigenvalues of the partial transpose below `-NEGATIVE_EIGENVALUE_FLOOR`
/// count as negative.
pub const NEGATIVE_EIGENVALUE_FLOOR: f64 = 1e-12;
/// Largest negative spectral mass removed before taking matrix square roots.
pub const MAX_CLIPPED_MASS: f64 = 1e-9;
/// Boolean entanglement decisions use this threshold.
pub const ENTANGLEMENT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneSample {
    /// Smallest eigenvalue of the partial transpose.
    pub cne: f64,
    pub negativity: f64,
    pub concurrence: f64,
    pub negative_count: usize,
    /// Negative spectral mass of the state removed before computing concurrence.
    pub clipped_mass: f64,
}

impl MonotoneSample {
    pub fn is_entangled(&self) -> bool {
        self.negativity > ENTANGLEMENT_THRESHOLD
    }
}

fn check_two_qubit(m: &ComplexMatrix) -> Result<()> {
    if m.rows() != 4 || m.cols() != 4 {
        return Err(Error::Dimension(format!(
            "two-qubit monotones need a 4x4 matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Ascending spectrum of the partial transpose of a raw 4x4 matrix.
pub fn partial_transpose_spectrum(m: &ComplexMatrix) -> Result<Vec<f64>> {
    eigvalsh(&partial_transpose_b_matrix(m)?)
}

/// `(lambda*, negative_count)` for a raw 4x4 Hermitian matrix, which need not
/// be positive (truncated-series states are not).
pub fn cne_matrix(m: &ComplexMatrix) -> Result<(f64, usize)> {
    let ev = partial_transpose_spectrum(m)?;
    Ok((ev[0], count_negative(&ev)))
}

fn count_negative(ev: &[f64]) -> usize {
    ev.iter().filter(|&&l| l < -NEGATIVE_EIGENVALUE_FLOOR).count()
}

fn negative_mass(ev: &[f64]) -> f64 {
    ev.iter().filter(|&&l| l < 0.0).map(|l| -l).sum()
}

pub fn cne(rho: &DensityOperator) -> Result<(f64, usize)> {
    cne_matrix(rho.matrix())
}

/// Absolute sum of the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &DensityOperator) -> Result<f64> {
    Ok(negative_mass(&partial_transpose_spectrum(rho.matrix())?))
}

/// PSD repair: returns the clipped spectrum and the removed negative mass.
fn clipped_spectrum(m: &ComplexMatrix) -> Result<(HermitianSpectrum, f64)> {
    let spec = hermitian_eig(m)?;
    let clipped_mass = negative_mass(&spec.eigenvalues);
    if clipped_mass > MAX_CLIPPED_MASS {
        return Err(Error::Numerics(format!(
            "state has negative spectral mass {clipped_mass:e}; refusing to clip"
        )));
    }
    Ok((spec, clipped_mass))
}

/// Singular values of `tau = W^dag (Y (x) Y) W*` where `rho = W W^dag`. These
/// are the square roots of the spectrum of `sqrt(rho) rho~ sqrt(rho)`, read off
/// the Hermitian embedding `[[0, tau], [tau^dag, 0]]` so that small values keep
/// absolute rather than square-root accuracy.
fn wootters_gammas(spec: &HermitianSpectrum) -> Result<Vec<f64>> {
    let v = &spec.eigenvectors;
    let w = ComplexMatrix::from_fn(4, 4, |r, c| v[(r, c)] * spec.eigenvalues[c].max(0.0).sqrt());
    let [_, sy, _] = pauli();
    let yy = kron(&sy, &sy);
    let tau = &(&w.adjoint() * &yy) * &w.conj();
    let tau_h = tau.adjoint();
    let embed = ComplexMatrix::from_fn(8, 8, |r, c| match (r < 4, c < 4) {
        (true, false) => tau[(r, c - 4)],
        (false, true) => tau_h[(r - 4, c)],
        _ => ZERO,
    });
    let ev = eigvalsh(&embed)?;
    let mut gamma: Vec<f64> = ev[4..].iter().map(|g| g.max(0.0)).collect();
    gamma.sort_by(|a, b| b.total_cmp(a));
    Ok(gamma)
}

fn concurrence_with_clip(m: &ComplexMatrix) -> Result<(f64, f64)> {
    check_two_qubit(m)?;
    let (spec, clipped_mass) = clipped_spectrum(m)?;
    let gamma = wootters_gammas(&spec)?;
    let c = gamma[0] - gamma[1] - gamma[2] - gamma[3];
    Ok((c.max(0.0), clipped_mass))
}

/// Wootters concurrence `max(0, g1 - g2 - g3 - g4)` where `g_i` are the
/// decreasing square roots of the spectrum of `sqrt(rho) rho~ sqrt(rho)`,
/// with `rho~ = (Y (x) Y) rho* (Y (x) Y)`.
pub fn concurrence(rho: &DensityOperator) -> Result<f64> {
    Ok(concurrence_with_clip(rho.matrix())?.0)
}

/// All three quantifiers for one reduced state.
pub fn monotone_sample(rho: &DensityOperator) -> Result<MonotoneSample> {
    monotone_sample_matrix(rho.matrix())
}

pub(crate) fn monotone_sample_matrix(m: &ComplexMatrix) -> Result<MonotoneSample> {
    check_two_qubit(m)?;
    let ev = partial_transpose_spectrum(m)?;
    let (concurrence, clipped_mass) = concurrence_with_clip(m)?;
    Ok(MonotoneSample {
        cne: ev[0],
        negativity: negative_mass(&ev),
        concurrence,
        negative_count: count_negative(&ev),
        clipped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densemat::{ComplexMatrix, C64, ZERO};
    use crate::hilbert::{random_qubit_density, Space};
    use crate::states::{bell_ket, bell_mixture, esp_weighting, BellFamily, BellKind, Sign, WeightingId};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn singlet() -> DensityOperator {
        bell_ket(BellKind::new(BellFamily::Beta, Sign::Minus, 0.0))
            .unwrap()
            .to_density()
    }

    fn product_uu() -> DensityOperator {
        DensityOperator::qubits(ComplexMatrix::diag_real(&[1.0, 0.0, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn singlet_values() {
        let s = monotone_sample(&singlet()).unwrap();
        assert!((s.cne + 0.5).abs() < 1e-14);
        assert!((s.negativity - 0.5).abs() < 1e-14);
        assert!((s.concurrence - 1.0).abs() < 1e-12);
        assert_eq!(s.negative_count, 1);
    }

    #[test]
    fn product_values() {
        let s = monotone_sample(&product_uu()).unwrap();
        assert!(s.cne >= -1e-12);
        assert_eq!(s.negativity, 0.0);
        assert_eq!(s.concurrence, 0.0);
        assert_eq!(s.negative_count, 0);
    }

    #[test]
    fn two_bell_mixture_values() {
        let w = esp_weighting(WeightingId::new(1).unwrap(), 0.01).unwrap();
        let rho = bell_mixture(&w);
        let (l, n) = cne(&rho).unwrap();
        assert!((l + 0.005).abs() < 1e-14);
        assert_eq!(n, 1);
        assert!((concurrence(&rho).unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn werner_state_negativity() {
        let w = 0.5;
        let singlet = singlet().into_matrix();
        let m = &singlet.scale_real(w) + &ComplexMatrix::identity(4).scale_real((1.0 - w) / 4.0);
        let rho = DensityOperator::qubits(m).unwrap();
        let oracle = -((1.0 - 3.0 * w) / 4.0).min(0.0);
        assert!((negativity(&rho).unwrap() - oracle).abs() < 1e-14);
        assert!((negativity(&rho).unwrap() - 0.125).abs() < 1e-14);
    }

    #[test]
    fn pure_state_concurrence_oracle() {
        let (a, d) = (0.8f64.sqrt(), 0.2f64.sqrt());
        let v = [C64::new(a, 0.0), ZERO, ZERO, C64::new(d, 0.0)];
        let rho = DensityOperator::qubits(ComplexMatrix::outer(&v, &v)).unwrap();
        let oracle = 2.0 * (a * d).abs();
        assert!((concurrence(&rho).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.8).abs() < 1e-15);
    }

    #[test]
    fn faithfulness_on_random_states() {
        let mut rng = StdRng::seed_from_u64(17);
        let mut entangled = 0;
        for _ in 0..1000 {
            let rho = random_qubit_density(&mut rng);
            let s = monotone_sample(&rho).unwrap();
            assert_eq!(
                s.negativity > ENTANGLEMENT_THRESHOLD,
                s.concurrence > ENTANGLEMENT_THRESHOLD,
                "{s:?}"
            );
            assert!(s.negative_count <= 1);
            entangled += s.is_entangled() as usize;
        }
        assert!(entangled > 50 && entangled < 950, "{entangled}");
    }

    #[test]
    fn large_negative_mass_is_refused() {
        let m = ComplexMatrix::diag_real(&[1.1, 0.0, 0.0, -0.1]);
        let err = concurrence_with_clip(&m).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn wrong_dimension_rejected() {
        let rho = DensityOperator::new(
            Space::Full(crate::hilbert::SystemDims::new(crate::hilbert::SpinMagnitude::HALF)),
            ComplexMatrix::identity(8).scale_real(0.125),
        )
        .unwrap();
        assert!(matches!(monotone_sample(&rho), Err(Error::Dimension(_))));
    }
}
