//! Time evolution: exact spectral propagation, truncated commutator series,
//! a fourth-order Runge-Kutta integrator, and trajectory sampling.

use std::fmt;

use rayon::prelude::*;

use crate::densemat::{hermitian_eig, spectral_exp_skew, ComplexMatrix, HermitianSpectrum, C64, I, ONE};
use crate::error::{Error, Result};
use crate::hilbert::{
    partial_trace_c_matrix, pauli, spin_operators, DensityOperator, Ket, Space,
};
use crate::monotones::{cne_matrix, monotone_sample_matrix, MonotoneSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    /// Commutator series truncated after the `dt^(order-1)` term.
    Series { order: u8 },
    /// Classical fourth-order Runge-Kutta on the von Neumann equation.
    Integrator { step: f64 },
}

impl Method {
    pub const DEFAULT_INTEGRATOR_STEP: f64 = 1e-4;
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Series { order } => write!(f, "series(k={order})"),
            Method::Integrator { step } => write!(f, "rk4(h={step})"),
        }
    }
}

/// Sampling grid `t_k = k t_max / n_steps` for `k = 0..=n_steps`, mirrored to
/// negative `k` when `emit_negative_times` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSpec {
    pub method: Method,
    pub t_max: f64,
    pub n_steps: usize,
    pub emit_negative_times: bool,
}

impl EvolutionSpec {
    pub fn exact(t_max: f64, n_steps: usize, emit_negative_times: bool) -> Self {
        Self {
            method: Method::Exact,
            t_max,
            n_steps,
            emit_negative_times,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_max must be positive and finite, got {}",
                self.t_max
            )));
        }
        match self.method {
            Method::Series { order } if !(1..=3).contains(&order) => Err(Error::InvalidParameter(
                format!("series order must be 1, 2 or 3, got {order}"),
            )),
            Method::Integrator { step } if !(step.is_finite() && step > 0.0) => Err(
                Error::InvalidParameter(format!("integrator step must be positive, got {step}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.n_steps as i64;
        let start = if self.emit_negative_times { -n } else { 0 };
        (start..=n)
            .map(|k| k as f64 * self.t_max / n as f64)
            .collect()
    }
}

/// Cached spectral decomposition of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectrum: HermitianSpectrum,
}

impl Propagator {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        Ok(Self {
            spectrum: hermitian_eig(h)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn spectrum(&self) -> &HermitianSpectrum {
        &self.spectrum
    }

    /// `U(t) = exp(-i H t)`.
    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        self.spectrum.propagator(t)
    }

    pub fn evolve_matrix(&self, rho0: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
        check_dim(self.dim(), rho0)?;
        self.unitary(t).conjugate_by(rho0)
    }

    pub fn evolve(&self, rho0: &DensityOperator, t: f64) -> Result<DensityOperator> {
        Ok(DensityOperator::trusted(
            rho0.space(),
            self.evolve_matrix(rho0.matrix(), t)?,
        ))
    }

    pub fn evolve_ket(&self, psi0: &Ket, t: f64) -> Result<Vec<C64>> {
        if psi0.amplitudes().len() != self.dim() {
            return Err(Error::Dimension(format!(
                "ket of length {} on a {}-dimensional Hamiltonian",
                psi0.amplitudes().len(),
                self.dim()
            )));
        }
        self.unitary(t).matvec(psi0.amplitudes())
    }
}

fn check_dim(n: usize, rho: &ComplexMatrix) -> Result<()> {
    if rho.rows() != n || rho.cols() != n {
        return Err(Error::Dimension(format!(
            "state is {}x{} but the Hamiltonian is {n}x{n}",
            rho.rows(),
            rho.cols()
        )));
    }
    Ok(())
}

/// `rho(t) = U rho0 U^dagger`.
pub fn evolve_exact(h: &ComplexMatrix, rho0: &DensityOperator, t: f64) -> Result<DensityOperator> {
    check_dim(h.rows(), rho0.matrix())?;
    let u = spectral_exp_skew(h, t)?;
    Ok(DensityOperator::trusted(rho0.space(), u.conjugate_by(rho0.matrix())?))
}

/// `rho0 + (-i)[H, rho0] dt + (1/2)(-i)^2 [H, [H, rho0]] dt^2`, keeping the
/// first `order` terms. The result is Hermitian and trace one but need not be
/// positive.
pub fn evolve_series(h: &ComplexMatrix, rho0: &ComplexMatrix, dt: f64, order: u8) -> Result<ComplexMatrix> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!(
            "series order must be 1, 2 or 3, got {order}"
        )));
    }
    check_dim(h.rows(), rho0)?;
    let mut out = rho0.clone();
    if order >= 2 {
        let c1 = h.commutator(rho0)?;
        out = &out + &c1.scale(-I * dt);
        if order == 3 {
            let c2 = h.commutator(&c1)?;
            out = &out + &c2.scale_real(-0.5 * dt * dt);
        }
    }
    Ok(out.hermitian_part())
}

fn von_neumann_rhs(h: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    h.commutator(rho).expect("square operands").scale(-I)
}

/// Fourth-order Runge-Kutta integration of `d rho/dt = -i[H, rho]` with fixed
/// `step`; the final partial step lands exactly on `t`.
pub fn evolve_rk4(h: &ComplexMatrix, rho0: &ComplexMatrix, t: f64, step: f64) -> Result<ComplexMatrix> {
    check_dim(h.rows(), rho0)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "integrator step must be positive, got {step}"
        )));
    }
    let n_full = (t.abs() / step).floor() as usize;
    let sign = t.signum();
    let mut rho = rho0.clone();
    let advance = |rho: &ComplexMatrix, dt: f64| {
        let k1 = von_neumann_rhs(h, rho);
        let k2 = von_neumann_rhs(h, &(rho + &k1.scale_real(dt / 2.0)));
        let k3 = von_neumann_rhs(h, &(rho + &k2.scale_real(dt / 2.0)));
        let k4 = von_neumann_rhs(h, &(rho + &k3.scale_real(dt)));
        let incr = &(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4);
        rho + &incr.scale_real(dt / 6.0)
    };
    for _ in 0..n_full {
        rho = advance(&rho, sign * step);
    }
    let rest = t - sign * step * n_full as f64;
    if rest != 0.0 {
        rho = advance(&rho, rest);
    }
    Ok(rho)
}

/// Starting point for trajectory sampling.
#[derive(Debug, Clone)]
pub enum InitialState {
    Density(DensityOperator),
    Pure(Ket),
}

impl InitialState {
    pub fn space(&self) -> Space {
        match self {
            InitialState::Density(r) => r.space(),
            InitialState::Pure(k) => k.space(),
        }
    }

    pub fn density(&self) -> DensityOperator {
        match self {
            InitialState::Density(r) => r.clone(),
            InitialState::Pure(k) => k.to_density(),
        }
    }

    fn dim_c(&self) -> Result<usize> {
        match self.space() {
            Space::Full(d) => Ok(d.dim_c()),
            Space::Qubits => Err(Error::Dimension(
                "trajectories need a state on C (x) A (x) B".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub label: String,
    pub method: Method,
    pub max_trace_deviation: f64,
    pub max_hermiticity_deviation: f64,
    pub max_clipped_mass: f64,
}

/// Monotones sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub samples: Vec<MonotoneSample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Builds a trajectory from raw columns, checking ordering and lengths.
    pub fn from_samples(times: Vec<f64>, samples: Vec<MonotoneSample>, label: impl Into<String>) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::Dimension(format!(
                "{} times but {} samples",
                times.len(),
                samples.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "trajectory times must be finite and strictly increasing".into(),
            ));
        }
        let max_clipped_mass = samples_clip_max(&samples);
        Ok(Self {
            times,
            samples,
            meta: TrajectoryMeta {
                label: label.into(),
                method: Method::Exact,
                max_trace_deviation: 0.0,
                max_hermiticity_deviation: 0.0,
                max_clipped_mass,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn negativity(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.negativity).collect()
    }

    pub fn cne(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.cne).collect()
    }

    /// Largest gap between consecutive times.
    pub fn max_spacing(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the sample at `t` (exact match within 1e-12).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&x| (x - t).abs() <= 1e-12)
    }

    /// Samples with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Trajectory {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= lo && self.times[i] <= hi)
            .collect();
        Trajectory {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            samples: keep.iter().map(|&i| self.samples[i]).collect(),
            meta: self.meta.clone(),
        }
    }
}

fn samples_clip_max(samples: &[MonotoneSample]) -> f64 {
    samples.iter().map(|s| s.clipped_mass).fold(0.0, f64::max)
}

struct Point {
    sample: MonotoneSample,
    trace_dev: f64,
    herm_dev: f64,
}

fn reduced_point(reduced: &ComplexMatrix, allow_indefinite: bool) -> Result<Point> {
    let trace_dev = (reduced.trace() - ONE).norm();
    let herm_dev = reduced.hermiticity_deviation();
    let sample = if allow_indefinite {
        let (cne, negative_count) = cne_matrix(reduced)?;
        let ev = crate::monotones::partial_transpose_spectrum(reduced)?;
        MonotoneSample {
            cne,
            negativity: ev.iter().filter(|&&l| l < 0.0).map(|l| -l).sum(),
            concurrence: f64::NAN,
            negative_count,
            clipped_mass: 0.0,
        }
    } else {
        monotone_sample_matrix(reduced)?
    };
    Ok(Point {
        sample,
        trace_dev,
        herm_dev,
    })
}

/// Evolves, traces out the environment and evaluates the monotones at every
/// grid time. Times are processed in parallel and merged in grid order.
///
/// Series trajectories may leave the positive cone, so their concurrence
/// column is NaN.
pub fn sample_trajectory(
    h: &ComplexMatrix,
    initial: &InitialState,
    spec: &EvolutionSpec,
    label: impl Into<String>,
) -> Result<Trajectory> {
    spec.validate()?;
    let dim_c = initial.dim_c()?;
    if h.rows() != initial.space().dim() {
        return Err(Error::Dimension(format!(
            "Hamiltonian is {}x{} but the state lives in dimension {}",
            h.rows(),
            h.cols(),
            initial.space().dim()
        )));
    }
    let times = spec.times();
    let propagator = match spec.method {
        Method::Exact => Some(Propagator::new(h)?),
        _ => None,
    };
    let rho0 = initial.density();

    let points: Vec<Point> = times
        .par_iter()
        .map(|&t| {
            let full = match (&spec.method, initial) {
                (Method::Exact, InitialState::Pure(psi)) => {
                    let v = propagator.as_ref().expect("exact").evolve_ket(psi, t)?;
                    ComplexMatrix::outer(&v, &v)
                }
                (Method::Exact, InitialState::Density(r)) => {
                    propagator.as_ref().expect("exact").evolve_matrix(r.matrix(), t)?
                }
                (Method::Series { order }, _) => evolve_series(h, rho0.matrix(), t, *order)?,
                (Method::Integrator { step }, _) => evolve_rk4(h, rho0.matrix(), t, *step)?,
            };
            let reduced = partial_trace_c_matrix(&full, dim_c)?;
            reduced_point(&reduced, matches!(spec.method, Method::Series { .. }))
        })
        .collect::<Vec<Result<Point>>>()
        .into_iter()
        .zip(&times)
        .map(|(p, &t)| p.map_err(|e| e.at_time(t)))
        .collect::<Result<_>>()?;

    let samples: Vec<MonotoneSample> = points.iter().map(|p| p.sample).collect();
    let meta = TrajectoryMeta {
        label: label.into(),
        method: spec.method,
        max_trace_deviation: points.iter().map(|p| p.trace_dev).fold(0.0, f64::max),
        max_hermiticity_deviation: points.iter().map(|p| p.herm_dev).fold(0.0, f64::max),
        max_clipped_mass: samples_clip_max(&samples),
    };
    Ok(Trajectory {
        times,
        samples,
        meta,
    })
}

/// Unitary part `exp(-i pi S_y) (x) sigma_y (x) sigma_y` of the antiunitary
/// spin flip.
pub fn time_reversal_unitary(space: Space) -> Result<ComplexMatrix> {
    let [_, sy, _] = pauli();
    let qubits = crate::densemat::kron(&sy, &sy);
    match space {
        Space::Qubits => Ok(qubits),
        Space::Full(d) => {
            let [_, sy_c, _] = spin_operators(d.spin);
            let rot = spectral_exp_skew(&sy_c, std::f64::consts::PI)?;
            Ok(crate::densemat::kron(&rot, &qubits))
        }
    }
}

/// `Theta rho* Theta^dagger`.
pub fn time_reversal(rho: &DensityOperator) -> Result<DensityOperator> {
    let theta = time_reversal_unitary(rho.space())?;
    let flipped = theta.conjugate_by(&rho.matrix().conj())?;
    Ok(DensityOperator::trusted(rho.space(), flipped.hermitian_part()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{random_density_matrix, SpinMagnitude, SystemDims};
    use crate::model::{spin_star_hamiltonian, ExchangeCoupling, ProductSpinSpec};
    use crate::states::product_initial;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn uud(s: SpinMagnitude) -> DensityOperator {
        product_initial(&ProductSpinSpec::z_basis(true, false, s), s).unwrap()
    }

    #[test]
    fn exact_at_zero_is_initial_state() {
        let s = SpinMagnitude::HALF;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(1.0, 1.0, 1.0), s);
        let rho = uud(s);
        let out = evolve_exact(&h, &rho, 0.0).unwrap();
        assert!(out.matrix().distance(rho.matrix()) < 1e-15);
    }

    #[test]
    fn stationary_state_does_not_move() {
        let s = SpinMagnitude::ONE;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(0.0, 0.0, 1.0), s);
        let rho = uud(s);
        for t in [0.3, 2.0, 17.0] {
            let out = evolve_exact(&h, &rho, t).unwrap();
            assert!(out.matrix().distance(rho.matrix()) < 1e-13);
        }
    }

    #[test]
    fn exact_matches_rk4_oracle() {
        let s = SpinMagnitude::HALF;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(1.0, 1.0, 1.0), s);
        let rho = uud(s);
        let exact = evolve_exact(&h, &rho, 0.5).unwrap();
        let rk = evolve_rk4(&h, rho.matrix(), 0.5, 1e-4).unwrap();
        assert!(exact.matrix().distance(&rk) < 1e-8);
    }

    #[test]
    fn exact_preserves_trace_spectrum_and_energy() {
        let mut rng = StdRng::seed_from_u64(4);
        let s = SpinMagnitude::ONE;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(0.7, -0.3, 1.0), s);
        let rho = DensityOperator::new(Space::Full(SystemDims::new(s)), random_density_matrix(&mut rng, 12)).unwrap();
        let out = evolve_exact(&h, &rho, 3.7).unwrap();
        assert!((out.matrix().trace() - ONE).norm() < 1e-10);
        assert!(out.matrix().is_hermitian());
        assert!((out.purity() - rho.purity()).abs() < 1e-10);
        let e0 = rho.expectation(&h).unwrap();
        let e1 = out.expectation(&h).unwrap();
        assert!((e0 - e1).norm() < 1e-10);
        let ev0 = crate::densemat::eigvalsh(rho.matrix()).unwrap();
        let ev1 = crate::densemat::eigvalsh(out.matrix()).unwrap();
        for (a, b) in ev0.iter().zip(&ev1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn series_first_order_is_identity_map() {
        let s = SpinMagnitude::HALF;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(1.0, 0.5, 1.0), s);
        let rho = uud(s);
        let out = evolve_series(&h, rho.matrix(), 0.01, 1).unwrap();
        assert_eq!(&out, rho.matrix());
        assert!(evolve_series(&h, rho.matrix(), 0.01, 4).is_err());
    }

    #[test]
    fn series_is_hermitian_and_trace_one() {
        let s = SpinMagnitude::ONE;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(1.0, 0.5, 1.0), s);
        let rho = uud(s);
        for k in 1..=3 {
            let out = evolve_series(&h, rho.matrix(), 0.05, k).unwrap();
            assert!(out.is_hermitian());
            assert!((out.trace() - ONE).norm() < 1e-14);
        }
    }

    #[test]
    fn third_order_series_converges_cubically() {
        let s = SpinMagnitude::HALF;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(1.0, 0.5, 1.0), s);
        let rho = uud(s);
        let gap = |dt: f64| {
            let exact = evolve_exact(&h, &rho, dt).unwrap();
            evolve_series(&h, rho.matrix(), dt, 3).unwrap().distance(exact.matrix())
        };
        let g = [gap(1e-2), gap(5e-3), gap(2.5e-3)];
        let p1 = (g[0] / g[1]).log2();
        let p2 = (g[1] / g[2]).log2();
        assert!(p1 >= 2.9 && p2 >= 2.9, "observed orders {p1}, {p2}");
        let c = [g[0] / 1e-6, g[1] / 1.25e-7, g[2] / 1.5625e-8];
        assert!((c[0] / c[2] - 1.0).abs() < 0.05, "{c:?}");
    }

    #[test]
    fn negative_time_grid_is_symmetric() {
        let spec = EvolutionSpec::exact(1.0, 4, true);
        assert_eq!(spec.times(), vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(EvolutionSpec::exact(1.0, 0, false).validate().is_err());
        let bad = EvolutionSpec {
            method: Method::Series { order: 0 },
            ..EvolutionSpec::exact(1.0, 2, false)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pure_and_density_paths_agree() {
        let s = SpinMagnitude::ONE;
        let h = spin_star_hamiltonian(ExchangeCoupling::new(-0.5, -0.5, -1.0), s);
        let w = crate::states::esp_weighting(crate::states::WeightingId::new(9).unwrap(), 0.01).unwrap();
        let psi = crate::states::pure_initial(&w, s).unwrap();
        let spec = EvolutionSpec::exact(1.0, 20, true);
        let a = sample_trajectory(&h, &InitialState::Pure(psi.clone()), &spec, "ket").unwrap();
        let b = sample_trajectory(&h, &InitialState::Density(psi.to_density()), &spec, "dm").unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.cne - y.cne).abs() < 1e-12);
        }
        assert!(a.meta.max_trace_deviation < 1e-12);
    }

    #[test]
    fn sampling_rejects_reduced_state() {
        let h = ComplexMatrix::identity(4);
        let rho = DensityOperator::qubits(ComplexMatrix::identity(4).scale_real(0.25)).unwrap();
        let spec = EvolutionSpec::exact(1.0, 4, false);
        assert!(sample_trajectory(&h, &InitialState::Density(rho), &spec, "x").is_err());
    }

    #[test]
    fn time_reversal_is_involution_up_to_sign() {
        let mut rng = StdRng::seed_from_u64(8);
        for s in [SpinMagnitude::HALF, SpinMagnitude::ONE] {
            let space = Space::Full(SystemDims::new(s));
            let rho = DensityOperator::new(space, random_density_matrix(&mut rng, space.dim())).unwrap();
            let twice = time_reversal(&time_reversal(&rho).unwrap()).unwrap();
            assert!(twice.matrix().distance(rho.matrix()) < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_time_reversal_even() {
        for s in [SpinMagnitude::HALF, SpinMagnitude::ONE, SpinMagnitude::THREE_HALVES] {
            let h = spin_star_hamiltonian(ExchangeCoupling::new(0.3, -0.8, 1.1), s);
            let theta = time_reversal_unitary(Space::Full(SystemDims::new(s))).unwrap();
            let flipped = theta.conjugate_by(&h.conj()).unwrap();
            assert!(flipped.distance(&h) < 1e-12);
        }
    }
}
