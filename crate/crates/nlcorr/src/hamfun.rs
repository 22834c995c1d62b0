//! Hamiltonian functionals H(rho), their induced Hermitian gradient operators
//! H(rho)_{ba} = dH/d(rho_{ab}), and a sampled verifier for phase invariance
//! of functionals defined directly on state vectors.
//!
//! The shipped families carry analytic gradients; central finite differences
//! exist only as a cross-check (`numeric_grad`).

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qstate::{re, CMatrix, DensityMatrix, Observable, StateVector};

/// A real-valued functional of density matrices together with its gradient
/// operator. The mean-field variant is the Curie-Weiss nonlinearity
/// c [Tr(rho sigma_z)]^2 / 2 with gradient c Tr(rho sigma_z) sigma_z.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianFunctional {
    /// H(rho) = 0. Free evolution.
    Zero { dim: usize },
    /// H(rho) = Tr(rho h0); gradient is h0 independent of rho.
    Linear { h0: Observable },
    /// H(rho) = coeff [Tr(rho sigma_z)]^2 / 2 on a qubit.
    CurieWeiss { coeff: f64 },
}

impl HamiltonianFunctional {
    pub fn zero(dim: usize) -> Self {
        HamiltonianFunctional::Zero { dim }
    }

    pub fn linear(h0: Observable) -> Self {
        HamiltonianFunctional::Linear { h0 }
    }

    pub fn curie_weiss(coeff: f64) -> Self {
        HamiltonianFunctional::CurieWeiss { coeff }
    }

    pub fn dim(&self) -> usize {
        match self {
            HamiltonianFunctional::Zero { dim } => *dim,
            HamiltonianFunctional::Linear { h0 } => h0.dim(),
            HamiltonianFunctional::CurieWeiss { .. } => 2,
        }
    }

    /// True when the closed-form sigma_z propagator applies.
    pub fn is_mean_field(&self) -> bool {
        matches!(
            self,
            HamiltonianFunctional::Zero { dim: 2 } | HamiltonianFunctional::CurieWeiss { .. }
        )
    }

    /// The Curie-Weiss coefficient, with the zero functional counting as 0.
    pub fn mean_field_coeff(&self) -> Result<f64> {
        match self {
            HamiltonianFunctional::Zero { dim: 2 } => Ok(0.0),
            HamiltonianFunctional::CurieWeiss { coeff } => Ok(*coeff),
            _ => Err(Error::ClosedFormUnavailable),
        }
    }

    pub fn eval(&self, rho: &DensityMatrix) -> Result<f64> {
        self.check_dim(rho.dim())?;
        Ok(self.eval_raw(rho.matrix()))
    }

    pub fn grad(&self, rho: &DensityMatrix) -> Result<Observable> {
        self.check_dim(rho.dim())?;
        Observable::new(self.grad_raw(rho.matrix()))
    }

    /// Evaluation on a raw Hermitian matrix, without density-matrix
    /// validation. Finite-difference perturbations and integrator internals
    /// go through here.
    pub(crate) fn eval_raw(&self, rho: &CMatrix) -> f64 {
        match self {
            HamiltonianFunctional::Zero { .. } => 0.0,
            HamiltonianFunctional::Linear { h0 } => (h0.matrix() * rho).trace().re,
            HamiltonianFunctional::CurieWeiss { coeff } => {
                let m = (Observable::sigma_z().matrix() * rho).trace().re;
                coeff * m * m / 2.0
            }
        }
    }

    pub(crate) fn grad_raw(&self, rho: &CMatrix) -> CMatrix {
        match self {
            HamiltonianFunctional::Zero { dim } => CMatrix::zeros(*dim, *dim),
            HamiltonianFunctional::Linear { h0 } => h0.matrix().clone(),
            HamiltonianFunctional::CurieWeiss { coeff } => {
                let m = (Observable::sigma_z().matrix() * rho).trace().re;
                Observable::sigma_z().matrix() * re(coeff * m)
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if self.dim() != got {
            return Err(Error::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }
}

/// Builds the linear functional Tr(rho h0); rejects non-Hermitian input.
pub fn linear_functional(h0: Observable) -> HamiltonianFunctional {
    HamiltonianFunctional::linear(h0)
}

/// Builds the qubit Curie-Weiss mean-field functional.
pub fn curie_weiss(coeff: f64) -> HamiltonianFunctional {
    HamiltonianFunctional::curie_weiss(coeff)
}

/// Central finite-difference estimate of the gradient operator.
///
/// Conjugate entry pairs (rho_ab, rho_ba) are perturbed jointly, by
/// (eps, eps) for the real direction and (i eps, -i eps) for the imaginary
/// one, so every probe stays on the Hermitian manifold. The result is
/// transposed into the (b,a) index convention used by `grad`.
pub fn numeric_grad(
    f: &HamiltonianFunctional,
    rho: &DensityMatrix,
    h: f64,
) -> Result<Observable> {
    if !(1e-8..=1e-3).contains(&h) {
        return Err(Error::BadGradStep(h));
    }
    let d = rho.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: d });
    }
    let m = rho.matrix();
    // g[(a, b)] accumulates dH/d(rho_ab).
    let mut g = CMatrix::zeros(d, d);
    for a in 0..d {
        // Diagonal: dH/d(rho_aa) from a single real perturbation.
        let mut p = m.clone();
        p[(a, a)] += re(h);
        let mut q = m.clone();
        q[(a, a)] -= re(h);
        g[(a, a)] = re((f.eval_raw(&p) - f.eval_raw(&q)) / (2.0 * h));
        for b in (a + 1)..d {
            // r = g_ab + g_ba from the symmetric real perturbation.
            let mut p = m.clone();
            p[(a, b)] += re(h);
            p[(b, a)] += re(h);
            let mut q = m.clone();
            q[(a, b)] -= re(h);
            q[(b, a)] -= re(h);
            let r = (f.eval_raw(&p) - f.eval_raw(&q)) / (2.0 * h);
            // s = i g_ab - i g_ba from the antisymmetric imaginary one.
            let ih = Complex64::new(0.0, h);
            let mut p = m.clone();
            p[(a, b)] += ih;
            p[(b, a)] -= ih;
            let mut q = m.clone();
            q[(a, b)] -= ih;
            q[(b, a)] += ih;
            let s = (f.eval_raw(&p) - f.eval_raw(&q)) / (2.0 * h);
            let g_ab = (re(r) - Complex64::new(0.0, 1.0) * s) * re(0.5);
            let g_ba = (re(r) + Complex64::new(0.0, 1.0) * s) * re(0.5);
            g[(a, b)] = g_ab;
            g[(b, a)] = g_ba;
        }
    }
    // Operator entries are G_{ba} = dH/d(rho_ab).
    Observable::new(g.transpose())
}

/// A real functional of state vectors, used only by the phase-invariance
/// verifier. Functionals that fail the check are representable here but are
/// never evolvable.
pub struct PsiFunctional {
    dim: usize,
    eval: Box<dyn Fn(&StateVector) -> f64 + Send + Sync>,
}

impl PsiFunctional {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&StateVector) -> f64 + Send + Sync + 'static,
    {
        PsiFunctional { dim, eval: Box::new(eval) }
    }

    /// The psi-form of a density-matrix functional, H(|psi><psi|).
    pub fn from_functional(f: HamiltonianFunctional) -> Self {
        let dim = f.dim();
        PsiFunctional::new(dim, move |psi| f.eval_raw(DensityMatrix::from_pure(psi).matrix()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, psi: &StateVector) -> f64 {
        (self.eval)(psi)
    }
}

/// Sampled check that f(e^{i alpha} psi) = f(psi). Returning true is
/// necessary, not sufficient, for the functional to descend to density
/// matrices. Sampling is deterministic in the seed.
pub fn verify_phase_invariance(f: &PsiFunctional, samples: usize, seed: u64) -> bool {
    assert!(samples >= 10, "need at least 10 samples");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let psi = random_state(f.dim(), &mut rng);
        let alpha: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let phase = Complex64::new(0.0, alpha).exp();
        let rotated = StateVector::from_raw(psi.amplitudes() * phase);
        if (f.eval(&rotated) - f.eval(&psi)).abs() >= 1e-10 {
            return false;
        }
    }
    true
}

/// Haar-ish random normalized state from complex Gaussian amplitudes.
pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> StateVector {
    loop {
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if let Ok(s) = StateVector::new(amps) {
            return s;
        }
    }
}

/// Random density matrix from a mixture of random pure states.
pub fn random_density<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    let k = dim + 1;
    let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut m = CMatrix::zeros(dim, dim);
    for w in weights {
        let psi = random_state(dim, rng);
        m += DensityMatrix::from_pure(&psi).matrix() * re(w);
    }
    DensityMatrix::new(m).expect("convex mixture of pure states is a density matrix")
}
