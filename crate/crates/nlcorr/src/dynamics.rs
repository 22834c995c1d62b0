//! Time evolution of the two-particle pair: a fixed-step RK4 integrator for
//! the mean-field nonlinear pair equation with detection-time step functions,
//! the closed-form mean-field propagator, and the factorization of the flow
//! into effective one-particle unitaries.
//!
//! The pair evolves under
//!
//!   i dPsi/dt = [theta(t - t1) H1(rho1) (x) I + theta(t - t2) I (x) H2(rho2)] Psi
//!
//! where theta(x) = 1 for x < 0 and 0 otherwise, so the particle-k term
//! switches off at its detection time. Integration is segmented exactly at
//! the detection times; no step straddles a discontinuity. The norm is never
//! corrected during integration, only measured and asserted at the end.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamfun::HamiltonianFunctional;
use crate::qstate::{partial_trace, re, CMatrix, CVector, DensityMatrix, Observable, StateVector, Subsystem};

/// theta(x) = 1 for x < 0, 0 otherwise. At the cutoff itself the Hamiltonian
/// is already off.
pub fn theta(x: f64) -> f64 {
    if x < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// kappa(t, tk) = integral of theta(tau - tk) over [0, t] = min(t, tk).
pub fn kappa(t: f64, t_k: f64) -> f64 {
    t.min(t_k)
}

/// The step function theta(t - cutoff) switching one Hamiltonian off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFunction {
    pub cutoff: f64,
}

impl StepFunction {
    pub fn at(&self, t: f64) -> f64 {
        theta(t - self.cutoff)
    }

    /// Effective elapsed interaction time up to `t`.
    pub fn elapsed(&self, t: f64) -> f64 {
        kappa(t, self.cutoff)
    }
}

/// Pair of detection times parameterizing the open-system Hamiltonian.
/// `+inf` entries recover the closed-system dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSchedule {
    pub t1: f64,
    pub t2: f64,
}

impl DetectionSchedule {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        for t in [t1, t2] {
            if t.is_nan() || t < 0.0 {
                return Err(Error::NonFiniteDetection(t));
            }
        }
        Ok(DetectionSchedule { t1, t2 })
    }

    /// Closed system: both detections pushed to infinity.
    pub fn closed() -> Self {
        DetectionSchedule { t1: f64::INFINITY, t2: f64::INFINITY }
    }

    pub fn require_finite(&self) -> Result<()> {
        for t in [self.t1, self.t2] {
            if !t.is_finite() {
                return Err(Error::NonFiniteDetection(t));
            }
        }
        Ok(())
    }
}

/// Dynamics backend selector. The closed form applies to mean-field
/// (Curie-Weiss or zero) functionals only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    ClosedForm,
    Integrator,
}

/// Picks the closed form whenever both functionals admit it.
pub fn default_engine(f1: &HamiltonianFunctional, f2: &HamiltonianFunctional) -> Engine {
    if f1.is_mean_field() && f2.is_mean_field() {
        Engine::ClosedForm
    } else {
        Engine::Integrator
    }
}

/// State of the pair at a query time, with both reduced density matrices.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Raw evolved state. Integrator output carries the measured norm drift;
    /// closed-form output is unitary to machine precision.
    pub state: StateVector,
    pub rho1: DensityMatrix,
    pub rho2: DensityMatrix,
    /// Sampled states along the trajectory, when requested.
    pub trajectory: Option<Vec<(f64, StateVector)>>,
}

impl EvolutionResult {
    fn from_raw(
        y: CVector,
        dims: (usize, usize),
        trajectory: Option<Vec<(f64, StateVector)>>,
    ) -> Result<Self> {
        // Reduced matrices come from the normalized copy so their unit-trace
        // invariant is independent of integrator drift.
        let n = y.norm();
        let normalized = &y / re(n);
        let rho1 = DensityMatrix::new(partial_trace(&normalized, Subsystem::One, dims.0, dims.1))?;
        let rho2 = DensityMatrix::new(partial_trace(&normalized, Subsystem::Two, dims.0, dims.1))?;
        Ok(EvolutionResult { state: StateVector::from_raw(y), rho1, rho2, trajectory })
    }
}

const NORM_DRIFT_TOL: f64 = 1e-6;
const UNITARITY_TOL: f64 = 1e-6;

/// Evolves the pair under the detection-time-parameterized equation with RK4
/// at fixed step `dt`, segmented at the detection times.
///
/// For `t >= max(t1, t2)` the state is frozen.
pub fn evolve_open(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    t: f64,
    dt: f64,
) -> Result<EvolutionResult> {
    let run = integrate(psi0, f1, f2, sched, t, dt, false, &[])?;
    EvolutionResult::from_raw(run.state, (f1.dim(), f2.dim()), None)
}

/// As `evolve_open`, also recording the state at each requested sample time.
pub fn evolve_open_sampled(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    t: f64,
    dt: f64,
    sample_times: &[f64],
) -> Result<EvolutionResult> {
    let run = integrate(psi0, f1, f2, sched, t, dt, false, sample_times)?;
    let traj = run
        .samples
        .into_iter()
        .map(|s| (s.t, StateVector::from_raw(s.state)))
        .collect();
    EvolutionResult::from_raw(run.state, (f1.dim(), f2.dim()), Some(traj))
}

/// Closed-system evolution: both detections at infinity.
pub fn evolve_closed(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    t: f64,
    dt: f64,
) -> Result<EvolutionResult> {
    evolve_open(psi0, f1, f2, DetectionSchedule::closed(), t, dt)
}

/// Exact mean-field solution: a product of sigma_z rotations whose
/// frequencies are the initial spin averages, with elapsed times clipped at
/// the detection cutoffs.
pub fn curie_weiss_closed_form(
    psi0: &StateVector,
    a: f64,
    b: f64,
    sched: DetectionSchedule,
    t: f64,
) -> Result<EvolutionResult> {
    if psi0.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: psi0.dim() });
    }
    let (v1, v2) = closed_form_propagators(psi0, a, b, sched, t)?;
    let u = crate::qstate::kron(&v1, &v2);
    let y = &u * psi0.amplitudes();
    EvolutionResult::from_raw(y, (2, 2), None)
}

/// The two one-particle unitaries of the mean-field closed form.
pub fn closed_form_propagators(
    psi0: &StateVector,
    a: f64,
    b: f64,
    sched: DetectionSchedule,
    t: f64,
) -> Result<(CMatrix, CMatrix)> {
    let sz = Observable::sigma_z();
    let s1 = psi0.reduce(Subsystem::One, (2, 2))?.expect(&sz)?;
    let s2 = psi0.reduce(Subsystem::Two, (2, 2))?.expect(&sz)?;
    Ok((
        mean_field_propagator(a, s1, kappa(t, sched.t1)),
        mean_field_propagator(b, s2, kappa(t, sched.t2)),
    ))
}

/// exp(-i c s sigma_z tau) as an explicit diagonal.
pub fn mean_field_propagator(coeff: f64, sz_avg: f64, tau: f64) -> CMatrix {
    let phi = coeff * sz_avg * tau;
    let mut u = CMatrix::zeros(2, 2);
    u[(0, 0)] = Complex64::new(0.0, -phi).exp();
    u[(1, 1)] = Complex64::new(0.0, phi).exp();
    u
}

/// Integrates the effective one-particle linear equations
/// i dVk/dt = theta(t - tk) Hk(rho_k(t)) Vk along the pair trajectory and
/// returns (V1, V2) at time `t`. The pair state factorizes as
/// (V1 (x) V2) Psi0.
pub fn effective_propagators(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    t: f64,
    dt: f64,
) -> Result<(CMatrix, CMatrix)> {
    let run = integrate(psi0, f1, f2, sched, t, dt, true, &[])?;
    Ok((run.v1.expect("tracked"), run.v2.expect("tracked")))
}

/// Effective propagators recorded at several times in one pass.
pub(crate) fn effective_propagators_at(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    times: &[f64],
    dt: f64,
) -> Result<Vec<(f64, CMatrix, CMatrix)>> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let run = integrate(psi0, f1, f2, sched, t_end, dt, true, times)?;
    Ok(run
        .samples
        .into_iter()
        .map(|s| (s.t, s.v1.expect("tracked"), s.v2.expect("tracked")))
        .collect())
}

struct Sample {
    t: f64,
    state: CVector,
    v1: Option<CMatrix>,
    v2: Option<CMatrix>,
}

struct Integration {
    state: CVector,
    v1: Option<CMatrix>,
    v2: Option<CMatrix>,
    samples: Vec<Sample>,
}

/// Core fixed-step RK4 pass. Breakpoints are the detection times, the sample
/// times, and the end time; within a segment the active flags are constant.
/// When `track_v` is set the one-particle propagators are integrated as part
/// of the same RK4 system, so their stage Hamiltonians use the exact stage
/// states of the pair.
fn integrate(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    t: f64,
    dt: f64,
    track_v: bool,
    sample_times: &[f64],
) -> Result<Integration> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::BadTimeStep(dt));
    }
    if t < 0.0 || t.is_nan() {
        return Err(Error::InvalidConfig {
            field: "t".into(),
            message: format!("query time must be >= 0, got {t}"),
        });
    }
    let (d1, d2) = (f1.dim(), f2.dim());
    if d1 * d2 != psi0.dim() {
        return Err(Error::DimensionMismatch { expected: d1 * d2, got: psi0.dim() });
    }

    let mut breaks: Vec<f64> = vec![0.0, t];
    for c in [sched.t1, sched.t2] {
        if c.is_finite() && c > 0.0 && c < t {
            breaks.push(c);
        }
    }
    for &s in sample_times {
        if s > 0.0 && s < t {
            breaks.push(s);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut y = psi0.amplitudes().clone();
    let mut v1 = track_v.then(|| CMatrix::identity(d1, d1));
    let mut v2 = track_v.then(|| CMatrix::identity(d2, d2));
    let mut samples: Vec<Sample> = Vec::new();
    let mut record = |t_now: f64, y: &CVector, v1: &Option<CMatrix>, v2: &Option<CMatrix>| {
        samples.push(Sample { t: t_now, state: y.clone(), v1: v1.clone(), v2: v2.clone() });
    };

    let wants = |t_q: f64| sample_times.iter().any(|&s| (s - t_q).abs() < 1e-12);
    if wants(0.0) {
        record(0.0, &y, &v1, &v2);
    }

    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let act1 = theta(mid - sched.t1) > 0.0;
        let act2 = theta(mid - sched.t2) > 0.0;
        if act1 || act2 {
            let steps = ((b - a) / dt).ceil().max(1.0) as usize;
            let h = (b - a) / steps as f64;
            for _ in 0..steps {
                rk4_step(&mut y, &mut v1, &mut v2, f1, f2, act1, act2, d1, d2, h);
            }
        }
        if wants(b) {
            record(b, &y, &v1, &v2);
        }
    }

    let drift = (y.norm() - 1.0).abs();
    if drift > NORM_DRIFT_TOL {
        return Err(Error::NormDrift { t, drift });
    }
    for v in [&v1, &v2].into_iter().flatten() {
        let defect = (v.adjoint() * v - CMatrix::identity(v.nrows(), v.ncols())).norm();
        if defect > UNITARITY_TOL {
            return Err(Error::UnitarityDrift { t, drift: defect });
        }
    }
    Ok(Integration { state: y, v1, v2, samples })
}

/// Applies (G1 (x) I + I (x) G2) y without forming the Kronecker product.
fn apply_pair_hamiltonian(
    g1: Option<&CMatrix>,
    g2: Option<&CMatrix>,
    y: &CVector,
    d1: usize,
    d2: usize,
) -> CVector {
    let mut out = CVector::zeros(d1 * d2);
    if let Some(g1) = g1 {
        for i in 0..d1 {
            for j in 0..d2 {
                let mut s = Complex64::default();
                for k in 0..d1 {
                    s += g1[(i, k)] * y[k * d2 + j];
                }
                out[i * d2 + j] += s;
            }
        }
    }
    if let Some(g2) = g2 {
        for i in 0..d1 {
            for j in 0..d2 {
                let mut s = Complex64::default();
                for l in 0..d2 {
                    s += g2[(j, l)] * y[i * d2 + l];
                }
                out[i * d2 + j] += s;
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn rk4_step(
    y: &mut CVector,
    v1: &mut Option<CMatrix>,
    v2: &mut Option<CMatrix>,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    act1: bool,
    act2: bool,
    d1: usize,
    d2: usize,
    h: f64,
) {
    let minus_i = Complex64::new(0.0, -1.0);
    let deriv = |y_s: &CVector, v1_s: &Option<CMatrix>, v2_s: &Option<CMatrix>| {
        let g1 = act1.then(|| f1.grad_raw(&partial_trace(y_s, Subsystem::One, d1, d2)));
        let g2 = act2.then(|| f2.grad_raw(&partial_trace(y_s, Subsystem::Two, d1, d2)));
        let dy = apply_pair_hamiltonian(g1.as_ref(), g2.as_ref(), y_s, d1, d2) * minus_i;
        let dv1 = v1_s.as_ref().map(|v| match &g1 {
            Some(g) => g * v * minus_i,
            None => CMatrix::zeros(d1, d1),
        });
        let dv2 = v2_s.as_ref().map(|v| match &g2 {
            Some(g) => g * v * minus_i,
            None => CMatrix::zeros(d2, d2),
        });
        (dy, dv1, dv2)
    };

    let shift = |y0: &CVector,
                 v10: &Option<CMatrix>,
                 v20: &Option<CMatrix>,
                 k: &(CVector, Option<CMatrix>, Option<CMatrix>),
                 c: f64| {
        (
            y0 + &k.0 * re(c),
            v10.as_ref().map(|v| v + k.1.as_ref().expect("tracked") * re(c)),
            v20.as_ref().map(|v| v + k.2.as_ref().expect("tracked") * re(c)),
        )
    };

    let k1 = deriv(y, v1, v2);
    let (y2, v12, v22) = shift(y, v1, v2, &k1, h / 2.0);
    let k2 = deriv(&y2, &v12, &v22);
    let (y3, v13, v23) = shift(y, v1, v2, &k2, h / 2.0);
    let k3 = deriv(&y3, &v13, &v23);
    let (y4, v14, v24) = shift(y, v1, v2, &k3, h);
    let k4 = deriv(&y4, &v14, &v24);

    let w = h / 6.0;
    *y += (&k1.0 + &k2.0 * re(2.0) + &k3.0 * re(2.0) + &k4.0) * re(w);
    if let Some(v) = v1 {
        *v += (k1.1.expect("tracked")
            + k2.1.expect("tracked") * re(2.0)
            + k3.1.expect("tracked") * re(2.0)
            + k4.1.expect("tracked"))
            * re(w);
    }
    if let Some(v) = v2 {
        *v += (k1.2.expect("tracked")
            + k2.2.expect("tracked") * re(2.0)
            + k3.2.expect("tracked") * re(2.0)
            + k4.2.expect("tracked"))
            * re(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamfun::{curie_weiss, linear_functional};
    use crate::presets;
    use crate::qstate::{expm_minus_i_ht, kron};
    use approx::assert_abs_diff_eq;

    fn vi_c_sched() -> DetectionSchedule {
        DetectionSchedule::new(presets::VI_C_T1, presets::VI_C_T2).unwrap()
    }

    fn state_diff(a: &StateVector, b: &StateVector) -> f64 {
        (a.amplitudes() - b.amplitudes()).norm()
    }

    #[test]
    fn theta_and_kappa() {
        assert_eq!(theta(-0.1), 1.0);
        assert_eq!(theta(0.0), 0.0);
        assert_eq!(theta(0.1), 0.0);
        assert_eq!(kappa(5.0, 3.5), 3.5);
        assert_eq!(kappa(2.0, 3.5), 2.0);
        assert_eq!(kappa(10.0, f64::INFINITY), 10.0);
    }

    #[test]
    fn free_case_is_identity() {
        let psi0 = presets::vi_c_state();
        let f = crate::hamfun::HamiltonianFunctional::zero(2);
        let out = evolve_open(&psi0, &f, &f, vi_c_sched(), 7.0, 1e-2).unwrap();
        assert!(state_diff(&out.state, &psi0) < 1e-14);
    }

    #[test]
    fn integrator_matches_closed_form_on_reference_scenario() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(presets::VI_C_A);
        let f2 = curie_weiss(presets::VI_C_B);
        let rk = evolve_open(&psi0, &f1, &f2, vi_c_sched(), 10.0, 1e-3).unwrap();
        let cf = curie_weiss_closed_form(&psi0, presets::VI_C_A, presets::VI_C_B, vi_c_sched(), 10.0)
            .unwrap();
        assert!(state_diff(&rk.state, &cf.state) < 1e-6);
    }

    #[test]
    fn linear_case_matches_matrix_exponential() {
        let psi0 = presets::vi_c_state();
        let f1 = linear_functional(Observable::sigma_z());
        let f2 = linear_functional(Observable::sigma_x());
        let out = evolve_closed(&psi0, &f1, &f2, 1.0, 1e-3).unwrap();
        let h = kron(Observable::sigma_z().matrix(), &CMatrix::identity(2, 2))
            + kron(&CMatrix::identity(2, 2), Observable::sigma_x().matrix());
        let oracle = expm_minus_i_ht(&h, 1.0) * psi0.amplitudes();
        assert!((out.state.amplitudes() - oracle).norm() < 1e-8);
    }

    #[test]
    fn closed_form_identity_at_zero() {
        let psi0 = presets::vi_c_state();
        let out = curie_weiss_closed_form(&psi0, 8.0, 0.5, vi_c_sched(), 0.0).unwrap();
        assert!(state_diff(&out.state, &psi0) < 1e-15);
    }

    #[test]
    fn closed_form_conserves_sigma_z() {
        let psi0 = presets::vi_c_state();
        let zi = Observable::sigma_z().tensor(&Observable::identity(2)).unwrap();
        let expected = -7.0 * 2.0_f64.sqrt() / 18.0;
        for t in [0.0, 2.5, 7.0, 10.0] {
            let out = curie_weiss_closed_form(&psi0, 8.0, 0.5, vi_c_sched(), t).unwrap();
            assert_abs_diff_eq!(out.state.expect(&zi).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_freezes_after_detection() {
        let psi0 = presets::vi_c_state();
        let ix = Observable::identity(2).tensor(&Observable::sigma_x()).unwrap();
        let vals: Vec<f64> = [8.0, 9.0, 10.0]
            .iter()
            .map(|&t| {
                curie_weiss_closed_form(&psi0, 8.0, 0.5, vi_c_sched(), t)
                    .unwrap()
                    .state
                    .expect(&ix)
                    .unwrap()
            })
            .collect();
        assert_abs_diff_eq!(vals[0], vals[1], epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], vals[2], epsilon = 1e-14);
        // 7.9 differs: particle 2 still rotating.
        let before = curie_weiss_closed_form(&psi0, 8.0, 0.5, vi_c_sched(), 7.9)
            .unwrap()
            .state
            .expect(&ix)
            .unwrap();
        assert!((before - vals[0]).abs() > 1e-4);
    }

    #[test]
    fn integrator_freezes_after_both_detections() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = curie_weiss(0.5);
        let at8 = evolve_open(&psi0, &f1, &f2, vi_c_sched(), 8.0, 1e-3).unwrap();
        let at10 = evolve_open(&psi0, &f1, &f2, vi_c_sched(), 10.0, 1e-3).unwrap();
        assert!(state_diff(&at8.state, &at10.state) < 1e-10);
    }

    #[test]
    fn effective_propagators_zero_functionals() {
        let psi0 = presets::vi_c_state();
        let f = crate::hamfun::HamiltonianFunctional::zero(2);
        let (v1, v2) = effective_propagators(&psi0, &f, &f, vi_c_sched(), 5.0, 1e-2).unwrap();
        assert!((v1 - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((v2 - CMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn effective_propagators_match_closed_form() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = curie_weiss(0.5);
        let (v1, v2) = effective_propagators(&psi0, &f1, &f2, vi_c_sched(), 10.0, 1e-3).unwrap();
        let s = 7.0 * 2.0_f64.sqrt() / 18.0;
        let v1_exact = mean_field_propagator(8.0, -s, 3.5);
        let v2_exact = mean_field_propagator(0.5, s, 8.0);
        assert!((v1 - v1_exact).norm() < 1e-8);
        assert!((v2 - v2_exact).norm() < 1e-8);
    }

    #[test]
    fn effective_propagators_factorize_the_flow() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = curie_weiss(0.5);
        let t = 6.0;
        let (v1, v2) = effective_propagators(&psi0, &f1, &f2, vi_c_sched(), t, 1e-3).unwrap();
        let rebuilt = kron(&v1, &v2) * psi0.amplitudes();
        let direct = evolve_open(&psi0, &f1, &f2, vi_c_sched(), t, 1e-3).unwrap();
        assert!((rebuilt - direct.state.amplitudes()).norm() < 1e-6);
    }

    #[test]
    fn effective_propagators_linear_case() {
        let psi0 = presets::singlet();
        let f1 = linear_functional(Observable::sigma_z());
        let f2 = linear_functional(Observable::sigma_x());
        let sched = DetectionSchedule::new(1.2, 2.4).unwrap();
        let (v1, v2) = effective_propagators(&psi0, &f1, &f2, sched, 3.0, 1e-3).unwrap();
        let v1_exact = expm_minus_i_ht(Observable::sigma_z().matrix(), 1.2);
        let v2_exact = expm_minus_i_ht(Observable::sigma_x().matrix(), 2.4);
        assert!((v1 - v1_exact).norm() < 1e-8);
        assert!((v2 - v2_exact).norm() < 1e-8);
    }

    #[test]
    fn open_equals_closed_before_first_detection() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = curie_weiss(0.5);
        for t in [1.0, 3.5] {
            let open = evolve_open(&psi0, &f1, &f2, vi_c_sched(), t, 1e-3).unwrap();
            let closed = evolve_closed(&psi0, &f1, &f2, t, 1e-3).unwrap();
            assert!(state_diff(&open.state, &closed.state) < 1e-9);
        }
    }

    #[test]
    fn norm_conserved_along_trajectory() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = curie_weiss(0.5);
        let times: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let out =
            evolve_open_sampled(&psi0, &f1, &f2, vi_c_sched(), 10.0, 1e-3, &times).unwrap();
        for (_, s) in out.trajectory.unwrap() {
            assert!((s.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = curie_weiss(0.5);
        let t = 10.0;
        let exact =
            curie_weiss_closed_form(&psi0, 8.0, 0.5, vi_c_sched(), t).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let rk = evolve_open(&psi0, &f1, &f2, vi_c_sched(), t, dt).unwrap();
            errs.push(state_diff(&rk.state, &exact.state));
        }
        assert!(errs[0] / errs[1] >= 10.0);
        assert!(errs[1] / errs[2] >= 10.0);
    }

    #[test]
    fn rejects_bad_step() {
        let psi0 = presets::vi_c_state();
        let f = curie_weiss(1.0);
        assert!(matches!(
            evolve_open(&psi0, &f, &f, vi_c_sched(), 1.0, 0.02),
            Err(Error::BadTimeStep(_))
        ));
        assert!(matches!(
            evolve_open(&psi0, &f, &f, vi_c_sched(), 1.0, 0.0),
            Err(Error::BadTimeStep(_))
        ));
    }

    #[test]
    fn rejects_negative_detection_time() {
        assert!(DetectionSchedule::new(-1.0, 2.0).is_err());
        assert!(DetectionSchedule::new(1.0, f64::NAN).is_err());
    }
}
