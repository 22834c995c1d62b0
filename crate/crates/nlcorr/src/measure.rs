//! The three probability algorithms for a two-time spin correlation
//! experiment, plus conditionals, marginals, and post-measurement ensemble
//! averages.
//!
//! * `joint_open` reads all four joint probabilities directly as
//!   expectations of projector products in the detection-time-parameterized
//!   state.
//! * `joint_projection_standard` is the textbook algorithm: collapse at t1,
//!   renormalize, re-evolve particle 2 with its mean-field frequency
//!   recomputed from the projected state. In nonlinear dynamics this is the
//!   nonlocal variant.
//! * `joint_projection_generalized` replaces the post-collapse propagator by
//!   the effective one-particle unitary built from the initial conditions,
//!   which restores agreement with `joint_open`.

use crate::dynamics::{
    self, closed_form_propagators, kappa, DetectionSchedule, Engine, EvolutionResult,
};
use crate::error::{Error, Result};
use crate::hamfun::HamiltonianFunctional;
use crate::qstate::{
    kron, spin_projector, BlochAxis, CMatrix, Observable, Sign, StateVector, Subsystem,
};

/// Below this weight a measurement branch is excluded from mixtures instead
/// of evolving a non-normalizable state.
pub const BRANCH_FLOOR: f64 = 1e-12;

const PROB_TOL: f64 = 1e-10;

/// Which probability algorithm drives post-measurement curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Open,
    ProjectionStandard,
    ProjectionGeneralized,
}

/// Measurement axes, outcome selection, and detection times for one joint
/// experiment. Detection times must be finite.
#[derive(Debug, Clone, Copy)]
pub struct JointSpec {
    pub axis1: BlochAxis,
    pub axis2: BlochAxis,
    pub sign1: Sign,
    pub sign2: Sign,
    pub sched: DetectionSchedule,
}

impl JointSpec {
    pub fn new(axis1: BlochAxis, axis2: BlochAxis, sched: DetectionSchedule) -> Result<Self> {
        sched.require_finite()?;
        Ok(JointSpec { axis1, axis2, sign1: Sign::Plus, sign2: Sign::Plus, sched })
    }

    fn swapped(&self) -> JointSpec {
        JointSpec {
            axis1: self.axis2,
            axis2: self.axis1,
            sign1: self.sign2,
            sign2: self.sign1,
            sched: DetectionSchedule { t1: self.sched.t2, t2: self.sched.t1 },
        }
    }
}

/// Joint outcome probabilities and both single-particle marginals.
///
/// Entries are asserted to lie within `1e-10` of `[0, 1]` and only then
/// clamped; joint entries must sum to 1 and reproduce the marginals as
/// row/column sums within `1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    p_joint: [[f64; 2]; 2],
    p_marg1: [f64; 2],
    p_marg2: [f64; 2],
}

impl ProbabilityTable {
    pub fn new(p_joint: [[f64; 2]; 2], p_marg1: [f64; 2], p_marg2: [f64; 2]) -> Result<Self> {
        let clamp = |x: f64| -> Result<f64> {
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&x) {
                return Err(Error::ProbabilityOutOfRange(x));
            }
            Ok(x.clamp(0.0, 1.0))
        };
        let mut joint = [[0.0; 2]; 2];
        let mut m1 = [0.0; 2];
        let mut m2 = [0.0; 2];
        for i in 0..2 {
            m1[i] = clamp(p_marg1[i])?;
            m2[i] = clamp(p_marg2[i])?;
            for j in 0..2 {
                joint[i][j] = clamp(p_joint[i][j])?;
            }
        }
        let total: f64 = joint.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InconsistentTable(format!("joint sum {total}")));
        }
        for i in 0..2 {
            let row: f64 = joint[i][0] + joint[i][1];
            if (row - m1[i]).abs() > 1e-9 {
                return Err(Error::InconsistentTable(format!(
                    "row {i} sum {row} vs marginal {}",
                    m1[i]
                )));
            }
            let col: f64 = joint[0][i] + joint[1][i];
            if (col - m2[i]).abs() > 1e-9 {
                return Err(Error::InconsistentTable(format!(
                    "column {i} sum {col} vs marginal {}",
                    m2[i]
                )));
            }
        }
        Ok(ProbabilityTable { p_joint: joint, p_marg1: m1, p_marg2: m2 })
    }

    fn transposed(&self) -> ProbabilityTable {
        ProbabilityTable {
            p_joint: [
                [self.p_joint[0][0], self.p_joint[1][0]],
                [self.p_joint[0][1], self.p_joint[1][1]],
            ],
            p_marg1: self.p_marg2,
            p_marg2: self.p_marg1,
        }
    }

    pub fn joint(&self, s1: Sign, s2: Sign) -> f64 {
        self.p_joint[s1.index()][s2.index()]
    }

    pub fn marginal1(&self, s: Sign) -> f64 {
        self.p_marg1[s.index()]
    }

    pub fn marginal2(&self, s: Sign) -> f64 {
        self.p_marg2[s.index()]
    }

    /// Correlation sum p(++) + p(--) - p(+-) - p(-+).
    pub fn correlation(&self) -> f64 {
        self.joint(Sign::Plus, Sign::Plus) + self.joint(Sign::Minus, Sign::Minus)
            - self.joint(Sign::Plus, Sign::Minus)
            - self.joint(Sign::Minus, Sign::Plus)
    }

    /// Largest absolute entry-wise difference against another table.
    pub fn max_abs_diff(&self, other: &ProbabilityTable) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            d = d.max((self.p_marg1[i] - other.p_marg1[i]).abs());
            d = d.max((self.p_marg2[i] - other.p_marg2[i]).abs());
            for j in 0..2 {
                d = d.max((self.p_joint[i][j] - other.p_joint[i][j]).abs());
            }
        }
        d
    }
}

fn check_pair_dims(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
) -> Result<()> {
    if psi0.dim() != 4 || f1.dim() != 2 || f2.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 4, got: psi0.dim() });
    }
    Ok(())
}

fn evolve(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    t: f64,
    engine: Engine,
    dt: f64,
) -> Result<EvolutionResult> {
    match engine {
        Engine::ClosedForm => dynamics::curie_weiss_closed_form(
            psi0,
            f1.mean_field_coeff()?,
            f2.mean_field_coeff()?,
            sched,
            t,
        ),
        Engine::Integrator => dynamics::evolve_open(psi0, f1, f2, sched, t, dt),
    }
}

fn projector_pair(axis: BlochAxis) -> [Observable; 2] {
    [spin_projector(axis, Sign::Plus), spin_projector(axis, Sign::Minus)]
}

/// Joint probabilities read directly from the detection-time-parameterized
/// state at t = max(t1, t2).
pub fn joint_open(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    spec: &JointSpec,
    engine: Engine,
    dt: f64,
) -> Result<ProbabilityTable> {
    check_pair_dims(psi0, f1, f2)?;
    spec.sched.require_finite()?;
    let t = spec.sched.t1.max(spec.sched.t2);
    let state = evolve(psi0, f1, f2, spec.sched, t, engine, dt)?.state;
    let e1 = projector_pair(spec.axis1);
    let e2 = projector_pair(spec.axis2);
    let i2 = Observable::identity(2);

    let mut joint = [[0.0; 2]; 2];
    let mut m1 = [0.0; 2];
    let mut m2 = [0.0; 2];
    for s1 in Sign::BOTH {
        m1[s1.index()] = state.expect(&e1[s1.index()].tensor(&i2)?)?;
        m2[s1.index()] = state.expect(&i2.tensor(&e2[s1.index()])?)?;
        for s2 in Sign::BOTH {
            joint[s1.index()][s2.index()] =
                state.expect(&e1[s1.index()].tensor(&e2[s2.index()])?)?;
        }
    }
    ProbabilityTable::new(joint, m1, m2)
}

/// The textbook projection-at-a-distance algorithm. Measurements are
/// ordered: if t2 < t1 the roles of the particles are swapped. After the
/// collapse at the earlier time, particle 1 is frozen (the measurement is
/// destructive) and particle 2 re-evolves with its nonlinear frequency
/// recomputed from the projected state.
pub fn joint_projection_standard(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    spec: &JointSpec,
    engine: Engine,
    dt: f64,
) -> Result<ProbabilityTable> {
    check_pair_dims(psi0, f1, f2)?;
    spec.sched.require_finite()?;
    if spec.sched.t2 < spec.sched.t1 {
        let swapped = joint_projection_standard(
            &swap_particles(psi0)?,
            f2,
            f1,
            &spec.swapped(),
            engine,
            dt,
        )?;
        return Ok(swapped.transposed());
    }
    let (t1, t2) = (spec.sched.t1, spec.sched.t2);
    let state_t1 = evolve(psi0, f1, f2, spec.sched, t1, engine, dt)?.state;
    let e1 = projector_pair(spec.axis1);
    let e2 = projector_pair(spec.axis2);
    let i2 = Observable::identity(2);

    let mut joint = [[0.0; 2]; 2];
    let mut m1 = [0.0; 2];
    for s1 in Sign::BOTH {
        let p = state_t1.expect(&e1[s1.index()].tensor(&i2)?)?;
        m1[s1.index()] = p;
        if p < BRANCH_FLOOR {
            continue;
        }
        let branch = state_t1.apply_normalized(&kron(e1[s1.index()].matrix(), i2.matrix()))?;
        let evolved = evolve_branch_standard(&branch, f2, t2 - t1, engine, dt)?;
        for s2 in Sign::BOTH {
            joint[s1.index()][s2.index()] =
                p * evolved.expect(&i2.tensor(&e2[s2.index()])?)?;
        }
    }
    let m2 = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    ProbabilityTable::new(joint, m1, m2)
}

/// Re-evolves a projected branch over a window of length `tau`, particle 1
/// frozen, particle 2 under its own nonlinear Hamiltonian.
fn evolve_branch_standard(
    branch: &StateVector,
    f2: &HamiltonianFunctional,
    tau: f64,
    engine: Engine,
    dt: f64,
) -> Result<StateVector> {
    if tau <= 0.0 {
        return Ok(branch.clone());
    }
    match engine {
        Engine::ClosedForm => {
            let s2 = branch
                .reduce(Subsystem::Two, (2, 2))?
                .expect(&Observable::sigma_z())?;
            let v2 = dynamics::mean_field_propagator(f2.mean_field_coeff()?, s2, tau);
            branch.apply_normalized(&kron(&CMatrix::identity(2, 2), &v2))
        }
        Engine::Integrator => {
            let frozen = HamiltonianFunctional::zero(2);
            let out = dynamics::evolve_open(
                branch,
                &frozen,
                f2,
                DetectionSchedule { t1: f64::INFINITY, t2: f64::INFINITY },
                tau,
                dt,
            )?;
            Ok(out.state)
        }
    }
}

/// Generalized projection algorithm: identical bookkeeping, but the
/// post-collapse propagator for particle 2 over (t1, t2] is the effective
/// unitary built from the initial conditions of the pair.
pub fn joint_projection_generalized(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    spec: &JointSpec,
    engine: Engine,
    dt: f64,
) -> Result<ProbabilityTable> {
    check_pair_dims(psi0, f1, f2)?;
    spec.sched.require_finite()?;
    if spec.sched.t2 < spec.sched.t1 {
        let swapped = joint_projection_generalized(
            &swap_particles(psi0)?,
            f2,
            f1,
            &spec.swapped(),
            engine,
            dt,
        )?;
        return Ok(swapped.transposed());
    }
    let (t1, t2) = (spec.sched.t1, spec.sched.t2);
    let state_t1 = evolve(psi0, f1, f2, spec.sched, t1, engine, dt)?.state;
    let w2 = window_propagator(psi0, f1, f2, spec.sched, t1, t2, engine, dt)?;
    let e1 = projector_pair(spec.axis1);
    let e2 = projector_pair(spec.axis2);
    let i2 = Observable::identity(2);

    let mut joint = [[0.0; 2]; 2];
    let mut m1 = [0.0; 2];
    for s1 in Sign::BOTH {
        m1[s1.index()] = state_t1.expect(&e1[s1.index()].tensor(&i2)?)?;
        for s2 in Sign::BOTH {
            // Numerator of the conditional formula: no branch division, so a
            // degenerate branch contributes zero automatically.
            let rotated = w2.adjoint() * e2[s2.index()].matrix() * &w2;
            let op = Observable::new(kron(e1[s1.index()].matrix(), &rotated))?;
            joint[s1.index()][s2.index()] = state_t1.expect(&op)?;
        }
    }
    let m2 = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    ProbabilityTable::new(joint, m1, m2)
}

/// Particle-2 effective propagator over (from, to], built from the
/// unprojected trajectory (equivalently, the initial conditions).
#[allow(clippy::too_many_arguments)]
fn window_propagator(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    from: f64,
    to: f64,
    engine: Engine,
    dt: f64,
) -> Result<CMatrix> {
    match engine {
        Engine::ClosedForm => {
            let b = f2.mean_field_coeff()?;
            let (_, v_to) = closed_form_propagators(psi0, f1.mean_field_coeff()?, b, sched, to)?;
            let (_, v_from) = closed_form_propagators(psi0, f1.mean_field_coeff()?, b, sched, from)?;
            Ok(v_to * v_from.adjoint())
        }
        Engine::Integrator => {
            let snaps =
                dynamics::effective_propagators_at(psi0, f1, f2, sched, &[from, to], dt)?;
            let find = |t_q: f64| {
                snaps
                    .iter()
                    .find(|(t, _, _)| (*t - t_q).abs() < 1e-12)
                    .map(|(_, _, v2)| v2.clone())
                    .expect("requested sample time present")
            };
            Ok(find(to) * find(from).adjoint())
        }
    }
}

/// Swaps the two particles of a composite state: Psi_{k1 k2} -> Psi_{k2 k1}.
pub fn swap_particles(psi: &StateVector) -> Result<StateVector> {
    if psi.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: psi.dim() });
    }
    let a = psi.amplitudes();
    StateVector::new(vec![a[0], a[2], a[1], a[3]])
}

/// P[s2 | s1] for both values of s2, given the conditioning particle and
/// outcome.
pub fn conditional(
    table: &ProbabilityTable,
    given: (Subsystem, Sign),
) -> Result<[f64; 2]> {
    let (particle, s) = given;
    let p_cond = match particle {
        Subsystem::One => table.marginal1(s),
        Subsystem::Two => table.marginal2(s),
    };
    if p_cond <= BRANCH_FLOOR {
        return Err(Error::UndefinedConditional(p_cond));
    }
    let out = match particle {
        Subsystem::One => [table.joint(s, Sign::Plus) / p_cond, table.joint(s, Sign::Minus) / p_cond],
        Subsystem::Two => [table.joint(Sign::Plus, s) / p_cond, table.joint(Sign::Minus, s) / p_cond],
    };
    Ok(out)
}

/// Value of the ensemble curve at `t`, together with the per-branch values
/// when a projection algorithm and t >= t1. `left_limit_at_t1` selects the
/// pre-measurement value exactly at t = t1.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleValue {
    pub value: f64,
    /// (weight, branch expectation) for outcomes (+, -) when branching.
    pub branches: Option<[(f64, f64); 2]>,
}

/// Outcome-weighted average of `obs` at time `t` for the chosen algorithm.
///
/// Under `Open` this is the expectation in the unprojected open-system
/// state; the measurement at t1 leaves the curve untouched. Under the
/// projection algorithms, for t >= t1 the state collapses along `axis1` and
/// the curve is the P[+/-]-weighted mixture over the two evolved branches.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_average_after_measurement(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    axis1: BlochAxis,
    obs: &Observable,
    t: f64,
    algorithm: Algorithm,
    engine: Engine,
    dt: f64,
) -> Result<f64> {
    ensemble_value(psi0, f1, f2, sched, axis1, obs, t, algorithm, engine, dt, false)
        .map(|v| v.value)
}

/// As `ensemble_average_after_measurement`, exposing branch detail and the
/// left-limit switch used when a series samples t1 twice.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_value(
    psi0: &StateVector,
    f1: &HamiltonianFunctional,
    f2: &HamiltonianFunctional,
    sched: DetectionSchedule,
    axis1: BlochAxis,
    obs: &Observable,
    t: f64,
    algorithm: Algorithm,
    engine: Engine,
    dt: f64,
    left_limit_at_t1: bool,
) -> Result<EnsembleValue> {
    check_pair_dims(psi0, f1, f2)?;
    let t1 = sched.t1;
    let pre_measurement =
        algorithm == Algorithm::Open || t < t1 || (left_limit_at_t1 && (t - t1).abs() < 1e-12);
    if pre_measurement {
        let state = evolve(psi0, f1, f2, sched, t, engine, dt)?.state;
        return Ok(EnsembleValue { value: state.expect(obs)?, branches: None });
    }

    let state_t1 = evolve(psi0, f1, f2, sched, t1, engine, dt)?.state;
    let i2 = Observable::identity(2);
    // Elapsed active time for particle 2 inside (t1, t].
    let tau2 = kappa(t, sched.t2) - kappa(t1, sched.t2);
    let w2_general = match algorithm {
        Algorithm::ProjectionGeneralized => {
            Some(window_propagator(psi0, f1, f2, sched, t1, t, engine, dt)?)
        }
        _ => None,
    };

    let mut value = 0.0;
    let mut branches = [(0.0, 0.0); 2];
    for s1 in Sign::BOTH {
        let e = spin_projector(axis1, s1);
        let p = state_t1.expect(&e.tensor(&i2)?)?;
        if p < BRANCH_FLOOR {
            branches[s1.index()] = (p.max(0.0), 0.0);
            continue;
        }
        let branch = state_t1.apply_normalized(&kron(e.matrix(), i2.matrix()))?;
        let evolved = match algorithm {
            Algorithm::Open => unreachable!("handled above"),
            Algorithm::ProjectionStandard => {
                evolve_branch_standard(&branch, f2, tau2, engine, dt)?
            }
            Algorithm::ProjectionGeneralized => branch.apply_normalized(&kron(
                &CMatrix::identity(2, 2),
                w2_general.as_ref().expect("built above"),
            ))?,
        };
        let x = evolved.expect(obs)?;
        branches[s1.index()] = (p, x);
        value += p * x;
    }
    Ok(EnsembleValue { value, branches: Some(branches) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamfun::{curie_weiss, linear_functional, HamiltonianFunctional};
    use crate::presets;
    use crate::qstate::expm_minus_i_ht;
    use approx::assert_abs_diff_eq;

    const DT: f64 = 1e-3;

    fn vi_c_spec(axis1: BlochAxis, axis2: BlochAxis) -> JointSpec {
        JointSpec::new(
            axis1,
            axis2,
            DetectionSchedule::new(presets::VI_C_T1, presets::VI_C_T2).unwrap(),
        )
        .unwrap()
    }

    fn vi_c_functionals() -> (HamiltonianFunctional, HamiltonianFunctional) {
        (curie_weiss(presets::VI_C_A), curie_weiss(presets::VI_C_B))
    }

    #[test]
    fn singlet_anticorrelation_free_dynamics() {
        let psi0 = presets::singlet();
        let f = HamiltonianFunctional::zero(2);
        let spec =
            JointSpec::new(BlochAxis::Z, BlochAxis::Z, DetectionSchedule::new(1.0, 2.0).unwrap())
                .unwrap();
        let t = joint_open(&psi0, &f, &f, &spec, Engine::Integrator, DT).unwrap();
        assert_abs_diff_eq!(t.joint(Sign::Plus, Sign::Plus), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.joint(Sign::Plus, Sign::Minus), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reference_scenario_completeness() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = vi_c_spec(BlochAxis::X, BlochAxis::X);
        let t = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let mut sum = 0.0;
        for a in Sign::BOTH {
            for b in Sign::BOTH {
                sum += t.joint(a, b);
            }
        }
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_time_correlation_matches_expectation_oracle() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = JointSpec::new(
            BlochAxis::X,
            BlochAxis::X,
            DetectionSchedule::new(0.0, 0.0).unwrap(),
        )
        .unwrap();
        let t = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let xx = Observable::sigma_x().tensor(&Observable::sigma_x()).unwrap();
        assert_abs_diff_eq!(t.correlation(), psi0.expect(&xx).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            t.correlation(),
            -0.5 - 2.0 * 2.0_f64.sqrt() / 9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn linear_case_all_algorithms_agree_with_heisenberg_oracle() {
        let psi0 = presets::singlet();
        let f1 = linear_functional(Observable::sigma_z());
        let f2 = linear_functional(Observable::sigma_x());
        let spec = JointSpec::new(
            BlochAxis::X,
            BlochAxis::Z,
            DetectionSchedule::new(0.8, 1.7).unwrap(),
        )
        .unwrap();
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::Integrator, DT).unwrap();
        let std = joint_projection_standard(&psi0, &f1, &f2, &spec, Engine::Integrator, DT).unwrap();
        let gen =
            joint_projection_generalized(&psi0, &f1, &f2, &spec, Engine::Integrator, DT).unwrap();
        assert!(open.max_abs_diff(&std) < 1e-9);
        assert!(open.max_abs_diff(&gen) < 1e-9);

        // Heisenberg-picture oracle via one-particle matrix exponentials.
        let v1 = expm_minus_i_ht(Observable::sigma_z().matrix(), 0.8);
        let v2 = expm_minus_i_ht(Observable::sigma_x().matrix(), 1.7);
        for s1 in Sign::BOTH {
            for s2 in Sign::BOTH {
                let e1t = v1.adjoint() * spin_projector(spec.axis1, s1).matrix() * &v1;
                let e2t = v2.adjoint() * spin_projector(spec.axis2, s2).matrix() * &v2;
                let op = Observable::new(kron(&e1t, &e2t)).unwrap();
                let oracle = psi0.expect(&op).unwrap();
                assert_abs_diff_eq!(open.joint(s1, s2), oracle, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn projection_standard_differs_on_reference_scenario() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = vi_c_spec(BlochAxis::X, BlochAxis::X);
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let std = joint_projection_standard(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        assert!(open.max_abs_diff(&std) > 1e-3);
    }

    #[test]
    fn projection_standard_equals_open_at_coincident_times() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = JointSpec::new(
            BlochAxis::X,
            BlochAxis::X,
            DetectionSchedule::new(3.5, 3.5).unwrap(),
        )
        .unwrap();
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let std = joint_projection_standard(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        assert!(open.max_abs_diff(&std) < 1e-9);
    }

    #[test]
    fn generalized_equals_open_on_reference_scenario() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = vi_c_spec(BlochAxis::X, BlochAxis::X);
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        for engine in [Engine::ClosedForm, Engine::Integrator] {
            let gen = joint_projection_generalized(&psi0, &f1, &f2, &spec, engine, DT).unwrap();
            assert!(open.max_abs_diff(&gen) < 1e-6);
        }
    }

    #[test]
    fn generalized_with_free_particle_two() {
        let psi0 = presets::vi_c_state();
        let f1 = curie_weiss(8.0);
        let f2 = HamiltonianFunctional::zero(2);
        let spec = vi_c_spec(BlochAxis::X, BlochAxis::Z);
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let gen = joint_projection_generalized(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        assert!(open.max_abs_diff(&gen) < 1e-12);
    }

    #[test]
    fn swapped_measurement_order() {
        // t2 < t1 exercises the role swap.
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = JointSpec::new(
            BlochAxis::X,
            BlochAxis::X,
            DetectionSchedule::new(8.0, 3.5).unwrap(),
        )
        .unwrap();
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let gen = joint_projection_generalized(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        assert!(open.max_abs_diff(&gen) < 1e-6);
    }

    #[test]
    fn conditional_singlet() {
        let psi0 = presets::singlet();
        let f = HamiltonianFunctional::zero(2);
        let spec =
            JointSpec::new(BlochAxis::Z, BlochAxis::Z, DetectionSchedule::new(1.0, 2.0).unwrap())
                .unwrap();
        let t = joint_open(&psi0, &f, &f, &spec, Engine::Integrator, DT).unwrap();
        let c = conditional(&t, (Subsystem::One, Sign::Plus)).unwrap();
        assert_abs_diff_eq!(c[Sign::Minus.index()], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c[0] + c[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn conditional_matches_numerator_denominator() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec = vi_c_spec(BlochAxis::X, BlochAxis::X);
        let t = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, DT).unwrap();
        let c = conditional(&t, (Subsystem::One, Sign::Plus)).unwrap();
        for s2 in Sign::BOTH {
            let direct = t.joint(Sign::Plus, s2) / t.marginal1(Sign::Plus);
            assert_abs_diff_eq!(c[s2.index()], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_undefined_on_vanishing_condition() {
        let psi0 = presets::singlet();
        let f = HamiltonianFunctional::zero(2);
        let spec =
            JointSpec::new(BlochAxis::Z, BlochAxis::Z, DetectionSchedule::new(1.0, 2.0).unwrap())
                .unwrap();
        // Product state |00> has no minus outcome along z for particle 1.
        let up = StateVector::from_reals(&[1.0, 0.0]).unwrap();
        let product = up.tensor(&up).unwrap();
        let t = joint_open(&product, &f, &f, &spec, Engine::Integrator, DT).unwrap();
        assert!(matches!(
            conditional(&t, (Subsystem::One, Sign::Minus)),
            Err(Error::UndefinedConditional(_))
        ));
        let _ = psi0;
    }

    #[test]
    fn open_curve_continuous_at_first_detection() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let sched = DetectionSchedule::new(presets::VI_C_T1, presets::VI_C_T2).unwrap();
        let ix = Observable::identity(2).tensor(&Observable::sigma_x()).unwrap();
        let left = ensemble_value(
            &psi0, &f1, &f2, sched, BlochAxis::X, &ix, presets::VI_C_T1,
            Algorithm::Open, Engine::ClosedForm, DT, true,
        )
        .unwrap();
        let right = ensemble_value(
            &psi0, &f1, &f2, sched, BlochAxis::X, &ix, presets::VI_C_T1,
            Algorithm::Open, Engine::ClosedForm, DT, false,
        )
        .unwrap();
        assert_abs_diff_eq!(left.value, right.value, epsilon = 1e-12);
    }

    #[test]
    fn projection_curve_departs_from_open_after_t1() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let sched = DetectionSchedule::new(presets::VI_C_T1, presets::VI_C_T2).unwrap();
        let ix = Observable::identity(2).tensor(&Observable::sigma_x()).unwrap();
        let mut max_dev: f64 = 0.0;
        for k in 1..=45 {
            let t = presets::VI_C_T1 + 0.1 * k as f64;
            let open = ensemble_average_after_measurement(
                &psi0, &f1, &f2, sched, BlochAxis::X, &ix, t,
                Algorithm::Open, Engine::ClosedForm, DT,
            )
            .unwrap();
            let proj = ensemble_average_after_measurement(
                &psi0, &f1, &f2, sched, BlochAxis::X, &ix, t,
                Algorithm::ProjectionStandard, Engine::ClosedForm, DT,
            )
            .unwrap();
            max_dev = max_dev.max((proj - open).abs());
        }
        assert!(max_dev > 1e-3, "max deviation {max_dev}");
    }

    #[test]
    fn sigma_z_average_conserved_by_dynamics_reset_by_collapse() {
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let sched = DetectionSchedule::new(presets::VI_C_T1, presets::VI_C_T2).unwrap();
        let zi = Observable::sigma_z().tensor(&Observable::identity(2)).unwrap();
        let conserved = -7.0 * 2.0_f64.sqrt() / 18.0;
        for t in [0.0, 2.0, 3.5, 5.0, 9.0] {
            // The dynamics itself conserves <sigma_z (x) I> at every t.
            let v = ensemble_average_after_measurement(
                &psi0, &f1, &f2, sched, BlochAxis::X, &zi, t, Algorithm::Open,
                Engine::ClosedForm, DT,
            )
            .unwrap();
            assert_abs_diff_eq!(v, conserved, epsilon = 1e-9);
            // The collapse along x at t1 does not: both branches are sigma_x
            // eigenstates of particle 1, so the mixture average drops to 0.
            let v = ensemble_average_after_measurement(
                &psi0, &f1, &f2, sched, BlochAxis::X, &zi, t,
                Algorithm::ProjectionStandard, Engine::ClosedForm, DT,
            )
            .unwrap();
            let expected = if t < sched.t1 { conserved } else { 0.0 };
            assert_abs_diff_eq!(v, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn marginal2_depends_on_axis1_under_projection() {
        // The nonlocal defect the projection algorithm exhibits.
        let psi0 = presets::vi_c_state();
        let (f1, f2) = vi_c_functionals();
        let spec_x = vi_c_spec(BlochAxis::X, BlochAxis::X);
        let spec_z = vi_c_spec(BlochAxis::Z, BlochAxis::X);
        let tx = joint_projection_standard(&psi0, &f1, &f2, &spec_x, Engine::ClosedForm, DT).unwrap();
        let tz = joint_projection_standard(&psi0, &f1, &f2, &spec_z, Engine::ClosedForm, DT).unwrap();
        let dev = (tx.marginal2(Sign::Plus) - tz.marginal2(Sign::Plus)).abs();
        assert!(dev > 1e-3, "marginal deviation {dev}");

        // Under the open algorithm the same change leaves marginal 2 alone.
        let ox = joint_open(&psi0, &f1, &f2, &spec_x, Engine::ClosedForm, DT).unwrap();
        let oz = joint_open(&psi0, &f1, &f2, &spec_z, Engine::ClosedForm, DT).unwrap();
        assert!((ox.marginal2(Sign::Plus) - oz.marginal2(Sign::Plus)).abs() < 1e-9);
    }
}
