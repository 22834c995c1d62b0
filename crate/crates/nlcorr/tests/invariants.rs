//! Property-based invariants over randomized mean-field scenarios.

use nlcorr::dynamics::{DetectionSchedule, Engine};
use nlcorr::hamfun::curie_weiss;
use nlcorr::measure::{
    conditional, joint_open, joint_projection_generalized, joint_projection_standard, JointSpec,
};
use nlcorr::qstate::{BlochAxis, Sign, StateVector, Subsystem};
use num_complex::Complex64;
use proptest::prelude::*;

fn arb_state4() -> impl Strategy<Value = StateVector> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)
        .prop_filter_map("nonzero amplitude vector", |parts| {
            let amps: Vec<Complex64> =
                parts.into_iter().map(|(r, i)| Complex64::new(r, i)).collect();
            StateVector::new(amps).ok()
        })
}

fn arb_axis() -> impl Strategy<Value = BlochAxis> {
    prop_oneof![Just(BlochAxis::X), Just(BlochAxis::Y), Just(BlochAxis::Z)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every algorithm yields a normalized table whose marginals match the
    /// row and column sums.
    #[test]
    fn tables_are_consistent(
        psi0 in arb_state4(),
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        t1 in 0.0f64..10.0,
        t2 in 0.0f64..10.0,
        ax1 in arb_axis(),
        ax2 in arb_axis(),
    ) {
        let f1 = curie_weiss(a);
        let f2 = curie_weiss(b);
        let sched = DetectionSchedule::new(t1, t2).unwrap();
        let spec = JointSpec::new(ax1, ax2, sched).unwrap();
        for table in [
            joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, 1e-3).unwrap(),
            joint_projection_standard(&psi0, &f1, &f2, &spec, Engine::ClosedForm, 1e-3).unwrap(),
            joint_projection_generalized(&psi0, &f1, &f2, &spec, Engine::ClosedForm, 1e-3).unwrap(),
        ] {
            let mut sum = 0.0;
            for s1 in Sign::BOTH {
                let mut row = 0.0;
                let mut col = 0.0;
                for s2 in Sign::BOTH {
                    let p = table.joint(s1, s2);
                    prop_assert!((0.0..=1.0).contains(&p));
                    sum += p;
                    row += p;
                    col += table.joint(s2, s1);
                }
                prop_assert!((row - table.marginal1(s1)).abs() <= 1e-9);
                prop_assert!((col - table.marginal2(s1)).abs() <= 1e-9);
            }
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }
    }

    /// The initial-condition-based projection algorithm agrees with the
    /// open-system probabilities.
    #[test]
    fn generalized_matches_open(
        psi0 in arb_state4(),
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        t1 in 0.0f64..10.0,
        t2 in 0.0f64..10.0,
        ax1 in arb_axis(),
        ax2 in arb_axis(),
    ) {
        let f1 = curie_weiss(a);
        let f2 = curie_weiss(b);
        let sched = DetectionSchedule::new(t1, t2).unwrap();
        let spec = JointSpec::new(ax1, ax2, sched).unwrap();
        let open = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, 1e-3).unwrap();
        let gen =
            joint_projection_generalized(&psi0, &f1, &f2, &spec, Engine::ClosedForm, 1e-3).unwrap();
        prop_assert!(open.max_abs_diff(&gen) <= 1e-6);
    }

    /// Conditionals are normalized wherever they are defined.
    #[test]
    fn conditionals_normalized(
        psi0 in arb_state4(),
        a in -10.0f64..10.0,
        b in -10.0f64..10.0,
        t1 in 0.0f64..10.0,
        t2 in 0.0f64..10.0,
    ) {
        let f1 = curie_weiss(a);
        let f2 = curie_weiss(b);
        let sched = DetectionSchedule::new(t1, t2).unwrap();
        let spec = JointSpec::new(BlochAxis::X, BlochAxis::X, sched).unwrap();
        let table = joint_open(&psi0, &f1, &f2, &spec, Engine::ClosedForm, 1e-3).unwrap();
        for particle in [Subsystem::One, Subsystem::Two] {
            for s in Sign::BOTH {
                if let Ok(cond) = conditional(&table, (particle, s)) {
                    prop_assert!((cond[0] + cond[1] - 1.0).abs() <= 1e-9);
                    prop_assert!(cond.iter().all(|&p| (-1e-9..=1.0 + 1e-9).contains(&p)));
                }
            }
        }
    }
}
