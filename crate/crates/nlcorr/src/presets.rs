//! Named initial states and the reference two-particle scenario parameters.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::qstate::{re, StateVector};

/// Mean-field coefficient for particle 1 in the reference scenario.
pub const VI_C_A: f64 = 8.0;
/// Mean-field coefficient for particle 2.
pub const VI_C_B: f64 = 0.5;
/// Detection time of particle 1.
pub const VI_C_T1: f64 = 3.5;
/// Detection time of particle 2.
pub const VI_C_T2: f64 = 8.0;

/// |1> = (cos pi/8, sin pi/8).
pub fn ket_one() -> StateVector {
    StateVector::from_reals(&[(PI / 8.0).cos(), (PI / 8.0).sin()]).expect("unit ket")
}

/// |2> = (-sin pi/8, cos pi/8).
pub fn ket_two() -> StateVector {
    StateVector::from_reals(&[-(PI / 8.0).sin(), (PI / 8.0).cos()]).expect("unit ket")
}

/// Psi0 = (1/3)|1>|2> - (2 sqrt(2)/3)|2>|1>.
pub fn vi_c_state() -> StateVector {
    let a = ket_one().tensor(&ket_two()).expect("4-dim tensor");
    let b = ket_two().tensor(&ket_one()).expect("4-dim tensor");
    let w = 2.0 * 2.0_f64.sqrt() / 3.0;
    let amps: Vec<Complex64> = (0..4)
        .map(|i| a.amplitudes()[i] * re(1.0 / 3.0) - b.amplitudes()[i] * re(w))
        .collect();
    StateVector::new(amps).expect("normalized by construction")
}

/// The spin singlet (|01> - |10>)/sqrt(2).
pub fn singlet() -> StateVector {
    StateVector::new(vec![
        re(0.0),
        re(FRAC_1_SQRT_2),
        re(-FRAC_1_SQRT_2),
        re(0.0),
    ])
    .expect("normalized by construction")
}
