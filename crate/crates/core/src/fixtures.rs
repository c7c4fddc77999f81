//! Standard two-qubit states used throughout the docs and tests.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::linalg::{CMatrix, CVector, C64};
use crate::state::{validate_density, DensityOperator, Dims, HermitianOperator, Ket, ProductState};

/// Two qubits.
pub fn qubits() -> Dims {
    Dims { d_a: 2, d_b: 2 }
}

/// `(|0> + i^n |1>) / sqrt(2)`, `n` taken mod 4.
pub fn phase_ket(n: usize) -> Ket {
    let phase = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][n % 4];
    Ket::from_slice(&[C64::new(FRAC_1_SQRT_2, 0.0), phase * FRAC_1_SQRT_2]).expect("unit ket")
}

/// `phase_ket(m) (x) phase_ket(n)`.
pub fn phase_product(m: usize, n: usize) -> ProductState {
    ProductState::new(phase_ket(m), phase_ket(n))
}

/// `(|00> + |11>) / sqrt(2)` as a joint vector.
pub fn bell_vector() -> CVector {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    CVector::from_vec(vec![h, z, z, h])
}

/// `|Phi+><Phi+|`.
pub fn bell_state() -> DensityOperator {
    DensityOperator::pure(qubits(), &bell_vector()).expect("valid Bell state")
}

/// `(|00><11| + |11><00|) / 2`, the off-diagonal part of the Bell state.
pub fn bell_coherence() -> HermitianOperator {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 3)] = C64::new(0.5, 0.0);
    m[(3, 0)] = C64::new(0.5, 0.0);
    HermitianOperator::new(qubits(), m).expect("Hermitian")
}

/// `1/8 + |++><++| / 2`, white noise on top of `|+,+>`.
pub fn mixed_plus_plus() -> DensityOperator {
    let v = phase_product(0, 0).joint();
    let m = CMatrix::identity(4, 4).scale(0.125) + (&v * v.adjoint()).scale(0.5);
    validate_density(&m, qubits()).expect("valid state")
}

/// `|0,0><0,0|`.
pub fn ground_state() -> DensityOperator {
    let m = ProductState::basis(qubits(), 0, 0).projector();
    validate_density(&m, qubits()).expect("valid state")
}

/// `1/4` on two qubits.
pub fn maximally_mixed() -> DensityOperator {
    validate_density(&CMatrix::identity(4, 4).scale(0.25), qubits()).expect("valid state")
}
