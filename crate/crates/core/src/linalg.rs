//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Eigen-decompositions here always return eigenvalues in descending order
//! with phase-canonical eigenvectors, so that every caller sees the same basis
//! for the same input.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Modulus below which an amplitude is not used as the phase reference.
pub const PHASE_PIVOT_FLOOR: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITERS: usize = 10_000;

/// Rotates `v` so that its first amplitude with modulus above
/// [`PHASE_PIVOT_FLOOR`] is real and positive.
pub fn canonicalize_phase(v: &mut CVector) {
    let Some(pivot) = v.iter().position(|c| c.norm() > PHASE_PIVOT_FLOOR) else {
        return;
    };
    let c = v[pivot];
    let modulus = c.norm();
    let rot = c.conj() / modulus;
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[pivot] = C64::new(modulus, 0.0);
}

/// Flips the sign of a real vector so its first significant entry is positive.
pub fn canonicalize_sign(v: &mut DVector<f64>) {
    if let Some(x) = v.iter().find(|x| x.abs() > PHASE_PIVOT_FLOOR) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, Vec<CVector>)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "hermitian_eigen",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::EigensolverFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: CVector = eig.eigenvectors.column(i).into_owned();
            canonicalize_phase(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues descending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::EigensolverFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
            canonicalize_sign(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Kronecker product of two column vectors, A-index major.
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let db = b.len();
    CVector::from_fn(a.len() * db, |r, _| a[r / db] * b[r % db])
}

/// Largest entry-wise modulus of `m`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry-wise modulus of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m^dagger) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Lexicographic comparison of amplitude vectors, largest first.
///
/// Real parts are compared before imaginary parts; differences below `tol`
/// count as ties.
pub fn cmp_amplitudes_desc(x: &CVector, y: &CVector, tol: f64) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    for (p, q) in x.iter().zip(y.iter()) {
        for (u, v) in [(p.re, q.re), (p.im, q.im)] {
            if (u - v).abs() > tol {
                return if u > v { Ordering::Less } else { Ordering::Greater };
            }
        }
    }
    x.len().cmp(&y.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_zero_matrix_is_standard_basis() {
        let (vals, vecs) = hermitian_eigen(&CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(vals, vec![0.0, 0.0]);
        let overlaps: f64 = vecs
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum::<f64>())
            .sum();
        assert!((overlaps - 2.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_descend_and_vectors_are_canonical() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(0.0, 0.25), C64::new(0.0, -0.25), C64::new(0.0, 0.0)],
        );
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        assert!((vals[0] - 0.25).abs() < 1e-15 && (vals[1] + 0.25).abs() < 1e-15);
        for v in &vecs {
            assert!(v[0].im.abs() < 1e-15 && v[0].re > 0.0);
            let mv = &m * v;
            let lam = v.dotc(&mv).re;
            assert!((&mv - v * C64::from(lam)).norm() < 1e-14);
        }
    }

    #[test]
    fn phase_canonicalization_is_idempotent() {
        let mut v = CVector::from_vec(vec![C64::new(0.0, 1e-12), C64::new(-0.6, 0.1), C64::new(0.3, 0.7)]);
        canonicalize_phase(&mut v);
        let once = v.clone();
        canonicalize_phase(&mut v);
        assert_eq!(once, v);
        assert_eq!(v[1].im, 0.0);
        assert!(v[1].re > 0.0);
    }
}
