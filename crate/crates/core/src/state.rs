//! Bipartite state model.
//!
//! All joint-space matrices use the Kronecker index convention
//! `row = i_a * d_b + i_b`. Kets are unit-norm and phase-canonical (first
//! significant amplitude real and positive), which makes product states
//! comparable by value.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    canonicalize_phase, cmp_amplitudes_desc, hermitian_eigen, hermiticity_defect, kron_vec,
    max_abs, symmetrize, CMatrix, CVector, C64,
};

/// Tolerance for the unit-norm invariant of [`Ket`].
pub const KET_NORM_TOL: f64 = 1e-12;
/// Weights below this magnitude are pruned from quasi-distributions.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Product states with joint fidelity above `1 - MERGE_FIDELITY_TOL` are merged.
pub const MERGE_FIDELITY_TOL: f64 = 1e-10;

/// Factor dimensions of a bipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub d_a: usize,
    pub d_b: usize,
}

impl Dims {
    pub fn new(d_a: usize, d_b: usize) -> Result<Self> {
        if d_a == 0 || d_b == 0 {
            return Err(Error::UnsupportedDims { d_a, d_b });
        }
        Ok(Self { d_a, d_b })
    }

    pub fn total(&self) -> usize {
        self.d_a * self.d_b
    }

    pub fn factor(&self, side: Side) -> usize {
        match side {
            Side::A => self.d_a,
            Side::B => self.d_b,
        }
    }
}

/// One of the two subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// A normalized, phase-canonical state vector of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
}

impl Ket {
    /// Normalizes and phase-canonicalizes `amplitudes`.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        let mut amplitudes = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            amplitudes
        } else {
            amplitudes.unscale(norm)
        };
        canonicalize_phase(&mut amplitudes);
        Ok(Self { amplitudes })
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes))
    }

    /// Computational basis ket `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn conj(&self) -> Ket {
        let mut amplitudes = self.amplitudes.map(|z| z.conj());
        canonicalize_phase(&mut amplitudes);
        Ket { amplitudes }
    }

    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// `|a> (x) |b>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub a: Ket,
    pub b: Ket,
}

impl ProductState {
    pub fn new(a: Ket, b: Ket) -> Self {
        Self { a, b }
    }

    pub fn basis(dims: Dims, i_a: usize, i_b: usize) -> Self {
        Self::new(Ket::basis(dims.d_a, i_a), Ket::basis(dims.d_b, i_b))
    }

    pub fn dims(&self) -> Dims {
        Dims {
            d_a: self.a.dim(),
            d_b: self.b.dim(),
        }
    }

    /// The joint vector `a (x) b`.
    pub fn joint(&self) -> CVector {
        kron_vec(self.a.amplitudes(), self.b.amplitudes())
    }

    /// `|a,b><a,b|` on the joint space.
    pub fn projector(&self) -> CMatrix {
        let v = self.joint();
        &v * v.adjoint()
    }

    /// `|<a,b|a',b'>|^2`.
    pub fn fidelity(&self, other: &ProductState) -> f64 {
        self.a.fidelity(&other.a) * self.b.fidelity(&other.b)
    }

    /// Canonical order: lexicographically largest amplitudes first, `a` before `b`.
    pub fn canonical_cmp(&self, other: &ProductState) -> Ordering {
        const TIE: f64 = 1e-12;
        cmp_amplitudes_desc(self.a.amplitudes(), other.a.amplitudes(), TIE)
            .then_with(|| cmp_amplitudes_desc(self.b.amplitudes(), other.b.amplitudes(), TIE))
    }
}

/// A Hermitian operator on the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dims: Dims,
    matrix: CMatrix,
}

/// Tolerances used when validating raw matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    pub hermitian: f64,
    pub trace: f64,
    pub psd: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-9,
            trace: 1e-9,
            psd: 1e-9,
        }
    }
}

impl HermitianOperator {
    /// Checks shape and Hermiticity, then symmetrizes exactly.
    pub fn new(dims: Dims, matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(dims, matrix, ValidationTolerances::default().hermitian)
    }

    pub fn with_tolerance(dims: Dims, matrix: CMatrix, tol: f64) -> Result<Self> {
        check_square(dims, &matrix)?;
        let deviation = hermiticity_defect(&matrix);
        if deviation.is_nan() || deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            dims,
            matrix: symmetrize(&matrix),
        })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            matrix: CMatrix::zeros(dims.total(), dims.total()),
        }
    }

    /// `|a,b><a,b|`.
    pub fn projector(state: &ProductState) -> Self {
        Self {
            dims: state.dims(),
            matrix: state.projector(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// `<a,b| self |a,b>`.
    pub fn expectation(&self, state: &ProductState) -> f64 {
        let v = state.joint();
        v.dotc(&(&self.matrix * &v)).re
    }

    /// Hilbert-Schmidt inner product `tr(self * other)`.
    pub fn hs_inner(&self, other: &HermitianOperator) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.transpose().iter())
            .map(|(x, y)| (x * y).re)
            .sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dims: self.dims,
            matrix: self.matrix.scale(factor),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            dims: self.dims,
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            dims: self.dims,
            matrix: &self.matrix - &other.matrix,
        })
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }

    /// Largest entry-wise modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigen(&self.matrix)?.0)
    }

    fn check_same_dims(&self, other: &HermitianOperator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                context: "operator arithmetic",
                expected: self.dims.total(),
                found: other.dims.total(),
            });
        }
        Ok(())
    }
}

fn check_square(dims: Dims, matrix: &CMatrix) -> Result<()> {
    let n = dims.total();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "operator side length",
            expected: n,
            found: if matrix.nrows() != n { matrix.nrows() } else { matrix.ncols() },
        });
    }
    Ok(())
}

/// A validated density operator: Hermitian, unit trace, positive semi-definite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
    trace: f64,
}

impl DensityOperator {
    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dims(&self) -> Dims {
        self.op.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.op.matrix
    }

    /// The trace measured at validation time.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.op.hs_inner(&self.op)
    }

    /// `|psi><psi|` for a normalized joint vector.
    pub fn pure(dims: Dims, psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let v = psi.unscale(norm);
        validate_density(&(&v * v.adjoint()), dims)
    }
}

impl AsRef<HermitianOperator> for DensityOperator {
    fn as_ref(&self) -> &HermitianOperator {
        &self.op
    }
}

impl AsRef<HermitianOperator> for HermitianOperator {
    fn as_ref(&self) -> &HermitianOperator {
        self
    }
}

/// Validates a raw matrix as a density operator with default tolerances.
pub fn validate_density(raw: &CMatrix, dims: Dims) -> Result<DensityOperator> {
    validate_density_with(raw, dims, &ValidationTolerances::default())
}

pub fn validate_density_with(
    raw: &CMatrix,
    dims: Dims,
    tol: &ValidationTolerances,
) -> Result<DensityOperator> {
    let op = HermitianOperator::with_tolerance(dims, raw.clone(), tol.hermitian)?;
    let trace = op.trace();
    if trace.is_nan() || (trace - 1.0).abs() > tol.trace {
        return Err(Error::NotUnitTrace { trace });
    }
    let min_eigenvalue = op.eigenvalues()?.last().copied().unwrap_or(0.0);
    if min_eigenvalue < -tol.psd {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    Ok(DensityOperator { op, trace })
}

/// Sandwiches one factor of `op` with `ket` and traces it out.
///
/// `Side::B` with `|b>` gives `L_b = tr_B(L [1 (x) |b><b|])` on subsystem A;
/// `Side::A` with `|a>` gives `L_a` on subsystem B. Both satisfy
/// `<a|L_b|a> = <b|L_a|b> = <a,b|L|a,b>`.
pub fn partial_collapse(op: &HermitianOperator, side: Side, ket: &Ket) -> Result<CMatrix> {
    let dims = op.dims;
    if ket.dim() != dims.factor(side) {
        return Err(Error::DimensionMismatch {
            context: "partial_collapse ket",
            expected: dims.factor(side),
            found: ket.dim(),
        });
    }
    Ok(collapse_raw(&op.matrix, dims, side, ket.amplitudes()))
}

/// [`partial_collapse`] without ket normalization or dimension checks.
pub(crate) fn collapse_raw(m: &CMatrix, dims: Dims, side: Side, v: &CVector) -> CMatrix {
    let (d_a, d_b) = (dims.d_a, dims.d_b);
    match side {
        Side::B => {
            let mut out = CMatrix::zeros(d_a, d_a);
            for i in 0..d_a {
                for k in 0..d_a {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..d_b {
                        let cj = v[j].conj();
                        for l in 0..d_b {
                            acc += cj * m[(i * d_b + j, k * d_b + l)] * v[l];
                        }
                    }
                    out[(i, k)] = acc;
                }
            }
            symmetrize(&out)
        }
        Side::A => {
            let mut out = CMatrix::zeros(d_b, d_b);
            for j in 0..d_b {
                for l in 0..d_b {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..d_a {
                        let ci = v[i].conj();
                        for k in 0..d_a {
                            acc += ci * m[(i * d_b + j, k * d_b + l)] * v[k];
                        }
                    }
                    out[(j, l)] = acc;
                }
            }
            symmetrize(&out)
        }
    }
}

/// One signed term of a quasi-distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub state: ProductState,
}

/// A finite signed measure over product states.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDistribution {
    dims: Dims,
    terms: Vec<Term>,
}

impl QuasiDistribution {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(dims: Dims, terms: Vec<Term>) -> Result<Self> {
        let mut qd = Self::new(dims);
        for t in terms {
            qd.push(t.weight, t.state)?;
        }
        Ok(qd)
    }

    pub fn push(&mut self, weight: f64, state: ProductState) -> Result<()> {
        if state.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                context: "quasi-distribution term",
                expected: self.dims.total(),
                found: state.dims().total(),
            });
        }
        self.terms.push(Term { weight, state });
        Ok(())
    }

    /// Appends all terms of `other` scaled by `factor`.
    pub fn extend_scaled(&mut self, other: &QuasiDistribution, factor: f64) -> Result<()> {
        for t in &other.terms {
            self.push(factor * t.weight, t.state.clone())?;
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Smallest weight, or `0` for an empty distribution.
    pub fn min_weight(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |m| m.min(w))))
            .unwrap_or(0.0)
    }

    /// Merges near-identical product states (summing weights) and drops
    /// terms with `|weight| < WEIGHT_FLOOR`. First occurrences keep their place.
    pub fn merged(&self) -> QuasiDistribution {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match out
                .iter_mut()
                .find(|o| o.state.fidelity(&t.state) > 1.0 - MERGE_FIDELITY_TOL)
            {
                Some(o) => o.weight += t.weight,
                None => out.push(t.clone()),
            }
        }
        out.retain(|t| t.weight.abs() >= WEIGHT_FLOOR);
        QuasiDistribution {
            dims: self.dims,
            terms: out,
        }
    }

    /// `sum_k w_k |a_k,b_k><a_k,b_k|`.
    pub fn assemble(&self) -> HermitianOperator {
        let n = self.dims.total();
        let mut m = CMatrix::zeros(n, n);
        for t in &self.terms {
            let v = t.state.joint();
            m.gerc(C64::from(t.weight), &v, &v, C64::new(1.0, 0.0));
        }
        HermitianOperator {
            dims: self.dims,
            matrix: symmetrize(&m),
        }
    }
}

/// Free-function form of [`QuasiDistribution::assemble`].
pub fn assemble(qd: &QuasiDistribution) -> HermitianOperator {
    qd.assemble()
}
