//! Quasi-distributions for arbitrary states from spectral and Schmidt
//! decompositions.
//!
//! A pure state `sum_k l_k |e_k,f_k>` is rewritten with the diagonal terms
//! `l_k^2 |e_k,f_k><e_k,f_k|` plus, for every pair `k < l`, four interference
//! terms `(-1)^n l_k l_l |s_n,t_n><s_n,t_n|` with
//! `|s_n> = (|e_k> + i^n |e_l>)/sqrt 2` and `|t_n> = (|f_k> + i^n |f_l>)/sqrt 2`.

use std::cmp::Ordering;

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::linalg::{cmp_amplitudes_desc, hermitian_eigen, CMatrix, CVector, C64};
use crate::state::{DensityOperator, Dims, Ket, ProductState, QuasiDistribution};

/// Eigenvalues of the density operator below this are dropped.
pub const SPECTRAL_FLOOR: f64 = 1e-12;
/// Schmidt coefficients below this are dropped.
pub const SCHMIDT_FLOOR: f64 = 1e-10;
/// Largest tolerated overlap between the factors of an interference pair.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// `psi = sum_k coefficients[k] * left_basis[k] (x) right_basis[k]`.
///
/// Left kets are phase-canonical; the right vectors absorb the phases needed
/// to reproduce `psi` exactly, so they are stored as raw unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtForm {
    pub coefficients: Vec<f64>,
    pub left_basis: Vec<Ket>,
    pub right_basis: Vec<CVector>,
    pub rank: usize,
}

impl SchmidtForm {
    /// Reassembles the joint vector.
    pub fn joint(&self) -> CVector {
        let d_a = self.left_basis.first().map_or(0, Ket::dim);
        let d_b = self.right_basis.first().map_or(0, |v| v.len());
        let mut psi = CVector::zeros(d_a * d_b);
        for ((l, e), f) in self.coefficients.iter().zip(&self.left_basis).zip(&self.right_basis) {
            psi += crate::linalg::kron_vec(e.amplitudes(), f) * C64::from(*l);
        }
        psi
    }

    /// `|e_k> (x) |f_k>` as a canonical product state.
    pub fn product(&self, k: usize) -> ProductState {
        ProductState::new(
            self.left_basis[k].clone(),
            Ket::new(self.right_basis[k].clone()).expect("unit Schmidt vector"),
        )
    }
}

/// `|psi><psi| = positive_part - negative_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureExpansion {
    /// `2 sum_{k<l} l_k l_l`.
    pub mu: f64,
    /// Total weight `1 + mu`.
    pub positive_part: QuasiDistribution,
    /// Total weight `mu`, stored with positive weights.
    pub negative_part: QuasiDistribution,
    /// All terms with signed weights, diagonal terms first, then each
    /// interference quadruple in the order `n = 0, 1, 2, 3`.
    pub signed: QuasiDistribution,
}

/// Eigen-decomposition of a density operator as `(probability, joint ket)`
/// pairs, most probable first.
pub fn spectral_decompose(rho: &DensityOperator) -> Result<Vec<(f64, Ket)>> {
    let (values, vectors) = hermitian_eigen(rho.matrix())?;
    values
        .into_iter()
        .zip(vectors)
        .filter(|(p, _)| *p >= SPECTRAL_FLOOR)
        .map(|(p, v)| Ok((p, Ket::new(v)?)))
        .collect()
}

/// Schmidt decomposition from the singular values of the `d_a x d_b`
/// amplitude matrix. Equal coefficients are ordered by their left kets.
pub fn schmidt_decompose(psi: &Ket, dims: Dims) -> Result<SchmidtForm> {
    schmidt_raw(psi.amplitudes(), dims)
}

fn schmidt_raw(psi: &CVector, dims: Dims) -> Result<SchmidtForm> {
    if psi.len() != dims.total() {
        return Err(Error::DimensionMismatch {
            context: "schmidt_decompose ket",
            expected: dims.total(),
            found: psi.len(),
        });
    }
    let m = CMatrix::from_fn(dims.d_a, dims.d_b, |i, j| psi[i * dims.d_b + j]);
    let svd = SVD::try_new(m, true, true, 1e-15, 10_000)
        .ok_or_else(|| Error::EigensolverFailure("SVD did not converge".into()))?;
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");

    let mut triples: Vec<(f64, Ket, CVector)> = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= SCHMIDT_FLOOR {
            continue;
        }
        let e_raw: CVector = u.column(k).into_owned();
        let f_raw: CVector = v_t.row(k).transpose();
        let e = Ket::new(e_raw.clone())?;
        // e = e_raw * c with |c| = 1; keep e_raw (x) f_raw = e (x) (f_raw / c).
        let c = e_raw.dotc(e.amplitudes());
        let f = f_raw.unscale(f_raw.norm()) * c.conj();
        triples.push((s, e, f));
    }
    triples.sort_by(|x, y| {
        if (x.0 - y.0).abs() <= SCHMIDT_FLOOR {
            cmp_amplitudes_desc(x.1.amplitudes(), y.1.amplitudes(), 1e-12)
        } else {
            y.0.partial_cmp(&x.0).unwrap_or(Ordering::Equal)
        }
    });
    let rank = triples.len();
    let (mut coefficients, mut left_basis, mut right_basis) = (Vec::new(), Vec::new(), Vec::new());
    for (s, e, f) in triples {
        coefficients.push(s);
        left_basis.push(e);
        right_basis.push(f);
    }
    Ok(SchmidtForm {
        coefficients,
        left_basis,
        right_basis,
        rank,
    })
}

/// The four signed terms with `sum = |u><v| + |v><u|` for `u = a_u (x) b_u`,
/// `v = a_v (x) b_v` with `a_u _|_ a_v` and `b_u _|_ b_v`.
pub fn interference_expansion(u: &ProductState, v: &ProductState) -> Result<QuasiDistribution> {
    if u.dims() != v.dims() {
        return Err(Error::DimensionMismatch {
            context: "interference pair",
            expected: u.dims().total(),
            found: v.dims().total(),
        });
    }
    let overlap = u.a.inner(&v.a).norm().max(u.b.inner(&v.b).norm());
    if overlap > ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal { overlap });
    }
    let mut qd = QuasiDistribution::new(u.dims());
    for (sign, state) in interference_raw(
        u.a.amplitudes(),
        u.b.amplitudes(),
        v.a.amplitudes(),
        v.b.amplitudes(),
    )? {
        qd.push(sign, state)?;
    }
    Ok(qd)
}

/// Interference quadruple from raw factor vectors; phases of the inputs matter.
fn interference_raw(
    a_u: &CVector,
    b_u: &CVector,
    a_v: &CVector,
    b_v: &CVector,
) -> Result<Vec<(f64, ProductState)>> {
    let mut phase = C64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(4);
    for n in 0..4 {
        let a = Ket::new(a_u + a_v * phase)?;
        let b = Ket::new(b_u + b_v * phase)?;
        out.push((if n % 2 == 0 { 1.0 } else { -1.0 }, ProductState::new(a, b)));
        phase *= C64::new(0.0, 1.0);
    }
    Ok(out)
}

/// Expansion of `|psi><psi|` over product states.
pub fn pure_to_quasi(psi: &Ket, dims: Dims) -> Result<PureExpansion> {
    let form = schmidt_decompose(psi, dims)?;
    let mut positive_part = QuasiDistribution::new(dims);
    let mut negative_part = QuasiDistribution::new(dims);
    let mut signed = QuasiDistribution::new(dims);
    for k in 0..form.rank {
        let w = form.coefficients[k] * form.coefficients[k];
        positive_part.push(w, form.product(k))?;
        signed.push(w, form.product(k))?;
    }
    let mut mu = 0.0;
    for k in 0..form.rank {
        for l in k + 1..form.rank {
            let w = form.coefficients[k] * form.coefficients[l];
            mu += 2.0 * w;
            let quad = interference_raw(
                form.left_basis[k].amplitudes(),
                &form.right_basis[k],
                form.left_basis[l].amplitudes(),
                &form.right_basis[l],
            )?;
            for (sign, state) in quad {
                if sign > 0.0 {
                    positive_part.push(w, state.clone())?;
                } else {
                    negative_part.push(w, state.clone())?;
                }
                signed.push(sign * w, state)?;
            }
        }
    }
    Ok(PureExpansion {
        mu,
        positive_part,
        negative_part,
        signed,
    })
}

/// `rho = sum_i p_i |phi_i><phi_i|` with each pure part expanded, near-duplicate
/// states merged.
pub fn reconstruct_quasi(rho: &DensityOperator) -> Result<QuasiDistribution> {
    let dims = rho.dims();
    let mut qd = QuasiDistribution::new(dims);
    for (p, phi) in spectral_decompose(rho)? {
        qd.extend_scaled(&pure_to_quasi(&phi, dims)?.signed, p)?;
    }
    Ok(qd.merged())
}
