//! Seeded random states and operators for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{symmetrize, CMatrix, CVector, C64};
use crate::state::{
    validate_density, DensityOperator, Dims, HermitianOperator, Ket, ProductState, QuasiDistribution,
};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unit ket.
pub fn ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Ket {
    loop {
        let v = CVector::from_fn(dim, |_, _| gaussian(rng));
        if let Ok(k) = Ket::new(v) {
            return k;
        }
    }
}

pub fn product_state<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> ProductState {
    ProductState::new(ket(dims.d_a, rng), ket(dims.d_b, rng))
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase correction).
pub fn unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Full-rank mixed state `G G^dagger / tr` from a square Ginibre matrix.
pub fn density<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> DensityOperator {
    density_of_rank(dims, dims.total(), rng)
}

pub fn density_of_rank<R: Rng + ?Sized>(dims: Dims, rank: usize, rng: &mut R) -> DensityOperator {
    let n = dims.total();
    let g = CMatrix::from_fn(n, rank.max(1), |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    validate_density(&symmetrize(&m.unscale(tr)), dims).expect("Ginibre state is valid")
}

/// Hermitian operator with Gaussian entries.
pub fn hermitian<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> HermitianOperator {
    let n = dims.total();
    let g = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    HermitianOperator::new(dims, symmetrize(&g)).expect("symmetrized")
}

/// Convex mixture of `k` random product states with Dirichlet-like weights.
pub fn product_mixture<R: Rng + ?Sized>(
    dims: Dims,
    k: usize,
    rng: &mut R,
) -> (DensityOperator, QuasiDistribution) {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut qd = QuasiDistribution::new(dims);
    for w in raw {
        qd.push(w / total, product_state(dims, rng)).expect("dims match");
    }
    let rho = validate_density(qd.assemble().matrix(), dims).expect("mixture is a state");
    (rho, qd)
}
