//! Separability eigenvalue equations `L_b|a> = g|a>`, `L_a|b> = g|b>`.
//!
//! Solutions are enumerated heuristically: an alternating eigenvector
//! iteration is run on every branch (choice of eigenvector index on each side)
//! from deterministic and random seeds, and a Gauss-Newton solve from each
//! seed picks up saddle-type solutions the alternating scheme is repelled by.
//! Degenerate reduced operators are resolved by perturbing the ket that
//! generated them, which collapses continuous degenerate families onto the
//! eigenbasis of the perturbed operator.

use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, kron_vec, CMatrix, CVector, C64};
use crate::reconstruct::schmidt_decompose;
use crate::state::{collapse_raw, Dims, HermitianOperator, Ket, ProductState, Side};

/// Largest accepted equation residual.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
/// Residual at which iteration stops early.
const TIGHT_RESIDUAL: f64 = 1e-11;
/// Relative eigenvalue gap below which reduced eigenvalues are degenerate.
const CLUSTER_TOL: f64 = 1e-10;
/// Size of the ket perturbation used to split degenerate clusters.
const PERTURBATION: f64 = 1e-3;
/// Pairwise fidelity below `1 - DISTINCT_TOL` makes solutions distinct family members.
pub const DISTINCT_TOL: f64 = 1e-4;
/// Relative residual below which alternation hands over to Newton.
const HANDOFF_RESIDUAL: f64 = 1e-6;
/// Iterations without halving the best residual before alternation gives up.
const STALL_WINDOW: usize = 50;
const NEWTON_STEPS: usize = 40;

/// Default RNG seed.
pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// Solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub conv_tol: f64,
    pub dedup_g_tol: f64,
    pub dedup_fid_tol: f64,
    pub family_samples: usize,
    pub g_floor: f64,
    pub rng_seed: u64,
    pub include_trivial: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            restarts: 200,
            max_iters: 500,
            conv_tol: 1e-12,
            dedup_g_tol: 1e-8,
            dedup_fid_tol: 1e-8,
            family_samples: 4,
            g_floor: 1e-10,
            rng_seed: DEFAULT_SEED,
            include_trivial: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.family_samples == 0 {
            return Err(Error::InvalidConfig("family_samples must be at least 1".into()));
        }
        for (name, v) in [
            ("conv_tol", self.conv_tol),
            ("dedup_g_tol", self.dedup_g_tol),
            ("dedup_fid_tol", self.dedup_fid_tol),
            ("g_floor", self.g_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Eigenvector index (descending eigenvalue order) followed on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Branch {
    pub a: usize,
    pub b: usize,
}

impl Branch {
    /// Largest eigenvalue on both sides.
    pub const TOP: Branch = Branch { a: 0, b: 0 };
}

/// One solution `(g, |a,b>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SepEigenSolution {
    pub g: f64,
    pub state: ProductState,
    /// `max(|L_b a - g a|, |L_a b - g b|)`.
    pub residual: f64,
    /// `|g| < g_floor` and trivial solutions were not requested.
    pub excluded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coverage {
    Complete,
    Heuristic,
}

/// A continuous solution family, sampled at `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub g: f64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub dims: Dims,
    /// Ordered by `g` descending, then canonical state order.
    pub solutions: Vec<SepEigenSolution>,
    pub families: Vec<Family>,
    /// Number of seeds the solver was started from.
    pub restarts_used: usize,
    pub coverage: Coverage,
}

impl SolutionSet {
    /// Solutions that enter downstream Gram systems.
    pub fn retained(&self) -> impl Iterator<Item = &SepEigenSolution> {
        self.solutions.iter().filter(|s| !s.excluded)
    }

    pub fn max_g(&self) -> Option<f64> {
        self.solutions.iter().map(|s| s.g).reduce(f64::max)
    }

    pub fn min_g(&self) -> Option<f64> {
        self.solutions.iter().map(|s| s.g).reduce(f64::min)
    }
}

struct Problem<'a> {
    m: &'a CMatrix,
    dims: Dims,
    scale: f64,
}

#[derive(Debug, Clone)]
struct Candidate {
    a: CVector,
    b: CVector,
    g: f64,
    residual: f64,
}

impl<'a> Problem<'a> {
    fn new(op: &'a HermitianOperator) -> Self {
        let scale = op.max_abs().max(1e-300);
        Self {
            m: op.matrix(),
            dims: op.dims(),
            scale,
        }
    }

    /// Collapse with a ket of `side`.
    fn collapse(&self, side: Side, v: &CVector) -> CMatrix {
        collapse_raw(self.m, self.dims, side, v)
    }

    fn rayleigh(&self, a: &CVector, b: &CVector) -> f64 {
        let v = kron_vec(a, b);
        v.dotc(&(self.m * &v)).re
    }

    fn residual(&self, a: &CVector, b: &CVector) -> (f64, f64) {
        let lb = self.collapse(Side::B, b);
        let la = self.collapse(Side::A, a);
        let g = a.dotc(&(&lb * a)).re;
        let ra = (&lb * a - a * C64::from(g)).norm();
        let rb = (&la * b - b * C64::from(g)).norm();
        (g, ra.max(rb))
    }

    fn candidate(&self, a: CVector, b: CVector) -> Candidate {
        let (g, residual) = self.residual(&a, &b);
        Candidate { a, b, g, residual }
    }

    /// New ket on the side opposite to `side`, from the collapse with `from`.
    fn select<R: Rng>(
        &self,
        side: Side,
        from: &CVector,
        index: usize,
        current: &CVector,
        rng: &mut R,
    ) -> Result<CVector> {
        let op = self.collapse(side, from);
        let (vals, vecs) = hermitian_eigen(&op)?;
        let idx = index.min(vals.len() - 1);
        let tol = CLUSTER_TOL * self.scale;
        let cluster: Vec<usize> = (0..vals.len())
            .filter(|&k| (vals[k] - vals[idx]).abs() < tol)
            .collect();
        if cluster.len() == 1 {
            return Ok(vecs[idx].clone());
        }
        let q = CMatrix::from_columns(&cluster.iter().map(|&k| vecs[k].clone()).collect::<Vec<_>>());
        let delta = random_unit(from.len(), rng);
        let perturbed = (from + delta * C64::from(PERTURBATION)).normalize();
        let h = q.adjoint() * self.collapse(side, &perturbed) * &q;
        let (hv, hvecs) = hermitian_eigen(&crate::linalg::symmetrize(&h))?;
        let c = q.adjoint() * current;

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for k in 0..hv.len() {
            match groups.last_mut() {
                Some(g) if (hv[*g.last().unwrap()] - hv[k]).abs() < tol => g.push(k),
                _ => groups.push(vec![k]),
            }
        }
        let weight = |g: &Vec<usize>| g.iter().map(|&k| hvecs[k].dotc(&c).norm_sqr()).sum::<f64>();
        let best = groups
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, g)| {
                let w = weight(g);
                if w > acc.1 + 1e-12 {
                    (i, w)
                } else {
                    acc
                }
            })
            .0;
        let sub = &groups[best];
        let mut w = CVector::zeros(hv.len());
        for &k in sub {
            w += &hvecs[k] * hvecs[k].dotc(&c);
        }
        if w.norm() < 1e-12 {
            w = hvecs[sub[0]].clone();
        }
        let mut out = (q * w).normalize();
        crate::linalg::canonicalize_phase(&mut out);
        Ok(out)
    }

    /// Alternating iteration on `branch`; `Ok(None)` when it fails to converge.
    fn iterate<R: Rng>(
        &self,
        a0: &CVector,
        b0: &CVector,
        branch: Branch,
        cfg: &SolverConfig,
        rng: &mut R,
    ) -> Result<Candidate> {
        let (mut a, mut b) = (a0.clone(), b0.clone());
        let mut last = self.candidate(a.clone(), b.clone());
        let (mut best, mut best_at) = (last.residual, 0usize);
        for it in 0..cfg.max_iters {
            let a_new = self.select(Side::B, &b, branch.a, &a, rng)?;
            let b_new = self.select(Side::A, &a_new, branch.b, &b, rng)?;
            let fid = a.dotc(&a_new).norm_sqr() * b.dotc(&b_new).norm_sqr();
            a = a_new;
            b = b_new;
            last = self.candidate(a.clone(), b.clone());
            if last.residual <= TIGHT_RESIDUAL {
                return Ok(last);
            }
            if fid > 1.0 - cfg.conv_tol || last.residual <= HANDOFF_RESIDUAL * self.scale {
                break;
            }
            if last.residual < 0.5 * best {
                (best, best_at) = (last.residual, it);
            } else if it - best_at >= STALL_WINDOW {
                break;
            }
        }
        if last.residual > TIGHT_RESIDUAL {
            let polished = self.newton(&a, &b);
            if polished.residual < last.residual {
                last = polished;
            }
        }
        Ok(last)
    }

    /// Gauss-Newton on the real form of the equations plus normalization.
    fn newton(&self, a0: &CVector, b0: &CVector) -> Candidate {
        let (da, db) = (self.dims.d_a, self.dims.d_b);
        let mut a = a0.clone();
        let mut b = b0.clone();
        let mut g = self.rayleigh(&a, &b);
        let mut f = self.newton_residual(&a, &b, g);
        for _ in 0..NEWTON_STEPS {
            let fnorm = f.norm();
            if fnorm < 1e-15 * self.scale.max(1.0) {
                break;
            }
            let j = self.jacobian(&a, &b, g);
            let svd = SVD::new(j, true, true);
            let smax = svd.singular_values.max();
            let Ok(step) = svd.solve(&(-&f), 1e-12 * smax.max(1e-300)) else {
                break;
            };
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let (ta, tb, tg) = apply_step(&a, &b, g, &step, t, da, db);
                let tf = self.newton_residual(&ta, &tb, tg);
                if tf.norm() < fnorm {
                    a = ta;
                    b = tb;
                    g = tg;
                    f = tf;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let (a, b) = (a.normalize(), b.normalize());
        self.candidate(a, b)
    }

    fn newton_residual(&self, a: &CVector, b: &CVector, g: f64) -> DVector<f64> {
        let (da, db) = (self.dims.d_a, self.dims.d_b);
        let ra = self.collapse_unsym(Side::B, b) * a - a * C64::from(g);
        let rb = self.collapse_unsym(Side::A, a) * b - b * C64::from(g);
        let mut f = DVector::zeros(2 * da + 2 * db + 2);
        for i in 0..da {
            f[i] = ra[i].re;
            f[da + i] = ra[i].im;
        }
        for j in 0..db {
            f[2 * da + j] = rb[j].re;
            f[2 * da + db + j] = rb[j].im;
        }
        f[2 * da + 2 * db] = a.norm_squared() - 1.0;
        f[2 * da + 2 * db + 1] = b.norm_squared() - 1.0;
        f
    }

    /// Collapse without symmetrization (exact holomorphic part for unnormalized kets).
    fn collapse_unsym(&self, side: Side, v: &CVector) -> CMatrix {
        let (da, db) = (self.dims.d_a, self.dims.d_b);
        let m = self.m;
        match side {
            Side::B => CMatrix::from_fn(da, da, |i, k| {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..db {
                    for l in 0..db {
                        acc += v[j].conj() * m[(i * db + j, k * db + l)] * v[l];
                    }
                }
                acc
            }),
            Side::A => CMatrix::from_fn(db, db, |j, l| {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..da {
                    for k in 0..da {
                        acc += v[i].conj() * m[(i * db + j, k * db + l)] * v[k];
                    }
                }
                acc
            }),
        }
    }

    fn jacobian(&self, a: &CVector, b: &CVector, g: f64) -> DMatrix<f64> {
        let (da, db) = (self.dims.d_a, self.dims.d_b);
        let m = self.m;
        let t = |i: usize, j: usize, k: usize, l: usize| m[(i * db + j, k * db + l)];
        let i_unit = C64::new(0.0, 1.0);
        let lb = self.collapse_unsym(Side::B, b);
        let la = self.collapse_unsym(Side::A, a);

        // d(L_b a)/d(b): X[i][m] = sum_{k,l} T_imkl a_k b_l, Y[i][m] = sum_{j,k} conj(b_j) T_ijkm a_k
        let mut x = CMatrix::zeros(da, db);
        let mut y = CMatrix::zeros(da, db);
        // d(L_a b)/d(a): Xp[j][m] = sum_{k,l} T_mjkl a_k b_l, Yp[j][m] = sum_{i,l} conj(a_i) T_ijml b_l
        let mut xp = CMatrix::zeros(db, da);
        let mut yp = CMatrix::zeros(db, da);
        for i in 0..da {
            for j in 0..db {
                for k in 0..da {
                    for l in 0..db {
                        let v = t(i, j, k, l);
                        x[(i, j)] += v * a[k] * b[l];
                        y[(i, l)] += b[j].conj() * v * a[k];
                        xp[(j, i)] += v * a[k] * b[l];
                        yp[(j, k)] += a[i].conj() * v * b[l];
                    }
                }
            }
        }

        let rows = 2 * da + 2 * db + 2;
        let cols = 2 * da + 2 * db + 1;
        let mut jac = DMatrix::zeros(rows, cols);
        let mut put = |col: usize, ca: &CVector, cb: &CVector, na: f64, nb: f64| {
            for i in 0..da {
                jac[(i, col)] = ca[i].re;
                jac[(da + i, col)] = ca[i].im;
            }
            for j in 0..db {
                jac[(2 * da + j, col)] = cb[j].re;
                jac[(2 * da + db + j, col)] = cb[j].im;
            }
            jac[(2 * da + 2 * db, col)] = na;
            jac[(2 * da + 2 * db + 1, col)] = nb;
        };
        for mi in 0..da {
            let mut ca: CVector = lb.column(mi).into_owned();
            ca[mi] -= C64::from(g);
            let cb: CVector = xp.column(mi) + yp.column(mi);
            put(mi, &ca, &cb, 2.0 * a[mi].re, 0.0);
            let cb_im: CVector = (yp.column(mi) - xp.column(mi)) * i_unit;
            put(da + mi, &(ca * i_unit), &cb_im, 2.0 * a[mi].im, 0.0);
        }
        for mi in 0..db {
            let mut cb: CVector = la.column(mi).into_owned();
            cb[mi] -= C64::from(g);
            let ca: CVector = x.column(mi) + y.column(mi);
            put(2 * da + mi, &ca, &cb, 0.0, 2.0 * b[mi].re);
            let ca_im: CVector = (y.column(mi) - x.column(mi)) * i_unit;
            put(2 * da + db + mi, &ca_im, &(cb * i_unit), 0.0, 2.0 * b[mi].im);
        }
        let ca = -a;
        let cb = -b;
        put(cols - 1, &ca, &cb, 0.0, 0.0);
        jac
    }

    /// Index of the reduced eigenvalue closest to `g` on each side.
    fn infer_branch(&self, c: &Candidate) -> Result<Branch> {
        let nearest = |op: CMatrix| -> Result<usize> {
            let (vals, _) = hermitian_eigen(&op)?;
            Ok(vals
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - c.g).abs().total_cmp(&(y.1 - c.g).abs()))
                .map_or(0, |(k, _)| k))
        };
        Ok(Branch {
            a: nearest(self.collapse(Side::B, &c.b))?,
            b: nearest(self.collapse(Side::A, &c.a))?,
        })
    }

    /// Deterministic probe kets on one side: the eigenbasis of the reduced
    /// operator and all pairwise superpositions `(e_i + i^n e_j)/sqrt 2`.
    fn probes(&self, side: Side) -> Result<Vec<CVector>> {
        let d = self.dims.factor(side);
        let reduced = match side {
            Side::A => CMatrix::from_fn(d, d, |i, k| {
                (0..self.dims.d_b).map(|j| self.m[(i * self.dims.d_b + j, k * self.dims.d_b + j)]).sum()
            }),
            Side::B => CMatrix::from_fn(d, d, |j, l| {
                (0..self.dims.d_a).map(|i| self.m[(i * self.dims.d_b + j, i * self.dims.d_b + l)]).sum()
            }),
        };
        let (_, basis) = hermitian_eigen(&crate::linalg::symmetrize(&reduced))?;
        let mut out = basis.clone();
        for i in 0..d {
            for j in i + 1..d {
                let mut phase = C64::new(1.0, 0.0);
                for _ in 0..4 {
                    let mut v = (&basis[i] + &basis[j] * phase).normalize();
                    crate::linalg::canonicalize_phase(&mut v);
                    out.push(v);
                    phase *= C64::new(0.0, 1.0);
                }
            }
        }
        Ok(out)
    }

    /// All candidates reachable from one seed.
    fn explore<R: Rng>(
        &self,
        a: &CVector,
        b: &CVector,
        cfg: &SolverConfig,
        rng: &mut R,
    ) -> Result<Vec<Candidate>> {
        let mut found = Vec::new();
        for ia in 0..self.dims.d_a {
            for ib in 0..self.dims.d_b {
                let c = self.iterate(a, b, Branch { a: ia, b: ib }, cfg, rng)?;
                if c.residual <= ACCEPT_RESIDUAL {
                    found.push(c);
                }
            }
        }
        let n = self.newton(a, b);
        if n.residual <= ACCEPT_RESIDUAL {
            let branch = self.infer_branch(&n)?;
            let settled = self.iterate(&n.a, &n.b, branch, cfg, rng)?;
            found.push(if settled.residual <= ACCEPT_RESIDUAL { settled } else { n });
        }
        Ok(found)
    }
}

fn apply_step(
    a: &CVector,
    b: &CVector,
    g: f64,
    step: &DVector<f64>,
    t: f64,
    da: usize,
    db: usize,
) -> (CVector, CVector, f64) {
    let na = CVector::from_fn(da, |i, _| a[i] + C64::new(step[i], step[da + i]) * t);
    let nb = CVector::from_fn(db, |j, _| b[j] + C64::new(step[2 * da + j], step[2 * da + db + j]) * t);
    (na, nb, g + t * step[2 * da + 2 * db])
}

fn random_unit<R: Rng>(d: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let n = v.norm();
        if n > 1e-8 {
            return v.unscale(n);
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn to_solution(c: &Candidate, cfg: &SolverConfig) -> Result<SepEigenSolution> {
    let state = ProductState::new(Ket::new(c.a.clone())?, Ket::new(c.b.clone())?);
    Ok(SepEigenSolution {
        g: c.g,
        state,
        residual: c.residual,
        excluded: c.g.abs() < cfg.g_floor && !cfg.include_trivial,
    })
}

/// Alternating iteration from `seed` following the largest eigenvalue on both sides.
pub fn sep_iterate(l: &HermitianOperator, seed: &ProductState, cfg: &SolverConfig) -> Result<SepEigenSolution> {
    sep_iterate_branch(l, seed, Branch::TOP, cfg)
}

/// Alternating iteration from `seed` on an explicit branch.
pub fn sep_iterate_branch(
    l: &HermitianOperator,
    seed: &ProductState,
    branch: Branch,
    cfg: &SolverConfig,
) -> Result<SepEigenSolution> {
    if seed.dims() != l.dims() {
        return Err(Error::DimensionMismatch {
            context: "sep_iterate seed",
            expected: l.dims().total(),
            found: seed.dims().total(),
        });
    }
    let p = Problem::new(l);
    let mut rng = stream_rng(cfg.rng_seed, 0);
    let c = p.iterate(seed.a.amplitudes(), seed.b.amplitudes(), branch, cfg, &mut rng)?;
    if c.residual > ACCEPT_RESIDUAL {
        return Err(Error::NonConvergence {
            iterations: cfg.max_iters,
            residual: c.residual,
        });
    }
    to_solution(&c, cfg)
}

/// Newton refinement of an approximate solution.
pub fn newton_refine(l: &HermitianOperator, guess: &ProductState, cfg: &SolverConfig) -> Result<SepEigenSolution> {
    let p = Problem::new(l);
    let c = p.newton(guess.a.amplitudes(), guess.b.amplitudes());
    if c.residual > ACCEPT_RESIDUAL {
        return Err(Error::NonConvergence {
            iterations: NEWTON_STEPS,
            residual: c.residual,
        });
    }
    to_solution(&c, cfg)
}

/// `max(|L_b a - g a|, |L_a b - g b|)` at `g = <a,b|L|a,b>`, returned as `(g, residual)`.
pub fn sep_residual(l: &HermitianOperator, state: &ProductState) -> (f64, f64) {
    Problem::new(l).residual(state.a.amplitudes(), state.b.amplitudes())
}

/// Heuristic enumeration of separability eigen-solutions.
pub fn solve_sep_eigen(l: &HermitianOperator, cfg: &SolverConfig) -> Result<SolutionSet> {
    cfg.validate()?;
    let p = Problem::new(l);
    let dims = l.dims();

    let probes_a = p.probes(Side::A)?;
    let probes_b = p.probes(Side::B)?;
    let mut seeds: Vec<Option<(CVector, CVector)>> = Vec::new();
    for a in &probes_a {
        for b in &probes_b {
            seeds.push(Some((a.clone(), b.clone())));
        }
    }
    seeds.extend((0..cfg.restarts).map(|_| None));
    let restarts_used = seeds.len();

    let per_seed: Vec<Result<Vec<Candidate>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| {
            let mut rng = stream_rng(cfg.rng_seed, i as u64);
            let (a, b) = match seed {
                Some((a, b)) => (a.clone(), b.clone()),
                None => (random_unit(dims.d_a, &mut rng), random_unit(dims.d_b, &mut rng)),
            };
            p.explore(&a, &b, cfg, &mut rng)
        })
        .collect();

    let mut unique: Vec<SepEigenSolution> = Vec::new();
    for found in per_seed {
        for c in found? {
            let s = to_solution(&c, cfg)?;
            let dup = unique.iter().any(|u| {
                (u.g - s.g).abs() <= cfg.dedup_g_tol && u.state.fidelity(&s.state) > 1.0 - cfg.dedup_fid_tol
            });
            if !dup {
                unique.push(s);
            }
        }
    }

    let (solutions, families) = annotate_families(unique, cfg);
    Ok(SolutionSet {
        dims,
        solutions,
        families,
        restarts_used,
        coverage: if is_product_projector(l)? {
            Coverage::Complete
        } else {
            Coverage::Heuristic
        },
    })
}

/// Groups solutions by `g`, reduces continuous families to
/// `family_samples` well-spread representatives, and orders the result.
fn annotate_families(mut unique: Vec<SepEigenSolution>, cfg: &SolverConfig) -> (Vec<SepEigenSolution>, Vec<Family>) {
    unique.sort_by(|x, y| y.g.total_cmp(&x.g));
    let mut groups: Vec<Vec<SepEigenSolution>> = Vec::new();
    for s in unique {
        match groups.last_mut() {
            Some(g) if (g.last().unwrap().g - s.g).abs() <= cfg.dedup_g_tol => g.push(s),
            _ => groups.push(vec![s]),
        }
    }

    let mut solutions = Vec::new();
    let mut families = Vec::new();
    for mut group in groups {
        group.sort_by(|x, y| x.state.canonical_cmp(&y.state));
        let mut distinct: Vec<usize> = Vec::new();
        for (i, s) in group.iter().enumerate() {
            if distinct
                .iter()
                .all(|&k| group[k].state.fidelity(&s.state) < 1.0 - DISTINCT_TOL)
            {
                distinct.push(i);
            }
        }
        if distinct.len() < cfg.family_samples.max(2) {
            solutions.extend(group);
            continue;
        }
        let chosen = spread_representatives(&group, cfg.family_samples);
        let g_mean = chosen.iter().map(|&k| group[k].g).sum::<f64>() / chosen.len() as f64;
        let start = solutions.len();
        let mut picked: Vec<SepEigenSolution> = chosen.iter().map(|&k| group[k].clone()).collect();
        picked.sort_by(|x, y| x.state.canonical_cmp(&y.state));
        solutions.extend(picked);
        families.push(Family {
            g: g_mean,
            members: (start..solutions.len()).collect(),
        });
    }
    (solutions, families)
}

/// Greedy max-min spread: start at the canonical-first member, then keep
/// adding the member whose largest overlap with the chosen ones is smallest.
pub(crate) fn spread_representatives(group: &[SepEigenSolution], count: usize) -> Vec<usize> {
    let mut chosen = vec![0usize];
    while chosen.len() < count.min(group.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in group.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let worst = chosen
                .iter()
                .map(|&k| group[k].state.fidelity(&s.state))
                .fold(0.0, f64::max);
            if best.is_none_or(|(_, w)| worst < w - 1e-12) {
                best = Some((i, worst));
            }
        }
        match best {
            Some((i, _)) => chosen.push(i),
            None => break,
        }
    }
    chosen
}

/// `L = c |x,y><x,y|` for some product state.
fn is_product_projector(l: &HermitianOperator) -> Result<bool> {
    let (vals, vecs) = hermitian_eigen(l.matrix())?;
    let tol = CLUSTER_TOL * l.max_abs().max(1e-300);
    let nonzero: Vec<usize> = (0..vals.len()).filter(|&k| vals[k].abs() > tol).collect();
    if nonzero.len() != 1 {
        return Ok(false);
    }
    let form = schmidt_decompose(&Ket::new(vecs[nonzero[0]].clone())?, l.dims())?;
    Ok(form.rank == 1)
}

/// `max |g|` over the solution set, floored by the largest product-basis
/// diagonal entry.
pub fn sep_norm(l: &HermitianOperator, cfg: &SolverConfig) -> Result<f64> {
    let sols = solve_sep_eigen(l, cfg)?;
    Ok(sep_norm_from(l, &sols))
}

/// [`sep_norm`] from an already computed solution set.
pub fn sep_norm_from(l: &HermitianOperator, sols: &SolutionSet) -> f64 {
    let diag = l.matrix().diagonal().iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    sols.solutions.iter().map(|s| s.g.abs()).fold(diag, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, phase_product};
    use crate::random;

    fn quick() -> SolverConfig {
        SolverConfig {
            restarts: 40,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let dims = Dims::new(2, 3).unwrap();
        let mut rng = random::rng(7);
        let op = random::hermitian(dims, &mut rng);
        let p = Problem::new(&op);
        let a = random::ket(2, &mut rng).amplitudes().clone() * C64::new(0.9, 0.2);
        let b = random::ket(3, &mut rng).amplitudes().clone() * C64::new(1.1, -0.3);
        let g = 0.37;
        let j = p.jacobian(&a, &b, g);
        let h = 1e-6;
        for col in 0..j.ncols() {
            let mut step = DVector::zeros(j.ncols());
            step[col] = 1.0;
            let (ap, bp, gp) = apply_step(&a, &b, g, &step, h, 2, 3);
            let (am, bm, gm) = apply_step(&a, &b, g, &step, -h, 2, 3);
            let fd = (p.newton_residual(&ap, &bp, gp) - p.newton_residual(&am, &bm, gm)) / (2.0 * h);
            assert!((fd - j.column(col)).norm() < 1e-7, "column {col}");
        }
    }

    #[test]
    fn product_projector_converges_to_itself() {
        let dims = fixtures::qubits();
        let mut rng = random::rng(3);
        let xy = random::product_state(dims, &mut rng);
        let op = HermitianOperator::projector(&xy);
        let seed = random::product_state(dims, &mut rng);
        let s = sep_iterate(&op, &seed, &quick()).unwrap();
        assert!((s.g - 1.0).abs() < 1e-12);
        assert!(s.state.fidelity(&xy) > 1.0 - 1e-12);
        let set = solve_sep_eigen(&op, &quick()).unwrap();
        assert_eq!(set.coverage, Coverage::Complete);
        assert_eq!(set.retained().count(), 1);
    }

    #[test]
    fn mixed_plus_plus_from_nearby_seed() {
        let sigma = fixtures::mixed_plus_plus();
        let seed = ProductState::new(
            Ket::from_slice(&[C64::new(0.72, 0.0), C64::new(0.69, 0.05)]).unwrap(),
            Ket::from_slice(&[C64::new(0.70, 0.0), C64::new(0.71, -0.04)]).unwrap(),
        );
        let s = sep_iterate(sigma.as_operator(), &seed, &quick()).unwrap();
        assert!((s.g - 0.625).abs() < 1e-12);
        assert!(s.state.fidelity(&phase_product(0, 0)) > 1.0 - 1e-12);
    }

    #[test]
    fn mixed_plus_plus_has_exactly_four_solutions() {
        let set = solve_sep_eigen(fixtures::mixed_plus_plus().as_operator(), &quick()).unwrap();
        let expected = [
            (0.625, phase_product(0, 0)),
            (0.125, phase_product(2, 0)),
            (0.125, phase_product(0, 2)),
            (0.125, phase_product(2, 2)),
        ];
        assert_eq!(set.solutions.len(), 4, "{:#?}", set.solutions);
        assert!(set.families.is_empty());
        for (g, s) in &expected {
            assert!(set
                .solutions
                .iter()
                .any(|x| (x.g - g).abs() < 1e-8 && x.state.fidelity(s) > 1.0 - 1e-8));
        }
    }

    #[test]
    fn bell_coherence_families_at_quarter() {
        let r = fixtures::bell_coherence();
        let cfg = quick();
        let set = solve_sep_eigen(&r, &cfg).unwrap();
        let plus: Vec<_> = set.solutions.iter().filter(|s| (s.g - 0.25).abs() < 1e-8).collect();
        let minus: Vec<_> = set.solutions.iter().filter(|s| (s.g + 0.25).abs() < 1e-8).collect();
        assert_eq!(plus.len(), 4);
        assert_eq!(minus.len(), 4);
        for n in 0..4 {
            assert!(plus.iter().any(|s| s.state.fidelity(&phase_product((4 - n) % 4, n)) > 1.0 - 1e-8));
            assert!(minus.iter().any(|s| s.state.fidelity(&phase_product((6 - n) % 4, n)) > 1.0 - 1e-8));
        }
        // Random seeds land on the same families.
        let mut rng = random::rng(17);
        for _ in 0..5 {
            let s = sep_iterate(&r, &random::product_state(fixtures::qubits(), &mut rng), &cfg).unwrap();
            assert!((s.g.abs() - 0.25).abs() < 1e-9 || s.g.abs() < 1e-9);
            let (_, res) = sep_residual(&r, &s.state);
            assert!(res < 1e-8);
        }
    }

    #[test]
    fn bell_family_is_a_times_conjugate() {
        let set = solve_sep_eigen(fixtures::bell_state().as_operator(), &quick()).unwrap();
        let top: Vec<_> = set.solutions.iter().filter(|s| (s.g - 0.5).abs() < 1e-8).collect();
        assert_eq!(top.len(), 4);
        assert!(set.families.iter().any(|f| (f.g - 0.5).abs() < 1e-8));
        for s in top {
            assert!(s.state.a.fidelity(&s.state.b.conj()) > 1.0 - 1e-10);
        }
        let trivial: Vec<_> = set.solutions.iter().filter(|s| s.g.abs() < 1e-10).collect();
        assert!(!trivial.is_empty());
        for s in trivial {
            assert!(s.excluded);
            let (a, b) = (s.state.a.amplitudes(), s.state.b.amplitudes());
            assert!((a[0] * b[0] + a[1] * b[1]).norm() < 1e-8);
        }
    }

    #[test]
    fn maximally_mixed_is_one_family() {
        let set = solve_sep_eigen(fixtures::maximally_mixed().as_operator(), &quick()).unwrap();
        assert_eq!(set.families.len(), 1);
        assert!((set.families[0].g - 0.25).abs() < 1e-12);
        assert!(set.solutions.iter().all(|s| (s.g - 0.25).abs() < 1e-12));
    }

    #[test]
    fn norms_of_examples() {
        let cfg = quick();
        assert!((sep_norm(fixtures::bell_state().as_operator(), &cfg).unwrap() - 0.5).abs() < 1e-8);
        let zero = HermitianOperator::zeros(fixtures::qubits());
        assert_eq!(sep_norm(&zero, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let op = random::hermitian(Dims::new(2, 3).unwrap(), &mut random::rng(12));
        let cfg = quick();
        assert_eq!(solve_sep_eigen(&op, &cfg).unwrap(), solve_sep_eigen(&op, &cfg).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SolverConfig {
            restarts: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_sep_eigen(&HermitianOperator::zeros(fixtures::qubits()), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }
}
