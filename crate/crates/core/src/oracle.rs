//! Independent cross-checks: partial transpose, brute-force grid search for
//! separability eigenvectors on two qubits, and decomposition residuals.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, C64};
use crate::sep_eigen::{Coverage, SepEigenSolution, SolutionSet, ACCEPT_RESIDUAL};
use crate::state::{DensityOperator, Dims, HermitianOperator, Ket, ProductState, QuasiDistribution};

/// Partial-transpose eigenvalues below `-NPT_TOL` flag the state as NPT.
pub const NPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    pub min_pt_eigenvalue: f64,
    pub is_npt: bool,
    pub pt_trace: f64,
}

/// `(rho^{T_B})_{(i,j),(k,l)} = rho_{(i,l),(k,j)}`.
pub fn partial_transpose(m: &CMatrix, dims: Dims) -> CMatrix {
    let db = dims.d_b;
    CMatrix::from_fn(dims.total(), dims.total(), |r, c| {
        let (i, j) = (r / db, r % db);
        let (k, l) = (c / db, c % db);
        m[(i * db + l, k * db + j)]
    })
}

pub fn ppt_check(rho: &DensityOperator) -> Result<PptReport> {
    let pt = partial_transpose(rho.matrix(), rho.dims());
    let (vals, _) = hermitian_eigen(&pt)?;
    let min = vals.last().copied().unwrap_or(0.0);
    Ok(PptReport {
        min_pt_eigenvalue: min,
        is_npt: min < -NPT_TOL,
        pt_trace: pt.diagonal().iter().map(|z| z.re).sum(),
    })
}

/// Max-entry `|assemble(qd) - rho|`.
pub fn verify_decomposition(rho: &DensityOperator, qd: &QuasiDistribution) -> Result<f64> {
    if qd.dims() != rho.dims() {
        return Err(Error::DimensionMismatch {
            context: "verify_decomposition",
            expected: rho.dims().total(),
            found: qd.dims().total(),
        });
    }
    qd.assemble().max_abs_diff(rho.as_operator())
}

type Q = [C64; 2];
type M2 = [[C64; 2]; 2];

/// Fixed-size view of a two-qubit operator.
struct Qubits([[C64; 4]; 4]);

impl Qubits {
    fn new(m: &CMatrix) -> Self {
        let mut out = [[C64::new(0.0, 0.0); 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                *z = m[(i, j)];
            }
        }
        Self(out)
    }

    /// Operator on A left after sandwiching B with `b`.
    fn on_b(&self, b: &Q) -> M2 {
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        *z += b[k].conj() * self.0[2 * i + k][2 * j + l] * b[l];
                    }
                }
            }
        }
        out
    }

    /// Operator on B left after sandwiching A with `a`.
    fn on_a(&self, a: &Q) -> M2 {
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (k, row) in out.iter_mut().enumerate() {
            for (l, z) in row.iter_mut().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        *z += a[i].conj() * self.0[2 * i + k][2 * j + l] * a[j];
                    }
                }
            }
        }
        out
    }
}

struct GridKet {
    v: Q,
    on_a: M2,
    on_b: M2,
}

fn bloch(theta: f64, phi: f64) -> Q {
    [
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phi),
    ]
}

fn apply(m: &M2, v: &Q) -> Q {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn dist(x: &Q, y: &Q, g: f64) -> f64 {
    ((x[0] - y[0] * g).norm_sqr() + (x[1] - y[1] * g).norm_sqr()).sqrt()
}

/// `(g, |L_b a - g a|, |L_a b - g b|)`.
fn residuals(lb: &M2, la: &M2, a: &Q, b: &Q) -> (f64, f64, f64) {
    let lba = apply(lb, a);
    let g = (a[0].conj() * lba[0] + a[1].conj() * lba[1]).re;
    (g, dist(&lba, a, g), dist(&apply(la, b), b, g))
}

fn residual_with(lb: &M2, la: &M2, a: &Q, b: &Q) -> (f64, f64) {
    let (g, ra, rb) = residuals(lb, la, a, b);
    (g, ra.max(rb))
}

/// Exhaustive Bloch-angle scan for two-qubit operators.
///
/// `theta` runs over `resolution` points in `[0, pi]`, `phi` over `resolution`
/// points in `[0, 2 pi)`. Grid points whose residual is below
/// `4 |L| 2 pi / resolution` and no larger than any of their 80 neighbours are
/// refined by a derivative-free compass search on the summed squared residuals;
/// refinements reaching [`ACCEPT_RESIDUAL`] are deduplicated and returned.
pub fn grid_sep_eigen(l: &HermitianOperator, resolution: usize) -> Result<SolutionSet> {
    let dims = l.dims();
    if dims.d_a != 2 || dims.d_b != 2 {
        return Err(Error::UnsupportedDims {
            d_a: dims.d_a,
            d_b: dims.d_b,
        });
    }
    if resolution < 32 {
        return Err(Error::InvalidConfig(format!("grid resolution must be at least 32, got {resolution}")));
    }
    let q = Qubits::new(l.matrix());
    let r = resolution;
    let angles = |t: usize, p: usize| (PI * t as f64 / (r - 1) as f64, 2.0 * PI * p as f64 / r as f64);
    let grid: Vec<GridKet> = (0..r * r)
        .map(|idx| {
            let (t, p) = angles(idx / r, idx % r);
            let v = bloch(t, p);
            GridKet {
                on_a: q.on_a(&v),
                on_b: q.on_b(&v),
                v,
            }
        })
        .collect();

    let norm = hermitian_eigen(l.matrix())?.0.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let grid_tol = 4.0 * norm * 2.0 * PI / r as f64;
    let n = r * r;
    let values: Vec<f32> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (ga, gb) = (&grid[idx / n], &grid[idx % n]);
            let (_, ra, rb) = residuals(&gb.on_b, &ga.on_a, &ga.v, &gb.v);
            ra.hypot(rb) as f32
        })
        .collect();

    let coords = |idx: usize| {
        let (ia, ib) = (idx / n, idx % n);
        [ia / r, ia % r, ib / r, ib % r]
    };
    let index = |c: [usize; 4]| (c[0] * r + c[1]) * n + c[2] * r + c[3];
    let minima: Vec<usize> = (0..n * n)
        .into_par_iter()
        .filter(|&idx| {
            let v = values[idx];
            if (v as f64) > grid_tol {
                return false;
            }
            let c = coords(idx);
            let pole = |t: usize, p: usize| (t == 0 || t == r - 1) && p != 0;
            if pole(c[0], c[1]) || pole(c[2], c[3]) {
                return false;
            }
            for d in 0..81usize {
                if d == 40 {
                    continue;
                }
                let off = [d / 27, (d / 9) % 3, (d / 3) % 3, d % 3];
                let mut q = c;
                let mut valid = true;
                for k in 0..4 {
                    let delta = off[k] as isize - 1;
                    if k % 2 == 0 {
                        let t = c[k] as isize + delta;
                        if t < 0 || t >= r as isize {
                            valid = false;
                            break;
                        }
                        q[k] = t as usize;
                    } else {
                        q[k] = (c[k] as isize + delta).rem_euclid(r as isize) as usize;
                    }
                }
                if valid {
                    let (jdx, w) = (index(q), values[index(q)]);
                    if w < v || (w == v && jdx < idx) {
                        return false;
                    }
                }
            }
            true
        })
        .collect();

    let step0 = [PI / (r - 1) as f64, 2.0 * PI / r as f64];
    let refined: Vec<Option<(f64, ProductState, f64)>> = minima
        .par_iter()
        .map(|&idx| {
            let c = coords(idx);
            let (ta, pa) = angles(c[0], c[1]);
            let (tb, pb) = angles(c[2], c[3]);
            let x = compass_search(&q, [ta, pa, tb, pb], step0);
            let (a, b) = (bloch(x[0], x[1]), bloch(x[2], x[3]));
            let (g, res) = residual_with(&q.on_b(&b), &q.on_a(&a), &a, &b);
            if res > ACCEPT_RESIDUAL {
                return None;
            }
            let state = ProductState::new(Ket::from_slice(&a).ok()?, Ket::from_slice(&b).ok()?);
            Some((g, state, res))
        })
        .collect();

    let mut solutions: Vec<SepEigenSolution> = Vec::new();
    for (g, state, residual) in refined.into_iter().flatten() {
        let dup = solutions
            .iter()
            .any(|s| (s.g - g).abs() <= 1e-8 && s.state.fidelity(&state) > 1.0 - 1e-8);
        if !dup {
            solutions.push(SepEigenSolution {
                g,
                state,
                residual,
                excluded: false,
            });
        }
    }
    solutions.sort_by(|x, y| y.g.total_cmp(&x.g).then_with(|| x.state.canonical_cmp(&y.state)));
    Ok(SolutionSet {
        dims,
        solutions,
        families: Vec::new(),
        restarts_used: minima.len(),
        coverage: Coverage::Heuristic,
    })
}

/// Coordinate pattern search on `|r_a|^2 + |r_b|^2` over Bloch angles.
fn compass_search(q: &Qubits, mut x: [f64; 4], step0: [f64; 2]) -> [f64; 4] {
    let f = |x: &[f64; 4]| {
        let (a, b) = (bloch(x[0], x[1]), bloch(x[2], x[3]));
        let (_, ra, rb) = residuals(&q.on_b(&b), &q.on_a(&a), &a, &b);
        ra * ra + rb * rb
    };
    let mut fx = f(&x);
    let mut step = [step0[0], step0[1], step0[0], step0[1]];
    let mut evals = 0;
    while step.iter().any(|s| *s > 1e-13) && evals < 20_000 && fx > 1e-24 {
        let mut improved = false;
        for k in 0..4 {
            for sign in [1.0, -1.0] {
                let mut y = x;
                y[k] += sign * step[k];
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s *= 0.5;
            }
        }
    }
    x
}
