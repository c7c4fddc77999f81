//! Gram system `g = G p` over separability eigenvectors, minimum-norm
//! weights, and the separability verdict.
//!
//! With `G_kl = |<a_k,b_k|a_l,b_l>|^2 = tr(P_k P_l)` and `g_k = tr(P_k rho)`,
//! `g = G p` are the normal equations of the least-squares fit of `rho` onto
//! the span of the product projectors `P_k`. Kernel vectors of `G` are signed
//! measures that assemble to the zero operator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::sep_eigen::{sep_norm_from, solve_sep_eigen, Coverage, SolutionSet, SolverConfig};
use crate::state::{DensityOperator, HermitianOperator, ProductState, QuasiDistribution};

/// Eigenvalues of `G` below this span the kernel.
pub const RANK_TOL: f64 = 1e-10;
/// Largest tolerated `|G p - g|_inf`.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// Largest tolerated max-entry reassembly error.
pub const REASSEMBLY_TOL: f64 = 1e-8;
/// Default negativity threshold.
pub const DEFAULT_TOL_NEG: f64 = 1e-7;
/// Largest Gram entry between states treated as orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-10;
/// Margin by which the purity must exceed the separability norm for an
/// entanglement certificate.
pub const CERTIFICATE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub states: Vec<ProductState>,
    pub g_vec: DVector<f64>,
    pub gram: DMatrix<f64>,
    /// Eigenvalues of `gram`, descending; filled by [`solve_quasi`].
    pub gram_eigenvalues: Vec<f64>,
    /// Orthonormal basis of `ker G`; filled by [`solve_quasi`].
    pub kernel: Vec<DVector<f64>>,
    pub p_particular: Option<DVector<f64>>,
    pub p_opt: Option<DVector<f64>>,
    /// `|G p_particular - g|_inf`.
    pub gram_residual: Option<f64>,
}

impl GramSystem {
    /// Gram system for explicit `(g, state)` pairs in the given order.
    pub fn from_states(pairs: &[(f64, ProductState)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySolutionSet);
        }
        let n = pairs.len();
        let mut gram = DMatrix::from_fn(n, n, |k, l| pairs[k].1.fidelity(&pairs[l].1));
        gram = (&gram + gram.transpose()) * 0.5;
        Ok(Self {
            states: pairs.iter().map(|p| p.1.clone()).collect(),
            g_vec: DVector::from_iterator(n, pairs.iter().map(|p| p.0)),
            gram,
            gram_eigenvalues: Vec::new(),
            kernel: Vec::new(),
            p_particular: None,
            p_opt: None,
            gram_residual: None,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `(p_k, state_k)` pairs for a weight vector.
    pub fn distribution(&self, weights: &DVector<f64>) -> Result<QuasiDistribution> {
        let dims = self.states[0].dims();
        let mut qd = QuasiDistribution::new(dims);
        for (w, s) in weights.iter().zip(&self.states) {
            qd.push(*w, s.clone())?;
        }
        Ok(qd)
    }

    /// `|G p - g|_inf`.
    pub fn residual_of(&self, p: &DVector<f64>) -> f64 {
        (&self.gram * p - &self.g_vec).amax()
    }
}

/// Gram system over the retained solutions, in solution order.
pub fn build_gram_system(sols: &SolutionSet) -> Result<GramSystem> {
    let pairs: Vec<(f64, ProductState)> = sols.retained().map(|s| (s.g, s.state.clone())).collect();
    GramSystem::from_states(&pairs)
}

/// Spectral pseudo-inverse solution and kernel basis.
pub fn solve_quasi(sys: &GramSystem) -> Result<GramSystem> {
    solve_quasi_with(sys, RANK_TOL)
}

pub fn solve_quasi_with(sys: &GramSystem, rank_tol: f64) -> Result<GramSystem> {
    let (vals, vecs) = symmetric_eigen(&sys.gram)?;
    let n = sys.len();
    let mut p = DVector::zeros(n);
    let mut kernel = Vec::new();
    for (lambda, v) in vals.iter().zip(&vecs) {
        if *lambda < rank_tol {
            kernel.push(v.clone());
        } else {
            p += v * (v.dot(&sys.g_vec) / lambda);
        }
    }
    let residual = sys.residual_of(&p);
    let mut out = sys.clone();
    out.gram_eigenvalues = vals;
    out.kernel = kernel;
    out.p_particular = Some(p);
    out.gram_residual = Some(residual);
    if residual > CONSISTENCY_TOL {
        return Err(Error::InconsistentSystem { residual });
    }
    Ok(out)
}

/// `p_opt = p + sum_k c_k p0_k` with `c_k = -(p0_k . p) / (p0_k . p0_k)`.
pub fn optimize_weights(sys: &GramSystem) -> GramSystem {
    let mut out = sys.clone();
    if let Some(p) = &sys.p_particular {
        out.p_opt = Some(project_out_kernel(p, &sys.kernel));
    }
    out
}

/// Removes the components of `p` along each (mutually orthogonal) kernel vector.
pub fn project_out_kernel(p: &DVector<f64>, kernel: &[DVector<f64>]) -> DVector<f64> {
    let mut out = p.clone();
    for p0 in kernel {
        let c = -p0.dot(p) / p0.dot(p0);
        out += p0 * c;
    }
    out
}

/// `sigma = sum_{n in selected} g_n P_n` and `R = rho - sigma`.
pub fn residual_split(
    rho: &DensityOperator,
    selected: &[usize],
    sols: &SolutionSet,
) -> Result<(HermitianOperator, HermitianOperator)> {
    for &i in selected {
        if i >= sols.solutions.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: sols.solutions.len(),
            });
        }
    }
    for (x, &i) in selected.iter().enumerate() {
        for &j in &selected[x + 1..] {
            let overlap = sols.solutions[i].state.fidelity(&sols.solutions[j].state);
            if overlap > ORTHOGONAL_TOL {
                return Err(Error::NotOrthogonalSelection {
                    first: i,
                    second: j,
                    overlap,
                });
            }
        }
    }
    let mut qd = QuasiDistribution::new(rho.dims());
    for &i in selected {
        qd.push(sols.solutions[i].g, sols.solutions[i].state.clone())?;
    }
    let sigma = qd.assemble();
    let r = rho.as_operator().sub(&sigma)?;
    Ok((sigma, r))
}

/// Greedy scan in solution order (largest `g` first) for mutually orthogonal
/// retained solutions with positive `g`.
pub fn select_orthogonal_high_g(sols: &SolutionSet) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for (i, s) in sols.solutions.iter().enumerate() {
        if s.excluded || s.g <= 0.0 {
            continue;
        }
        if chosen
            .iter()
            .all(|&k| sols.solutions[k].state.fidelity(&s.state) <= ORTHOGONAL_TOL)
        {
            chosen.push(i);
        }
    }
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Separable,
    Entangled,
    Inconclusive,
}

/// Summary of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solutions: usize,
    pub retained: usize,
    pub families: usize,
    pub restarts_used: usize,
    pub coverage: Coverage,
}

impl SolverSummary {
    pub fn of(sols: &SolutionSet) -> Self {
        Self {
            solutions: sols.solutions.len(),
            retained: sols.retained().count(),
            families: sols.families.len(),
            restarts_used: sols.restarts_used,
            coverage: sols.coverage,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub verdict: Verdict,
    pub quasi_dist: QuasiDistribution,
    pub min_weight: f64,
    pub reassembly_residual: f64,
    /// Largest `|G p - g|_inf` over the Gram systems solved.
    pub gram_residual: f64,
    /// `tr(rho^2)`.
    pub purity: f64,
    /// Separability norm of `rho` from the solution set.
    pub max_g: f64,
    pub used_residual_split: bool,
    /// Solver summaries: the state itself, then the residual operator if split.
    pub solver: Vec<SolverSummary>,
    /// Gram systems solved, in the same order as `solver`.
    pub systems: Vec<GramSystem>,
    pub diagnostics: Vec<String>,
    pub tol_neg: f64,
}

struct Stage {
    qd: Option<QuasiDistribution>,
    system: Option<GramSystem>,
    gram_residual: f64,
    note: Option<String>,
}

fn run_stage(sols: &SolutionSet) -> Result<Stage> {
    let sys = match build_gram_system(sols) {
        Ok(s) => s,
        Err(Error::EmptySolutionSet) => {
            return Ok(Stage {
                qd: None,
                system: None,
                gram_residual: f64::INFINITY,
                note: Some("no retained solutions".into()),
            })
        }
        Err(e) => return Err(e),
    };
    match solve_quasi(&sys) {
        Ok(solved) => {
            let opt = optimize_weights(&solved);
            let p = opt.p_opt.clone().expect("solved");
            let qd = opt.distribution(&p)?;
            Ok(Stage {
                qd: Some(qd),
                gram_residual: opt.gram_residual.unwrap_or(0.0),
                system: Some(opt),
                note: None,
            })
        }
        Err(Error::InconsistentSystem { residual }) => Ok(Stage {
            qd: None,
            system: None,
            gram_residual: residual,
            note: Some(format!("inconsistent Gram system, residual {residual:e}")),
        }),
        Err(e) => Err(e),
    }
}

/// Full pipeline: solve, build and solve the Gram system, optimize, and if the
/// result does not reassemble `rho`, retry on the residual operator left after
/// removing an orthogonal high-`g` subset.
pub fn analyze(rho: &DensityOperator, cfg: &SolverConfig, tol_neg: f64) -> Result<AnalysisReport> {
    let sols = solve_sep_eigen(rho.as_operator(), cfg)?;
    let max_g = sep_norm_from(rho.as_operator(), &sols);
    let purity = rho.purity();
    let mut diagnostics = Vec::new();
    let mut solver = vec![SolverSummary::of(&sols)];
    let mut systems = Vec::new();

    let first = run_stage(&sols)?;
    diagnostics.extend(first.note.clone());
    let mut gram_residual = first.gram_residual;
    let mut used_residual_split = false;
    let mut qd = first.qd.clone().map(|q| q.merged());
    systems.extend(first.system);
    let mut reassembly = reassembly_of(rho, qd.as_ref());

    if reassembly > REASSEMBLY_TOL {
        let selected = select_orthogonal_high_g(&sols);
        if !selected.is_empty() {
            let (_, r) = residual_split(rho, &selected, &sols)?;
            let r_sols = solve_sep_eigen(&r, cfg)?;
            solver.push(SolverSummary::of(&r_sols));
            let second = run_stage(&r_sols)?;
            diagnostics.extend(second.note.clone());
            let mut combined = QuasiDistribution::new(rho.dims());
            for &i in &selected {
                combined.push(sols.solutions[i].g, sols.solutions[i].state.clone())?;
            }
            let r_is_zero = r.max_abs() <= REASSEMBLY_TOL;
            if let Some(rq) = &second.qd {
                combined.extend_scaled(rq, 1.0)?;
            }
            if second.qd.is_some() || r_is_zero {
                let merged = combined.merged();
                let candidate = reassembly_of(rho, Some(&merged));
                if candidate < reassembly {
                    used_residual_split = true;
                    reassembly = candidate;
                    qd = Some(merged);
                    gram_residual = if r_is_zero && second.qd.is_none() {
                        0.0
                    } else {
                        second.gram_residual
                    };
                }
            }
            systems.extend(second.system);
        }
    }
    if reassembly > REASSEMBLY_TOL {
        diagnostics.push(format!(
            "decomposition does not reassemble the state: residual {reassembly:e}"
        ));
    }

    let quasi_dist = qd.unwrap_or_else(|| QuasiDistribution::new(rho.dims()));
    let min_weight = quasi_dist.min_weight();
    let verdict = if gram_residual > CONSISTENCY_TOL || reassembly > REASSEMBLY_TOL {
        Verdict::Inconclusive
    } else if min_weight >= -tol_neg {
        Verdict::Separable
    } else if purity > max_g + CERTIFICATE_MARGIN {
        Verdict::Entangled
    } else {
        diagnostics.push(format!(
            "negative weight {min_weight:e} without purity certificate (purity {purity}, separability norm {max_g})"
        ));
        Verdict::Inconclusive
    };

    Ok(AnalysisReport {
        verdict,
        quasi_dist,
        min_weight,
        reassembly_residual: reassembly,
        gram_residual,
        purity,
        max_g,
        used_residual_split,
        solver,
        systems,
        diagnostics,
        tol_neg,
    })
}

fn reassembly_of(rho: &DensityOperator, qd: Option<&QuasiDistribution>) -> f64 {
    match qd {
        Some(q) => q
            .assemble()
            .max_abs_diff(rho.as_operator())
            .unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    }
}
