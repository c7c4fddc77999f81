//! Quasi-probability representations of bipartite quantum states over
//! product states, with the separability eigenvalue solver and the
//! minimum-norm optimization that decides entanglement.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod oracle;
pub mod random;
pub mod reconstruct;
pub mod sep_eigen;
pub mod state;

pub use error::{Error, Result};
pub use reconstruct::{
    interference_expansion, pure_to_quasi, reconstruct_quasi, schmidt_decompose, spectral_decompose,
    PureExpansion, SchmidtForm,
};
pub use state::{
    assemble, partial_collapse, validate_density, DensityOperator, Dims, HermitianOperator, Ket,
    ProductState, QuasiDistribution, Side, Term, ValidationTolerances,
};
pub use sep_eigen::{
    sep_iterate, sep_norm, solve_sep_eigen, Branch, Coverage, Family, SepEigenSolution, SolutionSet,
    SolverConfig,
};
pub use optimize::{
    analyze, build_gram_system, optimize_weights, residual_split, select_orthogonal_high_g, solve_quasi,
    AnalysisReport, GramSystem, Verdict,
};
pub use oracle::{grid_sep_eigen, ppt_check, verify_decomposition, PptReport};
