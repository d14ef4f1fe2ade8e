//! Recovery of continuous-domain piecewise-constant images from non-uniform
//! Fourier samples by nuclear-norm minimisation of a structured lifting.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod index_sets;
pub mod io;
pub mod lifting;
pub mod linalg;
pub mod phantom;
pub mod solver;
pub mod trigpoly;
pub mod tv;

pub use error::{Error, Result};
pub use index_sets::{rank_bound, Index2, IndexSet2D};
pub use lifting::LiftOperator;
pub use phantom::{FourierGrid, Phantom};
pub use solver::{solve_equality, solve_noisy, svt, SolveReport, SolverConfig};
pub use trigpoly::{dirichlet, random_edge_poly, trace_zero_set, CurveDiscretization, TrigPoly};
