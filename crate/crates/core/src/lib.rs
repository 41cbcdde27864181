//! Agnostic learning of kernel-based halfspaces with respect to the zero-one loss.
//!
//! Instead of minimizing the (nonconvex) loss of `x -> phi(<w, x>)` for a
//! Lipschitz transfer `phi`, the learner minimizes the average absolute loss of
//! a linear predictor in the RKHS of `K(x, x') = 1 / (1 - nu <x, x'>)` subject
//! to a squared-norm budget `B`. That problem is convex in the dual
//! coefficients and contains every polynomial of `<w, x>` whose weighted
//! coefficient norm is at most `B`, in particular good approximations of the
//! sigmoid transfer.
//!
//! Modules:
//! - [`transfer`]: the zero-one, sigmoid, erf and piecewise-linear transfers.
//! - [`kernel`]: the composed kernel, Gram matrices and the explicit feature map.
//! - [`polyspace`]: polynomial approximations and their coefficient norm.
//! - [`solver`]: projected subgradient ERM over the norm ball, prediction.
//! - [`eval`]: error measures, sample-size bounds, data generation, cross-validation.
//! - [`cli`]: the `halfspace` command-line tool.

pub mod cli;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod numeric;
pub mod polyspace;
pub mod solver;
pub mod transfer;

pub use error::{Error, Result};
pub use kernel::{composed_kernel, gram, GramMatrix, KernelSpec, Point};
pub use polyspace::{LogBudget, PolynomialApprox};
pub use solver::{solve_erm, train, DualPredictor, SolveReport, SolverOptions};
pub use transfer::{TransferKind, TransferVariant};
