use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, NdFloat, Zip};
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionParams;
use crate::error::{Error, Result};

use super::cholesky::SpdSolver;
use super::graph::{laplacian, log_operator, normalize_sym, Graph, LaplacianMode};
use super::sparse::SparseOperator;

/// Largest node count for which `(I − δÂ)` is factorized densely.
pub const DEFAULT_DENSE_THRESHOLD: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Dense factorization up to the threshold, Neumann above it.
    #[default]
    Auto,
    Dense,
    Neumann,
}

impl SolverChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverChoice::Auto => "auto",
            SolverChoice::Dense => "dense",
            SolverChoice::Neumann => "neumann",
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SolverChoice::Auto),
            "dense" => Ok(SolverChoice::Dense),
            "neumann" => Ok(SolverChoice::Neumann),
            other => Err(Error::Config(format!(
                "unknown solver `{other}` (expected auto, dense or neumann)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleOptions {
    pub laplacian: LaplacianMode,
    pub dense_threshold: usize,
    pub solver: SolverChoice,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            laplacian: LaplacianMode::PaperDegree,
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            solver: SolverChoice::Auto,
        }
    }
}

impl BundleOptions {
    pub fn with_laplacian(mut self, mode: LaplacianMode) -> Self {
        self.laplacian = mode;
        self
    }

    pub fn with_solver(mut self, solver: SolverChoice) -> Self {
        self.solver = solver;
        self
    }
}

/// How `(I − δÂ)^{-1}` is applied.
#[derive(Debug, Clone)]
pub enum GlobalSolver {
    Dense(SpdSolver),
    Neumann { terms: usize },
}

/// Operators shared by every diffusion, energy and model computation on one
/// graph. Immutable after construction.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    adjacency: SparseOperator,
    laplacian: SparseOperator,
    log_op: SparseOperator,
    mode: LaplacianMode,
    delta: f64,
    global: GlobalSolver,
}

/// Builds `Â`, `L̂`, `L̂Â` and the solver for `(I − δÂ)`.
pub fn precompute_operators(
    graph: &Graph,
    params: &DiffusionParams,
    options: &BundleOptions,
) -> Result<OperatorBundle> {
    params.validate()?;
    let adjacency = normalize_sym(graph)?;
    let lap = laplacian(&adjacency, options.laplacian)?;
    let log_op = log_operator(&adjacency, &lap)?;
    let n = graph.num_nodes();
    let use_dense = match options.solver {
        SolverChoice::Auto => n <= options.dense_threshold,
        SolverChoice::Dense if n > options.dense_threshold => {
            return Err(Error::InvalidParameter(format!(
                "dense solve requested for {n} nodes, above the dense threshold {}; use the Neumann solver",
                options.dense_threshold
            )))
        }
        SolverChoice::Dense => true,
        SolverChoice::Neumann => false,
    };
    let global = if use_dense {
        let system = SparseOperator::identity(n).linear_combination(1.0, &adjacency, -params.delta)?;
        GlobalSolver::Dense(SpdSolver::factor(&system)?)
    } else {
        GlobalSolver::Neumann {
            terms: params.neumann_terms,
        }
    };
    Ok(OperatorBundle {
        adjacency,
        laplacian: lap,
        log_op,
        mode: options.laplacian,
        delta: params.delta,
        global,
    })
}

impl OperatorBundle {
    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// `Â`.
    pub fn adjacency(&self) -> &SparseOperator {
        &self.adjacency
    }

    /// `L̂` in the bundle's Laplacian mode.
    pub fn laplacian(&self) -> &SparseOperator {
        &self.laplacian
    }

    /// `L̂Â`.
    pub fn log_operator(&self) -> &SparseOperator {
        &self.log_op
    }

    pub fn laplacian_mode(&self) -> LaplacianMode {
        self.mode
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn global_solver(&self) -> &GlobalSolver {
        &self.global
    }

    /// The solver actually in use, `Dense` or `Neumann`.
    pub fn solver_choice(&self) -> SolverChoice {
        match &self.global {
            GlobalSolver::Dense(_) => SolverChoice::Dense,
            GlobalSolver::Neumann { .. } => SolverChoice::Neumann,
        }
    }

    pub fn dense_solver(&self) -> Option<&SpdSolver> {
        match &self.global {
            GlobalSolver::Dense(s) => Some(s),
            GlobalSolver::Neumann { .. } => None,
        }
    }

    /// Applies the bundle's approximation of `(I − δÂ)^{-1}`. The operator is
    /// symmetric, so this also serves as its transpose during backprop.
    pub fn apply_global<T: NdFloat>(&self, rhs: ArrayView2<'_, T>) -> Result<Array2<T>> {
        match &self.global {
            GlobalSolver::Dense(solver) => solver.solve(rhs),
            GlobalSolver::Neumann { terms } => self.neumann_sum(rhs, *terms),
        }
    }

    /// `Σ_{t=0}^{terms} (δÂ)^t · rhs` by Horner accumulation:
    /// `acc ← rhs + δÂ·acc`, one sparse product per term.
    pub fn neumann_sum<T: NdFloat>(&self, rhs: ArrayView2<'_, T>, terms: usize) -> Result<Array2<T>> {
        let delta = T::from(self.delta).expect("representable delta");
        let mut acc = rhs.to_owned();
        for _ in 0..terms {
            let propagated = self.adjacency.spmm(acc.view())?;
            Zip::from(&mut acc)
                .and(&rhs)
                .and(&propagated)
                .for_each(|a, &r, &p| *a = r + delta * p);
        }
        Ok(acc)
    }
}
