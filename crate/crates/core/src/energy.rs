//! Quadratic energy over node representations and its closed-form minimizer.
//!
//! ```text
//! E(H) = λ‖H − X*‖² + ε‖H − L̂ÂX*‖² + η‖H − L̂X*‖² + tr(HᵀL̂H)
//! ```
//!
//! The gradient follows the half-gradient convention (the factor 2 from the
//! squared norms is dropped), which leaves the stationary point unchanged.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::data::dirichlet_energy;
use crate::diffusion::DiffusionParams;
use crate::error::{Error, Result};
use crate::graph_core::{LaplacianMode, OperatorBundle, SparseOperator, SpdSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub lambda: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl EnergyParams {
    pub fn new(lambda: f64, epsilon: f64, eta: f64) -> Result<Self> {
        let p = Self { lambda, epsilon, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("epsilon", self.epsilon), ("eta", self.eta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.total() == 0.0 {
            return Err(Error::InvalidParameter("lambda, epsilon and eta are all zero".into()));
        }
        Ok(())
    }

    /// `λ + ε + η`.
    pub fn total(&self) -> f64 {
        self.lambda + self.epsilon + self.eta
    }
}

/// `λ = α/δ`, `ε = β/δ`, `η = γ/δ`: the weights under which the energy
/// minimizer coincides with the infinite-diffusion embeddings.
pub fn params_from_diffusion(dp: &DiffusionParams) -> EnergyParams {
    EnergyParams {
        lambda: dp.alpha / dp.delta,
        epsilon: dp.beta / dp.delta,
        eta: dp.gamma / dp.delta,
    }
}

struct Targets {
    log: Array2<f64>,
    lap: Array2<f64>,
}

fn targets(x_star: ArrayView2<'_, f64>, bundle: &OperatorBundle) -> Result<Targets> {
    if x_star.nrows() != bundle.num_nodes() {
        return Err(Error::dims(
            "energy",
            format!("{} rows", bundle.num_nodes()),
            format!("{} rows", x_star.nrows()),
        ));
    }
    Ok(Targets {
        log: bundle.log_operator().spmm(x_star)?,
        lap: bundle.laplacian().spmm(x_star)?,
    })
}

fn check_shape(h: &ArrayView2<'_, f64>, x_star: &ArrayView2<'_, f64>) -> Result<()> {
    if h.dim() != x_star.dim() {
        return Err(Error::dims("energy", format!("{:?}", x_star.dim()), format!("{:?}", h.dim())));
    }
    Ok(())
}

fn sq_dist(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
}

fn fitting_terms(
    h: &ArrayView2<'_, f64>,
    x_star: &ArrayView2<'_, f64>,
    t: &Targets,
    ep: &EnergyParams,
) -> f64 {
    ep.lambda * sq_dist(h, x_star)
        + ep.epsilon * sq_dist(h, &t.log.view())
        + ep.eta * sq_dist(h, &t.lap.view())
}

/// Energy in trace form, with the smoothing term `tr(HᵀL̂H)` taken in the
/// bundle's Laplacian mode.
pub fn energy(
    h: ArrayView2<'_, f64>,
    x_star: ArrayView2<'_, f64>,
    bundle: &OperatorBundle,
    ep: &EnergyParams,
) -> Result<f64> {
    check_shape(&h, &x_star)?;
    let t = targets(x_star, bundle)?;
    let lh = bundle.laplacian().spmm(h)?;
    let smoothing = Zip::from(&h).and(&lh).fold(0.0, |acc, &a, &b| acc + a * b);
    Ok(fitting_terms(&h, &x_star, &t, ep) + smoothing)
}

/// Energy in pairwise form, smoothing term `½ Σ_ij Â_ij ‖h_i − h_j‖²`.
///
/// The pairwise sum equals `tr(Hᵀ(D̂ − Â)H)`, so this agrees with [`energy`]
/// for paper-degree bundles on every graph, and for identity-degree bundles
/// wherever `D̂ = I` (regular graphs).
pub fn energy_pairwise(
    h: ArrayView2<'_, f64>,
    x_star: ArrayView2<'_, f64>,
    bundle: &OperatorBundle,
    ep: &EnergyParams,
) -> Result<f64> {
    check_shape(&h, &x_star)?;
    let t = targets(x_star, bundle)?;
    Ok(fitting_terms(&h, &x_star, &t, ep) + dirichlet_energy(h, bundle)?)
}

/// Half-gradient `λ(H − X*) + ε(H − L̂ÂX*) + η(H − L̂X*) + L̂H`.
pub fn energy_gradient(
    h: ArrayView2<'_, f64>,
    x_star: ArrayView2<'_, f64>,
    bundle: &OperatorBundle,
    ep: &EnergyParams,
) -> Result<Array2<f64>> {
    check_shape(&h, &x_star)?;
    let t = targets(x_star, bundle)?;
    let mut grad = bundle.laplacian().spmm(h)?;
    Zip::from(&mut grad)
        .and(&h)
        .and(&x_star)
        .and(&t.log)
        .and(&t.lap)
        .for_each(|g, &hv, &x, &lx, &llx| {
            *g += ep.lambda * (hv - x) + ep.epsilon * (hv - lx) + ep.eta * (hv - llx);
        });
    Ok(grad)
}

fn rhs(x_star: ArrayView2<'_, f64>, t: &Targets, ep: &EnergyParams) -> Array2<f64> {
    let mut out = x_star.mapv(|v| ep.lambda * v);
    out.scaled_add(ep.epsilon, &t.log);
    out.scaled_add(ep.eta, &t.lap);
    out
}

/// Closed-form minimizer for identity-degree bundles:
/// `Ĥ = ((λ+ε+η+1)I − Â)⁻¹(λX* + εL̂ÂX* + ηL̂X*)`.
pub fn energy_minimizer(
    x_star: ArrayView2<'_, f64>,
    bundle: &OperatorBundle,
    ep: &EnergyParams,
) -> Result<Array2<f64>> {
    if bundle.laplacian_mode() != LaplacianMode::IdentityDegree {
        return Err(Error::WrongLaplacianMode);
    }
    ep.validate()?;
    let t = targets(x_star, bundle)?;
    let n = bundle.num_nodes();
    let system = SparseOperator::identity(n).linear_combination(ep.total() + 1.0, bundle.adjacency(), -1.0)?;
    SpdSolver::factor(&system)?.solve(rhs(x_star, &t, ep).view())
}

/// Minimizer for either Laplacian mode, from the stationarity condition
/// `((λ+ε+η)I + L̂)Ĥ = λX* + εL̂ÂX* + ηL̂X*`.
pub fn energy_minimizer_general(
    x_star: ArrayView2<'_, f64>,
    bundle: &OperatorBundle,
    ep: &EnergyParams,
) -> Result<Array2<f64>> {
    ep.validate()?;
    let t = targets(x_star, bundle)?;
    let n = bundle.num_nodes();
    let system = SparseOperator::identity(n).linear_combination(ep.total(), bundle.laplacian(), 1.0)?;
    SpdSolver::factor(&system)?.solve(rhs(x_star, &t, ep).view())
}
