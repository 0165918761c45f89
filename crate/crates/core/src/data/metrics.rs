use ndarray::{ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::graph_core::{Graph, OperatorBundle, SparseOperator};

/// Edge homophily: fraction of undirected edges joining same-label nodes.
pub fn edge_homophily(graph: &Graph, labels: &[usize]) -> Result<f64> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::dims("edge_homophily", graph.num_nodes(), labels.len()));
    }
    if graph.num_edges() == 0 {
        return Err(Error::Dataset("homophily is undefined on a graph with no edges".into()));
    }
    let same = graph.edges().iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / graph.num_edges() as f64)
}

/// Dirichlet energy `½ Σ_ij Â_ij ‖z_i − z_j‖²`, summed over both ordered pairs.
pub fn dirichlet_energy(z: ArrayView2<'_, f64>, bundle: &OperatorBundle) -> Result<f64> {
    pairwise_energy(z, bundle.adjacency())
}

/// Same sum for an arbitrary symmetric weight operator; diagonal entries contribute nothing.
pub fn pairwise_energy(z: ArrayView2<'_, f64>, weights: &SparseOperator) -> Result<f64> {
    if z.nrows() != weights.rows() {
        return Err(Error::dims("dirichlet_energy", format!("{} rows", weights.rows()), format!("{} rows", z.nrows())));
    }
    let mut total = 0.0;
    for (i, j, w) in weights.triplets() {
        if i == j {
            continue;
        }
        let d2 = Zip::from(z.row(i)).and(z.row(j)).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
        total += 0.5 * w * d2;
    }
    Ok(total)
}

/// `tr(Zᵀ L Z)` for the given Laplacian.
pub fn trace_energy(z: ArrayView2<'_, f64>, laplacian: &SparseOperator) -> Result<f64> {
    let lz = laplacian.spmm(z)?;
    Ok(Zip::from(&z).and(&lz).fold(0.0, |acc, &a, &b| acc + a * b))
}

/// Smallest Euclidean distance between two distinct rows; `None` below two rows.
pub fn min_pairwise_distance(z: ArrayView2<'_, f64>) -> Option<f64> {
    let n = z.nrows();
    if n < 2 {
        return None;
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = Zip::from(z.row(i)).and(z.row(j)).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
            best = best.min(d2);
        }
    }
    Some(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionParams;
    use crate::graph_core::{precompute_operators, BundleOptions, LaplacianMode};
    use crate::testutil::{random_graph, random_matrix};
    use ndarray::{array, Array2};

    fn bundle(g: &Graph, mode: LaplacianMode) -> OperatorBundle {
        precompute_operators(g, &DiffusionParams::default(), &BundleOptions::default().with_laplacian(mode)).unwrap()
    }

    #[test]
    fn homophily_extremes() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(edge_homophily(&g, &[1, 1, 1, 1]).unwrap(), 1.0);
        assert_eq!(edge_homophily(&g, &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(edge_homophily(&g, &[0, 0, 1, 1]).unwrap(), 0.5);
        assert!(edge_homophily(&Graph::isolated(3), &[0, 0, 0]).is_err());
    }

    #[test]
    fn p2_hand_value() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let b = bundle(&g, LaplacianMode::IdentityDegree);
        assert!((dirichlet_energy(array![[0.0], [2.0]].view(), &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_rows_and_single_node_are_zero() {
        let g = random_graph(12, 3.0, 1);
        let b = bundle(&g, LaplacianMode::PaperDegree);
        let z = Array2::from_elem((12, 3), 0.7);
        assert_eq!(dirichlet_energy(z.view(), &b).unwrap(), 0.0);
        let one = bundle(&Graph::isolated(1), LaplacianMode::IdentityDegree);
        assert_eq!(dirichlet_energy(array![[5.0]].view(), &one).unwrap(), 0.0);
        assert_eq!(min_pairwise_distance(array![[5.0]].view()), None);
    }

    #[test]
    fn pairwise_matches_paper_degree_trace_everywhere() {
        for seed in 0..5 {
            let g = random_graph(15, 4.0, seed);
            let b = bundle(&g, LaplacianMode::PaperDegree);
            let z = random_matrix(15, 3, seed + 100);
            let p = dirichlet_energy(z.view(), &b).unwrap();
            let t = trace_energy(z.view(), b.laplacian()).unwrap();
            assert!((p - t).abs() <= 1e-10 * p.abs().max(1.0));
        }
    }

    #[test]
    fn pairwise_matches_identity_degree_trace_on_regular_graphs() {
        let ring = Graph::new(9, (0..9).map(|i| (i, (i + 1) % 9))).unwrap();
        let k4 = Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        for g in [ring, k4] {
            let b = bundle(&g, LaplacianMode::IdentityDegree);
            let z = random_matrix(g.num_nodes(), 2, 3);
            let p = dirichlet_energy(z.view(), &b).unwrap();
            let t = trace_energy(z.view(), b.laplacian()).unwrap();
            assert!((p - t).abs() <= 1e-10 * p.abs().max(1.0));
        }
    }

    #[test]
    fn zero_iff_constant_per_component() {
        let g = Graph::new(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let b = bundle(&g, LaplacianMode::PaperDegree);
        let z = array![[1.0], [1.0], [1.0], [-4.0], [-4.0]];
        assert_eq!(dirichlet_energy(z.view(), &b).unwrap(), 0.0);
        let z = array![[1.0], [1.0], [1.5], [-4.0], [-4.0]];
        assert!(dirichlet_energy(z.view(), &b).unwrap() > 0.0);
    }

    #[test]
    fn min_distance() {
        let z = array![[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]];
        assert_eq!(min_pairwise_distance(z.view()), Some(1.0));
    }
}
