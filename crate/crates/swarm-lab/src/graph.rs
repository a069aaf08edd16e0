//! Communication graph induced by interaction weights above a cut level.

use crate::error::{Error, Result};

/// Directed graph of agent pairs whose weight exceeds the cut, with a strong
/// connectivity report.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGraph {
    pub n: usize,
    /// Edges `(i, j)` with `g_ij > epsilon`, row-major order.
    pub edges: Vec<(usize, usize)>,
    pub strongly_connected: bool,
}

/// Build the graph of weights strictly above `epsilon`. `weights` is a
/// row-major N x N matrix; entry `(i, j)` is the flow from i to j.
pub fn epsilon_graph(weights: &[f64], n: usize, epsilon: f64) -> Result<EpsilonGraph> {
    if weights.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: weights.len(),
        });
    }
    let mut edges = Vec::new();
    let mut adj = vec![Vec::new(); n];
    let mut radj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if weights[i * n + j] > epsilon {
                edges.push((i, j));
                adj[i].push(j);
                radj[j].push(i);
            }
        }
    }
    // strong connectivity: every node reachable from node 0 forwards and
    // backwards
    let strongly_connected = n <= 1 || (full_reach(&adj) && full_reach(&radj));
    Ok(EpsilonGraph {
        n,
        edges,
        strongly_connected,
    })
}

fn full_reach(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: transitive-closure reachability by repeated squaring of the
    /// boolean adjacency matrix.
    fn strongly_connected_oracle(weights: &[f64], n: usize, eps: f64) -> bool {
        let mut reach = vec![false; n * n];
        for i in 0..n {
            reach[i * n + i] = true;
            for j in 0..n {
                if weights[i * n + j] > eps {
                    reach[i * n + j] = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i * n + k] && reach[k * n + j] {
                        reach[i * n + j] = true;
                    }
                }
            }
        }
        reach.iter().all(|&r| r)
    }

    #[test]
    fn complete_graph() {
        let w = vec![1.0; 9];
        let g = epsilon_graph(&w, 3, 0.5).unwrap();
        assert_eq!(g.edges.len(), 9);
        assert!(g.strongly_connected);
    }

    #[test]
    fn zero_matrix_is_empty() {
        let w = vec![0.0; 4];
        let g = epsilon_graph(&w, 2, 0.0).unwrap();
        assert!(g.edges.is_empty());
        assert!(!g.strongly_connected);
    }

    #[test]
    fn one_way_edge_not_strong() {
        let w = vec![0.0, 1.0, 0.0, 0.0];
        let g = epsilon_graph(&w, 2, 0.0).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
        assert!(!g.strongly_connected);
        assert_eq!(g.strongly_connected, strongly_connected_oracle(&w, 2, 0.0));
    }

    #[test]
    fn matches_reachability_oracle_on_random_graphs() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..7);
            let w: Vec<f64> = (0..n * n)
                .map(|_| if rng.random_bool(0.35) { 1.0 } else { 0.0 })
                .collect();
            let g = epsilon_graph(&w, n, 0.5).unwrap();
            assert_eq!(
                g.strongly_connected,
                strongly_connected_oracle(&w, n, 0.5),
                "n={n} w={w:?}"
            );
        }
    }
}
