use std::collections::VecDeque;

use super::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphProperties {
    pub connected: bool,
    pub bipartite: bool,
}

/// Connectivity and bipartiteness of the raw edge set (renormalization
/// self-loops are not considered).
pub fn graph_properties(g: &Graph) -> GraphProperties {
    let n = g.num_nodes();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in g.edges() {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut color: Vec<Option<bool>> = vec![None; n];
    let mut components = 0;
    let mut bipartite = true;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if color[start].is_some() {
            continue;
        }
        components += 1;
        color[start] = Some(false);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].unwrap();
            for &v in &adj[u] {
                match color[v] {
                    None => {
                        color[v] = Some(!cu);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => bipartite = false,
                    Some(_) => {}
                }
            }
        }
    }
    GraphProperties {
        connected: components <= 1,
        bipartite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(
            graph_properties(&g),
            GraphProperties {
                connected: true,
                bipartite: false
            }
        );
    }

    #[test]
    fn path_p2() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(
            graph_properties(&g),
            GraphProperties {
                connected: true,
                bipartite: true
            }
        );
    }

    #[test]
    fn two_disjoint_edges() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!graph_properties(&g).connected);
    }

    #[test]
    fn even_cycle_is_bipartite() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(graph_properties(&g).bipartite);
    }
}
