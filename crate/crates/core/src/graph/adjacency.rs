use crate::linalg::CsrMatrix;

/// Symmetric renormalized adjacency `D̃^{-1/2}(A + I)D̃^{-1/2}` for an
/// undirected edge list given once per edge.
pub fn normalized_adjacency(num_nodes: usize, edges: &[(usize, usize)]) -> CsrMatrix {
    let mut deg = vec![1.0f64; num_nodes];
    for &(u, v) in edges {
        deg[u] += 1.0;
        deg[v] += 1.0;
    }
    let mut triplets = Vec::with_capacity(num_nodes + 2 * edges.len());
    for (i, d) in deg.iter().enumerate() {
        triplets.push((i, i, 1.0 / d));
    }
    for &(u, v) in edges {
        // One rounding step instead of two keeps regular graphs exact.
        let w = 1.0 / (deg[u] * deg[v]).sqrt();
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    CsrMatrix::from_triplets(num_nodes, num_nodes, &triplets)
        .expect("edge endpoints validated by caller")
}
