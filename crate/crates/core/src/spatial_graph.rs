//! Undirected spatial dependence graph and the MRF label-agreement weight.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

/// Symmetric, irreflexive graph over opaque string identifiers.
///
/// Neighbor lists are sorted ascending by internal index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpatialGraph {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
}

impl SpatialGraph {
    /// Builds the graph from an edge list. Self loops and duplicates are dropped.
    pub fn from_edge_list<S: AsRef<str>>(vertices: &[S], edges: &[(S, S)]) -> Result<Self> {
        let mut index = HashMap::with_capacity(vertices.len());
        let mut labels = Vec::with_capacity(vertices.len());
        for v in vertices {
            let v = v.as_ref().to_string();
            if index.insert(v.clone(), labels.len()).is_some() {
                return Err(Error::DuplicateVertex(v));
            }
            labels.push(v);
        }
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownVertex(s.to_string()));
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            pairs.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        Ok(Self::from_index_pairs(labels, index, pairs))
    }

    /// Graph over vertices `0..n` labelled by their decimal index.
    pub fn from_indices(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let index = labels.iter().cloned().zip(0..).collect();
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= n || *b >= n) {
            return Err(Error::IndexOutOfRange {
                index: a.max(b),
                len: n,
            });
        }
        Ok(Self::from_index_pairs(labels, index, edges.to_vec()))
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        Self::from_indices(n, &[]).expect("no edges")
    }

    fn from_index_pairs(
        labels: Vec<String>,
        index: HashMap<String, usize>,
        pairs: Vec<(usize, usize)>,
    ) -> Self {
        let mut neighbors = vec![Vec::new(); labels.len()];
        for (a, b) in pairs {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            labels,
            index,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(a, b)` with `a < b`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Connects every pair at shortest-path distance at most `d_max`.
    pub fn expand_neighbors(&self, d_max: usize) -> Result<Self> {
        if d_max == 0 {
            return Err(Error::InvalidParameter("graph distance limit must be >= 1".into()));
        }
        let n = self.len();
        let mut neighbors = vec![Vec::new(); n];
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for (src, out) in neighbors.iter_mut().enumerate() {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(v) = queue.pop_front() {
                if dist[v] == d_max {
                    continue;
                }
                for &w in &self.neighbors[v] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        out.push(w);
                        queue.push_back(w);
                    }
                }
            }
            out.sort_unstable();
        }
        Ok(Self {
            labels: self.labels.clone(),
            index: self.index.clone(),
            neighbors,
        })
    }

    /// Connected components as sorted vertex lists, restricted to `subset`.
    pub fn components_within(&self, subset: &[usize]) -> Vec<Vec<usize>> {
        let mut inside = vec![false; self.len()];
        for &v in subset {
            inside[v] = true;
        }
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for &start in subset {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if inside[w] && !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Number of neighbors of `i` carrying label `candidate`.
    pub fn matching_neighbors(&self, labels: &[usize], i: usize, candidate: usize) -> usize {
        self.neighbors[i]
            .iter()
            .filter(|&&l| labels[l] == candidate)
            .count()
    }
}

/// `lambda * #{l in neighbors(i) : z_l = candidate}`, the negated MRF energy
/// of placing vertex `i` in `candidate`.
pub fn mrf_log_weight(
    z: &[usize],
    i: usize,
    candidate: usize,
    graph: &SpatialGraph,
    lambda: f64,
) -> Result<f64> {
    if z.len() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            actual: z.len(),
            context: "label vector length",
        });
    }
    if i >= graph.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: graph.len(),
        });
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda * graph.matching_neighbors(z, i, candidate) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abc(edges: &[(&str, &str)]) -> SpatialGraph {
        SpatialGraph::from_edge_list(&["a", "b", "c"], edges).unwrap()
    }

    #[test]
    fn edge_list_basic() {
        let g = abc(&[("a", "b")]);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert!(g.neighbors(2).is_empty());
    }

    #[test]
    fn self_loop_dropped() {
        let g = abc(&[("a", "a")]);
        assert!(g.neighbors(0).is_empty());
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = abc(&[("a", "b"), ("b", "a")]);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn unknown_vertex_is_error() {
        let err = SpatialGraph::from_edge_list(&["a", "b"], &[("a", "z")]).unwrap_err();
        assert_eq!(err, Error::UnknownVertex("z".into()));
    }

    #[test]
    fn expand_path() {
        let g = abc(&[("a", "b"), ("b", "c")]);
        let g2 = g.expand_neighbors(2).unwrap();
        assert_eq!(g2.neighbors(0), &[1, 2]);
        assert_eq!(g.expand_neighbors(1).unwrap(), g);
        assert!(g.expand_neighbors(0).is_err());
    }

    #[test]
    fn expand_keeps_disconnected() {
        let g = SpatialGraph::empty(2);
        assert_eq!(g.expand_neighbors(10).unwrap().edge_count(), 0);
    }

    #[test]
    fn mrf_weight_examples() {
        // vertex 0 with neighbors 1, 2, 3
        let g = SpatialGraph::from_indices(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let z = [9, 5, 5, 7];
        assert_eq!(mrf_log_weight(&z, 0, 4, &g, 1.5).unwrap(), 0.0);
        assert_eq!(mrf_log_weight(&z, 0, 5, &g, 0.0).unwrap(), 0.0);
        // oracle: count matches by hand (two) and multiply
        let count = [5, 5, 7].iter().filter(|&&l| l == 5).count() as f64;
        assert_eq!(mrf_log_weight(&z, 0, 5, &g, 1.5).unwrap(), 1.5 * count);
        assert_eq!(mrf_log_weight(&z, 0, 5, &g, 1.5).unwrap(), 3.0);
        assert!(matches!(
            mrf_log_weight(&z, 4, 5, &g, 1.0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    fn arb_graph() -> impl Strategy<Value = SpatialGraph> {
        (2usize..12).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..(2 * n))
                .prop_map(move |edges| SpatialGraph::from_indices(n, &edges).unwrap())
        })
    }

    proptest! {
        #[test]
        fn symmetric_irreflexive(g in arb_graph()) {
            for i in 0..g.len() {
                prop_assert!(!g.has_edge(i, i));
                for &j in g.neighbors(i) {
                    prop_assert!(g.has_edge(j, i));
                }
            }
        }

        #[test]
        fn expansion_monotone(g in arb_graph(), d in 1usize..4) {
            let small = g.expand_neighbors(d).unwrap();
            let big = g.expand_neighbors(d + 1).unwrap();
            for (a, b) in small.edges() {
                prop_assert!(big.has_edge(a, b));
            }
            for (a, b) in g.edges() {
                prop_assert!(small.has_edge(a, b));
            }
        }

        #[test]
        fn mrf_weight_linear_in_lambda(g in arb_graph(), lambda in 0.0f64..5.0, seed in 0usize..100) {
            let n = g.len();
            let z: Vec<usize> = (0..n).map(|i| (i * 7 + seed) % 3).collect();
            for i in 0..n {
                for c in 0..3 {
                    let w1 = mrf_log_weight(&z, i, c, &g, 1.0).unwrap();
                    let w = mrf_log_weight(&z, i, c, &g, lambda).unwrap();
                    prop_assert!((w - lambda * w1).abs() < 1e-12);
                }
            }
        }
    }
}
