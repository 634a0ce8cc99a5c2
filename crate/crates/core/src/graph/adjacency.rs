use crate::autodiff::Mat;

/// Symmetric 0/1 adjacency in compressed-row form with sorted neighbor lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Adjacency {
    /// Builds a symmetric adjacency from an undirected edge list.
    ///
    /// Each edge is inserted in both directions and duplicates collapse.
    /// Self-loops are dropped unless `self_loops` is set. Endpoints must be
    /// `< n`; callers validate ids before getting here.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], self_loops: bool) -> Self {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
            if a == b {
                if self_loops {
                    lists[a].push(a);
                }
                continue;
            }
            lists[a].push(b);
            lists[b].push(a);
        }
        Self::from_lists(lists)
    }

    fn from_lists(mut lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of stored (directed) nonzeros; each undirected edge counts twice.
    pub fn nnz(&self) -> usize {
        self.neighbors.len()
    }

    pub fn num_edges(&self) -> usize {
        let loops = (0..self.num_nodes()).filter(|&v| self.contains(v, v)).count();
        (self.nnz() - loops) / 2 + loops
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn contains(&self, v: usize, u: usize) -> bool {
        self.neighbors(v).binary_search(&u).is_ok()
    }

    /// Undirected edge list with `a <= b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.nnz() / 2);
        for v in 0..self.num_nodes() {
            for &u in self.neighbors(v) {
                if v <= u {
                    out.push((v, u));
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes()).all(|v| self.neighbors(v).iter().all(|&u| self.contains(u, v)))
    }

    pub fn to_dense(&self) -> Mat {
        let n = self.num_nodes();
        let mut out = Mat::zeros(n, n);
        for v in 0..n {
            for &u in self.neighbors(v) {
                out.set(v, u, 1.0);
            }
        }
        out
    }

    /// Appends `copies.len()` nodes; node `n + i` receives exactly the
    /// neighbor set of `copies[i]` (a copy never links to its own source).
    pub fn with_copied_nodes(&self, copies: &[usize]) -> Self {
        let n = self.num_nodes();
        let mut lists: Vec<Vec<usize>> = (0..n).map(|v| self.neighbors(v).to_vec()).collect();
        lists.resize(n + copies.len(), Vec::new());
        for (i, &src) in copies.iter().enumerate() {
            let new = n + i;
            for &u in self.neighbors(src) {
                if u == src {
                    lists[new].push(new);
                    continue;
                }
                lists[new].push(u);
                lists[u].push(new);
            }
        }
        Self::from_lists(lists)
    }

    /// Relabels nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes();
        let mut lists = vec![Vec::new(); n];
        for v in 0..n {
            lists[perm[v]] = self.neighbors(v).iter().map(|&u| perm[u]).collect();
        }
        Self::from_lists(lists)
    }
}
