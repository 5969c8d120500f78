use crate::dyadic::{DyadicInterval, DyadicRational, IntervalCollection};

/// Inclusion forest of a collection: every member points at its nearest
/// strict ancestor inside the collection.
///
/// Nodes are stored in `(level, index)` order, so parents always precede
/// their children and a reverse scan is a post-order traversal.
#[derive(Debug, Clone)]
pub(crate) struct Forest {
    pub nodes: Vec<DyadicInterval>,
    pub parent: Vec<Option<usize>>,
    /// Number of strict ancestors in the collection, i.e. the generation index.
    pub depth: Vec<usize>,
    pub children: Vec<Vec<usize>>,
}

impl Forest {
    pub fn new(collection: &IntervalCollection) -> Self {
        let nodes = collection.to_vec();
        let position = collection.positions();
        let mut parent = vec![None; nodes.len()];
        let mut depth = vec![0; nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if let Some(p) = node.ancestors().find_map(|a| position.get(&a).copied()) {
                parent[i] = Some(p);
                depth[i] = depth[p] + 1;
                children[p].push(i);
            }
        }
        Forest {
            nodes,
            parent,
            depth,
            children,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ_{J∈E, J⊆I} |J|` for every member `I`, by one post-order pass.
    pub fn local_masses(&self) -> Vec<DyadicRational> {
        let mut mass: Vec<DyadicRational> = self.nodes.iter().map(|n| n.measure()).collect();
        for i in (0..self.len()).rev() {
            if let Some(p) = self.parent[i] {
                let m = mass[i];
                mass[p] += m;
            }
        }
        mass
    }

    /// The `l`-th ancestor of node `i` within the collection (`l = 0` is `i`).
    pub fn ancestor(&self, mut i: usize, l: usize) -> Option<usize> {
        for _ in 0..l {
            i = self.parent[i]?;
        }
        Some(i)
    }

    /// Chain `i, parent(i), …, root`.
    pub fn chain(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut cur = i;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }
}
