//! Regularization forest over the latent dimensions.
//!
//! A [`Forest`] is a set of disjoint rooted trees over the `M` latent
//! dimensions. Each node `i` defines a group consisting of `i` and all of
//! its descendants; the structured penalty [`omega`] sums the l2 norms of
//! these groups. A dimension can therefore only be active when all of its
//! ancestors are active, which orders the dimensions from coarse (roots)
//! to fine (leaves).

use std::path::Path;

use crate::error::{Error, Result};

pub const NO_PARENT: i64 = -1;

/// Number of nodes in one default tree: a root, four internal children,
/// and two leaves under each internal child.
pub const DEFAULT_TREE_SIZE: usize = 13;

/// Parent array of one default tree, nodes numbered in depth-first
/// preorder. Node 1's descendants are {2, 3}.
const DEFAULT_TREE_PARENTS: [i64; DEFAULT_TREE_SIZE] =
    [-1, 0, 1, 1, 0, 4, 4, 0, 7, 7, 0, 10, 10];

/// A forest over latent dimensions, stored as a parent array.
///
/// Node indices are `0..M-1`. Roots have no parent. `children` lists are
/// the exact inverse of the parent relation and are kept in ascending
/// order so traversals are deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest {
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    depth: Vec<u32>,
}

impl Forest {
    /// Builds a forest from a parent array (`None` marks a root).
    ///
    /// Fails on out-of-range indices, cycles, or an empty array.
    pub fn from_parents(parent: Vec<Option<u32>>) -> Result<Self> {
        let m = parent.len();
        if m == 0 {
            return Err(Error::validation("forest must have at least one node"));
        }
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p as usize >= m {
                    return Err(Error::validation(format!(
                        "node {i}: parent {p} out of range (M = {m})"
                    )));
                }
                if *p as usize == i {
                    return Err(Error::validation(format!("cycle: node {i} is its own parent")));
                }
            }
        }

        // Depths via memoized parent walks; a walk longer than M nodes
        // can only mean a cycle.
        let mut depth = vec![u32::MAX; m];
        for start in 0..m {
            let mut chain = Vec::new();
            let mut node = start;
            while depth[node] == u32::MAX {
                chain.push(node);
                match parent[node] {
                    None => {
                        depth[node] = 0;
                        break;
                    }
                    Some(p) => {
                        if chain.len() > m {
                            return Err(Error::validation(format!(
                                "cycle detected through node {start}"
                            )));
                        }
                        node = p as usize;
                        if chain.contains(&node) {
                            return Err(Error::validation(format!(
                                "cycle detected through node {node}"
                            )));
                        }
                    }
                }
            }
            // Unwind the chain now that `node` has a known depth.
            for &c in chain.iter().rev() {
                if depth[c] == u32::MAX {
                    depth[c] = depth[parent[c].expect("non-root in chain") as usize] + 1;
                }
            }
        }

        let mut children = vec![Vec::new(); m];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p as usize].push(i as u32);
            }
        }

        Ok(Forest {
            parent,
            children,
            depth,
        })
    }

    /// The default forest: `num_trees` disjoint copies of the 13-node
    /// tree (root, 4 internal children, 8 leaves), preorder-numbered.
    pub fn default_forest(num_trees: usize) -> Result<Self> {
        if num_trees == 0 {
            return Err(Error::validation("num_trees must be >= 1"));
        }
        let mut parent = Vec::with_capacity(num_trees * DEFAULT_TREE_SIZE);
        for t in 0..num_trees {
            let offset = (t * DEFAULT_TREE_SIZE) as i64;
            for p in DEFAULT_TREE_PARENTS {
                parent.push(if p == NO_PARENT {
                    None
                } else {
                    Some((p + offset) as u32)
                });
            }
        }
        Forest::from_parents(parent)
    }

    /// A forest of `m` singleton trees. With this structure the penalty
    /// degenerates to the l1 norm.
    pub fn flat(m: usize) -> Result<Self> {
        Forest::from_parents(vec![None; m])
    }

    /// Parses the text form: whitespace-separated parent indices, one per
    /// node, with -1 marking roots.
    pub fn parse(text: &str) -> Result<Self> {
        // Tolerate the typographic minus that sometimes sneaks into
        // hand-edited files.
        let text = text.replace('\u{2212}', "-");
        let mut parent = Vec::new();
        for tok in text.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| Error::validation(format!("bad parent index {tok:?}")))?;
            if v == NO_PARENT {
                parent.push(None);
            } else if v < 0 {
                return Err(Error::validation(format!("bad parent index {v}")));
            } else {
                parent.push(Some(v as u32));
            }
        }
        if parent.is_empty() {
            return Err(Error::validation("empty forest description"));
        }
        Forest::from_parents(parent)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Forest::parse(&text)
    }

    /// Writes the parent array as a single line of integers.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let line: Vec<String> = self
            .parent
            .iter()
            .map(|p| match p {
                None => NO_PARENT.to_string(),
                Some(p) => p.to_string(),
            })
            .collect();
        std::fs::write(path, line.join(" ") + "\n").map_err(|e| Error::io(path, e))
    }

    /// Number of nodes (latent dimensions) M.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent_of(&self, node: usize) -> Option<u32> {
        self.parent[node]
    }

    pub fn children_of(&self, node: usize) -> &[u32] {
        &self.children[node]
    }

    pub fn depth_of(&self, node: usize) -> u32 {
        self.depth[node]
    }

    /// Root node indices in ascending order.
    pub fn roots(&self) -> Vec<u32> {
        (0..self.len() as u32)
            .filter(|&i| self.parent[i as usize].is_none())
            .collect()
    }

    /// Index of the tree (by ascending root) that contains `node`.
    pub fn tree_of(&self, node: usize) -> usize {
        let mut n = node;
        while let Some(p) = self.parent[n] {
            n = p as usize;
        }
        self.roots().iter().position(|&r| r as usize == n).expect("root present")
    }

    /// Strict descendants of `node` in depth-first preorder (children in
    /// ascending order). Empty for leaves.
    pub fn descendants(&self, node: usize) -> Result<Vec<u32>> {
        if node >= self.len() {
            return Err(Error::validation(format!(
                "node {node} out of range (M = {})",
                self.len()
            )));
        }
        let mut out = Vec::new();
        let mut stack: Vec<u32> = self.children[node].iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in self.children[n as usize].iter().rev() {
                stack.push(*c);
            }
        }
        Ok(out)
    }

    /// Evaluates the forest penalty: the sum over nodes of the l2 norm of
    /// the subvector spanning the node and its descendants.
    pub fn omega(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.len() {
            return Err(Error::validation(format!(
                "vector length {} does not match M = {}",
                a.len(),
                self.len()
            )));
        }
        let mut total = 0.0;
        for i in 0..self.len() {
            let mut sq = a[i] * a[i];
            for d in self.descendants(i)? {
                sq += a[d as usize] * a[d as usize];
            }
            total += sq.sqrt();
        }
        Ok(total)
    }
}
