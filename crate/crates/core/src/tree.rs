//! Binary partition of the index vector `0..n` shared by every
//! rank-structured format in this crate.
//!
//! Nodes are stored breadth-first, so the root is node `0` and, when the
//! tree is fully populated, the children of node `t` are `2t + 1` and
//! `2t + 2`. Every node owns a contiguous half-open range of indices; a
//! node is split iff it holds more than `leaf_size` indices, with the left
//! child receiving `ceil(n / 2)` of them.

use std::collections::VecDeque;
use std::ops::Range;

use crate::error::{invalid, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub start: usize,
    pub end: usize,
    pub level: usize,
    pub parent: Option<NodeId>,
    pub children: Option<[NodeId; 2]>,
}

impl Node {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Hierarchical binary partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTree {
    n: usize,
    leaf_size: usize,
    nodes: Vec<Node>,
    levels: Vec<Vec<NodeId>>,
}

impl IndexTree {
    /// Builds the tree for `n` indices, splitting any node larger than `leaf_size`.
    pub fn build(n: usize, leaf_size: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("tree size must be positive"));
        }
        if leaf_size == 0 {
            return Err(invalid("leaf size must be positive"));
        }

        let mut nodes = vec![Node {
            start: 0,
            end: n,
            level: 0,
            parent: None,
            children: None,
        }];
        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            let (start, end, level) = (nodes[id].start, nodes[id].end, nodes[id].level);
            let len = end - start;
            if len <= leaf_size {
                continue;
            }
            let mid = start + len.div_ceil(2);
            let left = nodes.len();
            for (s, e) in [(start, mid), (mid, end)] {
                nodes.push(Node {
                    start: s,
                    end: e,
                    level: level + 1,
                    parent: Some(id),
                    children: None,
                });
            }
            nodes[id].children = Some([left, left + 1]);
            queue.extend([left, left + 1]);
        }

        let depth = nodes.iter().map(|nd| nd.level).max().unwrap_or(0);
        let mut levels = vec![Vec::new(); depth + 1];
        for (id, nd) in nodes.iter().enumerate() {
            levels[nd.level].push(id);
        }

        Ok(Self {
            n,
            leaf_size,
            nodes,
            levels,
        })
    }

    /// Number of indices partitioned by the tree.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    /// Index of the finest level (`L`); a single-leaf tree has depth 0.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// All nodes on level `level`, ordered left to right.
    pub fn nodes_on_level(&self, level: usize) -> Result<&[NodeId]> {
        self.levels
            .get(level)
            .map(Vec::as_slice)
            .ok_or_else(|| invalid(format!("level {level} exceeds tree depth {}", self.depth())))
    }

    /// Non-leaf nodes on `level`, i.e. the parents whose children are
    /// processed when a sweep visits that level.
    pub fn parents_on_level(&self, level: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.levels
            .get(level)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&id| !self.nodes[id].is_leaf())
    }

    /// Leaves in left-to-right index order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&id| self.nodes[id].is_leaf())
            .collect();
        out.sort_by_key(|&id| self.nodes[id].start);
        out
    }

    pub fn max_leaf_len(&self) -> usize {
        self.nodes
            .iter()
            .filter(|nd| nd.is_leaf())
            .map(Node::len)
            .max()
            .unwrap_or(0)
    }

    pub fn sibling(&self, id: NodeId) -> Option<NodeId> {
        let parent = self.nodes[id].parent?;
        let [a, b] = self.nodes[parent].children?;
        Some(if a == id { b } else { a })
    }

    pub fn children(&self, id: NodeId) -> Option<[NodeId; 2]> {
        self.nodes[id].children
    }

    /// Positions of `child`'s indices inside its parent's range.
    pub fn relative_range(&self, child: NodeId) -> Option<Range<usize>> {
        let parent = self.nodes[child].parent?;
        let base = self.nodes[parent].start;
        let nd = &self.nodes[child];
        Some(nd.start - base..nd.end - base)
    }

    /// Non-root nodes ordered from the finest level to the coarsest.
    pub fn bottom_up(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.levels.iter().skip(1).rev().flatten().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_hundred_by_fifty() {
        let t = IndexTree::build(400, 50).unwrap();
        assert_eq!(t.depth(), 3);
        assert_eq!(t.node(7).range(), 0..50);
        assert_eq!(t.node(8).range(), 50..100);
        assert_eq!(t.node(1).range(), 0..200);
        assert_eq!(t.node(2).range(), 200..400);
        assert_eq!(t.node(3).range(), 0..100);
        assert_eq!(t.nodes_on_level(0).unwrap(), &[0]);
        assert_eq!(t.nodes_on_level(3).unwrap().len(), 8);
        assert!(t.nodes_on_level(3).unwrap().iter().all(|&id| t.node(id).is_leaf()));
    }

    #[test]
    fn single_leaf() {
        let t = IndexTree::build(1, 1).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(t.node_count(), 1);
        assert!(t.node(0).is_leaf());
        assert_eq!(t.leaves(), vec![0]);
    }

    #[test]
    fn hundred_by_thirty() {
        let t = IndexTree::build(100, 30).unwrap();
        assert_eq!(t.depth(), 2);
        let leaves = t.leaves();
        assert_eq!(leaves.len(), 4);
        assert!(leaves.iter().all(|&id| t.node(id).len() == 25));
        let lvl1: Vec<_> = t
            .nodes_on_level(1)
            .unwrap()
            .iter()
            .map(|&id| t.node(id).range())
            .collect();
        assert_eq!(lvl1, vec![0..50, 50..100]);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(IndexTree::build(0, 4).is_err());
        assert!(IndexTree::build(4, 0).is_err());
        let t = IndexTree::build(16, 4).unwrap();
        assert!(t.nodes_on_level(t.depth() + 1).is_err());
    }

    #[test]
    fn ragged_tree_has_leaves_on_two_levels() {
        // 13 -> (7, 6); 7 > 6 splits again, 6 does not.
        let t = IndexTree::build(13, 6).unwrap();
        let levels: Vec<_> = t.leaves().iter().map(|&id| t.node(id).level).collect();
        assert_eq!(levels, vec![2, 2, 1]);
        assert_eq!(t.max_leaf_len(), 6);
        assert_eq!(t.relative_range(3), Some(0..4));
        assert_eq!(t.relative_range(4), Some(4..7));
    }
}
