//! Plane trees and their bijection with 2-Motzkin paths.
//!
//! A tree with `n` edges maps to a path of length `n - 1`. Every edge gets a
//! label from its position under its parent:
//!
//! * edges off the root, and middle edges of a node with three or more
//!   children, are `H`;
//! * the only edge off a non-root node with one child is `I`;
//! * the leftmost and rightmost edges off a non-root node with two or more
//!   children are `U` and `D`.
//!
//! Reading the labels in preorder gives a word starting with `H`; dropping
//! that `H` gives the path. Under this map `|x|_I = d1(t)` and
//! `|x|_U + |x|_H + 1 = d0(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{Symbol, TwoMotzkinPath};

/// A rooted ordered tree stored as a node arena.
///
/// Node `0` is the root and nodes are numbered in preorder, so two trees
/// compare equal exactly when they are isomorphic as plane trees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneTree {
    children: Vec<Vec<u32>>,
}

/// Degree statistics of a plane tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProfile {
    /// Leaves.
    pub d0: usize,
    /// Non-root nodes with exactly one child.
    pub d1: usize,
    /// Down-degree of the root.
    pub r: usize,
    /// Edges.
    pub n: usize,
}

impl PlaneTree {
    /// The tree with a single node and no edges.
    pub fn root_only() -> Self {
        PlaneTree {
            children: vec![Vec::new()],
        }
    }

    /// Builds a tree from adjacency lists, renumbering nodes into preorder.
    ///
    /// `children[v]` lists the children of node `v` left to right and node 0
    /// is the root. Fails if the lists do not describe a single tree.
    pub fn from_children(children: Vec<Vec<usize>>) -> Result<Self> {
        let n = children.len();
        if n == 0 {
            return Err(Error::InternalInvariantViolation("tree has no root".into()));
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if c >= n || seen[c] {
                    return Err(Error::InternalInvariantViolation(format!(
                        "node {c} is out of range or has two parents"
                    )));
                }
                seen[c] = true;
                stack.push(c);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InternalInvariantViolation("node unreachable from root".into()));
        }
        Ok(Self::renumber_preorder(&children))
    }

    fn renumber_preorder(children: &[Vec<usize>]) -> Self {
        let mut out: Vec<Vec<u32>> = Vec::with_capacity(children.len());
        let mut new_id = vec![0u32; children.len()];
        let mut order = Vec::with_capacity(children.len());
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            new_id[v] = order.len() as u32;
            order.push(v);
            stack.extend(children[v].iter().rev());
        }
        for &v in &order {
            out.push(children[v].iter().map(|&c| new_id[c]).collect());
        }
        PlaneTree { children: out }
    }

    pub fn node_count(&self) -> usize {
        self.children.len()
    }

    pub fn edge_count(&self) -> usize {
        self.children.len() - 1
    }

    pub fn children(&self, node: usize) -> &[u32] {
        &self.children[node]
    }

    /// Adjacency lists indexed by node id.
    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.children
    }

    pub fn degree_profile(&self) -> Result<DegreeProfile> {
        let n = self.edge_count();
        if n == 0 {
            return Err(Error::EmptyTree);
        }
        let mut d0 = 0;
        let mut d1 = 0;
        for kids in &self.children[1..] {
            match kids.len() {
                0 => d0 += 1,
                1 => d1 += 1,
                _ => {}
            }
        }
        Ok(DegreeProfile {
            d0,
            d1,
            r: self.children[0].len(),
            n,
        })
    }

    /// Maps the tree to its 2-Motzkin path of length `n - 1`.
    pub fn encode(&self) -> Result<TwoMotzkinPath> {
        if self.edge_count() == 0 {
            return Err(Error::EmptyTree);
        }
        let mut labels = Vec::with_capacity(self.edge_count());
        // Preorder over nodes; each non-root node contributes the label of
        // the edge from its parent.
        let mut stack: Vec<(usize, Symbol)> = Vec::new();
        push_children(&self.children, 0, &mut stack);
        while let Some((v, label)) = stack.pop() {
            labels.push(label);
            push_children(&self.children, v, &mut stack);
        }
        if labels.first() != Some(&Symbol::H) {
            return Err(Error::InternalInvariantViolation(
                "preorder labelling does not start with H".into(),
            ));
        }
        labels.remove(0);
        TwoMotzkinPath::from_symbols(labels)
            .map_err(|e| Error::InternalInvariantViolation(format!("edge labelling is not a 2-Motzkin path: {e}")))
    }

    /// Inverse of [`PlaneTree::encode`], following the stack construction
    /// that attaches each new node either below the last node added or below
    /// the current attachment point.
    pub fn decode(x: &TwoMotzkinPath) -> PlaneTree {
        let m = x.len();
        let mut children: Vec<Vec<u32>> = Vec::with_capacity(m + 2);
        children.push(vec![1]);
        children.push(Vec::new());
        let mut u = 0usize;
        let mut v = 1usize;
        let mut stack = Vec::new();
        for &s in x.symbols() {
            let node = children.len();
            children.push(Vec::new());
            match s {
                Symbol::U => {
                    children[v].push(node as u32);
                    stack.push(u);
                    u = v;
                }
                Symbol::I => children[v].push(node as u32),
                Symbol::H => children[u].push(node as u32),
                Symbol::D => {
                    children[u].push(node as u32);
                    u = stack.pop().expect("validated path has matched D");
                }
            }
            v = node;
        }
        // Nodes are created in the order their edges are read, which is
        // preorder.
        PlaneTree { children }
    }

    /// Balanced-parenthesis text: `(` when descending an edge, `)` when
    /// returning.
    pub fn to_parens(&self) -> String {
        let mut out = String::with_capacity(2 * self.edge_count());
        // (node, next child slot)
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        while let Some(top) = stack.last_mut() {
            let (v, slot) = *top;
            if slot < self.children[v].len() {
                top.1 += 1;
                out.push('(');
                stack.push((self.children[v][slot] as usize, 0));
            } else {
                stack.pop();
                if !stack.is_empty() {
                    out.push(')');
                }
            }
        }
        out
    }

    pub fn from_parens(text: &str) -> Result<Self> {
        let mut children: Vec<Vec<u32>> = vec![Vec::new()];
        let mut path = vec![0usize];
        for (index, c) in text.bytes().enumerate() {
            match c {
                b'(' => {
                    let node = children.len();
                    children.push(Vec::new());
                    let parent = *path.last().expect("root is never popped");
                    children[parent].push(node as u32);
                    path.push(node);
                }
                b')' => {
                    if path.len() == 1 {
                        return Err(Error::UnbalancedParens { index });
                    }
                    path.pop();
                }
                _ => return Err(Error::UnbalancedParens { index }),
            }
        }
        if path.len() != 1 {
            return Err(Error::UnbalancedParens { index: text.len() });
        }
        Ok(PlaneTree { children })
    }
}

fn push_children(children: &[Vec<u32>], v: usize, stack: &mut Vec<(usize, Symbol)>) {
    let kids = &children[v];
    let k = kids.len();
    for (slot, &c) in kids.iter().enumerate().rev() {
        let label = if v == 0 {
            Symbol::H
        } else if k == 1 {
            Symbol::I
        } else if slot == 0 {
            Symbol::U
        } else if slot == k - 1 {
            Symbol::D
        } else {
            Symbol::H
        };
        stack.push((c as usize, label));
    }
}

/// Degree profile of `decode(x)` computed from the path alone.
///
/// Root children correspond to the leading edge plus every `H` at ground
/// level.
pub fn path_degree_profile(x: &TwoMotzkinPath) -> DegreeProfile {
    let mut height = 0i32;
    let mut ground_h = 0;
    let (mut u, mut h, mut i) = (0, 0, 0);
    for &s in x.symbols() {
        match s {
            Symbol::U => u += 1,
            Symbol::H => {
                h += 1;
                if height == 0 {
                    ground_h += 1;
                }
            }
            Symbol::I => i += 1,
            Symbol::D => {}
        }
        height += s.delta();
    }
    DegreeProfile {
        d0: u + h + 1,
        d1: i,
        r: 1 + ground_h,
        n: x.len() + 1,
    }
}

pub fn degree_profile(t: &PlaneTree) -> Result<DegreeProfile> {
    t.degree_profile()
}

pub fn encode(t: &PlaneTree) -> Result<TwoMotzkinPath> {
    t.encode()
}

pub fn decode(x: &TwoMotzkinPath) -> PlaneTree {
    PlaneTree::decode(x)
}

pub fn tree_to_text(t: &PlaneTree) -> String {
    t.to_parens()
}

pub fn text_to_tree(s: &str) -> Result<PlaneTree> {
    PlaneTree::from_parens(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::enumerate_paths;
    use std::collections::HashSet;

    fn p(s: &str) -> TwoMotzkinPath {
        TwoMotzkinPath::parse(s).unwrap()
    }

    fn t(s: &str) -> PlaneTree {
        PlaneTree::from_parens(s).unwrap()
    }

    #[test]
    fn degree_profile_examples() {
        let prof = |s| t(s).degree_profile().unwrap();
        assert_eq!(
            prof("()"),
            DegreeProfile {
                d0: 1,
                d1: 0,
                r: 1,
                n: 1
            }
        );
        assert_eq!(
            prof("()()"),
            DegreeProfile {
                d0: 2,
                d1: 0,
                r: 2,
                n: 2
            }
        );
        assert_eq!(
            prof("((()))"),
            DegreeProfile {
                d0: 1,
                d1: 2,
                r: 1,
                n: 3
            }
        );
        assert_eq!(PlaneTree::root_only().degree_profile(), Err(Error::EmptyTree));
    }

    #[test]
    fn encode_examples() {
        assert_eq!(t("()").encode().unwrap().to_string(), "");
        assert_eq!(t("()()").encode().unwrap().to_string(), "H");
        assert_eq!(t("(()())").encode().unwrap().to_string(), "UD");
        assert_eq!(t("(())").encode().unwrap().to_string(), "I");
        // root -> a -> {b, c, d}: U, H, D under a.
        assert_eq!(t("(()()())").encode().unwrap().to_string(), "UHD");
        assert_eq!(PlaneTree::root_only().encode(), Err(Error::EmptyTree));
    }

    #[test]
    fn decode_examples() {
        assert_eq!(PlaneTree::decode(&p("")), t("()"));
        let chain = PlaneTree::decode(&p("I"));
        assert_eq!(chain, t("(())"));
        assert_eq!(chain.degree_profile().unwrap().d1, 1);
        assert_eq!(PlaneTree::decode(&p("UD")), t("(()())"));
        assert_eq!(PlaneTree::decode(&p("UD")).to_parens(), "(()())");
    }

    #[test]
    fn parens_examples_and_errors() {
        assert_eq!(t("()").to_parens(), "()");
        assert_eq!(t("()()").to_parens(), "()()");
        assert_eq!(PlaneTree::from_parens(""), Ok(PlaneTree::root_only()));
        assert_eq!(PlaneTree::from_parens(")("), Err(Error::UnbalancedParens { index: 0 }));
        assert_eq!(PlaneTree::from_parens("(()"), Err(Error::UnbalancedParens { index: 3 }));
        assert_eq!(PlaneTree::from_parens("(x)"), Err(Error::UnbalancedParens { index: 1 }));
    }

    #[test]
    fn from_children_renumbers_into_preorder() {
        // root(0) -> [2, 1], 2 -> [3]
        let tree = PlaneTree::from_children(vec![vec![2, 1], vec![], vec![3], vec![]]).unwrap();
        assert_eq!(tree, t("(())()"));
        assert!(PlaneTree::from_children(vec![vec![1, 1], vec![]]).is_err());
        assert!(PlaneTree::from_children(vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn decode_is_preorder_numbered() {
        for m in 0..=7 {
            for x in enumerate_paths(m).unwrap() {
                let tree = PlaneTree::decode(&x);
                assert_eq!(PlaneTree::from_parens(&tree.to_parens()).unwrap(), tree);
            }
        }
    }

    #[test]
    fn bijection_exhaustive() {
        for m in 0..=9 {
            let paths = enumerate_paths(m).unwrap();
            let mut seen = HashSet::new();
            for x in &paths {
                let tree = PlaneTree::decode(x);
                assert_eq!(tree.edge_count(), m + 1);
                assert_eq!(&tree.encode().unwrap(), x);
                let c = x.counts();
                let prof = tree.degree_profile().unwrap();
                assert_eq!(c.i, prof.d1, "{x}");
                assert_eq!(c.u + c.h + 1, prof.d0, "{x}");
                assert!(seen.insert(tree.to_parens()));
            }
        }
    }

    #[test]
    fn path_profile_matches_decoded_tree() {
        for m in 0..=9 {
            for x in enumerate_paths(m).unwrap() {
                assert_eq!(
                    path_degree_profile(&x),
                    PlaneTree::decode(&x).degree_profile().unwrap(),
                    "{x}"
                );
            }
        }
    }

    #[test]
    fn deep_trees_do_not_overflow_the_stack() {
        let m = 200_000;
        let x = TwoMotzkinPath::parse(&"I".repeat(m)).unwrap();
        let tree = PlaneTree::decode(&x);
        assert_eq!(tree.degree_profile().unwrap().d1, m);
        let text = tree.to_parens();
        assert_eq!(PlaneTree::from_parens(&text).unwrap().encode().unwrap(), x);
    }
}
