//! Labeled DAGs stored as per-node parent bitmasks, the structural Markov
//! equivalence test, and exhaustive enumeration.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parent sets are `u64` bitmasks.
pub const MAX_NODES: usize = 64;

/// Environment variable that raises the unrestricted enumeration cap.
pub const MAX_ENUM_ENV: &str = "BNLIMITS_MAX_ENUM";

fn bit(i: usize) -> u64 {
    1u64 << i
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        }
    })
}

/// A labeled directed acyclic graph on nodes `0..m`.
///
/// Bit `j` of `parents[i]` is set iff `j → i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    m: usize,
    parents: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    m: usize,
    parents: Vec<Vec<usize>>,
}

impl From<Dag> for DagRepr {
    fn from(g: Dag) -> Self {
        DagRepr {
            m: g.m,
            parents: (0..g.m).map(|i| g.parents(i).collect()).collect(),
        }
    }
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;

    fn try_from(r: DagRepr) -> Result<Self> {
        Dag::from_parent_lists(r.m, &r.parents)
    }
}

impl Dag {
    /// Validates masks and acyclicity.
    pub fn new(m: usize, parents: Vec<u64>) -> Result<Self> {
        if m > MAX_NODES {
            return Err(Error::Capability(format!(
                "{m} nodes exceeds the {MAX_NODES}-node bitmask width"
            )));
        }
        if parents.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: parents.len(),
            });
        }
        let valid = if m == MAX_NODES { u64::MAX } else { bit(m) - 1 };
        for (i, &p) in parents.iter().enumerate() {
            if p & bit(i) != 0 {
                return Err(Error::InvalidDag(format!("self-loop at node {i}")));
            }
            if p & !valid != 0 {
                return Err(Error::InvalidDag(format!(
                    "node {i} has a parent index >= {m}"
                )));
            }
        }
        let g = Dag { m, parents };
        g.topological_order()?;
        Ok(g)
    }

    pub(crate) fn from_masks_unchecked(m: usize, parents: Vec<u64>) -> Self {
        debug_assert_eq!(parents.len(), m);
        Dag { m, parents }
    }

    pub fn empty(m: usize) -> Self {
        Dag {
            m,
            parents: vec![0; m],
        }
    }

    pub fn from_parent_lists(m: usize, lists: &[Vec<usize>]) -> Result<Self> {
        if lists.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: lists.len(),
            });
        }
        let mut masks = vec![0u64; m];
        for (i, list) in lists.iter().enumerate() {
            for &p in list {
                if p >= m {
                    return Err(Error::InvalidDag(format!(
                        "parent {p} of node {i} is out of range"
                    )));
                }
                masks[i] |= bit(p);
            }
        }
        Dag::new(m, masks)
    }

    /// Builds a DAG from `(from, to)` pairs.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut masks = vec![0u64; m];
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(Error::InvalidDag(format!("edge {a}->{b} out of range")));
            }
            masks[b] |= bit(a);
        }
        Dag::new(m, masks)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn parent_mask(&self, i: usize) -> u64 {
        self.parents[i]
    }

    pub fn parent_masks(&self) -> &[u64] {
        &self.parents
    }

    /// Parents of `i` in ascending index order.
    pub fn parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        bits(self.parents[i])
    }

    pub fn parent_list(&self, i: usize) -> Vec<usize> {
        self.parents(i).collect()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.parents[i].count_ones() as usize
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.m).map(|i| self.in_degree(i)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to] & bit(from) != 0
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.count_ones() as usize).sum()
    }

    /// Edges as `(from, to)`, sorted by `to` then `from`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|i| self.parents(i).map(move |p| (p, i)))
            .collect()
    }

    /// Canonical order: repeatedly remove the lowest-indexed node whose
    /// parents have all been removed.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut placed = 0u64;
        let mut order = Vec::with_capacity(self.m);
        while order.len() < self.m {
            let next = (0..self.m)
                .find(|&i| placed & bit(i) == 0 && self.parents[i] & !placed == 0)
                .ok_or_else(|| Error::InvalidDag("directed cycle".into()))?;
            placed |= bit(next);
            order.push(next);
        }
        Ok(order)
    }

    /// `positions[i]` is the 0-based index of node `i` in the canonical
    /// topological order.
    pub fn topological_positions(&self) -> Vec<usize> {
        let order = self
            .topological_order()
            .expect("Dag invariant: acyclic");
        let mut pos = vec![0; self.m];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        pos
    }

    pub fn skeleton(&self) -> Skeleton {
        let mut adj = vec![0u64; self.m];
        for i in 0..self.m {
            for p in self.parents(i) {
                adj[i] |= bit(p);
                adj[p] |= bit(i);
            }
        }
        Skeleton { m: self.m, adj }
    }

    /// Unshielded colliders `a → c ← b`, `a < b`, sorted.
    pub fn v_structures(&self) -> Vec<VStructure> {
        let skel = self.skeleton();
        let mut out = Vec::new();
        for c in 0..self.m {
            let ps: Vec<usize> = self.parents(c).collect();
            for (x, &a) in ps.iter().enumerate() {
                for &b in &ps[x + 1..] {
                    if !skel.adjacent(a, b) {
                        out.push(VStructure {
                            collider: c,
                            spouses: (a, b),
                        });
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// An edge `a → b` is covered when `pa(b) = pa(a) ∪ {a}`.
    pub fn is_covered(&self, from: usize, to: usize) -> bool {
        self.has_edge(from, to) && self.parents[to] == self.parents[from] | bit(from)
    }

    pub fn covered_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
            .into_iter()
            .filter(|&(a, b)| self.is_covered(a, b))
            .collect()
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag(m={}, edges={:?})", self.m, self.edges())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Skeleton {
    m: usize,
    adj: Vec<u64>,
}

impl Skeleton {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a] & bit(b) != 0
    }

    /// Unordered pairs `(a, b)` with `a < b`.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        (0..self.m)
            .flat_map(|a| bits(self.adj[a]).filter(move |&b| a < b).map(move |b| (a, b)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VStructure {
    pub collider: usize,
    pub spouses: (usize, usize),
}

/// Same skeleton and same v-structures.
pub fn markov_equivalent(g1: &Dag, g2: &Dag) -> Result<bool> {
    if g1.m != g2.m {
        return Err(Error::Dimension {
            expected: g1.m,
            got: g2.m,
        });
    }
    Ok(g1.skeleton() == g2.skeleton() && g1.v_structures() == g2.v_structures())
}

/// Size limits for the exhaustive routines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumLimits {
    /// Largest `m` for unrestricted enumeration and class-size computation.
    pub max_nodes: usize,
    /// Largest `m` when the in-degree cap is at most `sparse_max_k`.
    pub max_nodes_sparse: usize,
    pub sparse_max_k: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits {
            max_nodes: 6,
            max_nodes_sparse: 7,
            sparse_max_k: 2,
        }
    }
}

impl EnumLimits {
    /// Defaults, with `max_nodes` replaced by `BNLIMITS_MAX_ENUM` when set.
    pub fn from_env() -> Self {
        let mut limits = Self::default();
        if let Some(n) = std::env::var(MAX_ENUM_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            limits.max_nodes = n.min(MAX_NODES);
            limits.max_nodes_sparse = limits.max_nodes_sparse.max(limits.max_nodes);
        }
        limits
    }

    pub fn check(&self, m: usize, k: Option<usize>) -> Result<()> {
        let cap = match k {
            Some(k) if k <= self.sparse_max_k => self.max_nodes_sparse,
            _ => self.max_nodes,
        };
        if m > cap {
            let what = match k {
                Some(k) => format!("m = {m} with in-degree <= {k}"),
                None => format!("m = {m}"),
            };
            return Err(Error::Capability(format!(
                "exhaustive enumeration of {what} exceeds the limit m <= {cap} \
                 (set {MAX_ENUM_ENV} to override)"
            )));
        }
        Ok(())
    }
}

/// Number of DAGs sharing `g`'s skeleton that are Markov equivalent to it.
pub fn equivalence_class_size(g: &Dag) -> Result<u64> {
    equivalence_class_size_with(g, &EnumLimits::from_env())
}

pub fn equivalence_class_size_with(g: &Dag, limits: &EnumLimits) -> Result<u64> {
    limits.check(g.m, None)?;
    let edges: Vec<(usize, usize)> = g.skeleton().edges().into_iter().collect();
    if edges.len() >= 40 {
        return Err(Error::Capability(format!(
            "{} skeleton edges is too many orientations to enumerate",
            edges.len()
        )));
    }
    let target = g.v_structures();
    let mut count = 0;
    let mut masks = vec![0u64; g.m];
    for orient in 0u64..(1u64 << edges.len()) {
        masks.iter_mut().for_each(|p| *p = 0);
        for (e, &(a, b)) in edges.iter().enumerate() {
            if orient & bit(e) == 0 {
                masks[b] |= bit(a);
            } else {
                masks[a] |= bit(b);
            }
        }
        let h = Dag::from_masks_unchecked(g.m, masks.clone());
        if h.topological_order().is_ok() && h.v_structures() == target {
            count += 1;
        }
    }
    Ok(count)
}

/// `|[g]| == 1`.
///
/// Two Markov-equivalent DAGs are always connected by a sequence of covered
/// edge reversals, each of which preserves equivalence, so a DAG is alone in
/// its class exactly when it has no covered edge. This runs in `O(m²)` and
/// needs no enumeration limit.
pub fn is_singleton_class(g: &Dag) -> bool {
    (0..g.m).all(|b| g.parents(b).all(|a| g.parents[b] != g.parents[a] | bit(a)))
}

/// Every labeled DAG on `m` nodes (in-degree at most `k` if given), once each,
/// in lexicographic order of `(parents[0], …, parents[m-1])`.
pub fn enumerate_dags(m: usize, k: Option<usize>) -> Result<DagEnumerator> {
    enumerate_dags_with(m, k, &EnumLimits::from_env())
}

pub fn enumerate_dags_with(m: usize, k: Option<usize>, limits: &EnumLimits) -> Result<DagEnumerator> {
    if m == 0 {
        return Err(Error::Usage("enumeration needs at least one node".into()));
    }
    limits.check(m, k)?;
    Ok(DagEnumerator::new(m, k))
}

/// Depth-first odometer over parent masks with incremental cycle pruning.
pub struct DagEnumerator {
    m: usize,
    candidates: Vec<Vec<u64>>,
    next_idx: Vec<usize>,
    masks: Vec<u64>,
    depth: usize,
    done: bool,
}

impl DagEnumerator {
    fn new(m: usize, k: Option<usize>) -> Self {
        let k = k.unwrap_or(m);
        let candidates = (0..m)
            .map(|i| {
                (0u64..(1u64 << m))
                    .filter(|&p| p & bit(i) == 0 && p.count_ones() as usize <= k)
                    .collect()
            })
            .collect();
        DagEnumerator {
            m,
            candidates,
            next_idx: vec![0; m],
            masks: vec![0; m],
            depth: 0,
            done: false,
        }
    }

    /// Whether assigning `masks[d]` closes a cycle among nodes `0..=d`.
    fn closes_cycle(&self, d: usize) -> bool {
        let assigned = if d + 1 == 64 { u64::MAX } else { bit(d + 1) - 1 };
        let targets = self.masks[d] & assigned;
        if targets == 0 {
            return false;
        }
        let mut reach = 0u64;
        let mut frontier = bit(d);
        while frontier != 0 {
            let x = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            for i in 0..=d {
                if self.masks[i] & bit(x) != 0 && reach & bit(i) == 0 {
                    reach |= bit(i);
                    frontier |= bit(i);
                }
            }
            if reach & targets != 0 {
                return true;
            }
        }
        false
    }
}

impl Iterator for DagEnumerator {
    type Item = Dag;

    fn next(&mut self) -> Option<Dag> {
        if self.done {
            return None;
        }
        if self.depth == self.m {
            self.depth -= 1;
        }
        loop {
            let d = self.depth;
            let mut found = false;
            while self.next_idx[d] < self.candidates[d].len() {
                self.masks[d] = self.candidates[d][self.next_idx[d]];
                self.next_idx[d] += 1;
                if !self.closes_cycle(d) {
                    found = true;
                    break;
                }
            }
            if found {
                if d + 1 == self.m {
                    self.depth = self.m;
                    return Some(Dag::from_masks_unchecked(self.m, self.masks.clone()));
                }
                self.depth = d + 1;
                self.next_idx[d + 1] = 0;
            } else if d == 0 {
                self.done = true;
                return None;
            } else {
                self.depth = d - 1;
            }
        }
    }
}
