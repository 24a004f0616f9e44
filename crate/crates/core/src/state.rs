//! Colorings, the per-node index that defines the current weight function,
//! and the membership predicate for that weight function.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;
use crate::randomness::BitSource;

/// Colors are `1..=k`.
pub type Color = u32;

/// Total assignment of colors to nodes. Properness is not an invariant of
/// this type; it is what the sampler terminates on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Coloring {
    colors: Vec<Color>,
    k: u32,
}

impl Coloring {
    pub fn new(colors: Vec<Color>, k: u32) -> Self {
        assert!(k >= 1, "need at least one color");
        assert!(
            colors.iter().all(|&c| (1..=k).contains(&c)),
            "colors must lie in 1..={k}"
        );
        Self { colors, k }
    }

    /// Each node's color drawn independently and uniformly from `1..=k`.
    pub fn uniform(node_count: usize, k: u32, rng: &mut BitSource) -> Self {
        assert!(k >= 1, "need at least one color");
        let colors = (0..node_count).map(|_| draw_color(k, rng)).collect();
        Self { colors, k }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn as_slice(&self) -> &[Color] {
        &self.colors
    }

    pub fn get(&self, v: usize) -> Color {
        self.colors[v]
    }

    pub fn set(&mut self, v: usize, color: Color) {
        debug_assert!((1..=self.k).contains(&color));
        self.colors[v] = color;
    }

    pub fn is_proper(&self, graph: &Graph) -> bool {
        graph.edges().all(|(u, v)| self.colors[u] != self.colors[v])
    }

    /// One `v c` line per node, both 1-based.
    pub fn to_text(&self) -> String {
        self.colors
            .iter()
            .enumerate()
            .map(|(v, c)| format!("{} {c}\n", v + 1))
            .collect()
    }
}

pub(crate) fn draw_color(k: u32, rng: &mut BitSource) -> Color {
    rng.uniform_int(u64::from(k)) as Color + 1
}

/// One node's entry in the index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexEntry {
    /// Barred from one color.
    Forbidden(Color),
    /// Pinned to one color.
    Frozen(Color),
    /// Imposes no edge constraints.
    Ignored,
    /// Behaves as in an ordinary proper coloring.
    Unrestricted,
}

impl IndexEntry {
    /// The signed encoding `-b`, `c`, `0` or `None` for unrestricted.
    pub fn code(self) -> Option<i64> {
        match self {
            IndexEntry::Forbidden(b) => Some(-i64::from(b)),
            IndexEntry::Frozen(c) => Some(i64::from(c)),
            IndexEntry::Ignored => Some(0),
            IndexEntry::Unrestricted => None,
        }
    }

    pub fn is_frozen(self) -> bool {
        matches!(self, IndexEntry::Frozen(_))
    }

    pub fn is_ignored(self) -> bool {
        self == IndexEntry::Ignored
    }

    pub fn is_forbidden(self) -> bool {
        matches!(self, IndexEntry::Forbidden(_))
    }

    fn class(self) -> Class {
        match self {
            IndexEntry::Forbidden(_) => Class::Forbidden,
            IndexEntry::Frozen(_) => Class::Frozen,
            IndexEntry::Ignored => Class::Ignored,
            IndexEntry::Unrestricted => Class::Unrestricted,
        }
    }
}

impl fmt::Display for IndexEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.code() {
            Some(code) => write!(f, "{code}"),
            None => f.write_str("_"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Forbidden,
    Frozen,
    Ignored,
    Unrestricted,
}

/// Set of node ids with constant-depth insert, remove, membership and
/// minimum: a bitmap with a summary bitmap per 64-ary level.
#[derive(Clone, Debug)]
pub struct NodeSet {
    levels: Vec<Vec<u64>>,
    len: usize,
}

impl NodeSet {
    pub fn new(capacity: usize) -> Self {
        let mut levels = Vec::new();
        let mut words = capacity.div_ceil(64).max(1);
        loop {
            levels.push(vec![0u64; words]);
            if words == 1 {
                break;
            }
            words = words.div_ceil(64);
        }
        Self { levels, len: 0 }
    }

    pub fn full(capacity: usize) -> Self {
        let mut set = Self::new(capacity);
        for v in 0..capacity {
            set.insert(v);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, v: usize) -> bool {
        self.levels[0][v / 64] >> (v % 64) & 1 == 1
    }

    pub fn insert(&mut self, v: usize) -> bool {
        if self.contains(v) {
            return false;
        }
        let mut idx = v;
        for level in &mut self.levels {
            let word = &mut level[idx / 64];
            let was_empty = *word == 0;
            *word |= 1 << (idx % 64);
            if !was_empty {
                break;
            }
            idx /= 64;
        }
        self.len += 1;
        true
    }

    pub fn remove(&mut self, v: usize) -> bool {
        if !self.contains(v) {
            return false;
        }
        let mut idx = v;
        for level in &mut self.levels {
            let word = &mut level[idx / 64];
            *word &= !(1 << (idx % 64));
            if *word != 0 {
                break;
            }
            idx /= 64;
        }
        self.len -= 1;
        true
    }

    pub fn min(&self) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        let mut idx = 0;
        for level in self.levels.iter().rev() {
            let word = level[idx];
            idx = idx * 64 + word.trailing_zeros() as usize;
        }
        Some(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels[0].iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + b)
            })
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvariantViolation {
    #[error("node {node} has entry {entry} but sits in the {class} set")]
    Partition {
        node: usize,
        entry: String,
        class: &'static str,
    },
    #[error("partition sizes sum to {sum}, expected {expected}")]
    PartitionSize { sum: usize, expected: usize },
    #[error("forbidden node {node} bars color {found}, active forbidden color is {active:?}")]
    ForbiddenColor {
        node: usize,
        found: Color,
        active: Option<Color>,
    },
    #[error("entry {entry} at node {node} names a color outside 1..={k}")]
    ColorRange { node: usize, entry: String, k: u32 },
}

/// The index over all nodes plus its four-way partition and the single
/// color currently being forbidden.
#[derive(Clone, Debug)]
pub struct IndexState {
    entries: Vec<IndexEntry>,
    forbidden: NodeSet,
    frozen: NodeSet,
    ignored: NodeSet,
    unrestricted: usize,
    active_forbidden: Option<Color>,
}

impl PartialEq for IndexState {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for IndexState {}

impl IndexState {
    /// Every node ignored: the starting index.
    pub fn all_ignored(node_count: usize) -> Self {
        Self {
            entries: vec![IndexEntry::Ignored; node_count],
            forbidden: NodeSet::new(node_count),
            frozen: NodeSet::new(node_count),
            ignored: NodeSet::full(node_count),
            unrestricted: 0,
            active_forbidden: None,
        }
    }

    /// Every node unrestricted: the target index.
    pub fn all_unrestricted(node_count: usize) -> Self {
        Self::from_entries(vec![IndexEntry::Unrestricted; node_count])
    }

    /// Builds an index from explicit entries.
    ///
    /// # Panics
    /// If two different colors are forbidden.
    pub fn from_entries(entries: Vec<IndexEntry>) -> Self {
        let n = entries.len();
        let mut state = Self {
            entries: vec![IndexEntry::Unrestricted; n],
            forbidden: NodeSet::new(n),
            frozen: NodeSet::new(n),
            ignored: NodeSet::new(n),
            unrestricted: n,
            active_forbidden: None,
        };
        for (v, entry) in entries.into_iter().enumerate() {
            state.set(v, entry);
        }
        state
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, v: usize) -> IndexEntry {
        self.entries[v]
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn active_forbidden_color(&self) -> Option<Color> {
        self.active_forbidden
    }

    pub fn forbidden_nodes(&self) -> &NodeSet {
        &self.forbidden
    }

    pub fn frozen_nodes(&self) -> &NodeSet {
        &self.frozen
    }

    pub fn ignored_nodes(&self) -> &NodeSet {
        &self.ignored
    }

    pub fn forbidden_count(&self) -> usize {
        self.forbidden.len()
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.len()
    }

    pub fn ignored_count(&self) -> usize {
        self.ignored.len()
    }

    pub fn unrestricted_count(&self) -> usize {
        self.unrestricted
    }

    /// True once every node is unrestricted.
    pub fn is_target(&self) -> bool {
        self.unrestricted == self.entries.len()
    }

    /// Replaces one entry, keeping the partition current.
    ///
    /// # Panics
    /// If the new entry forbids a color other than the active one.
    pub fn set(&mut self, v: usize, entry: IndexEntry) {
        let old = self.entries[v];
        if old == entry {
            return;
        }
        if let IndexEntry::Forbidden(b) = entry {
            match self.active_forbidden {
                Some(active)
                    if active != b && !(self.forbidden.len() == 1 && old.is_forbidden()) =>
                {
                    panic!("forbidding color {b} at node {v} while color {active} is forbidden")
                }
                _ => {}
            }
        }
        match old.class() {
            Class::Forbidden => {
                self.forbidden.remove(v);
            }
            Class::Frozen => {
                self.frozen.remove(v);
            }
            Class::Ignored => {
                self.ignored.remove(v);
            }
            Class::Unrestricted => self.unrestricted -= 1,
        }
        match entry {
            IndexEntry::Forbidden(b) => {
                self.forbidden.insert(v);
                self.active_forbidden = Some(b);
            }
            IndexEntry::Frozen(_) => {
                self.frozen.insert(v);
            }
            IndexEntry::Ignored => {
                self.ignored.insert(v);
            }
            IndexEntry::Unrestricted => self.unrestricted += 1,
        }
        if self.forbidden.is_empty() {
            self.active_forbidden = None;
        }
        self.entries[v] = entry;
    }

    /// Full O(n) consistency check of the partition and forbidden color.
    pub fn check_invariants(&self, k: u32) -> Result<(), InvariantViolation> {
        let n = self.entries.len();
        let sum = self.forbidden.len() + self.frozen.len() + self.ignored.len() + self.unrestricted;
        if sum != n {
            return Err(InvariantViolation::PartitionSize { sum, expected: n });
        }
        for (v, &entry) in self.entries.iter().enumerate() {
            let in_sets = [
                (self.forbidden.contains(v), Class::Forbidden, "forbidden"),
                (self.frozen.contains(v), Class::Frozen, "frozen"),
                (self.ignored.contains(v), Class::Ignored, "ignored"),
            ];
            for (present, class, name) in in_sets {
                if present != (entry.class() == class) {
                    return Err(InvariantViolation::Partition {
                        node: v,
                        entry: entry.to_string(),
                        class: name,
                    });
                }
            }
            match entry {
                IndexEntry::Forbidden(c) | IndexEntry::Frozen(c) if !(1..=k).contains(&c) => {
                    return Err(InvariantViolation::ColorRange {
                        node: v,
                        entry: entry.to_string(),
                        k,
                    });
                }
                _ => {}
            }
            if let IndexEntry::Forbidden(b) = entry {
                if self.active_forbidden != Some(b) {
                    return Err(InvariantViolation::ForbiddenColor {
                        node: v,
                        found: b,
                        active: self.active_forbidden,
                    });
                }
            }
        }
        if self.forbidden.is_empty() && self.active_forbidden.is_some() {
            return Err(InvariantViolation::ForbiddenColor {
                node: usize::MAX,
                found: 0,
                active: self.active_forbidden,
            });
        }
        Ok(())
    }
}

impl fmt::Display for IndexState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

/// Initial pair: every node ignored, colors uniform over all `k^n`
/// assignments.
pub fn initial_state(graph: &Graph, k: u32, rng: &mut BitSource) -> (Coloring, IndexState) {
    let n = graph.node_count();
    (Coloring::uniform(n, k, rng), IndexState::all_ignored(n))
}

/// Whether `coloring` has weight one under `index`.
///
/// Frozen nodes must show their color, forbidden nodes must avoid theirs, and
/// every edge must have distinct endpoint colors unless an endpoint is
/// ignored or both endpoints are frozen at the shared color.
pub fn is_member(coloring: &Coloring, index: &IndexState, graph: &Graph) -> bool {
    node_factors_hold(coloring, index)
        && graph
            .edges()
            .all(|(u, v)| edge_factor(coloring, index, u, v))
}

fn node_factors_hold(coloring: &Coloring, index: &IndexState) -> bool {
    index
        .entries()
        .iter()
        .zip(coloring.as_slice())
        .all(|(&entry, &c)| match entry {
            IndexEntry::Frozen(f) => c == f,
            IndexEntry::Forbidden(b) => c != b,
            IndexEntry::Ignored | IndexEntry::Unrestricted => true,
        })
}

fn edge_factor(coloring: &Coloring, index: &IndexState, u: usize, v: usize) -> bool {
    let (cu, cv) = (coloring.get(u), coloring.get(v));
    let (eu, ev) = (index.entry(u), index.entry(v));
    cu != cv
        || (eu == IndexEntry::Frozen(cu) && ev == IndexEntry::Frozen(cv))
        || eu.is_ignored()
        || ev.is_ignored()
}

/// Edges whose endpoints are both frozen at one shared color.
pub fn frozen_equal_edges(index: &IndexState, graph: &Graph) -> usize {
    graph
        .edges()
        .filter(|&(u, v)| matches!((index.entry(u), index.entry(v)), (IndexEntry::Frozen(a), IndexEntry::Frozen(b)) if a == b))
        .count()
}

/// Largest number of assignments the brute-force enumerator will scan.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("{k}^{n} assignments exceed the enumeration cap of {cap}")]
    CapExceeded { k: u32, n: usize, cap: u64 },
}

/// All colorings with weight one under `index`, in lexicographic order
/// (node 0 most significant). Scans all `k^n` assignments.
pub fn enumerate_members(
    index: &IndexState,
    graph: &Graph,
    k: u32,
    cap: u64,
) -> Result<Vec<Coloring>, EnumerationError> {
    let n = graph.node_count();
    let too_big = EnumerationError::CapExceeded { k, n, cap };
    let total = u64::from(k).checked_pow(n as u32).ok_or(too_big)?;
    if total > cap {
        return Err(EnumerationError::CapExceeded { k, n, cap });
    }
    let mut out = Vec::new();
    let mut current = Coloring::new(vec![1; n], k);
    loop {
        if is_member(&current, index, graph) {
            out.push(current.clone());
        }
        // Odometer with the last node fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if current.colors[pos] < k {
                current.colors[pos] += 1;
                break;
            }
            current.colors[pos] = 1;
        }
    }
}

/// Proper colorings of `graph`, in lexicographic order.
pub fn enumerate_proper(
    graph: &Graph,
    k: u32,
    cap: u64,
) -> Result<Vec<Coloring>, EnumerationError> {
    enumerate_members(
        &IndexState::all_unrestricted(graph.node_count()),
        graph,
        k,
        cap,
    )
}
