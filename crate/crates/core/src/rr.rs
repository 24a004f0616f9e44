//! The randomness recycler for proper colorings.
//!
//! The sampler holds a pair `(x, x*)` where `x` is uniform over the colorings
//! accepted by the index `x*`. Each step picks one restricted node (forbidden
//! first, then frozen, then ignored; lowest id within a class) and removes or
//! rewrites its restriction so that the pair keeps that property. The run
//! ends when every node is unrestricted, at which point `x` is an exact
//! uniform draw from the proper colorings.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;
use crate::potential::{PotentialParams, Rational};
use crate::randomness::BitSource;
use crate::state::{self, Color, Coloring, IndexEntry, IndexState};

/// Which restriction a step worked on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    RemoveForbidden,
    RemoveFrozen,
    RemoveIgnored,
    Done,
}

/// Exit taken inside a procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// A neighbor is frozen at the forbidden color, so the restriction is
    /// implied by an edge and simply dropped.
    ForbiddenImplied,
    /// The forbidden color was not proposed; the node becomes unrestricted.
    ForbiddenKeptColor,
    /// The forbidden color was proposed but a neighbor already shows it; the
    /// neighbor search turns the conflict into new restrictions.
    ForbiddenConflictSearch,
    /// The proposal was accepted; the node takes the formerly forbidden color.
    ForbiddenAccepted,
    /// Rejected, and the chosen neighbor repeats a frozen color: the node and
    /// that neighbor are frozen.
    ForbiddenFrozePair,
    /// Rejected, and the chosen neighbor belongs to a group of neighbors
    /// sharing a new color: the group and the node are frozen at that color.
    ForbiddenFrozeGroup,
    /// Fewer colors than restricted neighbors (`d <= 0`); the whole run
    /// restarts from a fresh all-ignored draw.
    ForbiddenRestart,
    FrozenReleased,
    IgnoredAccepted,
    IgnoredConflictSearch,
    Done,
}

impl Branch {
    pub const ALL: [Branch; 11] = [
        Branch::ForbiddenImplied,
        Branch::ForbiddenKeptColor,
        Branch::ForbiddenConflictSearch,
        Branch::ForbiddenAccepted,
        Branch::ForbiddenFrozePair,
        Branch::ForbiddenFrozeGroup,
        Branch::ForbiddenRestart,
        Branch::FrozenReleased,
        Branch::IgnoredAccepted,
        Branch::IgnoredConflictSearch,
        Branch::Done,
    ];

    pub fn kind(self) -> StepKind {
        match self {
            Branch::ForbiddenImplied
            | Branch::ForbiddenKeptColor
            | Branch::ForbiddenConflictSearch
            | Branch::ForbiddenAccepted
            | Branch::ForbiddenFrozePair
            | Branch::ForbiddenFrozeGroup
            | Branch::ForbiddenRestart => StepKind::RemoveForbidden,
            Branch::FrozenReleased => StepKind::RemoveFrozen,
            Branch::IgnoredAccepted | Branch::IgnoredConflictSearch => StepKind::RemoveIgnored,
            Branch::Done => StepKind::Done,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::ForbiddenImplied => "forbidden_implied",
            Branch::ForbiddenKeptColor => "forbidden_kept_color",
            Branch::ForbiddenConflictSearch => "forbidden_conflict_search",
            Branch::ForbiddenAccepted => "forbidden_accepted",
            Branch::ForbiddenFrozePair => "forbidden_froze_pair",
            Branch::ForbiddenFrozeGroup => "forbidden_froze_group",
            Branch::ForbiddenRestart => "forbidden_restart",
            Branch::FrozenReleased => "frozen_released",
            Branch::IgnoredAccepted => "ignored_accepted",
            Branch::IgnoredConflictSearch => "ignored_conflict_search",
            Branch::Done => "done",
        }
    }
}

/// What one step did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: StepKind,
    pub branch: Branch,
    /// The node the step worked on (`None` when done).
    pub node: Option<usize>,
    /// Nodes whose index entry changed, each listed once.
    pub affected_nodes: Vec<usize>,
    /// `d = n2 - n3` when a forbidden removal computed it.
    pub d: Option<i64>,
    /// Whether the share identity held, when shares were computed.
    pub share_identity: Option<bool>,
}

impl StepOutcome {
    fn new(branch: Branch, node: Option<usize>) -> Self {
        Self {
            kind: branch.kind(),
            branch,
            node,
            affected_nodes: Vec::new(),
            d: None,
            share_identity: None,
        }
    }
}

/// Where the node at the center of a color-group freeze ends up.
///
/// Only [`GroupFreeze::NeighborColor`] keeps the output uniform over its
/// index; the other two exist so tests can show why.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GroupFreeze {
    /// Recolor the node to the group's color and freeze it there. Its frozen
    /// color then bars every other unfrozen neighbor from the group color.
    #[default]
    NeighborColor,
    /// Freeze the node at the group color in the index but leave it colored
    /// with the forbidden color.
    IndexOnly,
    /// Freeze the node at the forbidden color it currently shows.
    ForbiddenColor,
}

/// Select the node to work on: any forbidden node, else frozen, else
/// ignored; the lowest id within the class.
pub fn select_node(index: &IndexState) -> Option<(usize, StepKind)> {
    if let Some(v) = index.forbidden_nodes().min() {
        return Some((v, StepKind::RemoveForbidden));
    }
    if let Some(v) = index.frozen_nodes().min() {
        return Some((v, StepKind::RemoveFrozen));
    }
    index
        .ignored_nodes()
        .min()
        .map(|v| (v, StepKind::RemoveIgnored))
}

/// Neighbors of `v` that are neither frozen nor ignored.
pub fn open_neighbors(graph: &Graph, index: &IndexState, v: usize) -> Vec<usize> {
    graph
        .neighbors(v)
        .iter()
        .copied()
        .filter(|&u| !matches!(index.entry(u), IndexEntry::Frozen(_) | IndexEntry::Ignored))
        .collect()
}

/// Distinct colors of the frozen neighbors of `v`, sorted.
pub fn frozen_neighbor_colors(graph: &Graph, index: &IndexState, v: usize) -> Vec<Color> {
    let mut colors: Vec<Color> = graph
        .neighbors(v)
        .iter()
        .filter_map(|&u| match index.entry(u) {
            IndexEntry::Frozen(c) => Some(c),
            _ => None,
        })
        .collect();
    colors.sort_unstable();
    colors.dedup();
    colors
}

/// `d = n2 - n3`: colors not used by frozen neighbors, minus neighbors that
/// are neither frozen nor ignored. `d - 1` bounds the number of valid colors
/// for `v` from below.
pub fn compute_d(graph: &Graph, index: &IndexState, k: u32, v: usize) -> i64 {
    let n2 = i64::from(k) - frozen_neighbor_colors(graph, index, v).len() as i64;
    let n3 = open_neighbors(graph, index, v).len() as i64;
    n2 - n3
}

/// Number of colors valid for forbidden node `v` with the rest of the
/// coloring held fixed: not the forbidden color, not a frozen neighbor's
/// color, not the color of a neighbor that is neither frozen nor ignored.
pub fn compute_n1(graph: &Graph, coloring: &Coloring, index: &IndexState, v: usize) -> u64 {
    let IndexEntry::Forbidden(b) = index.entry(v) else {
        panic!(
            "compute_n1 needs a forbidden node, {v} is {}",
            index.entry(v)
        );
    };
    let mut blocked: Vec<Color> = frozen_neighbor_colors(graph, index, v);
    blocked.push(b);
    blocked.extend(
        open_neighbors(graph, index, v)
            .into_iter()
            .map(|u| coloring.get(u)),
    );
    blocked.sort_unstable();
    blocked.dedup();
    u64::from(coloring.k()) - blocked.len() as u64
}

/// Each open neighbor's share of the surplus `n1 - (d - 1)`: one for a
/// neighbor showing the forbidden color or a frozen neighbor's color,
/// otherwise `(g - 1) / g` for a member of a group of `g` open neighbors
/// sharing a color.
pub fn compute_shares(
    graph: &Graph,
    coloring: &Coloring,
    index: &IndexState,
    v: usize,
) -> Vec<(usize, Rational)> {
    let IndexEntry::Forbidden(b) = index.entry(v) else {
        panic!(
            "compute_shares needs a forbidden node, {v} is {}",
            index.entry(v)
        );
    };
    let frozen = frozen_neighbor_colors(graph, index, v);
    let open = open_neighbors(graph, index, v);
    let group_size = |c: Color| open.iter().filter(|&&u| coloring.get(u) == c).count() as i128;
    open.iter()
        .map(|&u| {
            let c = coloring.get(u);
            let share = if c == b || frozen.binary_search(&c).is_ok() {
                Rational::from_integer(1)
            } else {
                let g = group_size(c);
                Ratio::new(g - 1, g)
            };
            (u, share)
        })
        .collect()
}

/// Turns an ignored node unrestricted, recycling a conflict into a frozen
/// neighbor plus forbidden searched neighbors. Requires no forbidden or
/// frozen nodes anywhere.
pub fn remove_ignored(
    graph: &Graph,
    coloring: &mut Coloring,
    index: &mut IndexState,
    v: usize,
    rng: &mut BitSource,
) -> StepOutcome {
    assert_eq!(
        index.entry(v),
        IndexEntry::Ignored,
        "remove_ignored on node {v}"
    );
    debug_assert!(index.forbidden_count() == 0 && index.frozen_count() == 0);
    let color = coloring.get(v);
    let mut candidates = open_neighbors(graph, index, v);
    let (searched, found) =
        rng.shuffled_prefix_search(&mut candidates, |u| coloring.get(u) == color);
    let Some(w) = found else {
        index.set(v, IndexEntry::Unrestricted);
        let mut out = StepOutcome::new(Branch::IgnoredAccepted, Some(v));
        out.affected_nodes.push(v);
        return out;
    };
    let mut out = StepOutcome::new(Branch::IgnoredConflictSearch, Some(v));
    for &u in &candidates[..searched] {
        index.set(u, IndexEntry::Forbidden(color));
        out.affected_nodes.push(u);
    }
    index.set(w, IndexEntry::Frozen(color));
    out.affected_nodes.push(w);
    coloring.set(v, state::draw_color(coloring.k(), rng));
    out
}

/// Turns a frozen node into an ignored one; its unrestricted neighbors are
/// forbidden the released color. Requires no forbidden nodes anywhere.
pub fn remove_frozen(
    graph: &Graph,
    coloring: &mut Coloring,
    index: &mut IndexState,
    v: usize,
    rng: &mut BitSource,
) -> StepOutcome {
    let IndexEntry::Frozen(color) = index.entry(v) else {
        panic!("remove_frozen on node {v} with entry {}", index.entry(v));
    };
    debug_assert_eq!(index.forbidden_count(), 0);
    debug_assert_eq!(coloring.get(v), color);
    let mut out = StepOutcome::new(Branch::FrozenReleased, Some(v));
    for &u in graph.neighbors(v) {
        if index.entry(u) == IndexEntry::Unrestricted {
            index.set(u, IndexEntry::Forbidden(color));
            out.affected_nodes.push(u);
        }
    }
    index.set(v, IndexEntry::Ignored);
    out.affected_nodes.push(v);
    coloring.set(v, state::draw_color(coloring.k(), rng));
    out
}

/// Removes the forbidden restriction at `v`.
pub fn remove_forbidden(
    graph: &Graph,
    coloring: &mut Coloring,
    index: &mut IndexState,
    v: usize,
    rng: &mut BitSource,
    group_freeze: GroupFreeze,
) -> StepOutcome {
    let IndexEntry::Forbidden(b) = index.entry(v) else {
        panic!("remove_forbidden on node {v} with entry {}", index.entry(v));
    };
    let k = coloring.k();

    if graph
        .neighbors(v)
        .iter()
        .any(|&t| index.entry(t) == IndexEntry::Frozen(b))
    {
        index.set(v, IndexEntry::Unrestricted);
        let mut out = StepOutcome::new(Branch::ForbiddenImplied, Some(v));
        out.affected_nodes.push(v);
        return out;
    }

    let frozen_colors = frozen_neighbor_colors(graph, index, v);
    let mut open = open_neighbors(graph, index, v);
    let d = i64::from(k) - frozen_colors.len() as i64 - open.len() as i64;

    if d <= 0 {
        // The proposal probability 1/d is undefined. The decision depends on
        // the index alone, so discarding the pair and starting over is exact.
        let mut out = StepOutcome::new(Branch::ForbiddenRestart, Some(v));
        out.d = Some(d);
        let (fresh, fresh_index) = state::initial_state(graph, k, rng);
        for u in graph.nodes() {
            if index.entry(u) != IndexEntry::Ignored {
                out.affected_nodes.push(u);
            }
        }
        *coloring = fresh;
        *index = fresh_index;
        return out;
    }
    let d_u = d as u64;

    if !rng.bernoulli_rational(1, d_u) {
        index.set(v, IndexEntry::Unrestricted);
        let mut out = StepOutcome::new(Branch::ForbiddenKeptColor, Some(v));
        out.affected_nodes.push(v);
        out.d = Some(d);
        return out;
    }

    // Proposed recoloring of v to b. Only open neighbors can show b: frozen
    // ones would have taken the first exit and forbidden ones avoid b.
    if open.iter().any(|&u| coloring.get(u) == b) {
        let (searched, found) = rng.shuffled_prefix_search(&mut open, |u| coloring.get(u) == b);
        let w = found.expect("a neighbor shows the forbidden color");
        let mut out = StepOutcome::new(Branch::ForbiddenConflictSearch, Some(v));
        out.d = Some(d);
        for &u in &open[..searched] {
            if index.entry(u) != IndexEntry::Forbidden(b) {
                index.set(u, IndexEntry::Forbidden(b));
                out.affected_nodes.push(u);
            }
        }
        index.set(w, IndexEntry::Frozen(b));
        out.affected_nodes.push(w);
        // The state keeps v's original color: w frozen at b now carries the
        // restriction that v avoids b, and the outcome probability depends
        // only on the emitted index.
        index.set(v, IndexEntry::Unrestricted);
        out.affected_nodes.push(v);
        return out;
    }

    // Colors blocked for v: b, frozen neighbor colors, open neighbor colors.
    // Open neighbors are grouped by color; a group showing a frozen color
    // contributes one unit per member, any other group of size g contributes
    // g - 1 units shared evenly.
    let mut groups: BTreeMap<Color, Vec<usize>> = BTreeMap::new();
    for &u in &open {
        groups.entry(coloring.get(u)).or_default().push(u);
    }
    let is_old = |c: Color| c == b || frozen_colors.binary_search(&c).is_ok();
    let new_colors = groups.keys().filter(|&&c| !is_old(c)).count() as u64;
    let n1 = u64::from(k) - 1 - frozen_colors.len() as u64 - new_colors;
    debug_assert_eq!(n1, compute_n1(graph, coloring, index, v));

    if rng.bernoulli_rational(d_u - 1, n1) {
        coloring.set(v, b);
        index.set(v, IndexEntry::Unrestricted);
        let mut out = StepOutcome::new(Branch::ForbiddenAccepted, Some(v));
        out.affected_nodes.push(v);
        out.d = Some(d);
        return out;
    }

    let surplus = n1 - (d_u - 1);
    let units: u64 = groups
        .iter()
        .map(|(&c, members)| {
            if is_old(c) {
                members.len() as u64
            } else {
                members.len() as u64 - 1
            }
        })
        .sum();
    let share_identity = units == surplus;
    debug_assert!(
        share_identity,
        "shares sum to {units}, surplus is {surplus}"
    );

    // Choose a neighbor with probability proportional to its share: pick a
    // unit, then (for a frozen-color group) the member owning it. Within a
    // new-color group every member leads to the same output, so no member
    // draw is needed there.
    let mut pick = rng.uniform_int(units);
    let mut chosen = None;
    for (&c, members) in &groups {
        let weight = if is_old(c) {
            members.len() as u64
        } else {
            members.len() as u64 - 1
        };
        if pick < weight {
            chosen = Some((c, members));
            break;
        }
        pick -= weight;
    }
    let (c, members) = chosen.expect("unit index within total");
    coloring.set(v, b);

    let mut out;
    if is_old(c) {
        let w = members[pick as usize];
        out = StepOutcome::new(Branch::ForbiddenFrozePair, Some(v));
        index.set(v, IndexEntry::Frozen(b));
        index.set(w, IndexEntry::Frozen(c));
        out.affected_nodes.extend([v, w]);
    } else {
        out = StepOutcome::new(Branch::ForbiddenFrozeGroup, Some(v));
        // v leaves the forbidden class first so the set never holds a stale entry.
        match group_freeze {
            GroupFreeze::NeighborColor => {
                coloring.set(v, c);
                index.set(v, IndexEntry::Frozen(c));
            }
            GroupFreeze::IndexOnly => index.set(v, IndexEntry::Frozen(c)),
            GroupFreeze::ForbiddenColor => index.set(v, IndexEntry::Frozen(b)),
        }
        out.affected_nodes.push(v);
        for &u in &open {
            let entry = if coloring.get(u) == c {
                IndexEntry::Frozen(c)
            } else {
                IndexEntry::Forbidden(b)
            };
            if index.entry(u) != entry {
                index.set(u, entry);
                out.affected_nodes.push(u);
            }
        }
    }
    out.d = Some(d);
    out.share_identity = Some(share_identity);
    out
}

/// Per-kind step counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepCounts {
    pub remove_forbidden: u64,
    pub remove_frozen: u64,
    pub remove_ignored: u64,
}

impl StepCounts {
    pub fn total(&self) -> u64 {
        self.remove_forbidden + self.remove_frozen + self.remove_ignored
    }

    fn record(&mut self, kind: StepKind) {
        match kind {
            StepKind::RemoveForbidden => self.remove_forbidden += 1,
            StepKind::RemoveFrozen => self.remove_frozen += 1,
            StepKind::RemoveIgnored => self.remove_ignored += 1,
            StepKind::Done => {}
        }
    }
}

/// Counters collected over one sampler run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub total_steps: u64,
    pub steps_by_kind: StepCounts,
    pub branches: BTreeMap<&'static str, u64>,
    /// Raw random bits drawn, including the initial coloring.
    pub random_bits: u64,
    pub restarts: u64,
    /// Smallest `d` seen by a forbidden removal.
    pub min_d: Option<i64>,
    pub share_checks: u64,
    pub share_violations: u64,
    /// Steps that left some edge with both endpoints frozen at one color.
    pub frozen_equal_steps: u64,
    #[serde(skip)]
    pub potential_trace: Option<Vec<(u64, Rational)>>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunMetrics {
    fn record(&mut self, outcome: &StepOutcome) {
        self.total_steps += 1;
        self.steps_by_kind.record(outcome.kind);
        *self.branches.entry(outcome.branch.name()).or_default() += 1;
        if outcome.branch == Branch::ForbiddenRestart {
            self.restarts += 1;
        }
        if let Some(d) = outcome.d {
            self.min_d = Some(self.min_d.map_or(d, |m| m.min(d)));
        }
        if let Some(ok) = outcome.share_identity {
            self.share_checks += 1;
            if !ok {
                self.share_violations += 1;
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("need at least 2 colors, got {0}")]
    TooFewColors(u32),
    #[error("step budget of {cap} exceeded without reaching a proper coloring")]
    BudgetExceeded { cap: u64 },
}

#[derive(Clone, Debug, Default)]
pub struct SamplerOptions {
    /// Step budget; `None` means `DEFAULT_STEPS_PER_NODE * n`.
    pub step_cap: Option<u64>,
    /// Record the potential after every step.
    pub trace_potential: bool,
    pub group_freeze: GroupFreeze,
}

pub const DEFAULT_STEPS_PER_NODE: u64 = 1_000_000;

impl SamplerOptions {
    pub fn cap_for(&self, node_count: usize) -> u64 {
        self.step_cap
            .unwrap_or(DEFAULT_STEPS_PER_NODE.saturating_mul(node_count as u64))
    }
}

/// One sampler run in progress, stepped explicitly.
pub struct Sampler<'g> {
    graph: &'g Graph,
    coloring: Coloring,
    index: IndexState,
    group_freeze: GroupFreeze,
    frozen_equal: usize,
}

impl<'g> Sampler<'g> {
    /// Draws the initial all-ignored pair.
    pub fn new(graph: &'g Graph, k: u32, rng: &mut BitSource) -> Self {
        let (coloring, index) = state::initial_state(graph, k, rng);
        Self::from_parts(graph, coloring, index)
    }

    /// Resumes from an explicit pair; `coloring` must be a member of `index`.
    pub fn from_parts(graph: &'g Graph, coloring: Coloring, index: IndexState) -> Self {
        assert_eq!(coloring.len(), graph.node_count());
        assert_eq!(index.len(), graph.node_count());
        let frozen_equal = state::frozen_equal_edges(&index, graph);
        Self {
            graph,
            coloring,
            index,
            group_freeze: GroupFreeze::default(),
            frozen_equal,
        }
    }

    pub fn with_group_freeze(mut self, rule: GroupFreeze) -> Self {
        self.group_freeze = rule;
        self
    }

    pub fn coloring(&self) -> &Coloring {
        &self.coloring
    }

    pub fn index(&self) -> &IndexState {
        &self.index
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn is_done(&self) -> bool {
        self.index.is_target()
    }

    pub fn into_parts(self) -> (Coloring, IndexState) {
        (self.coloring, self.index)
    }

    /// Number of edges currently frozen at equal colors on both ends.
    pub fn frozen_equal_edges(&self) -> usize {
        self.frozen_equal
    }

    /// One dispatcher step.
    pub fn step(&mut self, rng: &mut BitSource) -> StepOutcome {
        match select_node(&self.index) {
            None => StepOutcome::new(Branch::Done, None),
            Some((v, kind)) => self.step_at(v, kind, rng),
        }
    }

    /// Applies the procedure for `kind` at `v`, bypassing node selection.
    /// The caller is responsible for the procedure's preconditions.
    pub fn step_at(&mut self, v: usize, kind: StepKind, rng: &mut BitSource) -> StepOutcome {
        let before: Vec<(usize, IndexEntry)> = self.touched_frozen(v);
        let out = match kind {
            StepKind::RemoveForbidden => remove_forbidden(
                self.graph,
                &mut self.coloring,
                &mut self.index,
                v,
                rng,
                self.group_freeze,
            ),
            StepKind::RemoveFrozen => {
                remove_frozen(self.graph, &mut self.coloring, &mut self.index, v, rng)
            }
            StepKind::RemoveIgnored => {
                remove_ignored(self.graph, &mut self.coloring, &mut self.index, v, rng)
            }
            StepKind::Done => return StepOutcome::new(Branch::Done, None),
        };
        if out.branch == Branch::ForbiddenRestart {
            self.frozen_equal = 0;
        } else {
            self.update_frozen_equal(&before, &out.affected_nodes);
        }
        out
    }

    fn touched_frozen(&self, v: usize) -> Vec<(usize, IndexEntry)> {
        // Entries that may change live on v and its neighbors.
        std::iter::once(v)
            .chain(self.graph.neighbors(v).iter().copied())
            .map(|u| (u, self.index.entry(u)))
            .collect()
    }

    fn update_frozen_equal(&mut self, before: &[(usize, IndexEntry)], affected: &[usize]) {
        let old_entry = |u: usize| before.iter().find(|&&(x, _)| x == u).map(|&(_, e)| e);
        let mut seen: Vec<(usize, usize)> = Vec::new();
        for &u in affected {
            for &w in self.graph.neighbors(u) {
                let edge = (u.min(w), u.max(w));
                if seen.contains(&edge) {
                    continue;
                }
                seen.push(edge);
                let was = |x: usize| old_entry(x).unwrap_or_else(|| self.index.entry(x));
                let equal = |a: IndexEntry, b: IndexEntry| matches!((a, b), (IndexEntry::Frozen(p), IndexEntry::Frozen(q)) if p == q);
                let before_eq = equal(was(u), was(w));
                let after_eq = equal(self.index.entry(u), self.index.entry(w));
                match (before_eq, after_eq) {
                    (false, true) => self.frozen_equal += 1,
                    (true, false) => self.frozen_equal -= 1,
                    _ => {}
                }
            }
        }
    }

    /// Steps until done, or fails once `cap` steps have been taken.
    pub fn run(
        &mut self,
        rng: &mut BitSource,
        cap: u64,
        params: Option<&PotentialParams>,
        metrics: &mut RunMetrics,
    ) -> Result<(), SampleError> {
        let mut trace = params.map(|p| vec![(0u64, p.potential(&self.index))]);
        while !self.is_done() {
            if metrics.total_steps >= cap {
                metrics.potential_trace = trace;
                return Err(SampleError::BudgetExceeded { cap });
            }
            let out = self.step(rng);
            metrics.record(&out);
            if self.frozen_equal > 0 {
                metrics.frozen_equal_steps += 1;
            }
            if let (Some(trace), Some(p)) = (trace.as_mut(), params) {
                trace.push((metrics.total_steps, p.potential(&self.index)));
            }
        }
        metrics.potential_trace = trace;
        Ok(())
    }
}

/// Draws one exact uniform proper `k`-coloring of `graph`.
///
/// Fails with [`SampleError::BudgetExceeded`] if the step budget runs out;
/// no coloring is returned in that case, since a truncated run is biased.
/// The linear expected-time guarantee needs [`crate::potential::guarantee_applies`];
/// outside it the sampler still runs and stays exact when it finishes.
pub fn sample(
    graph: &Graph,
    k: u32,
    rng: &mut BitSource,
    options: &SamplerOptions,
) -> Result<(Coloring, RunMetrics), SampleError> {
    if k < 2 && graph.node_count() > 1 {
        return Err(SampleError::TooFewColors(k));
    }
    let start = Instant::now();
    let bits_before = rng.bits_consumed();
    let mut metrics = RunMetrics::default();
    let params = if options.trace_potential {
        PotentialParams::new(k, graph.max_degree().max(1)).ok()
    } else {
        None
    };
    let mut sampler = Sampler::new(graph, k, rng).with_group_freeze(options.group_freeze);
    let result = sampler.run(
        rng,
        options.cap_for(graph.node_count()),
        params.as_ref(),
        &mut metrics,
    );
    metrics.random_bits = rng.bits_consumed() - bits_before;
    metrics.wall_time = start.elapsed();
    result.map(|_| (sampler.into_parts().0, metrics))
}

/// Independent runs with seeds `seed, seed + 1, ...`, in parallel; results
/// come back in seed order.
pub fn sample_batch(
    graph: &Graph,
    k: u32,
    seed: u64,
    count: u64,
    options: &SamplerOptions,
) -> Vec<Result<(Coloring, RunMetrics), SampleError>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample(graph, k, &mut BitSource::new(seed.wrapping_add(i)), options))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::is_member;
    use IndexEntry::*;

    fn pair(colors: &[Color], k: u32, entries: Vec<IndexEntry>) -> (Coloring, IndexState) {
        (
            Coloring::new(colors.to_vec(), k),
            IndexState::from_entries(entries),
        )
    }

    #[test]
    fn selection_priority() {
        assert_eq!(select_node(&IndexState::all_unrestricted(3)), None);
        let xs = IndexState::from_entries(vec![Ignored, Frozen(2), Forbidden(3)]);
        assert_eq!(select_node(&xs), Some((2, StepKind::RemoveForbidden)));
        let xs = IndexState::from_entries(vec![Ignored, Ignored, Unrestricted]);
        assert_eq!(select_node(&xs), Some((0, StepKind::RemoveIgnored)));
        let xs = IndexState::from_entries(vec![Ignored, Frozen(1), Frozen(2)]);
        assert_eq!(select_node(&xs), Some((1, StepKind::RemoveFrozen)));
    }

    #[test]
    fn isolated_ignored_node_is_accepted() {
        let g = Graph::from_edges(3, [(1, 2)]).unwrap();
        let (mut x, mut xs) = pair(&[1, 2, 3], 3, vec![Ignored, Unrestricted, Unrestricted]);
        let mut rng = BitSource::new(0);
        let out = remove_ignored(&g, &mut x, &mut xs, 0, &mut rng);
        assert_eq!(out.branch, Branch::IgnoredAccepted);
        assert_eq!(out.affected_nodes, vec![0]);
        assert_eq!(xs.entries(), &[Unrestricted; 3]);
        assert_eq!(x.as_slice(), &[1, 2, 3]);
        assert_eq!(rng.bits_consumed(), 0);
    }

    #[test]
    fn single_conflicting_neighbor_is_frozen() {
        let g = Graph::path(2).unwrap();
        let (mut x, mut xs) = pair(&[4, 4], 5, vec![Ignored, Unrestricted]);
        let mut rng = BitSource::new(0);
        let out = remove_ignored(&g, &mut x, &mut xs, 0, &mut rng);
        assert_eq!(out.branch, Branch::IgnoredConflictSearch);
        assert_eq!(xs.entries(), &[Ignored, Frozen(4)]);
        assert_eq!(x.get(1), 4);
        assert!(is_member(&x, &xs, &g));
    }

    #[test]
    fn frozen_without_open_neighbors_becomes_ignored() {
        let g = Graph::path(3).unwrap();
        let (mut x, mut xs) = pair(&[1, 2, 2], 3, vec![Ignored, Frozen(2), Ignored]);
        let mut rng = BitSource::new(0);
        let out = remove_frozen(&g, &mut x, &mut xs, 1, &mut rng);
        assert_eq!(out.branch, Branch::FrozenReleased);
        assert_eq!(xs.entries(), &[Ignored; 3]);
        assert_eq!(xs.active_forbidden_color(), None);
    }

    #[test]
    fn frozen_release_forbids_unrestricted_neighbors() {
        let g = Graph::star(4).unwrap();
        let (mut x, mut xs) = pair(
            &[5, 1, 2, 3, 5],
            5,
            vec![
                Frozen(5),
                Unrestricted,
                Unrestricted,
                Unrestricted,
                Frozen(5),
            ],
        );
        let mut rng = BitSource::new(0);
        remove_frozen(&g, &mut x, &mut xs, 0, &mut rng);
        assert_eq!(
            xs.entries(),
            &[Ignored, Forbidden(5), Forbidden(5), Forbidden(5), Frozen(5)]
        );
        assert_eq!(xs.active_forbidden_color(), Some(5));
    }

    #[test]
    fn ten_color_instance_counts() {
        // k = 10, b = 10, one neighbor frozen at 3, open neighbors colored 3, 2, 2, 1.
        let g = Graph::star(5).unwrap();
        let (x, xs) = pair(
            &[5, 3, 3, 2, 2, 1],
            10,
            vec![
                Forbidden(10),
                Frozen(3),
                Unrestricted,
                Unrestricted,
                Unrestricted,
                Unrestricted,
            ],
        );
        assert_eq!(compute_n1(&g, &x, &xs, 0), 6);
        assert_eq!(compute_d(&g, &xs, 10, 0), 5);
        let shares = compute_shares(&g, &x, &xs, 0);
        let one = Rational::from_integer(1);
        let half = Rational::new(1, 2);
        let zero = Rational::from_integer(0);
        assert_eq!(shares, vec![(2, one), (3, half), (4, half), (5, zero)]);
        let total: Rational = shares.iter().map(|(_, h)| *h).sum();
        assert_eq!(total, Rational::from_integer(6 - (5 - 1)));
    }

    #[test]
    fn triple_group_shares() {
        let g = Graph::star(3).unwrap();
        let (x, xs) = pair(
            &[1, 4, 4, 4],
            13,
            vec![Forbidden(7), Unrestricted, Unrestricted, Unrestricted],
        );
        let shares = compute_shares(&g, &x, &xs, 0);
        assert!(shares.iter().all(|(_, h)| *h == Rational::new(2, 3)));
        assert_eq!(
            shares.iter().map(|(_, h)| *h).sum::<Rational>(),
            Rational::from_integer(2)
        );
        let (x, xs) = pair(
            &[1, 2, 3, 4],
            13,
            vec![Forbidden(7), Unrestricted, Unrestricted, Unrestricted],
        );
        assert!(compute_shares(&g, &x, &xs, 0)
            .iter()
            .all(|(_, h)| *h == Rational::from_integer(0)));
    }

    #[test]
    fn lonely_forbidden_node_counts() {
        let g = Graph::path(2).unwrap();
        let (x, xs) = pair(&[1, 3], 7, vec![Forbidden(4), Ignored]);
        assert_eq!(compute_d(&g, &xs, 7, 0), 7);
        assert_eq!(compute_n1(&g, &x, &xs, 0), 6);
    }

    #[test]
    fn n1_never_below_d_minus_one() {
        // Every index on a 4-node graph around a forbidden center, every coloring.
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let options = [Unrestricted, Ignored, Frozen(1), Frozen(2), Forbidden(1)];
        for k in 2..=6u32 {
            for a in options {
                for b in options {
                    for c in options {
                        let xs = IndexState::from_entries(vec![Forbidden(1), a, b, c]);
                        let d = compute_d(&g, &xs, k, 0);
                        let members = state::enumerate_members(&xs, &g, k, 1 << 20).unwrap();
                        for x in members {
                            let n1 = compute_n1(&g, &x, &xs, 0) as i64;
                            assert!(n1 >= d - 1, "k={k} xs={xs} x={x:?}");
                            let total: Rational =
                                compute_shares(&g, &x, &xs, 0).iter().map(|(_, h)| *h).sum();
                            let implied = g.neighbors(0).iter().any(|&t| xs.entry(t) == Frozen(1));
                            if !implied {
                                assert_eq!(total, Rational::from_integer((n1 - (d - 1)) as i128));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn forbidden_implied_by_frozen_neighbor() {
        let g = Graph::path(3).unwrap();
        let (mut x, mut xs) = pair(&[1, 2, 3], 3, vec![Unrestricted, Forbidden(2), Frozen(2)]);
        let before = x.clone();
        let mut rng = BitSource::new(0);
        let out = remove_forbidden(&g, &mut x, &mut xs, 1, &mut rng, GroupFreeze::default());
        // The frozen neighbor at 2 already keeps node 1 off color 2.
        assert_eq!(out.branch, Branch::ForbiddenImplied);
        assert_eq!(xs.entries(), &[Unrestricted, Unrestricted, Frozen(2)]);
        assert_eq!(x, before);
        assert_eq!(rng.bits_consumed(), 0);
    }

    #[test]
    fn tight_acceptance_is_certain() {
        // d - 1 == n1: all open neighbors block distinct new colors.
        let g = Graph::star(2).unwrap();
        let mut rng = BitSource::new(3);
        let mut accepted = 0;
        for _ in 0..2000 {
            let (mut x, mut xs) = pair(
                &[1, 2, 3],
                4,
                vec![Forbidden(4), Unrestricted, Unrestricted],
            );
            assert_eq!(
                compute_d(&g, &xs, 4, 0) - 1,
                compute_n1(&g, &x, &xs, 0) as i64
            );
            let out = remove_forbidden(&g, &mut x, &mut xs, 0, &mut rng, GroupFreeze::default());
            assert!(
                matches!(
                    out.branch,
                    Branch::ForbiddenKeptColor | Branch::ForbiddenAccepted
                ),
                "{out:?}"
            );
            accepted += usize::from(out.branch == Branch::ForbiddenAccepted);
        }
        assert!(accepted > 0);
    }

    #[test]
    fn degenerate_d_restarts() {
        let g = Graph::complete(3).unwrap();
        let (mut x, mut xs) = pair(
            &[1, 2, 1],
            2,
            vec![Forbidden(2), Unrestricted, Unrestricted],
        );
        let mut rng = BitSource::new(0);
        let out = remove_forbidden(&g, &mut x, &mut xs, 0, &mut rng, GroupFreeze::default());
        assert_eq!(out.branch, Branch::ForbiddenRestart);
        assert_eq!(out.d, Some(0));
        assert_eq!(xs.entries(), &[Ignored; 3]);
    }

    #[test]
    fn single_node_takes_one_step() {
        let g = Graph::path(1).unwrap();
        let mut rng = BitSource::new(9);
        let (x, metrics) = sample(&g, 5, &mut rng, &SamplerOptions::default()).unwrap();
        assert_eq!(metrics.total_steps, 1);
        assert_eq!(metrics.steps_by_kind.remove_ignored, 1);
        assert!((1..=5).contains(&x.get(0)));
    }

    #[test]
    fn uncolorable_graph_exhausts_budget() {
        let g = Graph::complete(3).unwrap();
        let mut rng = BitSource::new(1);
        let options = SamplerOptions {
            step_cap: Some(20_000),
            ..Default::default()
        };
        assert_eq!(
            sample(&g, 2, &mut rng, &options),
            Err(SampleError::BudgetExceeded { cap: 20_000 })
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Graph::grid(4, 4).unwrap();
        let options = SamplerOptions {
            trace_potential: true,
            ..Default::default()
        };
        let (a, ma) = sample(&g, 9, &mut BitSource::new(5), &options).unwrap();
        let (b, mb) = sample(&g, 9, &mut BitSource::new(5), &options).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma.total_steps, mb.total_steps);
        assert_eq!(ma.random_bits, mb.random_bits);
        assert_eq!(ma.potential_trace, mb.potential_trace);
        let trace = ma.potential_trace.unwrap();
        assert_eq!(trace.first().unwrap().1, Rational::from_integer(16));
        assert_eq!(trace.last().unwrap().1, Rational::from_integer(0));
        assert_eq!(trace.len() as u64, ma.total_steps + 1);
    }

    #[test]
    fn batch_matches_individual_runs() {
        let g = Graph::cycle(6).unwrap();
        let options = SamplerOptions::default();
        let batch = sample_batch(&g, 5, 40, 8, &options);
        for (i, result) in batch.into_iter().enumerate() {
            let (x, _) = result.unwrap();
            let (y, _) = sample(&g, 5, &mut BitSource::new(40 + i as u64), &options).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn too_few_colors() {
        let g = Graph::path(2).unwrap();
        assert_eq!(
            sample(&g, 1, &mut BitSource::new(0), &SamplerOptions::default()),
            Err(SampleError::TooFewColors(1))
        );
    }
}
