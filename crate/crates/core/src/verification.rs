//! Statistical and empirical checks of the sampler: uniformity of complete
//! runs, uniformity of single procedure applications, drift of the
//! potential, and step counts as the graph grows.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::potential::{self, PotentialError, PotentialParams, Rational};
use crate::randomness::BitSource;
use crate::rr::{self, Branch, GroupFreeze, SampleError, Sampler, SamplerOptions, StepKind};
use crate::state::{self, Coloring, EnumerationError, IndexEntry, IndexState};
use crate::stats::{self, ChiSquareReport};

/// Significance level used by every statistical gate.
pub const SIGNIFICANCE: f64 = 0.001;

/// Smallest expected count per cell for a chi-square test to be run.
pub const MIN_EXPECTED_PER_CELL: f64 = 5.0;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("graph has no proper {0}-colorings")]
    NoProperColorings(u32),
    #[error("index {0} accepts no colorings")]
    EmptyIndex(String),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("drift needs a positive epsilon, got {0} at k={1}, max degree={2}")]
    NonPositiveEpsilon(String, u32, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformityReport {
    pub k: u32,
    pub node_count: usize,
    pub support_size: usize,
    pub samples: u64,
    pub seed: u64,
    /// Hits per proper coloring, in lexicographic order of the colorings.
    pub counts: Vec<u64>,
    pub chi_square: ChiSquareReport,
    pub mean_steps: f64,
    pub passed: bool,
}

/// Runs `samples` independent samples (seeds `seed + i`) and tests them for
/// uniformity over the enumerated proper colorings.
pub fn uniformity_test(
    graph: &Graph,
    k: u32,
    samples: u64,
    seed: u64,
    options: &SamplerOptions,
) -> Result<UniformityReport, VerificationError> {
    let support = state::enumerate_proper(graph, k, state::DEFAULT_ENUMERATION_CAP)?;
    if support.is_empty() {
        return Err(VerificationError::NoProperColorings(k));
    }
    let position: HashMap<&Coloring, usize> =
        support.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let hits: Vec<(usize, u64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let (x, metrics) =
                rr::sample(graph, k, &mut BitSource::new(seed.wrapping_add(i)), options)?;
            let at = *position
                .get(&x)
                .expect("sampler returned a proper coloring");
            Ok((at, metrics.total_steps))
        })
        .collect::<Result<_, SampleError>>()?;
    let mut counts = vec![0u64; support.len()];
    let mut steps = 0u64;
    for (at, s) in hits {
        counts[at] += 1;
        steps += s;
    }
    let chi_square = stats::chi_square_uniform(&counts);
    Ok(UniformityReport {
        k,
        node_count: graph.node_count(),
        support_size: support.len(),
        samples,
        seed,
        counts,
        passed: chi_square.p_value > SIGNIFICANCE,
        chi_square,
        mean_steps: if samples == 0 {
            0.0
        } else {
            steps as f64 / samples as f64
        },
    })
}

/// Mean and standard error of a per-step quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub count: u64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Accumulator {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn estimate(&self) -> MeanEstimate {
        let (mean, stderr) = stats::mean_and_stderr(self.sum, self.sum_sq, self.count);
        MeanEstimate {
            count: self.count,
            mean,
            stderr,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub k: u32,
    pub max_degree: usize,
    pub params: PotentialParams,
    pub runs: u64,
    pub seed: u64,
    /// Change of the potential per step, over all steps.
    pub overall: MeanEstimate,
    pub by_kind: BTreeMap<&'static str, MeanEstimate>,
    pub by_branch: BTreeMap<&'static str, MeanEstimate>,
    /// Smallest `d` seen at a forbidden removal.
    pub min_d: Option<i64>,
    /// `mean <= -epsilon + 3 stderr` over all steps.
    pub passed: bool,
    /// The same bound holds for each kind of step on its own.
    pub per_kind_passed: bool,
}

fn kind_name(kind: StepKind) -> &'static str {
    match kind {
        StepKind::RemoveForbidden => "remove_forbidden",
        StepKind::RemoveFrozen => "remove_frozen",
        StepKind::RemoveIgnored => "remove_ignored",
        StepKind::Done => "done",
    }
}

fn within_drift_bound(estimate: &MeanEstimate, epsilon: f64) -> bool {
    // The slack absorbs rounding when a kind's change is deterministic.
    estimate.mean <= -epsilon + 3.0 * estimate.stderr + 1e-9
}

/// Runs complete samples (seeds `seed + i`) until at least `min_steps` steps
/// have been taken, recording the change of the potential at every step.
pub fn drift_experiment(
    graph: &Graph,
    k: u32,
    min_steps: u64,
    seed: u64,
) -> Result<DriftReport, VerificationError> {
    let max_degree = graph.max_degree().max(1);
    let params = PotentialParams::new(k, max_degree)?;
    if !params.epsilon_positive() {
        return Err(VerificationError::NonPositiveEpsilon(
            potential::format_rational(&params.epsilon),
            k,
            max_degree,
        ));
    }
    let mut overall = Accumulator::default();
    let mut by_kind: BTreeMap<&'static str, Accumulator> = BTreeMap::new();
    let mut by_branch: BTreeMap<&'static str, Accumulator> = BTreeMap::new();
    let mut min_d: Option<i64> = None;
    let mut runs = 0u64;
    while overall.count < min_steps || runs == 0 {
        let mut rng = BitSource::new(seed.wrapping_add(runs));
        let mut sampler = Sampler::new(graph, k, &mut rng);
        let mut phi = params.potential(sampler.index());
        while !sampler.is_done() {
            let out = sampler.step(&mut rng);
            let next = params.potential(sampler.index());
            let change = potential::rational_to_f64(&(next - phi));
            phi = next;
            overall.push(change);
            by_kind.entry(kind_name(out.kind)).or_default().push(change);
            by_branch.entry(out.branch.name()).or_default().push(change);
            if let Some(d) = out.d {
                min_d = Some(min_d.map_or(d, |m| m.min(d)));
            }
        }
        runs += 1;
    }
    let epsilon = potential::rational_to_f64(&params.epsilon);
    let overall = overall.estimate();
    let by_kind: BTreeMap<_, _> = by_kind
        .into_iter()
        .map(|(k, a)| (k, a.estimate()))
        .collect();
    let by_branch = by_branch
        .into_iter()
        .map(|(k, a)| (k, a.estimate()))
        .collect();
    Ok(DriftReport {
        k,
        max_degree,
        runs,
        seed,
        passed: within_drift_bound(&overall, epsilon),
        per_kind_passed: by_kind.values().all(|e| within_drift_bound(e, epsilon)),
        params,
        overall,
        by_kind,
        by_branch,
        min_d,
    })
}

/// Graph family swept by [`scaling_bench`]: `cycle` or `random_regular:<d>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchFamily {
    Cycle,
    RandomRegular(usize),
}

impl BenchFamily {
    pub fn build(&self, n: usize, seed: u64) -> Result<Graph, GraphError> {
        match *self {
            BenchFamily::Cycle => Graph::cycle(n),
            BenchFamily::RandomRegular(d) => Graph::random_regular(n, d, seed),
        }
    }
}

impl fmt::Display for BenchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchFamily::Cycle => f.write_str("cycle"),
            BenchFamily::RandomRegular(d) => write!(f, "random_regular:{d}"),
        }
    }
}

impl FromStr for BenchFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "cycle" => Ok(BenchFamily::Cycle),
            Some(("random_regular", d)) => d
                .parse()
                .map(BenchFamily::RandomRegular)
                .map_err(|_| format!("invalid degree {d:?} in {s:?}")),
            _ => Err(format!(
                "unknown bench family {s:?}; expected cycle or random_regular:<d>"
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub family: String,
    pub n: usize,
    pub k: u32,
    pub delta: usize,
    #[serde(serialize_with = "potential::ser_rational")]
    pub epsilon: Rational,
    pub reps: u64,
    pub mean_steps: f64,
    pub steps_per_node: f64,
    pub mean_bits_per_step: f64,
    pub wall_ms: f64,
    /// `n / epsilon`, absent when epsilon is not positive.
    pub step_bound: Option<f64>,
    pub within_step_bound: bool,
    /// `64 (delta + 2) ceil(log2 k)`.
    pub bits_ceiling: f64,
    pub within_bits_ceiling: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    /// Steps per node at the largest size over steps per node at the smallest.
    pub trend_ratio: Option<f64>,
    pub trend_passed: bool,
    pub passed: bool,
}

pub const TREND_TOLERANCE: f64 = 1.25;

pub const BENCH_CSV_HEADER: &str =
    "family,n,k,delta,epsilon,mean_steps,steps_per_node,mean_bits_per_step,wall_ms";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.3}\n",
                r.family,
                r.n,
                r.k,
                r.delta,
                potential::format_rational(&r.epsilon),
                r.mean_steps,
                r.steps_per_node,
                r.mean_bits_per_step,
                r.wall_ms
            ));
        }
        out
    }
}

fn ceil_log2(k: u32) -> u32 {
    if k <= 1 {
        0
    } else {
        32 - (k - 1).leading_zeros()
    }
}

/// Mean steps, steps per node and bits per step for each size in `sizes`,
/// `reps` runs each (seeds `seed + i`; random graphs are drawn once per
/// size from `seed`).
pub fn scaling_bench(
    family: BenchFamily,
    sizes: &[usize],
    k: u32,
    reps: u64,
    seed: u64,
    options: &SamplerOptions,
) -> Result<BenchReport, VerificationError> {
    let mut rows = Vec::new();
    if reps > 0 {
        for &n in sizes {
            let graph = family.build(n, seed)?;
            let delta = graph.max_degree();
            let epsilon = potential::epsilon_bound(k, delta.max(1))?;
            let start = Instant::now();
            let runs = rr::sample_batch(&graph, k, seed, reps, options);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut steps = 0u64;
            let mut bits = 0u64;
            for run in runs {
                let (_, metrics) = run?;
                steps += metrics.total_steps;
                bits += metrics.random_bits;
            }
            let mean_steps = steps as f64 / reps as f64;
            let mean_bits_per_step = if steps == 0 {
                0.0
            } else {
                bits as f64 / steps as f64
            };
            let step_bound = (epsilon > Rational::from_integer(0)).then(|| {
                potential::rational_to_f64(&(Rational::from_integer(n as i128) / epsilon))
            });
            let bits_ceiling = 64.0 * (delta as f64 + 2.0) * f64::from(ceil_log2(k));
            rows.push(BenchRow {
                family: family.to_string(),
                n,
                k,
                delta,
                epsilon,
                reps,
                mean_steps,
                steps_per_node: mean_steps / n as f64,
                mean_bits_per_step,
                wall_ms,
                within_step_bound: step_bound.is_some_and(|b| mean_steps <= b),
                step_bound,
                within_bits_ceiling: mean_bits_per_step <= bits_ceiling,
                bits_ceiling,
            });
        }
    }
    let smallest = rows.iter().min_by_key(|r| r.n);
    let largest = rows.iter().max_by_key(|r| r.n);
    let trend_ratio = match (smallest, largest) {
        (Some(s), Some(l)) if s.steps_per_node > 0.0 => Some(l.steps_per_node / s.steps_per_node),
        _ => None,
    };
    let trend_passed = trend_ratio.is_none_or(|r| r <= TREND_TOLERANCE);
    let passed = trend_passed
        && rows
            .iter()
            .all(|r| r.within_step_bound && r.within_bits_ceiling);
    Ok(BenchReport {
        seed,
        rows,
        trend_ratio,
        trend_passed,
        passed,
    })
}

/// One procedure applied once to a uniform member of a fixed index.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub name: String,
    pub graph: Graph,
    pub k: u32,
    pub index: IndexState,
    pub node: usize,
    pub kind: StepKind,
    pub samples: u64,
    pub group_freeze: GroupFreeze,
}

impl OracleConfig {
    pub fn new(
        name: &str,
        graph: Graph,
        k: u32,
        index: Vec<IndexEntry>,
        node: usize,
        samples: u64,
    ) -> Self {
        let index = IndexState::from_entries(index);
        let kind = match index.entry(node) {
            IndexEntry::Forbidden(_) => StepKind::RemoveForbidden,
            IndexEntry::Frozen(_) => StepKind::RemoveFrozen,
            IndexEntry::Ignored => StepKind::RemoveIgnored,
            IndexEntry::Unrestricted => StepKind::Done,
        };
        Self {
            name: name.to_owned(),
            graph,
            k,
            index,
            node,
            kind,
            samples,
            group_freeze: GroupFreeze::default(),
        }
    }

    pub fn with_group_freeze(mut self, rule: GroupFreeze) -> Self {
        self.group_freeze = rule;
        self
    }
}

/// Fixed configurations covering every exit of every procedure.
pub fn standard_oracle_configs() -> Vec<OracleConfig> {
    use IndexEntry::*;
    let path3 = Graph::path(3).expect("path");
    let claw = Graph::star(3).expect("star");
    vec![
        OracleConfig::new(
            "ignored end of a path",
            path3.clone(),
            4,
            vec![Ignored, Unrestricted, Unrestricted],
            0,
            200_000,
        ),
        OracleConfig::new(
            "ignored middle of a path",
            path3.clone(),
            3,
            vec![Unrestricted, Ignored, Unrestricted],
            1,
            200_000,
        ),
        OracleConfig::new(
            "frozen end of a path",
            path3.clone(),
            4,
            vec![Frozen(2), Unrestricted, Ignored],
            0,
            200_000,
        ),
        OracleConfig::new(
            "frozen center of a claw",
            claw.clone(),
            3,
            vec![Frozen(1), Unrestricted, Frozen(1), Ignored],
            0,
            200_000,
        ),
        OracleConfig::new(
            "forbidden center, open leaves, 13 colors",
            claw.clone(),
            13,
            vec![Forbidden(13), Unrestricted, Unrestricted, Unrestricted],
            0,
            800_000,
        ),
        OracleConfig::new(
            "forbidden center, open leaves, 4 colors",
            claw.clone(),
            4,
            vec![Forbidden(4), Unrestricted, Unrestricted, Unrestricted],
            0,
            400_000,
        ),
        OracleConfig::new(
            "forbidden center, frozen and open leaves",
            claw.clone(),
            5,
            vec![Forbidden(5), Frozen(1), Unrestricted, Unrestricted],
            0,
            400_000,
        ),
        OracleConfig::new(
            "forbidden center, forbidden and ignored leaves",
            claw.clone(),
            4,
            vec![Forbidden(3), Forbidden(3), Unrestricted, Ignored],
            0,
            400_000,
        ),
        OracleConfig::new(
            "forbidden center, too few colors",
            claw.clone(),
            3,
            vec![Forbidden(3), Unrestricted, Unrestricted, Unrestricted],
            0,
            50_000,
        ),
        OracleConfig::new(
            "forbidden end of a path",
            path3.clone(),
            4,
            vec![Forbidden(2), Unrestricted, Frozen(3)],
            0,
            200_000,
        ),
        OracleConfig::new(
            "forbidden middle beside its color frozen",
            path3,
            4,
            vec![Unrestricted, Forbidden(2), Frozen(2)],
            1,
            50_000,
        ),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleBucket {
    /// Output index, written as signed codes with `_` for unrestricted.
    pub index: String,
    pub observed: u64,
    pub support_size: usize,
    /// Chi-square over every member of the output index; absent when the
    /// bucket is too small for the test.
    pub chi_square: Option<ChiSquareReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub samples: u64,
    pub input_support: usize,
    pub branches: BTreeMap<&'static str, u64>,
    pub buckets: Vec<OracleBucket>,
    pub membership_violations: u64,
    pub tested_buckets: usize,
    pub min_p_value: Option<f64>,
    pub passed: bool,
}

/// Draws the input uniformly from the members of the configured index,
/// applies one procedure, and checks that within each output index the
/// output coloring is a uniform member of that index.
pub fn procedure_oracle_test(
    config: &OracleConfig,
    seed: u64,
) -> Result<OracleReport, VerificationError> {
    let g = &config.graph;
    let inputs =
        state::enumerate_members(&config.index, g, config.k, state::DEFAULT_ENUMERATION_CAP)?;
    if inputs.is_empty() {
        return Err(VerificationError::EmptyIndex(config.index.to_string()));
    }
    let mut rng = BitSource::new(seed);
    let mut buckets: BTreeMap<Vec<IndexEntry>, (IndexState, HashMap<Coloring, u64>)> =
        BTreeMap::new();
    let mut branches: BTreeMap<&'static str, u64> = Branch::ALL
        .iter()
        .filter(|b| b.kind() == config.kind)
        .map(|b| (b.name(), 0))
        .collect();
    for _ in 0..config.samples {
        let x = inputs[rng.uniform_index(inputs.len())].clone();
        let mut sampler =
            Sampler::from_parts(g, x, config.index.clone()).with_group_freeze(config.group_freeze);
        let out = sampler.step_at(config.node, config.kind, &mut rng);
        *branches.entry(out.branch.name()).or_default() += 1;
        let (y, ys) = sampler.into_parts();
        let bucket = buckets
            .entry(ys.entries().to_vec())
            .or_insert_with(|| (ys, HashMap::new()));
        *bucket.1.entry(y).or_default() += 1;
    }

    let mut membership_violations = 0;
    let mut reports = Vec::new();
    for (ys, hits) in buckets.into_values() {
        for (y, &count) in &hits {
            if !state::is_member(y, &ys, g) {
                membership_violations += count;
            }
        }
        let support = state::enumerate_members(&ys, g, config.k, state::DEFAULT_ENUMERATION_CAP)?;
        let observed: u64 = hits.values().sum();
        let chi_square = (!support.is_empty()
            && observed as f64 / support.len() as f64 >= MIN_EXPECTED_PER_CELL)
            .then(|| {
                let counts: Vec<u64> = support
                    .iter()
                    .map(|y| hits.get(y).copied().unwrap_or(0))
                    .collect();
                stats::chi_square_uniform(&counts)
            });
        reports.push(OracleBucket {
            index: ys.to_string(),
            observed,
            support_size: support.len(),
            chi_square,
        });
    }
    let p_values: Vec<f64> = reports
        .iter()
        .filter_map(|b| b.chi_square.map(|c| c.p_value))
        .collect();
    let min_p_value = p_values.iter().copied().reduce(f64::min);
    Ok(OracleReport {
        name: config.name.clone(),
        samples: config.samples,
        input_support: inputs.len(),
        branches,
        tested_buckets: p_values.len(),
        passed: membership_violations == 0 && min_p_value.is_some_and(|p| p > SIGNIFICANCE),
        membership_violations,
        buckets: reports,
        min_p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use IndexEntry::*;

    #[test]
    fn two_node_path_two_colors_is_uniform() {
        let g = Graph::path(2).unwrap();
        let report = uniformity_test(&g, 2, 4000, 3, &SamplerOptions::default()).unwrap();
        assert_eq!(report.support_size, 2);
        assert_eq!(report.counts.iter().sum::<u64>(), 4000);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn runs_with_restarts_stay_uniform() {
        let g = Graph::grid(3, 3).unwrap();
        let report = uniformity_test(&g, 3, 25_000, 8, &SamplerOptions::default()).unwrap();
        let batch = rr::sample_batch(&g, 3, 8, 200, &SamplerOptions::default());
        assert!(
            batch
                .iter()
                .map(|r| r.as_ref().unwrap().1.restarts)
                .sum::<u64>()
                > 0
        );
        assert_eq!(report.support_size, 246);
        assert!(report.passed, "{:?}", report.chi_square);
    }

    #[test]
    fn odd_cycle_with_two_colors_has_no_support() {
        let g = Graph::complete(3).unwrap();
        let err = uniformity_test(&g, 2, 10, 0, &SamplerOptions::default()).unwrap_err();
        assert!(matches!(err, VerificationError::NoProperColorings(2)));
    }

    #[test]
    fn single_node_drift_is_minus_one() {
        let g = Graph::path(1).unwrap();
        let report = drift_experiment(&g, 5, 50, 0).unwrap();
        assert_eq!(report.runs, 50);
        assert_eq!(report.overall.mean, -1.0);
        assert_eq!(report.overall.stderr, 0.0);
        assert!(report.passed);
    }

    #[test]
    fn drift_is_deterministic() {
        let g = Graph::cycle(8).unwrap();
        let a = drift_experiment(&g, 13, 2000, 11).unwrap();
        let b = drift_experiment(&g, 13, 2000, 11).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn drift_rejects_small_alpha() {
        let g = Graph::cycle(8).unwrap();
        assert!(matches!(
            drift_experiment(&g, 4, 10, 0),
            Err(VerificationError::NonPositiveEpsilon(..))
        ));
    }

    #[test]
    fn zero_reps_give_an_empty_table() {
        let report = scaling_bench(
            BenchFamily::Cycle,
            &[16, 32],
            13,
            0,
            1,
            &SamplerOptions::default(),
        )
        .unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.to_csv(), format!("{BENCH_CSV_HEADER}\n"));
    }

    #[test]
    fn bench_is_reproducible_apart_from_wall_time() {
        let family = BenchFamily::RandomRegular(3);
        let options = SamplerOptions::default();
        let a = scaling_bench(family, &[16, 32], 13, 10, 4, &options).unwrap();
        let b = scaling_bench(family, &[16, 32], 13, 10, 4, &options).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(
                (x.mean_steps, x.mean_bits_per_step, x.delta),
                (y.mean_steps, y.mean_bits_per_step, y.delta)
            );
        }
    }

    #[test]
    fn bench_family_syntax() {
        assert_eq!("cycle".parse(), Ok(BenchFamily::Cycle));
        assert_eq!(
            "random_regular:3".parse(),
            Ok(BenchFamily::RandomRegular(3))
        );
        assert!("grid".parse::<BenchFamily>().is_err());
        assert_eq!(
            BenchFamily::RandomRegular(3).to_string(),
            "random_regular:3"
        );
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(
            [1, 2, 3, 4, 5, 13, 16, 17].map(ceil_log2),
            [0, 1, 2, 2, 3, 4, 4, 5]
        );
    }

    #[test]
    fn oracle_on_ignored_path_end() {
        let cfg = OracleConfig::new(
            "t",
            Graph::path(3).unwrap(),
            4,
            vec![Ignored, Unrestricted, Unrestricted],
            0,
            60_000,
        );
        let report = procedure_oracle_test(&cfg, 5).unwrap();
        assert_eq!(report.membership_violations, 0);
        assert!(report.passed, "{report:#?}");
        assert!(report.branches["ignored_accepted"] > 0);
        assert!(report.branches["ignored_conflict_search"] > 0);
    }

    #[test]
    fn index_only_group_freeze_breaks_membership() {
        let claw = Graph::star(3).unwrap();
        let cfg = OracleConfig::new(
            "t",
            claw,
            4,
            vec![Forbidden(4), Unrestricted, Unrestricted, Unrestricted],
            0,
            20_000,
        )
        .with_group_freeze(GroupFreeze::IndexOnly);
        let report = procedure_oracle_test(&cfg, 1).unwrap();
        assert!(report.membership_violations > 0);
        assert!(!report.passed);
    }

    #[test]
    fn freezing_at_forbidden_color_is_biased() {
        let claw = Graph::star(3).unwrap();
        let cfg = OracleConfig::new(
            "t",
            claw,
            4,
            vec![Forbidden(4), Unrestricted, Unrestricted, Unrestricted],
            0,
            200_000,
        )
        .with_group_freeze(GroupFreeze::ForbiddenColor);
        let report = procedure_oracle_test(&cfg, 1).unwrap();
        assert_eq!(report.membership_violations, 0);
        assert!(report.min_p_value.unwrap() < 1e-6, "{report:#?}");
    }
}
