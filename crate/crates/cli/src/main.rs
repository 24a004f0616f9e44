use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrcolor::graph::{GeneratorSpec, Graph};
use rrcolor::potential::{self, PotentialParams};
use rrcolor::rr::{self, RunMetrics, SampleError, SamplerOptions};
use rrcolor::state;
use rrcolor::verification::{self, BenchFamily};
use serde::Serialize;
use serde_json::json;

const SCHEMA_VERSION: u32 = 1;

/// Exact uniform sampling of proper graph colorings.
#[derive(Debug, Parser)]
#[command(name = "rrcolor", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw uniform proper colorings.
    Sample {
        #[command(flatten)]
        common: GraphArgs,
        /// Number of independent samples; sample i uses seed + i.
        #[arg(long, default_value_t = 1)]
        samples: u64,
        /// Include the potential after every step.
        #[arg(long)]
        trace_potential: bool,
    },
    /// List every proper coloring (small graphs only).
    Enumerate {
        #[command(flatten)]
        common: GraphArgs,
    },
    /// Chi-square test of sampled colorings against the enumerated support.
    Verify {
        #[command(flatten)]
        common: GraphArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Per-step change of the potential, against the drift bound.
    Drift {
        #[command(flatten)]
        common: GraphArgs,
        /// Minimum number of steps to record, over as many runs as needed.
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
    },
    /// Mean steps and random bits across graph sizes.
    Bench {
        /// `cycle` or `random_regular:<d>`.
        #[arg(long, default_value = "cycle")]
        family: BenchFamily,
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
        sizes: Vec<usize>,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        colors: u32,
        #[arg(long, default_value_t = 10)]
        reps: u64,
        #[arg(long, default_value = "0", value_parser = parse_seed)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        step_cap: Option<u64>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct GraphSource {
    /// DIMACS edge file.
    #[arg(long)]
    graph: Option<String>,
    /// Generator spec such as `cycle:8`, `grid:4,5` or `random_regular:50,3`.
    #[arg(long)]
    generate: Option<GeneratorSpec>,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    colors: u32,
    /// Decimal or 0x-prefixed hexadecimal.
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Steps allowed per run before giving up (default 10^6 per node).
    #[arg(long)]
    step_cap: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

enum Failure {
    Usage(String),
    Budget(String),
    CheckFailed(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Budget(_) => 2,
            Failure::CheckFailed(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Budget(m) | Failure::CheckFailed(m) => m,
        }
    }
}

impl From<verification::VerificationError> for Failure {
    fn from(e: verification::VerificationError) -> Self {
        match e {
            verification::VerificationError::Sample(e) => sample_failure(e),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn sample_failure(e: SampleError) -> Failure {
    match e {
        SampleError::BudgetExceeded { .. } => Failure::Budget(e.to_string()),
        SampleError::TooFewColors(_) => Failure::Usage(e.to_string()),
    }
}

struct LoadedGraph {
    graph: Graph,
    source: String,
}

impl GraphArgs {
    fn load(&self) -> Result<LoadedGraph, Failure> {
        let (graph, source) = match (&self.source.graph, &self.source.generate) {
            (Some(path), None) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?;
                let graph = Graph::parse_dimacs(&text)
                    .map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
                (graph, path.clone())
            }
            (None, Some(spec)) => {
                let graph =
                    Graph::generate(spec, self.seed).map_err(|e| Failure::Usage(e.to_string()))?;
                (graph, spec.to_string())
            }
            _ => unreachable!("clap enforces exactly one graph source"),
        };
        Ok(LoadedGraph { graph, source })
    }

    fn options(&self) -> SamplerOptions {
        SamplerOptions {
            step_cap: self.step_cap,
            ..Default::default()
        }
    }

    fn json_header(
        &self,
        command: &str,
        g: &LoadedGraph,
    ) -> serde_json::Map<String, serde_json::Value> {
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "graph": {
                "source": g.source,
                "nodes": g.graph.node_count(),
                "edges": g.graph.edge_count(),
                "max_degree": g.graph.max_degree(),
            },
            "k": self.colors,
            "seed": self.seed,
        });
        match value {
            serde_json::Value::Object(map) => map,
            _ => unreachable!(),
        }
    }
}

fn warn_outside_guarantee(graph: &Graph, k: u32) {
    let d = graph.max_degree();
    if !potential::guarantee_applies(k, d) {
        eprintln!(
            "warning: (k-1)/max_degree = {}/{d} does not exceed (7+sqrt(57))/4 ~ 3.637; \
             the linear expected running time is not guaranteed",
            k.saturating_sub(1)
        );
    }
}

fn reject_format(format: Format, command: &str) -> Result<(), Failure> {
    if format == Format::Csv {
        return Err(Failure::Usage(format!(
            "--format csv is only available for bench, not {command}"
        )));
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn metrics_json(metrics: &RunMetrics) -> serde_json::Value {
    let mut value = serde_json::to_value(metrics).expect("metrics serialize");
    if let Some(trace) = &metrics.potential_trace {
        let trace: Vec<_> = trace
            .iter()
            .map(|(step, phi)| json!([step, potential::format_rational(phi)]))
            .collect();
        value["potential_trace"] = json!(trace);
    }
    value
}

fn run_sample(common: &GraphArgs, samples: u64, trace_potential: bool) -> Result<String, Failure> {
    reject_format(common.format, "sample")?;
    let g = common.load()?;
    warn_outside_guarantee(&g.graph, common.colors);
    let options = SamplerOptions {
        trace_potential,
        ..common.options()
    };
    let runs = rr::sample_batch(&g.graph, common.colors, common.seed, samples, &options)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(sample_failure)?;
    Ok(match common.format {
        Format::Json => {
            let mut out = common.json_header("sample", &g);
            let items: Vec<_> = runs
                .iter()
                .enumerate()
                .map(|(i, (x, m))| {
                    json!({
                        "seed": common.seed.wrapping_add(i as u64),
                        "coloring": x.as_slice(),
                        "proper": x.is_proper(&g.graph),
                        "metrics": metrics_json(m),
                    })
                })
                .collect();
            out.insert("samples".into(), json!(items));
            to_json(&out)
        }
        _ => {
            let mut out = String::new();
            for (i, (x, m)) in runs.iter().enumerate() {
                out.push_str(&format!(
                    "# sample {i} seed {} steps {} bits {}\n",
                    common.seed.wrapping_add(i as u64),
                    m.total_steps,
                    m.random_bits
                ));
                out.push_str(&x.to_text());
            }
            out
        }
    })
}

fn run_enumerate(common: &GraphArgs) -> Result<String, Failure> {
    reject_format(common.format, "enumerate")?;
    let g = common.load()?;
    let all = state::enumerate_proper(&g.graph, common.colors, state::DEFAULT_ENUMERATION_CAP)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(match common.format {
        Format::Json => {
            let mut out = common.json_header("enumerate", &g);
            out.insert("count".into(), json!(all.len()));
            out.insert(
                "colorings".into(),
                json!(all.iter().map(|x| x.as_slice()).collect::<Vec<_>>()),
            );
            to_json(&out)
        }
        _ => {
            let mut out = format!("# {} proper colorings\n", all.len());
            for x in &all {
                let colors: Vec<String> = x.as_slice().iter().map(|c| c.to_string()).collect();
                out.push_str(&colors.join(" "));
                out.push('\n');
            }
            out
        }
    })
}

fn run_verify(common: &GraphArgs, samples: u64) -> Result<String, Failure> {
    reject_format(common.format, "verify")?;
    let g = common.load()?;
    warn_outside_guarantee(&g.graph, common.colors);
    let report = verification::uniformity_test(
        &g.graph,
        common.colors,
        samples,
        common.seed,
        &common.options(),
    )?;
    let text = match common.format {
        Format::Json => {
            let mut out = common.json_header("verify", &g);
            out.insert("report".into(), serde_json::to_value(&report).expect("report serializes"));
            to_json(&out)
        }
        _ => format!(
            "support {}\nsamples {}\nchi_square {:.6}\ndegrees_of_freedom {}\np_value {:.6}\nmean_steps {:.3}\n{}\n",
            report.support_size,
            report.samples,
            report.chi_square.statistic,
            report.chi_square.degrees_of_freedom,
            report.chi_square.p_value,
            report.mean_steps,
            if report.passed { "PASS" } else { "FAIL" }
        ),
    };
    finish(text, report.passed, "uniformity rejected")
}

fn run_drift(common: &GraphArgs, steps: u64) -> Result<String, Failure> {
    reject_format(common.format, "drift")?;
    let g = common.load()?;
    warn_outside_guarantee(&g.graph, common.colors);
    let report = verification::drift_experiment(&g.graph, common.colors, steps, common.seed)?;
    let text = match common.format {
        Format::Json => {
            let mut out = common.json_header("drift", &g);
            out.insert(
                "report".into(),
                serde_json::to_value(&report).expect("report serializes"),
            );
            to_json(&out)
        }
        _ => {
            let mut out = format!(
                "epsilon {}\nsteps {}\nruns {}\nmean_change {:.6}\nstderr {:.6}\n",
                potential::format_rational(&report.params.epsilon),
                report.overall.count,
                report.runs,
                report.overall.mean,
                report.overall.stderr
            );
            for (branch, e) in &report.by_branch {
                out.push_str(&format!(
                    "branch {branch} count {} mean {:.6} stderr {:.6}\n",
                    e.count, e.mean, e.stderr
                ));
            }
            out.push_str(if report.passed { "PASS\n" } else { "FAIL\n" });
            out
        }
    };
    finish(text, report.passed, "drift bound exceeded")
}

fn run_bench(
    family: BenchFamily,
    sizes: &[usize],
    colors: u32,
    reps: u64,
    seed: u64,
    format: Format,
    step_cap: Option<u64>,
) -> Result<String, Failure> {
    if let Some(&n) = sizes.iter().find(|&&n| n < 3) {
        return Err(Failure::Usage(format!(
            "bench sizes must be at least 3, got {n}"
        )));
    }
    let probe = family
        .build(sizes.first().copied().unwrap_or(3), seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if PotentialParams::new(colors, probe.max_degree().max(1))
        .map_or(true, |p| !p.epsilon_positive())
    {
        eprintln!(
            "warning: epsilon is not positive for k={colors}, max degree={}; no step bound applies",
            probe.max_degree()
        );
    }
    let options = SamplerOptions {
        step_cap,
        ..Default::default()
    };
    let report = verification::scaling_bench(family, sizes, colors, reps, seed, &options)?;
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "bench",
            "report": report,
        })),
        Format::Text => {
            let mut out = String::new();
            for r in &report.rows {
                out.push_str(&format!(
                    "{} n={} k={} delta={} epsilon={} mean_steps={:.2} steps/n={:.4} bits/step={:.2}\n",
                    r.family,
                    r.n,
                    r.k,
                    r.delta,
                    potential::format_rational(&r.epsilon),
                    r.mean_steps,
                    r.steps_per_node,
                    r.mean_bits_per_step
                ));
            }
            out.push_str(if report.passed { "PASS\n" } else { "FAIL\n" });
            out
        }
    };
    Ok(text)
}

fn finish(text: String, passed: bool, what: &str) -> Result<String, Failure> {
    if passed {
        Ok(text)
    } else {
        print!("{text}");
        Err(Failure::CheckFailed(what.into()))
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Sample {
            common,
            samples,
            trace_potential,
        } => run_sample(common, *samples, *trace_potential),
        Command::Enumerate { common } => run_enumerate(common),
        Command::Verify { common, samples } => run_verify(common, *samples),
        Command::Drift { common, steps } => run_drift(common, *steps),
        Command::Bench {
            family,
            sizes,
            colors,
            reps,
            seed,
            format,
            step_cap,
        } => run_bench(*family, sizes, *colors, *reps, *seed, *format, *step_cap),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
