//! Static undirected simple graphs: construction, DIMACS parsing and
//! deterministic generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Undirected simple graph in compressed adjacency form. Node ids are dense
/// and 0-based; each adjacency list is sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    max_degree: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("a graph needs at least one node")]
    Empty,
    #[error("node {node} is out of range for a graph on {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl Graph {
    /// Builds a graph from 0-based edges. Duplicate edges (in either
    /// orientation) collapse; self-loops and out-of-range ids are rejected.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut lists = vec![Vec::new(); node_count];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange {
                        node,
                        nodes: node_count,
                    });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut neighbors = Vec::new();
        let mut max_degree = 0;
        offsets.push(0);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            max_degree = max_degree.max(list.len());
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        Ok(Self {
            offsets,
            neighbors,
            max_degree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.node_count()
    }

    /// Each edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Checks symmetry, simplicity and the degree bookkeeping.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut max = 0;
        for v in self.nodes() {
            let list = self.neighbors(v);
            max = max.max(list.len());
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {v} is not strictly sorted"));
            }
            for &u in list {
                if u == v {
                    return Err(format!("self-loop at {v}"));
                }
                if !self.has_edge(u, v) {
                    return Err(format!("edge {v}-{u} is not symmetric"));
                }
            }
        }
        if max != self.max_degree {
            return Err(format!(
                "max degree {} recorded, {} actual",
                self.max_degree, max
            ));
        }
        Ok(())
    }

    /// Parses the line-oriented DIMACS edge format (1-based node ids).
    pub fn parse_dimacs(text: &str) -> Result<Self, ParseError> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ParseError { line, message };
            let mut tokens = raw.split_whitespace();
            let Some(tag) = tokens.next() else { continue };
            match tag {
                "c" => continue,
                "p" => {
                    if header.is_some() {
                        return Err(err("duplicate problem line".into()));
                    }
                    let format = tokens
                        .next()
                        .ok_or_else(|| err("missing format in problem line".into()))?;
                    if format != "edge" && format != "col" {
                        return Err(err(format!("unsupported problem format {format:?}")));
                    }
                    let n = parse_count(tokens.next(), "node count").map_err(err)?;
                    let m = parse_count(tokens.next(), "edge count").map_err(err)?;
                    if n == 0 {
                        return Err(err("node count must be positive".into()));
                    }
                    if tokens.next().is_some() {
                        return Err(err("trailing tokens in problem line".into()));
                    }
                    header = Some((n, m));
                }
                "e" => {
                    let (n, _) = header.ok_or_else(|| err("edge before problem line".into()))?;
                    let u = parse_count(tokens.next(), "edge endpoint").map_err(err)?;
                    let v = parse_count(tokens.next(), "edge endpoint").map_err(err)?;
                    if tokens.next().is_some() {
                        return Err(err("trailing tokens in edge line".into()));
                    }
                    for node in [u, v] {
                        if node == 0 || node > n {
                            return Err(err(format!("node {node} out of range 1..={n}")));
                        }
                    }
                    if u == v {
                        return Err(err(format!("self-loop at node {u}")));
                    }
                    edges.push((u - 1, v - 1));
                }
                other => return Err(err(format!("unknown line type {other:?}"))),
            }
        }
        let (n, _) = header.ok_or(ParseError {
            line: 0,
            message: "missing problem line".into(),
        })?;
        Graph::from_edges(n, edges).map_err(|e| ParseError {
            line: 0,
            message: e.to_string(),
        })
    }

    /// Renders the graph in the DIMACS edge format.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p edge {} {}\n", self.node_count(), self.edge_count());
        for (u, v) in self.edges() {
            out.push_str(&format!("e {} {}\n", u + 1, v + 1));
        }
        out
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::Infeasible(format!(
                "a cycle needs at least 3 nodes, got {n}"
            )));
        }
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    pub fn star(leaves: usize) -> Result<Self, GraphError> {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v)))
    }

    pub fn grid(rows: usize, cols: usize) -> Result<Self, GraphError> {
        if rows == 0 || cols == 0 {
            return Err(GraphError::Infeasible(format!(
                "grid {rows}x{cols} is empty"
            )));
        }
        let id = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Graph::from_edges(rows * cols, edges)
    }

    /// Random `degree`-regular graph from the pairing (configuration) model.
    /// Any pairing with a self-loop or a repeated edge is discarded whole and
    /// redrawn. Deterministic in `seed`.
    pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Self, GraphError> {
        const MAX_ATTEMPTS: usize = 1_000_000;
        if n == 0 || degree >= n || !(n * degree).is_multiple_of(2) {
            return Err(GraphError::Infeasible(format!(
                "random_regular needs d < n and n*d even (n={n}, d={degree})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Stream 1 keeps generator draws disjoint from a sampler seeded alike.
        rng.set_stream(1);
        let mut points: Vec<usize> = (0..n * degree).map(|p| p / degree).collect();
        let mut seen = std::collections::HashSet::new();
        'attempt: for _ in 0..MAX_ATTEMPTS {
            points.shuffle(&mut rng);
            seen.clear();
            for pair in points.chunks_exact(2) {
                let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if u == v || !seen.insert((u, v)) {
                    continue 'attempt;
                }
            }
            return Graph::from_edges(n, seen.iter().copied());
        }
        Err(GraphError::Infeasible(format!(
            "no simple pairing found for n={n}, d={degree} in {MAX_ATTEMPTS} attempts"
        )))
    }

    pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Self, GraphError> {
        match *spec {
            GeneratorSpec::Cycle(n) => Graph::cycle(n),
            GeneratorSpec::Path(n) => Graph::path(n),
            GeneratorSpec::Complete(n) => Graph::complete(n),
            GeneratorSpec::Star(leaves) => Graph::star(leaves),
            GeneratorSpec::Grid(rows, cols) => Graph::grid(rows, cols),
            GeneratorSpec::RandomRegular(n, d) => Graph::random_regular(n, d, seed),
        }
    }
}

fn parse_count(token: Option<&str>, what: &str) -> Result<usize, String> {
    let token = token.ok_or_else(|| format!("missing {what}"))?;
    token
        .parse()
        .map_err(|_| format!("invalid {what} {token:?}"))
}

/// Generator family plus parameters, written `kind:param[,param]`
/// (for example `cycle:8`, `grid:4,5`, `random_regular:50,3`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorSpec {
    Cycle(usize),
    Path(usize),
    Complete(usize),
    Star(usize),
    Grid(usize, usize),
    RandomRegular(usize, usize),
}

impl GeneratorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::Cycle(_) => "cycle",
            GeneratorSpec::Path(_) => "path",
            GeneratorSpec::Complete(_) => "complete",
            GeneratorSpec::Star(_) => "star",
            GeneratorSpec::Grid(..) => "grid",
            GeneratorSpec::RandomRegular(..) => "random_regular",
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, params) = s
            .split_once(':')
            .ok_or_else(|| format!("expected kind:params, got {s:?}"))?;
        let params: Vec<usize> = params
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| format!("invalid parameter {p:?} in {s:?}"))
            })
            .collect::<Result<_, _>>()?;
        let arity = |want: usize| {
            if params.len() == want {
                Ok(())
            } else {
                Err(format!(
                    "{kind} takes {want} parameter(s), got {}",
                    params.len()
                ))
            }
        };
        match kind {
            "cycle" => arity(1).map(|_| GeneratorSpec::Cycle(params[0])),
            "path" => arity(1).map(|_| GeneratorSpec::Path(params[0])),
            "complete" => arity(1).map(|_| GeneratorSpec::Complete(params[0])),
            "star" => arity(1).map(|_| GeneratorSpec::Star(params[0])),
            "grid" => arity(2).map(|_| GeneratorSpec::Grid(params[0], params[1])),
            "random_regular" => {
                arity(2).map(|_| GeneratorSpec::RandomRegular(params[0], params[1]))
            }
            other => Err(format!("unknown generator {other:?}")),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GeneratorSpec::Cycle(n)
            | GeneratorSpec::Path(n)
            | GeneratorSpec::Complete(n)
            | GeneratorSpec::Star(n) => write!(f, "{}:{n}", self.kind()),
            GeneratorSpec::Grid(a, b) | GeneratorSpec::RandomRegular(a, b) => {
                write!(f, "{}:{a},{b}", self.kind())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_triangle() {
        let g = Graph::parse_dimacs("c a triangle\np edge 3 3\ne 1 2\ne 2 3\ne 1 3\n").unwrap();
        assert_eq!(g, Graph::complete(3).unwrap());
        assert_eq!(g.max_degree(), 2);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn parses_single_edge_with_crlf() {
        let g = Graph::parse_dimacs("p edge 2 1\r\ne 1 2\r\n").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.max_degree(), 1);
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let once = Graph::parse_dimacs("p edge 2 1\ne 1 2\n").unwrap();
        let twice = Graph::parse_dimacs("p edge 2 2\ne 1 2\ne 1 2\ne 2 1\n").unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let cases = [
            ("p edge 3\n", 1),
            ("p edge 3 1\ne 1 4\n", 2),
            ("p edge 3 1\nc ok\ne 2 2\n", 3),
            ("e 1 2\n", 1),
            ("p edge 3 1\ne 1 x\n", 2),
            ("p edge 0 0\n", 1),
            ("p edge 2 1\np edge 2 1\n", 2),
            ("q 1 2\n", 1),
        ];
        for (text, line) in cases {
            let err = Graph::parse_dimacs(text).unwrap_err();
            assert_eq!(err.line, line, "{text:?}: {err}");
        }
        assert_eq!(Graph::parse_dimacs("c nothing\n").unwrap_err().line, 0);
    }

    #[test]
    fn dimacs_round_trip() {
        let g = Graph::grid(3, 4).unwrap();
        assert_eq!(Graph::parse_dimacs(&g.to_dimacs()).unwrap(), g);
    }

    #[test]
    fn small_families() {
        let c4 = Graph::cycle(4).unwrap();
        assert_eq!(
            (c4.node_count(), c4.edge_count(), c4.max_degree()),
            (4, 4, 2)
        );
        let k4 = Graph::complete(4).unwrap();
        assert_eq!((k4.edge_count(), k4.max_degree()), (6, 3));
        let p1 = Graph::path(1).unwrap();
        assert_eq!((p1.edge_count(), p1.max_degree()), (0, 0));
        let grid = Graph::grid(4, 5).unwrap();
        assert_eq!(
            (grid.node_count(), grid.edge_count(), grid.max_degree()),
            (20, 31, 4)
        );
        let star = Graph::star(3).unwrap();
        assert_eq!((star.degree(0), star.max_degree()), (3, 3));
        for g in [c4, k4, p1, grid, star] {
            g.check_invariants().unwrap();
        }
    }

    #[test]
    fn infeasible_parameters() {
        assert!(Graph::cycle(2).is_err());
        assert!(Graph::path(0).is_err());
        assert!(Graph::random_regular(5, 3, 1).is_err());
        assert!(Graph::random_regular(4, 4, 1).is_err());
        assert!(Graph::grid(0, 3).is_err());
        assert_eq!(
            Graph::from_edges(2, [(0, 2)]),
            Err(GraphError::NodeOutOfRange { node: 2, nodes: 2 })
        );
        assert_eq!(Graph::from_edges(2, [(1, 1)]), Err(GraphError::SelfLoop(1)));
    }

    #[test]
    fn random_regular_is_regular_and_deterministic() {
        let a = Graph::random_regular(8, 3, 1).unwrap();
        let b = Graph::random_regular(8, 3, 1).unwrap();
        assert_eq!(a, b);
        a.check_invariants().unwrap();
        assert!(a.nodes().all(|v| a.degree(v) == 3));
        let big = Graph::random_regular(256, 3, 42).unwrap();
        assert!(big.nodes().all(|v| big.degree(v) == 3));
        assert_ne!(Graph::random_regular(256, 3, 43).unwrap(), big);
    }

    #[test]
    fn generator_spec_syntax() {
        for text in [
            "cycle:8",
            "path:3",
            "complete:4",
            "star:3",
            "grid:4,5",
            "random_regular:50,3",
        ] {
            let spec: GeneratorSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!(
            "grid:4, 5".parse::<GeneratorSpec>(),
            Ok(GeneratorSpec::Grid(4, 5))
        );
        for bad in [
            "cycle", "cycle:", "grid:4", "wheel:5", "cycle:-1", "path:1,2",
        ] {
            assert!(bad.parse::<GeneratorSpec>().is_err(), "{bad}");
        }
    }

    proptest::proptest! {
        #[test]
        fn edge_lists_build_valid_graphs(
            n in 1usize..12,
            raw in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|&(u, v)| u < n && v < n && u != v).collect();
            let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
            proptest::prop_assert!(g.check_invariants().is_ok());
            for &(u, v) in &edges {
                proptest::prop_assert!(g.has_edge(u, v) && g.has_edge(v, u));
            }
            proptest::prop_assert_eq!(Graph::parse_dimacs(&g.to_dimacs()).unwrap(), g);
        }

        #[test]
        fn random_regular_invariants(half in 3usize..20, d in 1usize..4, seed in 0u64..1000) {
            let n = 2 * half;
            let g = Graph::random_regular(n, d, seed).unwrap();
            proptest::prop_assert!(g.check_invariants().is_ok());
            proptest::prop_assert!(g.nodes().all(|v| g.degree(v) == d));
        }
    }
}
