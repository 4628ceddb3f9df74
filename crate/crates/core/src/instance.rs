//! Sequential ordering problem instances.
//!
//! An instance is a full asymmetric cost matrix in which the entry `-1` at
//! row `i`, column `j` encodes the precedence "`j` must come before `i`".
//! Node `0` is the start node and node `n - 1` the final node. Two textual
//! layouts are supported:
//!
//! * TSPLIB-SOP: `KEY: VALUE` header lines (`NAME`, `TYPE`, `DIMENSION`,
//!   `EDGE_WEIGHT_TYPE`, `EDGE_WEIGHT_FORMAT`, ...) followed by
//!   `EDGE_WEIGHT_SECTION`, an optional line repeating the dimension, the
//!   `n x n` matrix and an optional `EOF` line.
//! * SOPLIB: a dimension line followed by the `n x n` matrix.
//!
//! Matrix rows are normally one per line. A matrix whose rows are wrapped
//! over several lines is accepted as long as the total number of entries is
//! exactly `n * n`.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use thiserror::Error;

/// Integer arc cost.
pub type Cost = i64;

/// Matrix entry marking a precedence-forbidden arc.
pub const FORBIDDEN: Cost = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    TsplibSop,
    Soplib,
}

impl Format {
    /// Guesses the layout of `text`: anything containing an
    /// `EDGE_WEIGHT_SECTION` keyword is TSPLIB-SOP.
    pub fn detect(text: &str) -> Format {
        if text.contains("EDGE_WEIGHT_SECTION") {
            Format::TsplibSop
        } else {
            Format::Soplib
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsplib-sop" | "tsplib" | "sop" => Ok(Format::TsplibSop),
            "soplib" => Ok(Format::Soplib),
            other => Err(format!("unknown instance format `{other}`")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::TsplibSop => "tsplib-sop",
            Format::Soplib => "soplib",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("line {line}: malformed header: {message}")]
    Header { line: usize, message: String },
    #[error("line {line}: cannot parse matrix entry `{token}`")]
    BadValue { line: usize, token: String },
    #[error("line {line}: negative cost {value} (only -1 may mark a precedence)")]
    NegativeCost { line: usize, value: Cost },
    #[error("line {line}: dimension mismatch, expected {expected} entries in matrix row, found {found}")]
    RowLength { line: usize, expected: usize, found: usize },
    #[error("matrix is not square: expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("matrix has {found} entries, a {n}x{n} matrix needs {}", n * n)]
    MatrixSize { n: usize, found: usize },
    #[error("entry ({row}, {col}) is {value}, costs must be non-negative or -1")]
    InvalidCost { row: usize, col: usize, value: Cost },
    #[error("an instance needs at least two nodes, got {0}")]
    TooSmall(usize),
    #[error("node {node} is out of range for an instance with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A parsed sequential ordering problem.
///
/// Immutable once built. The precedence closure is computed eagerly and
/// always includes the anchoring constraints (start before everything,
/// everything before final), whether or not the matrix states them.
#[derive(Debug, Clone)]
pub struct Instance {
    name: String,
    n: usize,
    cost: Vec<Cost>,
    precedences: Vec<(usize, usize)>,
    start: usize,
    final_node: usize,
    direct_successors: Vec<Vec<usize>>,
    initial_pred_counts: Vec<u32>,
    successors: Vec<FixedBitSet>,
    predecessors: Vec<FixedBitSet>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        // everything else is derived from these
        self.name == other.name && self.n == other.n && self.cost == other.cost
    }
}

impl Eq for Instance {}

impl Instance {
    /// Builds an instance from a row-major `n x n` matrix. Precedences are
    /// read from the `-1` entries.
    pub fn from_matrix(name: impl Into<String>, n: usize, cost: Vec<Cost>) -> Result<Instance, InstanceError> {
        if n < 2 {
            return Err(InstanceError::TooSmall(n));
        }
        if cost.len() != n * n {
            return Err(InstanceError::MatrixSize { n, found: cost.len() });
        }
        let mut precedences = Vec::new();
        for row in 0..n {
            for col in 0..n {
                let value = cost[row * n + col];
                if value == FORBIDDEN {
                    precedences.push((col, row));
                } else if value < 0 {
                    return Err(InstanceError::InvalidCost { row, col, value });
                }
            }
        }
        precedences.sort_unstable();
        Ok(Self::assemble(name.into(), n, cost, precedences))
    }

    /// Builds an instance from arc costs and explicit precedence pairs
    /// `(u, v)` meaning "u before v". The matrix entry `(v, u)` is
    /// overwritten with the `-1` marker.
    pub fn from_costs_and_precedences(
        name: impl Into<String>,
        n: usize,
        mut cost: Vec<Cost>,
        pairs: &[(usize, usize)],
    ) -> Result<Instance, InstanceError> {
        if n < 2 {
            return Err(InstanceError::TooSmall(n));
        }
        if cost.len() != n * n {
            return Err(InstanceError::MatrixSize { n, found: cost.len() });
        }
        for &(u, v) in pairs {
            for node in [u, v] {
                if node >= n {
                    return Err(InstanceError::NodeOutOfRange { node, n });
                }
            }
            cost[v * n + u] = FORBIDDEN;
        }
        Self::from_matrix(name, n, cost)
    }

    fn assemble(name: String, n: usize, cost: Vec<Cost>, precedences: Vec<(usize, usize)>) -> Self {
        let start = 0;
        let final_node = n - 1;

        let mut adjacency = vec![FixedBitSet::with_capacity(n); n];
        for &(u, v) in &precedences {
            if u != v {
                adjacency[u].insert(v);
            }
        }
        for v in 0..n {
            if v != start {
                adjacency[start].insert(v);
            }
            if v != final_node {
                adjacency[v].insert(final_node);
            }
        }
        let direct_successors: Vec<Vec<usize>> = adjacency.iter().map(|set| set.ones().collect()).collect();
        let mut initial_pred_counts = vec![0u32; n];
        for succ in &direct_successors {
            for &v in succ {
                initial_pred_counts[v] += 1;
            }
        }

        let successors = closure(&direct_successors, n);
        let mut predecessors = vec![FixedBitSet::with_capacity(n); n];
        for (u, succ) in successors.iter().enumerate() {
            for v in succ.ones() {
                predecessors[v].insert(u);
            }
        }

        Instance {
            name,
            n,
            cost,
            precedences,
            start,
            final_node,
            direct_successors,
            initial_pred_counts,
            successors,
            predecessors,
        }
    }

    /// Parses `text` in the given layout. SOPLIB files carry no name, so the
    /// instance is left unnamed; see [`Instance::with_name`].
    pub fn parse(text: &str, format: Format) -> Result<Instance, InstanceError> {
        match format {
            Format::TsplibSop => parse_tsplib(text),
            Format::Soplib => parse_soplib(text),
        }
    }

    /// Reads an instance file, detecting its layout. Unnamed instances take
    /// the file name.
    pub fn load(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| InstanceError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let instance = Instance::parse(&text, Format::detect(&text))?;
        if instance.name.is_empty() {
            let stem = path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let stem = stem.strip_suffix(".sop").unwrap_or(&stem).to_string();
            Ok(instance.with_name(stem))
        } else {
            Ok(instance)
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn start(&self) -> usize {
        self.start
    }

    #[inline]
    pub fn final_node(&self) -> usize {
        self.final_node
    }

    /// Raw matrix entry, `-1` for forbidden arcs.
    #[inline]
    pub fn cost(&self, from: usize, to: usize) -> Cost {
        self.cost[from * self.n + to]
    }

    #[inline]
    pub fn is_forbidden(&self, from: usize, to: usize) -> bool {
        self.cost(from, to) == FORBIDDEN
    }

    pub fn matrix(&self) -> &[Cost] {
        &self.cost
    }

    /// The explicit precedence pairs read from the matrix, sorted.
    pub fn precedences(&self) -> &[(usize, usize)] {
        &self.precedences
    }

    /// Direct successors in the anchored precedence graph.
    #[inline]
    pub fn direct_successors(&self, node: usize) -> &[usize] {
        &self.direct_successors[node]
    }

    /// Number of direct predecessors of each node in the anchored
    /// precedence graph; the starting point for frontier bookkeeping.
    #[inline]
    pub fn predecessor_counts(&self) -> &[u32] {
        &self.initial_pred_counts
    }

    /// Every node that `node` must precede (transitively).
    pub fn transitive_successors(&self, node: usize) -> Result<&FixedBitSet, InstanceError> {
        self.successors
            .get(node)
            .ok_or(InstanceError::NodeOutOfRange { node, n: self.n })
    }

    /// Every node that must precede `node` (transitively).
    pub fn transitive_predecessors(&self, node: usize) -> Result<&FixedBitSet, InstanceError> {
        self.predecessors
            .get(node)
            .ok_or(InstanceError::NodeOutOfRange { node, n: self.n })
    }

    #[inline]
    pub(crate) fn successor_set(&self, node: usize) -> &FixedBitSet {
        &self.successors[node]
    }

    #[inline]
    pub(crate) fn predecessor_set(&self, node: usize) -> &FixedBitSet {
        &self.predecessors[node]
    }

    /// True if `u` must come before `v` in every feasible route.
    #[inline]
    pub fn must_precede(&self, u: usize, v: usize) -> bool {
        self.successors[u].contains(v)
    }

    /// Checks the structural conventions. Violations are collected, never
    /// returned as errors.
    pub fn validate(&self) -> ValidationReport {
        let n = self.n;
        let mut violations = Vec::new();

        for i in 0..n {
            let value = self.cost(i, i);
            if value != 0 {
                violations.push(Violation::NonZeroDiagonal { node: i, value });
            }
        }

        // cycles in the anchored graph (Kahn's algorithm)
        let mut indegree: Vec<u32> = self.initial_pred_counts.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut removed = vec![false; n];
        while let Some(u) = queue.pop_front() {
            removed[u] = true;
            for &v in &self.direct_successors[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        let cyclic: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
        if !cyclic.is_empty() {
            violations.push(Violation::Cycle { nodes: cyclic });
        }

        // anchoring conventions, judged on the explicit pairs only
        let mut explicit = vec![Vec::new(); n];
        for &(u, v) in &self.precedences {
            explicit[u].push(v);
        }
        let mut reverse = vec![Vec::new(); n];
        for &(u, v) in &self.precedences {
            reverse[v].push(u);
        }
        let from_start = reachable(&explicit, self.start, n);
        let to_final = reachable(&reverse, self.final_node, n);
        for v in 0..n {
            if v != self.start && !from_start.contains(v) {
                violations.push(Violation::StartNotFirst { node: v });
            }
            if v != self.final_node && !to_final.contains(v) {
                violations.push(Violation::FinalNotLast { node: v });
            }
        }

        ValidationReport { violations }
    }

    /// Renders the instance in TSPLIB-SOP layout.
    pub fn to_tsplib(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME: {}", self.name);
        let _ = writeln!(out, "TYPE: SOP");
        let _ = writeln!(out, "DIMENSION: {}", self.n);
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE: EXPLICIT");
        let _ = writeln!(out, "EDGE_WEIGHT_FORMAT: FULL_MATRIX");
        let _ = writeln!(out, "EDGE_WEIGHT_SECTION");
        let _ = writeln!(out, "{}", self.n);
        self.write_matrix(&mut out);
        out.push_str("EOF\n");
        out
    }

    /// Renders the instance in SOPLIB layout (the name is not stored).
    pub fn to_soplib(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n);
        self.write_matrix(&mut out);
        out
    }

    fn write_matrix(&self, out: &mut String) {
        for row in self.cost.chunks(self.n) {
            let mut first = true;
            for value in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{value}");
            }
            out.push('\n');
        }
    }
}

/// Transitive closure of a successor-list graph, one bitset per node.
fn closure(direct: &[Vec<usize>], n: usize) -> Vec<FixedBitSet> {
    let mut indegree = vec![0u32; n];
    for succ in direct {
        for &v in succ {
            indegree[v] += 1;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &direct[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                queue.push_back(v);
            }
        }
    }

    if order.len() < n {
        // cyclic: plain reachability from every node
        return (0..n)
            .map(|u| {
                let mut seen = FixedBitSet::with_capacity(n);
                let mut stack: Vec<usize> = direct[u].clone();
                while let Some(v) = stack.pop() {
                    if !seen.put(v) {
                        stack.extend_from_slice(&direct[v]);
                    }
                }
                seen
            })
            .collect();
    }

    let mut sets = vec![FixedBitSet::with_capacity(n); n];
    for &u in order.iter().rev() {
        let mut acc = FixedBitSet::with_capacity(n);
        for &v in &direct[u] {
            acc.insert(v);
            acc.union_with(&sets[v]);
        }
        sets[u] = acc;
    }
    sets
}

fn reachable(adjacency: &[Vec<usize>], from: usize, n: usize) -> FixedBitSet {
    let mut seen = FixedBitSet::with_capacity(n);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !seen.put(v) {
                queue.push_back(v);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Nodes on or behind a precedence cycle; no feasible route exists.
    Cycle {
        nodes: Vec<usize>,
    },
    NonZeroDiagonal {
        node: usize,
        value: Cost,
    },
    /// The matrix does not force the start node before `node`.
    StartNotFirst {
        node: usize,
    },
    /// The matrix does not force `node` before the final node.
    FinalNotLast {
        node: usize,
    },
}

impl Violation {
    /// Convention warnings do not prevent solving: the solvers anchor the
    /// start and final nodes regardless.
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::StartNotFirst { .. } | Violation::FinalNotLast { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { nodes } => write!(f, "precedence cycle through nodes {nodes:?}"),
            Violation::NonZeroDiagonal { node, value } => {
                write!(f, "diagonal entry of node {node} is {value}")
            }
            Violation::StartNotFirst { node } => {
                write!(f, "warning: node {node} is not required to follow the start node")
            }
            Violation::FinalNotLast { node } => {
                write!(f, "warning: node {node} is not required to precede the final node")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// No errors (warnings allowed).
    pub fn is_valid(&self) -> bool {
        self.violations.iter().all(Violation::is_warning)
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| !v.is_warning())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.is_warning())
    }
}

struct MatrixLine<'a> {
    line: usize,
    tokens: Vec<&'a str>,
}

fn parse_tsplib(text: &str) -> Result<Instance, InstanceError> {
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let mut section_line = None;

    for (line, content) in lines.by_ref() {
        if content.is_empty() {
            continue;
        }
        if content.starts_with("EDGE_WEIGHT_SECTION") {
            section_line = Some(line);
            break;
        }
        if content == "EOF" {
            break;
        }
        let Some((key, value)) = content.split_once(':') else {
            return Err(InstanceError::Header {
                line,
                message: format!("expected `KEY: VALUE`, found `{content}`"),
            });
        };
        let key = key.trim().to_ascii_uppercase();
        let value = value.trim();
        match key.as_str() {
            "NAME" => name = value.to_string(),
            "DIMENSION" => {
                dimension = Some(value.parse().map_err(|_| InstanceError::Header {
                    line,
                    message: format!("invalid dimension `{value}`"),
                })?)
            }
            "TYPE" if !value.eq_ignore_ascii_case("SOP") => {
                return Err(InstanceError::Header {
                    line,
                    message: format!("unsupported TYPE `{value}`, expected SOP"),
                })
            }
            "EDGE_WEIGHT_TYPE" if !value.eq_ignore_ascii_case("EXPLICIT") => {
                return Err(InstanceError::Header {
                    line,
                    message: format!("unsupported EDGE_WEIGHT_TYPE `{value}`"),
                })
            }
            "EDGE_WEIGHT_FORMAT" if !value.eq_ignore_ascii_case("FULL_MATRIX") => {
                return Err(InstanceError::Header {
                    line,
                    message: format!("unsupported EDGE_WEIGHT_FORMAT `{value}`"),
                })
            }
            _ => {}
        }
    }

    let Some(section_line) = section_line else {
        return Err(InstanceError::Header {
            line: text.lines().count().max(1),
            message: "missing EDGE_WEIGHT_SECTION".into(),
        });
    };
    let Some(n) = dimension else {
        return Err(InstanceError::Header {
            line: section_line,
            message: "missing DIMENSION".into(),
        });
    };

    let mut rows: Vec<MatrixLine<'_>> = Vec::new();
    for (line, content) in lines {
        if content == "EOF" {
            break;
        }
        if content.is_empty() {
            continue;
        }
        rows.push(MatrixLine {
            line,
            tokens: content.split_whitespace().collect(),
        });
    }
    // the section may open by repeating the dimension
    if let Some(first) = rows.first() {
        if first.tokens.len() == 1 && first.tokens[0].parse::<usize>().ok() == Some(n) {
            rows.remove(0);
        }
    }
    let cost = collect_matrix(&rows, n)?;
    Instance::from_matrix(name, n, cost)
}

fn parse_soplib(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((line, first)) = lines.next() else {
        return Err(InstanceError::Header {
            line: 1,
            message: "empty input".into(),
        });
    };
    let n: usize = first.parse().map_err(|_| InstanceError::Header {
        line,
        message: format!("expected the dimension, found `{first}`"),
    })?;
    let rows: Vec<MatrixLine<'_>> = lines
        .take_while(|(_, l)| *l != "EOF")
        .map(|(line, l)| MatrixLine {
            line,
            tokens: l.split_whitespace().collect(),
        })
        .collect();
    let cost = collect_matrix(&rows, n)?;
    Instance::from_matrix(String::new(), n, cost)
}

fn collect_matrix(rows: &[MatrixLine<'_>], n: usize) -> Result<Vec<Cost>, InstanceError> {
    if n < 2 {
        return Err(InstanceError::TooSmall(n));
    }
    let total: usize = rows.iter().map(|r| r.tokens.len()).sum();
    let row_wise = rows.iter().all(|r| r.tokens.len() == n);
    if !(row_wise && rows.len() == n) && total != n * n {
        if let Some(bad) = rows.iter().find(|r| r.tokens.len() != n) {
            return Err(InstanceError::RowLength {
                line: bad.line,
                expected: n,
                found: bad.tokens.len(),
            });
        }
        return Err(InstanceError::RowCount {
            expected: n,
            found: rows.len(),
        });
    }
    let mut cost = Vec::with_capacity(n * n);
    for row in rows {
        for token in &row.tokens {
            let value: Cost = token.parse().map_err(|_| InstanceError::BadValue {
                line: row.line,
                token: (*token).to_string(),
            })?;
            if value < 0 && value != FORBIDDEN {
                return Err(InstanceError::NegativeCost { line: row.line, value });
            }
            cost.push(value);
        }
    }
    Ok(cost)
}
