//! Undirected simple graphs, symmetric edge-probability matrices, and their
//! text/binary formats.
//!
//! A [`Graph`] keeps its edges as a sorted list of unordered pairs `(i, j)`
//! with `i < j`, plus a CSR neighbour index for degree and mat-vec queries.
//! A [`ProbMatrix`] stores only the strict upper triangle (row-major); the
//! diagonal is fixed at zero and never stored.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of unordered pairs `{i, j}`, `i != j`, on `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the pair `(i, j)`, `i < j`, in the packed strict upper triangle.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(n: usize, k: usize) -> (usize, usize) {
    debug_assert!(k < pair_count(n));
    // Row i starts at offset i * (2n - i - 1) / 2.
    let mut i = {
        let nf = n as f64;
        let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * k as f64;
        (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize
    };
    let start = |i: usize| i * (2 * n - i - 1) / 2;
    while i > 0 && start(i) > k {
        i -= 1;
    }
    while start(i + 1) <= k {
        i += 1;
    }
    (i, k - start(i) + i + 1)
}

#[inline]
fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl Eq for Graph {}

impl Graph {
    /// Builds a graph from unordered pairs. Pair orientation and duplicates
    /// are normalized away; self-loops and out-of-range indices are errors.
    pub fn from_pairs<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = Vec::new();
        for (i, j) in pairs {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::Bounds { index: idx, n });
                }
            }
            if i == j {
                return Err(Error::domain(format!("self-loop at node {i}")));
            }
            edges.push(ordered(i, j));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n, edges))
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted_unique(n, Vec::new())
    }

    /// `edges` must already be sorted, deduplicated and oriented `i < j < n`.
    pub(crate) fn from_sorted_unique(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut deg = vec![0usize; n];
        for &(i, j) in &edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        for &(i, j) in &edges {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Graph { n, edges, offsets, neighbors }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as sorted pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Keeps the edges for which `keep(i, j)` holds.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Graph {
        let edges = self.edges.iter().copied().filter(|&(i, j)| keep(i, j)).collect();
        Graph::from_sorted_unique(self.n, edges)
    }

    /// `y = A x` for the adjacency matrix `A`.
    pub fn adjacency_matvec(&self, x: &[f64], y: &mut [f64]) {
        for (v, out) in y.iter_mut().enumerate().take(self.n) {
            *out = self.neighbors(v).iter().map(|&u| x[u]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Writes the graph in the edge-list format read by [`load_edge_list`].
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# nodes {}", self.n)?;
        for &(i, j) in &self.edges {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }
}

/// Result of parsing an edge list, with counts of what was discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListLoad {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Parses an edge list: one `i j` pair of 0-based indices per line, `#`
/// starts a comment. Without `n_override` the node count comes from a
/// `# nodes N` header if present, else one more than the largest index seen
/// (zero for an empty stream).
pub fn load_edge_list<R: BufRead>(reader: R, n_override: Option<usize>) -> Result<EdgeListLoad> {
    let mut raw = Vec::new();
    let mut self_loops = 0;
    let mut max_index: Option<usize> = None;
    let mut declared: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(rest) = line.trim_start().strip_prefix("# nodes ") {
            declared = rest.trim().parse().ok();
        }
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let mut field = |what: &str| -> Result<usize> {
            let tok = parts.next().ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("missing {what} node index"),
            })?;
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("{tok:?} is not a non-negative integer"),
            })
        };
        let i = field("first")?;
        let j = field("second")?;
        if parts.next().is_some() {
            return Err(Error::Parse { line: lineno + 1, msg: "expected exactly two fields".into() });
        }
        if let Some(n) = n_override {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::Bounds { index: idx, n });
                }
            }
        }
        max_index = Some(max_index.map_or(i.max(j), |m| m.max(i).max(j)));
        if i == j {
            self_loops += 1;
            continue;
        }
        raw.push(ordered(i, j));
    }
    if self_loops > 0 {
        log::warn!("dropped {self_loops} self-loop(s) from edge list");
    }
    let seen = max_index.map_or(0, |m| m + 1);
    let n = match (n_override, declared) {
        (Some(n), _) => n,
        (None, Some(d)) if d >= seen => d,
        (None, Some(d)) => return Err(Error::Bounds { index: seen - 1, n: d }),
        (None, None) => seen,
    };
    let total = raw.len();
    raw.sort_unstable();
    raw.dedup();
    let duplicates = total - raw.len();
    Ok(EdgeListLoad {
        graph: Graph::from_sorted_unique(n, raw),
        self_loops_dropped: self_loops,
        duplicates_dropped: duplicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub avg_degree: f64,
    pub density: f64,
}

pub fn graph_stats(g: &Graph) -> GraphStats {
    let m = g.edge_count() as f64;
    let n = g.n();
    let avg_degree = if n == 0 { 0.0 } else { 2.0 * m / n as f64 };
    let density = if n >= 2 { m / pair_count(n) as f64 } else { 0.0 };
    GraphStats { avg_degree, density }
}

/// Symmetric `n x n` matrix with zero diagonal, stored as its strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    n: usize,
    upper: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 4] = b"NMX1";

impl ProbMatrix {
    pub fn zeros(n: usize) -> Self {
        ProbMatrix { n, upper: vec![0.0; pair_count(n)] }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        ProbMatrix { n, upper: vec![value; pair_count(n)] }
    }

    /// Fills entry `(i, j)`, `i < j`, with `f(i, j)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in (i + 1)..n {
                upper.push(f(i, j));
            }
        }
        ProbMatrix { n, upper }
    }

    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != pair_count(n) {
            return Err(Error::Dimension { expected: pair_count(n), got: upper.len() });
        }
        Ok(ProbMatrix { n, upper })
    }

    /// Takes the strict upper triangle of a square matrix, which must be
    /// symmetric to within `1e-9` relative to its largest entry.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| m[(i, j)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)`; zero on the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[pair_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.upper[pair_index(self.n, j, i)],
        }
    }

    /// Sets the symmetric pair `(i, j)` and `(j, i)`. Panics on the diagonal.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j, "diagonal of a ProbMatrix is fixed at zero");
        let (a, b) = ordered(i, j);
        self.upper[pair_index(self.n, a, b)] = value;
    }

    /// Packed strict upper triangle, row-major.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn upper_mut(&mut self) -> &mut [f64] {
        &mut self.upper
    }

    /// Entrywise `min(1, max(0, x))`.
    pub fn clip_unit(&self) -> ProbMatrix {
        ProbMatrix { n: self.n, upper: self.upper.iter().map(|&x| x.clamp(0.0, 1.0)).collect() }
    }

    pub fn scaled(&self, c: f64) -> ProbMatrix {
        ProbMatrix { n: self.n, upper: self.upper.iter().map(|&x| c * x).collect() }
    }

    /// Squared Frobenius norm over the full symmetric matrix.
    pub fn frobenius_sq(&self) -> f64 {
        2.0 * self.upper.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &ProbMatrix) -> f64 {
        self.upper.iter().zip(&other.upper).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Mean row sum, `(1/n) sum_{i != j} P_ij`: the expected average degree.
    pub fn expected_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.upper.iter().sum::<f64>() / self.n as f64
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m[(i, j)] = self.upper[k];
                m[(j, i)] = self.upper[k];
                k += 1;
            }
        }
        m
    }

    /// Full matrix, one comma-separated row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for j in 0..self.n {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{}", self.get(i, j)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("{t:?} is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse { line: i + 1, msg: format!("expected {n} columns, found {}", row.len()) });
            }
            if row[i] != 0.0 {
                return Err(Error::Format(format!("nonzero diagonal entry at row {i}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate().skip(i + 1) {
                if x != rows[j][i] {
                    return Err(Error::Format(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// `NMX1`, `n` as little-endian u64, then the strict upper triangle as
    /// little-endian f64, row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for x in &self.upper {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("missing NMX1 magic bytes".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| Error::Format("node count does not fit in memory".into()))?;
        let len = pair_count(n);
        let mut upper = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            upper.push(f64::from_le_bytes(word));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after matrix payload".into()));
        }
        Ok(ProbMatrix { n, upper })
    }
}

pub fn clip_unit(p: &ProbMatrix) -> ProbMatrix {
    p.clip_unit()
}
