//! Dyad hold-out splits.
//!
//! A [`DyadMask`] is the hold-out set: a random subset of unordered node
//! pairs, each included independently with probability `p`. Viewed as an
//! index set on `[n] x [n]` it is symmetric, so norms restricted to the mask
//! count every held-out dyad twice.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{pair_count, pair_from_index, pair_index, Graph, ProbMatrix};
use crate::rng::row_stream;

#[derive(Debug, Clone, PartialEq)]
pub struct DyadMask {
    n: usize,
    p: f64,
    seed: u64,
    /// Packed pair indices, ascending.
    held: Vec<usize>,
    bits: Vec<u64>,
}

impl DyadMask {
    /// Builds a mask from explicit pairs (either orientation).
    pub fn from_pairs<I>(n: usize, p: f64, seed: u64, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut held = Vec::new();
        for (i, j) in pairs {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::Bounds { index: idx, n });
                }
            }
            if i == j {
                return Err(Error::domain(format!("diagonal pair ({i}, {i}) in mask")));
            }
            held.push(pair_index(n, i.min(j), i.max(j)));
        }
        held.sort_unstable();
        held.dedup();
        Ok(Self::from_indices(n, p, seed, held))
    }

    fn from_indices(n: usize, p: f64, seed: u64, held: Vec<usize>) -> Self {
        let mut bits = vec![0u64; pair_count(n).div_ceil(64)];
        for &k in &held {
            bits[k / 64] |= 1 << (k % 64);
        }
        DyadMask { n, p, seed, held, bits }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of held-out unordered pairs.
    pub fn len(&self) -> usize {
        self.held.len()
    }

    pub fn is_empty(&self) -> bool {
        self.held.is_empty()
    }

    #[inline]
    pub fn contains_index(&self, k: usize) -> bool {
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        if i == j || i >= self.n || j >= self.n {
            return false;
        }
        self.contains_index(pair_index(self.n, i.min(j), i.max(j)))
    }

    /// Packed indices of the held-out pairs, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.held
    }

    /// Held-out pairs `(i, j)`, `i < j`, in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.held.iter().map(move |&k| pair_from_index(self.n, k))
    }

    /// The complementary pair set, tagged with probability `1 - p`.
    pub fn complement(&self) -> DyadMask {
        let held = (0..pair_count(self.n)).filter(|&k| !self.contains_index(k)).collect();
        Self::from_indices(self.n, 1.0 - self.p, self.seed, held)
    }

    /// Header line `n p seed`, then one `i j` pair per line.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.n, self.p, self.seed)?;
        for (i, j) in self.pairs() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(Error::Format("empty mask file".into())),
            }
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::Parse { line: 1, msg: "expected header `n p seed`".into() };
        if fields.len() != 3 {
            return Err(bad_header());
        }
        let n: usize = fields[0].parse().map_err(|_| bad_header())?;
        let p: f64 = fields[1].parse().map_err(|_| bad_header())?;
        let seed: u64 = fields[2].parse().map_err(|_| bad_header())?;
        let mut pairs = Vec::new();
        for (lineno, line) in lines {
            let line = line?;
            let body = line.trim();
            if body.is_empty() {
                continue;
            }
            let parsed: Vec<usize> = body
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse { line: lineno + 1, msg: format!("bad pair {body:?}") })?;
            if parsed.len() != 2 {
                return Err(Error::Parse { line: lineno + 1, msg: "expected two indices".into() });
            }
            pairs.push((parsed[0], parsed[1]));
        }
        Self::from_pairs(n, p, seed, pairs)
    }
}

/// Includes each unordered pair independently with probability `p`.
///
/// Row `i` draws its pairs `(i, j > i)` from its own ChaCha stream, so the
/// result depends only on `(n, p, seed)`.
pub fn sample_dyad_split(n: usize, p: f64, seed: u64) -> Result<DyadMask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("hold-out probability {p} is outside [0, 1]")));
    }
    if n < 2 {
        return Err(Error::domain("dyad split needs at least two nodes"));
    }
    let mut held = Vec::with_capacity((p * pair_count(n) as f64 * 1.1) as usize + 16);
    for i in 0..n - 1 {
        let mut rng = row_stream(seed, i);
        let base = pair_index(n, i, i + 1);
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                held.push(base + (j - i - 1));
            }
        }
    }
    Ok(DyadMask::from_indices(n, p, seed, held))
}

/// `M(Omega)`: entries on held-out pairs kept, all others zeroed.
pub fn restrict(m: &ProbMatrix, mask: &DyadMask) -> Result<ProbMatrix> {
    if m.n() != mask.n() {
        return Err(Error::Dimension { expected: mask.n(), got: m.n() });
    }
    let mut out = ProbMatrix::zeros(m.n());
    let src = m.upper();
    let dst = out.upper_mut();
    for &k in mask.indices() {
        dst[k] = src[k];
    }
    Ok(out)
}

/// `A(Omega)` as a graph: the edges that fall on held-out pairs.
pub fn held_out_graph(g: &Graph, mask: &DyadMask) -> Result<Graph> {
    check_dims(g, mask)?;
    Ok(g.filter_edges(|i, j| mask.contains(i, j)))
}

/// `A(Omega^c)`: the graph with every held-out dyad treated as a non-edge.
pub fn train_adjacency(g: &Graph, mask: &DyadMask) -> Result<Graph> {
    check_dims(g, mask)?;
    Ok(g.filter_edges(|i, j| !mask.contains(i, j)))
}

fn check_dims(g: &Graph, mask: &DyadMask) -> Result<()> {
    if g.n() != mask.n() {
        return Err(Error::Dimension { expected: mask.n(), got: g.n() });
    }
    Ok(())
}
