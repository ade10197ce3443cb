//! Weighted undirected graphs, label sets and the combinatorial Laplacian.
//!
//! A [`Graph`] stores its symmetric weight matrix in CSR form together with
//! the degree vector. Self-loops are never stored and every stored weight is
//! strictly positive, so adjacency and "nonzero weight" coincide.
//!
//! Text formats:
//!
//! ```text
//! n 3          # graph file: header, then one line per undirected edge, i < j
//! 0 1 1.0
//! 1 2 0.5
//! ```
//!
//! ```text
//! 0 1.0        # labels file: one `node value` pair per line
//! 2 -1.0
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Immutable weighted undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
    degree: Vec<f64>,
    components: usize,
}

impl Graph {
    /// Builds a graph from undirected edges `(i, j, w)`.
    ///
    /// Self-loops and zero-weight edges are dropped. Each undirected edge may
    /// appear once, in either orientation.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            if i == j || w == 0.0 {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if unique.insert(key, w).is_some() {
                return Err(Error::invalid(format!("duplicate edge ({}, {})", key.0, key.1)));
            }
        }
        Ok(Self::from_unique_edges(n, unique))
    }

    fn from_unique_edges(n: usize, unique: BTreeMap<(usize, usize), f64>) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j) in unique.keys() {
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        // Keys are sorted by (min, max); push both orientations, then sort rows.
        for (&(i, j), &w) in &unique {
            col_idx[fill[i]] = j;
            weights[fill[i]] = w;
            fill[i] += 1;
            col_idx[fill[j]] = i;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        for i in 0..n {
            let range = row_ptr[i]..row_ptr[i + 1];
            let mut row: Vec<(usize, f64)> = col_idx[range.clone()]
                .iter()
                .copied()
                .zip(weights[range.clone()].iter().copied())
                .collect();
            row.sort_by_key(|&(j, _)| j);
            for (slot, (j, w)) in range.zip(row) {
                col_idx[slot] = j;
                weights[slot] = w;
            }
        }
        let degree = (0..n)
            .map(|i| weights[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        let mut g = Graph {
            n,
            row_ptr,
            col_idx,
            weights,
            degree,
            components: 0,
        };
        g.components = g.connected_components().len();
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Total edge weight counted from both ends, `Σ dᵢ`.
    pub fn volume(&self) -> f64 {
        self.degree.iter().sum()
    }

    pub fn edge_count(&self) -> usize {
        self.col_idx.len() / 2
    }

    /// Neighbors of `i` in increasing node order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Undirected edges `(i, j, w)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components <= 1
    }

    /// Errors with [`Error::Disconnected`] unless the graph is connected.
    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            return Ok(());
        }
        let sizes = self.connected_components().iter().map(Vec::len).collect();
        Err(Error::Disconnected {
            components: self.components,
            sizes,
        })
    }

    /// `(D - W) x`, matrix-free.
    pub fn laplacian_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        self.laplacian_apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn laplacian_apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let off: f64 = self.neighbors(i).map(|(j, w)| w * x[j]).sum();
            *yi = self.degree[i] * x[i] - off;
        }
    }

    /// Connected components ordered by their smallest node id; nodes inside a
    /// component are sorted.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for (u, _) in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Returns the graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        check_permutation(perm, self.n)?;
        Graph::from_edges(self.n, self.edges().map(|(i, j, w)| (perm[i], perm[j], w)))
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("not a permutation"));
        }
    }
    Ok(())
}

/// Labeled nodes and their real-valued labels, kept sorted by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    indices: Vec<usize>,
    values: Vec<f64>,
    mean: f64,
}

impl LabelSet {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::invalid("label set is empty"));
        }
        pairs.sort_by_key(|&(i, _)| i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("node {} labeled twice", w[0].0)));
            }
        }
        for &(i, y) in &pairs {
            if i >= n {
                return Err(Error::invalid(format!("labeled node {i} out of range for n = {n}")));
            }
            if !y.is_finite() {
                return Err(Error::invalid(format!("label of node {i} is not finite")));
            }
        }
        let (indices, values): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        let first = values[0];
        let mean = if values.iter().all(|&y| y == first) {
            first
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        Ok(LabelSet {
            indices,
            values,
            mean,
        })
    }

    pub fn from_slices(n: usize, indices: &[usize], values: &[f64]) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                actual: values.len(),
            });
        }
        Self::new(n, indices.iter().copied().zip(values.iter().copied()))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Centered labels `yᵢ - ȳ` in node order. The last entry absorbs the
    /// rounding of the others, so the left-to-right sum is exactly zero.
    pub fn centered_values(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.values.iter().map(|y| y - self.mean).collect();
        if let Some((last, rest)) = t.split_last_mut() {
            let s: f64 = rest.iter().sum();
            *last = -s;
        }
        t
    }

    /// Source vector `t` of length `n`: centered labels on labeled nodes,
    /// zero elsewhere.
    pub fn source_vector(&self, n: usize) -> Vec<f64> {
        let mut t = vec![0.0; n];
        for (&i, ti) in self.indices.iter().zip(self.centered_values()) {
            t[i] = ti;
        }
        t
    }

    /// 0/1 membership mask of length `n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    /// Labels padded with zeros to length `n`.
    pub fn padded(&self, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (i, v) in self.iter() {
            y[i] = v;
        }
        y
    }

    pub fn scaled(&self, factor: f64) -> LabelSet {
        let values: Vec<f64> = self.values.iter().map(|y| y * factor).collect();
        let first = values[0];
        let mean = if values.iter().all(|&y| y == first) {
            first
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        LabelSet {
            indices: self.indices.clone(),
            values,
            mean,
        }
    }

    /// Ids of the nodes in `0..n` that carry no label, ascending.
    pub fn unlabeled(&self, n: usize) -> Vec<usize> {
        let mask = self.mask(n);
        (0..n).filter(|&i| !mask[i]).collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<LabelSet> {
        check_permutation(perm, perm.len())?;
        LabelSet::new(perm.len(), self.iter().map(|(i, y)| (perm[i], y)))
    }
}

/// Gaussian-weighted symmetric kNN graph.
///
/// `j` is joined to `i` when either is among the other's `k` nearest
/// neighbors (distance ties go to the smaller index). Weights are
/// `exp(-|xᵢ - xⱼ|² / σ²)`; `sigma = None` uses the mean distance to the
/// `k`-th neighbor.
pub fn build_knn_graph(points: &[Vec<f64>], k: usize, sigma: Option<f64>) -> Result<Graph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("need at least 2 points"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k >= n {
        return Err(Error::invalid(format!("k = {k} needs at least {} points, got {n}", k + 1)));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::invalid(format!("point {i} has dimension {}, expected {dim}", p.len())));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
    }
    if let Some(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {s}")));
        }
    }

    let neighbors: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(&points[i], &points[j]), j))
                .collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, by_dist);
            cand.truncate(k);
            cand.sort_by(by_dist);
            cand
        })
        .collect();

    let sigma = match sigma {
        Some(s) => s,
        None => {
            let mean = neighbors.iter().map(|nb| nb[k - 1].0.sqrt()).sum::<f64>() / n as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let s2 = sigma * sigma;

    let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, nb) in neighbors.iter().enumerate() {
        for &(_, j) in nb {
            let key = (i.min(j), i.max(j));
            unique
                .entry(key)
                .or_insert_with(|| (-sq_dist(&points[key.0], &points[key.1]) / s2).exp());
        }
    }
    unique.retain(|_, w| *w > 0.0);
    Ok(Graph::from_unique_edges(n, unique))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "n {}", g.n())?;
    for (i, j, w) in g.edges() {
        writeln!(out, "{i} {j} {w:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = content_lines(&text);
    let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing `n <count>` header".into()))?;
    let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["n", count] => count
            .parse::<usize>()
            .map_err(|e| perr(hline, format!("bad node count `{count}`: {e}")))?,
        _ => return Err(perr(hline, format!("expected `n <count>`, found `{header}`"))),
    };

    let mut unique = BTreeMap::new();
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [si, sj, sw] = toks.as_slice() else {
            return Err(perr(lineno, format!("expected `i j w`, found `{line}`")));
        };
        let i: usize = si.parse().map_err(|e| perr(lineno, format!("bad node id `{si}`: {e}")))?;
        let j: usize = sj.parse().map_err(|e| perr(lineno, format!("bad node id `{sj}`: {e}")))?;
        let w: f64 = sw.parse().map_err(|e| perr(lineno, format!("bad weight `{sw}`: {e}")))?;
        if i >= n || j >= n {
            return Err(perr(lineno, format!("node id out of range for n = {n}")));
        }
        if i >= j {
            return Err(perr(
                lineno,
                format!("asymmetric entry `{i} {j}`: each undirected edge is listed once with i < j"),
            ));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(perr(lineno, format!("negative or non-finite weight {w}")));
        }
        if unique.insert((i, j), w).is_some() {
            return Err(perr(lineno, format!("duplicate edge {i} {j}")));
        }
    }
    unique.retain(|_, w| *w > 0.0);
    Ok(Graph::from_unique_edges(n, unique))
}

pub fn save_labels(labels: &LabelSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (i, y) in labels.iter() {
        writeln!(out, "{i} {y:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<LabelSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut seen = BTreeMap::new();
    for (lineno, line) in content_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [si, sy] = toks.as_slice() else {
            return Err(perr(lineno, format!("expected `i y`, found `{line}`")));
        };
        let i: usize = si.parse().map_err(|e| perr(lineno, format!("bad node id `{si}`: {e}")))?;
        let y: f64 = sy.parse().map_err(|e| perr(lineno, format!("bad label `{sy}`: {e}")))?;
        if i >= n {
            return Err(perr(lineno, format!("node id {i} out of range for n = {n}")));
        }
        if !y.is_finite() {
            return Err(perr(lineno, "label is not finite".into()));
        }
        if seen.insert(i, y).is_some() {
            return Err(perr(lineno, format!("node {i} labeled twice")));
        }
    }
    if seen.is_empty() {
        return Err(perr(1, "no labels".into()));
    }
    LabelSet::new(n, seen)
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}
