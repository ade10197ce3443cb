//! Synthetic data and the three studies: degeneracy scaling, low label
//! rate comparison, and the Poisson / shifted-pseudoinverse audit.
//!
//! Every study is a pure function of its parameters and base seed. Trials
//! run in parallel but rows are assembled in trial order, so CSV output is
//! byte-identical across runs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{argsort, auc, ct_limit_gap, max_abs_diff, peakiness, signed_volume};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, Graph, LabelSet};
use crate::methods::{
    centered_pinv, column_labels, laplace_alpha, laplace_regularize, one_vs_rest, poisson_learn, MaskMode, MethodSpec,
};
use crate::solvers::{dense_pinv, SolverConfig, DENSE_CAP};

/// Reseeds allowed when a sampled kNN graph comes out disconnected.
pub const CONNECTIVITY_RETRIES: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSpec {
    TwoMoons { n: usize, noise: f64 },
    Blobs { n: usize, centers: Vec<Vec<f64>>, sigma: f64 },
}

impl DatasetSpec {
    pub fn generate(&self, seed: u64) -> Result<SyntheticDataset> {
        match self {
            DatasetSpec::TwoMoons { n, noise } => synth_two_moons(*n, *noise, seed),
            DatasetSpec::Blobs { n, centers, sigma } => synth_blobs(*n, centers, *sigma, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub spec: DatasetSpec,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&c| c + 1)
    }

    /// CSV with header `class,x0,x1,...`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let dim = self.points.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["class".to_string()];
        header.extend((0..dim).map(|d| format!("x{d}")));
        w.write_record(&header)?;
        for (p, c) in self.points.iter().zip(&self.labels) {
            let mut rec = vec![c.to_string()];
            rec.extend(p.iter().map(|x| format!("{x:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads points and classes back; the generator spec is not stored.
    pub fn load_points(path: impl AsRef<Path>) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let perr = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            let mut fields = rec.iter();
            let class = fields
                .next()
                .ok_or_else(|| perr("empty record".into()))?
                .parse::<usize>()
                .map_err(|e| perr(format!("bad class: {e}")))?;
            let p = fields
                .map(|f| f.parse::<f64>().map_err(|e| perr(format!("bad coordinate `{f}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            points.push(p);
            labels.push(class);
        }
        Ok((points, labels))
    }
}

/// Two interleaved half circles of radius 1, `n/2` points each, with
/// isotropic Gaussian noise. Class 0 is the upper moon.
pub fn synth_two_moons(n: usize, noise: f64, seed: u64) -> Result<SyntheticDataset> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!("two moons needs an even n >= 4, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("noise must be non-negative, got {noise}")));
    }
    let half = n / 2;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..half {
        let t = PI * k as f64 / (half - 1) as f64;
        points.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for k in 0..half {
        let t = PI * k as f64 / (half - 1) as f64;
        points.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise).expect("valid noise");
        for p in &mut points {
            for x in p.iter_mut() {
                *x += normal.sample(&mut rng);
            }
        }
    }
    Ok(SyntheticDataset {
        points,
        labels,
        spec: DatasetSpec::TwoMoons { n, noise },
        seed,
    })
}

/// Isotropic Gaussian blobs; point `i` belongs to class `i mod centers`.
pub fn synth_blobs(n: usize, centers: &[Vec<f64>], sigma: f64, seed: u64) -> Result<SyntheticDataset> {
    if centers.is_empty() {
        return Err(Error::invalid("blobs need at least one center"));
    }
    let dim = centers[0].len();
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid("blob centers have different dimensions"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, if sigma > 0.0 { sigma } else { 1.0 }).expect("valid sigma");
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers.len();
        let p = centers[c]
            .iter()
            .map(|&x| if sigma > 0.0 { x + normal.sample(&mut rng) } else { x })
            .collect();
        points.push(p);
        labels.push(c);
    }
    Ok(SyntheticDataset {
        points,
        labels,
        spec: DatasetSpec::Blobs {
            n,
            centers: centers.to_vec(),
            sigma,
        },
        seed,
    })
}

/// Random connected graph: a random spanning tree plus independent extra
/// edges with probability `p`; weights uniform in `[0.1, 1)`.
pub fn synth_random_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::invalid("random graph needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("edge probability must be in [0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeMap::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.insert((u, v), rng.gen_range(0.1..1.0));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                let w = rng.gen_range(0.1..1.0);
                edges.entry((i, j)).or_insert(w);
            }
        }
    }
    Graph::from_edges(n, edges.into_iter().map(|((i, j), w)| (i, j, w)))
}

/// SplitMix64 mixing of a base seed with a path of integers.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Draws datasets until the kNN graph is connected.
fn connected_sample(
    spec: &DatasetSpec,
    k: usize,
    sigma: Option<f64>,
    base: u64,
    parts: &[u64],
) -> Result<(SyntheticDataset, Graph)> {
    for retry in 0..CONNECTIVITY_RETRIES {
        let mut path = parts.to_vec();
        path.push(retry);
        let data = spec.generate(derive_seed(base, &path))?;
        let g = build_knn_graph(&data.points, k, sigma)?;
        if g.is_connected() {
            return Ok((data, g));
        }
    }
    Err(Error::invalid(format!(
        "kNN graph (k = {k}) stayed disconnected after {CONNECTIVITY_RETRIES} reseeds; use a larger k"
    )))
}

/// One CSV row: a trial of one method at one size. Columns that do not
/// apply to a study are left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub experiment: String,
    pub seed: u64,
    pub n: usize,
    pub method: String,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    /// AUC of the uncentered `L† t` scores (Poisson rows).
    pub reference_auc: Option<f64>,
    pub peakiness: Option<f64>,
    pub rank_match: Option<bool>,
    pub alpha_sum: Option<f64>,
    pub offset: Option<f64>,
    pub max_diff: Option<f64>,
    pub signed_volume: Option<f64>,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub ct: Option<f64>,
    pub ct_limit: Option<f64>,
    pub relative_gap: Option<f64>,
    pub k_ij: Option<f64>,
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl TrialRow {
    fn new(experiment: &str, seed: u64, n: usize, method: &str) -> Self {
        TrialRow {
            experiment: experiment.to_string(),
            seed,
            n,
            method: method.to_string(),
            accuracy: None,
            auc: None,
            reference_auc: None,
            peakiness: None,
            rank_match: None,
            alpha_sum: None,
            offset: None,
            max_diff: None,
            signed_volume: None,
            i: None,
            j: None,
            ct: None,
            ct_limit: None,
            relative_gap: None,
            k_ij: None,
            runtime_ms: 0.0,
        }
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut push = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        push("accuracy", self.accuracy);
        push("auc", self.auc);
        push("peakiness", self.peakiness);
        push("alpha_sum", self.alpha_sum);
        push("max_diff", self.max_diff);
        push("relative_gap", self.relative_gap);
        push("k_ij", self.k_ij);
        push("abs_k_ij", self.k_ij.map(f64::abs));
        push("rank_match", self.rank_match.map(|b| if b { 1.0 } else { 0.0 }));
        push("runtime_ms", Some(self.runtime_ms));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Aggregate over trials for one (size, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub n: usize,
    pub method: String,
    pub trials: usize,
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub rows: Vec<TrialRow>,
}

impl ExperimentReport {
    /// Cells in order of first appearance among the rows.
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut order: Vec<(usize, String)> = Vec::new();
        let mut cells: BTreeMap<(usize, String), Vec<&TrialRow>> = BTreeMap::new();
        for row in &self.rows {
            let key = (row.n, row.method.clone());
            if !cells.contains_key(&key) {
                order.push(key.clone());
            }
            cells.entry(key).or_default().push(row);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &cells[&key];
                let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
                for r in rows {
                    for (name, v) in r.metrics() {
                        values.entry(name).or_default().push(v);
                    }
                }
                CellSummary {
                    n: key.0,
                    method: key.1,
                    trials: rows.len(),
                    metrics: values
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), Stat::of(&v)))
                        .collect(),
                }
            })
            .collect()
    }

    pub fn cell(&self, n: usize, method: &str) -> Option<CellSummary> {
        self.summary().into_iter().find(|c| c.n == n && c.method == method)
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            experiment: &'a str,
            seed: u64,
            rows: usize,
            cells: Vec<CellSummary>,
        }
        Ok(serde_json::to_string_pretty(&Summary {
            experiment: &self.experiment,
            seed: self.seed,
            rows: self.rows.len(),
            cells: self.summary(),
        })?)
    }

    /// Writes `<experiment>_<seed>.csv` and `<experiment>_<seed>.json` into
    /// `dir`, returning both paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let stem = format!("{}_{}", self.experiment, self.seed);
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&csv_path, self.csv_string()?)?;
        fs::write(&json_path, self.summary_json()?)?;
        Ok((csv_path, json_path))
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub sizes: Vec<usize>,
    pub k: usize,
    /// `None`: mean k-th neighbor distance of each sampled graph.
    pub sigma: Option<f64>,
    pub noise: f64,
    /// Fixed locations; the anchors are the samples nearest to them.
    pub probes: [[f64; 2]; 2],
    pub trials: usize,
    pub seed: u64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            sizes: vec![200, 400, 800, 1600],
            k: 10,
            sigma: None,
            noise: 0.1,
            probes: [[0.0, 1.0], [1.0, -0.5]],
            trials: 10,
            seed: 0,
        }
    }
}

fn nearest(points: &[Vec<f64>], probe: &[f64], exclude: Option<usize>) -> usize {
    let dist = |p: &Vec<f64>| -> f64 { p.iter().zip(probe).map(|(a, b)| (a - b) * (a - b)).sum() };
    (0..points.len())
        .filter(|&i| Some(i) != exclude)
        .min_by(|&a, &b| dist(&points[a]).total_cmp(&dist(&points[b])).then(a.cmp(&b)))
        .expect("at least two points")
}

/// Commute-time and kernel-entry degeneracy between two fixed anchors as
/// the two-moons sample grows.
pub fn scaling_study(params: &ScalingParams, cfg: &SolverConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if params.sizes.is_empty() {
        return Err(Error::invalid("scaling study needs at least one size"));
    }
    if params.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes must be strictly increasing"));
    }
    if params.trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let rows: Vec<Vec<TrialRow>> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = params.seed + trial as u64;
            params
                .sizes
                .iter()
                .map(|&n| {
                    let start = Instant::now();
                    let spec = DatasetSpec::TwoMoons { n, noise: params.noise };
                    let (data, g) = connected_sample(&spec, params.k, params.sigma, trial_seed, &[n as u64])?;
                    let i = nearest(&data.points, &params.probes[0], None);
                    let j = nearest(&data.points, &params.probes[1], Some(i));
                    let m = ct_limit_gap(&g, i, j, cfg)?;
                    let mut row = TrialRow::new("scaling", trial_seed, n, "pinv");
                    row.i = Some(i);
                    row.j = Some(j);
                    row.ct = Some(m.ct);
                    row.ct_limit = Some(m.ct_limit);
                    row.relative_gap = Some(m.relative_gap);
                    row.k_ij = Some(m.k_ij);
                    row.runtime_ms = elapsed_ms(start);
                    Ok(row)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        experiment: "scaling".into(),
        seed: params.seed,
        rows: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowLabelParams {
    pub dataset: DatasetSpec,
    pub labels_per_class: usize,
    pub methods: Vec<MethodSpec>,
    pub trials: usize,
    pub k: usize,
    pub sigma: Option<f64>,
    /// Band width for the peakiness metric.
    pub epsilon_fraction: f64,
    pub seed: u64,
}

impl Default for LowLabelParams {
    fn default() -> Self {
        LowLabelParams {
            dataset: DatasetSpec::TwoMoons { n: 1600, noise: 0.1 },
            labels_per_class: 1,
            methods: vec![
                MethodSpec::Laplace,
                MethodSpec::Regularize {
                    lambda: 1.0,
                    mask: MaskMode::LabeledOnly,
                },
                MethodSpec::Poisson,
            ],
            trials: 20,
            k: 10,
            sigma: None,
            epsilon_fraction: 0.05,
            seed: 0,
        }
    }
}

fn sample_labeled(classes: &[usize], num_classes: usize, per_class: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for c in 0..num_classes {
        let members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        if members.is_empty() {
            return Err(Error::invalid(format!("class {c} is absent from the data")));
        }
        if members.len() < per_class {
            return Err(Error::invalid(format!(
                "class {c} has {} points, fewer than {per_class} labels requested",
                members.len()
            )));
        }
        let mut picked: Vec<usize> = sample(rng, members.len(), per_class).into_iter().map(|k| members[k]).collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| (i, c)));
    }
    out.sort_unstable();
    Ok(out)
}

/// Nodes scored for accuracy and AUC: the unlabeled ones, or all nodes
/// when every node carries a label.
fn evaluation_nodes(n: usize, labeled: &[(usize, usize)]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &(i, _) in labeled {
        mask[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    if free.is_empty() {
        (0..n).collect()
    } else {
        free
    }
}

fn auc_on(scores: &[f64], truth: &[bool], nodes: &[usize]) -> Option<f64> {
    let s: Vec<f64> = nodes.iter().map(|&i| scores[i]).collect();
    let t: Vec<bool> = nodes.iter().map(|&i| truth[i]).collect();
    auc(&s, &t).ok()
}

/// Each trial samples `labels_per_class` nodes per class and scores every
/// method on the same graph and labels.
///
/// Two classes use labels +1 (class 0) / -1 (class 1) and the sign rule at
/// 0; more classes use one-vs-rest with argmax.
pub fn low_label_experiment(params: &LowLabelParams, cfg: &SolverConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if params.labels_per_class == 0 {
        return Err(Error::invalid("labels_per_class must be at least 1"));
    }
    if params.trials == 0 || params.methods.is_empty() {
        return Err(Error::invalid("need at least one trial and one method"));
    }
    let rows: Vec<Vec<TrialRow>> = (0..params.trials)
        .into_par_iter()
        .map(|trial| low_label_trial(params, trial as u64, cfg))
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        experiment: "lowlabel".into(),
        seed: params.seed,
        rows: rows.into_iter().flatten().collect(),
    })
}

fn low_label_trial(params: &LowLabelParams, trial: u64, cfg: &SolverConfig) -> Result<Vec<TrialRow>> {
    let trial_seed = params.seed + trial;
    let (data, g) = connected_sample(&params.dataset, params.k, params.sigma, trial_seed, &[0])?;
    let n = g.n();
    let num_classes = data.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, &[1]));
    let labeled = sample_labeled(&data.labels, num_classes, params.labels_per_class, &mut rng)?;
    let eval = evaluation_nodes(n, &labeled);
    let accuracy = |pred: &dyn Fn(usize) -> usize| {
        eval.iter().filter(|&&i| pred(i) == data.labels[i]).count() as f64 / eval.len() as f64
    };

    let mut rows = Vec::with_capacity(params.methods.len());
    for spec in &params.methods {
        let start = Instant::now();
        let mut row = TrialRow::new("lowlabel", trial_seed, n, spec.method().name());
        if num_classes == 2 {
            let labels = LabelSet::new(n, labeled.iter().map(|&(i, c)| (i, if c == 0 { 1.0 } else { -1.0 })))?;
            let sol = spec.run(&g, &labels, cfg)?;
            let truth: Vec<bool> = data.labels.iter().map(|&c| c == 0).collect();
            row.accuracy = Some(accuracy(&|i| if sol.u[i] >= 0.0 { 0 } else { 1 }));
            row.auc = auc_on(&sol.u, &truth, &eval);
            row.peakiness = peakiness(&sol.u, &labels, params.epsilon_fraction).ok();
            row.alpha_sum = Some(sol.alpha_sum());
            row.offset = Some(sol.offset);
            if matches!(spec, MethodSpec::Poisson) {
                let (pinv_t, _) = centered_pinv(&g, &labels, cfg)?;
                row.rank_match = Some(argsort(&sol.u) == argsort(&pinv_t));
                row.reference_auc = auc_on(&pinv_t, &truth, &eval);
            }
        } else {
            let ovr = one_vs_rest(&g, &labeled, num_classes, *spec, cfg)?;
            row.accuracy = Some(accuracy(&|i| ovr.predictions[i]));
            let mut aucs = Vec::new();
            let mut peaks = Vec::new();
            let mut rank_match = true;
            let mut ref_aucs = Vec::new();
            for (c, col) in ovr.columns.iter().enumerate() {
                let truth: Vec<bool> = data.labels.iter().map(|&l| l == c).collect();
                aucs.extend(auc_on(&col.u, &truth, &eval));
                let labels = column_labels(n, &labeled, c)?;
                peaks.extend(peakiness(&col.u, &labels, params.epsilon_fraction).ok());
                if matches!(spec, MethodSpec::Poisson) {
                    let (pinv_t, _) = centered_pinv(&g, &labels, cfg)?;
                    rank_match &= argsort(&col.u) == argsort(&pinv_t);
                    ref_aucs.extend(auc_on(&pinv_t, &truth, &eval));
                }
            }
            row.auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
            row.peakiness = (!peaks.is_empty()).then(|| peaks.iter().sum::<f64>() / peaks.len() as f64);
            if matches!(spec, MethodSpec::Poisson) {
                row.rank_match = Some(rank_match);
                row.reference_auc = (!ref_aucs.is_empty()).then(|| ref_aucs.iter().sum::<f64>() / ref_aucs.len() as f64);
            }
        }
        row.runtime_ms = elapsed_ms(start);
        rows.push(row);
    }
    Ok(rows)
}

/// Poisson learning against the shifted pseudoinverse `L† t + c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceAudit {
    /// `‖u_poisson - (L† t + c·1)‖∞`; `L†` is dense for n ≤ 500.
    pub max_diff: f64,
    /// Whether `u_poisson` and `L† t` order the nodes identically.
    pub rank_match: bool,
    pub offset: f64,
    /// `Σ α` per method (regularization uses λ = 1, labeled-only loss).
    pub alpha_sums: BTreeMap<String, f64>,
    /// `Σ sign(uᵢ) dᵢ` of the Poisson scores.
    pub signed_volume: f64,
}

pub fn equivalence_audit(g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<EquivalenceAudit> {
    let sol = poisson_learn(g, labels, cfg)?;
    // ranks are compared against the solver's own L† t; the dense oracle,
    // when affordable, only checks the values
    let pinv_t = centered_pinv(g, labels, cfg)?.0;
    let reference: Vec<f64> = if g.n() <= DENSE_CAP {
        let k = dense_pinv(g)?;
        let t = labels.source_vector(g.n());
        (0..g.n())
            .map(|i| (0..g.n()).map(|j| k[(i, j)] * t[j]).sum())
            .collect()
    } else {
        pinv_t.clone()
    };
    let shifted: Vec<f64> = reference.iter().map(|v| v + sol.offset).collect();
    let regularized = laplace_regularize(g, labels, 1.0, MaskMode::LabeledOnly, cfg)?;
    let alpha_sums = BTreeMap::from([
        ("laplace".to_string(), laplace_alpha(g, labels)?.values().sum()),
        ("regularize".to_string(), regularized.alpha_sum()),
        ("poisson".to_string(), sol.alpha_sum()),
    ]);
    Ok(EquivalenceAudit {
        max_diff: max_abs_diff(&sol.u, &shifted),
        rank_match: argsort(&sol.u) == argsort(&pinv_t),
        offset: sol.offset,
        alpha_sums,
        signed_volume: signed_volume(&sol.u, g.degree()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceParams {
    pub n: usize,
    /// Extra-edge probability of the random graphs.
    pub edge_prob: f64,
    /// Fraction of nodes labeled, at least one.
    pub label_fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        EquivalenceParams {
            n: 100,
            edge_prob: 0.05,
            label_fraction: 0.1,
            trials: 50,
            seed: 0,
        }
    }
}

/// Runs [`equivalence_audit`] on random connected graphs with random real
/// labels, one Poisson row plus one α-sum row per other method.
pub fn equivalence_study(params: &EquivalenceParams, cfg: &SolverConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if params.n < 2 || params.trials == 0 {
        return Err(Error::invalid("equivalence study needs n >= 2 and at least one trial"));
    }
    if !(params.label_fraction > 0.0 && params.label_fraction <= 1.0) {
        return Err(Error::invalid("label_fraction must be in (0, 1]"));
    }
    let rows: Vec<Vec<TrialRow>> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let start = Instant::now();
            let trial_seed = params.seed + trial as u64;
            let g = synth_random_graph(params.n, params.edge_prob, derive_seed(trial_seed, &[0]))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, &[1]));
            let m = ((params.n as f64 * params.label_fraction).round() as usize).clamp(1, params.n);
            let idx = sample(&mut rng, params.n, m).into_vec();
            let labels = LabelSet::new(params.n, idx.into_iter().map(|i| (i, rng.gen_range(-1.0..1.0))))?;
            let audit = equivalence_audit(&g, &labels, cfg)?;
            let ms = elapsed_ms(start);
            let mut out = Vec::new();
            for (method, sum) in &audit.alpha_sums {
                let mut row = TrialRow::new("equivalence", trial_seed, params.n, method);
                row.alpha_sum = Some(*sum);
                if method == "poisson" {
                    row.max_diff = Some(audit.max_diff);
                    row.rank_match = Some(audit.rank_match);
                    row.offset = Some(audit.offset);
                    row.signed_volume = Some(audit.signed_volume);
                }
                row.runtime_ms = ms;
                out.push(row);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        experiment: "equivalence".into(),
        seed: params.seed,
        rows: rows.into_iter().flatten().collect(),
    })
}
