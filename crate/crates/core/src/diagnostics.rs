//! Kernel-form diagnostics: rebuilding `u` from `(K, α, c)`, per-method
//! decompositions, commute times, kernel decay, peakiness and AUC.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelSet};
use crate::methods::{KernelId, MaskMode, Method, SparseVec, SslSolution};
use crate::solvers::{
    cg_solve, dense_laplacian, dense_pinv, dense_spd_inverse, norm_inf, pinv_apply, LaplacianBlock,
    PinvNormalization, ShiftedLaplacian, SolverConfig, DENSE_CAP,
};

/// A kernel `K` bound to the graph (and labels) it is defined on.
#[derive(Debug, Clone, Copy)]
pub struct Kernel<'a> {
    pub graph: &'a Graph,
    pub id: KernelId,
    pub labels: &'a LabelSet,
}

impl<'a> Kernel<'a> {
    pub fn new(graph: &'a Graph, id: KernelId, labels: &'a LabelSet) -> Self {
        Kernel { graph, id, labels }
    }

    /// Dense matrix of the kernel. For the unlabeled-block kernel this is
    /// `L₂⁻¹`, indexed by the ascending unlabeled node ids.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.graph.n();
        if n > DENSE_CAP {
            return Err(Error::SizeCap { n, cap: DENSE_CAP });
        }
        match self.id {
            KernelId::FullPinv => dense_pinv(self.graph),
            KernelId::UnlabeledBlockInv => {
                let free = self.labels.unlabeled(n);
                if free.is_empty() {
                    return Ok(DMatrix::zeros(0, 0));
                }
                let l = dense_laplacian(self.graph);
                let block = l.select_rows(&free).select_columns(&free);
                dense_spd_inverse(block)
            }
            KernelId::Regularized { lambda, mask } => {
                let mut a = dense_laplacian(self.graph);
                match mask {
                    MaskMode::Full => (0..n).for_each(|i| a[(i, i)] += lambda),
                    MaskMode::LabeledOnly => self.labels.indices().iter().for_each(|&i| a[(i, i)] += lambda),
                }
                dense_spd_inverse(a)
            }
        }
    }
}

fn check_alpha(alpha: &SparseVec, n: usize) -> Result<()> {
    match alpha.keys().next_back() {
        Some(&i) if i >= n => Err(Error::DimensionMismatch {
            expected: n,
            actual: i + 1,
        }),
        _ => Ok(()),
    }
}

/// `uᵢ = Σⱼ αⱼ Kᵢⱼ + c`, evaluated with one matrix-free solve.
///
/// For the unlabeled-block kernel the formula covers the unlabeled nodes;
/// labeled nodes take their label values.
pub fn decision_function(kernel: &Kernel<'_>, alpha: &SparseVec, c: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let g = kernel.graph;
    let n = g.n();
    check_alpha(alpha, n)?;
    let mut dense_alpha = vec![0.0; n];
    for (&i, &a) in alpha {
        dense_alpha[i] = a;
    }
    let (mut u, report) = match kernel.id {
        KernelId::FullPinv => {
            let cfg = cfg.with_normalization(PinvNormalization::MeanZero);
            pinv_apply(g, &dense_alpha, &cfg)?
        }
        KernelId::Regularized { lambda, mask } => {
            let shift = match mask {
                MaskMode::Full => vec![lambda; n],
                MaskMode::LabeledOnly => {
                    kernel.labels.mask(n).into_iter().map(|m| if m { lambda } else { 0.0 }).collect()
                }
            };
            cg_solve(&ShiftedLaplacian { graph: g, shift }, &dense_alpha, cfg)?
        }
        KernelId::UnlabeledBlockInv => {
            let mask = kernel.labels.mask(n);
            if let Some(&i) = alpha.keys().find(|&&i| mask[i]) {
                return Err(Error::invalid(format!(
                    "alpha has an entry on labeled node {i}, outside the unlabeled block"
                )));
            }
            let block = LaplacianBlock::new(g, kernel.labels.unlabeled(n));
            let rhs: Vec<f64> = block.nodes().iter().map(|&i| dense_alpha[i]).collect();
            let (z, report) = cg_solve(&block, &rhs, cfg)?;
            let mut u = kernel.labels.padded(n);
            for (&i, zi) in block.nodes().iter().zip(z) {
                u[i] = zi;
            }
            // the offset applies to the block only
            for &i in block.nodes() {
                u[i] += c;
            }
            report.into_result()?;
            return Ok(u);
        }
    };
    report.into_result()?;
    u.iter_mut().for_each(|v| *v += c);
    Ok(u)
}

/// One row of the method comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodDecomposition {
    pub method: Method,
    pub kernel: KernelId,
    pub alpha: SparseVec,
    pub offset: f64,
    pub alpha_sum: f64,
    /// `‖u - (Kα + c)‖∞` against the dense kernel.
    pub reconstruction_error: f64,
}

impl MethodDecomposition {
    pub fn kernel_label(&self) -> String {
        match self.kernel {
            KernelId::FullPinv => "L^+".into(),
            KernelId::UnlabeledBlockInv => "L_2^-1".into(),
            KernelId::Regularized { lambda, mask: MaskMode::Full } => format!("(L + {lambda}I)^-1"),
            KernelId::Regularized {
                lambda,
                mask: MaskMode::LabeledOnly,
            } => format!("(L + {lambda}M)^-1"),
        }
    }
}

/// Rebuilds `sol.u` from its kernel form with the dense kernel (n ≤ 500).
pub fn decompose(sol: &SslSolution, g: &Graph, labels: &LabelSet) -> Result<MethodDecomposition> {
    let n = g.n();
    if sol.u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: sol.u.len(),
        });
    }
    check_alpha(&sol.alpha, n)?;
    let kernel = Kernel::new(g, sol.kernel, labels);
    let k = kernel.dense()?;
    let rebuilt = match sol.kernel {
        KernelId::UnlabeledBlockInv => {
            let free = labels.unlabeled(n);
            let a = DVector::from_iterator(free.len(), free.iter().map(|i| sol.alpha.get(i).copied().unwrap_or(0.0)));
            let z = &k * a;
            let mut u = labels.padded(n);
            for (&i, zi) in free.iter().zip(z.iter()) {
                u[i] = zi + sol.offset;
            }
            u
        }
        _ => {
            let mut a = DVector::zeros(n);
            for (&i, &v) in &sol.alpha {
                a[i] = v;
            }
            (&k * a).iter().map(|v| v + sol.offset).collect()
        }
    };
    let err = sol.u.iter().zip(&rebuilt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(MethodDecomposition {
        method: sol.method,
        kernel: sol.kernel,
        alpha: sol.alpha.clone(),
        offset: sol.offset,
        alpha_sum: sol.alpha_sum(),
        reconstruction_error: err,
    })
}

fn check_node(g: &Graph, i: usize) -> Result<()> {
    if i >= g.n() {
        return Err(Error::invalid(format!("node {i} out of range for n = {}", g.n())));
    }
    Ok(())
}

/// Commute time `vol(G) · (eᵢ - eⱼ)ᵀ L† (eᵢ - eⱼ)`.
pub fn commute_time(g: &Graph, i: usize, j: usize, cfg: &SolverConfig) -> Result<f64> {
    check_node(g, i)?;
    check_node(g, j)?;
    g.require_connected()?;
    if i == j {
        return Ok(0.0);
    }
    let mut b = vec![0.0; g.n()];
    b[i] = 1.0;
    b[j] = -1.0;
    let (x, report) = pinv_apply(g, &b, cfg)?;
    report.into_result()?;
    Ok(g.volume() * (x[i] - x[j]))
}

/// Commute time against its large-graph limit `vol · (1/dᵢ + 1/dⱼ)`, plus
/// the kernel entry `(L†)ᵢⱼ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegeneracyMeasurement {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub ct: f64,
    pub ct_limit: f64,
    pub relative_gap: f64,
    pub k_ij: f64,
}

pub fn ct_limit_gap(g: &Graph, i: usize, j: usize, cfg: &SolverConfig) -> Result<DegeneracyMeasurement> {
    if i == j {
        return Err(Error::invalid("commute-time gap needs two distinct nodes"));
    }
    let cfg = cfg.with_normalization(PinvNormalization::MeanZero);
    let ct = commute_time(g, i, j, &cfg)?;
    let d = g.degree();
    let vol = g.volume();
    let ct_limit = vol * (1.0 / d[i] + 1.0 / d[j]);
    let mut ej = vec![0.0; g.n()];
    ej[j] = 1.0;
    let (col, report) = pinv_apply(g, &ej, &cfg)?;
    report.into_result()?;
    Ok(DegeneracyMeasurement {
        n: g.n(),
        i,
        j,
        ct,
        ct_limit,
        relative_gap: (ct - ct_limit).abs() / ct,
        k_ij: col[i],
    })
}

/// Fraction of unlabeled nodes whose score lies within
/// `epsilon_fraction · (max u - min u)` of the unlabeled median.
///
/// A constant `u` counts as fully flat (1.0). Band edges are compared with
/// a `1e-12 · range` slack so that values exactly on the edge count.
pub fn peakiness(u: &[f64], labeled: &LabelSet, epsilon_fraction: f64) -> Result<f64> {
    if !(epsilon_fraction > 0.0 && epsilon_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon_fraction must be in (0, 1), got {epsilon_fraction}"
        )));
    }
    if let Some(&i) = labeled.indices().last() {
        if i >= u.len() {
            return Err(Error::invalid(format!("labeled node {i} out of range")));
        }
    }
    let mut free: Vec<f64> = labeled.unlabeled(u.len()).into_iter().map(|i| u[i]).collect();
    if free.is_empty() {
        return Err(Error::invalid("peakiness needs at least one unlabeled node"));
    }
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range.is_nan() || range <= 0.0 {
        return Ok(1.0);
    }
    free.sort_by(f64::total_cmp);
    let m = free.len();
    let median = if m % 2 == 1 {
        free[m / 2]
    } else {
        0.5 * (free[m / 2 - 1] + free[m / 2])
    };
    let band = epsilon_fraction * range + 1e-12 * range;
    let inside = free.iter().filter(|&&v| (v - median).abs() <= band).count();
    Ok(inside as f64 / m as f64)
}

/// Node order by ascending score, ties by node id.
pub fn argsort(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

/// Mann-Whitney AUC; tied scores share their mid-rank (count ½).
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both positive and negative examples"));
    }
    let order = argsort(scores);
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let mid = (start + 1 + end) as f64 / 2.0;
        rank_sum += mid * order[start..end].iter().filter(|&&i| truth[i]).count() as f64;
        start = end;
    }
    let p = n_pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

/// `Σ sign(uᵢ) dᵢ` with `sign(0) = +1`.
pub fn signed_volume(u: &[f64], degree: &[f64]) -> f64 {
    u.iter()
        .zip(degree)
        .map(|(&v, &d)| if v >= 0.0 { d } else { -d })
        .sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn linf(a: &[f64]) -> f64 {
    norm_inf(a)
}
