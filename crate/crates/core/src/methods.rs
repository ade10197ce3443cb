//! Laplace learning, Laplace regularization and Poisson learning.
//!
//! Every method returns an [`SslSolution`] holding the score vector `u`
//! together with its kernel form `u = K α + c`: which kernel `K` applies,
//! the weight vector `α` and the offset `c`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelSet};
use crate::solvers::{
    cg_solve, check_labels, dot, pinv_apply, schur_solve, PinvNormalization, ShiftedLaplacian, SolveReport,
    SolverConfig,
};

/// Sparse vector keyed by node id.
pub type SparseVec = BTreeMap<usize, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Data term only on labeled nodes: `(L + λM) u = λ M y`.
    #[default]
    LabeledOnly,
    /// Data term on every node, zero-padded labels: `(L + λI) u = λ y`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelId {
    /// `L†`
    FullPinv,
    /// `L₂⁻¹` on the unlabeled block
    UnlabeledBlockInv,
    /// `(L + λM)⁻¹`, with `M = I` in [`MaskMode::Full`]
    Regularized { lambda: f64, mask: MaskMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Laplace,
    Regularize,
    Poisson,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Laplace => "laplace",
            Method::Regularize => "regularize",
            Method::Poisson => "poisson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslSolution {
    pub method: Method,
    pub u: Vec<f64>,
    pub alpha: SparseVec,
    pub offset: f64,
    pub kernel: KernelId,
    pub report: SolveReport,
}

/// On-disk JSON form of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_mode: Option<MaskMode>,
    pub u: Vec<f64>,
    pub alpha: SparseVec,
    pub offset: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl SslSolution {
    pub fn predict_binary(&self, threshold: f64) -> Vec<i8> {
        predict_binary(&self.u, threshold)
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.values().sum()
    }

    pub fn to_json(&self) -> SolutionJson {
        let (lambda, mask_mode) = match self.kernel {
            KernelId::Regularized { lambda, mask } => (Some(lambda), Some(mask)),
            _ => (None, None),
        };
        SolutionJson {
            method: self.method,
            lambda,
            mask_mode,
            u: self.u.clone(),
            alpha: self.alpha.clone(),
            offset: self.offset,
            iterations: self.report.iterations,
            residual: self.report.final_residual,
        }
    }

    pub fn from_json(json: SolutionJson) -> Result<Self> {
        let kernel = match json.method {
            Method::Laplace => KernelId::UnlabeledBlockInv,
            Method::Poisson => KernelId::FullPinv,
            Method::Regularize => KernelId::Regularized {
                lambda: json
                    .lambda
                    .ok_or_else(|| Error::invalid("regularize solution without lambda"))?,
                mask: json.mask_mode.unwrap_or_default(),
            },
        };
        Ok(SslSolution {
            method: json.method,
            u: json.u,
            alpha: json.alpha,
            offset: json.offset,
            kernel,
            report: SolveReport {
                iterations: json.iterations,
                final_residual: json.residual,
                converged: true,
                rhs_mean_removed: 0.0,
            },
        })
    }
}

/// `sign(uᵢ - threshold)` with `sign(0) = +1`.
pub fn predict_binary(u: &[f64], threshold: f64) -> Vec<i8> {
    u.iter().map(|&v| if v - threshold >= 0.0 { 1 } else { -1 }).collect()
}

/// `αᵢ = Σ_{j labeled} wᵢⱼ yⱼ` for each unlabeled node `i` adjacent to a
/// labeled node. Nodes away from the labels carry no entry.
pub fn laplace_alpha(g: &Graph, labels: &LabelSet) -> Result<SparseVec> {
    check_labels(g, labels)?;
    let mask = labels.mask(g.n());
    let y = labels.padded(g.n());
    let mut border: Vec<usize> = labels
        .indices()
        .iter()
        .flat_map(|&j| g.neighbors(j).map(|(i, _)| i))
        .filter(|&i| !mask[i])
        .collect();
    border.sort_unstable();
    border.dedup();
    Ok(border
        .into_iter()
        .map(|i| {
            let a = g
                .neighbors(i)
                .filter(|&(j, _)| mask[j])
                .map(|(j, w)| w * y[j])
                .sum();
            (i, a)
        })
        .collect())
}

/// Harmonic extension of the labels: `u = y` on labeled nodes and
/// `(Lu)ᵢ = 0` elsewhere.
pub fn laplace_learn(g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<SslSolution> {
    g.require_connected()?;
    let (z, report) = schur_solve(g, labels, cfg)?;
    let report = report.into_result()?;
    let mut u = labels.padded(g.n());
    for (&i, zi) in labels.unlabeled(g.n()).iter().zip(z) {
        u[i] = zi;
    }
    Ok(SslSolution {
        method: Method::Laplace,
        u,
        alpha: laplace_alpha(g, labels)?,
        offset: 0.0,
        kernel: KernelId::UnlabeledBlockInv,
        report,
    })
}

/// Soft-constraint Laplace regularization; `lambda` weighs the data term.
pub fn laplace_regularize(
    g: &Graph,
    labels: &LabelSet,
    lambda: f64,
    mask: MaskMode,
    cfg: &SolverConfig,
) -> Result<SslSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    check_labels(g, labels)?;
    g.require_connected()?;
    let n = g.n();
    let shift = match mask {
        MaskMode::LabeledOnly => labels.mask(n).into_iter().map(|m| if m { lambda } else { 0.0 }).collect(),
        MaskMode::Full => vec![lambda; n],
    };
    let alpha: SparseVec = labels.iter().map(|(i, y)| (i, lambda * y)).collect();
    // Solve for e = u - y instead of u: (L + λM) e = -L y. The right-hand
    // side stays O(|y|) as λ grows, so the relative tolerance keeps its
    // meaning in the stiff regime.
    let y = labels.padded(n);
    let rhs: Vec<f64> = g.laplacian_apply(&y)?.into_iter().map(|v| -v).collect();
    let op = ShiftedLaplacian { graph: g, shift };
    let (e, report) = cg_solve(&op, &rhs, cfg)?;
    let u = y.iter().zip(&e).map(|(a, b)| a + b).collect();
    Ok(SslSolution {
        method: Method::Regularize,
        u,
        alpha,
        offset: 0.0,
        kernel: KernelId::Regularized { lambda, mask },
        report: report.into_result()?,
    })
}

/// `L† t` for the centered source `t`, together with its solve report.
pub(crate) fn centered_pinv(g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    check_labels(g, labels)?;
    let cfg = cfg.with_normalization(PinvNormalization::MeanZero);
    let t = labels.source_vector(g.n());
    let (x, report) = pinv_apply(g, &t, &cfg)?;
    Ok((x, report.into_result()?))
}

fn offset_for(g: &Graph, pinv_t: &[f64]) -> f64 {
    -dot(g.degree(), pinv_t) / g.volume()
}

/// Poisson learning: `Lu = t` with `Σ dᵢ uᵢ = 0`, computed as
/// `u = L† t + c` with `c = -⟨d, L† t⟩ / Σ dᵢ`.
pub fn poisson_learn(g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<SslSolution> {
    let (x, report) = centered_pinv(g, labels, cfg)?;
    let c = offset_for(g, &x);
    let u = x.iter().map(|v| v + c).collect();
    let alpha = labels.indices().iter().copied().zip(labels.centered_values()).collect();
    Ok(SslSolution {
        method: Method::Poisson,
        u,
        alpha,
        offset: c,
        kernel: KernelId::FullPinv,
        report,
    })
}

/// The Poisson offset `c` alone.
pub fn poisson_offset(g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<f64> {
    let (x, _) = centered_pinv(g, labels, cfg)?;
    Ok(offset_for(g, &x))
}

/// A method plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum MethodSpec {
    Laplace,
    Regularize { lambda: f64, mask: MaskMode },
    Poisson,
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Laplace => Method::Laplace,
            MethodSpec::Regularize { .. } => Method::Regularize,
            MethodSpec::Poisson => Method::Poisson,
        }
    }

    pub fn run(&self, g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<SslSolution> {
        match *self {
            MethodSpec::Laplace => laplace_learn(g, labels, cfg),
            MethodSpec::Regularize { lambda, mask } => laplace_regularize(g, labels, lambda, mask, cfg),
            MethodSpec::Poisson => poisson_learn(g, labels, cfg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OneVsRest {
    /// One solution per class id.
    pub columns: Vec<SslSolution>,
    /// Per-node argmax over columns, ties to the lowest class id.
    pub predictions: Vec<usize>,
}

/// Labels of one one-vs-rest column: `1{class} - share of class`.
pub fn column_labels(n: usize, labeled: &[(usize, usize)], class: usize) -> Result<LabelSet> {
    let share = labeled.iter().filter(|&&(_, c)| c == class).count() as f64 / labeled.len() as f64;
    LabelSet::new(
        n,
        labeled
            .iter()
            .map(|&(i, c)| (i, if c == class { 1.0 - share } else { -share })),
    )
}

/// One-vs-rest multi-class wrapper: column `c` is labeled `1{class = c}`,
/// recentered by its mean over the labeled nodes.
pub fn one_vs_rest(
    g: &Graph,
    labeled: &[(usize, usize)],
    num_classes: usize,
    spec: MethodSpec,
    cfg: &SolverConfig,
) -> Result<OneVsRest> {
    if num_classes == 0 {
        return Err(Error::invalid("need at least one class"));
    }
    if let Some(&(i, c)) = labeled.iter().find(|&&(_, c)| c >= num_classes) {
        return Err(Error::invalid(format!("node {i} has class {c} >= {num_classes}")));
    }
    let columns: Vec<SslSolution> = (0..num_classes)
        .into_par_iter()
        .map(|class| spec.run(g, &column_labels(g.n(), labeled, class)?, cfg))
        .collect::<Result<_>>()?;
    let predictions = (0..g.n())
        .map(|i| {
            let mut best = 0;
            for c in 1..num_classes {
                if columns[c].u[i] > columns[best].u[i] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(OneVsRest { columns, predictions })
}
