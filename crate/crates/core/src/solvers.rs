//! Matrix-free solvers over the graph Laplacian.
//!
//! Everything here runs Jacobi-preconditioned conjugate gradients on a
//! [`LinearOperator`]. The only dense code is [`dense_pinv`], kept as an
//! independent oracle for small graphs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelSet};

/// Largest graph accepted by the dense oracles.
pub const DENSE_CAP: usize = 500;

/// Which member of `x + c·1` a pseudoinverse solve returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinvNormalization {
    /// `Σ xᵢ = 0`: the Moore-Penrose solution.
    #[default]
    MeanZero,
    /// `Σ dᵢ xᵢ = 0`.
    DegreeMeanZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    /// `None` means `10 · n`.
    pub max_iter: Option<usize>,
    pub pinv_normalization: PinvNormalization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            max_iter: None,
            pinv_normalization: PinvNormalization::MeanZero,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        SolverConfig {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_normalization(self, pinv_normalization: PinvNormalization) -> Self {
        SolverConfig {
            pinv_normalization,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖Ax - b‖₂ / ‖b‖₂`, recomputed from the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
    /// Mean subtracted from the right-hand side to put it in `range(L)`;
    /// zero when no projection was needed.
    pub rhs_mean_removed: f64,
}

impl SolveReport {
    fn trivial() -> Self {
        SolveReport {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            rhs_mean_removed: 0.0,
        }
    }

    pub(crate) fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.final_residual,
            })
        }
    }
}

/// A symmetric linear operator that CG can solve against.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal entries, used for Jacobi preconditioning.
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for Graph {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.laplacian_apply_into(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.degree().to_vec()
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diagonal().iter().copied().collect()
    }
}

/// `L + diag(shift)`.
pub struct ShiftedLaplacian<'a> {
    pub graph: &'a Graph,
    pub shift: Vec<f64>,
}

impl LinearOperator for ShiftedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.graph.laplacian_apply_into(x, y);
        for ((yi, s), xi) in y.iter_mut().zip(&self.shift).zip(x) {
            *yi += s * xi;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.graph.degree().iter().zip(&self.shift).map(|(d, s)| d + s).collect()
    }
}

/// Principal submatrix of `L` on a node subset (the unlabeled block `L₂`).
pub struct LaplacianBlock<'a> {
    graph: &'a Graph,
    nodes: Vec<usize>,
    /// global id -> position in `nodes`, `usize::MAX` outside the block
    local: Vec<usize>,
}

impl<'a> LaplacianBlock<'a> {
    pub fn new(graph: &'a Graph, nodes: Vec<usize>) -> Self {
        let mut local = vec![usize::MAX; graph.n()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = k;
        }
        LaplacianBlock { graph, nodes, local }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
}

impl LinearOperator for LaplacianBlock<'_> {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.graph.degree();
        for (k, &i) in self.nodes.iter().enumerate() {
            let off: f64 = self
                .graph
                .neighbors(i)
                .filter_map(|(j, w)| {
                    let l = self.local[j];
                    (l != usize::MAX).then(|| w * x[l])
                })
                .sum();
            y[k] = d[i] * x[k] - off;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let d = self.graph.degree();
        self.nodes.iter().map(|&i| d[i]).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn residual<A: LinearOperator + ?Sized>(op: &A, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut ax = vec![0.0; b.len()];
    op.apply(x, &mut ax);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Non-convergence is not an error here: the best iterate comes back with
/// `converged = false`.
pub fn cg_solve<A: LinearOperator + ?Sized>(op: &A, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport::trivial()));
    }
    let target = cfg.rel_tol * bnorm;
    let max_iter = cfg.iteration_cap(n);
    let inv_diag: Vec<f64> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64]| -> Vec<f64> { r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect() };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    while iterations < max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;

        if norm2(&r) <= target {
            // The recurrence drifts from the true residual; confirm before stopping.
            r = residual(op, &x, b);
            if norm2(&r) <= target {
                break;
            }
            z = precondition(&r);
            p.clone_from(&z);
            rz = dot(&r, &z);
            continue;
        }

        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let final_residual = norm2(&residual(op, &x, b)) / bnorm;
    let report = SolveReport {
        iterations,
        final_residual,
        converged: final_residual <= cfg.rel_tol,
        rhs_mean_removed: 0.0,
    };
    Ok((x, report))
}

/// `L† b` on a connected graph.
///
/// A right-hand side with nonzero sum is first projected onto `range(L)`
/// by removing its mean; the removed mean is recorded in the report. The
/// representative of the solution is fixed by `cfg.pinv_normalization`.
pub fn pinv_apply(g: &Graph, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = g.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    g.require_connected()?;

    let mean = b.iter().sum::<f64>() / n as f64;
    let rhs: Vec<f64> = if mean != 0.0 {
        b.iter().map(|v| v - mean).collect()
    } else {
        b.to_vec()
    };
    let (mut x, mut report) = cg_solve(g, &rhs, cfg)?;
    report.rhs_mean_removed = mean;
    if report.iterations == 0 && report.converged {
        return Ok((x, report));
    }

    normalize(g, &mut x, cfg.pinv_normalization);
    let rnorm = norm2(&rhs);
    if rnorm > 0.0 {
        report.final_residual = norm2(&residual(g, &x, &rhs)) / rnorm;
        report.converged = report.final_residual <= cfg.rel_tol;
    }
    Ok((x, report))
}

pub(crate) fn normalize(g: &Graph, x: &mut [f64], mode: PinvNormalization) {
    let shift = match mode {
        PinvNormalization::MeanZero => x.iter().sum::<f64>() / x.len() as f64,
        PinvNormalization::DegreeMeanZero => dot(g.degree(), x) / g.volume(),
    };
    for v in x.iter_mut() {
        *v -= shift;
    }
}

/// Errors unless every unlabeled node can reach some labeled node, which is
/// exactly when `L₂` is nonsingular.
pub(crate) fn require_reachable(g: &Graph, labels: &LabelSet) -> Result<()> {
    let mut seen = labels.mask(g.n());
    let mut stack: Vec<usize> = labels.indices().to_vec();
    while let Some(v) = stack.pop() {
        for (u, _) in g.neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    let missing = seen.iter().filter(|s| !**s).count();
    if missing > 0 {
        return Err(Error::UnreachableUnlabeled { nodes: missing });
    }
    Ok(())
}

/// Harmonic extension on the unlabeled block: solves `L₂ z = -L₂₁ v`.
///
/// `z` is ordered by ascending unlabeled node id.
pub fn schur_solve(g: &Graph, labels: &LabelSet, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    check_labels(g, labels)?;
    require_reachable(g, labels)?;
    let block = LaplacianBlock::new(g, labels.unlabeled(g.n()));
    if block.dim() == 0 {
        return Ok((Vec::new(), SolveReport::trivial()));
    }
    let y = labels.padded(g.n());
    let mask = labels.mask(g.n());
    let rhs: Vec<f64> = block
        .nodes()
        .iter()
        .map(|&i| {
            g.neighbors(i)
                .filter(|&(j, _)| mask[j])
                .map(|(j, w)| w * y[j])
                .sum()
        })
        .collect();
    cg_solve(&block, &rhs, cfg)
}

pub(crate) fn check_labels(g: &Graph, labels: &LabelSet) -> Result<()> {
    match labels.indices().last() {
        Some(&i) if i >= g.n() => Err(Error::invalid(format!(
            "labeled node {i} out of range for n = {}",
            g.n()
        ))),
        _ => Ok(()),
    }
}

/// Dense `D - W`.
pub fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = g.degree()[i];
        for (j, w) in g.neighbors(i) {
            l[(i, j)] = -w;
        }
    }
    l
}

/// Dense Moore-Penrose pseudoinverse of `L` as `(L + J/n)⁻¹ - J/n`.
pub fn dense_pinv(g: &Graph) -> Result<DMatrix<f64>> {
    let n = g.n();
    if n > DENSE_CAP {
        return Err(Error::SizeCap { n, cap: DENSE_CAP });
    }
    g.require_connected()?;
    if n == 1 {
        return Ok(DMatrix::zeros(1, 1));
    }
    let jn = 1.0 / n as f64;
    let shifted = dense_laplacian(g).add_scalar(jn);
    let inv = dense_spd_inverse(shifted)?;
    let k = inv.add_scalar(-jn);
    Ok((&k + k.transpose()) * 0.5)
}

pub(crate) fn dense_spd_inverse(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::invalid("matrix is not positive definite"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn p2() -> Graph {
        Graph::from_edges(2, [(0, 1, 1.0)]).unwrap()
    }

    fn p3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn cg_identity_one_iteration() {
        let a = DMatrix::<f64>::identity(3, 3);
        let (x, rep) = cg_solve(&a, &[1.0, 2.0, 3.0], &SolverConfig::default()).unwrap();
        assert!(close(&x, &[1.0, 2.0, 3.0], 1e-14));
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn cg_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let (x, _) = cg_solve(&a, &[1.0, 2.0, 4.0], &SolverConfig::default()).unwrap();
        assert!(close(&x, &[1.0, 1.0, 1.0], 1e-14));
    }

    #[test]
    fn cg_shifted_path() {
        let g = p2();
        let op = ShiftedLaplacian {
            graph: &g,
            shift: vec![1.0, 1.0],
        };
        let (x, rep) = cg_solve(&op, &[1.0, -1.0], &SolverConfig::default()).unwrap();
        assert!(close(&x, &[1.0 / 3.0, -1.0 / 3.0], 1e-14));
        assert!(rep.final_residual <= 1e-10);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let g = triangle();
        let op = ShiftedLaplacian {
            graph: &g,
            shift: vec![1e-3, 0.0, 0.0],
        };
        let cfg = SolverConfig {
            max_iter: Some(1),
            ..Default::default()
        };
        let (_, rep) = cg_solve(&op, &[1.0, 0.5, -2.0], &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!(rep.final_residual > cfg.rel_tol);
    }

    #[test]
    fn pinv_examples() {
        let cfg = SolverConfig::default();
        let (x, _) = pinv_apply(&p3(), &[0.0; 3], &cfg).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        let (x, _) = pinv_apply(&p2(), &[1.0, -1.0], &cfg).unwrap();
        assert!(close(&x, &[0.5, -0.5], 1e-12));
        let (x, _) = pinv_apply(&p3(), &[1.0, 0.0, -1.0], &cfg).unwrap();
        assert!(close(&x, &[1.0, 0.0, -1.0], 1e-12));
    }

    #[test]
    fn pinv_projects_rhs() {
        let (x, rep) = pinv_apply(&p2(), &[2.0, 0.0], &SolverConfig::default()).unwrap();
        assert_eq!(rep.rhs_mean_removed, 1.0);
        assert!(close(&x, &[0.5, -0.5], 1e-12));
    }

    #[test]
    fn pinv_degree_normalization() {
        let g = p3();
        let cfg = SolverConfig::default().with_normalization(PinvNormalization::DegreeMeanZero);
        let (x, _) = pinv_apply(&g, &[1.0, -1.0, 0.0], &cfg).unwrap();
        assert!(dot(g.degree(), &x).abs() < 1e-12);
        let lx = g.laplacian_apply(&x).unwrap();
        assert!(close(&lx, &[1.0, -1.0, 0.0], 1e-10));
    }

    #[test]
    fn pinv_rejects_disconnected() {
        let g = Graph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(
            pinv_apply(&g, &[1.0, -1.0, 0.0, 0.0], &SolverConfig::default()),
            Err(Error::Disconnected { components: 2, .. })
        ));
    }

    #[test]
    fn schur_examples() {
        let cfg = SolverConfig::default();
        let all = LabelSet::new(3, [(0, 1.0), (1, 2.0), (2, 3.0)]).unwrap();
        assert!(schur_solve(&triangle(), &all, &cfg).unwrap().0.is_empty());

        let l = LabelSet::new(3, [(0, 1.0), (1, 0.0)]).unwrap();
        let (z, _) = schur_solve(&triangle(), &l, &cfg).unwrap();
        assert!(close(&z, &[0.5], 1e-12));

        let l = LabelSet::new(3, [(1, 5.0)]).unwrap();
        let (z, _) = schur_solve(&p3(), &l, &cfg).unwrap();
        assert!(close(&z, &[5.0, 5.0], 1e-12));
    }

    #[test]
    fn schur_unreachable() {
        let g = Graph::from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let l = LabelSet::new(4, [(0, 1.0)]).unwrap();
        assert!(matches!(
            schur_solve(&g, &l, &SolverConfig::default()),
            Err(Error::UnreachableUnlabeled { nodes: 2 })
        ));
    }

    #[test]
    fn dense_pinv_examples() {
        let k = dense_pinv(&p2()).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!((k - expect).amax() < 1e-14);

        let single = Graph::from_edges(1, []).unwrap();
        assert_eq!(dense_pinv(&single).unwrap(), DMatrix::zeros(1, 1));

        let k = dense_pinv(&triangle()).unwrap();
        let expect = (DMatrix::<f64>::identity(3, 3) * 3.0).add_scalar(-1.0) / 9.0;
        assert!((k - expect).amax() < 1e-14);
    }

    #[test]
    fn dense_pinv_size_cap() {
        let g = Graph::from_edges(DENSE_CAP + 1, (0..DENSE_CAP).map(|i| (i, i + 1, 1.0))).unwrap();
        assert!(matches!(dense_pinv(&g), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::with_tol(0.0).validate().is_err());
        let cfg = SolverConfig {
            max_iter: Some(0),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(SolverConfig::default().iteration_cap(7), 70);
    }
}
