//! Exact classical graph model: Gaussian weights, their Taylor truncation,
//! Laplacians and the reference eigensolver.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::RMatrix;
use crate::{Error, Result};

/// Input vertices, zero-padded so that `n` and `m` are powers of two.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    vertices: Vec<Vec<f64>>,
    norms: Vec<f64>,
    /// `false` for zero vertices added by padding.
    active: Vec<bool>,
    original_dim: usize,
}

impl VertexSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::input(format!("need at least 2 vertices, got {}", rows.len())));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::input("vertices must have dimension ≥ 1"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::input(format!(
                    "vertex {i} has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("vertex {i} has a non-finite entry")));
            }
        }
        let n_real = rows.len();
        let m = dim.next_power_of_two();
        let n = n_real.next_power_of_two();
        let mut vertices: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|mut r| {
                r.resize(m, 0.0);
                r
            })
            .collect();
        vertices.resize(n, vec![0.0; m]);
        let norms = vertices.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let active = (0..n).map(|i| i < n_real).collect();
        Ok(VertexSet { vertices, norms, active, original_dim: dim })
    }

    /// One vertex per line, comma separated. Blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| {
                        Error::input(format!("line {}: cannot parse `{}`: {e}", lineno + 1, f.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    /// `{"vertices": [[...], ...]}`
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            vertices: Vec<Vec<f64>>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::input(format!("bad vertex json: {e}")))?;
        Self::new(doc.vertices)
    }

    /// Reads CSV or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_csv(&text),
        }
    }

    /// Padded vertex count.
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    /// Padded dimension.
    pub fn m(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn is_padded(&self) -> bool {
        self.active_count() != self.n() || self.original_dim != self.m()
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        self.vertices[i].iter().zip(&self.vertices[j]).map(|(a, b)| a * b).sum()
    }

    pub fn sq_distance(&self, i: usize, j: usize) -> f64 {
        self.vertices[i].iter().zip(&self.vertices[j]).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn is_unit_norm(&self, tol: f64) -> bool {
        self.norms.iter().zip(&self.active).all(|(r, a)| !a || (r - 1.0).abs() <= tol)
    }

    /// Unit direction `x_i / ‖x_i‖`.
    pub fn direction(&self, i: usize) -> Result<Vec<f64>> {
        let r = self.norms[i];
        if r <= 0.0 {
            return Err(Error::input(format!("vertex {i} has zero norm")));
        }
        Ok(self.vertices[i].iter().map(|x| x / r).collect())
    }

    /// Fails unless no padding of `n` was needed.
    pub fn require_unpadded_count(&self) -> Result<()> {
        if self.active_count() != self.n() {
            return Err(Error::input(format!(
                "quantum pipeline needs a power-of-two vertex count, got {}",
                self.active_count()
            )));
        }
        Ok(())
    }
}

/// Gaussian width and Taylor truncation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelParams {
    pub lambda: f64,
    pub p: usize,
    pub coeffs_a: Vec<f64>,
    pub coeffs_a_tilde: Vec<f64>,
    pub a_sum: f64,
    pub a_tilde_sum: f64,
}

impl KernelParams {
    pub fn new(lambda: f64, p: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::input(format!("λ must be positive and finite, got {lambda}")));
        }
        let mut coeffs_a = Vec::with_capacity(p + 1);
        let mut term = 1.0;
        for k in 0..=p {
            if k > 0 {
                term *= 2.0 * lambda / k as f64;
            }
            coeffs_a.push(term);
        }
        let scale = (-2.0 * lambda).exp();
        let coeffs_a_tilde: Vec<f64> = coeffs_a.iter().map(|a| a * scale).collect();
        let a_sum = coeffs_a.iter().sum();
        let a_tilde_sum = coeffs_a_tilde.iter().sum();
        Ok(KernelParams { lambda, p, coeffs_a, coeffs_a_tilde, a_sum, a_tilde_sum })
    }

    /// `Σ_k a_k z^k`.
    pub fn series(&self, z: f64) -> f64 {
        self.coeffs_a.iter().rev().fold(0.0, |acc, a| acc * z + a)
    }
}

/// `w_ij = exp(−λ‖x_i − x_j‖²)` off the diagonal; zero on the diagonal and
/// on rows of padded vertices.
pub fn build_weight_matrix(vs: &VertexSet, kp: &KernelParams) -> RMatrix {
    let n = vs.n();
    RMatrix::from_fn(n, n, |i, j| {
        if i == j || !vs.active[i] || !vs.active[j] {
            0.0
        } else {
            (-kp.lambda * vs.sq_distance(i, j)).exp()
        }
    })
}

/// Order-`p` Taylor weights together with the un-zeroed diagonal.
#[derive(Debug, Clone)]
pub struct TaylorWeights {
    pub matrix: RMatrix,
    /// `exp(−2λ‖x_i‖²)·Σ_k a_k ‖x_i‖^{2k}`, the value the diagonal would take.
    pub diagonal: Vec<f64>,
}

pub fn build_taylor_weight_matrix(vs: &VertexSet, kp: &KernelParams) -> TaylorWeights {
    let n = vs.n();
    let entry = |i: usize, j: usize| {
        let r = vs.norms[i] * vs.norms[i] + vs.norms[j] * vs.norms[j];
        (-kp.lambda * r).exp() * kp.series(vs.dot(i, j))
    };
    let matrix = RMatrix::from_fn(n, n, |i, j| {
        if i == j || !vs.active[i] || !vs.active[j] {
            0.0
        } else {
            entry(i, j)
        }
    });
    let diagonal = (0..n).map(|i| if vs.active[i] { entry(i, i) } else { 0.0 }).collect();
    TaylorWeights { matrix, diagonal }
}

/// Degree and Laplacian matrices derived from a weight matrix.
#[derive(Debug, Clone, Serialize)]
pub struct GraphMatrices {
    #[serde(serialize_with = "ser_matrix")]
    pub weights: RMatrix,
    #[serde(serialize_with = "ser_matrix")]
    pub degree: RMatrix,
    #[serde(serialize_with = "ser_matrix")]
    pub laplacian: RMatrix,
    #[serde(serialize_with = "ser_matrix")]
    pub sym_normalized: RMatrix,
    #[serde(serialize_with = "ser_matrix")]
    pub rw_normalized: RMatrix,
    pub trace_degree: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &RMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

/// Row-major nested vectors.
pub fn matrix_rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

impl GraphMatrices {
    /// `L / Tr(L)`.
    pub fn normalized_laplacian_trace(&self) -> RMatrix {
        &self.laplacian / self.trace_degree
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrices serialise")
    }
}

pub fn build_laplacians(w: &RMatrix) -> Result<GraphMatrices> {
    let n = w.nrows();
    if !w.is_square() {
        return Err(Error::dimension(format!("weight matrix is {:?}", w.shape())));
    }
    for i in 0..n {
        if w[(i, i)].abs() > 1e-15 {
            return Err(Error::input(format!("nonzero diagonal weight at {i}")));
        }
        for j in 0..n {
            if w[(i, j)] < 0.0 || (w[(i, j)] - w[(j, i)]).abs() > 1e-12 {
                return Err(Error::input(format!("weights not symmetric nonnegative at ({i},{j})")));
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    if let Some(i) = degrees.iter().position(|d| *d <= 0.0) {
        return Err(Error::Degenerate(format!("vertex {i} has zero degree")));
    }
    let degree = RMatrix::from_diagonal(&DVector::from_vec(degrees.clone()));
    let laplacian = &degree - w;
    let sym_normalized = RMatrix::from_fn(n, n, |i, j| laplacian[(i, j)] / (degrees[i] * degrees[j]).sqrt());
    let rw_normalized = RMatrix::from_fn(n, n, |i, j| laplacian[(i, j)] / degrees[i]);
    Ok(GraphMatrices {
        weights: w.clone(),
        degree,
        laplacian,
        sym_normalized,
        rw_normalized,
        trace_degree: degrees.iter().sum(),
    })
}

/// Active-vertex submatrix.
pub fn active_submatrix(vs: &VertexSet, m: &RMatrix) -> RMatrix {
    let idx: Vec<usize> = (0..vs.n()).filter(|&i| vs.active[i]).collect();
    RMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Laplacians of the exact Gaussian graph over the active vertices.
pub fn exact_graph(vs: &VertexSet, kp: &KernelParams) -> Result<GraphMatrices> {
    build_laplacians(&active_submatrix(vs, &build_weight_matrix(vs, kp)))
}

/// Laplacians of the Taylor-truncated graph over the active vertices.
pub fn taylor_graph(vs: &VertexSet, kp: &KernelParams) -> Result<GraphMatrices> {
    build_laplacians(&active_submatrix(vs, &build_taylor_weight_matrix(vs, kp).matrix))
}

/// Reference eigenpairs.
#[derive(Debug, Clone)]
pub struct SpectralReference {
    /// All eigenvalues, ascending.
    pub all_eigenvalues: Vec<f64>,
    /// The `d` smallest eigenvalues whose magnitude exceeds the zero threshold.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors matching `eigenvalues`, one per column.
    pub eigenvectors: RMatrix,
    pub d: usize,
}

/// Flips `v` so its first component with magnitude above `1e-12` is positive.
pub fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Threshold below which an eigenvalue is treated as zero.
pub fn zero_threshold(m: &RMatrix) -> f64 {
    1e-9 * m.amax().max(1.0)
}

pub fn classical_eigensolve(m: &RMatrix, d: usize) -> Result<SpectralReference> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::dimension(format!("matrix is {:?}", m.shape())));
    }
    if (m - m.transpose()).amax() > 1e-10 * m.amax().max(1.0) {
        return Err(Error::input("matrix is not symmetric"));
    }
    if d == 0 || d > n.saturating_sub(1).max(1) {
        return Err(Error::Range(format!("d = {d} outside 1..={}", n.saturating_sub(1).max(1))));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let all: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let tol = zero_threshold(m);
    let picked: Vec<usize> = order.iter().cloned().filter(|&i| eig.eigenvalues[i].abs() > tol).take(d).collect();
    if picked.len() < d {
        return Err(Error::Range(format!(
            "requested {d} nonzero eigenpairs, only {} available",
            picked.len()
        )));
    }
    let mut vecs = RMatrix::zeros(n, d);
    for (c, &i) in picked.iter().enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
        fix_sign(&mut v);
        vecs.set_column(c, &DVector::from_vec(v));
    }
    Ok(SpectralReference {
        all_eigenvalues: all,
        eigenvalues: picked.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vecs,
        d,
    })
}

/// Entrywise truncation error of `W_p` against the Lagrange remainder bound.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub p: usize,
    pub lambda: f64,
    pub max_measured: f64,
    pub max_bound: f64,
    /// `(i, j, measured, bound)` for each active off-diagonal pair.
    pub entries: Vec<(usize, usize, f64, f64)>,
    pub holds: bool,
}

pub fn truncation_error_report(vs: &VertexSet, kp: &KernelParams) -> TruncationReport {
    let exact = build_weight_matrix(vs, kp);
    let taylor = build_taylor_weight_matrix(vs, kp).matrix;
    let n = vs.n();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && vs.active[i] && vs.active[j])
        .collect();
    let zmax = pairs.iter().map(|&(i, j)| vs.dot(i, j).abs()).fold(0.0, f64::max);
    let y = 2.0 * kp.lambda * zmax;
    let mut remainder = 1.0;
    for k in 1..=kp.p + 1 {
        remainder *= y / k as f64;
    }
    remainder *= y.exp();
    let mut entries = Vec::with_capacity(pairs.len());
    let (mut max_measured, mut max_bound, mut holds) = (0.0f64, 0.0f64, true);
    for (i, j) in pairs {
        let r2 = vs.norms[i].powi(2) + vs.norms[j].powi(2);
        let bound = remainder * (-kp.lambda * r2).exp();
        let measured = (exact[(i, j)] - taylor[(i, j)]).abs();
        // bound is evaluated in floating point; allow one rounding unit on the exact weight
        holds &= measured <= bound + 4.0 * f64::EPSILON * exact[(i, j)];
        max_measured = max_measured.max(measured);
        max_bound = max_bound.max(bound);
        entries.push((i, j, measured, bound));
    }
    TruncationReport { p: kp.p, lambda: kp.lambda, max_measured, max_bound, entries, holds }
}
