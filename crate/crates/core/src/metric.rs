//! Metric data on a complex: diagonal Hodge stars, the per-degree Hodge
//! Laplacian pencil and ε-closeness of two metrics.
//!
//! Every metric here produces diagonal mass matrices `M_k`:
//!
//! * cubical grids use the tensor-product star
//!   `M_k[cell] = Π_{a ∉ axes} h_a / Π_{a ∈ axes} h_a`
//!   (dual-cell volume over primal-cell volume);
//! * simplicial complexes with vertex coordinates use the barycentric star
//!   `M_k[σ] = (Σ_{τ ⊇ σ} |τ| / C(n+1, k+1)) / |σ|²` over top simplices `τ`;
//!   without coordinates every weight is 1;
//! * a per-cell table supplies the diagonal directly.
//!
//! A metric multiplied by `c` (lengths by `√c`) multiplies `M_k` by
//! `c^{(n-2k)/2}`.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{binomial, CellComplex, CellLabel, ComplexKind};
use crate::eigensolve::Pencil;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricMode {
    /// Geometry carried by the complex itself (grid spacing or vertex coordinates).
    Native,
    /// Cubical grids only: per-axis spacing overriding the grid's own.
    PerAxis { spacings: Vec<f64> },
    /// Explicit diagonal star weights, `weights[k][cell]`.
    PerCell { weights: Vec<Vec<f64>> },
}

/// A metric on a complex: a mode plus a global factor multiplying the metric tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub mode: MetricMode,
    #[serde(default = "one")]
    pub factor: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::native()
    }
}

impl MetricSpec {
    pub fn native() -> Self {
        Self {
            mode: MetricMode::Native,
            factor: 1.0,
        }
    }

    /// The complex's own geometry with the metric tensor multiplied by `factor`.
    pub fn uniform_scaling(factor: f64) -> Self {
        Self {
            mode: MetricMode::Native,
            factor,
        }
    }

    pub fn per_axis(spacings: Vec<f64>) -> Self {
        Self {
            mode: MetricMode::PerAxis { spacings },
            factor: 1.0,
        }
    }

    pub fn per_cell(weights: Vec<Vec<f64>>) -> Self {
        Self {
            mode: MetricMode::PerCell { weights },
            factor: 1.0,
        }
    }

    /// Native star weights multiplied cellwise by factors drawn uniformly from `[low, high]`.
    pub fn random_per_cell<R: Rng>(
        complex: &CellComplex,
        low: f64,
        high: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(low > 0.0 && high >= low) {
            return Err(Error::InvalidMetric(format!(
                "random factor range [{low}, {high}] must be positive"
            )));
        }
        let base = assemble_masses(complex, &Self::native())?;
        let weights = base
            .weights
            .iter()
            .map(|w| w.iter().map(|&x| x * rng.random_range(low..=high)).collect())
            .collect();
        Ok(Self::per_cell(weights))
    }

    fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor.is_finite()) {
            return Err(Error::InvalidMetric(format!(
                "factor {} is not positive",
                self.factor
            )));
        }
        match &self.mode {
            MetricMode::Native => Ok(()),
            MetricMode::PerAxis { spacings } => {
                if spacings.iter().all(|&h| h > 0.0 && h.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidMetric("per-axis spacing must be positive".into()))
                }
            }
            MetricMode::PerCell { weights } => {
                if weights.iter().flatten().all(|&w| w > 0.0 && w.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidMetric("nonpositive cell volume".into()))
                }
            }
        }
    }
}

/// Returns the metric multiplied by `factor`; pencil eigenvalues scale by `1/factor`.
pub fn scale_metric(metric: &MetricSpec, factor: f64) -> Result<MetricSpec> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale factor {factor} must be positive"
        )));
    }
    Ok(MetricSpec {
        mode: metric.mode.clone(),
        factor: metric.factor * factor,
    })
}

/// Diagonal Hodge stars `M_0 ..= M_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassFamily {
    pub weights: Vec<Vec<f64>>,
    pub metric: MetricSpec,
}

impl MassFamily {
    pub fn diag(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }
}

pub fn assemble_masses(complex: &CellComplex, metric: &MetricSpec) -> Result<MassFamily> {
    metric.validate()?;
    let n = complex.dim();
    let mut weights = match (&metric.mode, complex.kind()) {
        (MetricMode::PerCell { weights }, _) => {
            if weights.len() != n + 1 {
                return Err(Error::InvalidMetric(format!(
                    "per-cell table has {} degrees, expected {}",
                    weights.len(),
                    n + 1
                )));
            }
            for (k, w) in weights.iter().enumerate() {
                if w.len() != complex.cell_count(k) {
                    return Err(Error::InvalidMetric(format!(
                        "per-cell table degree {k} has {} entries, expected {}",
                        w.len(),
                        complex.cell_count(k)
                    )));
                }
            }
            weights.clone()
        }
        (MetricMode::Native, ComplexKind::Cubical) | (MetricMode::PerAxis { .. }, ComplexKind::Cubical) => {
            let spacings = match &metric.mode {
                MetricMode::PerAxis { spacings } => {
                    if spacings.len() != n {
                        return Err(Error::InvalidMetric(format!(
                            "per-axis metric has {} spacings, expected {n}",
                            spacings.len()
                        )));
                    }
                    spacings.clone()
                }
                _ => match complex.grid() {
                    Some(g) => g.spacing.clone(),
                    None => vec![1.0; n],
                },
            };
            cubical_weights(complex, &spacings)
        }
        (MetricMode::PerAxis { .. }, ComplexKind::Simplicial) => {
            return Err(Error::InvalidMetric(
                "per-axis metric requires a cubical grid".into(),
            ))
        }
        (MetricMode::Native, ComplexKind::Simplicial) => simplicial_weights(complex)?,
    };

    if metric.factor != 1.0 {
        for (k, w) in weights.iter_mut().enumerate() {
            let s = metric.factor.powf((n as f64 - 2.0 * k as f64) / 2.0);
            w.iter_mut().for_each(|x| *x *= s);
        }
    }
    Ok(MassFamily {
        weights,
        metric: metric.clone(),
    })
}

fn cubical_weights(complex: &CellComplex, spacings: &[f64]) -> Vec<Vec<f64>> {
    (0..=complex.dim())
        .map(|k| {
            complex
                .labels(k)
                .iter()
                .map(|label| match label {
                    CellLabel::Grid { axes, .. } => (0..complex.dim())
                        .map(|a| {
                            if axes.contains(&a) {
                                1.0 / spacings[a]
                            } else {
                                spacings[a]
                            }
                        })
                        .product(),
                    CellLabel::Simplex(_) => 1.0,
                })
                .collect()
        })
        .collect()
}

/// Unsigned `k`-volume of the simplex spanned by `points` (k+1 points).
fn simplex_volume(points: &[&[f64]]) -> f64 {
    let k = points.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let base = points[0];
    let edges: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(a, b)| a - b).collect())
        .collect();
    let gram = DMatrix::from_fn(k, k, |i, j| {
        edges[i].iter().zip(&edges[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let det = gram.determinant().max(0.0);
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    det.sqrt() / factorial
}

fn simplicial_weights(complex: &CellComplex) -> Result<Vec<Vec<f64>>> {
    let n = complex.dim();
    let Some(coords) = complex.vertex_coords() else {
        return Ok((0..=n).map(|k| vec![1.0; complex.cell_count(k)]).collect());
    };

    let vertex_sets: Vec<Vec<Vec<usize>>> = (0..=n)
        .map(|k| {
            complex
                .labels(k)
                .iter()
                .map(|l| match l {
                    CellLabel::Simplex(v) => v.clone(),
                    CellLabel::Grid { .. } => unreachable!("simplicial complex carries simplex labels"),
                })
                .collect()
        })
        .collect();

    let mut volumes = Vec::with_capacity(n + 1);
    let mut scale = 0.0_f64;
    for sets in &vertex_sets {
        let vols: Vec<f64> = sets
            .iter()
            .map(|vs| {
                let pts: Vec<&[f64]> = vs.iter().map(|&v| coords[v].as_slice()).collect();
                simplex_volume(&pts)
            })
            .collect();
        volumes.push(vols);
    }
    for e in &volumes[1] {
        scale = scale.max(*e);
    }
    for (k, vols) in volumes.iter().enumerate().skip(1) {
        let floor = 1e-12 * scale.powi(k as i32);
        if let Some(i) = vols.iter().position(|&v| v <= floor) {
            return Err(Error::InvalidMetric(format!(
                "degenerate {k}-simplex {i} (volume {:.3e})",
                vols[i]
            )));
        }
    }

    let index: Vec<HashMap<&[usize], usize>> = vertex_sets
        .iter()
        .map(|sets| sets.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect())
        .collect();

    let mut dual = vec![Vec::new(); n + 1];
    for (k, d) in dual.iter_mut().enumerate() {
        *d = vec![0.0; complex.cell_count(k)];
    }
    for (top, verts) in vertex_sets[n].iter().enumerate() {
        let vol = volumes[n][top];
        for (k, dk) in dual.iter_mut().enumerate() {
            let share = vol / binomial(n + 1, k + 1) as f64;
            for subset in crate::complex::axis_subsets(n + 1, k + 1) {
                let face: Vec<usize> = subset.iter().map(|&i| verts[i]).collect();
                if let Some(&idx) = index[k].get(face.as_slice()) {
                    dk[idx] += share;
                }
            }
        }
    }
    for (k, dk) in dual.iter().enumerate() {
        if let Some(i) = dk.iter().position(|&d| d <= 0.0) {
            return Err(Error::InvalidMetric(format!(
                "{k}-simplex {i} is not a face of any top simplex"
            )));
        }
    }

    Ok((0..=n)
        .map(|k| {
            dual[k]
                .iter()
                .zip(&volumes[k])
                .map(|(d, v)| d / (v * v))
                .collect()
        })
        .collect())
}

/// The Hodge Laplacian pencil at one degree with its `δd`/`dδ` splitting.
#[derive(Clone, Debug)]
pub struct DegreePencil {
    pub degree: usize,
    /// `D_kᵀ M_{k+1} D_k`; zero at `k = n`.
    pub k_up: CsrMatrix<f64>,
    /// `M_k D_{k-1} M_{k-1}⁻¹ D_{k-1}ᵀ M_k`; zero at `k = 0`.
    pub k_down: CsrMatrix<f64>,
    full: Pencil,
}

impl DegreePencil {
    /// The full pencil `(K_up + K_down, M_k)`.
    pub fn full(&self) -> &Pencil {
        &self.full
    }

    pub fn mass(&self) -> &[f64] {
        &self.full.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.full.stiffness
    }

    pub fn size(&self) -> usize {
        self.full.mass.len()
    }

    /// `(K_up, M)` and `(K_down, M)`, the discrete `δd` and `dδ` parts.
    pub fn partial_pencils(&self) -> (Pencil, Pencil) {
        (
            Pencil::new(self.k_up.clone(), self.full.mass.clone()),
            Pencil::new(self.k_down.clone(), self.full.mass.clone()),
        )
    }
}

pub fn up_stiffness(complex: &CellComplex, masses: &MassFamily, k: usize) -> Result<CsrMatrix<f64>> {
    let size = complex.cell_count(k);
    if k >= complex.dim() {
        return Ok(CsrMatrix::zeros(size, size));
    }
    let d = complex.coboundary(k)?.to_f64();
    let weighted = d.scale_rows_cols(Some(masses.diag(k + 1)), None);
    Ok(d.transpose().matmul(&weighted).symmetrized())
}

fn down_stiffness(complex: &CellComplex, masses: &MassFamily, k: usize) -> Result<CsrMatrix<f64>> {
    let size = complex.cell_count(k);
    if k == 0 {
        return Ok(CsrMatrix::zeros(size, size));
    }
    // B = M_k D_{k-1}, K_down = B M_{k-1}^{-1} Bᵀ
    let d = complex.coboundary(k - 1)?.to_f64();
    let b = d.scale_rows_cols(Some(masses.diag(k)), None);
    let inv: Vec<f64> = masses.diag(k - 1).iter().map(|w| 1.0 / w).collect();
    let b_scaled = b.scale_rows_cols(None, Some(&inv));
    Ok(b_scaled.matmul(&b.transpose()).symmetrized())
}

pub fn assemble_pencil(complex: &CellComplex, masses: &MassFamily, k: usize) -> Result<DegreePencil> {
    complex.check_degree(k)?;
    if masses.dim() != complex.dim() || masses.diag(k).len() != complex.cell_count(k) {
        return Err(Error::InvalidMetric(
            "mass family does not match the complex".into(),
        ));
    }
    if masses.diag(k).iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidMetric(format!("M_{k} is not positive definite")));
    }
    let k_up = up_stiffness(complex, masses, k)?;
    let k_down = down_stiffness(complex, masses, k)?;
    let stiffness = k_up.add(&k_down);
    Ok(DegreePencil {
        degree: k,
        k_up,
        k_down,
        full: Pencil::new(stiffness, masses.diag(k).to_vec()),
    })
}

pub fn assemble_all(complex: &CellComplex, masses: &MassFamily) -> Result<Vec<DegreePencil>> {
    (0..=complex.dim())
        .map(|k| assemble_pencil(complex, masses, k))
        .collect()
}

/// ε-closeness measurements per degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    /// `max(1 - λ_min, λ_max - 1)` over the generalized eigenvalues of `(M_k¹, M_k⁰)`.
    pub eps_norm: Vec<f64>,
    /// Same for `(D_kᵀ M_{k+1}¹ D_k, D_kᵀ M_{k+1}⁰ D_k)` off their shared kernel;
    /// zero at `k = n` where the form vanishes.
    pub eps_form: Vec<f64>,
    pub eps: f64,
}

fn deviation(lo: f64, hi: f64) -> f64 {
    (1.0 - lo).max(hi - 1.0).max(0.0)
}

pub fn epsilon_closeness(
    complex: &CellComplex,
    masses0: &MassFamily,
    masses1: &MassFamily,
) -> Result<ClosenessReport> {
    let n = complex.dim();
    for m in [masses0, masses1] {
        if m.dim() != n || (0..=n).any(|k| m.diag(k).len() != complex.cell_count(k)) {
            return Err(Error::InvalidArgument(
                "mass families were built on different complexes".into(),
            ));
        }
    }

    let mut eps_norm = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (lo, hi) = ratio_range(masses1.diag(k), masses0.diag(k));
        eps_norm.push(deviation(lo, hi));
    }

    let mut eps_form = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k == n {
            eps_form.push(0.0);
            continue;
        }
        let q0 = up_stiffness(complex, masses0, k)?.to_dense();
        let q1 = up_stiffness(complex, masses1, k)?.to_dense();
        let (lo, hi) = form_ratio_range(&q0, &q1);
        eps_form.push(deviation(lo, hi));
    }

    let eps = eps_norm.iter().chain(&eps_form).fold(0.0_f64, |a, &b| a.max(b));
    Ok(ClosenessReport {
        eps_norm,
        eps_form,
        eps,
    })
}

fn ratio_range(num: &[f64], den: &[f64]) -> (f64, f64) {
    num.iter()
        .zip(den)
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

/// Extremal generalized eigenvalues of `(q1, q0)` on the complement of `ker q0`.
fn form_ratio_range(q0: &DMatrix<f64>, q1: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(q0.clone());
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let threshold = 1e-10 * top.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > threshold)
        .collect();
    if keep.is_empty() {
        return (1.0, 1.0);
    }
    let basis = DMatrix::from_fn(q0.nrows(), keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
    });
    let reduced = basis.transpose() * q1 * &basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let vals = SymmetricEigen::new(reduced).eigenvalues;
    vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}
