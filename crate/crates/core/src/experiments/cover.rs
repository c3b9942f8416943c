//! Gromov covers of the vertex graph and the partition-of-unity localization
//! inequality for functions.

use serde::{Deserialize, Serialize};

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::metric::{assemble_masses, up_stiffness, MetricSpec};

/// Normalized cutoffs `ρ_i = φ_i / sqrt(Σ_j φ_j²)` on the vertices of a complex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    /// Graph-distance radius `R`.
    pub radius: usize,
    /// Center vertices, pairwise at distance `>= R`.
    pub centers: Vec<usize>,
    /// Sparse raw cutoffs: `phi[i]` lists `(vertex, φ_i(vertex))` with `φ_i > 0`.
    pub phi: Vec<Vec<(usize, f64)>>,
    /// Normalized cutoffs on the same supports as `phi`.
    pub rho: Vec<Vec<(usize, f64)>>,
    /// Largest number of closed `R`-balls containing one vertex.
    pub cover_multiplicity: usize,
    /// Largest number of cutoff supports (open `2R`-balls) containing one vertex.
    pub support_overlap: usize,
    /// `R · max_{i, edge} |ρ_i(y) − ρ_i(x)|`.
    pub gradient_constant: f64,
    /// `max_v |Σ_i ρ_i(v)² − 1|`.
    pub normalization_error: f64,
}

impl PartitionOfUnity {
    /// `ρ_i` as a dense vertex vector.
    pub fn dense_rho(&self, i: usize, vertices: usize) -> Vec<f64> {
        let mut out = vec![0.0; vertices];
        for &(v, r) in &self.rho[i] {
            out[v] = r;
        }
        out
    }
}

fn cutoff(distance: usize, radius: usize) -> f64 {
    let d = distance as f64;
    let r = radius as f64;
    ((2.0 * r - d) / r).clamp(0.0, 1.0)
}

/// Greedy maximal `R`-separated set of vertices (scanned in index order) with
/// piecewise-linear cutoffs: 1 within distance `R`, 0 from distance `2R` on.
pub fn build_gromov_cover(complex: &CellComplex, radius: usize) -> Result<PartitionOfUnity> {
    if radius < 2 {
        return Err(Error::InvalidArgument(format!("cover radius {radius} must be at least 2")));
    }
    let nv = complex.cell_count(0);
    if nv == 0 {
        return Err(Error::InvalidArgument("complex has no vertices".into()));
    }
    if complex.vertex_distances(0).contains(&usize::MAX) {
        return Err(Error::InvalidArgument("complex is not connected".into()));
    }

    let mut covered = vec![false; nv];
    let mut centers = Vec::new();
    let mut distances = Vec::new();
    for v in 0..nv {
        if covered[v] {
            continue;
        }
        let d = complex.vertex_distances(v);
        for (w, &dw) in d.iter().enumerate() {
            if dw < radius {
                covered[w] = true;
            }
        }
        centers.push(v);
        distances.push(d);
    }

    let phi: Vec<Vec<(usize, f64)>> = distances
        .iter()
        .map(|d| {
            d.iter()
                .enumerate()
                .map(|(v, &dv)| (v, cutoff(dv, radius)))
                .filter(|&(_, p)| p > 0.0)
                .collect()
        })
        .collect();

    let mut norm_sq = vec![0.0; nv];
    let mut overlap = vec![0usize; nv];
    for list in &phi {
        for &(v, p) in list {
            norm_sq[v] += p * p;
            overlap[v] += 1;
        }
    }
    let rho: Vec<Vec<(usize, f64)>> = phi
        .iter()
        .map(|list| list.iter().map(|&(v, p)| (v, p / norm_sq[v].sqrt())).collect())
        .collect();

    let mut balls = vec![0usize; nv];
    for d in &distances {
        for (v, &dv) in d.iter().enumerate() {
            if dv <= radius {
                balls[v] += 1;
            }
        }
    }

    let mut sum_sq = vec![0.0; nv];
    for list in &rho {
        for &(v, r) in list {
            sum_sq[v] += r * r;
        }
    }
    let normalization_error = sum_sq.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);

    let edges = complex.edges();
    let mut gradient: f64 = 0.0;
    for i in 0..rho.len() {
        let dense = dense_vec(&rho[i], nv);
        for &(a, b) in &edges {
            gradient = gradient.max((dense[a] - dense[b]).abs());
        }
    }

    Ok(PartitionOfUnity {
        radius,
        centers,
        phi,
        rho,
        cover_multiplicity: balls.into_iter().max().unwrap_or(0),
        support_overlap: overlap.into_iter().max().unwrap_or(0),
        gradient_constant: gradient * radius as f64,
        normalization_error,
    })
}

fn dense_vec(list: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(v, x) in list {
        out[v] = x;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub radius: usize,
    /// `Σ_i Q(ρ_i u) − Q(u)` per probe.
    pub margins: Vec<f64>,
    /// `margin · R² / ‖u‖²` per probe.
    pub constants: Vec<f64>,
    pub max_constant: f64,
    /// A priori constant valid for every probe:
    /// `R² · max_v Σ_{e∋v} w_e Σ_i (Δ_e ρ_i)² / (2 m_v)`.
    pub constant_bound: f64,
    pub within_bound: bool,
}

/// Measures the localization inequality `Σ_i Q(ρ_i u) ≤ Q(u) + C‖u‖²/R²`
/// on each probe function `u`, with `Q` the degree-0 energy form.
pub fn partition_localization_check(
    complex: &CellComplex,
    metric: &MetricSpec,
    pou: &PartitionOfUnity,
    probes: &[Vec<f64>],
    degree: usize,
) -> Result<PartitionReport> {
    if degree != 0 {
        return Err(Error::InvalidArgument(format!(
            "partition check supports only degree 0, got {degree}"
        )));
    }
    if complex.dim() == 0 {
        return Err(Error::InvalidArgument("partition check needs edges".into()));
    }
    let nv = complex.cell_count(0);
    let masses = assemble_masses(complex, metric)?;
    let m0 = masses.diag(0);
    let w1 = masses.diag(1);
    let energy = up_stiffness(complex, &masses, 0)?;
    let quad = |u: &[f64]| -> f64 { u.iter().zip(energy.mul_vec(u)).map(|(a, b)| a * b).sum() };
    let r_sq = (pou.radius as f64).powi(2);

    let rho: Vec<Vec<f64>> = pou.rho.iter().map(|l| dense_vec(l, nv)).collect();
    let edges = complex.edges();
    let mut load = vec![0.0; nv];
    for (e, &(a, b)) in edges.iter().enumerate() {
        let g: f64 = rho.iter().map(|r| (r[b] - r[a]).powi(2)).sum();
        load[a] += w1[e] * g;
        load[b] += w1[e] * g;
    }
    let constant_bound = load
        .iter()
        .zip(m0)
        .map(|(l, m)| r_sq * l / (2.0 * m))
        .fold(0.0, f64::max);

    let mut margins = Vec::with_capacity(probes.len());
    let mut constants = Vec::with_capacity(probes.len());
    for (p, u) in probes.iter().enumerate() {
        if u.len() != nv {
            return Err(Error::InvalidArgument(format!(
                "probe {p} has {} entries, expected {nv}",
                u.len()
            )));
        }
        let norm_sq: f64 = u.iter().zip(m0).map(|(x, m)| m * x * x).sum();
        if !(norm_sq > 0.0) {
            return Err(Error::InvalidArgument(format!("probe {p} is zero")));
        }
        let localized: f64 = rho
            .iter()
            .map(|r| {
                let v: Vec<f64> = u.iter().zip(r).map(|(a, b)| a * b).collect();
                quad(&v)
            })
            .sum();
        let margin = localized - quad(u);
        margins.push(margin);
        constants.push(margin * r_sq / norm_sq);
    }
    let max_constant = constants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-9 * constant_bound.max(1.0);
    Ok(PartitionReport {
        radius: pou.radius,
        within_bound: constants.iter().all(|&c| c <= constant_bound + slack),
        margins,
        constants,
        max_constant,
        constant_bound,
    })
}
