//! Structural identities of the finite-dimensional Hodge Laplacian.
//!
//! All three hold exactly for any positive diagonal stars, so failures at
//! tolerances looser than `1e-6` point at implementation bugs rather than
//! discretization error.

use serde::{Deserialize, Serialize};

use crate::complex::CellComplex;
use crate::eigensolve::{
    dense_eigenvalues, multiset_discrepancy, nonzero, zero_threshold, SpectrumSet,
};
use crate::error::{Error, Result};
use crate::metric::{assemble_masses, assemble_pencil, MetricSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub passed: bool,
    pub tol: f64,
    /// Largest relative mismatch found (0 when nothing had to be matched).
    pub max_error: f64,
    pub details: Vec<String>,
}

impl CheckReport {
    fn new(check: &str, tol: f64) -> Self {
        Self {
            check: check.into(),
            passed: true,
            tol,
            max_error: 0.0,
            details: Vec::new(),
        }
    }

    fn record(&mut self, error: f64, context: impl FnOnce() -> String) {
        self.max_error = self.max_error.max(error);
        if error > self.tol {
            self.passed = false;
            self.details.push(format!("{} (error {error:.3e})", context()));
        }
    }

    fn fail(&mut self, message: String) {
        self.passed = false;
        self.max_error = f64::INFINITY;
        self.details.push(message);
    }
}

/// Dense spectra of every degree.
pub fn degree_spectra(complex: &CellComplex, metric: &MetricSpec, tol: f64) -> Result<Vec<SpectrumSet>> {
    let masses = assemble_masses(complex, metric)?;
    (0..=complex.dim())
        .map(|k| {
            let pencil = assemble_pencil(complex, &masses, k)?;
            Ok(SpectrumSet::new(dense_eigenvalues(pencil.full())?, None, tol))
        })
        .collect()
}

/// `spec(Δ_k) \ {0} = (spec(δd) ∪ spec(dδ)) \ {0}` as multisets, for one
/// degree or all of them.
pub fn check_partial_relations(
    complex: &CellComplex,
    metric: &MetricSpec,
    degree: Option<usize>,
    tol: f64,
) -> Result<CheckReport> {
    let masses = assemble_masses(complex, metric)?;
    let degrees: Vec<usize> = match degree {
        Some(k) => {
            complex.check_degree(k)?;
            vec![k]
        }
        None => (0..=complex.dim()).collect(),
    };
    let mut report = CheckReport::new("partial", tol);
    for k in degrees {
        let pencil = assemble_pencil(complex, &masses, k)?;
        let full = dense_eigenvalues(pencil.full())?;
        let (up, down) = pencil.partial_pencils();
        let up = dense_eigenvalues(&up)?;
        let down = dense_eigenvalues(&down)?;
        let threshold = zero_threshold(&full);
        let lhs = nonzero(&full, threshold);
        let mut rhs = nonzero(&up, threshold);
        rhs.extend(nonzero(&down, threshold));
        match multiset_discrepancy(&lhs, &rhs) {
            Some(err) => report.record(err, || format!("degree {k}: multiset mismatch")),
            None => report.fail(format!(
                "degree {k}: {} nonzero eigenvalues of Δ but {} of δd ∪ dδ",
                lhs.len(),
                rhs.len()
            )),
        }
    }
    Ok(report)
}

/// Every nonzero eigenvalue at degree `k` appears at degree `k-1` or `k+1`
/// (spectra outside `0..=n` are empty).
pub fn check_adjacent_degree(complex: &CellComplex, metric: &MetricSpec, tol: f64) -> Result<CheckReport> {
    let spectra = degree_spectra(complex, metric, tol)?;
    let n = complex.dim();
    let mut report = CheckReport::new("adjacent", tol);
    for k in 0..=n {
        let values = &spectra[k].values;
        let threshold = zero_threshold(values);
        let mut neighbours: Vec<f64> = Vec::new();
        if k > 0 {
            neighbours.extend(&spectra[k - 1].values);
        }
        if k < n {
            neighbours.extend(&spectra[k + 1].values);
        }
        for &lambda in values.iter().filter(|v| v.abs() > threshold) {
            let err = neighbours
                .iter()
                .map(|m| (lambda - m).abs() / lambda.abs().max(1.0))
                .fold(f64::INFINITY, f64::min);
            report.record(err, || format!("degree {k}: eigenvalue {lambda} has no neighbour"));
        }
    }
    Ok(report)
}

/// `spec(k) = spec(n − k)` on closed complexes.
pub fn check_duality(complex: &CellComplex, metric: &MetricSpec, tol: f64) -> Result<CheckReport> {
    if !complex.is_closed() {
        return Err(Error::InvalidArgument(
            "duality check requires a closed complex".into(),
        ));
    }
    let spectra = degree_spectra(complex, metric, tol)?;
    let n = complex.dim();
    let mut report = CheckReport::new("duality", tol);
    for k in 0..=n / 2 {
        let (a, b) = (&spectra[k].values, &spectra[n - k].values);
        match multiset_discrepancy(a, b) {
            Some(err) => report.record(err, || format!("degrees {k} and {}", n - k)),
            None => report.fail(format!(
                "degrees {k} and {} have {} and {} eigenvalues",
                n - k,
                a.len(),
                b.len()
            )),
        }
    }
    Ok(report)
}
