//! Spectrum continuity along one-parameter metric deformations `g_ε`.

use serde::{Deserialize, Serialize};

use super::checks::degree_spectra;
use super::distance::windowed_hausdorff;
use super::localization::fit_log_slope;
use crate::complex::CellComplex;
use crate::eigensolve::SpectrumSet;
use crate::error::{Error, Result};
use crate::metric::{assemble_masses, epsilon_closeness, scale_metric, ClosenessReport, MetricMode, MetricSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationFamily {
    /// `g_ε = (1 + ε) g_0`.
    UniformScaling,
    /// `g_ε` multiplies the metric along one grid axis by `1 + ε`.
    PerAxis { axis: usize },
}

impl DeformationFamily {
    pub fn metric(&self, complex: &CellComplex, base: &MetricSpec, eps: f64) -> Result<MetricSpec> {
        match *self {
            Self::UniformScaling => scale_metric(base, 1.0 + eps),
            Self::PerAxis { axis } => {
                let grid = complex.grid().ok_or_else(|| {
                    Error::InvalidArgument("per-axis deformation needs a cubical grid".into())
                })?;
                if axis >= grid.dim {
                    return Err(Error::InvalidArgument(format!(
                        "axis {axis} out of range for a {}-dimensional grid",
                        grid.dim
                    )));
                }
                let mut spacings = match &base.mode {
                    MetricMode::Native => grid.spacing.clone(),
                    MetricMode::PerAxis { spacings } => spacings.clone(),
                    MetricMode::PerCell { .. } => {
                        return Err(Error::InvalidArgument(
                            "per-axis deformation of a per-cell metric".into(),
                        ))
                    }
                };
                spacings[axis] *= (1.0 + eps).sqrt();
                Ok(MetricSpec {
                    mode: MetricMode::PerAxis { spacings },
                    factor: base.factor,
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationPoint {
    pub eps: f64,
    pub closeness: ClosenessReport,
    /// Measured closeness does not exceed the declared `ε`.
    pub closeness_ok: bool,
    /// Windowed Hausdorff distance per degree.
    pub degree_distances: Vec<f64>,
    pub distance: f64,
    /// `distance / ε^(1/3)`.
    pub ratio: f64,
    /// `A · 2ε_m / (1 − ε_m)` with `ε_m` the measured closeness; always valid.
    pub min_max_bound: f64,
    /// `A · ε / (1 − ε)` with the declared `ε`; valid for per-axis stretches of
    /// cubical grids, where eigenvalues are sums of per-axis terms.
    pub first_order_bound: f64,
    /// Uniform scaling only: largest displacement `λ ε / (1 + ε)` of an eigenvalue
    /// whose base or deformed value lies in the window.
    pub scaling_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationReport {
    pub family: DeformationFamily,
    pub window: f64,
    pub points: Vec<DeformationPoint>,
    /// Least-squares slope of `log d` against `log ε` (absent when a distance is zero
    /// or the sweep has one point).
    pub trend_slope: Option<f64>,
    /// Distances shrink with `ε` in trend: positive slope and the smallest `ε`
    /// gives the smallest distance. Single points can cross neighbouring
    /// eigenvalues at large `ε`, so strict monotonicity is not required.
    pub monotone: bool,
    /// The ratio over the smaller half of the sweep never exceeds its maximum
    /// over the larger half.
    pub ratio_bounded: bool,
    pub max_ratio: f64,
}

impl DeformationReport {
    pub fn passed(&self) -> bool {
        self.monotone
            && self.ratio_bounded
            && self
                .points
                .iter()
                .all(|p| p.closeness_ok && p.distance <= p.min_max_bound * (1.0 + 1e-9) + 1e-12)
    }

    /// `eps,distance,ratio,closeness,min_max_bound` rows in sweep order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,distance,ratio,closeness,min_max_bound\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                p.eps, p.distance, p.ratio, p.closeness.eps, p.min_max_bound
            ));
        }
        out
    }
}

fn scaling_bound(base: &[SpectrumSet], eps: f64, window: f64) -> f64 {
    base.iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|&l| l >= 0.0 && (l <= window || l / (1.0 + eps) <= window))
        .map(|l| l * eps / (1.0 + eps))
        .fold(0.0, f64::max)
}

pub fn deformation_experiment(
    complex: &CellComplex,
    base: &MetricSpec,
    family: DeformationFamily,
    sweep: &[f64],
    window: f64,
    tol: f64,
) -> Result<DeformationReport> {
    if sweep.is_empty() {
        return Err(Error::InvalidArgument("empty ε sweep".into()));
    }
    if let Some(&bad) = sweep.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
        return Err(Error::InvalidArgument(format!("ε = {bad} is outside (0, 1/2)")));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidArgument(format!("window {window} must be positive")));
    }
    let base_masses = assemble_masses(complex, base)?;
    let base_spectra = degree_spectra(complex, base, tol)?;

    let mut points = Vec::with_capacity(sweep.len());
    for &eps in sweep {
        let metric = family.metric(complex, base, eps)?;
        let masses = assemble_masses(complex, &metric)?;
        let closeness = epsilon_closeness(complex, &base_masses, &masses)?;
        let measured = closeness.eps;
        let min_max_bound = window * 2.0 * measured / (1.0 - measured);
        let spectra = degree_spectra(complex, &metric, tol)?;
        let degree_distances: Vec<f64> = base_spectra
            .iter()
            .zip(&spectra)
            .map(|(s0, s1)| windowed_hausdorff(s0, s1, window, min_max_bound))
            .collect();
        let distance = degree_distances.iter().copied().fold(0.0, f64::max);
        points.push(DeformationPoint {
            eps,
            closeness_ok: measured <= eps * (1.0 + 1e-12),
            closeness,
            degree_distances,
            distance,
            ratio: distance / eps.cbrt(),
            min_max_bound,
            first_order_bound: window * eps / (1.0 - eps),
            scaling_bound: matches!(family, DeformationFamily::UniformScaling)
                .then(|| scaling_bound(&base_spectra, eps, window)),
        });
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].eps.total_cmp(&points[b].eps));
    let smallest = points[order[0]].distance;
    let trend_slope = if points.len() >= 2 && points.iter().all(|p| p.distance > 0.0) {
        let eps: Vec<f64> = points.iter().map(|p| p.eps).collect();
        let dist: Vec<f64> = points.iter().map(|p| p.distance).collect();
        Some(fit_log_slope(&eps, &dist)?)
    } else {
        None
    };
    let monotone = points.iter().all(|p| smallest <= p.distance * (1.0 + 1e-9) + 1e-12)
        && trend_slope.is_none_or(|s| s > 0.0);
    let half = order.len() / 2;
    let ratio_max = |idx: &[usize]| idx.iter().map(|&i| points[i].ratio).fold(0.0, f64::max);
    let ratio_bounded = half == 0 || ratio_max(&order[..half]) <= ratio_max(&order[half..]) * (1.0 + 1e-9);
    let max_ratio = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    Ok(DeformationReport {
        family,
        window,
        trend_slope,
        ratio_bounded: ratio_bounded && max_ratio.is_finite(),
        max_ratio,
        monotone,
        points,
    })
}
