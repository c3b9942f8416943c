//! Dirichlet eigenvalues of metric balls in flat tori and their decay in the radius.

use serde::{Deserialize, Serialize};

use crate::complex::{build_periodic_grid, CellComplex, CellLabel, GridSpec};
use crate::eigensolve::{eig_pencil, Pencil, Selection, SolverOptions};
use crate::error::{Error, Result};
use crate::metric::{assemble_masses, assemble_pencil, MetricMode, MetricSpec};

/// Accepted range for the fitted slope of `log λ` against `log R` on flat tori.
pub const LOCALIZATION_SLOPE_RANGE: (f64, f64) = (-2.2, -1.8);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub degree: usize,
    pub radii: Vec<f64>,
    /// First Dirichlet eigenvalue of the ball of each radius.
    pub eigenvalues: Vec<f64>,
    pub slope: f64,
    pub within_range: bool,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Physical edge lengths of a grid under a metric.
fn physical_spacing(grid: &GridSpec, metric: &MetricSpec) -> Result<Vec<f64>> {
    let base = match &metric.mode {
        MetricMode::Native => grid.spacing.clone(),
        MetricMode::PerAxis { spacings } if spacings.len() == grid.dim => spacings.clone(),
        MetricMode::PerAxis { .. } => {
            return Err(Error::InvalidMetric("per-axis spacing count differs from grid dimension".into()))
        }
        MetricMode::PerCell { .. } => {
            return Err(Error::InvalidArgument("ball geometry needs a per-axis or native metric".into()))
        }
    };
    Ok(base.iter().map(|h| h * metric.factor.sqrt()).collect())
}

/// Smallest eigenvalue of the degree-`k` pencil restricted to cells whose
/// vertices all lie in the closed Euclidean ball of radius `radius` about
/// `center` (a vertex of a fully periodic grid). Balls that would meet their
/// own periodic image are rejected.
pub fn dirichlet_ball_eigenvalue(
    complex: &CellComplex,
    metric: &MetricSpec,
    center: usize,
    radius: f64,
    degree: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    let grid = complex
        .grid()
        .filter(|g| g.is_fully_periodic())
        .ok_or_else(|| Error::InvalidArgument("ball restriction needs a fully periodic grid".into()))?;
    complex.check_degree(degree)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {radius} must be positive")));
    }
    let spacing = physical_spacing(grid, metric)?;
    for a in 0..grid.dim {
        if 2.0 * radius / spacing[a] + 2.0 >= grid.extents[a] as f64 {
            return Err(Error::InvalidArgument(format!(
                "ball of radius {radius} wraps around axis {a} ({} cells)",
                grid.extents[a]
            )));
        }
    }
    let CellLabel::Grid { origin: c, .. } = &complex.labels(0)[center] else {
        unreachable!("grid complexes carry grid labels")
    };

    let inside = |vertex: &[usize]| -> bool {
        let d2: f64 = (0..grid.dim)
            .map(|a| {
                let n = grid.extents[a] as i64;
                let mut d = (vertex[a] as i64 - c[a] as i64).rem_euclid(n);
                if d > n / 2 {
                    d -= n;
                }
                (d as f64 * spacing[a]).powi(2)
            })
            .sum();
        d2 <= radius * radius * (1.0 + 1e-12)
    };

    let keep: Vec<usize> = complex
        .labels(degree)
        .iter()
        .enumerate()
        .filter(|(_, label)| {
            let CellLabel::Grid { origin, axes } = label else {
                return false;
            };
            (0..1usize << axes.len()).all(|corner| {
                let mut v = origin.clone();
                for (j, &a) in axes.iter().enumerate() {
                    if corner >> j & 1 == 1 {
                        v[a] = (v[a] + 1) % grid.extents[a];
                    }
                }
                inside(&v)
            })
        })
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "ball of radius {radius} contains no {degree}-cells"
        )));
    }

    let masses = assemble_masses(complex, metric)?;
    let pencil = assemble_pencil(complex, &masses, degree)?;
    let restricted = Pencil::new(
        pencil.stiffness().principal_submatrix(&keep),
        keep.iter().map(|&i| pencil.mass()[i]).collect(),
    );
    let spectrum = eig_pencil(&restricted, Selection::Smallest(1), opts)?;
    spectrum
        .values
        .first()
        .copied()
        .ok_or_else(|| Error::Solve("no eigenvalue returned".into()))
}

/// Dirichlet ball eigenvalues about the origin vertex of the torus `spec` for
/// each radius, with the fitted log-log slope.
pub fn localization_experiment(
    spec: &GridSpec,
    radii: &[f64],
    degree: usize,
    opts: &SolverOptions,
) -> Result<LocalizationReport> {
    let complex = build_periodic_grid(spec)?;
    let metric = MetricSpec::native();
    let eigenvalues = radii
        .iter()
        .map(|&r| dirichlet_ball_eigenvalue(&complex, &metric, 0, r, degree, opts))
        .collect::<Result<Vec<f64>>>()?;
    let slope = fit_log_slope(radii, &eigenvalues)?;
    let (lo, hi) = LOCALIZATION_SLOPE_RANGE;
    Ok(LocalizationReport {
        degree,
        radii: radii.to_vec(),
        eigenvalues,
        slope,
        within_range: (lo..=hi).contains(&slope),
    })
}
