//! Closed-form reference spectra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex::{binomial, GridSpec};
use crate::eigensolve::SpectrumSet;
use crate::error::{Error, Result};

/// Exact spectrum of the `k`-form pencil on a fully periodic cubical grid:
/// `Σ_a (4/h_a²) sin²(π m_a / N_a)` over frequency tuples `m`, each with
/// multiplicity `C(n, k)`. `count` keeps only the smallest values.
pub fn discrete_torus_oracle(spec: &GridSpec, k: usize, count: Option<usize>) -> Result<SpectrumSet> {
    spec.validate()?;
    if !spec.is_fully_periodic() {
        return Err(Error::InvalidGrid("oracle needs a fully periodic grid".into()));
    }
    if k > spec.dim {
        return Err(Error::DegreeOutOfRange {
            degree: k,
            max: spec.dim,
        });
    }
    let per_axis: Vec<Vec<f64>> = (0..spec.dim)
        .map(|a| {
            let (n, h) = (spec.extents[a], spec.spacing[a]);
            (0..n)
                .map(|m| {
                    let s = (std::f64::consts::PI * m as f64 / n as f64).sin();
                    4.0 / (h * h) * s * s
                })
                .collect()
        })
        .collect();

    let mut sums = vec![0.0];
    for axis in &per_axis {
        sums = sums
            .iter()
            .flat_map(|&s| axis.iter().map(move |&v| s + v))
            .collect();
    }
    let mult = binomial(spec.dim, k);
    let mut values: Vec<f64> = sums
        .into_iter()
        .flat_map(|v| std::iter::repeat_n(v, mult))
        .collect();
    values.sort_by(f64::total_cmp);
    if let Some(c) = count {
        values.truncate(c);
    }
    Ok(SpectrumSet::new(values, None, 1e-12))
}

/// `4π²|v*|²` over dual-lattice vectors with value `≤ cutoff`, each with
/// multiplicity `C(n, k)`. `basis` holds the lattice generators as rows.
pub fn continuum_torus_spectrum(basis: &[Vec<f64>], k: usize, cutoff: f64) -> Result<SpectrumSet> {
    let n = basis.len();
    if n == 0 || basis.iter().any(|b| b.len() != n) {
        return Err(Error::InvalidArgument("lattice basis must be square".into()));
    }
    if k > n {
        return Err(Error::DegreeOutOfRange { degree: k, max: n });
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be positive")));
    }
    let b = DMatrix::from_fn(n, n, |r, c| basis[r][c]);
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let det = b.determinant();
    if !(det.abs() > 1e-12 * scale.powi(n as i32)) {
        return Err(Error::InvalidArgument("degenerate lattice basis".into()));
    }
    // dual basis rows b*_i with b*_i · b_j = δ_ij
    let dual = b
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("degenerate lattice basis".into()))?
        .transpose();

    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let radius = (cutoff / four_pi2).sqrt();
    // z_i = v* · b_i, so |z_i| ≤ |v*| |b_i|
    let bounds: Vec<i64> = (0..n)
        .map(|i| (radius * b.row(i).norm()).floor() as i64)
        .collect();

    let mut values = Vec::new();
    let mut z: Vec<i64> = bounds.iter().map(|&m| -m).collect();
    let mult = binomial(n, k);
    loop {
        let mut v = vec![0.0; n];
        for (i, &zi) in z.iter().enumerate() {
            for (c, vc) in v.iter_mut().enumerate() {
                *vc += zi as f64 * dual[(i, c)];
            }
        }
        let value = four_pi2 * v.iter().map(|x| x * x).sum::<f64>();
        if value <= cutoff * (1.0 + 1e-12) {
            values.extend(std::iter::repeat_n(value, mult));
        }
        // odometer
        let mut axis = 0;
        loop {
            if axis == n {
                return Ok(SpectrumSet::new(values, Some(cutoff), 1e-12));
            }
            if z[axis] < bounds[axis] {
                z[axis] += 1;
                break;
            }
            z[axis] = -bounds[axis];
            axis += 1;
        }
    }
}

/// Smallest `l`-form eigenvalues `λ_B(l)`, `l = 0 ..= n − s`, of a compact flat factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatTable {
    pub n: usize,
    pub s: usize,
    pub lambda: Vec<f64>,
}

impl FlatTable {
    pub fn new(n: usize, s: usize, lambda: Vec<f64>) -> Result<Self> {
        let t = Self { n, s, lambda };
        t.validate()?;
        Ok(t)
    }

    pub fn compact_dim(&self) -> usize {
        self.n - self.s
    }

    pub fn validate(&self) -> Result<()> {
        if self.s > self.n {
            return Err(Error::TableDomain(format!(
                "flat rank {} exceeds dimension {}",
                self.s, self.n
            )));
        }
        let m = self.compact_dim();
        if self.lambda.len() != m + 1 {
            return Err(Error::TableDomain(format!(
                "table has {} entries, expected {}",
                self.lambda.len(),
                m + 1
            )));
        }
        if let Some(v) = self.lambda.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::TableDomain(format!("negative or non-finite entry {v}")));
        }
        for l in 0..=m {
            let (a, b) = (self.lambda[l], self.lambda[m - l]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::TableDomain(format!(
                    "λ_B({l}) = {a} differs from λ_B({}) = {b}",
                    m - l
                )));
            }
        }
        Ok(())
    }

    fn at(&self, l: usize) -> Result<f64> {
        self.lambda.get(l).copied().ok_or_else(|| {
            Error::TableDomain(format!(
                "index {l} outside 0..={}",
                self.compact_dim()
            ))
        })
    }
}

/// Bottom of the `k`-form spectrum of `B × ℝˢ`.
pub fn alpha_invariant(table: &FlatTable, k: usize) -> Result<f64> {
    table.validate()?;
    let (n, s) = (table.n, table.s);
    if k > n {
        return Err(Error::DegreeOutOfRange { degree: k, max: n });
    }
    if 2 * s >= n || k <= s || k >= n - s {
        return Ok(0.0);
    }
    if 2 * k <= n {
        let mut best = f64::INFINITY;
        for l in 0..=s {
            best = best.min(table.at(k - l)?);
        }
        Ok(best)
    } else {
        alpha_invariant(table, n - k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Hyperbolic,
    Flat,
    Product,
}

/// `[lower, ∞)`, optionally with an isolated atom at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInterval {
    pub lower: f64,
    pub includes_zero_atom: bool,
    pub kind: ReferenceKind,
}

/// Essential spectrum of the `k`-form Laplacian on hyperbolic space `H^{N+1}`.
pub fn hyperbolic_reference(big_n: usize, k: usize) -> Result<ReferenceInterval> {
    if big_n == 0 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    if k > big_n + 1 {
        return Err(Error::DegreeOutOfRange {
            degree: k,
            max: big_n + 1,
        });
    }
    let j = k.min(big_n + 1 - k) as f64;
    let gap = big_n as f64 / 2.0 - j;
    Ok(ReferenceInterval {
        lower: gap * gap,
        includes_zero_atom: big_n % 2 == 1 && 2 * k == big_n + 1,
        kind: ReferenceKind::Hyperbolic,
    })
}

/// `[α(B, s, n, k), ∞)` for the flat product `B × ℝˢ`.
pub fn flat_reference(table: &FlatTable, k: usize) -> Result<ReferenceInterval> {
    Ok(ReferenceInterval {
        lower: alpha_invariant(table, k)?,
        includes_zero_atom: false,
        kind: if table.s == 0 {
            ReferenceKind::Flat
        } else {
            ReferenceKind::Product
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_oracle() {
        let s = discrete_torus_oracle(&GridSpec::torus(1, 4, 1.0), 0, None).unwrap();
        let expect = [0.0, 2.0, 2.0, 4.0];
        for (a, b) in s.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_multiplicities_and_degree_symmetry() {
        let spec = GridSpec::torus(2, 4, 1.0);
        let s1 = discrete_torus_oracle(&spec, 1, None).unwrap();
        assert_eq!(s1.len(), 32);
        assert!(s1.clusters().iter().all(|&(_, m)| m % 2 == 0));
        let s0 = discrete_torus_oracle(&spec, 0, None).unwrap();
        let s2 = discrete_torus_oracle(&spec, 2, None).unwrap();
        assert_eq!(s0.values, s2.values);
        let mut open = spec.clone();
        open.periodic[0] = false;
        assert!(discrete_torus_oracle(&open, 0, None).is_err());
    }

    #[test]
    fn unit_square_lattice() {
        let s = continuum_torus_spectrum(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0, 50.0).unwrap();
        let c = s.clusters();
        assert!(c[0].0.abs() < 1e-12 && c[0].1 == 1);
        assert!((c[1].0 - 4.0 * PI * PI).abs() < 1e-9 && c[1].1 == 4);
        assert!(s.values.iter().all(|&v| v <= 50.0));
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn harmonic_multiplicity_is_binomial() {
        let basis = [vec![1.0, 0.0, 0.0], vec![0.3, 1.0, 0.0], vec![0.0, 0.2, 1.5]];
        for k in 0..=3 {
            let s = continuum_torus_spectrum(&basis, k, 10.0).unwrap();
            assert_eq!(s.kernel_dimension(), binomial(3, k));
        }
    }

    #[test]
    fn rectangular_lattice_first_nonzero() {
        let s = continuum_torus_spectrum(&[vec![1.0, 0.0], vec![0.0, 2.0]], 0, 20.0).unwrap();
        let c = s.clusters();
        assert!((c[1].0 - PI * PI).abs() < 1e-9);
        assert_eq!(c[1].1, 2);
        assert!(continuum_torus_spectrum(&[vec![1.0, 2.0], vec![2.0, 4.0]], 0, 5.0).is_err());
    }

    #[test]
    fn alpha_for_flat_torus_factor_vanishes() {
        for n in 1..=8 {
            for s in 0..=n {
                let t = FlatTable::new(n, s, vec![0.0; n - s + 1]).unwrap();
                for k in 0..=n {
                    assert_eq!(alpha_invariant(&t, k).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn hantzsche_wendt_product_has_positive_middle_gap() {
        let (a, b) = (0.7, 1.3);
        let t = FlatTable::new(4, 1, vec![0.0, a, a, 0.0]).unwrap();
        assert_eq!(alpha_invariant(&t, 2).unwrap(), a);
        for k in [0, 1, 3, 4] {
            assert_eq!(alpha_invariant(&t, k).unwrap(), 0.0);
        }
        // asymmetric tables are rejected
        assert!(FlatTable::new(4, 1, vec![0.0, a, b, 0.0]).is_err());
    }

    #[test]
    fn alpha_rejects_bad_tables() {
        assert!(FlatTable::new(3, 4, vec![]).is_err());
        assert!(FlatTable::new(4, 1, vec![0.0; 3]).is_err());
        assert!(FlatTable::new(2, 0, vec![0.0, -1.0, 0.0]).is_err());
        let t = FlatTable::new(2, 0, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(alpha_invariant(&t, 3).is_err());
    }

    #[test]
    fn hyperbolic_fixtures() {
        let r = hyperbolic_reference(2, 0).unwrap();
        assert_eq!((r.lower, r.includes_zero_atom), (1.0, false));
        assert_eq!(hyperbolic_reference(2, 1).unwrap().lower, 0.0);
        let r = hyperbolic_reference(3, 2).unwrap();
        assert_eq!((r.lower, r.includes_zero_atom), (0.25, true));
        assert!(hyperbolic_reference(2, 4).is_err());
        assert!(hyperbolic_reference(0, 0).is_err());
    }
}
