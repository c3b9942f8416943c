//! Symmetric-definite generalized eigenproblems `K x = λ M x` with diagonal `M`.
//!
//! The dense path (symmetric eigendecomposition of `M^{-1/2} K M^{-1/2}`) is
//! the reference. The iterative path is shift-invert block subspace iteration
//! on `(K + σM)⁻¹ M` with Rayleigh–Ritz projection; the inner solves are
//! Jacobi-preconditioned conjugate gradients, which is also how resolvents
//! `(H + α)⁻ᵐ` are applied.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A pencil `(K, M)` with `K` symmetric positive semidefinite and `M` diagonal positive.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub stiffness: CsrMatrix<f64>,
    pub mass: Vec<f64>,
}

impl Pencil {
    pub fn new(stiffness: CsrMatrix<f64>, mass: Vec<f64>) -> Self {
        Self { stiffness, mass }
    }

    pub fn from_dense(stiffness: &DMatrix<f64>, mass: Vec<f64>) -> Self {
        let mut t = Vec::new();
        for r in 0..stiffness.nrows() {
            for c in 0..stiffness.ncols() {
                if stiffness[(r, c)] != 0.0 {
                    t.push((r, c, stiffness[(r, c)]));
                }
            }
        }
        Self::new(
            CsrMatrix::from_triplets(stiffness.nrows(), stiffness.ncols(), &t),
            mass,
        )
    }

    pub fn size(&self) -> usize {
        self.mass.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.size();
        if self.stiffness.nrows() != n || self.stiffness.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "stiffness is {}x{}, mass has {n} entries",
                self.stiffness.nrows(),
                self.stiffness.ncols()
            )));
        }
        if let Some(i) = self.mass.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "mass matrix is not positive definite (entry {i} = {})",
                self.mass[i]
            )));
        }
        Ok(())
    }

    pub fn m_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.mass).map(|((x, y), m)| x * m * y).sum()
    }

    pub fn m_norm(&self, a: &[f64]) -> f64 {
        self.m_inner(a, a).sqrt()
    }

    /// `‖Kx − λMx‖_{M⁻¹}`.
    pub fn residual_norm(&self, x: &[f64], lambda: f64) -> f64 {
        let kx = self.stiffness.mul_vec(x);
        kx.iter()
            .zip(x)
            .zip(&self.mass)
            .map(|((k, xi), m)| {
                let r = k - lambda * m * xi;
                r * r / m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Rough upper estimate of the largest eigenvalue (Gershgorin on `M⁻¹K`).
    pub fn spectral_radius_bound(&self) -> f64 {
        (0..self.size())
            .map(|r| self.stiffness.row(r).map(|(_, v)| v.abs()).sum::<f64>() / self.mass[r])
            .fold(0.0, f64::max)
    }
}

/// Which part of the spectrum to compute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    All,
    /// The smallest `n` eigenvalues.
    Smallest(usize),
    /// Every eigenvalue in `[0, A]`.
    Window(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    ShiftInvert,
    /// Dense up to [`SolverOptions::dense_limit`] unknowns, shift-invert above.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub method: Method,
    pub dense_limit: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            method: Method::Auto,
            dense_limit: 3000,
            max_iterations: 500,
            seed: 0x5eed,
        }
    }
}

/// Truncated, sorted eigenvalue multiset, pointed at `-1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSet {
    /// Raw eigenvalues in ascending order (not snapped).
    pub values: Vec<f64>,
    /// Upper end `A` of the window `[0, A]`, if the set is windowed.
    pub window: Option<f64>,
    pub tol: f64,
    pub basepoint: f64,
}

impl SpectrumSet {
    pub const BASEPOINT: f64 = -1.0;

    pub fn new(mut values: Vec<f64>, window: Option<f64>, tol: f64) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            values,
            window,
            tol,
            basepoint: Self::BASEPOINT,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues inside `[0, upper]`, widened by `tol` at both ends (relative at the top).
    pub fn in_window(&self, upper: f64) -> Vec<f64> {
        let top = upper + self.tol * upper.abs().max(1.0);
        self.values
            .iter()
            .copied()
            .filter(|&v| v >= -self.tol && v <= top)
            .collect()
    }

    /// `{-1} ∪ values`.
    pub fn pointed(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.basepoint).chain(self.values.iter().copied())
    }

    fn merge_gap(&self, value: f64) -> f64 {
        self.tol.max(1e-9 * (1.0 + value.abs()))
    }

    /// `(value, multiplicity)` clusters; values within `max(tol, 1e-9(1+λ))` of
    /// the previous member are merged and reported by their mean.
    pub fn clusters(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize, f64)> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some((sum, count, last)) if (v - *last).abs() <= self.merge_gap(*last) => {
                    *sum += v;
                    *count += 1;
                    *last = v;
                }
                _ => out.push((v, 1, v)),
            }
        }
        out.into_iter()
            .map(|(sum, count, _)| (sum / count as f64, count))
            .collect()
    }

    /// Multiplicity of the zero eigenvalue, using `tol` as the zero threshold.
    pub fn kernel_dimension(&self) -> usize {
        self.values.iter().filter(|v| v.abs() <= self.tol).count()
    }

    /// CSV with header `value,multiplicity`; values below `tol` in magnitude are printed as 0.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,multiplicity\n");
        for (v, m) in self.clusters() {
            let shown = if v.abs() <= self.tol { 0.0 } else { v };
            s.push_str(&format!("{shown:.15e},{m}\n"));
        }
        s
    }

    pub fn from_csv(text: &str, tol: f64) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (v, m) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected value,multiplicity", i + 1)))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            let m: usize = m
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            values.extend(std::iter::repeat_n(v, m));
        }
        Ok(Self::new(values, None, tol))
    }
}

/// Zero threshold for nonzero-spectrum comparisons: `1e-8 · max(1, max|λ|)`.
pub fn zero_threshold(values: &[f64]) -> f64 {
    1e-8 * values.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

pub fn nonzero(values: &[f64], threshold: f64) -> Vec<f64> {
    values.iter().copied().filter(|v| v.abs() > threshold).collect()
}

/// Largest relative discrepancy between two multisets matched in sorted
/// order, or `None` if their sizes differ. Sorted matching is optimal for
/// the max-error criterion on the real line.
pub fn multiset_discrepancy(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Some(
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
            .fold(0.0, f64::max),
    )
}

/// Full dense decomposition: ascending eigenvalues and `M`-orthonormal eigenvectors (columns).
pub fn dense_eigen(pencil: &Pencil) -> Result<(Vec<f64>, DMatrix<f64>)> {
    pencil.check()?;
    let n = pencil.size();
    let inv_sqrt: Vec<f64> = pencil.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = DMatrix::zeros(n, n);
    for (r, c, v) in pencil.stiffness.triplets() {
        a[(r, c)] += v * inv_sqrt[r] * inv_sqrt[c];
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])] * inv_sqrt[r]);
    Ok((values, vectors))
}

pub fn dense_eigenvalues(pencil: &Pencil) -> Result<Vec<f64>> {
    Ok(dense_eigen(pencil)?.0)
}

/// Number of eigenvalues strictly below `shift`, from the inertia of `K − shift·M`
/// (Sylvester's law: congruent to `M^{-1/2} K M^{-1/2} − shift`).
pub fn inertia_count_below(pencil: &Pencil, shift: f64) -> Result<usize> {
    pencil.check()?;
    let mut a = pencil.stiffness.to_dense();
    for i in 0..pencil.size() {
        a[(i, i)] -= shift * pencil.mass[i];
    }
    let a = (&a + a.transpose()) * 0.5;
    Ok(SymmetricEigen::new(a)
        .eigenvalues
        .iter()
        .filter(|&&v| v < 0.0)
        .count())
}

/// Eigenvalues (and `M`-orthonormal eigenvectors) of a pencil.
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub max_residual: f64,
}

pub fn eig_pencil(pencil: &Pencil, selection: Selection, opts: &SolverOptions) -> Result<SpectrumSet> {
    let result = eig_pencil_vectors(pencil, selection, opts)?;
    let window = match selection {
        Selection::Window(a) => Some(a),
        _ => None,
    };
    Ok(SpectrumSet::new(result.values, window, opts.tol))
}

pub fn eig_pencil_vectors(
    pencil: &Pencil,
    selection: Selection,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    pencil.check()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let n = pencil.size();
    let dense = match opts.method {
        Method::Dense => true,
        Method::ShiftInvert => false,
        Method::Auto => n <= opts.dense_limit || matches!(selection, Selection::All),
    };
    if dense || n == 0 {
        let (values, vectors) = dense_eigen(pencil)?;
        let keep: Vec<usize> = match selection {
            Selection::All => (0..n).collect(),
            Selection::Smallest(c) => (0..c.min(n)).collect(),
            Selection::Window(a) => (0..n).filter(|&i| values[i] <= a).collect(),
        };
        let vectors = DMatrix::from_fn(n, keep.len(), |r, c| vectors[(r, keep[c])]);
        let values: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
        let max_residual = max_scaled_residual(pencil, &values, &vectors);
        return Ok(EigenResult {
            values,
            vectors,
            max_residual,
        });
    }
    match selection {
        Selection::All => unreachable!("handled by the dense path"),
        Selection::Smallest(count) => subspace_iteration(pencil, count, None, opts),
        Selection::Window(a) => {
            let mut count = 16.min(n);
            loop {
                let res = subspace_iteration(pencil, count, Some(a), opts)?;
                if res.values.len() < count || count == n {
                    return Ok(res);
                }
                count = (count * 2).min(n);
            }
        }
    }
}

fn max_scaled_residual(pencil: &Pencil, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let x: Vec<f64> = vectors.column(i).iter().copied().collect();
            pencil.residual_norm(&x, lambda) / ((lambda.abs() + 1.0) * pencil.m_norm(&x))
        })
        .fold(0.0, f64::max)
}

/// Shift-invert block subspace iteration for the `count` smallest
/// eigenpairs. With `window = Some(A)` only the pairs in `[0, A]` are
/// returned; fewer than `count` values then means the window is exhausted.
fn subspace_iteration(
    pencil: &Pencil,
    count: usize,
    window: Option<f64>,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    let n = pencil.size();
    let count = count.min(n);
    let guard = (count / 2).max(8);
    let block = (count + guard).min(n);
    let radius = pencil.spectral_radius_bound().max(1e-300);
    let shift = 1e-3 * radius;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = DMatrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    m_orthonormalize(pencil, &mut basis);

    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut next = DMatrix::zeros(n, block);
        for j in 0..block {
            let rhs: Vec<f64> = basis
                .column(j)
                .iter()
                .zip(&pencil.mass)
                .map(|(x, m)| x * m)
                .collect();
            let y = conjugate_gradient(pencil, shift, &rhs, 1e-14, 20 * n + 100)?;
            next.set_column(j, &DVector::from_vec(y));
        }
        m_orthonormalize(pencil, &mut next);

        // Rayleigh–Ritz on span(next), which is M-orthonormal
        let kq = DMatrix::from_columns(
            &(0..block)
                .map(|j| pencil.stiffness.mul_dvector(&next.column(j).into_owned()))
                .collect::<Vec<_>>(),
        );
        let small = next.transpose() * kq;
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let coeffs = DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        basis = &next * coeffs;
        let ritz: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

        let wanted = match window {
            None => count,
            Some(a) => {
                let inside = ritz.iter().take(count).filter(|&&v| v <= a).count();
                // one converged value beyond the window proves the window is exhausted
                (inside + 1).min(count)
            }
        };
        let mut worst: f64 = 0.0;
        for (i, &lambda) in ritz.iter().enumerate().take(wanted) {
            let x: Vec<f64> = basis.column(i).iter().copied().collect();
            let r = pencil.residual_norm(&x, lambda) / ((lambda.abs() + 1.0) * pencil.m_norm(&x));
            worst = worst.max(r);
        }
        last_residual = worst;
        if worst <= opts.tol {
            let keep: Vec<usize> = match window {
                None => (0..count).collect(),
                Some(a) => (0..count).filter(|&i| ritz[i] <= a).collect(),
            };
            let vectors = DMatrix::from_fn(n, keep.len(), |r, c| basis[(r, keep[c])]);
            return Ok(EigenResult {
                values: keep.iter().map(|&i| ritz[i]).collect(),
                vectors,
                max_residual: worst,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: last_residual,
    })
}

/// Modified Gram–Schmidt in the `M` inner product, applied twice.
fn m_orthonormalize(pencil: &Pencil, q: &mut DMatrix<f64>) {
    let m = &pencil.mass;
    for _pass in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let proj: f64 = (0..q.nrows()).map(|r| q[(r, i)] * m[r] * q[(r, j)]).sum();
                for r in 0..q.nrows() {
                    q[(r, j)] -= proj * q[(r, i)];
                }
            }
            let norm: f64 = (0..q.nrows())
                .map(|r| q[(r, j)] * m[r] * q[(r, j)])
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for r in 0..q.nrows() {
                    q[(r, j)] /= norm;
                }
            }
        }
    }
}

/// Solves `(K + shift·M) x = rhs` by Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(
    pencil: &Pencil,
    shift: f64,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let diag: Vec<f64> = pencil
        .stiffness
        .diagonal_entries()
        .iter()
        .zip(&pencil.mass)
        .map(|(k, m)| k + shift * m)
        .collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Solve("operator is not positive definite".into()));
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = pencil.stiffness.mul_vec(x);
        for i in 0..n {
            y[i] += shift * pencil.mass[i] * x[i];
        }
        y
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let b_norm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solve("conjugate gradient breakdown".into()));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        z = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // accept a slightly looser residual rather than fail on round-off stagnation
    let residual = dot(&r, &r).sqrt() / b_norm;
    if residual <= 1e3 * rel_tol {
        Ok(x)
    } else {
        Err(Error::Solve(format!(
            "conjugate gradient stalled at relative residual {residual:.3e}"
        )))
    }
}

/// `((M⁻¹K + α)⁻ᵐ) v` via `m` successive solves of `(K + αM) x = M b`.
pub fn resolvent_apply(pencil: &Pencil, alpha: f64, power: u32, v: &[f64]) -> Result<Vec<f64>> {
    pencil.check()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be positive")));
    }
    if !(1..=2).contains(&power) {
        return Err(Error::InvalidArgument(format!("resolvent power {power} not in {{1, 2}}")));
    }
    if v.len() != pencil.size() {
        return Err(Error::InvalidArgument(format!(
            "cochain has length {}, pencil has size {}",
            v.len(),
            pencil.size()
        )));
    }
    let mut current = v.to_vec();
    for _ in 0..power {
        let rhs: Vec<f64> = current.iter().zip(&pencil.mass).map(|(x, m)| x * m).collect();
        current = conjugate_gradient(pencil, alpha, &rhs, 1e-15, 20 * pencil.size() + 200)?;
    }
    Ok(current)
}

/// `vᵀKv / vᵀMv`.
pub fn rayleigh_quotient(pencil: &Pencil, v: &[f64]) -> Result<f64> {
    let denom = pencil.m_inner(v, v);
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument("Rayleigh quotient of the zero vector".into()));
    }
    let kv = pencil.stiffness.mul_vec(v);
    let num: f64 = kv.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((num / denom).max(0.0))
}
