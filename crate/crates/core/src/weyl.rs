//! Certified spectrum localization from resolvent-weighted residuals.
//!
//! For a probe `ψ` of unit `M`-norm and a target `λ ≥ 0`, with
//! `f(t) = (t+α)⁻²` and `g(t) = (t+α)⁻¹`, the residuals
//!
//! * `m1 = ((H+α)⁻¹ψ, (H−λ)ψ)`,
//! * `m2 = ((H+α)⁻²ψ, (H−λ)ψ)`,
//! * `f  = ((H+α)⁻²(H−λ)ψ, (H−λ)ψ) = m1 − (α+λ)·m2`
//!
//! are bounded by `δ = max(|m1|, |m2|, |f|)`, and then
//!
//! * `dist(λ, σ) ≤ ((c1+c2+c3)/(c1·c2))^{1/3} · δ^{1/3}` for `λ > 0`,
//! * `dist(λ, σ) ≤ δ / c2` for `λ = 0`,
//!
//! with `c1 = (λ+α)⁻²`, `c2 = (λ+1+α)⁻¹`, `c3 = λ/α`. The argument only
//! localizes within distance `min(λ, 1)` (or `1` when `λ = 0`); bounds at or
//! beyond that threshold are reported as vacuous rather than clamped.
//!
//! Finite matrices have no essential spectrum, so only `σ` is certified.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{dense_eigen, resolvent_apply, Pencil};
use crate::error::{Error, Result};

/// Tolerance on `‖ψ‖_M − 1` before a probe is rejected instead of renormalized.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylConstants {
    pub lambda: f64,
    pub alpha: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl WeylConstants {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be ≥ 0")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} must be > 0")));
        }
        // inf of f on [0, λ] is at t = λ; on [λ+1, ∞) the map t ↦ (t−λ)/(t+α)
        // increases, so both parts of c2 meet at t = λ + 1
        Ok(Self {
            lambda,
            alpha,
            c0: alpha.powi(-2).max(1.0 / alpha),
            c1: (lambda + alpha).powi(-2),
            c2: 1.0 / (lambda + 1.0 + alpha),
            c3: lambda / alpha,
        })
    }

    /// `((c1 + c2 + c3) / (c1·c2))^{1/3}`.
    pub fn cube_root_factor(&self) -> f64 {
        ((self.c1 + self.c2 + self.c3) / (self.c1 * self.c2)).cbrt()
    }

    /// Distance bound implied by residual level `delta`.
    pub fn bound(&self, delta: f64) -> f64 {
        if self.lambda > 0.0 {
            self.cube_root_factor() * delta.cbrt()
        } else {
            delta / self.c2
        }
    }

    /// Largest distance the bound can certify.
    pub fn localization_radius(&self) -> f64 {
        if self.lambda > 0.0 {
            self.lambda.min(1.0)
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylCertificate {
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub bound: f64,
    /// The bound reaches the localization radius and certifies nothing.
    pub vacuous: bool,
    pub m1_value: f64,
    pub m2_value: f64,
    pub f_value: f64,
}

impl WeylCertificate {
    pub fn constants(&self) -> WeylConstants {
        WeylConstants {
            lambda: self.lambda,
            alpha: self.alpha,
            c0: self.c0,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
        }
    }
}

/// `(H − λ)ψ = M⁻¹Kψ − λψ`.
fn shifted_apply(pencil: &Pencil, psi: &[f64], lambda: f64) -> Vec<f64> {
    pencil
        .stiffness
        .mul_vec(psi)
        .iter()
        .zip(psi)
        .zip(&pencil.mass)
        .map(|((k, p), m)| k / m - lambda * p)
        .collect()
}

fn normalized_probe(pencil: &Pencil, psi: &[f64]) -> Result<Vec<f64>> {
    if psi.len() != pencil.size() {
        return Err(Error::InvalidArgument(format!(
            "probe has length {}, pencil has size {}",
            psi.len(),
            pencil.size()
        )));
    }
    let norm = pencil.m_norm(psi);
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidArgument(format!(
            "probe M-norm {norm} is not 1 within {UNIT_NORM_TOL:e}"
        )));
    }
    Ok(psi.iter().map(|x| x / norm).collect())
}

pub fn certify(pencil: &Pencil, psi: &[f64], lambda: f64, alpha: f64) -> Result<WeylCertificate> {
    let constants = WeylConstants::new(lambda, alpha)?;
    let psi = normalized_probe(pencil, psi)?;
    let shifted = shifted_apply(pencil, &psi, lambda);

    let r1 = resolvent_apply(pencil, alpha, 1, &psi)?;
    let r2 = resolvent_apply(pencil, alpha, 2, &psi)?;
    let m1 = pencil.m_inner(&r1, &shifted);
    let m2 = pencil.m_inner(&r2, &shifted);
    let f = pencil.m_inner(&resolvent_apply(pencil, alpha, 2, &shifted)?, &shifted);

    let delta = m1.abs().max(m2.abs()).max(f.abs());
    let bound = constants.bound(delta);
    Ok(WeylCertificate {
        lambda,
        alpha,
        delta,
        c0: constants.c0,
        c1: constants.c1,
        c2: constants.c2,
        c3: constants.c3,
        bound,
        vacuous: bound >= constants.localization_radius(),
        m1_value: m1,
        m2_value: m2,
        f_value: f,
    })
}

/// Certificate with the smallest bound over a grid of `α` values.
pub fn certify_best_alpha(
    pencil: &Pencil,
    psi: &[f64],
    lambda: f64,
    alphas: &[f64],
) -> Result<WeylCertificate> {
    let mut best: Option<WeylCertificate> = None;
    for &alpha in alphas {
        let cert = certify(pencil, psi, lambda, alpha)?;
        if best.as_ref().is_none_or(|b| cert.bound < b.bound) {
            best = Some(cert);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty alpha grid".into()))
}

/// Probe built from the eigenvector nearest `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub psi: Vec<f64>,
    pub nearest_eigenvalue: f64,
    pub distance: f64,
    /// `δ` of the certificate built on `psi`.
    pub delta: f64,
    /// `|((H+α)⁻²(H−λ)ψ, (H−λ)ψ)|`.
    pub quadratic_residual: f64,
    /// `|((H+α)⁻¹ψ, (H−λ)ψ)|`.
    pub resolvent_residual: f64,
    /// `c0 · d · max(1, d)`, which `delta` never exceeds.
    pub forward_bound: f64,
}

pub fn witness(pencil: &Pencil, lambda: f64, alpha: f64) -> Result<Witness> {
    let constants = WeylConstants::new(lambda, alpha)?;
    let (values, vectors) = dense_eigen(pencil)?;
    let (index, &nearest) = values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
        .ok_or_else(|| Error::InvalidArgument("empty pencil".into()))?;
    let mut psi: Vec<f64> = vectors.column(index).iter().copied().collect();
    let norm = pencil.m_norm(&psi);
    psi.iter_mut().for_each(|x| *x /= norm);

    let cert = certify(pencil, &psi, lambda, alpha)?;
    let distance = (nearest - lambda).abs();
    Ok(Witness {
        psi,
        nearest_eigenvalue: nearest,
        distance,
        delta: cert.delta,
        quadratic_residual: cert.f_value.abs(),
        resolvent_residual: cert.m1_value.abs(),
        forward_bound: constants.c0 * distance * distance.max(1.0),
    })
}
