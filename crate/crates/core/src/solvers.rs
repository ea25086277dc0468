//! Command designs: ℓ² smoothing spline, ℓ¹-ℓ² via FISTA, and the closed-form
//! shrinkage in `η = Gθ` coordinates.

use serde::{Deserialize, Serialize};

use crate::basis::GramSet;
use crate::numerics::{self, norm1, norm2, norm_inf, solve_spd, spectral_norm_sq, Matrix};
use crate::{Error, Result};

/// Which coordinates a coefficient vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Coefficients of the command basis, `u = Σ θ_j φ_j`.
    Theta,
    /// Sampled outputs `η = Gθ`; the receiver recovers `θ = G⁻¹η`.
    Eta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    L2,
    Fista,
    Ista,
    ClosedForm,
}

/// A designed coefficient vector together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandVector {
    pub coefficients: Vec<f64>,
    pub convention: Convention,
    pub solver: SolverKind,
}

impl CommandVector {
    pub fn theta(coefficients: Vec<f64>, solver: SolverKind) -> Self {
        Self {
            coefficients,
            convention: Convention::Theta,
            solver,
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Number of entries that are not exactly zero.
    pub fn support_size(&self) -> usize {
        self.coefficients.iter().filter(|v| **v != 0.0).count()
    }

    /// Same convention and solver tag, new values (e.g. after quantization).
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Self {
        Self {
            coefficients,
            ..self.clone()
        }
    }
}

/// Weights and stopping rules for the three designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// ℓ² weight on `∫u²`.
    pub mu: f64,
    /// ℓ¹ weight on `‖θ‖₁`.
    pub kappa: f64,
    /// ℓ¹ weight on `‖η‖₁`.
    pub nu: f64,
    /// Step constant `c = c_factor · λ_max(ΦᵀΦ)`; must exceed 1.
    pub c_factor: f64,
    pub max_iter: usize,
    /// Stop once `‖θ[j] − θ[j−1]‖₂ ≤ rel_tol · max(1, ‖θ[j]‖₂)` ...
    pub rel_tol: f64,
    /// ... and the fixed-point residual is at most `kkt_tol`.
    pub kkt_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: 0.01,
            kappa: 0.001,
            nu: 0.05,
            c_factor: 1.01,
            max_iter: 1_000_000,
            rel_tol: 1e-10,
            kkt_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("nu", self.nu),
            ("rel_tol", self.rel_tol),
            ("kkt_tol", self.kkt_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.c_factor > 1.0 && self.c_factor.is_finite()) {
            return Err(Error::Domain(format!(
                "c_factor must exceed 1, got {}",
                self.c_factor
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Iteration record of a proximal-gradient solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterations: usize,
    /// `J₁(θ[j])` for `j = 1..=iterations`. Not monotone for FISTA.
    pub objective_history: Vec<f64>,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Step constant `c` that was used.
    pub step_constant: f64,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

fn require_spline_identical(gram: &GramSet, op: &str) -> Result<()> {
    if !gram.is_spline_identical() {
        return Err(Error::UnsupportedBasis(format!(
            "{op} needs the spline basis (Φ = G)"
        )));
    }
    Ok(())
}

/// `θ₂* = (μI + G)⁻¹ y_ref`.
pub fn solve_l2(gram: &GramSet, yref: &[f64], mu: f64) -> Result<CommandVector> {
    require_spline_identical(gram, "the ℓ² design")?;
    check_len("y_ref", yref.len(), gram.g().rows())?;
    numerics::ensure_finite(yref, "y_ref")?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mu must be non-negative, got {mu}")));
    }
    let theta = solve_spd(&gram.g().shift_diag(mu), yref)?;
    Ok(CommandVector::theta(theta, SolverKind::L2))
}

/// Entrywise `sgn(v)(|v| − α)₊`. Entries with `|v| ≤ α` map to `+0.0`.
pub fn soft_threshold(v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!(
            "threshold must be non-negative, got {alpha}"
        )));
    }
    Ok(v.iter().map(|&x| shrink(x, alpha)).collect())
}

#[inline]
fn shrink(x: f64, alpha: f64) -> f64 {
    let m = x.abs() - alpha;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// `‖θ − S_{κ/c}(θ + Φᵀ(y − Φθ)/c)‖∞`; zero exactly at the minimizer of `J₁`.
pub fn kkt_residual(phi: &Matrix, yref: &[f64], theta: &[f64], kappa: f64, c: f64) -> f64 {
    let resid = numerics::sub(yref, &phi.matvec(theta));
    let grad = phi.tr_matvec(&resid);
    theta
        .iter()
        .zip(&grad)
        .map(|(&t, &g)| (t - shrink(t + g / c, kappa / c)).abs())
        .fold(0.0, f64::max)
}

/// `½‖Φθ − y_ref‖₂² + κ‖θ‖₁`.
pub fn objective_j1(theta: &[f64], phi: &Matrix, yref: &[f64], kappa: f64) -> Result<f64> {
    check_len("theta", theta.len(), phi.cols())?;
    check_len("y_ref", yref.len(), phi.rows())?;
    let r = numerics::sub(&phi.matvec(theta), yref);
    Ok(0.5 * numerics::dot(&r, &r) + kappa * norm1(theta))
}

/// `E₂ + μΩ₂` with `E₂ = ‖Gθ − y_ref‖₂²` and `Ω₂ = ∫u² = θᵀGθ`.
pub fn objective_j2(theta: &[f64], gram: &GramSet, yref: &[f64], mu: f64) -> Result<f64> {
    require_spline_identical(gram, "J₂")?;
    let g = gram.g();
    check_len("theta", theta.len(), g.cols())?;
    check_len("y_ref", yref.len(), g.rows())?;
    let gt = g.matvec(theta);
    let r = numerics::sub(&gt, yref);
    Ok(numerics::dot(&r, &r) + mu * numerics::dot(theta, &gt))
}

/// `ν‖η‖₁ + ½‖η − y_ref‖₂²`.
pub fn objective_jeta(eta: &[f64], yref: &[f64], nu: f64) -> Result<f64> {
    check_len("eta", eta.len(), yref.len())?;
    let r = numerics::sub(eta, yref);
    Ok(nu * norm1(eta) + 0.5 * numerics::dot(&r, &r))
}

/// ℓ¹-ℓ² design by FISTA from `θ[0] = 0`.
pub fn solve_fista(
    phi: &Matrix,
    yref: &[f64],
    cfg: &SolverConfig,
) -> Result<(CommandVector, SolveTrace)> {
    let zero = vec![0.0; phi.cols()];
    proximal_gradient(phi, yref, cfg, &zero, true)
}

/// FISTA from a caller-chosen starting point.
pub fn solve_fista_from(
    phi: &Matrix,
    yref: &[f64],
    cfg: &SolverConfig,
    theta0: &[f64],
) -> Result<(CommandVector, SolveTrace)> {
    proximal_gradient(phi, yref, cfg, theta0, true)
}

/// Unaccelerated iterative shrinkage; same fixed point as FISTA, linear rate.
pub fn solve_ista(
    phi: &Matrix,
    yref: &[f64],
    cfg: &SolverConfig,
) -> Result<(CommandVector, SolveTrace)> {
    let zero = vec![0.0; phi.cols()];
    proximal_gradient(phi, yref, cfg, &zero, false)
}

fn proximal_gradient(
    phi: &Matrix,
    yref: &[f64],
    cfg: &SolverConfig,
    theta0: &[f64],
    accelerated: bool,
) -> Result<(CommandVector, SolveTrace)> {
    cfg.validate()?;
    check_len("y_ref", yref.len(), phi.rows())?;
    check_len("theta0", theta0.len(), phi.cols())?;
    numerics::ensure_finite(phi.as_slice(), "Phi")?;
    numerics::ensure_finite(yref, "y_ref")?;
    numerics::ensure_finite(theta0, "theta0")?;
    let kind = if accelerated {
        SolverKind::Fista
    } else {
        SolverKind::Ista
    };

    let lipschitz = spectral_norm_sq(phi);
    if lipschitz == 0.0 {
        // Φ = 0: the ℓ¹ term alone is minimized at zero.
        let theta = vec![0.0; phi.cols()];
        let j1 = objective_j1(&theta, phi, yref, cfg.kappa)?;
        let trace = SolveTrace {
            iterations: 1,
            objective_history: vec![j1],
            kkt_residual: 0.0,
            converged: true,
            step_constant: 0.0,
        };
        return Ok((CommandVector::theta(theta, kind), trace));
    }
    let c = cfg.c_factor * lipschitz;
    if !c.is_finite() {
        return Err(Error::NumericalFailure("‖Φ‖² overflows".into()));
    }
    let threshold = cfg.kappa / c;

    let mut prev = theta0.to_vec();
    let mut momentum_point = theta0.to_vec();
    let mut beta = 1.0f64;
    let mut history = Vec::new();
    let mut converged = false;
    let mut theta = prev.clone();
    let mut iterations = 0;

    for j in 1..=cfg.max_iter {
        iterations = j;
        let resid = numerics::sub(yref, &phi.matvec(&momentum_point));
        let grad = phi.tr_matvec(&resid);
        theta = momentum_point
            .iter()
            .zip(&grad)
            .map(|(&t, &g)| shrink(t + g / c, threshold))
            .collect();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite iterate at step {j}"
            )));
        }
        if accelerated {
            let beta_next = 0.5 * (1.0 + (1.0 + 4.0 * beta * beta).sqrt());
            let w = (beta - 1.0) / beta_next;
            for ((m, &t), &p) in momentum_point.iter_mut().zip(&theta).zip(&prev) {
                *m = t + w * (t - p);
            }
            beta = beta_next;
        } else {
            momentum_point.clone_from(&theta);
        }
        history.push(objective_j1(&theta, phi, yref, cfg.kappa)?);

        let step = norm2(&numerics::sub(&theta, &prev));
        if step <= cfg.rel_tol * norm2(&theta).max(1.0)
            && kkt_residual(phi, yref, &theta, cfg.kappa, c) <= cfg.kkt_tol
        {
            converged = true;
            break;
        }
        std::mem::swap(&mut prev, &mut theta);
        theta.clone_from(&prev);
    }
    let kkt = kkt_residual(phi, yref, &theta, cfg.kappa, c);
    let trace = SolveTrace {
        iterations,
        objective_history: history,
        kkt_residual: kkt,
        converged,
        step_constant: c,
    };
    Ok((CommandVector::theta(theta, kind), trace))
}

/// `η* = S_ν(y_ref)`, the exact minimizer of `ν‖η‖₁ + ½‖η − y_ref‖²`.
pub fn solve_eta(yref: &[f64], nu: f64) -> Result<CommandVector> {
    numerics::ensure_finite(yref, "y_ref")?;
    Ok(CommandVector {
        coefficients: soft_threshold(yref, nu)?,
        convention: Convention::Eta,
        solver: SolverKind::ClosedForm,
    })
}

/// Receiver-side conversion `θ = G⁻¹η`. The result is generally not sparse.
pub fn eta_to_theta(eta: &CommandVector, gram: &GramSet) -> Result<CommandVector> {
    if eta.convention != Convention::Eta {
        return Err(Error::Convention(
            "eta_to_theta expects an η-convention vector".into(),
        ));
    }
    require_spline_identical(gram, "η → θ conversion")?;
    check_len("eta", eta.len(), gram.g().rows())?;
    let theta = solve_spd(gram.g(), &eta.coefficients)?;
    Ok(CommandVector {
        coefficients: theta,
        convention: Convention::Theta,
        solver: eta.solver,
    })
}

/// Sup-norm distance, used by diagnostics.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    norm_inf(&numerics::sub(a, b))
}
