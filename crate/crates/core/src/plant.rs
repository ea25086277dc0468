//! SISO LTI plant `ẋ = Ax + bu`, `y = cᵀx`, `x(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::numerics::{self, eigenvalues, mat_exp, singular_values, Matrix};
use crate::{Error, Result};

/// State-space triple of a single-input single-output plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlant", into = "RawPlant")]
pub struct PlantModel {
    a: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPlant {
    a: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl TryFrom<RawPlant> for PlantModel {
    type Error = Error;
    fn try_from(raw: RawPlant) -> Result<Self> {
        Self::new(raw.a, raw.b, raw.c)
    }
}

impl From<PlantModel> for RawPlant {
    fn from(p: PlantModel) -> Self {
        RawPlant {
            a: p.a,
            b: p.b,
            c: p.c,
        }
    }
}

impl PlantModel {
    /// Checks shapes and finiteness only; see [`validate_plant`] for the
    /// stability, reachability and observability assumptions.
    pub fn new(a: Matrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, must be square",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        if n == 0 {
            return Err(Error::Dimension("plant has zero states".into()));
        }
        if b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n} but b has {} and c has {} entries",
                b.len(),
                c.len()
            )));
        }
        numerics::ensure_finite(a.as_slice(), "A")?;
        numerics::ensure_finite(&b, "b")?;
        numerics::ensure_finite(&c, "c")?;
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// `[b, Ab, …, A^{n-1}b]`
    pub fn controllability_matrix(&self) -> Matrix {
        krylov(&self.a, &self.b)
    }

    /// `[c, Aᵀc, …, (Aᵀ)^{n-1}c]`, the transpose of the usual observability matrix.
    pub fn observability_matrix(&self) -> Matrix {
        krylov(&self.a.transpose(), &self.c)
    }
}

fn krylov(a: &Matrix, v: &[f64]) -> Matrix {
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    let mut col = v.to_vec();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = col[i];
        }
        col = a.matvec(&col);
    }
    out
}

fn numerical_rank(m: &Matrix) -> usize {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let thresh = m.rows().max(m.cols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > thresh).count()
}

/// Outcome of the standing-assumption checks on a plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub order: usize,
    /// Largest real part over the eigenvalues of `A`.
    pub max_real_part: f64,
    pub stable: bool,
    pub controllability_rank: usize,
    pub reachable: bool,
    pub observability_rank: usize,
    pub observable: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.stable && self.reachable && self.observable
    }

    /// Turns a failed check into [`Error::Plant`].
    pub fn ensure(&self) -> Result<()> {
        let mut failures = Vec::new();
        if !self.stable {
            failures.push(format!("unstable (max Re λ(A) = {:e})", self.max_real_part));
        }
        if !self.reachable {
            failures.push(format!(
                "not reachable (controllability rank {} < {})",
                self.controllability_rank, self.order
            ));
        }
        if !self.observable {
            failures.push(format!(
                "not observable (observability rank {} < {})",
                self.observability_rank, self.order
            ));
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::Plant(failures.join("; ")))
        }
    }
}

/// Stability (strict, no tolerance), reachability and observability.
pub fn validate_plant(p: &PlantModel) -> Result<ValidationReport> {
    let n = p.order();
    let max_real_part = eigenvalues(&p.a)?
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let controllability_rank = numerical_rank(&p.controllability_matrix());
    let observability_rank = numerical_rank(&p.observability_matrix());
    Ok(ValidationReport {
        order: n,
        max_real_part,
        stable: max_real_part < 0.0,
        controllability_rank,
        reachable: controllability_rank == n,
        observability_rank,
        observable: observability_rank == n,
    })
}

/// `P(t) = cᵀ e^{At} b` for `t ≥ 0`.
pub fn impulse_response(p: &PlantModel, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "impulse response needs finite t >= 0, got {t}"
        )));
    }
    Ok(numerics::dot(&p.c, &mat_exp(&p.a, t)?.matvec(&p.b)))
}
