//! Control-theoretic splines and their Gram matrices.
//!
//! Each sampling instant `t_i` contributes the truncated, time-reversed
//! impulse response
//!
//! ```text
//! g_i(t) = cᵀ e^{A(t_i − t)} b   for t < t_i,
//!          0                     for t ≥ t_i.
//! ```
//!
//! The output of the plant at `t_i` driven by `u = Σ θ_j φ_j` is
//! `Σ_j ⟨g_i, φ_j⟩ θ_j`, so the Gram matrix `G = [⟨g_i, g_j⟩]` (and the cross
//! Gram `Φ = [⟨g_i, φ_j⟩]` for a general basis) map coefficients to sampled
//! outputs.

use std::cell::RefCell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::{self, cholesky, mat_exp, Matrix, Quadrature};
use crate::plant::{validate_plant, PlantModel};
use crate::{Error, Result};

/// Sampling instants `0 < t_1 < … < t_N` and target outputs `Y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReference", into = "RawReference")]
pub struct ReferenceData {
    instants: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawReference {
    instants: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawReference> for ReferenceData {
    type Error = Error;
    fn try_from(r: RawReference) -> Result<Self> {
        Self::new(r.instants, r.values)
    }
}

impl From<ReferenceData> for RawReference {
    fn from(r: ReferenceData) -> Self {
        RawReference {
            instants: r.instants,
            values: r.values,
        }
    }
}

impl ReferenceData {
    pub fn new(instants: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if instants.is_empty() {
            return Err(Error::Dimension(
                "reference needs at least one sampling instant".into(),
            ));
        }
        if instants.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} instants but {} values",
                instants.len(),
                values.len()
            )));
        }
        numerics::ensure_finite(&instants, "instants")?;
        numerics::ensure_finite(&values, "values")?;
        if instants[0] <= 0.0 {
            return Err(Error::Domain(format!(
                "first instant {} must be positive",
                instants[0]
            )));
        }
        if let Some(w) = instants.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "instants must be strictly increasing (t[{}] = {} >= t[{}] = {})",
                w,
                instants[w],
                w + 1,
                instants[w + 1]
            )));
        }
        Ok(Self { instants, values })
    }

    /// `t_i = i·spacing`, `Y_i = sin t_i` for `i = 1..=count`.
    pub fn sine(count: usize, spacing: f64) -> Result<Self> {
        let instants: Vec<f64> = (1..=count).map(|i| i as f64 * spacing).collect();
        let values = instants.iter().map(|t| t.sin()).collect();
        Self::new(instants, values)
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    /// The target vector `y_ref`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `T = t_N`.
    pub fn horizon(&self) -> f64 {
        *self.instants.last().expect("reference is never empty")
    }
}

/// A finite family of functions on `[0, T]` usable as a command basis.
pub trait CommandBasis {
    fn dim(&self) -> usize;

    /// Value of the `j`-th basis function (0-based) at `t`.
    fn eval(&self, j: usize, t: f64) -> Result<f64>;

    /// Points where basis functions may fail to be smooth; quadrature splits
    /// its domain there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// `Σ_j θ_j φ_j(t)`.
pub fn eval_command<B: CommandBasis + ?Sized>(basis: &B, theta: &[f64], t: f64) -> Result<f64> {
    if theta.len() != basis.dim() {
        return Err(Error::Dimension(format!(
            "coefficient vector has length {}, basis has {} functions",
            theta.len(),
            basis.dim()
        )));
    }
    let mut acc = 0.0;
    for (j, &th) in theta.iter().enumerate() {
        if th != 0.0 {
            acc += th * basis.eval(j, t)?;
        }
    }
    Ok(acc)
}

/// The splines `g_1, …, g_N` of a validated plant and a reference.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    plant: PlantModel,
    reference: ReferenceData,
}

impl SplineBasis {
    /// Fails with [`Error::Plant`] unless the plant is stable, reachable and
    /// observable.
    pub fn new(plant: PlantModel, reference: ReferenceData) -> Result<Self> {
        validate_plant(&plant)?.ensure()?;
        Ok(Self { plant, reference })
    }

    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    pub fn reference(&self) -> &ReferenceData {
        &self.reference
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::Index {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// `cᵀ e^{A(t_i − t)} b` without the truncation at `t_i`.
    pub fn kernel(&self, i: usize, t: f64) -> Result<f64> {
        self.check_index(i)?;
        let p = &self.plant;
        let e = mat_exp(p.a(), self.reference.instants()[i] - t)?;
        Ok(numerics::dot(p.c(), &e.matvec(p.b())))
    }

    /// `g_i(t)`; exactly zero for `t ≥ t_i`.
    pub fn eval_spline(&self, i: usize, t: f64) -> Result<f64> {
        self.check_index(i)?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("spline evaluated at t = {t} < 0")));
        }
        if t >= self.reference.instants()[i] {
            return Ok(0.0);
        }
        self.kernel(i, t)
    }

    /// Finite-horizon controllability Gramian `W(m) = ∫_0^m e^{As} bbᵀ e^{Aᵀs} ds`
    /// from one exponential of the block matrix `[[−A, bbᵀ], [0, Aᵀ]]`.
    pub fn reachability_gramian(&self, m: f64) -> Result<Matrix> {
        let p = &self.plant;
        let n = p.order();
        let b = p.b();
        let a = p.a();
        let block = Matrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => -a[(i, j)],
            (true, false) => b[i] * b[j - n],
            (false, true) => 0.0,
            (false, false) => a[(j - n, i - n)],
        });
        let e = mat_exp(&block, m)?;
        let upper_right = Matrix::from_fn(n, n, |i, j| e[(i, j + n)]);
        // lower-right block is e^{Aᵀm}; W = (e^{Aᵀm})ᵀ · upper_right
        let lower_right_t = Matrix::from_fn(n, n, |i, j| e[(j + n, i + n)]);
        let w = lower_right_t.matmul(&upper_right);
        // symmetrize away rounding
        Ok(Matrix::from_fn(n, n, |i, j| 0.5 * (w[(i, j)] + w[(j, i)])))
    }

    /// Closed-form Gram matrix `[G]_ij = ⟨g_i, g_j⟩`, with `Φ = G`.
    pub fn gram_matrix(&self) -> Result<GramSet> {
        let g = self.closed_form_gram()?;
        GramSet::spline_identical(g)
    }

    fn closed_form_gram(&self) -> Result<Matrix> {
        let n_inst = self.len();
        let t = self.reference.instants();
        let p = &self.plant;
        let at = p.a().transpose();
        // W(t_j)·c, one Gramian per instant
        let wc: Vec<Vec<f64>> = t
            .iter()
            .map(|&m| self.reachability_gramian(m).map(|w| w.matvec(p.c())))
            .collect::<Result<_>>()?;
        let mut g = Matrix::zeros(n_inst, n_inst);
        for i in 0..n_inst {
            for j in 0..=i {
                // min(t_i, t_j) = t_j for j ≤ i
                let lead = mat_exp(&at, t[i] - t[j])?.matvec(p.c());
                let v = numerics::dot(&lead, &wc[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Cross Gram `[Φ]_ij = ⟨g_i, φ_j⟩` by adaptive quadrature (absolute
    /// tolerance `1e-9` per entry). The returned set also carries the
    /// closed-form `G`.
    pub fn cross_gram<B: CommandBasis + ?Sized>(&self, phi: &B) -> Result<GramSet> {
        self.cross_gram_with(phi, Quadrature::with_tol(1e-9))
    }

    pub fn cross_gram_with<B: CommandBasis + ?Sized>(
        &self,
        phi: &B,
        quad: Quadrature,
    ) -> Result<GramSet> {
        let n_inst = self.len();
        let m = phi.dim();
        let t = self.reference.instants();
        let mut cuts = phi.breakpoints();
        cuts.extend_from_slice(t);
        cuts.retain(|c| c.is_finite());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut out = Matrix::zeros(n_inst, m);
        for i in 0..n_inst {
            // g_i vanishes on [t_i, T]
            let mut edges = vec![0.0];
            edges.extend(cuts.iter().copied().filter(|&c| c > 0.0 && c < t[i]));
            edges.push(t[i]);
            let pieces = (edges.len() - 1) as f64;
            let piece_quad = Quadrature {
                tol: quad.tol / pieces,
                ..quad
            };
            for j in 0..m {
                let failure = RefCell::new(None);
                let integrand = |s: f64| match (self.kernel(i, s), phi.eval(j, s)) {
                    (Ok(g), Ok(f)) => g * f,
                    (Err(e), _) | (_, Err(e)) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                };
                let mut acc = 0.0;
                for w in edges.windows(2) {
                    let piece = piece_quad.integrate(integrand, w[0], w[1]);
                    if let Some(e) = failure.take() {
                        return Err(e);
                    }
                    acc += piece?;
                }
                out[(i, j)] = acc;
            }
        }
        Ok(GramSet {
            g: self.closed_form_gram()?,
            phi: out,
            kind: BasisKind::Custom,
            min_pivot: None,
        })
    }
}

impl CommandBasis for SplineBasis {
    fn dim(&self) -> usize {
        self.len()
    }

    fn eval(&self, j: usize, t: f64) -> Result<f64> {
        self.eval_spline(j, t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.reference.instants().to_vec()
    }
}

type BasisFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied basis functions. Constructing one is the caller's
/// declaration that every function is square integrable on `[0, T]`.
pub struct FunctionBasis {
    funcs: Vec<BasisFn>,
    breakpoints: Vec<f64>,
}

impl FunctionBasis {
    pub fn new(funcs: Vec<BasisFn>) -> Self {
        Self {
            funcs,
            breakpoints: Vec::new(),
        }
    }

    /// Declares points where the functions jump or kink.
    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }
}

impl fmt::Debug for FunctionBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionBasis")
            .field("dim", &self.funcs.len())
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl CommandBasis for FunctionBasis {
    fn dim(&self) -> usize {
        self.funcs.len()
    }

    fn eval(&self, j: usize, t: f64) -> Result<f64> {
        let f = self.funcs.get(j).ok_or(Error::Index {
            index: j,
            len: self.funcs.len(),
        })?;
        Ok(f(t))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `φ_i = g_i`, hence `Φ = G`.
    SplineIdentical,
    Custom,
}

/// The Gram matrix `G` of the splines together with the cross Gram `Φ` of
/// the command basis.
#[derive(Debug, Clone)]
pub struct GramSet {
    g: Matrix,
    phi: Matrix,
    kind: BasisKind,
    min_pivot: Option<f64>,
}

impl GramSet {
    /// Wraps a spline Gram matrix, checking symmetry and positive definiteness.
    pub fn spline_identical(g: Matrix) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::Dimension(format!(
                "Gram matrix is {}x{}",
                g.rows(),
                g.cols()
            )));
        }
        if !g.is_symmetric(1e-12 * g.norm_max().max(1.0)) {
            return Err(Error::BasisDegeneracy(
                "Gram matrix is not symmetric".into(),
            ));
        }
        let chol = cholesky(&g).map_err(|e| match e {
            Error::Definiteness { pivot, value } => Error::BasisDegeneracy(format!(
                "Gram matrix lost positive definiteness at pivot {pivot} ({value:e})"
            )),
            other => other,
        })?;
        Ok(Self {
            phi: g.clone(),
            g,
            kind: BasisKind::SplineIdentical,
            min_pivot: Some(chol.min_pivot()),
        })
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn is_spline_identical(&self) -> bool {
        self.kind == BasisKind::SplineIdentical
    }

    /// Smallest Cholesky pivot of `G`, when it has been factored.
    pub fn min_pivot(&self) -> Option<f64> {
        self.min_pivot
    }
}
