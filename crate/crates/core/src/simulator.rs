//! Receiver side: rebuild `u(t) = g(t)ᵀθ` and integrate the plant from rest.

use serde::{Deserialize, Serialize};

use crate::basis::SplineBasis;
use crate::numerics::{self, Matrix};
use crate::solvers::{CommandVector, Convention};
use crate::{Error, Result};

/// Instants closer than this to a uniform node replace that node.
const SNAP: f64 = 1e-12;

/// Uniform nodes on `[0, T]` with every sampling instant included as a node.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationGrid {
    horizon: f64,
    steps: usize,
    nodes: Vec<f64>,
}

impl SimulationGrid {
    /// `steps` uniform intervals of `[0, horizon]`, refined so each instant is
    /// a node. Refuses a grid whose spacing exceeds the smallest gap between
    /// consecutive instants (counting the gap from 0 to the first one), or a
    /// horizon that stops short of the last instant.
    pub fn new(horizon: f64, steps: usize, instants: &[f64]) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Grid("need at least one step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Grid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let dt = horizon / steps as f64;
        let mut prev = 0.0;
        for &t in instants {
            if !(t > prev) {
                return Err(Error::Grid(format!(
                    "instants must increase from 0, got {t} after {prev}"
                )));
            }
            // relative slack so that e.g. 1.2 − 1.0 still counts as one 0.2 step
            if t - prev < dt * (1.0 - 1e-9) {
                return Err(Error::Grid(format!(
                    "grid spacing {dt:e} is coarser than the gap {:e} before instant {t}",
                    t - prev
                )));
            }
            prev = t;
        }
        if prev > horizon {
            return Err(Error::Grid(format!(
                "instant {prev} lies beyond the horizon {horizon}"
            )));
        }

        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| horizon * k as f64 / steps as f64)
            .collect();
        for &t in instants {
            let k = (t / dt).round() as usize;
            match nodes.get(k.min(steps)) {
                Some(&node) if (node - t).abs() < SNAP => nodes[k.min(steps)] = t,
                _ => nodes.push(t),
            }
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Ok(Self {
            horizon,
            steps,
            nodes,
        })
    }

    /// The default grid over the reference horizon.
    pub fn for_basis(basis: &SplineBasis, steps: usize) -> Result<Self> {
        let r = basis.reference();
        Self::new(r.horizon(), steps, r.instants())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// `(t_i, y(t_i) − Y_i)` for every sampling instant.
    pub error_at_instants: Vec<(f64, f64)>,
    /// `Σ (y(t_i) − Y_i)²`
    pub e2: f64,
}

impl SimulationResult {
    pub fn outputs_at_instants(&self) -> Vec<f64> {
        self.error_at_instants
            .iter()
            .map(|&(t, _)| {
                let k = self.times.partition_point(|&s| s < t);
                self.y[k]
            })
            .collect()
    }
}

/// Classical RK4 on every grid interval. On `[t_k, t_{k+1}]` the active
/// splines are those with `t_i > t_k`; they are evaluated through the
/// untruncated kernel, which is smooth there and gives the correct left limit
/// at `t_{k+1} = t_i`.
pub fn simulate(
    basis: &SplineBasis,
    theta: &CommandVector,
    grid: &SimulationGrid,
) -> Result<SimulationResult> {
    if theta.convention != Convention::Theta {
        return Err(Error::Convention(
            "simulate needs θ coefficients; convert η with eta_to_theta first".into(),
        ));
    }
    let coeffs = &theta.coefficients;
    if coeffs.len() != basis.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} splines",
            coeffs.len(),
            basis.len()
        )));
    }
    numerics::ensure_finite(coeffs, "theta")?;
    let reference = basis.reference();
    let instants = reference.instants();
    if instants
        .iter()
        .any(|t| grid.nodes.binary_search_by(|n| n.total_cmp(t)).is_err())
    {
        return Err(Error::Grid("grid was not built for this reference".into()));
    }

    let plant = basis.plant();
    let a: &Matrix = plant.a();
    let b = plant.b();
    let c = plant.c();
    let n = plant.order();

    let command = |s: f64, from: usize| -> Result<f64> {
        let mut u = 0.0;
        for (i, &th) in coeffs.iter().enumerate().skip(from) {
            if th != 0.0 {
                u += th * basis.kernel(i, s)?;
            }
        }
        Ok(u)
    };
    let rhs = |x: &[f64], u: f64| -> Vec<f64> {
        let mut d = a.matvec(x);
        for (di, bi) in d.iter_mut().zip(b) {
            *di += bi * u;
        }
        d
    };
    let axpy = |x: &[f64], h: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(xi, ki)| xi + h * ki).collect()
    };

    let nodes = &grid.nodes;
    let mut times = Vec::with_capacity(nodes.len());
    let mut u_out = Vec::with_capacity(nodes.len());
    let mut y_out = Vec::with_capacity(nodes.len());
    let mut x = vec![0.0; n];
    // index of the first spline still active at the current node
    let mut first = 0;
    for (k, &t) in nodes.iter().enumerate() {
        while first < instants.len() && instants[first] <= t {
            first += 1;
        }
        let u0 = command(t, first)?;
        times.push(t);
        u_out.push(u0);
        y_out.push(numerics::dot(c, &x));
        let Some(&t_next) = nodes.get(k + 1) else {
            break;
        };
        let h = t_next - t;
        let um = command(t + 0.5 * h, first)?;
        let u1 = command(t_next, first)?;
        let k1 = rhs(&x, u0);
        let k2 = rhs(&axpy(&x, 0.5 * h, &k1), um);
        let k3 = rhs(&axpy(&x, 0.5 * h, &k2), um);
        let k4 = rhs(&axpy(&x, h, &k3), u1);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "state blew up near t = {t_next}"
            )));
        }
    }

    let mut error_at_instants = Vec::with_capacity(instants.len());
    let mut e2 = 0.0;
    for (&ti, &yi) in instants.iter().zip(reference.values()) {
        let k = times.partition_point(|&s| s < ti);
        let err = y_out[k] - yi;
        e2 += err * err;
        error_at_instants.push((ti, err));
    }
    Ok(SimulationResult {
        times,
        u: u_out,
        y: y_out,
        error_at_instants,
        e2,
    })
}

/// Per-instant errors of several designs on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub labels: Vec<String>,
    pub instants: Vec<f64>,
    /// `errors[d][i]` is design `d`'s error at instant `i`.
    pub errors: Vec<Vec<f64>>,
    pub e2: Vec<f64>,
    pub bits_used: Option<Vec<usize>>,
}

pub fn error_report(
    results: &[&SimulationResult],
    labels: &[&str],
    bits_used: Option<&[usize]>,
) -> Result<ErrorReport> {
    if results.len() != labels.len() || bits_used.is_some_and(|b| b.len() != results.len()) {
        return Err(Error::Dimension(format!(
            "{} results, {} labels{}",
            results.len(),
            labels.len(),
            bits_used
                .map(|b| format!(", {} payload sizes", b.len()))
                .unwrap_or_default()
        )));
    }
    let instants: Vec<f64> = results
        .first()
        .map(|r| r.error_at_instants.iter().map(|e| e.0).collect())
        .unwrap_or_default();
    for r in results {
        if r.times != results[0].times || r.error_at_instants.len() != instants.len() {
            return Err(Error::Dimension(
                "results were simulated on different grids".into(),
            ));
        }
    }
    Ok(ErrorReport {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        instants,
        errors: results
            .iter()
            .map(|r| r.error_at_instants.iter().map(|e| e.1).collect())
            .collect(),
        e2: results.iter().map(|r| r.e2).collect(),
        bits_used: bits_used.map(<[usize]>::to_vec),
    })
}
