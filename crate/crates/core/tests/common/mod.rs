#![allow(dead_code)]

use rand::Rng;
use sparsecmd_core::plant::validate_plant;
use sparsecmd_core::{Matrix, PlantModel, ReferenceData, SplineBasis};
use std::f64::consts::PI;

pub const REF_THETA2: [f64; 12] = [
    9.7994, 2.7995, 1.6544, 1.6695, 1.0358, 0.0059, -1.0231, -1.7456, -2.0234, -2.2424, -2.4153,
    5.1813,
];
pub const REF_THETA_SPARSE: [f64; 12] = [
    9.6727, 4.5626, 0.0, 2.9973, 0.0, 0.0, 0.0, -2.8678, -0.6316, -4.8575, 0.0, 4.4185,
];
pub const REF_ETA: [f64; 12] = [
    0.45, 0.816, 0.95, 0.816, 0.45, 0.0, -0.45, -0.816, -0.95, -0.816, -0.45, 0.0,
];

pub fn example_plant() -> PlantModel {
    PlantModel::new(
        Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, -2.0]]).unwrap(),
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    )
    .unwrap()
}

pub fn example_basis() -> SplineBasis {
    SplineBasis::new(example_plant(), ReferenceData::sine(12, PI / 6.0).unwrap()).unwrap()
}

/// Stable by construction: `A = M − (‖M‖₁ + margin)I` keeps every eigenvalue
/// at real part ≤ −margin. Redraws until reachable and observable.
pub fn random_plant(rng: &mut impl Rng, n: usize) -> PlantModel {
    loop {
        let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let shift = m.norm_1() + rng.gen_range(0.1..1.0);
        let a = m.shift_diag(-shift);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = PlantModel::new(a, b, c).unwrap();
        if validate_plant(&p).unwrap().passed() {
            return p;
        }
    }
}

pub fn random_reference(rng: &mut impl Rng, count: usize) -> ReferenceData {
    let mut t = 0.0;
    let mut instants = Vec::with_capacity(count);
    for _ in 0..count {
        t += rng.gen_range(0.2..1.0);
        instants.push(t);
    }
    let values = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ReferenceData::new(instants, values).unwrap()
}

pub fn random_basis(rng: &mut impl Rng, max_order: usize, max_count: usize) -> SplineBasis {
    let n = rng.gen_range(1..=max_order);
    let count = rng.gen_range(1..=max_count);
    SplineBasis::new(random_plant(rng, n), random_reference(rng, count)).unwrap()
}

/// `Φ = U diag(σ) Vᵀ` with random orthogonal factors and `σ ∈ [lo, hi]`.
pub fn random_well_conditioned(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Matrix {
    let u = random_orthogonal(rng, rows);
    let v = random_orthogonal(rng, cols);
    let k = rows.min(cols);
    let s: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
    Matrix::from_fn(rows, cols, |i, j| {
        (0..k).map(|l| u[(i, l)] * s[l] * v[(j, l)]).sum()
    })
}

/// Gram–Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for q in &cols {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Minimizer of `½‖Φθ − y‖² + κ‖θ‖₁` given its support and signs, by solving
/// the reduced normal equations `Φ_SᵀΦ_S θ_S = Φ_Sᵀy − κ s`.
pub fn lasso_on_support(
    phi: &Matrix,
    y: &[f64],
    kappa: f64,
    support: &[usize],
    signs: &[f64],
) -> Vec<f64> {
    let k = support.len();
    let sub = Matrix::from_fn(phi.rows(), k, |i, j| phi[(i, support[j])]);
    let normal = sub.transpose().matmul(&sub);
    let rhs: Vec<f64> = sub
        .tr_matvec(y)
        .iter()
        .zip(signs)
        .map(|(g, s)| g - kappa * s)
        .collect();
    let reduced = sparsecmd_core::numerics::solve_spd(&normal, &rhs).unwrap();
    let mut theta = vec![0.0; phi.cols()];
    for (j, &col) in support.iter().enumerate() {
        theta[col] = reduced[j];
    }
    theta
}
