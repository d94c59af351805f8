//! Shared test helpers: random reconstruction instances and an
//! independent dense solve of the regularized normal equations.

#![allow(dead_code)]

use backscatter_rti::geometry::{build_grid, Grid, Link, Point3};
use backscatter_rti::solver::{covariance_matrix, RtiParams};
use backscatter_rti::weight::{build_weight_matrix, WeightMatrix, WeightParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Solves `a · X = b` column by column with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            for j in 0..b[i].len() {
                b[i][j] -= f * b[k][j];
            }
        }
    }
    let m = b[0].len();
    let mut x = vec![vec![0.0; m]; n];
    for c in 0..m {
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j][c]).sum();
            x[i][c] = (b[i][c] - s) / a[i][i];
        }
    }
    x
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub struct Instance {
    pub grid: Grid,
    pub w: WeightMatrix,
    pub y: Vec<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let (n_u, n_v) = loop {
        let (a, b) = (rng.random_range(1..=12), rng.random_range(1..=12));
        if (4..=100).contains(&(a * b)) {
            break (a, b);
        }
    };
    let cell = rng.random_range(0.05..0.5);
    let grid = build_grid(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), n_u, n_v, cell).unwrap();
    let (wu, wv) = (n_u as f64 * cell, n_v as f64 * cell);
    let q = rng.random_range(2..=20);
    let pt = |rng: &mut ChaCha8Rng| {
        Point3::new(
            rng.random_range(-0.2 * wu..1.2 * wu),
            rng.random_range(-0.2 * wv..1.2 * wv),
            rng.random_range(-0.3..0.3),
        )
    };
    let links: Vec<Link> = (0..q).map(|i| Link::new(i, pt(rng), pt(rng)).unwrap()).collect();
    let w = build_weight_matrix(&grid, &links, &WeightParams::new(0.1).unwrap()).unwrap();
    let y = (0..q).map(|_| rng.random_range(-5.0..5.0)).collect();
    Instance { grid, w, y }
}

/// `(WᵀW + η·C⁻¹)⁻¹ Wᵀ y`, assembled entry by entry.
pub fn oracle(inst: &Instance, p: &RtiParams) -> Vec<f64> {
    let c = covariance_matrix(&inst.grid, p).unwrap();
    let n = c.n();
    let cm: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| c.values()[(i, j)]).collect()).collect();
    let c_inv = gauss_solve(cm, identity(n));
    let q = inst.w.q();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let wtw: f64 = (0..q).map(|k| inst.w.get(k, i) * inst.w.get(k, j)).sum();
            a[i][j] = wtw + p.eta * 0.5 * (c_inv[i][j] + c_inv[j][i]);
        }
    }
    let b: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![(0..q).map(|k| inst.w.get(k, i) * inst.y[k]).sum()])
        .collect();
    gauss_solve(a, b).into_iter().map(|r| r[0]).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
