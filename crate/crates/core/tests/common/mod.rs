//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerical routines.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tsfuzz::{ClusterPrototype, Dataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Weighted least squares through the normal equations
/// `(Phi^T W Phi) theta = Phi^T W y`.
pub fn normal_equations_wls(phi: &DMatrix<f64>, w: &[f64], y: &[f64]) -> Vec<f64> {
    let (n, p) = phi.shape();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for k in 0..n {
        for i in 0..p {
            b[i] += w[k] * phi[(k, i)] * y[k];
            for j in 0..p {
                a[i][j] += w[k] * phi[(k, i)] * phi[(k, j)];
            }
        }
    }
    solve(&a, &b)
}

/// Determinant by elimination with partial pivoting.
pub fn det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(col, pivot);
            d = -d;
        }
        d *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    d
}

/// `det(F_B) / det(F_W)` over the antecedent dimensions `dims`, from
/// diagonal cluster covariances, computed with plain loops.
pub fn separability(prototypes: &[ClusterPrototype], dims: &[usize]) -> f64 {
    let n = dims.len();
    let grand: Vec<f64> = dims
        .iter()
        .map(|&d| prototypes.iter().map(|p| p.prior * p.center[d]).sum())
        .collect();
    let mut fb = vec![vec![0.0; n]; n];
    let mut fw = vec![vec![0.0; n]; n];
    for p in prototypes {
        for (a, &da) in dims.iter().enumerate() {
            fw[a][a] += p.prior * p.variances[da];
            for (b, &db) in dims.iter().enumerate() {
                fb[a][b] += p.prior * (p.center[da] - grand[a]) * (p.center[db] - grand[b]);
            }
        }
    }
    det(&fb) / det(&fw)
}

/// Antecedent position whose removal leaves the largest separability,
/// found by trying every candidate.
pub fn exhaustive_first_removal(prototypes: &[ClusterPrototype]) -> (usize, Vec<f64>) {
    let n = prototypes[0].center.len();
    let scores: Vec<f64> = (0..n)
        .map(|drop| {
            let dims: Vec<usize> = (0..n).filter(|&d| d != drop).collect();
            separability(prototypes, &dims)
        })
        .collect();
    let best = (0..n)
        .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
        .unwrap();
    (best, scores)
}

/// Three well-separated groups in the first two descriptors plus a third
/// descriptor of pure noise, with a different plane in each group.
pub fn three_groups_with_noise_column(seed: u64, per_group: usize) -> Dataset {
    let mut r = rng(seed);
    let centers = [(-3.0, -2.0), (3.0, -1.5), (0.0, 3.0)];
    let planes = [(1.0, 0.5, 0.0), (-1.0, 1.0, 2.0), (0.5, -1.5, -1.0)];
    let n = 3 * per_group;
    let mut x = DMatrix::zeros(n, 3);
    let mut y = DVector::zeros(n);
    for g in 0..3 {
        for s in 0..per_group {
            let row = g * per_group + s;
            let a: f64 = centers[g].0 + 0.5 * r.sample::<f64, _>(StandardNormal);
            let b: f64 = centers[g].1 + 0.5 * r.sample::<f64, _>(StandardNormal);
            let noise: f64 = r.sample(StandardNormal);
            x[(row, 0)] = a;
            x[(row, 1)] = b;
            x[(row, 2)] = noise;
            y[row] = planes[g].0 * a + planes[g].1 * b + planes[g].2;
        }
    }
    Dataset::new(x, y, vec!["a".into(), "b".into(), "noise".into()]).unwrap()
}

/// Six uniform descriptors; the activity depends on columns 1 and 4 only.
pub fn two_of_six(seed: u64, samples: usize) -> Dataset {
    let mut r = rng(seed);
    let x = DMatrix::from_fn(samples, 6, |_, _| r.random_range(-1.0..1.0));
    let y = DVector::from_fn(samples, |k, _| {
        1.5 * x[(k, 1)] - 2.0 * x[(k, 4)] + 0.01 * r.sample::<f64, _>(StandardNormal)
    });
    let names = (0..6).map(|j| format!("d{j}")).collect();
    Dataset::new(x, y, names).unwrap()
}

/// Exact affine relation `y = 0.5 + 2 x0 - x1 + 0.25 x2` on random inputs.
pub fn exact_linear(seed: u64, samples: usize) -> Dataset {
    let mut r = rng(seed);
    let x = DMatrix::from_fn(samples, 3, |_, _| r.random_range(-2.0..2.0));
    let y = DVector::from_fn(samples, |k, _| 0.5 + 2.0 * x[(k, 0)] - x[(k, 1)] + 0.25 * x[(k, 2)]);
    Dataset::new(x, y, vec!["x0".into(), "x1".into(), "x2".into()]).unwrap()
}

/// Three clusters that differ in the first two antecedent dimensions and
/// share the center coordinate of the third, with random variances.
pub fn prototypes_with_noise_dimension(seed: u64) -> Vec<ClusterPrototype> {
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..3).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let shared: f64 = r.random_range(-1.0..1.0);
    raw.iter()
        .map(|p| ClusterPrototype {
            center: vec![r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), shared],
            variances: (0..3).map(|_| r.random_range(0.1..2.0)).collect(),
            theta: vec![0.0; 4],
            model_error_variance: 1.0,
            prior: p / total,
            rule_weight: 1.0,
        })
        .collect()
}
