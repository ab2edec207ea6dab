//! Reference implementations shared by the integration tests. Plain
//! `Vec<Vec<f64>>` arithmetic, no code shared with the library.
#![allow(dead_code)]

use celm::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn from_dense(d: &Dense) -> Matrix {
    Matrix::from_rows(d).unwrap()
}

pub fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    from_dense(&random_dense(
        rows,
        cols,
        &mut ChaCha8Rng::seed_from_u64(seed),
    ))
}

pub fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| a.iter().map(|row| row[j]).collect())
        .collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn max_abs(a: &Dense) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &Dense) -> Dense {
    gauss_jordan_inverse_checked(a).expect("singular matrix")
}

/// `None` when a pivot vanishes.
pub fn gauss_jordan_inverse_checked(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let mut aug: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| aug[i][c].abs().total_cmp(&aug[j][c].abs()))
            .unwrap();
        aug.swap(c, p);
        let pivot = aug[c][c];
        if pivot.abs() <= 1e-300 {
            return None;
        }
        for v in &mut aug[c] {
            *v /= pivot;
        }
        let pivot_row = aug[c].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            let f = row[c];
            if r != c && f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Thin SVD of a tall or square matrix by one-sided Jacobi rotations.
/// Returns (U, sigma, V) with A = U diag(sigma) Vᵀ.
fn jacobi_svd(a: &Dense) -> (Dense, Vec<f64>, Dense) {
    let m = a.len();
    let n = a[0].len();
    let mut u = a.clone();
    let mut v: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in &u {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut().chain(v.iter_mut()) {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| u[i][j] * u[i][j]).sum::<f64>().sqrt())
        .collect();
    for row in &mut u {
        for j in 0..n {
            if sigma[j] > 0.0 {
                row[j] /= sigma[j];
            }
        }
    }
    (u, sigma, v)
}

/// Moore-Penrose pseudoinverse with cutoff `1e-12 * max(m, n) * sigma_max`.
pub fn pinv(a: &Dense) -> Dense {
    let m = a.len();
    let n = a[0].len();
    if m < n {
        return transpose(&pinv(&transpose(a)));
    }
    let (u, sigma, v) = jacobi_svd(a);
    let cutoff = 1e-12 * m.max(n) as f64 * sigma.iter().cloned().fold(0.0, f64::max);
    // pinv = V diag(1/sigma) Uᵀ
    (0..n)
        .map(|i| {
            (0..m)
                .map(|k| {
                    (0..n)
                        .filter(|&j| sigma[j] > cutoff)
                        .map(|j| v[i][j] * u[k][j] / sigma[j])
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub fn least_squares(h: &Dense, t: &Dense) -> Dense {
    mul(&pinv(h), t)
}

/// Ridge solution `(I/lambda + HᵀH)⁻¹ HᵀT`.
pub fn ridge(h: &Dense, t: &Dense, lambda: f64) -> Dense {
    let ht = transpose(h);
    let mut g = mul(&ht, h);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += 1.0 / lambda;
    }
    mul(&gauss_jordan_inverse(&g), &mul(&ht, t))
}
