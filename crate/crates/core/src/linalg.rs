//! Small dense linear algebra on row-major `Vec<f64>` storage.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// In-place Cholesky factor of a symmetric positive (semi)definite matrix.
///
/// Pivots below `floor` times the largest diagonal entry are replaced by a
/// huge value, which zeroes the corresponding solution component. This is
/// the usual safeguard for normal equations that lose rank near optimality.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    pub replaced_pivots: usize,
}

impl Cholesky {
    pub fn factor(mut a: Vec<f64>, n: usize, floor: f64) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
        let tiny = floor * max_diag;
        let mut replaced = 0;
        let mut row_j = vec![0.0; n];
        for j in 0..n {
            row_j[..j].copy_from_slice(&a[j * n..j * n + j]);
            let d = a[j * n + j] - dot(&row_j[..j], &row_j[..j]);
            if !d.is_finite() {
                return Err(Error::NumericalBreakdown("non-finite pivot in Cholesky".into()));
            }
            let d = if d <= tiny {
                replaced += 1;
                1e128
            } else {
                d
            };
            let djj = d.sqrt();
            a[j * n + j] = djj;
            let inv = 1.0 / djj;
            for i in j + 1..n {
                let ri = &mut a[i * n..i * n + j + 1];
                ri[j] = (ri[j] - dot(&ri[..j], &row_j[..j])) * inv;
            }
        }
        Ok(Self { n, l: a, replaced_pivots: replaced })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + n];
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// rows, each with its largest-magnitude component made positive.
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let total: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let vecs = order
        .iter()
        .map(|&i| {
            let mut col: Vec<f64> = (0..n).map(|k| v[k * n + i]).collect();
            let lead = col.iter().copied().fold(0.0f64, |best, c| if c.abs() > best.abs() { c } else { best });
            if lead < 0.0 {
                col.iter_mut().for_each(|c| *c = -*c);
            }
            col
        })
        .collect();
    (vals, vecs)
}

/// Row-major product of two square matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre01(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for i in 0..k {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 0 { 1.0 } else if k == 1 { x } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = k as f64 * (x * pk - pkm1) / (x * x - 1.0);
            let dx = pk / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Minimum-norm solution of the consistent part of `J s = b`.
///
/// `jt` holds `J^T` column-major by row of `J`: `jt[r]` is row `r` of `J`,
/// of length `nvars`. Householder QR with column pivoting on `J^T` finds the
/// rank; rows whose remaining norm falls below `rel_tol` times the largest
/// are treated as dependent and their equations are skipped. Returns the
/// solution and the numerical rank.
pub fn min_norm_solve(mut jt: Vec<Vec<f64>>, b: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    let rows = jt.len();
    assert_eq!(b.len(), rows);
    let nvars = jt.first().map_or(0, Vec::len);
    let mut perm: Vec<usize> = (0..rows).collect();
    let mut norms: Vec<f64> = jt.iter().map(|c| dot(c, c)).collect();
    let top = norms.iter().cloned().fold(0.0f64, f64::max).sqrt();
    let mut reflectors: Vec<Vec<f64>> = Vec::new();
    let mut rank = 0;
    for k in 0..rows.min(nvars) {
        let (p, &best) = norms[k..].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, v)| (i + k, v)).unwrap();
        if best.sqrt() <= rel_tol * top || best == 0.0 {
            break;
        }
        jt.swap(k, p);
        norms.swap(k, p);
        perm.swap(k, p);
        let col = &jt[k];
        let alpha = norm(&col[k..]);
        let alpha = if col[k] > 0.0 { -alpha } else { alpha };
        let mut v = vec![0.0; nvars];
        v[k..].copy_from_slice(&col[k..]);
        v[k] -= alpha;
        let vv = dot(&v[k..], &v[k..]);
        if vv > 0.0 {
            for c in jt[k..].iter_mut() {
                let t = 2.0 * dot(&v[k..], &c[k..]) / vv;
                for (ci, vi) in c[k..].iter_mut().zip(&v[k..]) {
                    *ci -= t * vi;
                }
            }
        }
        for (c, nrm) in jt[k + 1..].iter().zip(norms[k + 1..].iter_mut()) {
            *nrm = dot(&c[k + 1..], &c[k + 1..]);
        }
        reflectors.push(v);
        rank += 1;
    }
    // R^T y = P^T b on the leading rank rows, with R[i][k] = jt[k][i]
    let mut y = vec![0.0; nvars];
    for k in 0..rank {
        let s = b[perm[k]] - (0..k).map(|i| jt[k][i] * y[i]).sum::<f64>();
        y[k] = s / jt[k][k];
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        let vv = dot(&v[k..], &v[k..]);
        if vv > 0.0 {
            let t = 2.0 * dot(&v[k..], &y[k..]) / vv;
            for (yi, vi) in y[k..].iter_mut().zip(&v[k..]) {
                *yi -= t * vi;
            }
        }
    }
    (y, rank)
}
