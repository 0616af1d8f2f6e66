use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::measures::{Atom, DiscreteMeasure};

/// Spectral split of `N - M` and the lattice operations built from it.
/// All matrices are `d x d`, row-major.
#[derive(Debug, Clone, Serialize)]
pub struct CovSplit {
    pub dim: usize,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    /// Eigenvalues of `N - M`, descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Projection on eigenvectors with `lambda >= 0`.
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    /// `M + (N - M)_+`
    pub join: Vec<f64>,
    /// `M - (M - N)_+`
    pub meet: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CovPredicates {
    /// Smallest eigenvalue of `join - M` and `join - N`.
    pub join_margin: f64,
    /// Smallest eigenvalue of `M - meet` and `N - meet`.
    pub meet_margin: f64,
    /// Largest entry of `join + meet - M - N`.
    pub lattice_residual: f64,
    /// Smallest eigenvalue of the coupling covariance `[[M, meet], [meet, N]]`.
    pub coupling_margin: f64,
    /// Smallest eigenvalue of the `(x, z)` covariance `[[M, M], [M, join]]`,
    /// i.e. of the kernel `z = x + N(0, (N - M)_+)`.
    pub pi13_margin: f64,
    pub tol: f64,
}

impl CovPredicates {
    pub fn pass(&self) -> bool {
        self.join_margin >= -self.tol
            && self.meet_margin >= -self.tol
            && self.lattice_residual <= self.tol
            && self.coupling_margin >= -self.tol
            && self.pi13_margin >= -self.tol
    }
}

fn outer_sum(vals: &[f64], vecs: &[Vec<f64>], d: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for (l, v) in vals.iter().zip(vecs) {
        let w = f(*l);
        for a in 0..d {
            for b in 0..d {
                out[a * d + b] += w * v[a] * v[b];
            }
        }
    }
    out
}

fn min_eig(a: &[f64], d: usize) -> f64 {
    let (vals, _) = sym_eigen(a, d);
    vals.last().copied().unwrap_or(0.0)
}

fn symmetrized(a: &[f64], d: usize) -> Result<Vec<f64>> {
    if a.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: a.len() });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("matrix contains a non-finite entry".into()));
    }
    Ok((0..d * d).map(|k| 0.5 * (a[k] + a[(k % d) * d + k / d])).collect())
}

impl CovSplit {
    pub fn new(m: &[f64], n: &[f64], d: usize) -> Result<Self> {
        let m = symmetrized(m, d)?;
        let n = symmetrized(n, d)?;
        let scale = m.iter().chain(&n).fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for a in [&m, &n] {
            let e = min_eig(a, d);
            if e < -1e-10 * scale {
                return Err(Error::NotPsd(e));
            }
        }
        let diff: Vec<f64> = n.iter().zip(&m).map(|(a, b)| a - b).collect();
        let (eigenvalues, eigenvectors) = sym_eigen(&diff, d);
        // sgn(0) = +1
        let p_plus = outer_sum(&eigenvalues, &eigenvectors, d, |l| if l >= 0.0 { 1.0 } else { 0.0 });
        let p_minus = outer_sum(&eigenvalues, &eigenvectors, d, |l| if l >= 0.0 { 0.0 } else { 1.0 });
        let pos = outer_sum(&eigenvalues, &eigenvectors, d, |l| l.max(0.0));
        let neg = outer_sum(&eigenvalues, &eigenvectors, d, |l| (-l).max(0.0));
        let join = m.iter().zip(&pos).map(|(a, b)| a + b).collect();
        let meet = m.iter().zip(&neg).map(|(a, b)| a - b).collect();
        Ok(Self { dim: d, m, n, eigenvalues, eigenvectors, p_plus, p_minus, join, meet })
    }

    /// `rho^0(N - M) = sum |lambda_i|`
    pub fn nuclear_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).sum()
    }

    /// Covariance of `(x, y)` under the optimal plan, `2d x 2d`.
    pub fn coupling_covariance(&self) -> Vec<f64> {
        block(&self.m, &self.meet, &self.n, self.dim)
    }

    /// Covariance of `(x, z)`.
    pub fn pi13_covariance(&self) -> Vec<f64> {
        block(&self.m, &self.m, &self.join, self.dim)
    }

    pub fn predicates(&self, tol: f64) -> CovPredicates {
        let d = self.dim;
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        let join_margin = min_eig(&sub(&self.join, &self.m), d).min(min_eig(&sub(&self.join, &self.n), d));
        let meet_margin = min_eig(&sub(&self.m, &self.meet), d).min(min_eig(&sub(&self.n, &self.meet), d));
        let lattice_residual = (0..d * d)
            .map(|k| (self.join[k] + self.meet[k] - self.m[k] - self.n[k]).abs())
            .fold(0.0, f64::max);
        CovPredicates {
            join_margin,
            meet_margin,
            lattice_residual,
            coupling_margin: min_eig(&self.coupling_covariance(), 2 * d),
            pi13_margin: min_eig(&self.pi13_covariance(), 2 * d),
            tol,
        }
    }
}

fn block(a: &[f64], b: &[f64], c: &[f64], d: usize) -> Vec<f64> {
    let w = 2 * d;
    let mut g = vec![0.0; w * w];
    for r in 0..d {
        for s in 0..d {
            g[r * w + s] = a[r * d + s];
            g[r * w + d + s] = b[r * d + s];
            g[(d + r) * w + s] = b[s * d + r];
            g[(d + r) * w + d + s] = c[r * d + s];
        }
    }
    g
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianSolution {
    pub value: f64,
    pub split: CovSplit,
    pub plan_covariance: Vec<f64>,
    /// Covariance of the optimal third marginal, `M v N`.
    pub rho_covariance: Vec<f64>,
}

/// `N(0, M)` to `N(0, N)`: value `sum |lambda_i(N - M)| / 2`.
pub fn gaussian_oracle(m: &[f64], n: &[f64], d: usize) -> Result<GaussianSolution> {
    let split = CovSplit::new(m, n, d)?;
    Ok(GaussianSolution {
        value: 0.5 * split.nuclear_norm(),
        plan_covariance: split.coupling_covariance(),
        rho_covariance: split.join.clone(),
        split,
    })
}

/// Tensor-grid quantization of `N(0, cov)` with `k` atoms per principal axis.
///
/// Every axis is cut into `k` cells of equal probability and each cell is
/// replaced by its conditional mean, so the weights are `k^-d`, the mean is
/// exactly zero and the variance along an axis is slightly below `lambda`.
/// Axes with zero variance get a single atom.
pub fn quantize_gaussian(cov: &[f64], d: usize, k: usize) -> Result<DiscreteMeasure> {
    if k == 0 {
        return Err(Error::Invalid("at least one atom per axis is needed".into()));
    }
    let cov = symmetrized(cov, d)?;
    let (vals, vecs) = sym_eigen(&cov, d);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if let Some(&l) = vals.last() {
        if l < -1e-10 * scale {
            return Err(Error::NotPsd(l));
        }
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let cell_means: Vec<f64> = (0..k)
        .map(|c| {
            let lo = if c == 0 { f64::NEG_INFINITY } else { std.inverse_cdf(c as f64 / k as f64) };
            let hi = if c + 1 == k { f64::INFINITY } else { std.inverse_cdf((c + 1) as f64 / k as f64) };
            let pdf = |t: f64| if t.is_finite() { std.pdf(t) } else { 0.0 };
            k as f64 * (pdf(lo) - pdf(hi))
        })
        .collect();
    let axes: Vec<Vec<f64>> = vals
        .iter()
        .map(|&l| if l > 1e-14 * scale { cell_means.iter().map(|c| l.sqrt() * c).collect() } else { vec![0.0] })
        .collect();
    let mut atoms = vec![Atom { x: vec![0.0; d], w: 1.0 }];
    for (coords, v) in axes.iter().zip(&vecs) {
        let w = 1.0 / coords.len() as f64;
        atoms = atoms
            .iter()
            .flat_map(|a| {
                coords.iter().map(move |t| Atom { x: a.x.iter().zip(v).map(|(x, e)| x + t * e).collect(), w: a.w * w })
            })
            .collect();
    }
    DiscreteMeasure::new(d, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{barycentre, variance};

    #[test]
    fn equal_covariances() {
        let m = [2.0, 0.5, 0.5, 1.0];
        let s = gaussian_oracle(&m, &m, 2).unwrap();
        assert!(s.value.abs() < 1e-14);
        for k in 0..4 {
            assert!((s.split.join[k] - m[k]).abs() < 1e-14);
            assert!((s.split.meet[k] - m[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn swapped_axes() {
        let s = gaussian_oracle(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert!((s.value - 1.0).abs() < 1e-14);
        assert_eq!(s.split.join, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(s.split.meet.iter().all(|v| v.abs() < 1e-15));
        assert!(s.split.predicates(1e-10).pass());
    }

    #[test]
    fn ordered_gaussians_match_trace() {
        let s = gaussian_oracle(&[1.0, 0.0, 0.0, 1.0], &[2.0, 0.0, 0.0, 2.0], 2).unwrap();
        assert!((s.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(matches!(gaussian_oracle(&[1.0, 0.0, 0.0, -1.0], &[1.0, 0.0, 0.0, 1.0], 2), Err(Error::NotPsd(_))));
    }

    #[test]
    fn quantizer_moments() {
        let cov = [1.0, 0.3, 0.3, 0.5];
        let q = quantize_gaussian(&cov, 2, 9).unwrap();
        assert_eq!(q.len(), 81);
        assert!(barycentre(&q).unwrap().iter().all(|b| b.abs() < 1e-14));
        let v = variance(&q).unwrap();
        assert!(v < 1.5 && v > 0.9 * 1.5, "{v}");
        let degenerate = quantize_gaussian(&[1.0, 0.0, 0.0, 0.0], 2, 5).unwrap();
        assert_eq!(degenerate.len(), 5);
    }
}
