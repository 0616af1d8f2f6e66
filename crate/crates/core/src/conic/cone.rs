//! Second-order cone primitives: Jordan algebra, Nesterov-Todd scaling and
//! step-to-boundary. A cone element is `(x0, x1)` with `x0 >= |x1|`.

use crate::linalg::dot;

/// `x0 y0 - <x1, y1>`
pub fn jdot(x: &[f64], y: &[f64]) -> f64 {
    x[0] * y[0] - dot(&x[1..], &y[1..])
}

/// `x0^2 - |x1|^2` evaluated as a product to avoid cancellation near the boundary.
pub fn jnorm_sq(x: &[f64]) -> f64 {
    let n1 = dot(&x[1..], &x[1..]).sqrt();
    (x[0] - n1) * (x[0] + n1)
}

/// Distance of `x` to the cone boundary measured along `e = (1, 0)`:
/// `x0 - |x1|`, negative when `x` is outside.
pub fn min_eig(x: &[f64]) -> f64 {
    x[0] - dot(&x[1..], &x[1..]).sqrt()
}

pub fn jordan_prod(x: &[f64], y: &[f64], out: &mut [f64]) {
    out[0] = dot(x, y);
    for k in 1..x.len() {
        out[k] = x[0] * y[k] + y[0] * x[k];
    }
}

/// Solves `lambda ∘ u = r` for `u`.
pub fn jordan_div(lambda: &[f64], r: &[f64], out: &mut [f64]) {
    let l0 = lambda[0];
    let det = jnorm_sq(lambda);
    let u0 = (l0 * r[0] - dot(&lambda[1..], &r[1..])) / det;
    out[0] = u0;
    for k in 1..lambda.len() {
        out[k] = (r[k] - u0 * lambda[k]) / l0;
    }
}

/// Nesterov-Todd scaling `W = beta (2 w w' - J)` for one cone, with
/// `W x = W^{-1} s = lambda`.
#[derive(Debug, Clone)]
pub struct NtScaling {
    pub beta: f64,
    pub w: Vec<f64>,
}

impl NtScaling {
    pub fn new(x: &[f64], s: &[f64]) -> Self {
        let xn = jnorm_sq(x).max(f64::MIN_POSITIVE).sqrt();
        let sn = jnorm_sq(s).max(f64::MIN_POSITIVE).sqrt();
        let beta = (sn / xn).sqrt();
        let q = x.len();
        let xb: Vec<f64> = x.iter().map(|v| v / xn).collect();
        let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
        let g = (2.0 * (1.0 + dot(&xb, &sb))).sqrt();
        // wb = (sb + J xb) / g has wb'J wb = 1; W is built from its square root
        let mut w = vec![0.0; q];
        w[0] = (sb[0] + xb[0]) / g;
        for k in 1..q {
            w[k] = (sb[k] - xb[k]) / g;
        }
        let r = (2.0 * (w[0] + 1.0)).sqrt();
        w[0] += 1.0;
        w.iter_mut().for_each(|v| *v /= r);
        Self { beta, w }
    }

    /// `out = W v`
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let wv = dot(&self.w, v);
        out[0] = self.beta * (2.0 * self.w[0] * wv - v[0]);
        for k in 1..v.len() {
            out[k] = self.beta * (2.0 * self.w[k] * wv + v[k]);
        }
    }

    /// `out = W^{-1} v = (2 Jw (Jw)' - J) v / beta`
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        let jwv = jdot(&self.w, v);
        out[0] = (2.0 * self.w[0] * jwv - v[0]) / self.beta;
        for k in 1..v.len() {
            out[k] = (-2.0 * self.w[k] * jwv + v[k]) / self.beta;
        }
    }

    /// Dense row-major `W^{-1}`.
    pub fn inv_dense(&self) -> Vec<f64> {
        let q = self.w.len();
        let mut u = self.w.clone();
        for v in u.iter_mut().skip(1) {
            *v = -*v;
        }
        let mut h = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                let mut v = 2.0 * u[i] * u[j];
                if i == j {
                    v -= if i == 0 { 1.0 } else { -1.0 };
                }
                h[i * q + j] = v / self.beta;
            }
        }
        h
    }

    /// Dense row-major `W^{-2}`.
    pub fn inv_sq(&self) -> Vec<f64> {
        let q = self.w.len();
        // W^{-1} = (2 u u' - J) / beta with u = Jw
        let mut u = self.w.clone();
        for v in u.iter_mut().skip(1) {
            *v = -*v;
        }
        let b2 = self.beta * self.beta;
        // (2uu' - J)^2 = 4 u (u'u) u' - 2 u u'J - 2 J u u' + I, and u'Ju = 1
        let uu = dot(&u, &u);
        let mut h = vec![0.0; q * q];
        for i in 0..q {
            let ji = if i == 0 { 1.0 } else { -1.0 };
            for j in 0..q {
                let jj = if j == 0 { 1.0 } else { -1.0 };
                let mut v = 4.0 * uu * u[i] * u[j] - 2.0 * u[i] * u[j] * jj - 2.0 * ji * u[i] * u[j];
                if i == j {
                    v += 1.0;
                }
                h[i * q + j] = v / b2;
            }
        }
        h
    }
}

/// Largest `alpha > 0` with `x + alpha d` in the cone (infinite if none).
/// Assumes `x` is interior.
pub fn max_step(x: &[f64], d: &[f64]) -> f64 {
    let a = jdot(d, d);
    let b = jdot(x, d);
    let c = jnorm_sq(x).max(0.0);
    // x0 + alpha d0 stays positive while the quadratic stays positive
    let disc = b * b - a * c;
    let mut best = f64::INFINITY;
    if a.abs() < 1e-300 {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else if disc >= 0.0 {
        let sq = disc.sqrt();
        let qv = -(b + b.signum() * sq);
        for r in [qv / a, if qv != 0.0 { c / qv } else { f64::INFINITY }] {
            if r > 0.0 && r < best {
                best = r;
            }
        }
    }
    // the linear part can only bind if x0 itself is about to cross zero
    if d[0] < 0.0 {
        best = best.min(-x[0] / d[0]);
    }
    best
}
