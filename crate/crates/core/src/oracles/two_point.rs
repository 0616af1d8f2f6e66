//! Two-point measures in the plane.
//!
//! With `mu = mu_1 d(x1) + mu_2 d(x2)` and `nu = nu_1 d(y1) + nu_2 d(y2)`
//! both centred at the origin, the weights are fixed by the positions and
//! the solution depends only on the angles between opposite edges of the
//! quadrilateral `x1 y2 x2 y1`. Case A (both angles at most a right angle)
//! has a quadratic potential; case B has a piecewise radial one.

use std::f64::consts::PI;

use serde::Serialize;

use crate::beckmann::{assemble_sigma, SegmentMeasure};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub, sym_eigen};
use crate::measures::DiscreteMeasure;
use crate::transport::{third_marginal, JetField, Plan3, PlanCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwoPointCase {
    A,
    B,
}

/// Index swaps applied before the case-B formulas. Results are always
/// reported in the caller's labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Relabel {
    pub swap_x: bool,
    pub swap_y: bool,
}

/// `u(x) = (<b, x>^2 - <a, x>^2) / 2` with `N - M = la a a' + lb b b'`.
#[derive(Debug, Clone, Serialize)]
pub struct QuadraticPotential {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl QuadraticPotential {
    pub fn u(&self, p: &[f64]) -> f64 {
        0.5 * (dot(&self.b, p).powi(2) - dot(&self.a, p).powi(2))
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        let (pa, pb) = (dot(&self.a, p), dot(&self.b, p));
        (0..2).map(|k| pb * self.b[k] - pa * self.a[k]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `theta in [0, pi / (2 alpha))`, `h = cos(2 alpha theta)`
    Alpha,
    /// the rest, `h = cos(2 beta (2 pi - theta))`
    Beta,
}

/// `u = h(theta) r^2 / 2` in polar coordinates around `z0`, with `theta`
/// measured from `e1` towards `e2`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialPotential {
    pub z0: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl RadialPotential {
    /// Pole at the origin, standard axes. Needs `alpha > 1/4` so that
    /// `beta = alpha / (4 alpha - 1)` is positive.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.25) || !alpha.is_finite() {
            return Err(Error::Invalid(format!("alpha must exceed 1/4, got {alpha}")));
        }
        Ok(Self { z0: vec![0.0, 0.0], e1: vec![1.0, 0.0], e2: vec![0.0, 1.0], alpha, beta: alpha / (4.0 * alpha - 1.0) })
    }

    /// Angle where the two branches meet.
    pub fn kink(&self) -> f64 {
        PI / (2.0 * self.alpha)
    }

    pub fn polar(&self, p: &[f64]) -> (f64, f64) {
        let v = sub(p, &self.z0);
        let (c, s) = (dot(&v, &self.e1), dot(&v, &self.e2));
        let t = s.atan2(c);
        (norm(&v), if t < 0.0 { t + 2.0 * PI } else { t })
    }

    pub fn branch(&self, theta: f64) -> Branch {
        let t = theta.rem_euclid(2.0 * PI);
        if t < self.kink() {
            Branch::Alpha
        } else {
            Branch::Beta
        }
    }

    /// `(h, h', h'')` at `theta`.
    pub fn h(&self, theta: f64) -> (f64, f64, f64) {
        let t = theta.rem_euclid(2.0 * PI);
        match self.branch(t) {
            Branch::Alpha => {
                let (a, ph) = (self.alpha, 2.0 * self.alpha * t);
                (ph.cos(), -2.0 * a * ph.sin(), -4.0 * a * a * ph.cos())
            }
            Branch::Beta => {
                let (b, ph) = (self.beta, 2.0 * self.beta * (2.0 * PI - t));
                (ph.cos(), 2.0 * b * ph.sin(), -4.0 * b * b * ph.cos())
            }
        }
    }

    pub fn u(&self, p: &[f64]) -> f64 {
        let (r, t) = self.polar(p);
        0.5 * self.h(t).0 * r * r
    }

    /// `r (h e_r + h'/2 e_theta)`
    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        let (r, t) = self.polar(p);
        let (h, dh, _) = self.h(t);
        let (er, et) = self.frame(t);
        (0..2).map(|k| r * (h * er[k] + 0.5 * dh * et[k])).collect()
    }

    fn frame(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let (c, s) = (t.cos(), t.sin());
        let er = [c * self.e1[0] + s * self.e2[0], c * self.e1[1] + s * self.e2[1]];
        let et = [-s * self.e1[0] + c * self.e2[0], -s * self.e1[1] + c * self.e2[1]];
        (er, et)
    }

    /// Hessian in the `(e_r, e_theta)` frame: `[[h, h'/2], [h'/2, h + h''/2]]`.
    /// It depends on `theta` only.
    pub fn polar_hessian(&self, theta: f64) -> [f64; 4] {
        let (h, dh, ddh) = self.h(theta);
        [h, 0.5 * dh, 0.5 * dh, h + 0.5 * ddh]
    }

    /// Cartesian Hessian at `p`, row-major.
    pub fn hessian(&self, p: &[f64]) -> [f64; 4] {
        let (_, t) = self.polar(p);
        let hp = self.polar_hessian(t);
        let (er, et) = self.frame(t);
        let basis = [er, et];
        let mut out = [0.0; 4];
        for a in 0..2 {
            for b in 0..2 {
                for s in 0..2 {
                    for q in 0..2 {
                        out[a * 2 + b] += basis[s][a] * hp[s * 2 + q] * basis[q][b];
                    }
                }
            }
        }
        out
    }

    /// `(lambda_+, lambda_-)` of the Hessian at angle `theta`, from the matrix.
    pub fn hessian_eigs(&self, theta: f64) -> (f64, f64) {
        let (vals, _) = sym_eigen(&self.polar_hessian(theta), 2);
        (vals[0], vals[1])
    }

    /// Closed form of `hessian_eigs`.
    pub fn hessian_eigs_closed(&self, theta: f64) -> (f64, f64) {
        let t = theta.rem_euclid(2.0 * PI);
        match self.branch(t) {
            Branch::Alpha => lambda_pm(self.alpha, 2.0 * self.alpha * t),
            Branch::Beta => lambda_pm(self.beta, 2.0 * self.beta * (2.0 * PI - t)),
        }
    }
}

/// `(1 - a^2) cos(phase) +- a sqrt(1 - (1 - a^2) cos^2(phase))`
pub fn lambda_pm(a: f64, phase: f64) -> (f64, f64) {
    let c = phase.cos();
    let k = 1.0 - a * a;
    let root = (1.0 - k * c * c).max(0.0).sqrt();
    (k * c + a * root, k * c - a * root)
}

#[derive(Debug, Clone, Serialize)]
pub enum TwoPointPotential {
    Quadratic(QuadraticPotential),
    Radial(RadialPotential),
}

impl TwoPointPotential {
    pub fn u(&self, p: &[f64]) -> f64 {
        match self {
            Self::Quadratic(q) => q.u(p),
            Self::Radial(r) => r.u(p),
        }
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Self::Quadratic(q) => q.grad(p),
            Self::Radial(r) => r.grad(p),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPointSolution {
    pub case: TwoPointCase,
    pub relabel: Relabel,
    /// `int u d(nu - mu)`
    pub value: f64,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// Formula masses `gamma[i][j]` in the caller's labels; zero for cells
    /// the formula does not use, possibly negative outside the formula's case.
    pub gamma: [[f64; 2]; 2],
    /// Cells with positive mass.
    pub plan: Plan3,
    pub jets: JetField,
    pub rho: DiscreteMeasure,
    pub sigma: SegmentMeasure,
    pub potential: TwoPointPotential,
}

struct Data {
    x: [Vec<f64>; 2],
    y: [Vec<f64>; 2],
    mu: [f64; 2],
    nu: [f64; 2],
}

fn cross(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn validate(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<Data> {
    for p in [x1, x2, y1, y2] {
        if p.len() != 2 {
            return Err(Error::Dimension { expected: 2, found: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite coordinate".into()));
        }
    }
    let scale = [x1, x2, y1, y2].iter().map(|p| norm(p)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Collinear);
    }
    let weights = |a: &[f64], b: &[f64]| -> Result<[f64; 2]> {
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            return Err(Error::NotCentred("an atom at the origin forces a zero weight".into()));
        }
        let w = [nb / (na + nb), na / (na + nb)];
        let bar: Vec<f64> = (0..2).map(|k| w[0] * a[k] + w[1] * b[k]).collect();
        if norm(&bar) > 1e-9 * scale {
            return Err(Error::NotCentred(format!("barycentre off the origin by {:.3e}", norm(&bar))));
        }
        Ok(w)
    };
    let mu = weights(x1, x2)?;
    let nu = weights(y1, y2)?;
    if cross(x1, y1).abs() <= 1e-12 * norm(x1) * norm(y1) {
        return Err(Error::Collinear);
    }
    Ok(Data { x: [x1.to_vec(), x2.to_vec()], y: [y1.to_vec(), y2.to_vec()], mu, nu })
}

/// Case A iff `<x2 - y2, y1 - x1> >= 0` and `<x1 - y2, y1 - x2> >= 0`.
pub fn detect_case(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> TwoPointCase {
    let e1 = dot(&sub(x2, y2), &sub(y1, x1));
    let e2 = dot(&sub(x1, y2), &sub(y1, x2));
    if e1 >= 0.0 && e2 >= 0.0 {
        TwoPointCase::A
    } else {
        TwoPointCase::B
    }
}

fn measures(d: &Data) -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = DiscreteMeasure::from_points(d.x.to_vec(), d.mu.to_vec()).expect("positive weights");
    let nu = DiscreteMeasure::from_points(d.y.to_vec(), d.nu.to_vec()).expect("positive weights");
    (mu, nu)
}

fn finish(
    case: TwoPointCase,
    relabel: Relabel,
    d: &Data,
    gamma: [[f64; 2]; 2],
    z: [[Vec<f64>; 2]; 2],
    potential: TwoPointPotential,
) -> TwoPointSolution {
    let (mu, nu) = measures(d);
    let mut cells = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            if gamma[i][j] > 0.0 {
                cells.push(PlanCell { i, j, x: d.x[i].clone(), y: d.y[j].clone(), z: z[i][j].clone(), mass: gamma[i][j] });
            }
        }
    }
    let plan = Plan3 { dim: 2, cells };
    let jets = JetField::of_potential(&mu, &nu, |p| potential.u(p), |p| potential.grad(p));
    let value = nu.integrate(|p| potential.u(p)) - mu.integrate(|p| potential.u(p));
    let diam = crate::measures::data_diameter(&mu, &nu);
    let rho = third_marginal(&plan, 1e-9 * diam);
    let sigma = assemble_sigma(&plan);
    TwoPointSolution { case, relabel, value, mu, nu, gamma, plan, jets, rho, sigma, potential }
}

fn case_a_parts(d: &Data) -> (QuadraticPotential, [[f64; 2]; 2], [[f64; 2]; 2], [[Vec<f64>; 2]; 2]) {
    let (x, y) = (&d.x, &d.y);
    let sym = |p: &[f64], q: &[f64]| -> Vec<f64> {
        (0..4).map(|k| -0.5 * (p[k / 2] * q[k % 2] + q[k / 2] * p[k % 2])).collect()
    };
    let m = sym(&x[0], &x[1]);
    let n = sym(&y[0], &y[1]);
    let diff: Vec<f64> = n.iter().zip(&m).map(|(a, b)| a - b).collect();
    let (vals, vecs) = sym_eigen(&diff, 2);
    let q = QuadraticPotential { a: vecs[1].clone(), b: vecs[0].clone(), lambda_a: vals[1], lambda_b: vals[0] };
    let (a, b) = (&q.a, &q.b);
    let mut gamma = [[0.0; 2]; 2];
    let mut alt = [[0.0; 2]; 2];
    let mut z: [[Vec<f64>; 2]; 2] = Default::default();
    for i in 0..2 {
        for j in 0..2 {
            let (ip, jp) = (1 - i, 1 - j);
            gamma[i][j] = d.mu[i] * dot(b, &sub(&y[jp], &x[i])) / dot(b, &sub(&y[jp], &y[j]));
            alt[i][j] = d.nu[j] * dot(a, &sub(&x[ip], &y[j])) / dot(a, &sub(&x[ip], &x[i]));
            let (pa, pb) = (dot(a, &x[i]), dot(b, &y[j]));
            z[i][j] = (0..2).map(|k| pa * a[k] + pb * b[k]).collect();
        }
    }
    (q, gamma, alt, z)
}

/// The case-A formulas applied to the given labels, whatever the case.
pub fn case_a_formulas(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<TwoPointSolution> {
    let d = validate(x1, x2, y1, y2)?;
    let (q, gamma, _, z) = case_a_parts(&d);
    Ok(finish(TwoPointCase::A, Relabel::default(), &d, gamma, z, TwoPointPotential::Quadratic(q)))
}

/// The symmetric expression `gamma_ij = nu_j <a, x_i' - y_j> / <a, x_i' - x_i>`
/// of the case-A masses.
pub fn case_a_alternative_gamma(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<[[f64; 2]; 2]> {
    let d = validate(x1, x2, y1, y2)?;
    Ok(case_a_parts(&d).2)
}

fn relabel_for_b(d: &Data) -> Relabel {
    let (x, y) = (&d.x, &d.y);
    let (n1, n2, m1, m2) = (norm(&x[0]), norm(&x[1]), norm(&y[0]), norm(&y[1]));
    if dot(&x[0], &y[0]) >= 0.0 {
        // |x1||y2| <= |x2||y1|, or its mirror after swapping both
        if n1 * m2 <= n2 * m1 {
            Relabel::default()
        } else {
            Relabel { swap_x: true, swap_y: true }
        }
    } else if n2 * m2 <= n1 * m1 {
        Relabel { swap_x: true, swap_y: false }
    } else {
        Relabel { swap_x: false, swap_y: true }
    }
}

fn permuted(d: &Data, r: Relabel) -> Data {
    let (sx, sy) = (r.swap_x as usize, r.swap_y as usize);
    Data {
        x: [d.x[sx].clone(), d.x[1 - sx].clone()],
        y: [d.y[sy].clone(), d.y[1 - sy].clone()],
        mu: [d.mu[sx], d.mu[1 - sx]],
        nu: [d.nu[sy], d.nu[1 - sy]],
    }
}

fn radial_from(d: &Data) -> Result<RadialPotential> {
    let (x, y) = (&d.x, &d.y);
    let u = sub(&y[0], &x[0]);
    let v = sub(&y[1], &x[1]);
    let det = cross(&u, &v);
    if norm(&u) == 0.0 || norm(&v) == 0.0 {
        return Err(Error::Invalid("coincident x and y atoms".into()));
    }
    if det.abs() <= 1e-12 * norm(&u) * norm(&v) {
        return Err(Error::ZeroAngle);
    }
    // x1 + s u = x2 + t v
    let w = sub(&x[1], &x[0]);
    let s = cross(&w, &v) / det;
    let z0: Vec<f64> = (0..2).map(|k| x[0][k] + s * u[k]).collect();
    let r1 = sub(&x[0], &z0);
    if norm(&r1) == 0.0 {
        return Err(Error::Invalid("x1 coincides with the intersection point".into()));
    }
    let e1: Vec<f64> = r1.iter().map(|c| c / norm(&r1)).collect();
    let mut e2 = vec![-e1[1], e1[0]];
    if dot(&sub(&x[1], &z0), &e2) < 0.0 {
        e2.iter_mut().for_each(|c| *c = -*c);
    }
    let g = sub(&x[1], &y[1]);
    let cos = (dot(&g, &u) / (norm(&g) * norm(&u))).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle <= 0.0 {
        return Err(Error::ZeroAngle);
    }
    let alpha = PI / (2.0 * angle);
    Ok(RadialPotential { z0, e1, e2, alpha, beta: alpha / (4.0 * alpha - 1.0) })
}

/// The radial potential of case B, after relabelling.
pub fn case_b_potential(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<RadialPotential> {
    let d = validate(x1, x2, y1, y2)?;
    radial_from(&permuted(&d, relabel_for_b(&d)))
}

/// The case-B formulas (after relabelling), whatever the case.
pub fn case_b_formulas(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<TwoPointSolution> {
    let d = validate(x1, x2, y1, y2)?;
    let r = relabel_for_b(&d);
    let p = permuted(&d, r);
    let rad = radial_from(&p)?;
    // relabelled cells: (1,1) at y1, (2,2) at x2, (1,2) at z0
    let (sx, sy) = (r.swap_x as usize, r.swap_y as usize);
    let orig = |i: usize, j: usize| (i ^ sx, j ^ sy);
    let mut gamma = [[0.0; 2]; 2];
    let mut z: [[Vec<f64>; 2]; 2] = Default::default();
    let put = |gamma: &mut [[f64; 2]; 2], z: &mut [[Vec<f64>; 2]; 2], i: usize, j: usize, m: f64, pt: Vec<f64>| {
        let (a, b) = orig(i, j);
        gamma[a][b] = m;
        z[a][b] = pt;
    };
    put(&mut gamma, &mut z, 0, 0, p.nu[0], p.y[0].clone());
    put(&mut gamma, &mut z, 1, 1, p.mu[1], p.x[1].clone());
    put(&mut gamma, &mut z, 0, 1, p.mu[0] - p.nu[0], rad.z0.clone());
    let (a, b) = orig(1, 0);
    z[a][b] = vec![0.0, 0.0];
    Ok(finish(TwoPointCase::B, r, &d, gamma, z, TwoPointPotential::Radial(rad)))
}

/// Detects the case and returns the matching closed-form solution.
pub fn two_point_oracle(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> Result<TwoPointSolution> {
    validate(x1, x2, y1, y2)?;
    match detect_case(x1, x2, y1, y2) {
        TwoPointCase::A => case_a_formulas(x1, x2, y1, y2),
        TwoPointCase::B => case_b_formulas(x1, x2, y1, y2),
    }
}

/// A configuration on the boundary between the cases:
/// `x2 = -t x1`, `y2 = -s y1` with `s` chosen so that
/// `<x2 - y2, y1 - x1> = 0`. Needs `s > 0`.
pub fn right_angle_instance(x1: &[f64], y1: &[f64], t: f64) -> Result<[Vec<f64>; 4]> {
    let e = sub(y1, x1);
    let s = t * dot(x1, &e) / dot(y1, &e);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Invalid(format!("no right-angle configuration for this choice (s = {s})")));
    }
    let x2: Vec<f64> = x1.iter().map(|c| -t * c).collect();
    let y2: Vec<f64> = y1.iter().map(|c| -s * c).collect();
    Ok([x1.to_vec(), x2, y1.to_vec(), y2])
}
