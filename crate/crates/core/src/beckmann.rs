//! Segment measures built from three-marginal plans, their energy, and a
//! weak-form check of the double-divergence equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, gauss_legendre01, midpoint, sub};
use crate::measures::DiscreteMeasure;
use crate::transport::{cost, Plan3};

/// `weight * sign * |xi - a| (e ⊗ e)` along `[a, b]`, `e = (b - a)/|b - a|`.
/// The density grows linearly from zero at the apex `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub weight: f64,
    pub sign: i8,
}

impl Segment {
    pub fn length(&self) -> f64 {
        dist(&self.a, &self.b)
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.weight * self.length().powi(2)
    }

    /// Density magnitude at the midpoint, `weight * length / 2`.
    pub fn midpoint_density(&self) -> f64 {
        0.5 * self.weight * self.length()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentMeasure {
    pub dim: usize,
    pub segments: Vec<Segment>,
}

/// `f^{x,y,z} = delta_y - delta_x - div((z - y) delta_y - (z - x) delta_x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicLoad {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BasicLoadValue {
    Optimal(f64),
    /// `|z - (x+y)/2| |x - y|`, reported without proof of optimality.
    OutsideBall(f64),
}

/// Two arms per cell, apex at `z`: toward `x` with sign `+1` and toward `y`
/// with sign `-1`. Zero-length arms are skipped.
pub fn assemble_sigma(plan: &Plan3) -> SegmentMeasure {
    let mut segments = Vec::with_capacity(2 * plan.cells.len());
    for c in &plan.cells {
        for (end, sign) in [(&c.x, 1i8), (&c.y, -1i8)] {
            if c.z != *end {
                segments.push(Segment { a: c.z.clone(), b: end.clone(), weight: c.mass, sign });
            }
        }
    }
    SegmentMeasure { dim: plan.dim, segments }
}

impl SegmentMeasure {
    /// Sum of `weight |b - a|^2 / 2`; equals the generating plan's cost.
    /// It bounds the nuclear-norm mass of the measure from above, with
    /// equality unless segments of opposite sign overlap.
    pub fn energy(&self) -> f64 {
        self.segments.iter().map(Segment::energy).sum()
    }

    /// `<Hess phi, sigma>` with an `nq`-point Gauss-Legendre rule per segment.
    pub fn pair_hessian(&self, hess_dir: &dyn Fn(&[f64], &[f64]) -> f64, nq: usize) -> f64 {
        let (t, w) = gauss_legendre01(nq);
        let mut total = 0.0;
        for s in &self.segments {
            let len = s.length();
            let e: Vec<f64> = sub(&s.b, &s.a).iter().map(|v| v / len).collect();
            let mut acc = 0.0;
            for (tk, wk) in t.iter().zip(&w) {
                let r = tk * len;
                let p: Vec<f64> = s.a.iter().zip(&e).map(|(a, e)| a + r * e).collect();
                acc += wk * r * hess_dir(&p, &e);
            }
            total += f64::from(s.sign) * s.weight * len * acc;
        }
        total
    }

    /// Pairs of opposite-sign segments that are collinear and overlap in more
    /// than a point; there the energy overstates the nuclear-norm mass.
    pub fn overlapping_opposite_pairs(&self, tol: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (p, s) in self.segments.iter().enumerate() {
            for (q, t) in self.segments.iter().enumerate().skip(p + 1) {
                if s.sign == t.sign {
                    continue;
                }
                if collinear_overlap(s, t, tol) {
                    out.push((p, q));
                }
            }
        }
        out
    }
}

fn collinear_overlap(s: &Segment, t: &Segment, tol: f64) -> bool {
    let len = s.length();
    let e: Vec<f64> = sub(&s.b, &s.a).iter().map(|v| v / len).collect();
    let off_line = |p: &[f64]| {
        let v = sub(p, &s.a);
        let along = dot(&v, &e);
        (dot(&v, &v) - along * along).max(0.0).sqrt()
    };
    let scale = len.max(t.length());
    if off_line(&t.a) > tol * scale || off_line(&t.b) > tol * scale {
        return false;
    }
    let (u0, u1) = (dot(&sub(&t.a, &s.a), &e), dot(&sub(&t.b, &s.a), &e));
    let (lo, hi) = (u0.min(u1), u0.max(u1));
    hi.min(len) - lo.max(0.0) > tol * scale
}

/// One test function of the weak double-divergence check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResidual {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / scale`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub tests: Vec<TestResidual>,
    /// Largest residual over polynomial tests.
    pub max_polynomial: f64,
    /// Largest residual over Gaussian bumps.
    pub max_bump: f64,
    /// Normalization: total mass of `mu`; test functions live on coordinates
    /// rescaled to the unit box around the data.
    pub scale: f64,
}

/// Checks `<Hess phi, sigma> = int phi d(nu - mu)` on monomials of degree
/// `2..=degree` and a fixed family of Gaussian bumps.
pub fn verify_div2(sigma: &SegmentMeasure, mu: &DiscreteMeasure, nu: &DiscreteMeasure, degree: usize) -> Result<ResidualReport> {
    for d in [sigma.dim, mu.dim(), nu.dim()] {
        if d != 2 {
            return Err(Error::Dimension { expected: 2, found: d });
        }
    }
    if degree < 2 {
        return Err(Error::Invalid("test degree must be at least 2".into()));
    }
    // affine change of variables to the unit box around the data
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in mu.points().chain(nu.points()) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    // coincident data would otherwise blow rounding noise up to unit size
    let floor = 1e-9 * (1.0 + centre[0].abs().max(centre[1].abs()));
    let half = (0.5 * (hi[0] - lo[0])).max(0.5 * (hi[1] - lo[1])).max(floor);
    let local = |p: &[f64]| [(p[0] - centre[0]) / half, (p[1] - centre[1]) / half];
    let scale = mu.total_mass();

    let mut tests = Vec::new();
    let nq = degree.div_ceil(2) + 1;
    for deg in 2..=degree {
        for a in 0..=deg {
            let b = deg - a;
            let (fa, fb) = (a as i32, b as i32);
            let phi = |p: &[f64]| {
                let q = local(p);
                q[0].powi(fa) * q[1].powi(fb)
            };
            // Hessian in local coordinates, chain rule gives 1/half^2
            let hess = |p: &[f64], e: &[f64]| {
                let q = local(p);
                let mono = |i: i32, j: i32, c: f64| if i < 0 || j < 0 || c == 0.0 { 0.0 } else { c * q[0].powi(i) * q[1].powi(j) };
                let h00 = mono(fa - 2, fb, (fa * (fa - 1)) as f64);
                let h11 = mono(fa, fb - 2, (fb * (fb - 1)) as f64);
                let h01 = mono(fa - 1, fb - 1, (fa * fb) as f64);
                (h00 * e[0] * e[0] + 2.0 * h01 * e[0] * e[1] + h11 * e[1] * e[1]) / (half * half)
            };
            tests.push(residual(format!("x^{a} y^{b}"), sigma, mu, nu, &phi, &hess, nq, scale));
        }
    }
    let n_poly = tests.len();
    // bumps exp(-|q - c|^2 / (2 s^2)) at a few centres and widths
    for (cx, cy, s) in [(0.0, 0.0, 0.5), (0.5, 0.5, 0.4), (-0.5, 0.3, 0.6), (0.2, -0.6, 0.3), (0.0, 0.0, 1.5)] {
        let phi = |p: &[f64]| {
            let q = local(p);
            (-((q[0] - cx).powi(2) + (q[1] - cy).powi(2)) / (2.0 * s * s)).exp()
        };
        let hess = |p: &[f64], e: &[f64]| {
            let q = local(p);
            let dv = [q[0] - cx, q[1] - cy];
            let g = (-(dv[0] * dv[0] + dv[1] * dv[1]) / (2.0 * s * s)).exp();
            let de = dot(&dv, e);
            // Hess g = g (d d' / s^4 - I / s^2)
            g * (de * de / s.powi(4) - dot(e, e) / (s * s)) / (half * half)
        };
        tests.push(residual(format!("bump({cx},{cy};{s})"), sigma, mu, nu, &phi, &hess, 11, scale));
    }
    let max_polynomial = tests[..n_poly].iter().map(|t| t.residual).fold(0.0, f64::max);
    let max_bump = tests[n_poly..].iter().map(|t| t.residual).fold(0.0, f64::max);
    Ok(ResidualReport { tests, max_polynomial, max_bump, scale })
}

#[allow(clippy::too_many_arguments)]
fn residual(
    name: String,
    sigma: &SegmentMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    phi: &dyn Fn(&[f64]) -> f64,
    hess: &dyn Fn(&[f64], &[f64]) -> f64,
    nq: usize,
    scale: f64,
) -> TestResidual {
    let lhs = sigma.pair_hessian(hess, nq);
    let rhs = nu.integrate(phi) - mu.integrate(phi);
    TestResidual { name, lhs, rhs, residual: (lhs - rhs).abs() / scale }
}

/// Value of the stress problem for a basic load.
pub fn basic_load_value(load: &BasicLoad, tol: f64) -> Result<BasicLoadValue> {
    let (x, y, z) = (&load.x, &load.y, &load.z);
    if x == y {
        return Err(Error::DegenerateSegment);
    }
    let off = dist(z, &midpoint(x, y));
    let half = 0.5 * dist(x, y);
    if off <= half + tol {
        Ok(BasicLoadValue::Optimal(cost(x, y, z)))
    } else {
        Ok(BasicLoadValue::OutsideBall(off * dist(x, y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::PlanCell;

    fn cell(x: [f64; 2], y: [f64; 2], z: [f64; 2], mass: f64) -> PlanCell {
        PlanCell { i: 0, j: 0, x: x.to_vec(), y: y.to_vec(), z: z.to_vec(), mass }
    }

    #[test]
    fn two_arm_cell() {
        let plan = Plan3 { dim: 2, cells: vec![cell([-1.0, 0.0], [1.0, 0.0], [0.0, 0.0], 1.0)] };
        let s = assemble_sigma(&plan);
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.energy(), 1.0);
        assert_eq!(s.energy(), plan.value());
    }

    #[test]
    fn degenerate_arms_are_skipped() {
        let plan = Plan3 {
            dim: 2,
            cells: vec![cell([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.5), cell([2.0, 2.0], [2.0, 2.0], [2.0, 2.0], 0.5)],
        };
        let s = assemble_sigma(&plan);
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].sign, 1);
        assert_eq!(assemble_sigma(&Plan3::default()).energy(), 0.0);
    }

    #[test]
    fn nearly_coincident_diracs_verify() {
        let (x, y) = ([0.9965247575080354, 0.8150355186645011], [0.9965247575080353, 0.8150355186645012]);
        let mu = DiscreteMeasure::from_points(vec![x.to_vec()], vec![0.8]).unwrap();
        let nu = DiscreteMeasure::from_points(vec![y.to_vec()], vec![0.8]).unwrap();
        let plan = Plan3 { dim: 2, cells: vec![cell(x, y, x, 0.8)] };
        let r = verify_div2(&assemble_sigma(&plan), &mu, &nu, 4).unwrap();
        assert!(r.max_polynomial < 1e-12, "{}", r.max_polynomial);
    }

    #[test]
    fn single_segment_energy() {
        let s = Segment { a: vec![0.0, 0.0], b: vec![3.0, 4.0], weight: 2.0, sign: 1 };
        assert_eq!(s.energy(), 25.0);
    }

    #[test]
    fn basic_load_pairing_matches_first_order_terms() {
        // <Hess phi, sigma> = phi(y) - phi(x) + <grad phi(y), z - y> - <grad phi(x), z - x>
        let (x, y, z) = ([-1.0, 0.3], [1.2, -0.4], [0.1, 0.5]);
        let plan = Plan3 { dim: 2, cells: vec![cell(x, y, z, 1.0)] };
        let s = assemble_sigma(&plan);
        let phi = |p: &[f64]| p[0].powi(3) * p[1] + p[1] * p[1];
        let grad = |p: &[f64]| [3.0 * p[0] * p[0] * p[1], p[0].powi(3) + 2.0 * p[1]];
        let hess = |p: &[f64], e: &[f64]| {
            let (h00, h01, h11) = (6.0 * p[0] * p[1], 3.0 * p[0] * p[0], 2.0);
            h00 * e[0] * e[0] + 2.0 * h01 * e[0] * e[1] + h11 * e[1] * e[1]
        };
        let lhs = s.pair_hessian(&hess, 3);
        let rhs = phi(&y) - phi(&x) + dot(&grad(&y), &sub(&z, &y)) - dot(&grad(&x), &sub(&z, &x));
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }

    #[test]
    fn symmetric_cell_pairs_to_zero_for_x_squared() {
        let plan = Plan3 { dim: 2, cells: vec![cell([-1.0, 0.0], [1.0, 0.0], [0.0, 0.0], 1.0)] };
        let s = assemble_sigma(&plan);
        let lhs = s.pair_hessian(&|_, e| 2.0 * e[0] * e[0], 2);
        assert_eq!(lhs, 0.0);
    }

    #[test]
    fn basic_load_cases() {
        let load = |z: [f64; 2]| BasicLoad { x: vec![-1.0, 0.0], y: vec![1.0, 0.0], z: z.to_vec() };
        assert_eq!(basic_load_value(&load([0.0, 0.0]), 1e-12).unwrap(), BasicLoadValue::Optimal(1.0));
        assert_eq!(basic_load_value(&load([-1.0, 0.0]), 1e-12).unwrap(), BasicLoadValue::Optimal(2.0));
        assert_eq!(basic_load_value(&load([0.0, 5.0]), 1e-12).unwrap(), BasicLoadValue::OutsideBall(10.0));
        let bad = BasicLoad { x: vec![1.0, 1.0], y: vec![1.0, 1.0], z: vec![0.0, 0.0] };
        assert!(matches!(basic_load_value(&bad, 1e-12), Err(Error::DegenerateSegment)));
    }

    #[test]
    fn overlap_detection() {
        // x, z, y collinear with z outside [x, y]: the arms overlap
        let plan = Plan3 { dim: 2, cells: vec![cell([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], 1.0)] };
        assert_eq!(assemble_sigma(&plan).overlapping_opposite_pairs(1e-9), vec![(0, 1)]);
        let plan = Plan3 { dim: 2, cells: vec![cell([-1.0, 0.0], [1.0, 0.0], [0.0, 0.0], 1.0)] };
        assert!(assemble_sigma(&plan).overlapping_opposite_pairs(1e-9).is_empty());
    }
}
