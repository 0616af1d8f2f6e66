//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use hessot::linalg::norm;
use hessot::measures::{barycentre, DiscreteMeasure};
use hessot::oracles::{detect_case, TwoPointCase};
use rand::Rng;

fn point<R: Rng>(rng: &mut R) -> Vec<f64> {
    vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
}

/// `nu` random with `n <= 12` atoms; `mu` lumps random clusters of `nu` into
/// their barycentres, so `nu` dominates `mu`.
pub fn ordered_instance<R: Rng>(rng: &mut R) -> (DiscreteMeasure, DiscreteMeasure) {
    let n = rng.gen_range(2..=12);
    let m = rng.gen_range(1..=n);
    let ys: Vec<Vec<f64>> = (0..n).map(|_| point(rng)).collect();
    let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let label: Vec<usize> = (0..n).map(|k| if k < m { k } else { rng.gen_range(0..m) }).collect();
    let mut xs = vec![vec![0.0; 2]; m];
    let mut mw = vec![0.0; m];
    for k in 0..n {
        mw[label[k]] += ws[k];
        for d in 0..2 {
            xs[label[k]][d] += ws[k] * ys[k][d];
        }
    }
    for i in 0..m {
        for d in 0..2 {
            xs[i][d] /= mw[i];
        }
    }
    (DiscreteMeasure::from_points(xs, mw).unwrap(), DiscreteMeasure::from_points(ys, ws).unwrap())
}

/// Non-collinear `[x1, x2, y1, y2]` with `x2 = -t x1`, `y2 = -s y1`, drawn
/// until the configuration falls in `want`.
pub fn two_point_instance<R: Rng>(rng: &mut R, want: TwoPointCase) -> [Vec<f64>; 4] {
    loop {
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let b: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let x1 = vec![a.cos() * rng.gen_range(0.3..1.5), a.sin() * rng.gen_range(0.3..1.5)];
        let y1 = vec![b.cos() * rng.gen_range(0.3..1.5), b.sin() * rng.gen_range(0.3..1.5)];
        let tx = rng.gen_range(0.3..3.0);
        let ty = rng.gen_range(0.3..3.0);
        let x2: Vec<f64> = x1.iter().map(|v| -tx * v).collect();
        let y2: Vec<f64> = y1.iter().map(|v| -ty * v).collect();
        let sin = (x1[0] * y1[1] - x1[1] * y1[0]).abs() / (norm(&x1) * norm(&y1));
        if sin >= 0.05 && detect_case(&x1, &x2, &y1, &y2) == want {
            return [x1, x2, y1, y2];
        }
    }
}

/// Random measures with `m <= max_m`, `n <= max_n` atoms; `nu` is moved to
/// the barycentre of `mu` and rescaled to its mass.
pub fn balanced_pair<R: Rng>(rng: &mut R, max_m: usize, max_n: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_n);
    let xs: Vec<Vec<f64>> = (0..m).map(|_| point(rng)).collect();
    let mw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let mut ys: Vec<Vec<f64>> = (0..n).map(|_| point(rng)).collect();
    let nw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let mu = DiscreteMeasure::from_points(xs, mw).unwrap();
    let nu0 = DiscreteMeasure::from_points(ys.clone(), nw.clone()).unwrap();
    let (bm, bn) = (barycentre(&mu).unwrap(), barycentre(&nu0).unwrap());
    for y in ys.iter_mut() {
        for k in 0..2 {
            y[k] += bm[k] - bn[k];
        }
    }
    let s = mu.total_mass() / nu0.total_mass();
    (mu, DiscreteMeasure::from_points(ys, nw.iter().map(|w| w * s).collect()).unwrap())
}
