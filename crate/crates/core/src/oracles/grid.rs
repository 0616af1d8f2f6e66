use serde::Serialize;

use crate::conic::{DenseLp, LpOutcome};
use crate::error::{Error, Result};
use crate::linalg::{dist, midpoint};
use crate::measures::CenteredPair;
use crate::transport::{cost, Plan3, PlanCell};

/// Default spacing is `diameter / DEFAULT_GRID_DIVISIONS`.
pub const DEFAULT_GRID_DIVISIONS: usize = 32;
/// Default limit on the number of LP columns.
pub const DEFAULT_GRID_COLUMNS: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub h: f64,
    /// Nodes for the pair `(i, j)` are those within `|x_i - y_j| / 2 + margin`
    /// of the midpoint. `None` means `h sqrt(d)`, enough to contain the
    /// nearest node of every point of the ball. Keep it fixed across
    /// spacings to get nested feasible sets.
    pub margin: Option<f64>,
    pub max_columns: usize,
}

impl GridSpec {
    pub fn for_pair(pair: &CenteredPair) -> Self {
        Self::with_divisions(pair, DEFAULT_GRID_DIVISIONS)
    }

    pub fn with_divisions(pair: &CenteredPair, divisions: usize) -> Self {
        let diam = pair.diameter().max(f64::MIN_POSITIVE);
        Self { h: diam / divisions.max(1) as f64, margin: None, max_columns: DEFAULT_GRID_COLUMNS }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSolution {
    /// Upper bound on the transport value.
    pub value: f64,
    pub plan: Plan3,
    pub h: f64,
    pub columns: usize,
    pub lp_iterations: usize,
}

/// Brute-force LP over `pi(i, j, k)` with `z` restricted to an axis-aligned
/// lattice `h Z^d` covering the balls with diameter `[x_i, y_j]`, so halving
/// `h` gives a superset of nodes.
pub fn grid_oracle(pair: &CenteredPair, spec: &GridSpec) -> Result<GridSolution> {
    let (mu, nu) = (&pair.mu, &pair.nu);
    let (m, n, d) = (mu.len(), nu.len(), pair.dim());
    if !(spec.h > 0.0) || !spec.h.is_finite() {
        return Err(Error::Invalid(format!("grid spacing must be positive, got {}", spec.h)));
    }
    let margin = spec.margin.unwrap_or(spec.h * (d as f64).sqrt());
    let balls: Vec<(Vec<f64>, f64)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (midpoint(mu.point(i), nu.point(j)), 0.5 * dist(mu.point(i), nu.point(j)) + margin))
        .collect();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (c, r) in &balls {
        for k in 0..d {
            lo[k] = lo[k].min(c[k] - r);
            hi[k] = hi[k].max(c[k] + r);
        }
    }
    // nodes are the multiples of h inside the box
    let base: Vec<f64> = lo.iter().map(|l| (l / spec.h).floor()).collect();
    let steps: Vec<usize> = (0..d).map(|k| (hi[k] / spec.h - base[k]).floor() as usize + 1).collect();
    let total: usize = steps.iter().try_fold(1usize, |a, s| a.checked_mul(*s)).unwrap_or(usize::MAX);
    if total.saturating_mul(m * n) > spec.max_columns.saturating_mul(64) {
        return Err(Error::GuardExceeded { size: total.saturating_mul(m * n), limit: spec.max_columns });
    }
    let node = |mut idx: usize| -> Vec<f64> {
        (0..d)
            .map(|k| {
                let s = idx % steps[k];
                idx /= steps[k];
                (base[k] + s as f64) * spec.h
            })
            .collect()
    };
    let rows = m + n + (m + n) * d;
    let mut lp = DenseLp::new(rows);
    for i in 0..m {
        lp.rhs[i] = mu.weight(i);
    }
    for j in 0..n {
        lp.rhs[m + j] = nu.weight(j);
    }
    let mut meta: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (p, (c, r)) in balls.iter().enumerate() {
        let (i, j) = (p / n, p % n);
        let (x, y) = (mu.point(i), nu.point(j));
        for idx in 0..total {
            let z = node(idx);
            if dist(&z, c) > *r {
                continue;
            }
            if meta.len() >= spec.max_columns {
                return Err(Error::GuardExceeded { size: meta.len() + 1, limit: spec.max_columns });
            }
            let mut col = vec![(i, 1.0), (m + j, 1.0)];
            for a in 0..d {
                col.push((m + n + i * d + a, z[a] - x[a]));
                col.push((m + n + m * d + j * d + a, z[a] - y[a]));
            }
            col.retain(|(_, v)| *v != 0.0);
            lp.add_column(cost(x, y, &z), col);
            meta.push((i, j, z));
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal(sol) => {
            let cells = meta
                .into_iter()
                .zip(&sol.x)
                .filter(|(_, v)| **v > 0.0)
                .map(|((i, j, z), v)| PlanCell { i, j, x: mu.point(i).to_vec(), y: nu.point(j).to_vec(), z, mass: *v })
                .collect();
            Ok(GridSolution {
                value: sol.value,
                plan: Plan3 { dim: d, cells },
                h: spec.h,
                columns: lp.ncols(),
                lp_iterations: sol.iterations,
            })
        }
        LpOutcome::Infeasible { .. } => Err(Error::Infeasible("no plan supported on the grid; refine it".into())),
        LpOutcome::Unbounded { .. } => Err(Error::NumericalBreakdown("grid LP reported unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{validate_pair, DiscreteMeasure};

    fn pair(mu: DiscreteMeasure, nu: DiscreteMeasure) -> CenteredPair {
        validate_pair(&mu, &nu, 1e-9).unwrap()
    }

    #[test]
    fn diracs_at_a_node() {
        let p = pair(DiscreteMeasure::dirac(vec![0.0, 0.0]), DiscreteMeasure::dirac(vec![0.0, 0.0]));
        let spec = GridSpec { h: 0.5, margin: None, max_columns: 1000 };
        assert!(grid_oracle(&p, &spec).unwrap().value.abs() < 1e-14);
    }

    #[test]
    fn square_corners_are_nodes() {
        let nu = DiscreteMeasure::from_points(
            vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]],
            vec![0.25; 4],
        )
        .unwrap();
        let p = pair(DiscreteMeasure::dirac(vec![0.0, 0.0]), nu);
        let s = grid_oracle(&p, &GridSpec { h: 0.5, margin: Some(0.0), max_columns: 10_000 }).unwrap();
        assert!((s.value - 1.0).abs() < 1e-10, "{}", s.value);
    }

    #[test]
    fn refinement_does_not_increase_value() {
        let mu = DiscreteMeasure::from_points(vec![vec![0.5, 0.1], vec![-0.5, -0.1]], vec![0.5; 2]).unwrap();
        let nu = DiscreteMeasure::from_points(vec![vec![0.1, 0.7], vec![-0.2, -1.4]], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let p = pair(mu, nu);
        let mut last = f64::INFINITY;
        for h in [0.4, 0.2, 0.1] {
            let v = grid_oracle(&p, &GridSpec { h, margin: Some(0.6), max_columns: 100_000 }).unwrap().value;
            assert!(v <= last + 1e-10, "{v} > {last}");
            last = v;
        }
    }

    #[test]
    fn guard() {
        let p = pair(DiscreteMeasure::dirac(vec![0.0, 0.0]), DiscreteMeasure::from_points(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5; 2]).unwrap());
        assert!(matches!(grid_oracle(&p, &GridSpec { h: 0.01, margin: None, max_columns: 10 }), Err(Error::GuardExceeded { .. })));
    }
}
