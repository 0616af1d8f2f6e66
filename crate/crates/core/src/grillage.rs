//! Optimal grillages for a balanced load `f = f_plus - f_minus`.
//!
//! The bending-moment field of an optimal grillage is the segment measure
//! assembled from an optimal three-marginal plan with `mu = f_minus` and
//! `nu = f_plus`; its energy is the transport value.

use std::time::Instant;

use serde::Serialize;

use crate::beckmann::{assemble_sigma, SegmentMeasure};
use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::{dist, midpoint};
use crate::measures::{barycentre, data_diameter, DiscreteMeasure};
use crate::transport::{solve_measures, Plan3};

#[derive(Debug, Clone, Serialize)]
pub struct GrillageResult {
    /// Plan in input coordinates and masses.
    pub plan: Plan3,
    pub sigma: SegmentMeasure,
    pub energy: f64,
    pub segment_count: usize,
    /// Every segment endpoint lies in the union of the balls with
    /// diameters `[x_i, y_j]`.
    pub support_ok: bool,
    pub iterations: usize,
}

/// `p` is within `tol` of some ball with diameter `[x_i, y_j]`.
pub fn in_union_of_balls(p: &[f64], mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    mu.points().any(|x| nu.points().any(|y| dist(p, &midpoint(x, y)) - 0.5 * dist(x, y) <= tol))
}

/// Solves for an optimal grillage carrying `load_plus - load_minus`.
///
/// The loads must have equal mass and a common barycentre. No rescaling is
/// visible to the caller: the energy and the plan refer to the input masses
/// and coordinates.
pub fn design(load_plus: &DiscreteMeasure, load_minus: &DiscreteMeasure, opts: &SolverOptions) -> Result<GrillageResult> {
    if load_plus.dim() != load_minus.dim() {
        return Err(Error::DimensionMismatch { expected: load_minus.dim(), found: load_plus.dim() });
    }
    let (mp, mm) = (load_plus.total_mass(), load_minus.total_mass());
    if (mp - mm).abs() > 1e-9 * mp.max(mm) {
        return Err(Error::Unbalanced(format!("total masses differ: {mp} vs {mm}")));
    }
    let diam = data_diameter(load_plus, load_minus);
    let (bp, bm) = (barycentre(load_plus)?, barycentre(load_minus)?);
    if dist(&bp, &bm) > 1e-9 * (1.0 + diam) {
        return Err(Error::Unbalanced(format!("barycentres differ by {:.3e}", dist(&bp, &bm))));
    }
    let (pair, sol) = solve_measures(load_minus, load_plus, opts)?;
    let plan = sol.plan.translated(&pair.translation).scaled_mass(pair.mu_mass);
    let sigma = assemble_sigma(&plan);
    let tol = 1e-6 * diam.max(f64::MIN_POSITIVE);
    let support_ok = sigma
        .segments
        .iter()
        .all(|s| in_union_of_balls(&s.a, load_minus, load_plus, tol) && in_union_of_balls(&s.b, load_minus, load_plus, tol));
    Ok(GrillageResult {
        energy: sol.value * pair.mu_mass,
        segment_count: sigma.segments.len(),
        plan,
        sigma,
        support_ok,
        iterations: sol.iterations,
    })
}

/// `k x k` equal point loads of total mass 1 on the square `[-h, h]^2`,
/// including its boundary. `k = 1` puts one load at the centre.
pub fn slab_load(k: usize, h: f64) -> Result<DiscreteMeasure> {
    let coords: Vec<f64> = match k {
        0 => return Err(Error::Invalid("the load grid needs at least one point".into())),
        1 => vec![0.0],
        _ => (0..k).map(|i| -h + 2.0 * h * i as f64 / (k - 1) as f64).collect(),
    };
    grid_measure(&coords)
}

/// `k x k` cell-centred loads of total mass 1 discretizing the uniform
/// density on `[-h, h]^2`.
pub fn continuous_slab_load(k: usize, h: f64) -> Result<DiscreteMeasure> {
    if k == 0 {
        return Err(Error::Invalid("the load grid needs at least one point".into()));
    }
    let coords: Vec<f64> = (0..k).map(|i| -h + 2.0 * h * (i as f64 + 0.5) / k as f64).collect();
    grid_measure(&coords)
}

fn grid_measure(coords: &[f64]) -> Result<DiscreteMeasure> {
    let w = 1.0 / (coords.len() * coords.len()) as f64;
    let pts: Vec<Vec<f64>> = coords.iter().flat_map(|a| coords.iter().map(move |b| vec![*a, *b])).collect();
    let n = pts.len();
    DiscreteMeasure::from_points(pts, vec![w; n])
}

/// Five equal column reactions of total mass 1 at `(+-a, +-a)` and the origin.
pub fn five_columns(a: f64) -> DiscreteMeasure {
    let pts = vec![vec![a, a], vec![a, -a], vec![-a, a], vec![-a, -a], vec![0.0, 0.0]];
    DiscreteMeasure::from_points(pts, vec![0.2; 5]).expect("valid columns")
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineRow {
    pub level: usize,
    pub energy: Option<f64>,
    pub segment_count: usize,
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Solves one design per level concurrently. `recipe(level)` returns
/// `(load_plus, load_minus)`. Failures are recorded in their row and do not
/// stop the study. Rows come back in level order.
pub fn refine_study<F>(recipe: F, levels: &[usize], opts: &SolverOptions) -> Result<Vec<RefineRow>>
where
    F: Fn(usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> + Sync,
{
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("levels must be increasing".into()));
    }
    let run = |level: usize| {
        let t0 = Instant::now();
        let out = recipe(level).and_then(|(plus, minus)| design(&plus, &minus, opts));
        let runtime_s = t0.elapsed().as_secs_f64();
        match out {
            Ok(r) => RefineRow { level, energy: Some(r.energy), segment_count: r.segment_count, runtime_s, error: None },
            Err(e) => RefineRow { level, energy: None, segment_count: 0, runtime_s, error: Some(e.to_string()) },
        }
    };
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = levels.iter().map(|&l| s.spawn(move || run(l))).collect();
        handles.into_iter().map(|h| h.join().expect("design thread panicked")).collect()
    });
    Ok(rows)
}
