//! Convex order between discrete measures: martingale couplings found by
//! linear programming, convex witnesses when none exists, and the gluing of
//! two couplings into a three-marginal plan.

use serde::Serialize;

use crate::conic::{DenseLp, LpOutcome};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot, sub};
use crate::measures::{barycentre, data_diameter, Atom, DiscreteMeasure};
use crate::transport::{merge_points_labelled, Plan3, PlanCell};

/// Default relative tolerance for [`dominates`].
pub const DEFAULT_ORDER_TOL: f64 = 1e-6;
/// Largest number of `(source, target)` pairs the dominance LP will accept.
pub const MAX_DOMINANCE_PAIRS: usize = 250_000;
/// Largest number of LP rows (the simplex stores a dense basis inverse).
pub const MAX_DOMINANCE_ROWS: usize = 2_500;
pub const DEFAULT_MAX_ATOMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coupling {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// Coupling of a source measure with a target measure whose disintegrations
/// have barycentre at the source atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingalePlan {
    pub dim: usize,
    pub sources: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub entries: Vec<Coupling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleResiduals {
    /// Largest marginal mismatch, relative to the total mass.
    pub marginal: f64,
    /// Largest `|sum_k gamma_ik (z_k - x_i)|`, relative to `mass * (1 + diam)`.
    pub martingale: f64,
}

impl MartingalePlan {
    pub fn source_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sources.len()];
        for e in &self.entries {
            out[e.source] += e.mass;
        }
        out
    }

    pub fn target_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.targets.len()];
        for e in &self.entries {
            out[e.target] += e.mass;
        }
        out
    }

    /// Conditional law of the target given source atom `i`.
    pub fn disintegration(&self, i: usize) -> Vec<(usize, f64)> {
        let total: f64 = self.entries.iter().filter(|e| e.source == i).map(|e| e.mass).sum();
        self.entries.iter().filter(|e| e.source == i && total > 0.0).map(|e| (e.target, e.mass / total)).collect()
    }

    /// Residuals against the intended marginals, which must list the same
    /// atoms in the same order as `sources` and `targets`.
    pub fn residuals(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> MartingaleResiduals {
        let total = source.total_mass().max(target.total_mass());
        let mut marginal = 0.0f64;
        for (i, m) in self.source_masses().iter().enumerate() {
            marginal = marginal.max((m - source.weight(i)).abs());
        }
        for (k, m) in self.target_masses().iter().enumerate() {
            marginal = marginal.max((m - target.weight(k)).abs());
        }
        let mut moment = vec![vec![0.0; self.dim]; self.sources.len()];
        for e in &self.entries {
            let (x, z) = (&self.sources[e.source], &self.targets[e.target]);
            for t in 0..self.dim {
                moment[e.source][t] += e.mass * (z[t] - x[t]);
            }
        }
        let worst = moment.iter().map(|v| dot(v, v).sqrt()).fold(0.0f64, f64::max);
        let diam = data_diameter(source, target);
        MartingaleResiduals { marginal: marginal / total, martingale: worst / (total * (1.0 + diam)) }
    }

    pub fn is_valid(&self, source: &DiscreteMeasure, target: &DiscreteMeasure, tol: f64) -> bool {
        let r = self.residuals(source, target);
        r.marginal <= tol && r.martingale <= tol
    }
}

/// Convex piecewise-linear function `max_i (offset_i + <slope_i, z - anchor_i>)`
/// with smaller integral against the candidate dominant than against the source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexWitness {
    pub anchors: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub slopes: Vec<Vec<f64>>,
    /// Raw dual vector of the infeasible LP, empty for a mass mismatch.
    pub farkas: Vec<f64>,
    /// `integral against source - integral against candidate`, positive.
    pub gap: f64,
}

impl ConvexWitness {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.anchors
            .iter()
            .zip(&self.offsets)
            .zip(&self.slopes)
            .map(|((a, o), s)| o + dot(s, &sub(z, a)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values on the union of both supports, `(point, phi(point))`.
    pub fn on_support(&self, rho: &DiscreteMeasure, mu: &DiscreteMeasure) -> Vec<(Vec<f64>, f64)> {
        rho.points().chain(mu.points()).map(|p| (p.to_vec(), self.eval(p))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Dominance {
    Yes(MartingalePlan),
    No(ConvexWitness),
}

impl Dominance {
    pub fn is_yes(&self) -> bool {
        matches!(self, Dominance::Yes(_))
    }
}

/// Decides `rho >=_c mu`.
///
/// The LP carries an elastic slack on every martingale row and minimizes
/// the total slack, so a nearly feasible pair (as produced by a solver) is
/// accepted when the slack is below `tol * mass * (1 + diam)`, and the dual
/// of a clearly infeasible pair is the Farkas certificate.
pub fn dominates(rho: &DiscreteMeasure, mu: &DiscreteMeasure, tol: f64) -> Result<Dominance> {
    if rho.dim() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: rho.dim() });
    }
    if rho.is_empty() || mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let d = mu.dim();
    let (mr, mm) = (rho.total_mass(), mu.total_mass());
    if (mr - mm).abs() > tol * mr.max(mm) {
        let c = if mr > mm { -1.0 } else { 1.0 };
        return Ok(Dominance::No(ConvexWitness {
            anchors: vec![vec![0.0; d]],
            offsets: vec![c],
            slopes: vec![vec![0.0; d]],
            farkas: Vec::new(),
            gap: c * (mm - mr),
        }));
    }
    let (m, k) = (mu.len(), rho.len());
    let rows = m + k + m * d;
    if m * k > MAX_DOMINANCE_PAIRS || rows > MAX_DOMINANCE_ROWS {
        return Err(Error::GuardExceeded { size: (m * k).max(rows), limit: MAX_DOMINANCE_PAIRS });
    }
    // the target is rescaled to the source mass so the marginal rows are consistent
    let w_rho: Vec<f64> = rho.weights().map(|w| w * mm / mr).collect();
    let mut lp = DenseLp::new(rows);
    for i in 0..m {
        lp.rhs[i] = mu.weight(i);
    }
    for (t, w) in w_rho.iter().enumerate() {
        lp.rhs[m + t] = *w;
    }
    for i in 0..m {
        let x = mu.point(i);
        for t in 0..k {
            let z = rho.point(t);
            let mut col = vec![(i, 1.0), (m + t, 1.0)];
            for a in 0..d {
                let v = z[a] - x[a];
                if v != 0.0 {
                    col.push((m + k + i * d + a, v));
                }
            }
            lp.add_column(0.0, col);
        }
    }
    for r in m + k..rows {
        lp.add_column(1.0, vec![(r, 1.0)]);
        lp.add_column(1.0, vec![(r, -1.0)]);
    }
    let diam = data_diameter(rho, mu);
    let accept = tol * mm * (1.0 + diam);
    let duals = match lp.solve()? {
        LpOutcome::Optimal(sol) => {
            if sol.value <= accept {
                let entries = (0..m * k)
                    .filter(|c| sol.x[*c] > 0.0)
                    .map(|c| Coupling { source: c / k, target: c % k, mass: sol.x[c] })
                    .collect();
                return Ok(Dominance::Yes(MartingalePlan {
                    dim: d,
                    sources: mu.points().map(<[f64]>::to_vec).collect(),
                    targets: rho.points().map(<[f64]>::to_vec).collect(),
                    entries,
                }));
            }
            sol.duals
        }
        // the product coupling plus slack is always feasible
        LpOutcome::Infeasible { farkas, .. } => farkas,
        LpOutcome::Unbounded { .. } => return Err(Error::NumericalBreakdown("dominance LP reported unbounded".into())),
    };
    let anchors: Vec<Vec<f64>> = mu.points().map(<[f64]>::to_vec).collect();
    let offsets: Vec<f64> = duals[..m].to_vec();
    let slopes: Vec<Vec<f64>> = (0..m).map(|i| duals[m + k + i * d..m + k + (i + 1) * d].to_vec()).collect();
    let mut w = ConvexWitness { anchors, offsets, slopes, farkas: duals, gap: 0.0 };
    let on_mu: f64 = mu.integrate(|p| w.eval(p));
    let on_rho: f64 = rho.points().zip(&w_rho).map(|(p, wt)| wt * w.eval(p)).sum();
    w.gap = on_mu - on_rho;
    Ok(Dominance::No(w))
}

/// Builds a three-marginal plan from martingale couplings `mu -> rho` and
/// `nu -> rho` by conditional independence given the third coordinate.
pub fn glue(mu: &DiscreteMeasure, nu: &DiscreteMeasure, rho: &DiscreteMeasure, mt1: &MartingalePlan, mt2: &MartingalePlan) -> Result<Plan3> {
    let k = rho.len();
    if mt1.targets.len() != k || mt2.targets.len() != k {
        return Err(Error::Invalid("couplings do not share the target measure".into()));
    }
    if mt1.sources.len() != mu.len() || mt2.sources.len() != nu.len() {
        return Err(Error::Invalid("coupling sources do not match the marginals".into()));
    }
    let (c1, c2) = (mt1.target_masses(), mt2.target_masses());
    let mut by_target1: Vec<Vec<Coupling>> = vec![Vec::new(); k];
    let mut by_target2: Vec<Vec<Coupling>> = vec![Vec::new(); k];
    for e in &mt1.entries {
        by_target1[e.target].push(*e);
    }
    for e in &mt2.entries {
        by_target2[e.target].push(*e);
    }
    let mut cells = Vec::new();
    for t in 0..k {
        if c1[t] <= 0.0 || c2[t] <= 0.0 {
            return Err(Error::DisintegrationFailure(t));
        }
        let r = rho.weight(t);
        for a in &by_target1[t] {
            for b in &by_target2[t] {
                cells.push(PlanCell {
                    i: a.source,
                    j: b.source,
                    x: mu.point(a.source).to_vec(),
                    y: nu.point(b.source).to_vec(),
                    z: rho.point(t).to_vec(),
                    mass: r * (a.mass / c1[t]) * (b.mass / c2[t]),
                });
            }
        }
    }
    Ok(Plan3 { dim: mu.dim(), cells })
}

/// The two martingale couplings hidden in a plan: `(x, z)` and `(y, z)`
/// marginals, with `z` merged at `merge_tol` into the returned `rho`.
pub fn plan_couplings(plan: &Plan3, mu: &DiscreteMeasure, nu: &DiscreteMeasure, merge_tol: f64) -> (DiscreteMeasure, MartingalePlan, MartingalePlan) {
    let cells: Vec<&PlanCell> = plan.cells.iter().filter(|c| c.mass > 0.0).collect();
    let pts: Vec<(Vec<f64>, f64)> = cells.iter().map(|c| (c.z.clone(), c.mass)).collect();
    let (groups, labels) = merge_points_labelled(plan.dim, &pts, merge_tol);
    let targets: Vec<Vec<f64>> = groups.iter().map(|g| g.0.clone()).collect();
    let rho = DiscreteMeasure::new(plan.dim.max(1), groups.into_iter().map(|(x, w)| Atom { x, w }).collect())
        .expect("plan masses are positive");
    let side = |src: &DiscreteMeasure, idx: &dyn Fn(&PlanCell) -> usize| {
        let mut acc = std::collections::BTreeMap::new();
        for (c, &t) in cells.iter().zip(&labels) {
            *acc.entry((idx(c), t)).or_insert(0.0) += c.mass;
        }
        MartingalePlan {
            dim: plan.dim,
            sources: src.points().map(<[f64]>::to_vec).collect(),
            targets: targets.clone(),
            entries: acc.into_iter().map(|((s, t), mass)| Coupling { source: s, target: t, mass }).collect(),
        }
    };
    let mt1 = side(mu, &|c| c.i);
    let mt2 = side(nu, &|c| c.j);
    (rho, mt1, mt2)
}

/// The convolution `mu * nu` of two centred measures: a dominant of both with
/// variance `var mu + var nu`. Returns the measure and its variance.
pub fn minimal_variance_upper(mu: &DiscreteMeasure, nu: &DiscreteMeasure, max_atoms: usize) -> Result<(DiscreteMeasure, f64)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let tol = crate::measures::default_barycentre_tol(mu, nu);
    for (name, m) in [("mu", mu), ("nu", nu)] {
        let b = barycentre(m)?;
        if dist(&b, &vec![0.0; m.dim()]) > tol {
            return Err(Error::NotCentred(format!("{name} has barycentre {b:?}")));
        }
    }
    let size = mu.len() * nu.len();
    if size > max_atoms {
        return Err(Error::GuardExceeded { size, limit: max_atoms });
    }
    let nmass = nu.total_mass();
    let mut atoms = Vec::with_capacity(size);
    for a in mu.atoms() {
        for b in nu.atoms() {
            let x: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| p + q).collect();
            atoms.push(Atom { x, w: a.w * b.w / nmass });
        }
    }
    let rho = DiscreteMeasure::new(mu.dim(), atoms)?;
    let v = rho.variance()?;
    Ok((rho, v))
}
