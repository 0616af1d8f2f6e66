//! The discrete three-marginal problem: plans, potential jets and the
//! optimality certificate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conic::{solve_perspective, ConicSolution, PerspectiveProgram, SolverOptions, Status};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot, midpoint, norm};
use crate::measures::{default_barycentre_tol, validate_pair, Atom, CenteredPair, DiscreteMeasure};

/// `c(x, y, z) = (|z - x|^2 + |z - y|^2) / 2`
pub fn cost(x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        s += (z[k] - x[k]).powi(2) + (z[k] - y[k]).powi(2);
    }
    0.5 * s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCell {
    pub i: usize,
    pub j: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub mass: f64,
}

impl PlanCell {
    pub fn cost(&self) -> f64 {
        self.mass * cost(&self.x, &self.y, &self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan3 {
    pub dim: usize,
    pub cells: Vec<PlanCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanResiduals {
    pub marginal: f64,
    /// Largest `|sum mass (z - x_i)| / mu_i` over both sides.
    pub martingale: f64,
}

impl Plan3 {
    pub fn value(&self) -> f64 {
        self.cells.iter().map(PlanCell::cost).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    pub fn residuals(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> PlanResiduals {
        let d = self.dim;
        let mut mm: Vec<f64> = mu.weights().map(|w| -w).collect();
        let mut mn: Vec<f64> = nu.weights().map(|w| -w).collect();
        let mut tm = vec![vec![0.0; d]; mu.len()];
        let mut tn = vec![vec![0.0; d]; nu.len()];
        for c in &self.cells {
            mm[c.i] += c.mass;
            mn[c.j] += c.mass;
            for k in 0..d {
                tm[c.i][k] += c.mass * (c.z[k] - c.x[k]);
                tn[c.j][k] += c.mass * (c.z[k] - c.y[k]);
            }
        }
        let marginal = mm.iter().chain(&mn).fold(0.0f64, |a, v| a.max(v.abs()));
        let mart_mu = tm.iter().zip(mu.weights()).map(|(t, w)| norm(t) / w);
        let mart_nu = tn.iter().zip(nu.weights()).map(|(t, w)| norm(t) / w);
        let martingale = mart_mu.chain(mart_nu).fold(0.0f64, f64::max);
        PlanResiduals { marginal, martingale }
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        let sh = |p: &[f64]| p.iter().zip(t).map(|(a, b)| a + b).collect::<Vec<_>>();
        Self {
            dim: self.dim,
            cells: self
                .cells
                .iter()
                .map(|c| PlanCell { i: c.i, j: c.j, x: sh(&c.x), y: sh(&c.y), z: sh(&c.z), mass: c.mass })
                .collect(),
        }
    }

    pub fn scaled_mass(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.cells.iter_mut().for_each(|c| c.mass *= s);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub x: Vec<f64>,
    pub u: f64,
    pub grad: Vec<f64>,
}

/// Jets at the `mu` atoms followed by jets at the `nu` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetField {
    pub jets: Vec<Jet>,
    pub n_mu: usize,
}

impl JetField {
    pub fn from_parts(mu_jets: Vec<Jet>, nu_jets: Vec<Jet>) -> Self {
        let n_mu = mu_jets.len();
        let mut jets = mu_jets;
        jets.extend(nu_jets);
        Self { jets, n_mu }
    }

    pub fn mu_jet(&self, i: usize) -> &Jet {
        &self.jets[i]
    }

    pub fn nu_jet(&self, j: usize) -> &Jet {
        &self.jets[self.n_mu + j]
    }

    /// Jets of a given potential evaluated at the atoms of both measures.
    pub fn of_potential(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        u: impl Fn(&[f64]) -> f64,
        grad: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Self {
        let mk = |p: &[f64]| Jet { x: p.to_vec(), u: u(p), grad: grad(p) };
        Self::from_parts(mu.points().map(mk).collect(), nu.points().map(mk).collect())
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        let mut out = self.clone();
        for j in out.jets.iter_mut() {
            j.x.iter_mut().zip(t).for_each(|(a, b)| *a += b);
        }
        out
    }
}

/// `[u(y) + <U(y), z - y>] - [u(x) + <U(x), z - x>] - c(x, y, z)`
pub fn three_point_residual(jx: &Jet, jy: &Jet, z: &[f64]) -> f64 {
    let ly = jy.u + dot(&jy.grad, &crate::linalg::sub(z, &jy.x));
    let lx = jx.u + dot(&jx.grad, &crate::linalg::sub(z, &jx.x));
    ly - lx - cost(&jx.x, &jy.x, z)
}

/// Maximizer of the concave quadratic `z -> three_point_residual(jx, jy, z)`.
pub fn disintegration_point(jx: &Jet, jy: &Jet) -> Vec<f64> {
    (0..jx.x.len()).map(|k| 0.5 * (jx.x[k] + jy.x[k]) + 0.5 * (jy.grad[k] - jx.grad[k])).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// One entry per plan cell, in plan order.
    pub support_residuals: Vec<f64>,
    pub max_support_residual: f64,
    /// Largest residual over all `(i, j)` at the disintegration point.
    pub max_pair_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn check_certificate(plan: &Plan3, jets: &JetField, tol: f64) -> CertificateReport {
    let support_residuals: Vec<f64> = plan
        .cells
        .iter()
        .map(|c| three_point_residual(jets.mu_jet(c.i), jets.nu_jet(c.j), &c.z))
        .collect();
    let max_support_residual = support_residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let mut max_pair_residual = f64::NEG_INFINITY;
    for jx in &jets.jets[..jets.n_mu] {
        for jy in &jets.jets[jets.n_mu..] {
            let z = disintegration_point(jx, jy);
            max_pair_residual = max_pair_residual.max(three_point_residual(jx, jy, &z));
        }
    }
    let pass = max_support_residual <= tol && max_pair_residual <= tol;
    CertificateReport { support_residuals, max_support_residual, max_pair_residual, tol, pass }
}

/// Largest pairwise residual over all ordered pairs of jets.
pub fn max_jet_violation(jets: &JetField) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for a in &jets.jets {
        for b in &jets.jets {
            let z = disintegration_point(a, b);
            worst = worst.max(three_point_residual(a, b, &z));
        }
    }
    worst
}

/// Pairwise extendability test for a jet set.
pub fn check_jets(jets: &JetField, tol: f64) -> bool {
    max_jet_violation(jets) <= tol
}

pub fn scan_support_bound(plan: &Plan3, tol: f64) -> bool {
    plan.cells.iter().all(|c| dist(&c.z, &midpoint(&c.x, &c.y)) <= 0.5 * dist(&c.x, &c.y) + tol)
}

/// Merges points closer than `tol` by single linkage over a hash grid, at
/// mass-weighted positions.
pub fn merge_points(dim: usize, pts: &[(Vec<f64>, f64)], tol: f64) -> Vec<(Vec<f64>, f64)> {
    merge_points_labelled(dim, pts, tol).0
}

/// As [`merge_points`], also returning the group index of every input point.
pub fn merge_points_labelled(dim: usize, pts: &[(Vec<f64>, f64)], tol: f64) -> (Vec<(Vec<f64>, f64)>, Vec<usize>) {
    if pts.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let h = tol.max(f64::MIN_POSITIVE);
    let key = |p: &[f64]| p.iter().map(|v| (v / h).floor() as i64).collect::<Vec<_>>();
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (k, (p, _)) in pts.iter().enumerate() {
        grid.entry(key(p)).or_default().push(k);
    }
    // union-find over neighbouring grid cells
    let mut parent: Vec<usize> = (0..pts.len()).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(dim as u32))
        .map(|mut c| {
            (0..dim)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    for (k, (p, _)) in pts.iter().enumerate() {
        let base = key(p);
        for off in &offsets {
            let nb: Vec<i64> = base.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&nb) {
                for &l in list {
                    if l != k && dist(p, &pts[l].0) <= tol {
                        let (ra, rb) = (find(&mut parent, k), find(&mut parent, l));
                        if ra != rb {
                            parent[ra.max(rb)] = ra.min(rb);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        let r = find(&mut parent, k);
        let s = *slot.entry(r).or_insert_with(|| {
            groups.push((vec![0.0; dim], 0.0));
            groups.len() - 1
        });
        labels.push(s);
        let (p, w) = &pts[k];
        for t in 0..dim {
            groups[s].0[t] += w * p[t];
        }
        groups[s].1 += w;
    }
    for g in groups.iter_mut() {
        let w = g.1;
        g.0.iter_mut().for_each(|v| *v /= w);
    }
    (groups, labels)
}

/// Third marginal of the plan, with `z` points within `merge_tol` merged.
pub fn third_marginal(plan: &Plan3, merge_tol: f64) -> DiscreteMeasure {
    let pts: Vec<(Vec<f64>, f64)> = plan.cells.iter().filter(|c| c.mass > 0.0).map(|c| (c.z.clone(), c.mass)).collect();
    let atoms = merge_points(plan.dim, &pts, merge_tol).into_iter().map(|(x, w)| Atom { x, w }).collect();
    DiscreteMeasure::new(plan.dim.max(1), atoms).expect("plan masses are positive")
}

/// Default merge tolerance for third marginals: `1e-9` times the data diameter.
pub fn default_merge_tol(pair: &CenteredPair) -> f64 {
    1e-9 * pair.diameter().max(f64::MIN_POSITIVE)
}

/// Tolerance used to accept certificates: `1e-5 (1 + diam^2)`.
pub fn default_certificate_tol(pair: &CenteredPair) -> f64 {
    1e-5 * (1.0 + pair.diameter().powi(2))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThreeMarginalSolution {
    pub plan: Plan3,
    pub jets: JetField,
    pub value: f64,
    pub certificate: CertificateReport,
    pub status: Status,
    pub iterations: usize,
    pub primal_value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Mass of cells dropped below the support threshold.
    pub dropped_mass: f64,
}

const REPAIR_TOL: f64 = 1e-13;

/// Plan cells above the support threshold and the jets read off the duals.
pub fn extract(pair: &CenteredPair, sol: &ConicSolution, support_threshold: f64) -> (Plan3, JetField, f64) {
    let n = pair.nu.len();
    let gmax = sol.gamma.iter().copied().fold(0.0f64, f64::max);
    let thr = support_threshold * gmax;
    let mut cells: Vec<PlanCell> = Vec::new();
    let mut dropped = 0.0;
    for (c, (&g, m)) in sol.gamma.iter().zip(&sol.m).enumerate() {
        if g <= 0.0 {
            continue;
        }
        if g < thr {
            dropped += g;
            continue;
        }
        let (i, j) = (c / n, c % n);
        let z: Vec<f64> = m.iter().map(|v| v / g).collect();
        cells.push(PlanCell { i, j, x: pair.mu.point(i).to_vec(), y: pair.nu.point(j).to_vec(), z, mass: g });
    }
    let mu_jets: Vec<Jet> = (0..pair.mu.len())
        .map(|i| Jet { x: pair.mu.point(i).to_vec(), u: -sol.duals_a[i], grad: sol.duals_p[i].iter().map(|v| -v).collect() })
        .collect();
    let nu_jets: Vec<Jet> = (0..n)
        .map(|j| Jet { x: pair.nu.point(j).to_vec(), u: sol.duals_b[j], grad: sol.duals_q[j].clone() })
        .collect();
    let mut repaired = cells.clone();
    let res = repair_cells(pair, &mut repaired);
    if res > REPAIR_TOL {
        // the retained support cannot carry the constraints, typically because
        // slowly vanishing cells sit just above the threshold; drop the cells
        // whose jets show a duality slack and try again
        let slack_tol = 1e-3 * default_certificate_tol(pair);
        let (keep, off): (Vec<PlanCell>, Vec<PlanCell>) = cells.into_iter().partition(|c| {
            let (jx, jy) = (&mu_jets[c.i], &nu_jets[c.j]);
            three_point_residual(jx, jy, &disintegration_point(jx, jy)).abs() <= slack_tol
        });
        if !off.is_empty() {
            let mut trimmed = keep;
            if repair_cells(pair, &mut trimmed) < res {
                dropped += off.iter().map(|c| c.mass).sum::<f64>();
                repaired = trimmed;
            }
        }
    }
    let (mut mu_jets, mut nu_jets) = (mu_jets, nu_jets);
    if let Some((cells, mj, nj, removed)) = polish_support(pair, &repaired, &mu_jets, &nu_jets, 8) {
        repaired = cells;
        dropped += removed;
        mu_jets = mj;
        nu_jets = nj;
    }
    (Plan3 { dim: pair.dim(), cells: repaired }, JetField::from_parts(mu_jets, nu_jets), dropped)
}

/// Largest system handled by [`polish_support`].
const POLISH_MAX_ROWS: usize = 2500;

/// Newton refinement of the optimality system restricted to the support.
///
/// Unknowns are the jets and the relative cell masses, with `z` tied to the
/// jets through the disintegration point. Equations are the three-point
/// equalities on the support cells plus the marginal and martingale rows.
/// Interior-point iterates resolve `z` only to about the square root of the
/// gap, which matters for cells whose `z` sits on the boundary of the ball
/// around `[x, y]`. Returns `None` unless the system converges with positive
/// masses and the jets stay dual feasible on every pair. Cells that a full
/// step would empty are removed, up to `restarts` times.
fn polish_support(
    pair: &CenteredPair,
    cells: &[PlanCell],
    mu_jets: &[Jet],
    nu_jets: &[Jet],
    restarts: usize,
) -> Option<(Vec<PlanCell>, Vec<Jet>, Vec<Jet>, f64)> {
    let (nm, n, d) = (pair.mu.len(), pair.nu.len(), pair.dim());
    let g = d + 1;
    let ns = cells.len();
    let primal_rows = (nm + n - 1) * g;
    let rows = ns + primal_rows;
    let theta_len = (nm + n) * g;
    if ns == 0 || rows > POLISH_MAX_ROWS {
        return None;
    }
    let diam = pair.diameter();
    let scale = 1.0 + diam * diam;
    let mass_scale = pair.mu.total_mass() * (1.0 + diam);
    let mut theta = vec![0.0; theta_len];
    for (k, j) in mu_jets.iter().chain(nu_jets).enumerate() {
        theta[k * g] = j.u;
        theta[k * g + 1..(k + 1) * g].copy_from_slice(&j.grad);
    }
    let gamma0: Vec<f64> = cells.iter().map(|c| c.mass).collect();
    let mut rel = vec![0.0; ns];
    let jet_at = |theta: &[f64], k: usize, x: &[f64]| Jet { x: x.to_vec(), u: theta[k * g], grad: theta[k * g + 1..(k + 1) * g].to_vec() };
    let evaluate = |theta: &[f64], rel: &[f64]| {
        let mut f = vec![0.0; rows];
        let mut zs = Vec::with_capacity(ns);
        for i in 0..nm {
            f[ns + i * g] = -pair.mu.weight(i);
        }
        for j in 0..n - 1 {
            f[ns + (nm + j) * g] = -pair.nu.weight(j);
        }
        for (c, cell) in cells.iter().enumerate() {
            let jx = jet_at(theta, cell.i, &cell.x);
            let jy = jet_at(theta, nm + cell.j, &cell.y);
            let z = disintegration_point(&jx, &jy);
            f[c] = three_point_residual(&jx, &jy, &z);
            let gamma = gamma0[c] * (1.0 + rel[c]);
            for (grp, p) in [(cell.i, &cell.x), (nm + cell.j, &cell.y)] {
                if grp * g < primal_rows {
                    f[ns + grp * g] += gamma;
                    for k in 0..d {
                        f[ns + grp * g + 1 + k] += gamma * (z[k] - p[k]);
                    }
                }
            }
            zs.push(z);
        }
        (f, zs)
    };
    let norm_f = |f: &[f64]| {
        let dual = f[..ns].iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
        let primal = f[ns..].iter().fold(0.0f64, |a, v| a.max(v.abs())) / mass_scale;
        dual.max(primal)
    };
    let (mut f, mut zs) = evaluate(&theta, &rel);
    let mut res = norm_f(&f);
    for _ in 0..30 {
        if res <= 1e-15 {
            break;
        }
        // sparse columns of the Jacobian: (row, value)
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); theta_len + ns];
        for (c, cell) in cells.iter().enumerate() {
            let z = &zs[c];
            let (ox, oy) = (cell.i * g, (nm + cell.j) * g);
            cols[oy].push((c, 1.0));
            cols[ox].push((c, -1.0));
            for k in 0..d {
                cols[oy + 1 + k].push((c, z[k] - cell.y[k]));
                cols[ox + 1 + k].push((c, -(z[k] - cell.x[k])));
            }
            let gamma = gamma0[c] * (1.0 + rel[c]);
            for (grp, p) in [(cell.i, &cell.x), (nm + cell.j, &cell.y)] {
                if grp * g >= primal_rows {
                    continue;
                }
                let base = ns + grp * g;
                cols[theta_len + c].push((base, gamma0[c]));
                for k in 0..d {
                    cols[theta_len + c].push((base + 1 + k, gamma0[c] * (z[k] - p[k])));
                    // z moves with half the gradient difference
                    cols[oy + 1 + k].push((base + 1 + k, 0.5 * gamma));
                    cols[ox + 1 + k].push((base + 1 + k, -0.5 * gamma));
                }
            }
        }
        let mut jt = vec![vec![0.0; theta_len + ns]; rows];
        for (k, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                jt[r][k] += v;
            }
        }
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let (step, _) = crate::linalg::min_norm_solve(jt, &neg_f, 1e-13);
        let trial_rel: Vec<f64> = rel.iter().zip(&step[theta_len..]).map(|(a, b)| a + b).collect();
        if trial_rel.iter().any(|r| !(*r > -1.0)) {
            // the step leaves the support: drop the vanishing cells, restart
            if restarts == 0 {
                return None;
            }
            let mut kept = Vec::with_capacity(ns);
            let mut removed = 0.0;
            for (c, cell) in cells.iter().enumerate() {
                let mass = gamma0[c] * (1.0 + rel[c]);
                if trial_rel[c] > -1.0 {
                    kept.push(PlanCell { z: zs[c].clone(), mass, ..cell.clone() });
                } else {
                    removed += mass;
                }
            }
            let mj: Vec<Jet> = (0..nm).map(|i| jet_at(&theta, i, pair.mu.point(i))).collect();
            let nj: Vec<Jet> = (0..n).map(|j| jet_at(&theta, nm + j, pair.nu.point(j))).collect();
            return polish_support(pair, &kept, &mj, &nj, restarts - 1).map(|(c, a, b, r)| (c, a, b, r + removed));
        }
        let mut alpha = 1.0;
        let accepted = loop {
            let th: Vec<f64> = theta.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            let re: Vec<f64> = rel.iter().zip(&step[theta_len..]).map(|(a, b)| a + alpha * b).collect();
            let (tf, tz) = evaluate(&th, &re);
            let tres = norm_f(&tf);
            if tres < res {
                break Some((th, re, tf, tz, tres));
            }
            alpha *= 0.5;
            if alpha < 1e-3 {
                break None;
            }
        };
        let Some(next) = accepted else { break };
        (theta, rel, f, zs, res) = next;
    }
    if res > REPAIR_TOL {
        return None;
    }
    let mj: Vec<Jet> = (0..nm).map(|i| jet_at(&theta, i, pair.mu.point(i))).collect();
    let nj: Vec<Jet> = (0..n).map(|j| jet_at(&theta, nm + j, pair.nu.point(j))).collect();
    let tol = default_certificate_tol(pair);
    for jx in &mj {
        for jy in &nj {
            if three_point_residual(jx, jy, &disintegration_point(jx, jy)) > 0.5 * tol {
                return None;
            }
        }
    }
    let out = cells
        .iter()
        .zip(zs)
        .zip(&rel)
        .zip(&gamma0)
        .map(|(((c, z), r), g0)| PlanCell { z, mass: g0 * (1.0 + r), ..c.clone() })
        .collect();
    Some((out, mj, nj, 0.0))
}

/// Moves the retained `(gamma, gamma z)` onto the marginal and martingale
/// constraints by a `gamma^2`-weighted least-squares correction, so that
/// large, well-resolved cells absorb it. Dropping cells
/// below the support threshold otherwise leaves residuals of the size of the
/// dropped mass. The correction is skipped if it would make a mass
/// non-positive. Returns the final residual relative to `mass (1 + diam)`;
/// the cells are left at the best iterate seen.
fn repair_cells(pair: &CenteredPair, cells: &mut Vec<PlanCell>) -> f64 {
    let (nm, n, d) = (pair.mu.len(), pair.nu.len(), pair.dim());
    let g = d + 1;
    // the last nu group is implied by the others
    let rows = (nm + n - 1) * g;
    if cells.is_empty() || rows == 0 {
        return 0.0;
    }
    fn groups(c: &PlanCell, nm: usize) -> [(usize, &[f64]); 2] {
        [(c.i, &c.x), (nm + c.j, &c.y)]
    }
    let top = cells.iter().map(|c| c.mass).fold(0.0, f64::max);
    let weight = |c: &PlanCell| (c.mass / top).powi(2);
    let weights: Vec<f64> = cells.iter().map(weight).collect();
    let scale = pair.mu.total_mass() * (1.0 + pair.diameter());
    let mut best = (f64::INFINITY, cells.clone());
    for round in 0..4 {
        let mut r = vec![0.0; rows];
        for i in 0..nm {
            r[i * g] = pair.mu.weight(i);
        }
        for j in 0..n - 1 {
            r[(nm + j) * g] = pair.nu.weight(j);
        }
        for c in cells.iter() {
            for (grp, p) in groups(c, nm) {
                if grp * g < rows {
                    r[grp * g] -= c.mass;
                    for k in 0..d {
                        r[grp * g + 1 + k] -= c.mass * (c.z[k] - p[k]);
                    }
                }
            }
        }
        let res = r.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
        if res < best.0 {
            best = (res, cells.clone());
        }
        if res <= 1e-15 || round == 3 {
            break;
        }
        // cell variables (gamma, m); row block of a group is [gamma; m - gamma p]
        let block = |p: &[f64]| {
            let mut b = vec![0.0; g * g];
            b[0] = 1.0;
            for k in 0..d {
                b[(1 + k) * g] = -p[k];
                b[(1 + k) * g + 1 + k] = 1.0;
            }
            b
        };
        let mut normal = vec![0.0; rows * rows];
        let blocks: Vec<[(usize, Vec<f64>); 2]> = cells
            .iter()
            .map(|c| {
                let [(ga, pa), (gb, pb)] = groups(c, nm);
                [(ga, block(pa)), (gb, block(pb))]
            })
            .collect();
        for (w, bl) in weights.iter().zip(&blocks) {
            for (ga, ba) in bl {
                for (gb, bb) in bl {
                    if ga * g >= rows || gb * g >= rows {
                        continue;
                    }
                    for s in 0..g {
                        for t in 0..g {
                            let v: f64 = (0..g).map(|k| ba[s * g + k] * bb[t * g + k]).sum();
                            normal[(ga * g + s) * rows + gb * g + t] += *w * v;
                        }
                    }
                }
            }
        }
        let Ok(ch) = crate::linalg::Cholesky::factor(normal, rows, 1e-13) else { break };
        let y = ch.solve(&r);
        let mut updated: Vec<(f64, Vec<f64>)> = Vec::with_capacity(cells.len());
        for ((c, bl), w) in cells.iter().zip(&blocks).zip(&weights) {
            let mut delta = vec![0.0; g];
            for (grp, b) in bl {
                if grp * g >= rows {
                    continue;
                }
                for k in 0..g {
                    delta[k] += w * (0..g).map(|s| b[s * g + k] * y[grp * g + s]).sum::<f64>();
                }
            }
            let gamma = c.mass + delta[0];
            let z = (0..d).map(|k| (c.mass * c.z[k] + delta[1 + k]) / gamma).collect();
            updated.push((gamma, z));
        }
        if updated.iter().any(|(gamma, _)| !(*gamma > 0.0)) {
            break;
        }
        for (c, (gamma, z)) in cells.iter_mut().zip(updated) {
            c.mass = gamma;
            c.z = z;
        }
    }
    *cells = best.1;
    best.0
}

/// Solves the discrete problem on a validated pair and certifies the result.
pub fn solve_three_marginal(pair: &CenteredPair, opts: &SolverOptions) -> Result<ThreeMarginalSolution> {
    let program = PerspectiveProgram::from_pair(pair);
    let sol = solve_perspective(&program, opts)?;
    match sol.status {
        Status::Optimal => {}
        Status::MaxIters => {
            return Err(Error::MaxIters { iters: sol.iterations, residual: sol.primal_residual.max(sol.dual_residual) })
        }
        Status::Infeasible => return Err(Error::Infeasible("perspective program has no feasible point".into())),
    }
    let (plan, jets, dropped_mass) = extract(pair, &sol, opts.support_threshold);
    let certificate = check_certificate(&plan, &jets, default_certificate_tol(pair));
    if !certificate.pass {
        return Err(Error::CertificateFailure {
            max_residual: certificate.max_support_residual.max(certificate.max_pair_residual),
            tol: certificate.tol,
        });
    }
    Ok(ThreeMarginalSolution {
        value: plan.value(),
        plan,
        jets,
        certificate,
        status: sol.status,
        iterations: sol.iterations,
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        dropped_mass,
    })
}

/// Validates with the default barycentre tolerance, then solves.
pub fn solve_measures(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &SolverOptions) -> Result<(CenteredPair, ThreeMarginalSolution)> {
    let pair = validate_pair(mu, nu, default_barycentre_tol(mu, nu))?;
    let sol = solve_three_marginal(&pair, opts)?;
    Ok((pair, sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> DiscreteMeasure {
        DiscreteMeasure::from_points(
            vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]],
            vec![0.25; 4],
        )
        .unwrap()
    }

    fn half_u(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> JetField {
        JetField::of_potential(mu, nu, |p| 0.5 * dot(p, p), |p| p.to_vec())
    }

    #[test]
    fn dirac_to_square() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let (pair, sol) = solve_measures(&mu, &square(), &SolverOptions::default()).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-7);
        for c in &sol.plan.cells {
            assert!(dist(&c.z, &c.y) < 1e-5);
        }
        let r = sol.plan.residuals(&pair.mu, &pair.nu);
        assert!(r.marginal < 1e-7 && r.martingale < 1e-6);
    }

    #[test]
    fn identical_measures_have_zero_value() {
        let nu = square();
        let (_, sol) = solve_measures(&nu, &nu, &SolverOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-7);
    }

    #[test]
    fn ordered_certificate_is_exact() {
        // u = |x|^2/2 with z = y: residual is algebraically zero
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = square();
        let jets = half_u(&mu, &nu);
        let plan = Plan3 {
            dim: 2,
            cells: (0..4)
                .map(|j| PlanCell { i: 0, j, x: vec![0.0, 0.0], y: nu.point(j).to_vec(), z: nu.point(j).to_vec(), mass: 0.25 })
                .collect(),
        };
        let rep = check_certificate(&plan, &jets, 1e-9);
        assert!(rep.pass && rep.max_support_residual <= 1e-12);

        let mut bad = plan.clone();
        bad.cells[0].z[0] += 0.1;
        let rep = check_certificate(&bad, &jets, 1e-9);
        assert!(!rep.pass);
        assert!((rep.support_residuals[0] + 0.01).abs() < 1e-12);

        let zero = JetField::of_potential(&mu, &nu, |_| 0.0, |p| vec![0.0; p.len()]);
        assert!(!check_certificate(&plan, &zero, 1e-9).pass);
    }

    #[test]
    fn jet_checks() {
        let pts = DiscreteMeasure::from_points(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let good = JetField::of_potential(&pts, &pts, |p| 0.5 * dot(p, p), |p| p.to_vec());
        assert!(check_jets(&good, 1e-12));
        let steep = JetField::of_potential(&pts, &pts, |p| dot(p, p), |p| p.iter().map(|v| 2.0 * v).collect());
        // pair (0, e1): z* = 1.5 e1, residual 1 + 1 - 1.25 = 0.75
        assert!((max_jet_violation(&steep) - 0.75).abs() < 1e-12);
        assert!(!check_jets(&steep, 1e-9));
        let single = JetField { jets: vec![Jet { x: vec![0.0, 0.0], u: 3.0, grad: vec![1.0, 2.0] }], n_mu: 1 };
        assert!(check_jets(&single, 0.0));
    }

    #[test]
    fn support_bound_scan() {
        let cell = |z: Vec<f64>| Plan3 {
            dim: 2,
            cells: vec![PlanCell { i: 0, j: 0, x: vec![0.0, 0.0], y: vec![1.0, 0.0], z, mass: 1.0 }],
        };
        assert!(scan_support_bound(&cell(vec![1.0, 0.0]), 1e-12));
        assert!(!scan_support_bound(&cell(vec![2.0, 0.0]), 1e-9));
    }

    #[test]
    fn third_marginal_merges_noise() {
        let mk = |z: Vec<f64>, m: f64| PlanCell { i: 0, j: 0, x: vec![0.0], y: vec![0.0], z, mass: m };
        let plan = Plan3 { dim: 1, cells: vec![mk(vec![1.0], 1.0), mk(vec![1.0 + 1e-12], 1.0), mk(vec![2.0], 1.0)] };
        let rho = third_marginal(&plan, 1e-9);
        assert_eq!(rho.len(), 2);
        assert_eq!(rho.total_mass(), 3.0);
        let dirac = Plan3 { dim: 2, cells: vec![PlanCell { i: 0, j: 0, x: vec![0.0; 2], y: vec![0.0; 2], z: vec![0.0; 2], mass: 1.0 }] };
        assert_eq!(third_marginal(&dirac, 1e-9), DiscreteMeasure::dirac(vec![0.0, 0.0]));
    }
}
