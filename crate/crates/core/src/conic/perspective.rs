//! Interior-point solver for the discrete three-marginal program.
//!
//! With `w = (x+y)/2`, `kappa = |x-y|^2/4` and `v = m - gamma w`, the cell
//! cost `gamma c(x, y, m/gamma)` equals `kappa gamma + |v|^2/gamma`. Writing
//! `gamma = z0 - z1`, `tau = z0 + z1`, `v = zv` turns the epigraph
//! `tau gamma >= |v|^2` into the standard cone `z0 >= |(z1, zv)|`, so the
//! whole problem is a linear objective over a product of cones of size
//! `d + 2`, one per cell. The `gamma = 0` face is part of the cone and is
//! never divided by.
//!
//! The equality rows are grouped per atom as (marginal, martingale_1..d).
//! They carry a `1 + d` dimensional dependency (total mass and barycentre);
//! the group of the last `nu` atom is dropped, which pins the dual gauge to
//! `u = 0`, `grad u = 0` at that atom.

use crate::conic::cone::{jordan_div, jordan_prod, max_step, min_eig, NtScaling};
use crate::conic::{ConicSolution, IterRecord, SolverOptions, Status};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Cholesky};
use crate::measures::CenteredPair;

/// Problem data: cells are all pairs `(i, j)` of a `mu` atom and a `nu` atom.
#[derive(Debug, Clone)]
pub struct PerspectiveProgram {
    pub dim: usize,
    pub xs: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
}

impl PerspectiveProgram {
    pub fn new(xs: Vec<Vec<f64>>, mu: Vec<f64>, ys: Vec<Vec<f64>>, nu: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || ys.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if xs.len() != mu.len() || ys.len() != nu.len() {
            return Err(Error::Invalid("points and weights differ in length".into()));
        }
        let dim = xs[0].len();
        for p in xs.iter().chain(&ys) {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
        }
        Ok(Self { dim, xs, mu, ys, nu })
    }

    pub fn from_pair(pair: &CenteredPair) -> Self {
        Self {
            dim: pair.dim(),
            xs: pair.mu.points().map(|p| p.to_vec()).collect(),
            mu: pair.mu.weights().collect(),
            ys: pair.nu.points().map(|p| p.to_vec()).collect(),
            nu: pair.nu.weights().collect(),
        }
    }

    pub fn num_cells(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    /// Perspective cost of one cell; 0 at `(0, 0)` and infinite at `(0, m != 0)`.
    pub fn cell_cost(&self, i: usize, j: usize, gamma: f64, m: &[f64]) -> f64 {
        let (x, y) = (&self.xs[i], &self.ys[j]);
        if gamma <= 0.0 {
            return if m.iter().all(|v| *v == 0.0) { 0.0 } else { f64::INFINITY };
        }
        let mut s = 0.0;
        for k in 0..self.dim {
            s += (m[k] - gamma * x[k]).powi(2) + (m[k] - gamma * y[k]).powi(2);
        }
        0.5 * s / gamma
    }

    pub fn objective(&self, gamma: &[f64], m: &[Vec<f64>]) -> f64 {
        let n = self.ys.len();
        (0..self.num_cells()).map(|c| self.cell_cost(c / n, c % n, gamma[c], &m[c])).sum()
    }

    /// Max-norm of the marginal and martingale residuals, in that order.
    pub fn residuals(&self, gamma: &[f64], m: &[Vec<f64>]) -> (f64, f64) {
        let (nm, n, d) = (self.xs.len(), self.ys.len(), self.dim);
        let mut marg_mu = self.mu.iter().map(|w| -w).collect::<Vec<_>>();
        let mut marg_nu = self.nu.iter().map(|w| -w).collect::<Vec<_>>();
        let mut mart_mu = vec![vec![0.0; d]; nm];
        let mut mart_nu = vec![vec![0.0; d]; n];
        for i in 0..nm {
            for j in 0..n {
                let c = i * n + j;
                marg_mu[i] += gamma[c];
                marg_nu[j] += gamma[c];
                for k in 0..d {
                    mart_mu[i][k] += m[c][k] - gamma[c] * self.xs[i][k];
                    mart_nu[j][k] += m[c][k] - gamma[c] * self.ys[j][k];
                }
            }
        }
        let marg = marg_mu.iter().chain(&marg_nu).fold(0.0f64, |a, v| a.max(v.abs()));
        let mart = mart_mu.iter().chain(&mart_nu).flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        (marg, mart)
    }
}

/// Scaled problem and the block structure of its normal equations.
struct Ipm {
    nm: usize,
    n: usize,
    d: usize,
    q: usize,
    g: usize,
    /// `(y_j - x_i)/2` per cell, scaled coordinates.
    half_delta: Vec<f64>,
    c: Vec<f64>,
    b: Vec<f64>,
    ny: usize,
    elim_mu: bool,
}

/// Cholesky factors of the block-eliminated normal matrix.
struct NormalFactor {
    diag: Vec<Cholesky>,
    /// Block row `e` of the coupling matrix, `g x (kept * g)` row-major.
    coupling: Vec<Vec<f64>>,
    schur: Option<Cholesky>,
    kept_len: usize,
}

impl Ipm {
    fn new(p: &PerspectiveProgram, scale: f64) -> Self {
        let (nm, n, d) = (p.xs.len(), p.ys.len(), p.dim);
        let (q, g) = (d + 2, d + 1);
        let mut half_delta = vec![0.0; nm * n * d];
        let mut c = vec![0.0; nm * n * q];
        for i in 0..nm {
            for j in 0..n {
                let cell = i * n + j;
                let mut kappa = 0.0;
                for k in 0..d {
                    let hd = 0.5 * (p.ys[j][k] - p.xs[i][k]) / scale;
                    half_delta[cell * d + k] = hd;
                    kappa += hd * hd;
                }
                c[cell * q] = kappa + 1.0;
                c[cell * q + 1] = 1.0 - kappa;
            }
        }
        let ny = (nm + n - 1) * g;
        let mut b = vec![0.0; ny];
        for i in 0..nm {
            b[i * g] = p.mu[i];
        }
        for j in 0..n - 1 {
            b[(nm + j) * g] = p.nu[j];
        }
        Self { nm, n, d, q, g, half_delta, c, b, ny, elim_mu: nm >= n - 1 }
    }

    fn cells(&self) -> usize {
        self.nm * self.n
    }

    fn group_nu(&self, j: usize) -> Option<usize> {
        (j + 1 < self.n).then(|| (self.nm + j) * self.g)
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        let (d, q, g) = (self.d, self.q, self.g);
        let mut out = vec![0.0; self.ny];
        for i in 0..self.nm {
            for j in 0..self.n {
                let cell = i * self.n + j;
                let xc = &x[cell * q..cell * q + q];
                let hd = &self.half_delta[cell * d..cell * d + d];
                let gamma = xc[0] - xc[1];
                let gi = i * g;
                out[gi] += gamma;
                for k in 0..d {
                    out[gi + 1 + k] += hd[k] * gamma + xc[2 + k];
                }
                if let Some(gj) = self.group_nu(j) {
                    out[gj] += gamma;
                    for k in 0..d {
                        out[gj + 1 + k] += -hd[k] * gamma + xc[2 + k];
                    }
                }
            }
        }
        out
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let (d, q, g) = (self.d, self.q, self.g);
        let mut out = vec![0.0; self.cells() * q];
        let zero = vec![0.0; g];
        for i in 0..self.nm {
            let yi = &y[i * g..i * g + g];
            for j in 0..self.n {
                let cell = i * self.n + j;
                let yj = match self.group_nu(j) {
                    Some(gj) => &y[gj..gj + g],
                    None => &zero[..],
                };
                let hd = &self.half_delta[cell * d..cell * d + d];
                let t = yi[0] + yj[0] + dot(hd, &yi[1..]) - dot(hd, &yj[1..]);
                let oc = &mut out[cell * q..cell * q + q];
                oc[0] = t;
                oc[1] = -t;
                for k in 0..d {
                    oc[2 + k] = yi[1 + k] + yj[1 + k];
                }
            }
        }
        out
    }

    /// `T G T_b'` with `T = [[1, 0], [ta, I]]`, `T_b = [[1, 0], [tb, I]]`.
    fn congruence(g: usize, gm: &[f64], ta: &[f64], tb: &[f64], out: &mut [f64]) {
        let mut tg = gm.to_vec();
        for r in 1..g {
            for col in 0..g {
                tg[r * g + col] += ta[r - 1] * gm[col];
            }
        }
        for r in 0..g {
            let base = tg[r * g];
            out[r * g] = base;
            for l in 1..g {
                out[r * g + l] = tb[l - 1] * base + tg[r * g + l];
            }
        }
    }

    fn factor_normal(&self, h: &[f64]) -> Result<NormalFactor> {
        let (d, q, g) = (self.d, self.q, self.g);
        let (n_elim, n_kept) = if self.elim_mu { (self.nm, self.n - 1) } else { (self.n - 1, self.nm) };
        let kept_len = n_kept * g;
        let mut diag_e = vec![vec![0.0; g * g]; n_elim];
        let mut coupling = vec![vec![0.0; g * kept_len]; n_elim];
        let mut schur = vec![0.0; kept_len * kept_len];
        let mut gm = vec![0.0; g * g];
        let mut rm = vec![0.0; g * q];
        let mut blk = vec![0.0; g * g];
        let mut neg = vec![0.0; d];
        for i in 0..self.nm {
            for j in 0..self.n {
                let cell = i * self.n + j;
                // G = (B W^{-1})(B W^{-1})' with B = [[1, -1, 0], [0, 0, I]]
                let wc = &h[cell * q * q..(cell + 1) * q * q];
                for t in 0..q {
                    rm[t] = wc[t] - wc[q + t];
                }
                for k in 0..d {
                    rm[(1 + k) * q..(2 + k) * q].copy_from_slice(&wc[(2 + k) * q..(3 + k) * q]);
                }
                for a in 0..g {
                    for b2 in 0..=a {
                        let v = dot(&rm[a * q..a * q + q], &rm[b2 * q..b2 * q + q]);
                        gm[a * g + b2] = v;
                        gm[b2 * g + a] = v;
                    }
                }
                let hd = &self.half_delta[cell * d..cell * d + d];
                for k in 0..d {
                    neg[k] = -hd[k];
                }
                // mu group with itself
                Self::congruence(g, &gm, hd, hd, &mut blk);
                if self.elim_mu {
                    add_block(&mut diag_e[i], &blk);
                } else {
                    add_into(&mut schur, kept_len, i * g, i * g, g, &blk);
                }
                if j + 1 == self.n {
                    continue;
                }
                Self::congruence(g, &gm, &neg, &neg, &mut blk);
                if self.elim_mu {
                    add_into(&mut schur, kept_len, j * g, j * g, g, &blk);
                } else {
                    add_block(&mut diag_e[j], &blk);
                }
                if self.elim_mu {
                    Self::congruence(g, &gm, hd, &neg, &mut blk);
                    add_into(&mut coupling[i], kept_len, 0, j * g, g, &blk);
                } else {
                    Self::congruence(g, &gm, &neg, hd, &mut blk);
                    add_into(&mut coupling[j], kept_len, 0, i * g, g, &blk);
                }
            }
        }
        let mut diag = Vec::with_capacity(n_elim);
        let mut fwork = vec![0.0; g * kept_len];
        let mut col = vec![0.0; g];
        for e in 0..n_elim {
            let ch = Cholesky::factor(diag_e[e].clone(), g, 1e-14)?;
            // F = D^{-1} C_e, then S -= C_e' F
            let ce = &coupling[e];
            for colj in 0..kept_len {
                for t in 0..g {
                    col[t] = ce[t * kept_len + colj];
                }
                ch.solve_in_place(&mut col);
                for t in 0..g {
                    fwork[t * kept_len + colj] = col[t];
                }
            }
            for r in 0..kept_len {
                let srow = &mut schur[r * kept_len..r * kept_len + r + 1];
                for t in 0..g {
                    let crt = ce[t * kept_len + r];
                    if crt == 0.0 {
                        continue;
                    }
                    let frow = &fwork[t * kept_len..t * kept_len + r + 1];
                    for (s, f) in srow.iter_mut().zip(frow) {
                        *s -= crt * f;
                    }
                }
            }
            diag.push(ch);
        }
        for r in 0..kept_len {
            for c2 in 0..r {
                schur[c2 * kept_len + r] = schur[r * kept_len + c2];
            }
        }
        let schur = if kept_len > 0 { Some(Cholesky::factor(schur, kept_len, 1e-15)?) } else { None };
        Ok(NormalFactor { diag, coupling, schur, kept_len })
    }

    fn solve_normal(&self, f: &NormalFactor, rhs: &[f64]) -> Vec<f64> {
        let g = self.g;
        let (elim_off, kept_off) = if self.elim_mu { (0, self.nm * g) } else { (self.nm * g, 0) };
        let kl = f.kept_len;
        let mut rk = rhs[kept_off..kept_off + kl].to_vec();
        let mut de_re: Vec<Vec<f64>> = Vec::with_capacity(f.diag.len());
        for (e, ch) in f.diag.iter().enumerate() {
            let re = ch.solve(&rhs[elim_off + e * g..elim_off + e * g + g]);
            let ce = &f.coupling[e];
            for t in 0..g {
                let row = &ce[t * kl..t * kl + kl];
                for (r, cv) in rk.iter_mut().zip(row) {
                    *r -= cv * re[t];
                }
            }
            de_re.push(re);
        }
        if let Some(s) = &f.schur {
            s.solve_in_place(&mut rk);
        }
        let mut out = vec![0.0; self.ny];
        out[kept_off..kept_off + kl].copy_from_slice(&rk);
        for (e, ch) in f.diag.iter().enumerate() {
            let ce = &f.coupling[e];
            let mut r: Vec<f64> = (0..g)
                .map(|t| rhs[elim_off + e * g + t] - dot(&ce[t * kl..t * kl + kl], &rk))
                .collect();
            ch.solve_in_place(&mut r);
            out[elim_off + e * g..elim_off + e * g + g].copy_from_slice(&r);
        }
        out
    }

    /// `W^{-2} v` with `h` holding the per-cell `W^{-1}`.
    fn h_mul(&self, h: &[f64], v: &[f64]) -> Vec<f64> {
        let q = self.q;
        let mut out = vec![0.0; v.len()];
        let mut t = vec![0.0; q];
        for cell in 0..self.cells() {
            let hc = &h[cell * q * q..(cell + 1) * q * q];
            let vc = &v[cell * q..cell * q + q];
            for r in 0..q {
                t[r] = dot(&hc[r * q..r * q + q], vc);
            }
            for r in 0..q {
                out[cell * q + r] = dot(&hc[r * q..r * q + q], &t);
            }
        }
        out
    }

    /// Solves `A H A' dy = rhs` with two rounds of iterative refinement.
    fn solve_refined(&self, f: &NormalFactor, h: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut y = self.solve_normal(f, rhs);
        for _ in 0..2 {
            let ay = self.a_mul(&self.h_mul(h, &self.at_mul(&y)));
            let res: Vec<f64> = rhs.iter().zip(&ay).map(|(r, a)| r - a).collect();
            let corr = self.solve_normal(f, &res);
            for (yv, cv) in y.iter_mut().zip(&corr) {
                *yv += cv;
            }
        }
        y
    }
}

fn add_block(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

fn add_into(dst: &mut [f64], ld: usize, r0: usize, c0: usize, g: usize, blk: &[f64]) {
    for r in 0..g {
        for c in 0..g {
            dst[(r0 + r) * ld + c0 + c] += blk[r * g + c];
        }
    }
}

fn shift_into_cone(v: &mut [f64], q: usize) {
    let worst = v.chunks(q).map(|c| -min_eig(c)).fold(f64::NEG_INFINITY, f64::max);
    if worst >= 0.0 {
        for c in v.chunks_mut(q) {
            c[0] += 1.0 + worst;
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

struct Scalings {
    nt: Vec<NtScaling>,
    lambda: Vec<f64>,
    h: Vec<f64>,
}

fn scalings(x: &[f64], s: &[f64], q: usize) -> Scalings {
    let cells = x.len() / q;
    let mut nt = Vec::with_capacity(cells);
    let mut lambda = vec![0.0; x.len()];
    let mut h = vec![0.0; cells * q * q];
    for c in 0..cells {
        let sc = NtScaling::new(&x[c * q..c * q + q], &s[c * q..c * q + q]);
        sc.apply(&x[c * q..c * q + q], &mut lambda[c * q..c * q + q]);
        h[c * q * q..(c + 1) * q * q].copy_from_slice(&sc.inv_dense());
        nt.push(sc);
    }
    Scalings { nt, lambda, h }
}

fn moment_mismatch(p: &PerspectiveProgram) -> f64 {
    let mass = (p.mu.iter().sum::<f64>() - p.nu.iter().sum::<f64>()).abs();
    let mut bar = vec![0.0; p.dim];
    for (x, w) in p.xs.iter().zip(&p.mu) {
        for k in 0..p.dim {
            bar[k] += w * x[k];
        }
    }
    for (y, w) in p.ys.iter().zip(&p.nu) {
        for k in 0..p.dim {
            bar[k] -= w * y[k];
        }
    }
    mass.max(norm(&bar))
}

/// Minimizes the perspective cost over the marginal and martingale rows.
///
/// Returns `Ok` with `status` set to `MaxIters` or `Infeasible` when the
/// method does not certify optimality; the best iterate is reported then.
const POLISH: f64 = 1e-2;
const POLISH_ITERS: usize = 12;

pub fn solve_perspective(p: &PerspectiveProgram, opts: &SolverOptions) -> Result<ConicSolution> {
    let scale = p.xs.iter().chain(&p.ys).map(|v| norm(v)).fold(0.0f64, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let total: f64 = p.mu.iter().sum::<f64>().max(p.nu.iter().sum::<f64>());
    if moment_mismatch(p) > 1e-6 * total * (1.0 + scale) {
        return Ok(infeasible_solution(p, "marginal masses or barycentres differ"));
    }
    let ipm = Ipm::new(p, scale);
    let (q, cells) = (ipm.q, ipm.cells());
    let ncones = cells as f64;
    let bnorm = inf_norm(&ipm.b);
    let cnorm = inf_norm(&ipm.c);
    let gap_abs = (1.0 / (scale * scale)).min(1.0);

    // least-norm starting points, shifted into the cone
    let ident: Vec<f64> = (0..cells)
        .flat_map(|_| (0..q * q).map(move |k| if k % (q + 1) == 0 { 1.0 } else { 0.0 }))
        .collect();
    let f0 = ipm.factor_normal(&ident)?;
    let y_b = ipm.solve_refined(&f0, &ident, &ipm.b);
    let mut x = ipm.at_mul(&y_b);
    let mut y = ipm.solve_refined(&f0, &ident, &ipm.a_mul(&ipm.c));
    let aty = ipm.at_mul(&y);
    let mut s: Vec<f64> = ipm.c.iter().zip(&aty).map(|(c, a)| c - a).collect();
    shift_into_cone(&mut x, q);
    shift_into_cone(&mut s, q);

    let mut log = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut status = Status::MaxIters;
    let mut iters = 0;
    let mut stalls = 0;
    let mut last_pres = f64::INFINITY;
    let mut step = 0.0;
    let mut converged_at: Option<usize> = None;

    for it in 0..=opts.max_iters {
        iters = it;
        let ax = ipm.a_mul(&x);
        let rp: Vec<f64> = ipm.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = ipm.at_mul(&y);
        let rd: Vec<f64> = (0..x.len()).map(|k| ipm.c[k] - aty[k] - s[k]).collect();
        let pobj = dot(&ipm.c, &x);
        let dobj = dot(&ipm.b, &y);
        let pres = inf_norm(&rp) / (1.0 + bnorm);
        let dres = inf_norm(&rd) / (1.0 + cnorm);
        let comp = dot(&x, &s);
        let mu = comp / ncones;
        let gap_ok = (pobj - dobj).abs() <= opts.tol * (gap_abs + pobj.abs()) && comp <= opts.tol * (gap_abs + pobj.abs());
        log.push(IterRecord {
            iter: it,
            primal_obj: pobj * scale * scale,
            dual_obj: dobj * scale * scale,
            primal_res: pres,
            dual_res: dres,
            mu,
            step,
        });
        let merit = pres.max(dres).max((pobj - dobj).abs() / (gap_abs + pobj.abs()));
        let within = |t: f64| {
            pres <= t
                && dres <= t
                && (pobj - dobj).abs() <= t * (gap_abs + pobj.abs())
                && comp <= t * (gap_abs + pobj.abs())
        };
        let ok = pres <= opts.tol && dres <= opts.tol && gap_ok;
        let first = ok && converged_at.is_none();
        if first || (converged_at.is_none() || ok) && best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), s.clone()));
        }
        if first {
            status = Status::Optimal;
            converged_at = Some(it);
        }
        // after convergence keep going a few steps: low-mass cells only
        // settle once the iterate is well inside the tolerance
        if let Some(c) = converged_at {
            if within(POLISH * opts.tol) || it >= c + POLISH_ITERS {
                break;
            }
        }
        if it == opts.max_iters {
            break;
        }
        // a primal residual that stops shrinking while the dual objective
        // runs away is the signature of an empty feasible set
        if pres > 1e3 * opts.tol && pres >= 0.999 * last_pres {
            stalls += 1;
        } else {
            stalls = 0;
        }
        last_pres = pres;
        if stalls >= 25 && dobj > 1e6 * (1.0 + pobj.abs()) {
            status = Status::Infeasible;
            break;
        }

        let sc = scalings(&x, &s, q);
        let fac = match ipm.factor_normal(&sc.h) {
            Ok(f) => f,
            Err(_) => break,
        };
        let direction = |rc: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut wt = vec![0.0; x.len()];
            let mut t = vec![0.0; q];
            for c in 0..cells {
                let r = c * q..c * q + q;
                jordan_div(&sc.lambda[r.clone()], &rc[r.clone()], &mut t);
                sc.nt[c].apply(&t, &mut wt[r]);
            }
            let rhs_x: Vec<f64> = wt.iter().zip(&rd).map(|(a, b)| a - b).collect();
            let a_h = ipm.a_mul(&ipm.h_mul(&sc.h, &rhs_x));
            let rhs_y: Vec<f64> = rp.iter().zip(&a_h).map(|(a, b)| a - b).collect();
            let mut dy = ipm.solve_refined(&fac, &sc.h, &rhs_y);
            let atdy = ipm.at_mul(&dy);
            let sum: Vec<f64> = atdy.iter().zip(&rhs_x).map(|(a, b)| a + b).collect();
            let mut dx = ipm.h_mul(&sc.h, &sum);
            let mut ds: Vec<f64> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
            // the dual and complementarity rows hold by construction; refine
            // against the primal row, which suffers from cancellation in H
            for _ in 0..3 {
                let adx = ipm.a_mul(&dx);
                let ep: Vec<f64> = rp.iter().zip(&adx).map(|(r, a)| r - a).collect();
                if inf_norm(&ep) <= 1e-3 * opts.tol * (1.0 + bnorm) {
                    break;
                }
                let ddy = ipm.solve_normal(&fac, &ep);
                let at = ipm.at_mul(&ddy);
                let hx = ipm.h_mul(&sc.h, &at);
                for k in 0..dx.len() {
                    dx[k] += hx[k];
                    ds[k] -= at[k];
                }
                for k in 0..dy.len() {
                    dy[k] += ddy[k];
                }
            }
            (dx, dy, ds)
        };
        let step_len = |dx: &[f64], ds: &[f64]| -> f64 {
            let mut a = f64::INFINITY;
            for c in 0..cells {
                let r = c * q..c * q + q;
                a = a.min(max_step(&x[r.clone()], &dx[r.clone()]));
                a = a.min(max_step(&s[r.clone()], &ds[r]));
            }
            a
        };

        // predictor
        let mut rc = vec![0.0; x.len()];
        for c in 0..cells {
            let r = c * q..c * q + q;
            jordan_prod(&sc.lambda[r.clone()], &sc.lambda[r.clone()], &mut rc[r]);
        }
        rc.iter_mut().for_each(|v| *v = -*v);
        let (dxa, _, dsa) = direction(&rc);
        let alpha_a = step_len(&dxa, &dsa).min(1.0);
        let mu_a: f64 = (0..x.len()).map(|k| (x[k] + alpha_a * dxa[k]) * (s[k] + alpha_a * dsa[k])).sum::<f64>() / ncones;
        let sigma = (mu_a.max(0.0) / mu).powi(3).min(1.0);

        // corrector
        let mut wdx = vec![0.0; q];
        let mut widsa = vec![0.0; q];
        let mut cross = vec![0.0; q];
        for c in 0..cells {
            let r = c * q..c * q + q;
            sc.nt[c].apply(&dxa[r.clone()], &mut wdx);
            sc.nt[c].apply_inv(&dsa[r.clone()], &mut widsa);
            jordan_prod(&widsa, &wdx, &mut cross);
            let rcc = &mut rc[r];
            for k in 0..q {
                rcc[k] -= cross[k];
            }
            rcc[0] += sigma * mu;
        }
        let (dx, dy, ds) = direction(&rc);
        let alpha = (0.99 * step_len(&dx, &ds)).min(1.0);
        if !(alpha.is_finite() && alpha > 0.0) || dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            break;
        }
        // rounding can still land on the boundary; back off until strictly interior
        let mut alpha = alpha;
        let interior = |v: &[f64], dv: &[f64], a: f64| {
            (0..cells).all(|c| {
                let t: Vec<f64> = (c * q..c * q + q).map(|k| v[k] + a * dv[k]).collect();
                min_eig(&t) > 0.0
            })
        };
        let mut tries = 0;
        while !(interior(&x, &dx, alpha) && interior(&s, &ds, alpha)) && tries < 30 {
            alpha *= 0.5;
            tries += 1;
        }
        for k in 0..x.len() {
            x[k] += alpha * dx[k];
            s[k] += alpha * ds[k];
        }
        for k in 0..y.len() {
            y[k] += alpha * dy[k];
        }
        step = alpha;
    }

    let (_, x, y, s) = best.expect("at least one iterate");
    let aty = ipm.at_mul(&y);
    let rd: Vec<f64> = (0..x.len()).map(|k| ipm.c[k] - aty[k] - s[k]).collect();
    let ax = ipm.a_mul(&x);
    let rp: Vec<f64> = ipm.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    Ok(extract(p, &ipm, scale, &x, &y, status, iters, inf_norm(&rp) / (1.0 + bnorm), inf_norm(&rd) / (1.0 + cnorm), log))
}

#[allow(clippy::too_many_arguments)]
fn extract(
    p: &PerspectiveProgram,
    ipm: &Ipm,
    scale: f64,
    x: &[f64],
    y: &[f64],
    status: Status,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    log: Vec<IterRecord>,
) -> ConicSolution {
    let (nm, n, d, q, g) = (ipm.nm, ipm.n, ipm.d, ipm.q, ipm.g);
    let mut gamma = vec![0.0; nm * n];
    let mut m = vec![vec![0.0; d]; nm * n];
    for i in 0..nm {
        for j in 0..n {
            let cell = i * n + j;
            let xc = &x[cell * q..cell * q + q];
            let gm = (xc[0] - xc[1]).max(0.0);
            gamma[cell] = gm;
            for k in 0..d {
                let w = 0.5 * (p.xs[i][k] + p.ys[j][k]);
                m[cell][k] = xc[2 + k] * scale + gm * w;
            }
        }
    }
    let s2 = scale * scale;
    let duals_a = (0..nm).map(|i| y[i * g] * s2).collect();
    let duals_p = (0..nm).map(|i| y[i * g + 1..i * g + g].iter().map(|v| v * scale).collect()).collect();
    let mut duals_b = vec![0.0; n];
    let mut duals_q = vec![vec![0.0; d]; n];
    for j in 0..n - 1 {
        let o = (nm + j) * g;
        duals_b[j] = y[o] * s2;
        duals_q[j] = y[o + 1..o + g].iter().map(|v| v * scale).collect();
    }
    ConicSolution {
        gamma,
        m,
        duals_a,
        duals_b,
        duals_p,
        duals_q,
        primal_value: dot(&ipm.c, x) * s2,
        dual_value: dot(&ipm.b, y) * s2,
        status,
        iterations,
        primal_residual,
        dual_residual,
        log,
    }
}

fn infeasible_solution(p: &PerspectiveProgram, _why: &str) -> ConicSolution {
    let (nm, n, d) = (p.xs.len(), p.ys.len(), p.dim);
    ConicSolution {
        gamma: vec![0.0; nm * n],
        m: vec![vec![0.0; d]; nm * n],
        duals_a: vec![0.0; nm],
        duals_b: vec![0.0; n],
        duals_p: vec![vec![0.0; d]; nm],
        duals_q: vec![vec![0.0; d]; n],
        primal_value: f64::INFINITY,
        dual_value: f64::INFINITY,
        status: Status::Infeasible,
        iterations: 0,
        primal_residual: moment_mismatch(p),
        dual_residual: 0.0,
        log: Vec::new(),
    }
}
