//! Command-line front end. [`run`] parses arguments, dispatches, prints a
//! JSON summary on stdout and returns the process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::beckmann::{assemble_sigma, basic_load_value, verify_div2, BasicLoad};
use crate::conic::SolverOptions;
use crate::convex_order::{dominates, Dominance, DEFAULT_MAX_ATOMS, DEFAULT_ORDER_TOL};
use crate::error::{Error, Result};
use crate::grillage::{continuous_slab_load, design, five_columns, refine_study};
use crate::io::{plan_from_csv, write_with_manifest, Manifest, Normalization, TwoPointInput};
use crate::measures::{default_barycentre_tol, validate_pair, CenteredPair, DiscreteMeasure};
use crate::oracles::{gaussian_oracle, grid_oracle, ordered_oracle, two_point_oracle, GridSpec, DEFAULT_GRID_COLUMNS};
use crate::svg::{render_svg, SvgStyle};
use crate::transport::{check_certificate, default_certificate_tol, scan_support_bound, solve_three_marginal, JetField};

const SCHEMAS: &str = "\
Input formats:
  measure JSON   {\"dim\": 2, \"atoms\": [{\"x\": [0.0, 1.0], \"w\": 0.5}, ...]}
  points JSON    {\"x1\": [..], \"x2\": [..], \"y1\": [..], \"y2\": [..]}
  basic load     {\"x\": [..], \"y\": [..], \"z\": [..]}
  plan CSV       header i,j,x_0,..,y_0,..,z_0,..,mass
  jets JSON      {\"jets\": [{\"x\": [..], \"u\": 0.0, \"grad\": [..]}, ...], \"n_mu\": 3}

Exit codes: 0 success, 1 invalid input or failed verification, 2 solver failure.";

#[derive(Parser, Debug)]
#[command(name = "hessot", version, about = "Three-marginal transport with a Hessian constraint", after_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    /// Tolerance on residuals and duality gap
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Relative mass below which plan cells are dropped
    #[arg(long, default_value_t = 1e-7)]
    support_threshold: f64,
    /// Allowed barycentre mismatch [default: 1e-9 (1 + diameter)]
    #[arg(long)]
    barycentre_tol: Option<f64>,
}

impl SolverFlags {
    fn options(&self) -> Result<SolverOptions> {
        for (name, v) in [("--tol", self.tol), ("--support-threshold", self.support_threshold)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(SolverOptions { tol: self.tol, max_iters: self.max_iters, support_threshold: self.support_threshold })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the three-marginal problem between two measures
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Plan CSV
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jets: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Optimal grillage for the load plus - minus
    Design {
        #[arg(long)]
        plus: PathBuf,
        #[arg(long)]
        minus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Grillage energies for a uniform square load on refining grids
    Refine {
        /// Points per side, increasing
        #[arg(long, value_delimiter = ',', default_value = "5,9,17")]
        levels: Vec<usize>,
        /// Half side of the loaded square
        #[arg(long, default_value_t = 0.5)]
        half_side: f64,
        /// Columns sit at (+-a, +-a) and the origin
        #[arg(long, default_value_t = 0.25)]
        columns: f64,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Decide whether rho dominates mu in convex order
    CheckOrder {
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER_TOL)]
        tol: f64,
        /// Largest accepted total number of atoms
        #[arg(long, default_value_t = DEFAULT_MAX_ATOMS)]
        max_atoms: usize,
    },
    /// Reference solutions
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// Check a plan (and optionally jets) against its marginals
    Verify {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        jets: Option<PathBuf>,
        /// Largest monomial degree in the weak-form check
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Draw the segment measure of a plan
    Render {
        /// Plan CSV
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long)]
        svg: PathBuf,
        /// Stroke width per unit midpoint density
        #[arg(long)]
        gain: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum OracleKind {
    /// nu dominates mu: value (var nu - var mu) / 2
    Ordered {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
    },
    /// Centred Gaussians, covariances as comma-separated row-major entries
    Gaussian {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        m: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        n: Vec<f64>,
    },
    /// Two atoms each, in the plane
    TwoPoint {
        #[arg(long)]
        points: PathBuf,
    },
    /// A single basic load
    Basic {
        #[arg(long)]
        load: PathBuf,
    },
    /// LP with the middle point on a lattice
    Grid {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Lattice spacing [default: diameter / 32]
        #[arg(long)]
        grid_h: Option<f64>,
        /// Largest number of LP columns, one per (x, y, node) triple
        #[arg(long = "max-atoms", alias = "max-columns", default_value_t = DEFAULT_GRID_COLUMNS)]
        max_columns: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                eprintln!("\n{SCHEMAS}");
            }
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome { summary, ok }) => {
            print_json(&summary);
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                2
            } else {
                1
            }
        }
    }
}

fn print_json(v: &Value) {
    use std::io::Write;
    // a closed pipe is not an error worth a panic
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

struct Outcome {
    summary: Value,
    ok: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, ok: true }
    }
}

/// Reads a file, recording its digest.
fn load(path: &Path, manifest: &mut Manifest) -> Result<String> {
    let bytes = fs::read(path)?;
    manifest.hash_input(path, &bytes);
    String::from_utf8(bytes).map_err(|_| Error::Invalid(format!("{} is not UTF-8", path.display())))
}

fn load_measure(path: &Path, manifest: &mut Manifest) -> Result<DiscreteMeasure> {
    let text = load(path, manifest)?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, manifest: &mut Manifest) -> Result<T> {
    let text = load(path, manifest)?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn pair_of(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: Option<f64>, manifest: &mut Manifest) -> Result<CenteredPair> {
    let pair = validate_pair(mu, nu, tol.unwrap_or_else(|| default_barycentre_tol(mu, nu)))?;
    manifest.normalization = Some(Normalization::from(&pair));
    Ok(pair)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn write_svg(path: &Path, sigma: &crate::beckmann::SegmentMeasure, style: &SvgStyle, manifest: &Manifest) -> Result<()> {
    write_with_manifest(path, &render_svg(sigma, style)?, manifest)
}

fn warn_overlaps(sigma: &crate::beckmann::SegmentMeasure) -> usize {
    let n = sigma.overlapping_opposite_pairs(1e-9).len();
    if n > 0 {
        eprintln!("warning: {n} pairs of opposite-sign segments overlap; the energy is an upper bound on the mass");
    }
    n
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Solve { mu, nu, out, jets, svg, solver } => {
            let opts = solver.options()?;
            let mut manifest = Manifest::new("solve", &opts);
            let (m, n) = (load_measure(&mu, &mut manifest)?, load_measure(&nu, &mut manifest)?);
            let pair = pair_of(&m, &n, solver.barycentre_tol, &mut manifest)?;
            let sol = solve_three_marginal(&pair, &opts)?;
            let plan = sol.plan.translated(&pair.translation).scaled_mass(pair.mu_mass);
            let field = sol.jets.translated(&pair.translation);
            let sigma = assemble_sigma(&plan);
            if let Some(p) = &out {
                write_with_manifest(p, &crate::io::plan_to_csv(&plan)?, &manifest)?;
            }
            if let Some(p) = &jets {
                write_with_manifest(p, &crate::io::jets_to_json(&field)?, &manifest)?;
            }
            if let Some(p) = &svg {
                write_svg(p, &sigma, &SvgStyle::default(), &manifest)?;
            }
            Ok(Outcome::ok(json!({
                "value": sol.value * pair.mu_mass,
                "status": to_value(&sol.status),
                "iterations": sol.iterations,
                "primal_value": sol.primal_value * pair.mu_mass,
                "dual_value": sol.dual_value * pair.mu_mass,
                "cells": plan.cells.len(),
                "dropped_mass": sol.dropped_mass * pair.mu_mass,
                "certificate": {
                    "max_support_residual": sol.certificate.max_support_residual,
                    "max_pair_residual": sol.certificate.max_pair_residual,
                    "tol": sol.certificate.tol,
                    "pass": sol.certificate.pass,
                },
                "overlapping_opposite_pairs": warn_overlaps(&sigma),
                "manifest": to_value(&manifest),
            })))
        }
        Command::Design { plus, minus, out, svg, solver } => {
            let opts = solver.options()?;
            let mut manifest = Manifest::new("design", &opts);
            let (p, m) = (load_measure(&plus, &mut manifest)?, load_measure(&minus, &mut manifest)?);
            let r = design(&p, &m, &opts)?;
            if let Some(path) = &out {
                write_with_manifest(path, &crate::io::plan_to_csv(&r.plan)?, &manifest)?;
            }
            if let Some(path) = &svg {
                write_svg(path, &r.sigma, &SvgStyle::default(), &manifest)?;
            }
            Ok(Outcome::ok(json!({
                "energy": r.energy,
                "segment_count": r.segment_count,
                "support_ok": r.support_ok,
                "iterations": r.iterations,
                "overlapping_opposite_pairs": warn_overlaps(&r.sigma),
                "manifest": to_value(&manifest),
            })))
        }
        Command::Refine { levels, half_side, columns, solver } => {
            let opts = solver.options()?;
            let manifest = Manifest::new("refine", &opts);
            let rows = refine_study(|k| Ok((five_columns(columns), continuous_slab_load(k, half_side)?)), &levels, &opts)?;
            if let Some(first) = rows.iter().find(|r| r.error.is_some()) {
                let msg = first.error.clone().unwrap_or_default();
                eprintln!("error: level {} failed: {msg}", first.level);
            }
            let failed = rows.iter().any(|r| r.error.is_some());
            let summary = json!({ "rows": to_value(&rows), "manifest": to_value(&manifest) });
            if failed {
                print_json(&summary);
                return Err(Error::Infeasible("at least one refinement level failed".into()));
            }
            Ok(Outcome::ok(summary))
        }
        Command::CheckOrder { rho, mu, tol, max_atoms } => {
            let mut manifest = Manifest::new("check-order", &SolverOptions::default());
            manifest.options = json!({ "tol": tol, "max_atoms": max_atoms });
            let (r, m) = (load_measure(&rho, &mut manifest)?, load_measure(&mu, &mut manifest)?);
            if r.len() + m.len() > max_atoms {
                return Err(Error::GuardExceeded { size: r.len() + m.len(), limit: max_atoms });
            }
            let summary = match dominates(&r, &m, tol)? {
                Dominance::Yes(plan) => json!({ "result": "Yes", "plan": to_value(&plan), "manifest": to_value(&manifest) }),
                Dominance::No(w) => json!({
                    "result": "No",
                    "witness": to_value(&w),
                    "witness_on_support": to_value(&w.on_support(&r, &m)),
                    "manifest": to_value(&manifest),
                }),
            };
            Ok(Outcome::ok(summary))
        }
        Command::Oracle { kind } => oracle(kind),
        Command::Verify { mu, nu, plan, jets, degree, tol } => {
            let mut manifest = Manifest::new("verify", &SolverOptions::default());
            manifest.options = json!({ "tol": tol, "degree": degree });
            let (m, n) = (load_measure(&mu, &mut manifest)?, load_measure(&nu, &mut manifest)?);
            let p = plan_from_csv(&load(&plan, &mut manifest)?)?;
            let pair = pair_of(&m, &n, None, &mut manifest)?;
            let res = p.residuals(&m, &n);
            let mut ok = res.marginal <= tol && res.martingale <= tol;
            let sigma = assemble_sigma(&p);
            let div2 = if p.dim == 2 {
                let rep = verify_div2(&sigma, &m, &n, degree)?;
                ok &= rep.max_polynomial <= tol;
                to_value(&rep)
            } else {
                Value::Null
            };
            let support_bound = scan_support_bound(&p, 1e-9 * (1.0 + pair.diameter()));
            ok &= support_bound;
            let certificate = match &jets {
                Some(path) => {
                    let field: JetField = load_json(path, &mut manifest)?;
                    let rep = check_certificate(&p, &field, default_certificate_tol(&pair));
                    ok &= rep.pass;
                    json!({ "max_support_residual": rep.max_support_residual, "max_pair_residual": rep.max_pair_residual, "tol": rep.tol, "pass": rep.pass })
                }
                None => Value::Null,
            };
            Ok(Outcome {
                summary: json!({
                    "pass": ok,
                    "value": p.value(),
                    "residuals": to_value(&res),
                    "support_bound": support_bound,
                    "div2": div2,
                    "certificate": certificate,
                    "manifest": to_value(&manifest),
                }),
                ok,
            })
        }
        Command::Render { sigma, svg, gain } => {
            let mut manifest = Manifest::new("render", &SolverOptions::default());
            manifest.options = json!({ "gain": gain });
            let plan = plan_from_csv(&load(&sigma, &mut manifest)?)?;
            let s = assemble_sigma(&plan);
            let style = SvgStyle { gain, ..SvgStyle::default() };
            write_svg(&svg, &s, &style, &manifest)?;
            Ok(Outcome::ok(json!({ "segments": s.segments.len(), "svg": svg.display().to_string(), "manifest": to_value(&manifest) })))
        }
    }
}

fn oracle(kind: OracleKind) -> Result<Outcome> {
    let mut manifest = Manifest::new("oracle", &SolverOptions::default());
    let summary = match kind {
        OracleKind::Ordered { mu, nu } => {
            let (m, n) = (load_measure(&mu, &mut manifest)?, load_measure(&nu, &mut manifest)?);
            to_value(&ordered_oracle(&m, &n)?)
        }
        OracleKind::Gaussian { m, n } => {
            let d = (m.len() as f64).sqrt().round() as usize;
            if d * d != m.len() || m.is_empty() {
                return Err(Error::Invalid(format!("covariance needs d^2 entries, got {}", m.len())));
            }
            manifest.options = json!({ "m": m, "n": n });
            to_value(&gaussian_oracle(&m, &n, d)?)
        }
        OracleKind::TwoPoint { points } => {
            let p: TwoPointInput = load_json(&points, &mut manifest)?;
            to_value(&two_point_oracle(&p.x1, &p.x2, &p.y1, &p.y2)?)
        }
        OracleKind::Basic { load } => {
            let l: BasicLoad = load_json(&load, &mut manifest)?;
            let scale = crate::linalg::dist(&l.x, &l.y);
            json!({ "load": to_value(&l), "value": to_value(&basic_load_value(&l, 1e-12 * (1.0 + scale))?) })
        }
        OracleKind::Grid { mu, nu, grid_h, max_columns, out } => {
            let (m, n) = (load_measure(&mu, &mut manifest)?, load_measure(&nu, &mut manifest)?);
            let pair = pair_of(&m, &n, None, &mut manifest)?;
            let mut spec = GridSpec::for_pair(&pair);
            if let Some(h) = grid_h {
                spec.h = h;
            }
            spec.max_columns = max_columns;
            manifest.options = to_value(&spec);
            let sol = grid_oracle(&pair, &spec)?;
            let plan = sol.plan.translated(&pair.translation).scaled_mass(pair.mu_mass);
            if let Some(p) = &out {
                write_with_manifest(p, &crate::io::plan_to_csv(&plan)?, &manifest)?;
            }
            json!({ "value": sol.value * pair.mu_mass, "h": sol.h, "columns": sol.columns, "lp_iterations": sol.lp_iterations, "cells": plan.cells.len() })
        }
    };
    let mut summary = summary;
    if let Value::Object(map) = &mut summary {
        map.insert("manifest".into(), to_value(&manifest));
    }
    Ok(Outcome::ok(summary))
}
