//! The lattice LP bounds the value from above; halving the spacing tightens it.

use hessot::conic::SolverOptions;
use hessot::measures::{default_barycentre_tol, validate_pair, DiscreteMeasure};
use hessot::oracles::{grid_oracle, GridSpec};
use hessot::transport::solve_three_marginal;

fn main() -> hessot::Result<()> {
    let mu = DiscreteMeasure::from_points(vec![vec![0.4, 0.1], vec![-0.4, -0.1]], vec![0.5, 0.5])?;
    let nu = DiscreteMeasure::from_points(vec![vec![0.1, 0.6], vec![-0.2, -1.2]], vec![2.0 / 3.0, 1.0 / 3.0])?;
    let pair = validate_pair(&mu, &nu, default_barycentre_tol(&mu, &nu))?;
    let exact = solve_three_marginal(&pair, &SolverOptions::default())?.value;
    println!("solver {exact:.6}");
    let margin = 0.2;
    for div in [8, 16, 32, 64] {
        let mut spec = GridSpec::with_divisions(&pair, div);
        spec.margin = Some(margin);
        let g = grid_oracle(&pair, &spec)?;
        println!("h = {:.4}: {:.6}  gap {:.2e}  ({} columns)", g.h, g.value, g.value - exact, g.columns);
    }
    Ok(())
}
