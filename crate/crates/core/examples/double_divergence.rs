//! Checks the weak double-divergence identity of a solver plan, and shows
//! that deleting one bar breaks it.

use hessot::beckmann::{assemble_sigma, basic_load_value, verify_div2, BasicLoad};
use hessot::conic::SolverOptions;
use hessot::measures::DiscreteMeasure;
use hessot::transport::solve_measures;

fn main() -> hessot::Result<()> {
    let mu = DiscreteMeasure::from_points(vec![vec![0.3, 0.2], vec![-0.3, -0.2]], vec![0.5, 0.5])?;
    let nu = DiscreteMeasure::from_points(vec![vec![0.9, -0.5], vec![-0.9, 0.5], vec![0.0, 0.0]], vec![0.3, 0.3, 0.4])?;
    let (pair, sol) = solve_measures(&mu, &nu, &SolverOptions::default())?;
    let mut sigma = assemble_sigma(&sol.plan);
    let report = verify_div2(&sigma, &pair.mu, &pair.nu, 4)?;
    println!("{} bars, energy {:.6}", sigma.segments.len(), sigma.energy());
    println!("max residual: polynomials {:.2e}, bumps {:.2e}", report.max_polynomial, report.max_bump);
    sigma.segments.pop();
    let broken = verify_div2(&sigma, &pair.mu, &pair.nu, 4)?;
    println!("one bar removed: polynomials {:.2e}", broken.max_polynomial);

    let load = BasicLoad { x: vec![0.0, 0.0], y: vec![2.0, 0.0], z: vec![1.0, 0.5] };
    println!("basic load {:?}", basic_load_value(&load, 1e-12)?);
    Ok(())
}
