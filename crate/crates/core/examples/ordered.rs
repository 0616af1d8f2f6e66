//! When nu dominates mu in convex order the value is half the variance gap.

use hessot::conic::SolverOptions;
use hessot::measures::DiscreteMeasure;
use hessot::oracles::ordered_oracle;
use hessot::transport::solve_measures;

fn main() -> hessot::Result<()> {
    let nu = DiscreteMeasure::from_points(
        vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
        vec![0.25; 4],
    )?;
    // lump pairs of atoms into their barycentres
    let mu = DiscreteMeasure::from_points(vec![vec![0.0, 0.0]], vec![1.0])?;
    let exact = ordered_oracle(&mu, &nu)?;
    let (_, sol) = solve_measures(&mu, &nu, &SolverOptions::default())?;
    println!("closed form {:.12}", exact.value);
    println!("solver      {:.12}", sol.value);
    Ok(())
}
