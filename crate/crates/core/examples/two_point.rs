//! Two atoms on each side: closed-form potentials, plans and third marginals.

use hessot::conic::SolverOptions;
use hessot::oracles::two_point_oracle;
use hessot::transport::solve_measures;

fn report(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> hessot::Result<()> {
    let exact = two_point_oracle(x1, x2, y1, y2)?;
    let (_, sol) = solve_measures(&exact.mu, &exact.nu, &SolverOptions::default())?;
    println!("case {:?}: closed form {:.10}, solver {:.10}", exact.case, exact.value, sol.value);
    for (k, (z, w)) in exact.rho.points().zip(exact.rho.weights()).enumerate() {
        println!("  rho atom {k}: ({:+.4}, {:+.4}) weight {:.4}", z[0], z[1], w);
    }
    Ok(())
}

fn main() -> hessot::Result<()> {
    report(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0])?;
    report(&[1.0, 0.2], &[-2.0, -0.4], &[0.1, 0.3], &[-0.1, -0.3])?;
    Ok(())
}
