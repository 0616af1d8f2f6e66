//! Solves a small problem and prints the plan, the jets and the certificate.

use hessot::conic::SolverOptions;
use hessot::measures::DiscreteMeasure;
use hessot::transport::solve_measures;

fn main() -> hessot::Result<()> {
    let mu = DiscreteMeasure::from_points(vec![vec![0.5, 0.0], vec![-0.5, 0.0]], vec![0.5, 0.5])?;
    let nu = DiscreteMeasure::from_points(vec![vec![0.0, 1.2], vec![-0.3, -0.4], vec![0.3, -0.4]], vec![0.25, 0.375, 0.375])?;
    let (pair, sol) = solve_measures(&mu, &nu, &SolverOptions::default())?;
    println!("value {:.10}  ({} iterations)", sol.value * pair.mu_mass, sol.iterations);
    for c in &sol.plan.cells {
        let z = pair.to_input_coords(&c.z);
        println!("  x{} -> y{}  z = ({:+.4}, {:+.4})  mass {:.4}", c.i, c.j, z[0], z[1], c.mass * pair.mu_mass);
    }
    let cert = &sol.certificate;
    println!("certificate pass {}  support {:.2e}  pairs {:.2e}  tol {:.1e}", cert.pass, cert.max_support_residual, cert.max_pair_residual, cert.tol);
    Ok(())
}
