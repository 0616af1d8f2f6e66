//! Centred Gaussians: the value is half the nuclear norm of `N - M`, and a
//! quantized pair approaches it from below.

use hessot::conic::SolverOptions;
use hessot::oracles::{gaussian_oracle, quantize_gaussian};
use hessot::transport::solve_measures;

fn main() -> hessot::Result<()> {
    let m = [1.0, 0.3, 0.3, 0.5];
    let n = [0.6, -0.2, -0.2, 1.4];
    let exact = gaussian_oracle(&m, &n, 2)?;
    println!("closed form {:.6}", exact.value);
    println!("join covariance {:?}", exact.rho_covariance);
    for k in [3, 5, 7] {
        let (mu, nu) = (quantize_gaussian(&m, 2, k)?, quantize_gaussian(&n, 2, k)?);
        let (_, sol) = solve_measures(&mu, &nu, &SolverOptions::default())?;
        println!("{k:>2} atoms per axis: {:.6}", sol.value);
    }
    Ok(())
}
