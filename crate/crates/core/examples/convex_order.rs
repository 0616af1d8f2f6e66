//! Convex-order checks: a martingale coupling when rho dominates mu, a convex
//! witness otherwise, and the common dominant by convolution of a pair.

use hessot::convex_order::{dominates, minimal_variance_upper, Dominance, DEFAULT_MAX_ATOMS, DEFAULT_ORDER_TOL};
use hessot::measures::DiscreteMeasure;

fn main() -> hessot::Result<()> {
    let mu = DiscreteMeasure::from_points(vec![vec![0.0, 0.0]], vec![1.0])?;
    let rho = DiscreteMeasure::from_points(vec![vec![1.0, 1.0], vec![-1.0, -1.0]], vec![0.5, 0.5])?;
    match dominates(&rho, &mu, DEFAULT_ORDER_TOL)? {
        Dominance::Yes(plan) => println!("rho >= mu, coupling with {} entries", plan.entries.len()),
        Dominance::No(w) => println!("unexpected witness {w:?}"),
    }
    match dominates(&mu, &rho, DEFAULT_ORDER_TOL)? {
        Dominance::Yes(_) => println!("unexpected coupling"),
        Dominance::No(w) => println!("mu does not dominate rho: convex witness with {} pieces, gap {:.4}", w.anchors.len(), w.gap),
    }
    let nu = DiscreteMeasure::from_points(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0.5, 0.5])?;
    let (upper, var) = minimal_variance_upper(&rho, &nu, DEFAULT_MAX_ATOMS)?;
    println!("common dominant by convolution: {} atoms, variance {var:.4}", upper.len());
    Ok(())
}
