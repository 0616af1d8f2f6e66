use serde::Serialize;

use crate::convex_order::{dominates, Dominance, DEFAULT_ORDER_TOL};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::measures::{variance, DiscreteMeasure};
use crate::transport::{JetField, Plan3, PlanCell};

#[derive(Debug, Clone, Serialize)]
pub struct OrderedSolution {
    pub value: f64,
    /// Jets of `u = |x|^2 / 2`.
    pub jets: JetField,
    /// `z = y` on every cell of the martingale coupling.
    pub plan: Plan3,
}

/// Solution when `nu` dominates `mu` in convex order.
///
/// The value is `(var nu - var mu) / 2` and any martingale coupling, with
/// the middle point sitting on `y`, is optimal. Fails with `Invalid` if the
/// dominance test says no.
pub fn ordered_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OrderedSolution> {
    let coupling = match dominates(nu, mu, DEFAULT_ORDER_TOL)? {
        Dominance::Yes(plan) => plan,
        Dominance::No(w) => {
            return Err(Error::Invalid(format!("nu does not dominate mu in convex order (witness gap {:.3e})", w.gap)))
        }
    };
    let cells = coupling
        .entries
        .iter()
        .map(|e| PlanCell {
            i: e.source,
            j: e.target,
            x: mu.point(e.source).to_vec(),
            y: nu.point(e.target).to_vec(),
            z: nu.point(e.target).to_vec(),
            mass: e.mass,
        })
        .collect();
    let value = 0.5 * (variance(nu)? - variance(mu)?);
    let jets = JetField::of_potential(mu, nu, |p| 0.5 * dot(p, p), |p| p.to_vec());
    Ok(OrderedSolution { value, jets, plan: Plan3 { dim: mu.dim(), cells } })
}
