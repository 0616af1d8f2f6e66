//! Finitely supported measures on R^d.
//!
//! Weights are stored as given; normalization to probabilities happens only
//! in [`validate_pair`], which also moves the common barycentre to the origin.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub w: f64,
}

/// Weighted point cloud. Duplicate points (bitwise equal) are merged on
/// construction, keeping the position of the first occurrence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMeasure::deserialize(d)?;
        DiscreteMeasure::new(raw.dim, raw.atoms).map_err(serde::de::Error::custom)
    }
}

fn point_key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    x.iter().map(|v| if *v == 0.0 { 0u64 } else { v.to_bits() }).collect()
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (k, mut atom) in atoms.into_iter().enumerate() {
            if atom.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: atom.x.len() });
            }
            if atom.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(k));
            }
            if !(atom.w.is_finite() && atom.w > 0.0) {
                return Err(Error::InvalidWeight(atom.w));
            }
            for v in atom.x.iter_mut() {
                if *v == 0.0 {
                    *v = 0.0;
                }
            }
            match index.get(&point_key(&atom.x)) {
                Some(&slot) => merged[slot].w += atom.w,
                None => {
                    index.insert(point_key(&atom.x), merged.len());
                    merged.push(atom);
                }
            }
        }
        Ok(Self { dim, atoms: merged })
    }

    pub fn from_points(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points.first().map(|p| p.len()).ok_or(Error::EmptyMeasure)?;
        let atoms = points.into_iter().zip(weights).map(|(x, w)| Atom { x, w }).collect();
        Self::new(dim, atoms)
    }

    /// Single atom of unit mass.
    pub fn dirac(x: Vec<f64>) -> Self {
        let dim = x.len();
        Self::new(dim, vec![Atom { x, w: 1.0 }]).expect("valid dirac")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.atoms[i].x
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms[i].w
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.iter().map(|a| a.x.as_slice())
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.w)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn barycentre(&self) -> Result<Vec<f64>> {
        barycentre(self)
    }

    pub fn variance(&self) -> Result<f64> {
        variance(self)
    }

    /// `∫ f dm` with the stored weights.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.w * f(&a.x)).sum()
    }

    pub fn translated(&self, t: &[f64]) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { x: a.x.iter().zip(t).map(|(x, s)| x + s).collect(), w: a.w })
            .collect();
        Self::new(self.dim, atoms).expect("translation keeps a valid measure")
    }

    pub fn scaled_mass(&self, factor: f64) -> Self {
        let atoms = self.atoms.iter().map(|a| Atom { x: a.x.clone(), w: a.w * factor }).collect();
        Self::new(self.dim, atoms).expect("positive scaling keeps a valid measure")
    }

    /// Maximum distance between two atoms.
    pub fn diameter(&self) -> f64 {
        diameter_of(self.points().collect::<Vec<_>>().as_slice())
    }
}

pub(crate) fn diameter_of(points: &[&[f64]]) -> f64 {
    let mut best: f64 = 0.0;
    for (k, p) in points.iter().enumerate() {
        for q in &points[k + 1..] {
            best = best.max(dist(p, q));
        }
    }
    best
}

/// Diameter of the union of both supports.
pub fn data_diameter(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let pts: Vec<&[f64]> = mu.points().chain(nu.points()).collect();
    diameter_of(&pts)
}

pub fn barycentre(m: &DiscreteMeasure) -> Result<Vec<f64>> {
    let mass = m.total_mass();
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut out = vec![0.0; m.dim];
    for a in &m.atoms {
        for (o, x) in out.iter_mut().zip(&a.x) {
            *o += a.w * x;
        }
    }
    out.iter_mut().for_each(|o| *o /= mass);
    Ok(out)
}

/// `Σ w_i |x_i - [m]|²` with the stored (unnormalized) weights.
pub fn variance(m: &DiscreteMeasure) -> Result<f64> {
    let b = barycentre(m)?;
    Ok(m.atoms.iter().map(|a| a.w * dist(&a.x, &b).powi(2)).sum())
}

/// A pair of probability measures sharing the barycentre at the origin,
/// together with the transform that produced it from the caller's data.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredPair {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// Barycentre of the input `mu`; add it back to return to input coordinates.
    pub translation: Vec<f64>,
    /// Total masses of the inputs before normalization.
    pub mu_mass: f64,
    pub nu_mass: f64,
}

impl CenteredPair {
    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn is_identity_transform(&self) -> bool {
        self.translation.iter().all(|t| *t == 0.0) && self.mu_mass == 1.0 && self.nu_mass == 1.0
    }

    pub fn diameter(&self) -> f64 {
        data_diameter(&self.mu, &self.nu)
    }

    pub fn to_input_coords(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.translation).map(|(a, b)| a + b).collect()
    }
}

/// Default barycentre tolerance `1e-9 (1 + diameter)`.
pub fn default_barycentre_tol(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    1e-9 * (1.0 + data_diameter(mu, nu))
}

fn normalize_and_center(m: &DiscreteMeasure, mass: f64, centre: &[f64]) -> DiscreteMeasure {
    let atoms = m
        .atoms
        .iter()
        .map(|a| Atom { x: a.x.iter().zip(centre).map(|(x, c)| x - c).collect(), w: a.w / mass })
        .collect();
    DiscreteMeasure::new(m.dim, atoms).expect("normalization keeps a valid measure")
}

pub fn validate_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<CenteredPair> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let bm = barycentre(mu)?;
    let bn = barycentre(nu)?;
    let distance = dist(&bm, &bn);
    if distance > tol {
        return Err(Error::BarycentreMismatch { distance, tol });
    }
    let (mu_mass, nu_mass) = (mu.total_mass(), nu.total_mass());
    let already = mu_mass == 1.0 && nu_mass == 1.0 && norm(&bm) == 0.0 && norm(&bn) == 0.0;
    if already {
        return Ok(CenteredPair {
            mu: mu.clone(),
            nu: nu.clone(),
            translation: vec![0.0; mu.dim()],
            mu_mass,
            nu_mass,
        });
    }
    // Each measure is centred at its own barycentre so the equilibrium
    // constraints are consistent to rounding; the two differ by at most `tol`.
    Ok(CenteredPair {
        mu: normalize_and_center(mu, mu_mass, &bm),
        nu: normalize_and_center(nu, nu_mass, &bn),
        translation: bm,
        mu_mass,
        nu_mass,
    })
}
