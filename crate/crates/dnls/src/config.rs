use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{DnlsError, Result};

/// Lattice model data: tangent sites, cutoff, nonlinearity and parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DnlsConfig {
    pub tangent: Vec<i32>,
    pub jmax: i32,
    pub eps: f64,
    /// `xi_j` for every site `0 < |j| <= jmax`.
    pub xi: BTreeMap<i32, f64>,
    /// Initial actions of the tangent modes.
    pub zeta: Vec<f64>,
}

impl DnlsConfig {
    /// Parameters at the midpoints `1.5/|j|`, actions at 1.5.
    pub fn new(tangent: Vec<i32>, jmax: i32, eps: f64) -> Result<Self> {
        if jmax <= 0 {
            return Err(DnlsError::Config(format!("jmax = {jmax}")));
        }
        let xi = (-jmax..=jmax).filter(|j| *j != 0).map(|j| (j, 1.5 / j.abs() as f64)).collect();
        let zeta = vec![1.5; tangent.len()];
        let cfg = DnlsConfig { tangent, jmax, eps, xi, zeta };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Draw `xi_j` uniformly in `[1,2]/|j|` for the normal sites.
    pub fn with_seeded_xi(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (j, v) in self.xi.iter_mut() {
            let u: f64 = rng.gen();
            if !self.tangent.contains(j) {
                *v = (1.0 + u) / j.abs() as f64;
            }
        }
        self
    }

    pub fn set_xi(&mut self, j: i32, v: f64) -> Result<()> {
        match self.xi.get_mut(&j) {
            Some(x) => *x = v,
            None => return Err(DnlsError::Config(format!("no parameter at site {j}"))),
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &j) in self.tangent.iter().enumerate() {
            if j == 0 || j.abs() > self.jmax || self.tangent[..i].contains(&j) {
                return Err(DnlsError::Config(format!("bad tangent site {j}")));
            }
        }
        for (j, v) in &self.xi {
            let a = j.abs() as f64;
            if !(1.0 / a - 1e-12..=2.0 / a + 1e-12).contains(v) {
                return Err(DnlsError::Config(format!("xi_{j} = {v} outside [1,2]/|j|")));
            }
        }
        if self.zeta.len() != self.tangent.len() || self.zeta.iter().any(|z| !(1.0..=2.0).contains(z)) {
            return Err(DnlsError::Config("actions zeta must lie in [1,2], one per tangent site".into()));
        }
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(DnlsError::Config(format!("eps = {}", self.eps)));
        }
        Ok(())
    }

    /// `lambda_j = j^2 + xi_j`.
    pub fn lambda(&self, j: i32) -> f64 {
        (j * j) as f64 + self.xi.get(&j).copied().unwrap_or(0.0)
    }

    /// Tangent frequencies `sgn(j_i) lambda_{j_i}`.
    pub fn omega(&self) -> Vec<f64> {
        self.tangent.iter().map(|&j| j.signum() as f64 * self.lambda(j)).collect()
    }
}
