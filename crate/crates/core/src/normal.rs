//! Integrable part `N = sum omega_i y_i + sum Omega_j(x)/j z_j zbar_j`.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fourier::{l1, Fourier};
use crate::modes::{ModeSystem, TermIndex};
use crate::series::HamSeries;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub omega: Vec<f64>,
    /// `Omega_j(x)`, mean and oscillation together, for every normal site.
    pub big_omega: BTreeMap<i32, Fourier>,
    /// Constant term collected from the angle means of `P^x`.
    pub energy: f64,
}

impl NormalForm {
    pub fn new(omega: Vec<f64>, big_omega: &BTreeMap<i32, f64>) -> Self {
        let n = omega.len();
        NormalForm {
            omega,
            big_omega: big_omega.iter().map(|(j, v)| (*j, Fourier::constant(n, C64::new(*v, 0.0)))).collect(),
            energy: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// `[Omega]_j`.
    pub fn mean(&self, j: i32) -> f64 {
        self.big_omega.get(&j).map_or(0.0, |f| f.mean().re)
    }

    /// `Omega~_j`, the zero-mean part.
    pub fn osc(&self, j: i32) -> Fourier {
        self.big_omega.get(&j).map_or_else(|| Fourier::zero(self.n()), |f| f.zero_mean())
    }

    pub fn omega_at(&self, j: i32) -> Fourier {
        self.big_omega.get(&j).cloned().unwrap_or_else(|| Fourier::zero(self.n()))
    }

    /// `sum (mu_j - gamma_j) Omega_j(x)` for a pair of site maps.
    pub fn combination(&self, mu: &[(i32, u32)], gamma: &[(i32, u32)]) -> Fourier {
        let mut c = Fourier::zero(self.n());
        for &(j, p) in mu {
            c = c.plus(&self.omega_at(j).scale(C64::new(p as f64, 0.0)));
        }
        for &(j, p) in gamma {
            c = c.minus(&self.omega_at(j).scale(C64::new(p as f64, 0.0)));
        }
        c
    }

    pub fn is_x_independent(&self) -> bool {
        self.big_omega.values().all(|f| f.iter().all(|(k, _)| l1(k) == 0))
    }

    /// `||j^{-1} Omega~_j||_s` per site.
    pub fn minus_one_norms(&self, s: f64) -> Result<BTreeMap<i32, f64>> {
        let mut out = BTreeMap::new();
        for (j, f) in &self.big_omega {
            out.insert(*j, f.zero_mean().norm(s)? / j.unsigned_abs() as f64);
        }
        Ok(out)
    }

    /// Checks zero-momentum of every `Omega~_j(k) z_j zbar_j` mode.
    pub fn check(&self, m: &ModeSystem) -> Result<()> {
        if self.omega.len() != m.n() {
            return Err(Error::ModeMismatch);
        }
        for (j, f) in &self.big_omega {
            if !m.is_normal(*j) {
                return Err(Error::Site(*j));
            }
            for (k, _) in f.iter() {
                let mom: i64 = k.iter().enumerate().map(|(i, v)| *v as i64 * m.tangent_weight(i)).sum();
                if mom != 0 {
                    return Err(Error::Invalid(format!("Omega_{j} carries mode {k:?} of momentum {mom}")));
                }
            }
        }
        Ok(())
    }

    /// `N` as a series, without the energy constant.
    pub fn to_series(&self, modes: &Arc<ModeSystem>, k_cut: u32, d_cut: u32) -> Result<HamSeries> {
        let n = self.n();
        let mut terms = Vec::new();
        for (i, w) in self.omega.iter().enumerate() {
            let mut alpha = vec![0u32; n];
            alpha[i] = 1;
            terms.push((TermIndex::new(&vec![0; n], &alpha, &[], &[]), C64::new(*w, 0.0)));
        }
        for (j, f) in &self.big_omega {
            for (k, c) in f.iter() {
                if l1(k) <= k_cut {
                    terms.push((TermIndex::new(k, &vec![0; n], &[(*j, 1)], &[(*j, 1)]), c / *j as f64));
                }
            }
        }
        HamSeries::from_terms(modes.clone(), k_cut, d_cut, true, terms)
    }
}
