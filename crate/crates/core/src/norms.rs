//! Domains and majorant norms.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fourier::l1;
use crate::modes::{SiteMap, TermIndex};
use crate::series::HamSeries;

/// Complex neighbourhood `D(s, r, r)` with Sobolev weight `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainSpec {
    pub s: f64,
    pub r: f64,
    pub p: f64,
}

impl DomainSpec {
    pub fn new(s: f64, r: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0 && r > 0.0 && r <= 1.0 && p >= 1.0) {
            return Err(Error::Invalid(format!("domain (s={s}, r={r}, p={p}) out of range")));
        }
        Ok(DomainSpec { s, r, p })
    }
}

type Key = (Vec<u32>, SiteMap, SiteMap);

fn key(t: &TermIndex) -> Key {
    (t.alpha.to_vec(), t.mu.clone(), t.gamma.clone())
}

/// `M_{mu gamma}`: largest touched |site|, and 1 for terms without normal variables.
pub fn site_weight(t: &TermIndex) -> f64 {
    t.mu
        .iter()
        .chain(t.gamma.iter())
        .map(|e| e.0.unsigned_abs())
        .max()
        .unwrap_or(1)
        .max(1) as f64
}

/// `||W^{alpha mu gamma}||_{D(s)}` for every coefficient function of `h`.
pub fn coefficient_norms(h: &HamSeries, s: f64) -> Result<BTreeMap<Key, (u32, f64, f64)>> {
    let mut acc: BTreeMap<Key, (u32, f64, f64)> = BTreeMap::new();
    for (t, c) in h.iter() {
        let e = acc.entry(key(t)).or_insert((t.degree(), site_weight(t), 0.0));
        e.2 += c.norm() * (l1(&t.k) as f64 * s).exp();
    }
    for v in acc.values() {
        if !v.2.is_finite() {
            return Err(Error::Overflow);
        }
    }
    Ok(acc)
}

/// `(|||H|||, |||H|||*)` on the domain `d`.
pub fn majorant_norms(h: &HamSeries, d: &DomainSpec) -> Result<(f64, f64)> {
    majorant_norms_at(h, d.s, d.r)
}

pub fn majorant_norms_at(h: &HamSeries, s: f64, r: f64) -> Result<(f64, f64)> {
    let mut by_deg: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for (deg, m, w) in coefficient_norms(h, s)?.into_values() {
        let e = by_deg.entry(deg).or_insert((0.0, 0.0));
        e.0 = e.0.max(w);
        e.1 = e.1.max(m * w);
    }
    let mut plain = 0.0;
    let mut star = 0.0;
    for (deg, (a, b)) in by_deg {
        let rh = r.powi(deg as i32);
        plain += rh * a;
        star += rh * b;
    }
    if plain.is_finite() && star.is_finite() {
        Ok((plain, star))
    } else {
        Err(Error::Overflow)
    }
}

/// Shorthand for the plain majorant norm.
pub fn triple(h: &HamSeries, s: f64, r: f64) -> f64 {
    majorant_norms_at(h, s, r).map(|v| v.0).unwrap_or(f64::INFINITY)
}
