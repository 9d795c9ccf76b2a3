//! Removal of the angle dependence of the `(x, y)` part after the Birkhoff
//! normal form, around a fixed normal datum `z(0)`.

use nf_core::fourier::{dot, l1, Fourier};
use nf_core::modes::SiteMap;
use nf_core::{lie_transform, HamSeries, LiePlan, TermIndex, C64};
use serde::Serialize;
use smallvec::SmallVec;
use std::collections::BTreeMap;

use crate::error::{EngineError, Result};

/// `|z_j(0)|^2` per normal site.
pub type DatumActions = BTreeMap<i32, f64>;

pub fn datum_actions(z0: &BTreeMap<i32, C64>) -> DatumActions {
    z0.iter().map(|(j, c)| (*j, c.norm_sqr())).collect()
}

/// `||z0||_p` with weights `|j|^p`.
pub fn datum_norm(z0: &BTreeMap<i32, C64>, p: f64) -> f64 {
    z0.iter().map(|(j, c)| c.norm_sqr() * (j.abs() as f64).powf(2.0 * p)).sum::<f64>().sqrt()
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Paired part in the basis `w_j = |z_j|^2 - |z_j(0)|^2`, and the unpaired rest.
///
/// In `paired` a monomial with `mu = gamma = beta` stands for `w^beta`.
#[derive(Clone, Debug)]
pub struct WBasis {
    pub paired: HamSeries,
    pub rest: HamSeries,
}

fn expand(paired: &HamSeries, c: &DatumActions, sign: f64) -> HamSeries {
    let mut out = paired.empty_like();
    for (t, coeff) in paired.iter() {
        // prod_j (w_j + sign c_j)^{beta_j}
        let mut acc: Vec<(SiteMap, f64)> = vec![(SiteMap::new(), 1.0)];
        for (j, b) in t.mu.iter() {
            let cj = sign * c.get(j).copied().unwrap_or(0.0);
            let mut next = Vec::new();
            for (s, v) in &acc {
                for e in 0..=*b {
                    let w = binom(*b, e) * if *b - e == 0 { 1.0 } else { cj.powi((*b - e) as i32) };
                    if w == 0.0 {
                        continue;
                    }
                    let mut s2 = s.clone();
                    if e > 0 {
                        s2.push((*j, e));
                    }
                    next.push((s2, v * w));
                }
            }
            acc = next;
        }
        for (s, v) in acc {
            let term = TermIndex { k: t.k.clone(), alpha: t.alpha.clone(), mu: s.clone(), gamma: s };
            out.add_term(term, coeff * v);
        }
    }
    out
}

/// Exact binomial re-expansion of the paired terms around `|z(0)|^2`.
pub fn to_w_basis(h: &HamSeries, c: &DatumActions) -> WBasis {
    let paired = h.filter(|t| t.mu == t.gamma);
    WBasis { paired: expand(&paired, c, 1.0), rest: h.filter(|t| t.mu != t.gamma) }
}

pub fn from_w_basis(w: &WBasis, c: &DatumActions) -> Result<HamSeries> {
    Ok(expand(&w.paired, c, -1.0).add(&w.rest)?)
}

/// The `(x, y)` part: the paired terms at `w = 0`, as `alpha -> A^alpha(x)`.
pub fn xy_part(h: &HamSeries, c: &DatumActions) -> BTreeMap<SmallVec<[u32; 4]>, Fourier> {
    let n = h.n();
    let mut out: BTreeMap<SmallVec<[u32; 4]>, Fourier> = BTreeMap::new();
    for (t, coeff) in h.iter() {
        if t.mu != t.gamma {
            continue;
        }
        let v: f64 = t.mu.iter().map(|(j, b)| c.get(j).copied().unwrap_or(0.0).powi(*b as i32)).product();
        if v != 0.0 {
            out.entry(t.alpha.clone()).or_insert_with(|| Fourier::zero(n)).add(t.k.to_vec(), coeff * v);
        }
    }
    out
}

/// Largest `sup_x |A^alpha - [A^alpha]|`, bounded by the l1 sum of the oscillating modes.
pub fn oscillation(f: &Fourier) -> f64 {
    f.zero_mean().iter().map(|(_, c)| c.norm()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct XRemovalConfig {
    pub m: u32,
    pub n_split: i32,
    pub delta: f64,
    pub eta_acute: f64,
    pub tau: f64,
    /// Extra rounds allowed beyond the budget.
    pub extra_rounds: usize,
    pub tol: f64,
    pub lie_order_cap: usize,
}

impl Default for XRemovalConfig {
    fn default() -> Self {
        XRemovalConfig { m: 2, n_split: 4, delta: 0.05, eta_acute: 0.1, tau: 3.0, extra_rounds: 8, tol: 1e-10, lie_order_cap: 24 }
    }
}

impl XRemovalConfig {
    pub fn varrho(&self) -> f64 {
        self.m.max(1) as f64 / (self.n_split * self.n_split) as f64
    }

    /// `|varrho^{-1} log delta^{-M}|`.
    pub fn k_raw(&self) -> f64 {
        (self.m as f64 * self.delta.ln() / self.varrho()).abs()
    }

    /// `ceil(log2 M)` rounds for the `A` part, then `M - 2` rounds for `y^2, ...`.
    pub fn budget(&self) -> (usize, usize) {
        let a = if self.m <= 1 { 1 } else { (self.m as f64).log2().ceil() as usize };
        (a, self.m.saturating_sub(2) as usize)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct XRoundRow {
    pub round: usize,
    pub stage: String,
    pub max_level: u32,
    pub omega: Vec<f64>,
    pub worst_before: f64,
    pub worst_after: f64,
    pub min_divisor: f64,
    pub generator_norm: f64,
}

#[derive(Clone, Debug)]
pub struct XRemoval {
    /// Total Hamiltonian after the rounds, normal part included.
    pub hamiltonian: HamSeries,
    pub generators: Vec<HamSeries>,
    pub rows: Vec<XRoundRow>,
    pub omega_star: Vec<f64>,
    /// Worst relative x-dependence over `|alpha| <= M+2` at the end.
    pub worst: f64,
    pub budget_rounds: usize,
    pub extra_rounds_used: usize,
    /// `||B^beta||` per w-exponent, on `|Im x| <= s`, `|y| <= delta^2`.
    pub b_norms: BTreeMap<String, f64>,
}

/// Relative x-dependence per level, against `max(|mean|, initial scale)`.
fn dependence(xy: &BTreeMap<SmallVec<[u32; 4]>, Fourier>, scales: &BTreeMap<SmallVec<[u32; 4]>, f64>, top: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, f) in xy {
        if a.iter().sum::<u32>() > top {
            continue;
        }
        let osc = oscillation(f);
        if osc == 0.0 {
            continue;
        }
        let scale = f.mean().norm().max(scales.get(a).copied().unwrap_or(0.0));
        worst = worst.max(osc / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

/// Iterate `(x, y)` KAM rounds on the total Hamiltonian `h`.
pub fn remove_x_dependence(h: &HamSeries, cfg: &XRemovalConfig, z0: &BTreeMap<i32, C64>, p: f64) -> Result<XRemoval> {
    if datum_norm(z0, p) > cfg.delta * (1.0 + 1e-12) {
        return Err(EngineError::Config(format!("||z0||_p = {} exceeds delta = {}", datum_norm(z0, p), cfg.delta)));
    }
    let n = h.n();
    let c = datum_actions(z0);
    let top = cfg.m + 2;
    let k_cut = h.fourier_cutoff();
    let k_used = if cfg.k_raw() >= k_cut as f64 { k_cut } else { cfg.k_raw().floor() as u32 };
    let (ba, by) = cfg.budget();
    let budget = ba + by;
    let xy0 = xy_part(h, &c);
    let scales: BTreeMap<_, _> = xy0.iter().map(|(a, f)| (a.clone(), f.max_abs())).collect();
    let mut cur = h.clone();
    let mut rows = Vec::new();
    let mut gens = Vec::new();
    let mut round = 0;
    loop {
        let xy = xy_part(&cur, &c);
        let worst_before = dependence(&xy, &scales, top);
        if round >= budget && worst_before <= cfg.tol {
            break;
        }
        if round >= budget + cfg.extra_rounds {
            return Err(EngineError::Rounds { rounds: round, defect: worst_before });
        }
        let (stage, level) = if round < ba {
            ("A", 1)
        } else if round < budget {
            ("Z", (round - ba + 2) as u32)
        } else {
            ("extra", top)
        };
        let omega: Vec<f64> = (0..n)
            .map(|i| {
                let mut a: SmallVec<[u32; 4]> = SmallVec::from_elem(0, n);
                a[i] = 1;
                xy.get(&a).map_or(0.0, |f| f.mean().re)
            })
            .collect();
        let mut f = cur.empty_like();
        let mut min_div = f64::INFINITY;
        for (a, coeff) in &xy {
            let deg: u32 = a.iter().sum();
            let in_stage = if stage == "Z" { deg == level } else { deg <= level };
            if !in_stage {
                continue;
            }
            for (k, v) in coeff.zero_mean().iter() {
                if l1(k) > k_used {
                    continue;
                }
                let dv = dot(k, &omega);
                let bound = cfg.eta_acute / (1.0 + (l1(k) as f64).powf(cfg.tau));
                if dv.abs() < bound {
                    return Err(EngineError::Resonance { k: k.clone(), l: vec![], divisor: dv.abs(), bound });
                }
                min_div = min_div.min(dv.abs());
                let t = TermIndex { k: k.iter().copied().collect(), alpha: a.clone(), mu: SiteMap::new(), gamma: SiteMap::new() };
                f.add_term(t, v / C64::new(0.0, dv));
            }
        }
        let s = cfg.varrho();
        let plan = LiePlan::new(cfg.lie_order_cap, s, cfg.delta);
        let out = lie_transform(&cur, &f, &plan)?;
        cur = out.series;
        let worst_after = dependence(&xy_part(&cur, &c), &scales, top);
        rows.push(XRoundRow {
            round,
            stage: stage.into(),
            max_level: level,
            omega,
            worst_before,
            worst_after,
            min_divisor: min_div,
            generator_norm: f.max_abs(),
        });
        gens.push(f);
        round += 1;
    }
    let xy = xy_part(&cur, &c);
    let omega_star = (0..n)
        .map(|i| {
            let mut a: SmallVec<[u32; 4]> = SmallVec::from_elem(0, n);
            a[i] = 1;
            xy.get(&a).map_or(0.0, |f| f.mean().re)
        })
        .collect();
    let wb = to_w_basis(&cur, &c);
    let mut b_norms: BTreeMap<String, f64> = BTreeMap::new();
    let s = cfg.varrho();
    for (t, coeff) in wb.paired.iter() {
        if t.mu.is_empty() {
            continue;
        }
        let key = t.mu.iter().map(|(j, b)| format!("w{j}^{b}")).collect::<Vec<_>>().join(" ");
        let y: u32 = t.alpha.iter().sum();
        *b_norms.entry(key).or_insert(0.0) += coeff.norm() * (l1(&t.k) as f64 * s).exp() * cfg.delta.powi(2 * y as i32);
    }
    Ok(XRemoval {
        worst: dependence(&xy, &scales, top),
        hamiltonian: cur,
        generators: gens,
        rows,
        omega_star,
        budget_rounds: budget.min(round),
        extra_rounds_used: round.saturating_sub(budget),
        b_norms,
    })
}
