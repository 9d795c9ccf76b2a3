//! The quartic lattice Hamiltonian in action-angle variables on the tangent modes.

use nf_core::{HamSeries, ModeSystem, NormalForm, TermIndex, C64};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::config::DnlsConfig;
use crate::error::Result;

/// `N + P` with the bookkeeping needed downstream.
#[derive(Clone, Debug)]
pub struct Model {
    pub modes: Arc<ModeSystem>,
    pub normal_form: NormalForm,
    pub perturbation: HamSeries,
    /// l1 mass of the first dropped Taylor orders of the square roots.
    pub taylor_tail: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
struct Shape {
    plus: Vec<u32>,
    minus: Vec<u32>,
    mu: Vec<(i32, u32)>,
    gamma: Vec<(i32, u32)>,
}

/// Generalised binomial coefficient `binom(a, m)`.
fn binom(a: f64, m: u32) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (a - i as f64) / (i + 1) as f64)
}

/// Count every ordered quadruple `q_a qbar_b q_c qbar_d` with `a - b + c - d = 0`.
fn quadruples(cfg: &DnlsConfig) -> BTreeMap<Shape, u64> {
    let sites: Vec<i32> = (-cfg.jmax..=cfg.jmax).filter(|j| *j != 0).collect();
    let n = cfg.tangent.len();
    let mut out = BTreeMap::new();
    for &a in &sites {
        for &b in &sites {
            for &c in &sites {
                let d = a - b + c;
                if d == 0 || d.abs() > cfg.jmax {
                    continue;
                }
                let mut sh = Shape { plus: vec![0; n], minus: vec![0; n], ..Default::default() };
                for (site, conj) in [(a, false), (b, true), (c, false), (d, true)] {
                    match cfg.tangent.iter().position(|t| *t == site) {
                        Some(i) if conj => sh.minus[i] += 1,
                        Some(i) => sh.plus[i] += 1,
                        None if conj => sh.gamma.push((site, 1)),
                        None => sh.mu.push((site, 1)),
                    }
                }
                sh.mu.sort_unstable();
                sh.gamma.sort_unstable();
                *out.entry(sh).or_insert(0) += 1;
            }
        }
    }
    out
}

/// `H = N + P` with `P = (eps/4) (1/2pi) sum q_a qbar_b q_c qbar_d`, the square roots
/// `sqrt(zeta + y)` expanded to total degree `d_cut`.
pub fn build_hamiltonian(cfg: &DnlsConfig, k_cut: u32, d_cut: u32) -> Result<Model> {
    cfg.validate()?;
    let modes = Arc::new(ModeSystem::new(cfg.tangent.clone(), cfg.jmax)?);
    let n = cfg.tangent.len();
    let normal: BTreeMap<i32, f64> = modes.normal_sites().iter().map(|&j| (j, cfg.lambda(j))).collect();
    let mut nf = NormalForm::new(cfg.omega(), &normal);
    nf.energy = cfg.omega().iter().zip(&cfg.zeta).map(|(w, z)| w * z).sum();

    let mut terms: Vec<(TermIndex, C64)> = Vec::new();
    let mut tail = 0.0;
    if cfg.eps != 0.0 {
        let base = cfg.eps / (8.0 * PI);
        for (sh, count) in quadruples(cfg) {
            let zdeg = (sh.mu.len() + sh.gamma.len()) as u32;
            let mut k = vec![0i32; n];
            let mut pref = base * count as f64;
            let mut half = vec![0f64; n];
            for i in 0..n {
                let j = cfg.tangent[i];
                let diff = sh.plus[i] as i32 - sh.minus[i] as i32;
                k[i] = if j > 0 { diff } else { -diff };
                let t = sh.plus[i] + sh.minus[i];
                pref *= (j.abs() as f64).powf(0.5 * t as f64);
                half[i] = 0.5 * t as f64;
            }
            // product over tangent modes of sum_m binom(t/2, m) zeta^{t/2-m} y^m
            let ymax = (d_cut + 2).saturating_sub(zdeg) / 2;
            let mut stack: Vec<(Vec<u32>, f64)> = vec![(vec![], pref)];
            for i in 0..n {
                let mut next = Vec::new();
                for (alpha, c) in &stack {
                    let used: u32 = alpha.iter().sum();
                    let max_m = if half[i] == 0.0 { 0 } else { ymax.saturating_sub(used) };
                    for m in 0..=max_m {
                        let coef = binom(half[i], m) * cfg.zeta[i].powf(half[i] - m as f64);
                        if coef == 0.0 {
                            break;
                        }
                        let mut a = alpha.clone();
                        a.push(m);
                        next.push((a, c * coef));
                    }
                }
                stack = next;
            }
            for (alpha, c) in stack {
                let deg = 2 * alpha.iter().sum::<u32>() + zdeg;
                let t = TermIndex::new(&k, &alpha, &sh.mu, &sh.gamma);
                if deg <= d_cut && t.k_l1() <= k_cut {
                    terms.push((t, C64::new(c, 0.0)));
                } else if deg <= d_cut + 2 {
                    tail += c.abs();
                }
            }
        }
    }
    let perturbation = HamSeries::from_terms(modes.clone(), k_cut, d_cut, true, terms)?;
    Ok(Model { modes, normal_form: nf, perturbation, taylor_tail: tail })
}
