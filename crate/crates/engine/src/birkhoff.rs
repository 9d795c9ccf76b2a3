//! Partial normal form of order `M+2` around the torus, with the splitting of
//! the normal modes into low (acute, `|j| <= N`) and high (hat, `|j| > N`) sites.

use nf_core::fourier::{dot, l1, Fourier};
use nf_core::modes::SiteMap;
use nf_core::norms::triple;
use nf_core::solve::DioParams;
use nf_core::{lie_increment, lie_transform, poisson_bracket, HamSeries, LiePlan, NormalForm, TermIndex};
use serde::Serialize;
use std::collections::BTreeMap;

use crate::classes::{assemble, check_momentum, group, mirror_coeff, ClassKey, CosetCache};
use crate::error::{EngineError, Result};
use crate::homological::{solve_class, ClassOptions, ClassReport};

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffConfig {
    /// Stability order `M`.
    pub m: u32,
    pub n_split: i32,
    pub rho: f64,
    /// Frequency-gap constants; `None` means measured from the frequency table.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c0: f64,
    pub eta_acute: f64,
    pub tau: f64,
    pub lie_order_cap: usize,
    pub residual_rel: f64,
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        BirkhoffConfig {
            m: 2,
            n_split: 4,
            rho: 0.1,
            c1: None,
            c2: None,
            c0: 201.0,
            eta_acute: 0.1,
            tau: 3.0,
            lie_order_cap: 16,
            residual_rel: 1e-10,
        }
    }
}

impl BirkhoffConfig {
    /// `varrho = M / N^2`.
    pub fn varrho(&self) -> f64 {
        self.m.max(1) as f64 / (self.n_split * self.n_split) as f64
    }

    /// Hard checks, then the advisory window warnings.
    pub fn validate(&self, jmax: i32, n: usize) -> Result<Vec<String>> {
        if self.n_split <= 0 || self.n_split > jmax {
            return Err(EngineError::Config(format!("N_split = {} must lie in 1..={jmax}", self.n_split)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0 && self.eta_acute > 0.0 && self.eta_acute < 1.0) {
            return Err(EngineError::Config(format!("rho = {}, eta_acute = {}", self.rho, self.eta_acute)));
        }
        if self.c0 <= 40.0 * (self.tau + n as f64) {
            return Err(EngineError::Config(format!("C0 = {} must exceed 40(tau+n) = {}", self.c0, 40.0 * (self.tau + n as f64))));
        }
        let mut warn = Vec::new();
        let upper = (self.eta_acute / (2.0 * self.rho)).powf(1.0 / (2.0 * self.c0 * ((self.m + 7) as f64).powi(2)));
        if (self.n_split as f64) >= upper {
            warn.push(format!("N = {} is outside the window N < (eta/2rho)^(1/2C0(M+7)^2) = {upper:.6}", self.n_split));
        }
        Ok(warn)
    }

    /// `M N^2 |log rho|`.
    pub fn k_raw(&self) -> f64 {
        self.m as f64 * (self.n_split * self.n_split) as f64 * self.rho.ln().abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TermClass {
    Z,
    R,
    Q,
    T,
}

fn hat_count(s: &SiteMap, n_split: i32) -> u32 {
    s.iter().filter(|(j, _)| j.abs() > n_split).map(|(_, p)| *p).sum()
}

/// Tag of one monomial.
pub fn class_of(t: &TermIndex, m: u32, n_split: i32) -> TermClass {
    let d = t.degree();
    if d < 3 || d > m + 2 {
        return TermClass::T;
    }
    let hats = hat_count(&t.mu, n_split) + hat_count(&t.gamma, n_split);
    if hats >= 3 {
        return TermClass::Q;
    }
    if t.mu == t.gamma && (hats == 2 || t.k.iter().all(|v| *v == 0)) {
        return TermClass::Z;
    }
    TermClass::R
}

#[derive(Clone, Debug)]
pub struct Classified {
    pub z: HamSeries,
    pub r: HamSeries,
    pub q: HamSeries,
    pub t: HamSeries,
}

impl Classified {
    pub fn reassemble(&self) -> Result<HamSeries> {
        Ok(self.z.add(&self.r)?.add(&self.q)?.add(&self.t)?)
    }
}

/// Split `H - N` into its `Z, R, Q, T` parts.
pub fn classify_terms(p: &HamSeries, cfg: &BirkhoffConfig) -> Classified {
    let part = |c: TermClass| p.filter(|t| class_of(t, cfg.m, cfg.n_split) == c);
    Classified { z: part(TermClass::Z), r: part(TermClass::R), q: part(TermClass::Q), t: part(TermClass::T) }
}

/// Measured gap constants: `c1 = min [Omega_j]/j^2` and `c2 = max [Omega_j]/j^2`.
pub fn gap_constants(nf: &NormalForm, modes: &nf_core::ModeSystem, cfg: &BirkhoffConfig) -> (f64, f64) {
    let ratios: Vec<f64> = modes.normal_sites().iter().map(|j| nf.mean(*j).abs() / (j * j) as f64).collect();
    let c1 = cfg.c1.unwrap_or_else(|| ratios.iter().copied().fold(f64::INFINITY, f64::min));
    let c2 = cfg.c2.unwrap_or_else(|| ratios.iter().copied().fold(0.0, f64::max));
    (c1, c2)
}

/// `eta M_l / (4^M (|k|+1)^tau C(N, l_acute))` with `C(N,l) = N^{(|l|+4)^2}`.
pub fn resonance_threshold(cfg: &BirkhoffConfig, k: &[i32], l: &[(i32, i32)]) -> f64 {
    let ml = l.iter().filter(|(_, v)| *v != 0).map(|(j, _)| j.unsigned_abs()).max().unwrap_or(1) as f64;
    let acute: i32 = l.iter().filter(|(j, _)| j.abs() <= cfg.n_split).map(|(_, v)| v.abs()).sum();
    let c = (cfg.n_split as f64).powi((acute + 4) * (acute + 4));
    cfg.eta_acute * ml / (4f64.powi(cfg.m as i32) * (l1(k) as f64 + 1.0).powf(cfg.tau) * c)
}

/// `l = mu - gamma` as a sparse signed vector.
pub fn class_l(key: &ClassKey) -> Vec<(i32, i32)> {
    let mut out: BTreeMap<i32, i32> = BTreeMap::new();
    for (j, p) in key.mu.iter() {
        *out.entry(*j).or_insert(0) += *p as i32;
    }
    for (j, p) in key.gamma.iter() {
        *out.entry(*j).or_insert(0) -= *p as i32;
    }
    out.into_iter().filter(|(_, v)| *v != 0).collect()
}

/// `<k, omega> + <l, [Omega]>`.
pub fn divisor(nf: &NormalForm, k: &[i32], l: &[(i32, i32)]) -> f64 {
    dot(k, &nf.omega) + l.iter().map(|(j, v)| *v as f64 * nf.mean(*j)).sum::<f64>()
}

/// Case of a class by its hat part `l^ = mu^ - nu^`, with the Subcase 1 flag for
/// `max |site| >= (8/c1) c2 (M+2) N^2`.
pub fn case_label(key: &ClassKey, cfg: &BirkhoffConfig, subcase_sites: f64) -> (String, bool) {
    let hats: Vec<(i32, i32)> = class_l(key).into_iter().filter(|(j, _)| j.abs() > cfg.n_split).collect();
    let size: i32 = hats.iter().map(|(_, v)| v.abs()).sum();
    let far = hats.iter().map(|(j, _)| j.abs()).max().unwrap_or(0) as f64 >= subcase_sites;
    let case = match size {
        0 => "case4",
        1 => "case1",
        _ if hats.len() == 2 && hats[0].0 == -hats[1].0 => "case3",
        _ => "case2",
    };
    (case.into(), far && (case == "case1" || case == "case2"))
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffRow {
    pub step: u32,
    pub class: String,
    pub case: String,
    pub branch: String,
    pub norm_before: f64,
    pub norm_after: f64,
    pub min_divisor: f64,
    pub threshold_ok: bool,
}

#[derive(Clone, Debug)]
pub struct BirkhoffStep {
    pub j0: u32,
    pub f: HamSeries,
    pub z_hat: HamSeries,
    pub t_hat: HamSeries,
    pub perturbation: HamSeries,
    pub reports: Vec<ClassReport>,
    pub rows: Vec<BirkhoffRow>,
    pub r_before: f64,
    pub r_after: f64,
    pub residual: f64,
    pub k_used: u32,
}

/// Domain widths of step `j0`: `5 varrho - 2 (j0-2) varrho'` with `varrho' = 1/(12 N^2)`.
fn widths(cfg: &BirkhoffConfig, j0: u32) -> (f64, f64) {
    let vp = 1.0 / (12.0 * (cfg.n_split * cfg.n_split) as f64);
    let s = (5.0 * cfg.varrho() - 2.0 * (j0 as f64 - 2.0) * vp).min(1.0);
    (s, s - 2.0 * vp)
}

fn max_coeff(h: &HamSeries) -> f64 {
    h.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
}

/// Eliminate the `R` terms of degree `j0+1`.
pub fn birkhoff_step(nf: &NormalForm, p: &HamSeries, j0: u32, cfg: &BirkhoffConfig, dio: &DioParams) -> Result<BirkhoffStep> {
    let modes = p.modes_arc().clone();
    let n = modes.n();
    let d = j0 + 1;
    let k_cut = p.fourier_cutoff();
    let k_raw = cfg.k_raw();
    let k_used = if k_raw >= k_cut as f64 { k_cut } else { k_raw.floor() as u32 };
    let (s, s_next) = widths(cfg, j0);
    let (c1, c2) = gap_constants(nf, &modes, cfg);
    let subcase_sites = 8.0 / c1 * c2 * (cfg.m + 2) as f64 * (cfg.n_split * cfg.n_split) as f64;
    let copts = ClassOptions { large_threshold: f64::INFINITY, s, s_next, ..Default::default() };

    let n_series = nf.to_series(&modes, k_cut, p.degree_cutoff())?;
    let in_scope = |t: &TermIndex| t.degree() == d && matches!(class_of(t, cfg.m, cfg.n_split), TermClass::R | TermClass::Z);
    let target = p.filter(in_scope);
    let r_before = max_coeff(&target.filter(|t| class_of(t, cfg.m, cfg.n_split) == TermClass::R));
    let mut g = p.empty_like();
    let mut z_hat = p.empty_like();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut keys = Vec::new();
    let mut cosets = CosetCache::new(&modes, k_cut);

    for level in (0..=d / 2).rev() {
        let e = target
            .add(&poisson_bracket(&n_series, &g)?)?
            .filter(|t| in_scope(t) && t.y_degree() == level);
        let classes = group(&e);
        let mut solved: BTreeMap<ClassKey, Fourier> = BTreeMap::new();
        for (key, coeff) in &classes {
            let mut rhs = coeff.clone();
            if key.is_paired() {
                let hats = hat_count(&key.mu, cfg.n_split);
                if hats >= 1 {
                    z_hat = z_hat.add(&assemble(p, [(key, coeff)]))?;
                    continue;
                }
                let mean = Fourier::constant(n, coeff.mean());
                z_hat = z_hat.add(&assemble(p, [(key, &mean)]))?;
                rhs = coeff.zero_mean();
                if rhs.is_empty() {
                    continue;
                }
            } else {
                let mk = key.mirror();
                if e.is_real() && mk < *key && classes.contains_key(&mk) {
                    continue;
                }
            }
            let l = class_l(key);
            let mut worst = f64::INFINITY;
            for (k, _) in rhs.iter() {
                let dv = divisor(nf, k, &l).abs();
                let th = resonance_threshold(cfg, k, &l);
                if dv <= th {
                    return Err(EngineError::Resonance { k: k.clone(), l, divisor: dv, bound: th });
                }
                worst = worst.min(dv);
            }
            let c = nf.combination(&key.mu, &key.gamma);
            let basis = cosets.for_class(key).clone();
            let (sol, mut rep) = solve_class(&nf.omega, &c, &rhs, &basis, dio, &copts)?;
            rep.class = key.label();
            rep.component = format!("degree{d}");
            let (case, subcase1) = case_label(key, cfg, subcase_sites);
            let branch_ok = if subcase1 { rep.branch == "large_coeff" } else { rep.branch != "large_coeff" };
            keys.push(key.clone());
            rows.push(BirkhoffRow {
                step: j0,
                class: key.label(),
                case,
                branch: rep.branch.clone(),
                norm_before: rhs.max_abs(),
                norm_after: 0.0,
                min_divisor: worst,
                threshold_ok: rep.precondition_ok && branch_ok,
            });
            reports.push(rep);
            if !key.is_paired() && e.is_real() && classes.contains_key(&key.mirror()) {
                solved.insert(key.mirror(), mirror_coeff(&sol));
            }
            solved.insert(key.clone(), sol);
        }
        let gl = assemble(p, solved.iter());
        check_momentum(&gl, 0, "birkhoff generator")?;
        g = g.add(&gl)?;
    }

    let f = g.gamma_truncate(k_used);
    let t_hat = poisson_bracket(&n_series, &g.sub(&f)?)?;
    let after_hom = target.add(&poisson_bracket(&n_series, &f)?)?.filter(in_scope);
    let residual_series = after_hom.sub(&z_hat)?.sub(&t_hat.filter(in_scope))?;
    let residual = max_coeff(&residual_series);
    let scale = max_coeff(&target).max(f64::MIN_POSITIVE);
    if residual > cfg.residual_rel * scale {
        return Err(EngineError::Homological { residual, tol: cfg.residual_rel * scale });
    }
    let plan = LiePlan::new(cfg.lie_order_cap, s_next, cfg.rho);
    let lp = lie_transform(p, &f, &plan)?;
    let inc = lie_increment(&n_series, &f, &plan)?;
    let next = lp.series.add(&inc.series)?;
    check_momentum(&next, 0, "birkhoff output")?;
    let after = next.filter(in_scope);
    let r_after = max_coeff(&after.filter(|t| class_of(t, cfg.m, cfg.n_split) == TermClass::R));
    let after_groups = group(&after);
    for (row, key) in rows.iter_mut().zip(&keys) {
        if let Some(f) = after_groups.get(key) {
            row.norm_after = if key.is_paired() { f.zero_mean().max_abs() } else { f.max_abs() };
        }
    }
    Ok(BirkhoffStep { j0, f, z_hat, t_hat, perturbation: next, reports, rows, r_before, r_after, residual, k_used })
}

#[derive(Clone, Debug)]
pub struct BirkhoffRun {
    pub perturbation: HamSeries,
    pub steps: Vec<BirkhoffStep>,
    pub initial_r_scale: f64,
    pub final_r_max: f64,
    pub warnings: Vec<String>,
    pub norms: BTreeMap<String, f64>,
}

/// Steps `j0 = 2, ..., M+1`.
pub fn run_birkhoff(nf: &NormalForm, p: &HamSeries, cfg: &BirkhoffConfig, dio: &DioParams) -> Result<BirkhoffRun> {
    let warnings = cfg.validate(p.modes().lattice_cutoff(), p.n())?;
    let initial = classify_terms(p, cfg);
    let initial_r_scale = max_coeff(&initial.r);
    let mut cur = p.clone();
    let mut steps = Vec::new();
    for j0 in 2..=cfg.m + 1 {
        let st = birkhoff_step(nf, &cur, j0, cfg, dio)?;
        cur = st.perturbation.clone();
        steps.push(st);
    }
    let fin = classify_terms(&cur, cfg);
    let final_r_max = max_coeff(&fin.r);
    let (s, _) = widths(cfg, cfg.m + 2);
    let r = cfg.rho;
    let mut norms = BTreeMap::new();
    for (name, part) in [("Z", &fin.z), ("Q", &fin.q), ("T", &fin.t)] {
        norms.insert(format!("{name}_triple"), triple(part, s.min(1.0), r));
    }
    Ok(BirkhoffRun { perturbation: cur, steps, initial_r_scale, final_r_max, warnings, norms })
}
