//! Monte Carlo over the parameter box for the resonant sets of the partial
//! normal form, and finite differences of the frequency map.

use nf_core::fourier::{l1, l1_modes};
use nf_core::solve::DioParams;
use nf_core::NormalForm;
use nf_dnls::{build_hamiltonian, DnlsConfig};
use nf_engine::birkhoff::resonance_threshold;
use nf_engine::{run_kam, BirkhoffConfig, KamOptions, KamSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThresholdMode {
    /// `eta M_l / (4^M (1+|k|)^tau N^{(|l_acute|+4)^2})`.
    Paper,
    /// `eta eps / (1+|k|)^tau`, with `eta` standing for `eta^6`.
    Eta6Eps,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureConfig {
    pub tangent: Vec<i32>,
    pub jmax: i32,
    pub n_split: i32,
    pub m: u32,
    pub kmax: u32,
    pub tau: f64,
    pub mode: ThresholdMode,
    pub eps: f64,
    /// Allowance for the distance between the run's frequency table and the unperturbed box.
    pub table_slack: f64,
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tangent.is_empty() || self.n_split < 1 || self.n_split > self.jmax || self.tau <= 0.0 {
            return Err(LabError::Config(format!("measure config {self:?}")));
        }
        Ok(())
    }

    pub fn normal_sites(&self) -> Vec<i32> {
        (-self.jmax..=self.jmax).filter(|j| *j != 0 && !self.tangent.contains(j)).collect()
    }

    fn birkhoff(&self) -> BirkhoffConfig {
        BirkhoffConfig { m: self.m, n_split: self.n_split, tau: self.tau, eta_acute: 1.0, ..Default::default() }
    }

    /// Gap constants over the box: `Omega_j / j^2` lies in `[c1, c2]`.
    pub fn gaps(&self) -> (f64, f64) {
        let ratio = |j: i32, x: f64| 1.0 + x / (j.abs() as f64).powi(3);
        let sites = self.normal_sites();
        let c1 = sites.iter().map(|j| ratio(*j, 1.0)).fold(f64::INFINITY, f64::min);
        let c2 = sites.iter().map(|j| ratio(*j, 2.0)).fold(0.0, f64::max);
        (c1, c2)
    }

    /// Largest `|omega_i|` over the box.
    pub fn omega_max(&self) -> f64 {
        self.tangent.iter().map(|j| omega_hi(*j)).fold(0.0, f64::max)
    }

    /// `j_* = (8/c1)(|k| |omega| + c2 (M+2) N^2)`.
    pub fn j_star(&self, k: &[i32]) -> f64 {
        let (c1, c2) = self.gaps();
        8.0 / c1 * (l1(k) as f64 * self.omega_max() + c2 * (self.m + 2) as f64 * (self.n_split * self.n_split) as f64)
    }

    /// `j_** = C |k| + (M+2) N / 2` with `C = max |j_i|`.
    pub fn j_star2(&self, k: &[i32]) -> f64 {
        let c = self.tangent.iter().map(|j| j.abs()).max().unwrap_or(1) as f64;
        c * l1(k) as f64 + (self.m + 2) as f64 * self.n_split as f64 / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ResonanceQuery {
    pub k: Vec<i32>,
    pub l_acute: Vec<(i32, i32)>,
    pub l_hat: Vec<(i32, i32)>,
}

impl ResonanceQuery {
    pub fn l(&self) -> Vec<(i32, i32)> {
        let mut v: Vec<(i32, i32)> = self.l_acute.iter().chain(&self.l_hat).copied().collect();
        v.sort();
        v
    }

    pub fn size(&self) -> (u32, u32) {
        let s = |v: &[(i32, i32)]| v.iter().map(|(_, c)| c.unsigned_abs()).sum();
        (s(&self.l_acute), s(&self.l_hat))
    }

    /// `M_{l}`: largest touched site, 1 without normal sites.
    pub fn m_l(&self) -> f64 {
        self.l().iter().map(|(j, _)| j.unsigned_abs()).max().unwrap_or(1) as f64
    }

    /// Threshold at `eta = 1`.
    pub fn base_threshold(&self, cfg: &MeasureConfig) -> f64 {
        match cfg.mode {
            ThresholdMode::Paper => resonance_threshold(&cfg.birkhoff(), &self.k, &self.l()),
            ThresholdMode::Eta6Eps => cfg.eps / (1.0 + l1(&self.k) as f64).powf(cfg.tau),
        }
    }

    /// Divisor `<k, omega> + <l, Omega>` at a frequency table.
    pub fn divisor(&self, omega: &[f64], big: &BTreeMap<i32, f64>) -> f64 {
        self.k.iter().zip(omega).map(|(k, w)| *k as f64 * w).sum::<f64>()
            + self.l().iter().map(|(j, v)| *v as f64 * big[j]).sum::<f64>()
    }

    fn is_case3(&self) -> Option<i32> {
        match self.l_hat.as_slice() {
            [(a, s), (b, t)] if *a == -*b && *s == -*t && s.abs() == 1 => Some(a.abs()),
            _ => None,
        }
    }

    /// Canonical representative of `{q, -q}`: first nonzero entry positive.
    fn is_canonical(&self) -> bool {
        let first = self.k.iter().copied().find(|v| *v != 0).or_else(|| self.l().first().map(|e| e.1));
        first.is_some_and(|v| v > 0)
    }
}

/// Lower bound of `|<l^, Omega^>|` over the box `xi_j in [1,2]/|j|`.
fn hat_gap(l_hat: &[(i32, i32)]) -> f64 {
    let lo = |j: i32| (j * j) as f64 + 1.0 / j.abs() as f64;
    match l_hat {
        [] => 0.0,
        [(i, v)] => lo(*i) * v.abs() as f64,
        [(i, s), (j, t)] if s.signum() == t.signum() => lo(*i) + lo(*j),
        [(i, _), (j, _)] => ((i * i - j * j).abs() as f64 - 2.0 / i.abs().min(j.abs()) as f64).max(0.0),
        _ => 0.0,
    }
}

/// Upper bound of `|Omega_j|` over the box.
fn omega_hi(j: i32) -> f64 {
    (j * j) as f64 + 2.0 / j.abs() as f64
}

/// The kept-query rule, shared by the structured enumerator and brute-force checks.
pub fn keep_query(q: &ResonanceQuery, cfg: &MeasureConfig) -> bool {
    let (la, lh) = q.size();
    if l1(&q.k) + la + lh == 0 || la + lh > cfg.m + 2 || lh > 2 || !q.is_canonical() {
        return false;
    }
    if lh == 0 {
        return true;
    }
    let rest_bound = l1(&q.k) as f64 * cfg.omega_max()
        + q.l_acute.iter().map(|(j, v)| v.abs() as f64 * omega_hi(*j)).sum::<f64>()
        + cfg.table_slack;
    if let Some(i) = q.is_case3() {
        return (l1(&q.k) + la != 0) && (i as f64) <= cfg.j_star2(&q.k);
    }
    let far = q.l_hat.iter().map(|(j, _)| j.abs()).max().unwrap_or(0) as f64 >= cfg.j_star(&q.k);
    !far && hat_gap(&q.l_hat) - rest_bound <= q.base_threshold(cfg)
}

fn signed_vectors(sites: &[i32], total: u32) -> Vec<Vec<(i32, i32)>> {
    let mut out = vec![vec![]];
    fn rec(sites: &[i32], left: u32, cur: &mut Vec<(i32, i32)>, out: &mut Vec<Vec<(i32, i32)>>) {
        for (idx, &j) in sites.iter().enumerate() {
            for mag in 1..=left as i32 {
                for v in [mag, -mag] {
                    cur.push((j, v));
                    out.push(cur.clone());
                    rec(&sites[idx + 1..], left - mag as u32, cur, out);
                    cur.pop();
                }
            }
        }
    }
    rec(sites, total, &mut vec![], &mut out);
    out
}

/// Every kept `(k, l_acute, l_hat)` with `|k| <= kmax`.
pub fn enumerate_queries(cfg: &MeasureConfig) -> Result<Vec<ResonanceQuery>> {
    cfg.validate()?;
    let normal = cfg.normal_sites();
    let acute: Vec<i32> = normal.iter().copied().filter(|j| j.abs() <= cfg.n_split).collect();
    let hat: Vec<i32> = normal.iter().copied().filter(|j| j.abs() > cfg.n_split).collect();
    let mut out = Vec::new();
    let hats = signed_vectors(&hat, 2);
    for la in signed_vectors(&acute, cfg.m + 2) {
        let na: u32 = la.iter().map(|(_, v)| v.unsigned_abs()).sum();
        for lh in &hats {
            let nh: u32 = lh.iter().map(|(_, v)| v.unsigned_abs()).sum();
            if na + nh > cfg.m + 2 {
                continue;
            }
            for k in l1_modes(cfg.tangent.len(), cfg.kmax) {
                let q = ResonanceQuery { k, l_acute: la.clone(), l_hat: lh.clone() };
                if keep_query(&q, cfg) {
                    out.push(q);
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Frequencies as a function of the parameters: a base table plus the identity
/// derivative `d Omega_j / d xi_j = 1`, `d omega_i / d xi_{j_i} = sgn j_i`.
#[derive(Clone, Debug)]
pub struct FrequencyModel {
    pub tangent: Vec<i32>,
    pub omega0: Vec<f64>,
    pub big0: BTreeMap<i32, f64>,
    pub xi0: BTreeMap<i32, f64>,
}

impl FrequencyModel {
    /// Unperturbed table `lambda_j = j^2 + xi_j` at `xi0`.
    pub fn unperturbed(tangent: &[i32], xi0: &BTreeMap<i32, f64>) -> Self {
        let lam = |j: i32| (j * j) as f64 + xi0[&j];
        FrequencyModel {
            tangent: tangent.to_vec(),
            omega0: tangent.iter().map(|j| j.signum() as f64 * lam(*j)).collect(),
            big0: xi0.keys().filter(|j| !tangent.contains(j)).map(|j| (*j, lam(*j))).collect(),
            xi0: xi0.clone(),
        }
    }

    /// Post-KAM table at `xi0`.
    pub fn from_normal_form(tangent: &[i32], nf: &NormalForm, xi0: &BTreeMap<i32, f64>) -> Self {
        FrequencyModel {
            tangent: tangent.to_vec(),
            omega0: nf.omega.clone(),
            big0: nf.big_omega.keys().map(|j| (*j, nf.mean(*j))).collect(),
            xi0: xi0.clone(),
        }
    }

    pub fn at(&self, xi: &BTreeMap<i32, f64>) -> (Vec<f64>, BTreeMap<i32, f64>) {
        let d = |j: &i32| xi.get(j).copied().unwrap_or(self.xi0[j]) - self.xi0[j];
        let omega = self.tangent.iter().zip(&self.omega0).map(|(j, w)| w + j.signum() as f64 * d(j)).collect();
        let big = self.big0.iter().map(|(j, w)| (*j, w + d(j))).collect();
        (omega, big)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureRow {
    pub eta: f64,
    pub removed_fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub rows: Vec<MeasureRow>,
    pub slope: f64,
    pub queries: usize,
    pub active_queries: usize,
    pub active_sites: Vec<i32>,
}

/// Least-squares slope of `log y` against `log x` over the positive entries.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Removed fraction of the parameter box for each `eta`, with 200-resample bootstrap intervals.
pub fn measure_estimate(
    cfg: &MeasureConfig,
    model: &FrequencyModel,
    etas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MeasureReport> {
    if samples < 1000 {
        return Err(LabError::Config(format!("need at least 1000 samples, got {samples}")));
    }
    let queries = enumerate_queries(cfg)?;
    let eta_max = etas.iter().copied().fold(0.0, f64::max);
    // a query is active only if its affine divisor can reach its threshold inside the box
    let mut active = Vec::new();
    for q in &queries {
        let (w, b) = model.at(&model.xi0);
        let center = q.divisor(&w, &b);
        // affine in xi: centre of the box plus half-width spread
        let (mut mid, mut spread) = (center, 0.0);
        let mut touch = |j: i32, c: f64| {
            mid += c * (1.5 / j.abs() as f64 - model.xi0[&j]);
            spread += c.abs() * 0.5 / j.abs() as f64;
        };
        for (kv, j) in q.k.iter().zip(&model.tangent) {
            touch(*j, *kv as f64 * j.signum() as f64);
        }
        for (j, v) in q.l() {
            touch(j, v as f64);
        }
        let th = eta_max * q.base_threshold(cfg);
        if mid.abs() - spread <= th {
            active.push((q.clone(), q.base_threshold(cfg)));
        }
    }
    let mut sites: Vec<i32> = model.tangent.clone();
    for (q, _) in &active {
        sites.extend(q.l().iter().map(|e| e.0));
    }
    sites.sort();
    sites.dedup();

    // r(xi) = min_q |divisor| / threshold_q(1): resonant at eta iff r <= eta
    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let xi: BTreeMap<i32, f64> = sites.iter().map(|j| (*j, rng.gen_range(1.0..2.0) / j.abs() as f64)).collect();
            let (w, b) = model.at(&xi);
            active.iter().map(|(q, th)| q.divisor(&w, &b).abs() / th).fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let boots: Vec<Vec<usize>> = (0..200).map(|_| (0..samples).map(|_| rng.gen_range(0..samples)).collect()).collect();
    let mut rows = Vec::new();
    for &eta in etas {
        let flag: Vec<bool> = ratios.iter().map(|r| *r <= eta).collect();
        let frac = flag.iter().filter(|f| **f).count() as f64 / samples as f64;
        let mut bs: Vec<f64> =
            boots.iter().map(|idx| idx.iter().filter(|i| flag[**i]).count() as f64 / samples as f64).collect();
        bs.sort_by(f64::total_cmp);
        rows.push(MeasureRow { eta, removed_fraction: frac, ci_lo: bs[4], ci_hi: bs[195], n_samples: samples });
    }
    let slope = loglog_slope(etas, &rows.iter().map(|r| r.removed_fraction).collect::<Vec<_>>());
    Ok(MeasureReport { rows, slope, queries: queries.len(), active_queries: active.len(), active_sites: sites })
}

/// Whether the frequency table at `xi` is flagged resonant at `eta`, and by which query.
pub fn resonant_query(
    cfg: &MeasureConfig,
    queries: &[ResonanceQuery],
    omega: &[f64],
    big: &BTreeMap<i32, f64>,
    eta: f64,
) -> Option<ResonanceQuery> {
    queries.iter().find(|q| q.divisor(omega, big).abs() <= eta * q.base_threshold(cfg)).cloned()
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeRow {
    pub a: i32,
    pub target: String,
    pub site: i32,
    pub derivative: f64,
    /// `|d - delta| |a| / (|j| eps)` for normal sites, `|d| |a| / eps` for tangent ones.
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeReport {
    pub rows: Vec<DerivativeRow>,
    pub fitted_c: f64,
}

/// Settings of the KAM runs inside the frequency-derivative check.
#[derive(Clone, Debug)]
pub struct KamRecipe {
    pub k_cut: u32,
    pub d_cut: u32,
    pub steps: usize,
    pub schedule: KamSchedule,
    pub dio: DioParams,
    pub options: KamOptions,
}

fn post_kam(cfg: &DnlsConfig, r: &KamRecipe) -> Result<NormalForm> {
    let m = build_hamiltonian(cfg, r.k_cut, r.d_cut)?;
    if cfg.eps == 0.0 {
        return Ok(m.normal_form);
    }
    Ok(run_kam(&m.normal_form, &m.perturbation, &r.schedule, r.steps, &r.dio, &r.options)?.normal_form)
}

/// Central differences `d/d xi_a` of the post-KAM frequencies, step `h = rel_step xi_a`.
pub fn frequency_derivative_check(cfg: &DnlsConfig, recipe: &KamRecipe, params: &[i32], rel_step: f64) -> Result<DerivativeReport> {
    let mut rows = Vec::new();
    let eps = cfg.eps.max(f64::MIN_POSITIVE);
    for &a in params {
        if cfg.tangent.contains(&a) {
            return Err(LabError::Config(format!("parameter site {a} is a tangent site")));
        }
        let h = rel_step * cfg.xi[&a];
        let mut plus = cfg.clone();
        plus.xi.insert(a, cfg.xi[&a] + h);
        let mut minus = cfg.clone();
        minus.xi.insert(a, cfg.xi[&a] - h);
        let (np, nm) = (post_kam(&plus, recipe)?, post_kam(&minus, recipe)?);
        for (i, j) in cfg.tangent.iter().enumerate() {
            let d = (np.omega[i] - nm.omega[i]) / (2.0 * h);
            rows.push(DerivativeRow { a, target: "omega".into(), site: *j, derivative: d, scaled: d.abs() * a.abs() as f64 / eps });
        }
        for j in np.big_omega.keys() {
            let d = (np.mean(*j) - nm.mean(*j)) / (2.0 * h);
            let delta = if *j == a { 1.0 } else { 0.0 };
            rows.push(DerivativeRow {
                a,
                target: "Omega".into(),
                site: *j,
                derivative: d,
                scaled: (d - delta).abs() * a.abs() as f64 / (j.abs() as f64 * eps),
            });
        }
    }
    let fitted_c = if cfg.eps == 0.0 { 0.0 } else { rows.iter().map(|r| r.scaled).fold(0.0, f64::max) };
    Ok(DerivativeReport { rows, fitted_c })
}
