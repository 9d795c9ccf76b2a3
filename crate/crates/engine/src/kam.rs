//! One KAM step at finite truncation and the iteration driver.

use nf_core::fourier::{dot, l1, Fourier};
use nf_core::norms::triple;
use nf_core::solve::DioParams;
use nf_core::{lie_increment, lie_transform, poisson_bracket, HamSeries, LiePlan, ModeSystem, NormalForm, TermIndex, C64};
use serde::Serialize;
use std::collections::BTreeMap;

use crate::classes::{assemble, check_momentum, group, mirror_coeff, ClassKey, CosetCache};
use crate::error::{EngineError, Result};
use crate::homological::{solve_class, ClassOptions, ClassReport};

const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Iterative constants of the KAM scheme.
#[derive(Clone, Debug, Serialize)]
pub struct KamSchedule {
    pub eta: f64,
    pub eps: f64,
    /// Common starting width and radius `chi <= min(s0, r0)`.
    pub chi: f64,
    pub tau: f64,
}

impl KamSchedule {
    pub fn new(eta: f64, eps: f64, chi: f64, tau: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0 && eps > 0.0 && eps < 1.0 && chi > 0.0 && chi <= 1.0) {
            return Err(EngineError::Config(format!("schedule eta={eta}, eps={eps}, chi={chi}")));
        }
        Ok(KamSchedule { eta, eps, chi, tau })
    }

    pub fn eta_m(&self, m: usize) -> f64 {
        self.eta * 0.5f64.powi(m as i32)
    }

    /// `eta^12 eps^{(4/3)^m}`.
    pub fn eps_m(&self, m: usize) -> f64 {
        self.eta.powi(12) * self.eps.powf((4.0f64 / 3.0).powi(m as i32))
    }

    pub fn tau_m(&self, m: usize) -> f64 {
        (1..=m).map(|i| 1.0 / (i * i) as f64).sum::<f64>() / (2.0 * ZETA2)
    }

    pub fn s_m(&self, m: usize) -> f64 {
        (1.0 - self.tau_m(m)) * self.chi
    }

    pub fn r_m(&self, m: usize) -> f64 {
        self.s_m(m)
    }

    pub fn sigma_m(&self, m: usize) -> f64 {
        (self.s_m(m) - self.s_m(m + 1)) / 10.0
    }

    /// `|log(1/eps_m) / (r_m - r_{m+1})|`.
    pub fn k_m(&self, m: usize) -> f64 {
        ((1.0 / self.eps_m(m)).ln() / (self.r_m(m) - self.r_m(m + 1))).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Component {
    X,
    Z1,
    Y,
    Z2,
}

impl Component {
    pub const ORDER: [Component; 4] = [Component::X, Component::Z1, Component::Y, Component::Z2];

    pub fn of(t: &TermIndex) -> Option<Component> {
        match (t.degree(), t.y_degree()) {
            (0, _) => Some(Component::X),
            (1, _) => Some(Component::Z1),
            (2, 1) => Some(Component::Y),
            (2, 0) => Some(Component::Z2),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Z1 => "z",
            Component::Y => "y",
            Component::Z2 => "zz",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KamOptions {
    pub class: ClassOptions,
    pub lie_order_cap: usize,
    /// Homological residual tolerance relative to `|||P^low|||`.
    pub residual_rel: f64,
    pub divergence_ratio: f64,
    /// Fourier radius of the non-resonance scan.
    pub scan_k: u32,
}

impl Default for KamOptions {
    fn default() -> Self {
        KamOptions { class: ClassOptions::default(), lie_order_cap: 16, residual_rel: 1e-9, divergence_ratio: 0.9, scan_k: 8 }
    }
}

/// The parts of a normal-form increment `N^`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalIncrement {
    pub energy: f64,
    pub omega: Vec<f64>,
    pub big_omega: BTreeMap<i32, Fourier>,
}

impl NormalIncrement {
    pub fn zero(n: usize) -> Self {
        NormalIncrement { energy: 0.0, omega: vec![0.0; n], big_omega: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.energy == 0.0 && self.omega.iter().all(|w| *w == 0.0) && self.big_omega.values().all(|f| f.is_empty())
    }

    /// `N^` as a series, energy constant included.
    pub fn to_series(&self, template: &HamSeries) -> HamSeries {
        let n = template.n();
        let mut out = template.empty_like();
        if self.energy != 0.0 {
            out.add_term(TermIndex::zero(n), C64::new(self.energy, 0.0));
        }
        for (i, w) in self.omega.iter().enumerate() {
            let mut a = vec![0u32; n];
            a[i] = 1;
            if *w != 0.0 {
                out.add_term(TermIndex::new(&vec![0; n], &a, &[], &[]), C64::new(*w, 0.0));
            }
        }
        for (j, f) in &self.big_omega {
            for (k, c) in f.iter() {
                out.add_term(TermIndex::new(k, &vec![0; n], &[(*j, 1)], &[(*j, 1)]), c / *j as f64);
            }
        }
        out
    }

    pub fn apply(&self, nf: &NormalForm) -> NormalForm {
        let mut out = nf.clone();
        out.energy += self.energy;
        for (w, d) in out.omega.iter_mut().zip(&self.omega) {
            *w += d;
        }
        for (j, f) in &self.big_omega {
            let e = out.big_omega.entry(*j).or_insert_with(|| Fourier::zero(nf.n()));
            *e = e.plus(f);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    /// `F = Gamma_{K_m} G`, and its four components in solve order.
    pub f: HamSeries,
    pub parts: BTreeMap<Component, HamSeries>,
    pub g: HamSeries,
    pub n_hat: NormalIncrement,
    pub p_hat: HamSeries,
    pub reports: Vec<ClassReport>,
    /// `|||{N,F} + P^low + {P^high,F}^low - N^ - P^|||` at `(s_m, r_m)`.
    pub residual: f64,
    pub p_low_norm: f64,
    pub k_used: u32,
    pub clamped: bool,
}

/// `P^low + {P^high, F}^low`.
pub fn assemble_homological_rhs(p_low: &HamSeries, p_high: &HamSeries, f: &HamSeries) -> Result<HamSeries> {
    if f.is_empty() {
        return Ok(p_low.clone());
    }
    let relevant = p_high.filter(|t| t.degree() <= 4);
    let br = poisson_bracket(&relevant, f)?.filter(|t| t.degree() <= 2);
    Ok(p_low.add(&br)?)
}

/// The same right-hand side from the explicit pairings that can reach degree <= 2:
/// `F^x` against degrees 3 and 4, and `F^1` against degree 3.
pub fn assemble_homological_rhs_explicit(p_low: &HamSeries, p_high: &HamSeries, f: &HamSeries) -> Result<HamSeries> {
    let fx = f.filter(|t| t.degree() == 0);
    let f1 = f.filter(|t| t.degree() == 1);
    let p3 = p_high.degree_part(3);
    let p4 = p_high.degree_part(4);
    let mut out = p_low.clone();
    for (p, g) in [(&p3, &fx), (&p4, &fx), (&p3, &f1)] {
        if !p.is_empty() && !g.is_empty() {
            out = out.add(&poisson_bracket(p, g)?.filter(|t| t.degree() <= 2))?;
        }
    }
    Ok(out)
}

fn unit_alpha(n: usize, key: &ClassKey) -> Option<usize> {
    (0..n).find(|i| key.alpha[*i] == 1)
}

/// Solve the homological system of step `m` in the order `x, z, y, zz`.
pub fn kam_solve_step(
    nf: &NormalForm,
    p: &HamSeries,
    m: usize,
    sched: &KamSchedule,
    dio: &DioParams,
    opts: &KamOptions,
) -> Result<StepResult> {
    let modes = p.modes_arc().clone();
    let n = modes.n();
    let k_cut = p.fourier_cutoff();
    let d_cut = p.degree_cutoff();
    let (s, r) = (sched.s_m(m), sched.r_m(m));
    let k_raw = sched.k_m(m);
    let clamped = k_raw >= k_cut as f64;
    let k_used = if clamped { k_cut } else { k_raw.floor() as u32 };

    let n_series = nf.to_series(&modes, k_cut, d_cut)?;
    let (p_low, p_high) = p.split_low_high();
    let p_low_norm = triple(&p_low, s, r);
    let mut g = p.empty_like();
    let mut f = p.empty_like();
    let mut parts = BTreeMap::new();
    let mut n_hat = NormalIncrement::zero(n);
    let mut reports = Vec::new();
    let mut cosets = CosetCache::new(&modes, k_cut);
    let mut copts = opts.class.clone();
    copts.s = s;
    copts.s_next = sched.s_m(m + 1);

    for comp in Component::ORDER {
        let rhs = assemble_homological_rhs(&p_low, &p_high, &f)?;
        let spill = poisson_bracket(&n_series, &g)?;
        let e = rhs.add(&spill)?.filter(|t| Component::of(t) == Some(comp));
        let classes = group(&e);
        let mut solved: BTreeMap<ClassKey, Fourier> = BTreeMap::new();
        for (key, coeff) in &classes {
            if key.is_paired() {
                match comp {
                    Component::Z2 => {
                        let j = key.mu[0].0;
                        let e = n_hat.big_omega.entry(j).or_insert_with(|| Fourier::zero(n));
                        *e = e.plus(&coeff.scale(C64::new(j as f64, 0.0)));
                        continue;
                    }
                    Component::X => n_hat.energy += coeff.mean().re,
                    Component::Y => {
                        let i = unit_alpha(n, key).expect("y-class has a unit exponent");
                        n_hat.omega[i] += coeff.mean().re;
                    }
                    Component::Z1 => unreachable!("degree-one terms are never paired"),
                }
                let rest = coeff.zero_mean();
                let basis = cosets.for_class(key).clone();
                let (sol, mut rep) = solve_class(&nf.omega, &Fourier::zero(n), &rest, &basis, dio, &copts)?;
                rep.class = key.label();
                rep.component = comp.name().into();
                reports.push(rep);
                solved.insert(key.clone(), sol);
            } else {
                let mk = key.mirror();
                if e.is_real() && mk < *key && classes.contains_key(&mk) {
                    continue;
                }
                let c = nf.combination(&key.mu, &key.gamma);
                let basis = cosets.for_class(key).clone();
                let (sol, mut rep) = solve_class(&nf.omega, &c, coeff, &basis, dio, &copts)?;
                rep.class = key.label();
                rep.component = comp.name().into();
                reports.push(rep);
                if e.is_real() && classes.contains_key(&mk) {
                    solved.insert(mk, mirror_coeff(&sol));
                }
                solved.insert(key.clone(), sol);
            }
        }
        let gc = assemble(p, solved.iter());
        check_momentum(&gc, 0, comp.name())?;
        let fc = gc.gamma_truncate(k_used);
        g = g.add(&gc)?;
        f = f.add(&fc)?;
        parts.insert(comp, fc);
    }

    let p_hat = poisson_bracket(&n_series, &g.sub(&f)?)?;
    let lhs = poisson_bracket(&n_series, &f)?
        .add(&assemble_homological_rhs(&p_low, &p_high, &f)?)?
        .filter(|t| t.degree() <= 2);
    let res = lhs.sub(&n_hat.to_series(p))?.sub(&p_hat)?;
    let residual = triple(&res, s, r);
    if residual > opts.residual_rel * p_low_norm {
        return Err(EngineError::Homological { residual, tol: opts.residual_rel * p_low_norm });
    }
    Ok(StepResult { f, parts, g, n_hat, p_hat, reports, residual, p_low_norm, k_used, clamped })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComposeReport {
    pub orders_n: usize,
    pub orders_p: usize,
    pub remainder: f64,
    pub generator_star: f64,
}

/// `N_+ = N + N^`, `P_+ = H o X_F - N_+`.
pub fn compose_step(
    nf: &NormalForm,
    p: &HamSeries,
    step: &StepResult,
    plan: &LiePlan,
) -> Result<(NormalForm, HamSeries, ComposeReport)> {
    let modes = p.modes_arc().clone();
    let n_series = nf.to_series(&modes, p.fourier_cutoff(), p.degree_cutoff())?;
    let inc = lie_increment(&n_series, &step.f, plan)?;
    let lp = lie_transform(p, &step.f, plan)?;
    let p_plus = lp.series.add(&inc.series)?.sub(&step.n_hat.to_series(p))?;
    let report = ComposeReport {
        orders_n: inc.orders_used,
        orders_p: lp.orders_used,
        remainder: inc.remainder + lp.remainder,
        generator_star: lp.generator_star,
    };
    Ok((step.n_hat.apply(nf), p_plus, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct KamTraceRow {
    pub step: usize,
    pub s: f64,
    pub r: f64,
    pub eta_m: f64,
    pub eps_m: f64,
    pub k_schedule: f64,
    pub k_used: u32,
    pub clamped: bool,
    pub p_low: f64,
    pub p_high: f64,
    pub residual: f64,
    pub f_star: f64,
    pub omega: Vec<f64>,
    pub omega_shift: f64,
    pub min_divisor: f64,
    pub scan_margin: f64,
    pub lie_orders: usize,
    pub lie_remainder: f64,
    pub branches: BTreeMap<String, usize>,
    pub omega_tilde_minus_one: f64,
}

#[derive(Clone, Debug)]
pub struct KamRun {
    pub normal_form: NormalForm,
    pub perturbation: HamSeries,
    pub trace: Vec<KamTraceRow>,
    /// Generating functions in application order.
    pub generators: Vec<HamSeries>,
    /// `|||P^low|||` after each step, measured at the next stage's domain.
    pub p_low_after: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanOutcome {
    pub worst_margin: f64,
    pub min_divisor: f64,
    pub checked: usize,
}

/// Non-resonance of `<k,omega> + <l,[Omega]>` over `|l| <= 2` and the momentum-consistent `k`.
pub fn resonance_scan(nf: &NormalForm, modes: &ModeSystem, eta_m: f64, tau: f64, kmax: u32) -> Result<ScanOutcome> {
    let sites = modes.normal_sites().to_vec();
    let mut ls: Vec<Vec<(i32, i32)>> = vec![vec![]];
    for (a, &i) in sites.iter().enumerate() {
        for si in [1, -1] {
            ls.push(vec![(i, si)]);
            ls.push(vec![(i, 2 * si)]);
            for &j in &sites[a + 1..] {
                for sj in [1, -1] {
                    ls.push(vec![(i, si), (j, sj)]);
                }
            }
        }
    }
    let mut cosets = CosetCache::new(modes, kmax);
    let mut out = ScanOutcome { worst_margin: f64::INFINITY, min_divisor: f64::INFINITY, checked: 0 };
    for l in ls {
        let zmom: i64 = l.iter().map(|(j, v)| *j as i64 * *v as i64).sum();
        let lw: f64 = l.iter().map(|(j, v)| *v as f64 * nf.mean(*j)).sum();
        let ml = l.iter().map(|(j, _)| j.unsigned_abs()).max().unwrap_or(1) as f64;
        for k in cosets.basis(-zmom).modes() {
            if l.is_empty() && l1(k) == 0 {
                continue;
            }
            let div = (dot(k, &nf.omega) + lw).abs();
            let bound = eta_m * ml / (l1(k) as f64 + 1.0).powf(tau);
            out.checked += 1;
            out.min_divisor = out.min_divisor.min(div);
            out.worst_margin = out.worst_margin.min(div / bound);
            if div <= bound {
                return Err(EngineError::Resonance { k: k.clone(), l, divisor: div, bound });
            }
        }
    }
    Ok(out)
}

/// Iterate `steps` KAM steps, stopping early once `P^low` vanishes.
pub fn run_kam(
    nf0: &NormalForm,
    p0: &HamSeries,
    sched: &KamSchedule,
    steps: usize,
    dio: &DioParams,
    opts: &KamOptions,
) -> Result<KamRun> {
    nf0.check(p0.modes())?;
    let mut nf = nf0.clone();
    let mut p = p0.clone();
    let mut trace = Vec::new();
    let mut gens = Vec::new();
    let mut after = Vec::new();
    let mut growth = 0;
    for m in 0..steps {
        let (s, r) = (sched.s_m(m), sched.r_m(m));
        let (low, high) = p.split_low_high();
        if low.is_empty() {
            break;
        }
        let scan = resonance_scan(&nf, p.modes(), sched.eta_m(m), sched.tau, opts.scan_k.min(p.fourier_cutoff()))?;
        let step = kam_solve_step(&nf, &p, m, sched, dio, opts)?;
        let plan = LiePlan::new(opts.lie_order_cap, sched.s_m(m + 1), sched.r_m(m + 1));
        let (nf_next, p_next, comp) = compose_step(&nf, &p, &step, &plan)?;
        let mut branches = BTreeMap::new();
        for rep in &step.reports {
            *branches.entry(rep.branch.clone()).or_insert(0) += 1;
        }
        let shift = nf_next.omega.iter().zip(&nf.omega).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let next_low = triple(&p_next.split_low_high().0, sched.s_m(m + 1), sched.r_m(m + 1));
        trace.push(KamTraceRow {
            step: m,
            s,
            r,
            eta_m: sched.eta_m(m),
            eps_m: sched.eps_m(m),
            k_schedule: sched.k_m(m),
            k_used: step.k_used,
            clamped: step.clamped,
            p_low: step.p_low_norm,
            p_high: triple(&high, s, r),
            residual: step.residual,
            f_star: comp.generator_star,
            omega: nf.omega.clone(),
            omega_shift: shift,
            min_divisor: step.reports.iter().map(|r| r.min_divisor).fold(f64::INFINITY, f64::min),
            scan_margin: scan.worst_margin,
            lie_orders: comp.orders_p,
            lie_remainder: comp.remainder,
            branches,
            omega_tilde_minus_one: nf_next.minus_one_norms(s)?.values().fold(0.0, |a, b| a.max(*b)),
        });
        if next_low > opts.divergence_ratio * step.p_low_norm {
            growth += 1;
            if growth >= 2 {
                return Err(EngineError::Divergence(m));
            }
        } else {
            growth = 0;
        }
        after.push(next_low);
        gens.push(step.f);
        nf = nf_next;
        p = p_next;
    }
    Ok(KamRun { normal_form: nf, perturbation: p, trace, generators: gens, p_low_after: after })
}
