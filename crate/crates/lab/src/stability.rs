//! Transform chains back to lattice coordinates, distance to the constructed
//! torus, and the long-time stability experiment.

use nf_core::fourier::Grid;
use nf_core::solve::DioParams;
use nf_core::vfield::flow;
use nf_core::{HamSeries, ModeSystem, PhasePoint, C64};
use nf_dnls::{build_hamiltonian, from_lattice, to_lattice, DnlsConfig, LatticeState, Model, Simulator, StepControl};
use nf_engine::{remove_x_dependence, run_birkhoff, run_kam, BirkhoffConfig, BirkhoffRun, KamOptions, KamRun, KamSchedule, XRemovalConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{LabError, Result};

/// Time-one maps of a list of generators: `w = Phi_F0(Phi_F1(... Phi_Flast(w')))`.
#[derive(Clone, Debug)]
pub struct TransformChain {
    pub modes: Arc<ModeSystem>,
    pub generators: Vec<HamSeries>,
    pub rk4_steps: usize,
}

impl TransformChain {
    pub fn new(modes: Arc<ModeSystem>, generators: Vec<HamSeries>, rk4_steps: usize) -> Self {
        TransformChain { modes, generators, rk4_steps: rk4_steps.max(1) }
    }

    pub fn to_original(&self, w: &PhasePoint) -> PhasePoint {
        self.generators.iter().rev().fold(w.clone(), |acc, g| flow(g, &acc, 1.0, self.rk4_steps))
    }

    pub fn to_normal(&self, w: &PhasePoint) -> PhasePoint {
        self.generators.iter().fold(w.clone(), |acc, g| flow(g, &acc, -1.0, self.rk4_steps))
    }
}

/// Settings of the normal-form construction shared by the experiments.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub dnls: DnlsConfig,
    pub k_cut: u32,
    pub d_cut: u32,
    pub kam_steps: usize,
    pub schedule: KamSchedule,
    pub dio: DioParams,
    pub kam_options: KamOptions,
    pub birkhoff: Option<BirkhoffConfig>,
    pub rk4_steps: usize,
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub model: Model,
    pub kam: Option<KamRun>,
    pub birkhoff: Option<BirkhoffRun>,
}

pub fn build_pipeline(pc: &PipelineConfig) -> Result<Pipeline> {
    let model = build_hamiltonian(&pc.dnls, pc.k_cut, pc.d_cut)?;
    if pc.dnls.eps == 0.0 {
        return Ok(Pipeline { config: pc.clone(), model, kam: None, birkhoff: None });
    }
    let kam = run_kam(&model.normal_form, &model.perturbation, &pc.schedule, pc.kam_steps, &pc.dio, &pc.kam_options)?;
    let birkhoff = match &pc.birkhoff {
        Some(b) => Some(run_birkhoff(&kam.normal_form, &kam.perturbation, b, &pc.dio)?),
        None => None,
    };
    Ok(Pipeline { config: pc.clone(), model, kam: Some(kam), birkhoff })
}

impl Pipeline {
    pub fn kam_chain(&self) -> TransformChain {
        let gens = self.kam.as_ref().map(|k| k.generators.clone()).unwrap_or_default();
        TransformChain::new(self.model.modes.clone(), gens, self.config.rk4_steps)
    }

    /// KAM and Birkhoff generators.
    pub fn full_chain(&self) -> TransformChain {
        let mut c = self.kam_chain();
        if let Some(b) = &self.birkhoff {
            c.generators.extend(b.steps.iter().map(|s| s.f.clone()));
        }
        c
    }

    /// `N + P` in the final coordinates.
    pub fn total_series(&self) -> Result<HamSeries> {
        let (nf, p) = match (&self.kam, &self.birkhoff) {
            (Some(k), Some(b)) => (&k.normal_form, &b.perturbation),
            (Some(k), None) => (&k.normal_form, &k.perturbation),
            _ => (&self.model.normal_form, &self.model.perturbation),
        };
        Ok(p.add(&nf.to_series(p.modes_arc(), self.config.k_cut, self.config.d_cut)?)?)
    }
}

/// The torus `x -> chain(x, 0, 0)` on the lattice, by trigonometric interpolation per site.
#[derive(Clone, Debug)]
pub struct Torus {
    pub jmax: i32,
    pub n: usize,
    /// Per lattice index, coefficients `(k, c)` of `q_j(x)`.
    coeffs: Vec<Vec<(Vec<i32>, C64)>>,
    /// Values on the fine search grid.
    fine: Grid,
    values: Vec<Vec<C64>>,
    /// Relative spectral mass in the outer half of the interpolation grid.
    pub tail: f64,
}

fn eval_coeffs(c: &[(Vec<i32>, C64)], x: &[f64]) -> C64 {
    c.iter().map(|(k, v)| v * C64::from_polar(1.0, k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum())).sum()
}

impl Torus {
    /// Sample on `g0^n` points, doubling `g` until the outer spectral mass is below `tol`.
    pub fn build(chain: &TransformChain, zeta: &[f64], g0: usize, tol: f64) -> Result<Torus> {
        let n = chain.modes.n();
        let jmax = chain.modes.lattice_cutoff();
        let mut g = g0.max(4);
        loop {
            let grid = Grid { n, g };
            let samples: Vec<LatticeState> = grid
                .points()
                .par_iter()
                .map(|x| {
                    let w = PhasePoint::real(&chain.modes, x, &vec![0.0; n], &vec![C64::new(0.0, 0.0); chain.modes.normal_sites().len()]);
                    to_lattice(&chain.to_original(&w), &chain.modes, zeta)
                })
                .collect();
            let len = (2 * jmax + 1) as usize;
            let mut coeffs = Vec::with_capacity(len);
            let (mut outer, mut total) = (0.0, 0.0);
            for i in 0..len {
                let vals: Vec<C64> = samples.iter().map(|s| s.q[i]).collect();
                let f = grid.analyze(&vals, 0.0);
                let mut c = Vec::new();
                for (k, v) in f.iter() {
                    let a = v.norm();
                    total += a;
                    if k.iter().any(|kv| kv.unsigned_abs() as usize >= g / 4) {
                        outer += a;
                    }
                    if a > 1e-16 {
                        c.push((k.clone(), *v));
                    }
                }
                coeffs.push(c);
            }
            let tail = if total > 0.0 { outer / total } else { 0.0 };
            if tail <= tol || g >= 64 {
                let fine = Grid { n, g: (4 * g).min(128) };
                let pts = fine.points();
                let values = pts.par_iter().map(|x| coeffs.iter().map(|c| eval_coeffs(c, x)).collect()).collect();
                return Ok(Torus { jmax, n, coeffs, fine, values, tail });
            }
            g *= 2;
        }
    }

    pub fn point(&self, x: &[f64]) -> LatticeState {
        let mut s = LatticeState::zeros(self.jmax);
        s.q = self.coeffs.iter().map(|c| eval_coeffs(c, x)).collect();
        s
    }

    fn dist_values(&self, state: &LatticeState, vals: &[C64], w: f64) -> f64 {
        let mut acc = 0.0;
        for (i, v) in vals.iter().enumerate() {
            let j = i as i32 - self.jmax;
            if j != 0 {
                acc += (j.abs() as f64).powf(2.0 * w) * (state.q[i] - v).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// `inf_x ||state - T(x)||` in the lattice `H^w` norm: nested grid search refined
/// until the minimum changes by less than `1e-3` relative, then a compass search.
pub fn torus_distance(state: &LatticeState, torus: &Torus, w: f64) -> f64 {
    let fine = torus.fine;
    let best;
    let mut stride = (fine.g / 16).max(1);
    let mut prev = f64::INFINITY;
    loop {
        let mut cur = (f64::INFINITY, 0usize);
        for idx in 0..fine.size() {
            let mut rest = idx;
            let mut on = true;
            for _ in 0..fine.n {
                on &= (rest % fine.g) % stride == 0;
                rest /= fine.g;
            }
            if on {
                let d = torus.dist_values(state, &torus.values[idx], w);
                if d < cur.0 {
                    cur = (d, idx);
                }
            }
        }
        let done = (prev - cur.0).abs() <= 1e-3 * cur.0.max(f64::MIN_POSITIVE);
        if done || stride == 1 {
            best = cur;
            break;
        }
        prev = cur.0;
        stride /= 2;
    }
    let mut x = fine.point(best.1);
    let mut d = best.0;
    let mut h = 2.0 * PI / fine.g as f64;
    while h > 1e-9 {
        let mut moved = false;
        for i in 0..torus.n {
            for sgn in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sgn * h;
                let dy = state.distance(&torus.point(&y), w);
                if dy < d {
                    (x, d, moved) = (y, dy, true);
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    d
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityConfig {
    pub delta: f64,
    pub m: u32,
    /// Sobolev index: distances in `H^{p/2}`.
    pub p: f64,
    /// Normal sites carrying `z(0)`.
    pub z_sites: Vec<i32>,
    pub x0: Vec<f64>,
    /// `d(0)` is set to this fraction of `delta`.
    pub start_fraction: f64,
    /// Samples per time direction.
    pub samples: usize,
    pub dt: f64,
    pub seed: u64,
    pub x_removal: bool,
    pub torus_grid: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            delta: 0.05,
            m: 2,
            p: 2.0,
            z_sites: vec![-1, 3, -4],
            x0: vec![0.3, 1.1],
            start_fraction: 0.9,
            samples: 40,
            dt: 1e-2,
            seed: 0,
            x_removal: true,
            torus_grid: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub t: f64,
    pub h: f64,
    pub n_tilde: f64,
    pub y: Vec<f64>,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub horizon: f64,
    pub d0: f64,
    pub sup_distance: f64,
    pub t_star: Option<f64>,
    pub t_j: Vec<Option<f64>>,
    pub max_energy_drift: f64,
    pub x_removal_worst: Option<f64>,
    pub torus_tail: f64,
    pub pass: bool,
    pub verdict: String,
    pub rows: Vec<StabilityRow>,
}

fn draw_datum(modes: &ModeSystem, sc: &StabilityConfig) -> Result<BTreeMap<i32, C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut z0 = BTreeMap::new();
    for &j in &sc.z_sites {
        if !modes.is_normal(j) {
            return Err(LabError::Config(format!("site {j} is not a normal site")));
        }
        z0.insert(j, C64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI)));
    }
    Ok(z0)
}

fn scaled(z0: &BTreeMap<i32, C64>, target: f64, w: f64) -> BTreeMap<i32, C64> {
    let norm = z0.iter().map(|(j, c)| c.norm_sqr() * (j.abs() as f64).powf(2.0 * w)).sum::<f64>().sqrt();
    z0.iter().map(|(j, c)| (*j, c * (target / norm))).collect()
}

/// Run the experiment on a constructed pipeline; `M` and `delta` come from `sc`.
pub fn stability_experiment(pipe: &Pipeline, sc: &StabilityConfig) -> Result<StabilityReport> {
    let modes = pipe.model.modes.clone();
    let cfg = &pipe.config.dnls;
    if sc.x0.len() != modes.n() || !(sc.delta > 0.0) {
        return Err(LabError::Config(format!("stability config {sc:?}")));
    }
    let w = sc.p / 2.0;
    let torus = Torus::build(&pipe.kam_chain(), &cfg.zeta, sc.torus_grid, 1e-3)?;
    let base = pipe.full_chain();
    let total = if sc.x_removal && pipe.birkhoff.is_some() { Some(pipe.total_series()?) } else { None };

    // z(0) in normal coordinates, rescaled until d(0) hits the target
    let target = sc.start_fraction * sc.delta;
    let mut z0 = scaled(&draw_datum(&modes, sc)?, target, w);
    let (mut chain, mut start, mut d0, mut xworst) = (base.clone(), None, f64::NAN, None);
    for _ in 0..4 {
        chain = base.clone();
        if let Some(h) = &total {
            let xc = XRemovalConfig { m: sc.m, delta: sc.delta, ..XRemovalConfig::default() };
            let xr = remove_x_dependence(h, &xc, &z0, w)?;
            xworst = Some(xr.worst);
            chain.generators.extend(xr.generators);
        }
        let z: Vec<C64> = modes.normal_sites().iter().map(|j| z0.get(j).copied().unwrap_or_default()).collect();
        let wn = PhasePoint::real(&modes, &sc.x0, &vec![0.0; modes.n()], &z);
        let s = to_lattice(&chain.to_original(&wn), &modes, &cfg.zeta);
        d0 = torus_distance(&s, &torus, w);
        start = Some(s);
        if (d0 / target - 1.0).abs() < 1e-3 || d0 == 0.0 {
            break;
        }
        z0 = z0.iter().map(|(j, c)| (*j, c * (target / d0))).collect();
    }
    let start = start.expect("at least one pass");

    let horizon = sc.delta.powf(-(sc.m as f64) / 4.0);
    let control = StepControl { dt: sc.dt, ..StepControl::default() };
    let steps = (horizon / sc.dt).ceil() as usize;
    let every = (steps / sc.samples.max(1)).max(1);
    let mut states = Vec::new();
    for dir in [1.0, -1.0] {
        let mut sim = Simulator::new(cfg, control);
        let mut s = start.clone();
        let mut seen = Vec::new();
        sim.integrate(&mut s, dir * horizon, every, |st| seen.push(st.clone()))?;
        if dir < 0.0 {
            seen.remove(0);
        }
        states.extend(seen);
    }
    let sim = Simulator::new(cfg, control);
    let e0 = sim.hamiltonian(&start);
    let mut rows: Vec<StabilityRow> = states
        .par_iter()
        .map(|s| {
            let wn = chain.to_normal(&from_lattice(s, &modes, &cfg.zeta));
            StabilityRow {
                t: s.t,
                h: sim.hamiltonian(s),
                n_tilde: PhasePoint::z_norm(&wn.z, &modes, w).powi(2),
                y: wn.y.iter().map(|v| v.re).collect(),
                distance: torus_distance(s, &torus, w),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));

    let first = |pred: &dyn Fn(&StabilityRow) -> bool| {
        rows.iter().filter(|r| pred(r)).map(|r| r.t.abs()).fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
    };
    let d2 = sc.delta * sc.delta;
    let t_star = first(&|r| r.n_tilde >= 4.0 * d2);
    let t_j = (0..modes.n()).map(|i| first(&|r: &StabilityRow| r.y[i].abs() >= 8.0 * d2)).collect();
    let sup_distance = rows.iter().map(|r| r.distance).fold(0.0, f64::max);
    let max_energy_drift = rows.iter().map(|r| ((r.h - e0) / e0).abs()).fold(0.0, f64::max);
    let pass = sup_distance <= 2.0 * sc.delta;
    let verdict = match (cfg.eps == 0.0, pass) {
        (true, true) => "stable (linear)",
        (_, true) => "stable",
        _ => "unstable",
    };
    Ok(StabilityReport {
        delta: sc.delta,
        horizon,
        d0,
        sup_distance,
        t_star,
        t_j,
        max_energy_drift,
        x_removal_worst: xworst,
        torus_tail: torus.tail,
        pass,
        verdict: verdict.into(),
        rows,
    })
}
