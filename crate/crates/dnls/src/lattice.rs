//! Lattice states and the split-step integrator for `qdot_j = i j dH/dqbar_j`.

use nf_core::{ModeSystem, PhasePoint, C64};
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::config::DnlsConfig;
use crate::error::{DnlsError, Result};

/// Amplitudes `q_j` for `|j| <= jmax`, stored at `j + jmax`; the zero site stays empty.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState {
    pub jmax: i32,
    pub q: Vec<C64>,
    pub t: f64,
}

impl LatticeState {
    pub fn zeros(jmax: i32) -> Self {
        LatticeState { jmax, q: vec![C64::new(0.0, 0.0); (2 * jmax + 1) as usize], t: 0.0 }
    }

    pub fn get(&self, j: i32) -> C64 {
        if j.abs() > self.jmax {
            return C64::new(0.0, 0.0);
        }
        self.q[(j + self.jmax) as usize]
    }

    pub fn set(&mut self, j: i32, v: C64) {
        if j != 0 && j.abs() <= self.jmax {
            self.q[(j + self.jmax) as usize] = v;
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = i32> {
        (-self.jmax..=self.jmax).filter(|j| *j != 0)
    }

    /// `(sum |j|^{2w} |q_j|^2)^{1/2}`.
    pub fn norm(&self, w: f64) -> f64 {
        self.sites().map(|j| (j.abs() as f64).powf(2.0 * w) * self.get(j).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &LatticeState, w: f64) -> f64 {
        self.sites()
            .map(|j| (j.abs() as f64).powf(2.0 * w) * (self.get(j) - other.get(j)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `sum |q_j|^2`, generator of translations `q_j -> e^{ijc} q_j`.
    pub fn momentum(&self) -> f64 {
        self.sites().map(|j| self.get(j).norm_sqr()).sum()
    }

    /// `sum |q_j|^2 / j`, generator of the phase rotation.
    pub fn charge(&self) -> f64 {
        self.sites().map(|j| self.get(j).norm_sqr() / j as f64).sum()
    }

    /// `q_j -> e^{i j c} q_j`.
    pub fn translate(&self, c: f64) -> LatticeState {
        let mut out = self.clone();
        for j in self.sites() {
            out.set(j, self.get(j) * C64::from_polar(1.0, j as f64 * c));
        }
        out
    }
}

/// `q_{j_i} = sqrt(|j_i| (zeta_i + y_i)) e^{+-i x_i}`, `q_j = z_j` on the normal sites.
pub fn to_lattice(w: &PhasePoint, modes: &ModeSystem, zeta: &[f64]) -> LatticeState {
    let mut s = LatticeState::zeros(modes.lattice_cutoff());
    for (i, &j) in modes.tangent_sites().iter().enumerate() {
        let amp = (C64::new(j.abs() as f64, 0.0) * (zeta[i] + w.y[i])).sqrt();
        let phase = if j > 0 { C64::i() * w.x[i] } else { -C64::i() * w.x[i] };
        s.set(j, amp * phase.exp());
    }
    for (idx, &j) in modes.normal_sites().iter().enumerate() {
        s.set(j, w.z[idx]);
    }
    s
}

/// Inverse of [`to_lattice`] for real states.
pub fn from_lattice(s: &LatticeState, modes: &ModeSystem, zeta: &[f64]) -> PhasePoint {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, &j) in modes.tangent_sites().iter().enumerate() {
        let q = s.get(j);
        x.push(if j > 0 { q.arg() } else { -q.arg() });
        y.push(q.norm_sqr() / j.abs() as f64 - zeta[i]);
    }
    let z: Vec<C64> = modes.normal_sites().iter().map(|&j| s.get(j)).collect();
    PhasePoint::real(modes, &x, &y, &z)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    /// Fixed-point tolerance of the implicit midpoint stage.
    pub midpoint_tol: f64,
    /// Relative energy jump per step that triggers a retry with halved steps.
    pub reject_tol: f64,
    pub max_halvings: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { dt: 1e-2, midpoint_tol: 1e-14, reject_tol: 1e-8, max_halvings: 4 }
    }
}

/// Strang splitting: exact linear rotation around an implicit-midpoint quartic step.
pub struct Simulator {
    jmax: i32,
    lambda: Vec<f64>,
    eps: f64,
    g: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub control: StepControl,
    pub rejected: usize,
}

impl Simulator {
    pub fn new(cfg: &DnlsConfig, control: StepControl) -> Self {
        let g = ((4 * cfg.jmax + 2) as usize).next_power_of_two();
        let mut planner = FftPlanner::new();
        let lambda = (-cfg.jmax..=cfg.jmax).map(|j| if j == 0 { 0.0 } else { cfg.lambda(j) }).collect();
        Simulator {
            jmax: cfg.jmax,
            lambda,
            eps: cfg.eps,
            g,
            fwd: planner.plan_fft_forward(g),
            inv: planner.plan_fft_inverse(g),
            control,
            rejected: 0,
        }
    }

    fn physical(&self, q: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.g];
        for (i, v) in q.iter().enumerate() {
            let j = i as i32 - self.jmax;
            buf[j.rem_euclid(self.g as i32) as usize] = *v;
        }
        self.inv.process(&mut buf);
        buf
    }

    /// `i m (eps/4pi) sum_{a+c-d=m} q_a q_c qbar_d`.
    fn nonlinear(&self, q: &[C64]) -> Vec<C64> {
        let mut v = self.physical(q);
        for u in v.iter_mut() {
            *u *= u.norm_sqr();
        }
        self.fwd.process(&mut v);
        let scale = self.eps / (4.0 * PI) / self.g as f64;
        (0..q.len())
            .map(|i| {
                let m = i as i32 - self.jmax;
                if m == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, m as f64 * scale) * v[m.rem_euclid(self.g as i32) as usize]
                }
            })
            .collect()
    }

    /// `sum (lambda_j/j) |q_j|^2 + (eps/8pi) mean |u|^4`.
    pub fn hamiltonian(&self, s: &LatticeState) -> f64 {
        let quad: f64 = s.sites().map(|j| self.lambda[(j + self.jmax) as usize] / j as f64 * s.get(j).norm_sqr()).sum();
        if self.eps == 0.0 {
            return quad;
        }
        let v = self.physical(&s.q);
        let mean4 = v.iter().map(|u| u.norm_sqr().powi(2)).sum::<f64>() / self.g as f64;
        quad + self.eps / (8.0 * PI) * mean4
    }

    /// Exact linear flow over time `t`.
    fn rotate(&self, q: &mut [C64], t: f64) {
        for (i, v) in q.iter_mut().enumerate() {
            *v *= C64::from_polar(1.0, self.lambda[i] * t);
        }
    }

    fn midpoint(&self, q: &mut [C64], h: f64, t: f64) -> Result<()> {
        let q0 = q.to_vec();
        let mut q1 = q0.clone();
        let mut step = f64::INFINITY;
        for _ in 0..60 {
            let mid: Vec<C64> = q0.iter().zip(&q1).map(|(a, b)| 0.5 * (a + b)).collect();
            let nl = self.nonlinear(&mid);
            let next: Vec<C64> = q0.iter().zip(&nl).map(|(a, f)| a + h * f).collect();
            step = next.iter().zip(&q1).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let size = next.iter().map(|a| a.norm()).fold(1.0, f64::max);
            q1 = next;
            if step <= self.control.midpoint_tol * size {
                q.copy_from_slice(&q1);
                return Ok(());
            }
        }
        Err(DnlsError::Midpoint { t, step })
    }

    /// Strang step in the interaction picture `p = e^{-i lambda t} q`, from time `t` to `t + h`.
    fn strang(&self, p: &mut [C64], t: f64, h: f64) -> Result<()> {
        if self.eps == 0.0 {
            return Ok(());
        }
        let tm = t + 0.5 * h;
        self.rotate(p, tm);
        self.midpoint(p, h, tm)?;
        self.rotate(p, -tm);
        Ok(())
    }

    fn physical_state(&self, p: &[C64], t: f64) -> LatticeState {
        let mut q = p.to_vec();
        self.rotate(&mut q, t);
        LatticeState { jmax: self.jmax, q, t }
    }

    /// Advance `p` from `t` by `h`; retried with halved sub-steps when the energy jumps.
    fn step_p(&mut self, p: &mut Vec<C64>, t: f64, h: f64, e0: f64) -> Result<f64> {
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        let mut last = 0.0;
        for halving in 0..=self.control.max_halvings {
            let parts = 1usize << halving;
            let sub = h / parts as f64;
            let mut trial = p.clone();
            for k in 0..parts {
                self.strang(&mut trial, t + k as f64 * sub, sub)?;
            }
            let e1 = if self.eps == 0.0 { e0 } else { self.hamiltonian(&self.physical_state(&trial, t + h)) };
            last = (e1 - e0).abs() / scale;
            if last <= self.control.reject_tol {
                *p = trial;
                return Ok(e1);
            }
            self.rejected += 1;
        }
        Err(DnlsError::Rejected { t, jump: last, retries: self.control.max_halvings })
    }

    /// One step of size `h`.
    pub fn step(&mut self, s: &mut LatticeState, h: f64) -> Result<()> {
        let mut p = s.q.clone();
        self.rotate(&mut p, -s.t);
        let e0 = self.hamiltonian(s);
        self.step_p(&mut p, s.t, h, e0)?;
        *s = self.physical_state(&p, s.t + h);
        Ok(())
    }

    /// Integrate to `t_end` (backwards when `t_end < t`), calling `observe` every `every` steps.
    pub fn integrate<F: FnMut(&LatticeState)>(&mut self, s: &mut LatticeState, t_end: f64, every: usize, mut observe: F) -> Result<()> {
        let span = t_end - s.t;
        let steps = (span.abs() / self.control.dt).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let t0 = s.t;
        observe(s);
        let mut p = s.q.clone();
        self.rotate(&mut p, -t0);
        let mut e = self.hamiltonian(s);
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            e = self.step_p(&mut p, t, h, e)?;
            if every > 0 && (i + 1) % every == 0 && i + 1 < steps {
                observe(&self.physical_state(&p, t0 + (i + 1) as f64 * h));
            }
        }
        *s = self.physical_state(&p, t_end);
        if every > 0 && steps % every == 0 {
            observe(s);
        }
        Ok(())
    }
}
