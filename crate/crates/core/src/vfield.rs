//! Hamiltonian vector fields, their sampled norms and polynomial flows.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::modes::ModeSystem;
use crate::norms::DomainSpec;
use crate::point::{Factors, PhasePoint, Skip};
use crate::series::HamSeries;

/// `X_W` at one point: `(d_y W, -d_x W, i j d_{zbar} W, -i j d_z W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldEval {
    pub dx: Vec<C64>,
    pub dy: Vec<C64>,
    pub dz: Vec<C64>,
    pub dzb: Vec<C64>,
}

impl VectorFieldEval {
    pub fn as_point(&self) -> PhasePoint {
        PhasePoint { x: self.dx.clone(), y: self.dy.clone(), z: self.dz.clone(), zb: self.dzb.clone() }
    }
}

/// Partial derivatives `(d_x, d_y, d_z, d_zbar)` of `W` at `w`.
pub fn gradient(h: &HamSeries, w: &PhasePoint) -> VectorFieldEval {
    let m = h.modes();
    let f = Factors { m, w };
    let n = m.n();
    let nn = m.normal_sites().len();
    let mut gx = vec![C64::new(0.0, 0.0); n];
    let mut gy = vec![C64::new(0.0, 0.0); n];
    let mut gz = vec![C64::new(0.0, 0.0); nn];
    let mut gzb = vec![C64::new(0.0, 0.0); nn];
    for (t, c) in h.iter() {
        let ph = c * f.phase(t);
        if t.k.iter().any(|k| *k != 0) {
            let full = ph * f.poly(t, Skip::None);
            for i in 0..n {
                if t.k[i] != 0 {
                    gx[i] += C64::new(0.0, t.k[i] as f64) * full;
                }
            }
        }
        for i in 0..n {
            if t.alpha[i] > 0 {
                gy[i] += t.alpha[i] as f64 * ph * f.poly(t, Skip::Y(i));
            }
        }
        for &(j, p) in &t.mu {
            gz[m.normal_index(j).unwrap()] += p as f64 * ph * f.poly(t, Skip::Z(j));
        }
        for &(j, p) in &t.gamma {
            gzb[m.normal_index(j).unwrap()] += p as f64 * ph * f.poly(t, Skip::Zb(j));
        }
    }
    VectorFieldEval { dx: gx, dy: gy, dz: gz, dzb: gzb }
}

pub fn vector_field(h: &HamSeries, w: &PhasePoint) -> VectorFieldEval {
    let g = gradient(h, w);
    let sites = h.modes().normal_sites();
    VectorFieldEval {
        dx: g.dy,
        dy: g.dx.iter().map(|v| -v).collect(),
        dz: g.dzb.iter().zip(sites).map(|(v, j)| C64::new(0.0, *j as f64) * v).collect(),
        dzb: g.dz.iter().zip(sites).map(|(v, j)| C64::new(0.0, -*j as f64) * v).collect(),
    }
}

/// Deterministic sample of a domain boundary.
#[derive(Clone, Copy, Debug)]
pub struct SampleGrid {
    pub angles: usize,
    pub radial: usize,
    pub seed: u64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { angles: 16, radial: 8, seed: 0x5eed }
    }
}

impl SampleGrid {
    pub fn points(&self, m: &ModeSystem, d: &DomainSpec) -> Vec<PhasePoint> {
        let n = m.n();
        let nn = m.normal_sites().len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let total = self.angles.pow(n as u32);
        let mut out = Vec::with_capacity(total * self.radial);
        for a in 0..total {
            let mut idx = a;
            let mut x = vec![C64::new(0.0, 0.0); n];
            for xi in x.iter_mut() {
                let re = 2.0 * std::f64::consts::PI * (idx % self.angles) as f64 / self.angles as f64;
                idx /= self.angles;
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                *xi = C64::new(re, sign * d.s);
            }
            for q in 1..=self.radial {
                let rho = q as f64 / self.radial as f64;
                let y: Vec<C64> = (0..n)
                    .map(|_| C64::from_polar(rho * d.r * d.r, rng.gen_range(0.0..std::f64::consts::TAU)))
                    .collect();
                let mut dir = |scale: f64| -> Vec<C64> {
                    let v: Vec<C64> = (0..nn).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                    let norm = PhasePoint::z_norm(&v, m, d.p).max(1e-300);
                    v.into_iter().map(|c| c * (scale / norm)).collect()
                };
                let z = dir(0.5 * rho * d.r);
                let zb = dir(0.5 * rho * d.r);
                out.push(PhasePoint { x: x.clone(), y, z, zb });
            }
        }
        out
    }
}

/// Weighted norm of `X_W` at one point.
pub fn vf_point_norm(h: &HamSeries, w: &PhasePoint, d: &DomainSpec, p: f64) -> f64 {
    let m = h.modes();
    let v = vector_field(h, w);
    let l1 = |u: &[C64]| u.iter().map(|c| c.norm()).sum::<f64>();
    l1(&v.dx) + l1(&v.dy) / (d.r * d.r) + (PhasePoint::z_norm(&v.dz, m, p) + PhasePoint::z_norm(&v.dzb, m, p)) / d.r
}

/// Sup over the sample grid of the weighted vector-field norm.
pub fn vf_norm(h: &HamSeries, d: &DomainSpec, p: f64, grid: &SampleGrid) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let pts = grid.points(h.modes(), d);
    pts.par_iter().map(|w| vf_point_norm(h, w, d, p)).reduce(|| 0.0, f64::max)
}

/// Time-`t` flow of `X_W` by classical RK4.
pub fn flow(h: &HamSeries, w0: &PhasePoint, t: f64, steps: usize) -> PhasePoint {
    let dt = t / steps as f64;
    let mut w = w0.clone();
    for _ in 0..steps {
        let k1 = vector_field(h, &w).as_point();
        let k2 = vector_field(h, &w.axpy(0.5 * dt, &k1)).as_point();
        let k3 = vector_field(h, &w.axpy(0.5 * dt, &k2)).as_point();
        let k4 = vector_field(h, &w.axpy(dt, &k3)).as_point();
        w = w
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
    }
    w
}
