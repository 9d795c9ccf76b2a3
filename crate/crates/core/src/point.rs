//! Phase-space points and evaluation of series.

use num_complex::Complex64 as C64;

use crate::modes::{ModeSystem, TermIndex};
use crate::norms::DomainSpec;
use crate::series::HamSeries;

/// `(x, y, z, zbar)`; the normal components are indexed like `ModeSystem::normal_sites`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
    pub z: Vec<C64>,
    pub zb: Vec<C64>,
}

impl PhasePoint {
    pub fn zero(m: &ModeSystem) -> Self {
        let nn = m.normal_sites().len();
        PhasePoint {
            x: vec![C64::new(0.0, 0.0); m.n()],
            y: vec![C64::new(0.0, 0.0); m.n()],
            z: vec![C64::new(0.0, 0.0); nn],
            zb: vec![C64::new(0.0, 0.0); nn],
        }
    }

    /// Real point: real angles and actions, `zbar = conj(z)`.
    pub fn real(m: &ModeSystem, x: &[f64], y: &[f64], z: &[C64]) -> Self {
        let mut p = PhasePoint::zero(m);
        p.x = x.iter().map(|v| C64::new(*v, 0.0)).collect();
        p.y = y.iter().map(|v| C64::new(*v, 0.0)).collect();
        p.z = z.to_vec();
        p.zb = z.iter().map(|v| v.conj()).collect();
        p
    }

    pub fn z_at(&self, m: &ModeSystem, j: i32) -> C64 {
        m.normal_index(j).map_or(C64::new(0.0, 0.0), |i| self.z[i])
    }

    /// `||z||_p` with weights `|j|^p`.
    pub fn z_norm(v: &[C64], m: &ModeSystem, p: f64) -> f64 {
        v.iter()
            .zip(m.normal_sites())
            .map(|(c, j)| c.norm_sqr() * (j.abs() as f64).powf(2.0 * p))
            .sum::<f64>()
            .sqrt()
    }

    pub fn in_domain(&self, m: &ModeSystem, d: &DomainSpec) -> bool {
        let tol = 1e-12;
        self.x.iter().all(|v| v.im.abs() <= d.s + tol)
            && self.y.iter().all(|v| v.norm() <= d.r * d.r + tol)
            && PhasePoint::z_norm(&self.z, m, d.p) + PhasePoint::z_norm(&self.zb, m, d.p) <= d.r + tol
    }

    pub fn axpy(&self, h: f64, v: &PhasePoint) -> PhasePoint {
        let f = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(p, q)| p + h * q).collect();
        PhasePoint { x: f(&self.x, &v.x), y: f(&self.y, &v.y), z: f(&self.z, &v.z), zb: f(&self.zb, &v.zb) }
    }
}

/// Factors of one monomial at a point, used by evaluation and by vector fields.
pub(crate) struct Factors<'a> {
    pub m: &'a ModeSystem,
    pub w: &'a PhasePoint,
}

impl Factors<'_> {
    pub fn phase(&self, t: &TermIndex) -> C64 {
        let mut ph = C64::new(0.0, 0.0);
        for (k, x) in t.k.iter().zip(&self.w.x) {
            ph += *k as f64 * x;
        }
        (C64::i() * ph).exp()
    }

    /// Product of all polynomial factors, with the exponent of one variable lowered.
    pub fn poly(&self, t: &TermIndex, skip: Skip) -> C64 {
        let mut v = C64::new(1.0, 0.0);
        for (i, &a) in t.alpha.iter().enumerate() {
            let e = if skip == Skip::Y(i) { a - 1 } else { a };
            v *= self.w.y[i].powu(e);
        }
        for &(j, p) in &t.mu {
            let e = if skip == Skip::Z(j) { p - 1 } else { p };
            v *= self.w.z[self.m.normal_index(j).expect("normal site")].powu(e);
        }
        for &(j, p) in &t.gamma {
            let e = if skip == Skip::Zb(j) { p - 1 } else { p };
            v *= self.w.zb[self.m.normal_index(j).expect("normal site")].powu(e);
        }
        v
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Skip {
    None,
    Y(usize),
    Z(i32),
    Zb(i32),
}

/// `sum c e^{i<k,x>} y^alpha z^mu zbar^gamma` at `w`.
pub fn evaluate(h: &HamSeries, w: &PhasePoint) -> C64 {
    let f = Factors { m: h.modes(), w };
    h.iter().map(|(t, c)| c * f.phase(t) * f.poly(t, Skip::None)).sum()
}
