//! Fourier data on the torus `T^n` and dense grid transforms.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Sparse Fourier coefficients `k -> W(k)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Fourier {
    n: usize,
    coeffs: BTreeMap<Vec<i32>, C64>,
}

pub fn l1(k: &[i32]) -> u32 {
    k.iter().map(|v| v.unsigned_abs()).sum()
}

pub fn dot(k: &[i32], w: &[f64]) -> f64 {
    k.iter().zip(w).map(|(a, b)| *a as f64 * b).sum()
}

impl Fourier {
    pub fn zero(n: usize) -> Self {
        Fourier { n, coeffs: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut f = Fourier::zero(n);
        f.add(vec![0; n], c);
        f
    }

    pub fn single(k: Vec<i32>, c: C64) -> Self {
        let mut f = Fourier::zero(k.len());
        f.add(k, c);
        f
    }

    pub fn from_pairs<I: IntoIterator<Item = (Vec<i32>, C64)>>(n: usize, it: I) -> Self {
        let mut f = Fourier::zero(n);
        for (k, c) in it {
            f.add(k, c);
        }
        f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i32>, &C64)> {
        self.coeffs.iter()
    }

    pub fn get(&self, k: &[i32]) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn add(&mut self, k: Vec<i32>, c: C64) {
        debug_assert_eq!(k.len(), self.n);
        if c == C64::new(0.0, 0.0) {
            return;
        }
        *self.coeffs.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
    }

    pub fn mean(&self) -> C64 {
        self.get(&vec![0; self.n])
    }

    pub fn zero_mean(&self) -> Fourier {
        let mut f = self.clone();
        f.coeffs.remove(&vec![0; self.n]);
        f
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn max_l1(&self) -> u32 {
        self.coeffs.keys().map(|k| l1(k)).max().unwrap_or(0)
    }

    pub fn max_inf(&self) -> u32 {
        self.coeffs
            .keys()
            .flat_map(|k| k.iter().map(|v| v.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Weighted l1 norm `sum |W(k)| e^{|k|_1 s}`.
    pub fn norm(&self, s: f64) -> Result<f64> {
        let mut total = 0.0;
        for (k, c) in &self.coeffs {
            total += c.norm() * (l1(k) as f64 * s).exp();
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::Overflow)
        }
    }

    /// `sum |W(k)| |k|^p e^{|k| s}`.
    pub fn weighted_norm(&self, s: f64, p: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let a = l1(k) as f64;
                c.norm() * a.powf(p) * (a * s).exp()
            })
            .sum()
    }

    pub fn scale(&self, c: C64) -> Fourier {
        let mut f = Fourier::zero(self.n);
        for (k, v) in &self.coeffs {
            f.add(k.clone(), c * v);
        }
        f
    }

    pub fn plus(&self, other: &Fourier) -> Fourier {
        let mut f = self.clone();
        for (k, v) in &other.coeffs {
            f.add(k.clone(), *v);
        }
        f.clean();
        f
    }

    pub fn minus(&self, other: &Fourier) -> Fourier {
        self.plus(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Convolution product.
    pub fn mul(&self, other: &Fourier) -> Fourier {
        let mut f = Fourier::zero(self.n);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                let k: Vec<i32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                f.add(k, ca * cb);
            }
        }
        f.clean();
        f
    }

    /// Apply a multiplier `m(k)` to every coefficient.
    pub fn map<F: Fn(&[i32], C64) -> C64>(&self, m: F) -> Fourier {
        let mut f = Fourier::zero(self.n);
        for (k, v) in &self.coeffs {
            f.add(k.clone(), m(k, *v));
        }
        f
    }

    pub fn retain<F: Fn(&[i32]) -> bool>(&self, keep: F) -> Fourier {
        Fourier {
            n: self.n,
            coeffs: self.coeffs.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }

    /// `omega . d_theta` applied to the data.
    pub fn omega_deriv(&self, omega: &[f64]) -> Fourier {
        self.map(|k, c| C64::new(0.0, dot(k, omega)) * c)
    }

    /// Point value at complex angles.
    pub fn eval(&self, theta: &[C64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (k, c) in &self.coeffs {
            let mut ph = C64::new(0.0, 0.0);
            for (kv, t) in k.iter().zip(theta) {
                ph += *kv as f64 * t;
            }
            s += c * (C64::i() * ph).exp();
        }
        s
    }

    /// Values at many points, using per-dimension power tables.
    pub fn eval_points(&self, pts: &[Vec<C64>]) -> Vec<C64> {
        let kinf = self.max_inf() as i32;
        let entries: Vec<(&Vec<i32>, &C64)> = self.coeffs.iter().collect();
        let width = (2 * kinf + 1) as usize;
        let mut table = vec![C64::new(0.0, 0.0); self.n * width];
        pts.iter()
            .map(|p| {
                for d in 0..self.n {
                    let e = (C64::i() * p[d]).exp();
                    let ei = e.inv();
                    let mid = d * width + kinf as usize;
                    table[mid] = C64::new(1.0, 0.0);
                    for m in 1..=kinf as usize {
                        table[mid + m] = table[mid + m - 1] * e;
                        table[mid - m] = table[mid - m + 1] * ei;
                    }
                }
                let mut s = C64::new(0.0, 0.0);
                for (k, c) in &entries {
                    let mut v = **c;
                    for (d, kv) in k.iter().enumerate() {
                        v *= table[d * width + (kinf + kv) as usize];
                    }
                    s += v;
                }
                s
            })
            .collect()
    }

    /// Conjugate mirror `W(k) -> conj W(-k)`; a function is real iff it equals its mirror.
    pub fn conj_mirror(&self) -> Fourier {
        let mut f = Fourier::zero(self.n);
        for (k, v) in &self.coeffs {
            f.add(k.iter().map(|x| -x).collect(), v.conj());
        }
        f
    }

    pub fn distance(&self, other: &Fourier) -> f64 {
        self.minus(other).norm(0.0).unwrap_or(f64::INFINITY)
    }

    fn clean(&mut self) {
        self.coeffs.retain(|_, v| v.norm() > 0.0);
    }
}

/// Weighted l1 norm of one-variable-per-entry Fourier data.
pub fn norm_coeff(w: &Fourier, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Invalid(format!("negative width {s}")));
    }
    w.norm(s)
}

/// All `k` with `|k_d| <= kmax` in lexicographic order.
pub fn box_modes(n: usize, kmax: i32) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for v in -kmax..=kmax {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// All `k` with `|k|_1 <= kmax`.
pub fn l1_modes(n: usize, kmax: u32) -> Vec<Vec<i32>> {
    box_modes(n, kmax as i32).into_iter().filter(|k| l1(k) <= kmax).collect()
}

/// Uniform tensor grid with `g` points per dimension.
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub n: usize,
    pub g: usize,
}

impl Grid {
    pub fn size(&self) -> usize {
        self.g.pow(self.n as u32)
    }

    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        for d in (0..self.n).rev() {
            p[d] = 2.0 * std::f64::consts::PI * (idx % self.g) as f64 / self.g as f64;
            idx /= self.g;
        }
        p
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.size()).map(|i| self.point(i)).collect()
    }

    fn freq(&self, m: usize) -> i32 {
        if m < self.g / 2 {
            m as i32
        } else {
            m as i32 - self.g as i32
        }
    }

    pub fn mode_of(&self, mut idx: usize) -> Vec<i32> {
        let mut k = vec![0; self.n];
        for d in (0..self.n).rev() {
            k[d] = self.freq(idx % self.g);
            idx /= self.g;
        }
        k
    }

    /// In-place n-dimensional FFT; forward uses `e^{-i k theta}`.
    pub fn fft(&self, data: &mut [C64], inverse: bool) {
        let mut planner = FftPlanner::new();
        let plan = if inverse { planner.plan_fft_inverse(self.g) } else { planner.plan_fft_forward(self.g) };
        let g = self.g;
        let total = self.size();
        let mut line = vec![C64::new(0.0, 0.0); g];
        for d in 0..self.n {
            let stride = g.pow((self.n - 1 - d) as u32);
            for start in 0..total {
                if (start / stride) % g != 0 {
                    continue;
                }
                for m in 0..g {
                    line[m] = data[start + m * stride];
                }
                plan.process(&mut line);
                for m in 0..g {
                    data[start + m * stride] = line[m];
                }
            }
        }
    }

    /// Fourier coefficients of grid values; modes with `|W(k)| <= floor` are dropped.
    pub fn analyze(&self, values: &[C64], floor: f64) -> Fourier {
        let mut data = values.to_vec();
        self.fft(&mut data, false);
        let scale = 1.0 / self.size() as f64;
        let mut f = Fourier::zero(self.n);
        for (i, v) in data.iter().enumerate() {
            let c = v * scale;
            if c.norm() > floor {
                f.add(self.mode_of(i), c);
            }
        }
        f
    }

    /// Grid values of Fourier data whose modes fit the grid.
    pub fn synthesize(&self, f: &Fourier) -> Vec<C64> {
        let mut data = vec![C64::new(0.0, 0.0); self.size()];
        for (k, c) in f.iter() {
            let mut idx = 0usize;
            for kv in k {
                let m = kv.rem_euclid(self.g as i32) as usize;
                idx = idx * self.g + m;
            }
            data[idx] += c;
        }
        self.fft(&mut data, true);
        data
    }
}
