//! Seeded random series and Fourier data for property checks and sweeps.

use num_complex::Complex64 as C64;
use rand::Rng;
use std::sync::Arc;

use crate::fourier::Fourier;
use crate::modes::{ModeSystem, TermIndex};
use crate::series::HamSeries;

#[derive(Clone, Debug)]
pub struct RandSpec {
    /// Largest `|k|_1`.
    pub k_max: u32,
    /// Largest degree `2|alpha| + |mu| + |gamma|`.
    pub deg_max: u32,
    pub terms: usize,
    /// Normal sites the monomials may touch.
    pub sites: Vec<i32>,
    pub real: bool,
}

pub fn random_index<R: Rng>(rng: &mut R, n: usize, spec: &RandSpec) -> TermIndex {
    let mut k = vec![0i32; n];
    let budget = rng.gen_range(0..=spec.k_max);
    for _ in 0..budget {
        let i = rng.gen_range(0..n);
        k[i] += if rng.gen::<bool>() { 1 } else { -1 };
    }
    let deg = rng.gen_range(0..=spec.deg_max);
    let mut alpha = vec![0u32; n];
    let mut mu = Vec::new();
    let mut gamma = Vec::new();
    let mut left = deg;
    while left > 0 {
        if left >= 2 && rng.gen_range(0..4) == 0 {
            alpha[rng.gen_range(0..n)] += 1;
            left -= 2;
        } else if !spec.sites.is_empty() {
            let j = spec.sites[rng.gen_range(0..spec.sites.len())];
            if rng.gen::<bool>() {
                mu.push((j, 1));
            } else {
                gamma.push((j, 1));
            }
            left -= 1;
        } else if left >= 2 {
            alpha[rng.gen_range(0..n)] += 1;
            left -= 2;
        } else {
            break;
        }
    }
    TermIndex::new(&k, &alpha, &mu, &gamma)
}

pub fn random_coeff<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Series with `spec.terms` random monomials; real series get conjugate pairs.
pub fn random_series<R: Rng>(rng: &mut R, modes: &Arc<ModeSystem>, k_cut: u32, d_cut: u32, spec: &RandSpec) -> HamSeries {
    let mut h = HamSeries::new(modes.clone(), k_cut, d_cut, false);
    for _ in 0..spec.terms {
        let t = random_index(rng, modes.n(), spec);
        if !h.fits(&t) {
            continue;
        }
        let c = random_coeff(rng);
        if spec.real {
            let m = t.mirror();
            h.add_term(t, c);
            h.add_term(m, c.conj());
        } else {
            h.add_term(t, c);
        }
    }
    h.set_real(spec.real);
    h.prune();
    h
}

/// Random Fourier data with modes `|k|_1 <= kmax`, optionally real-valued.
pub fn random_fourier<R: Rng>(rng: &mut R, n: usize, kmax: u32, count: usize, real: bool) -> Fourier {
    let mut f = Fourier::zero(n);
    for _ in 0..count {
        let mut k = vec![0i32; n];
        for _ in 0..rng.gen_range(0..=kmax) {
            let i = rng.gen_range(0..n);
            k[i] += if rng.gen::<bool>() { 1 } else { -1 };
        }
        let c = random_coeff(rng);
        if real {
            let m: Vec<i32> = k.iter().map(|v| -v).collect();
            if m == k {
                f.add(k, C64::new(c.re, 0.0));
            } else {
                f.add(m, c.conj());
                f.add(k, c);
            }
        } else {
            f.add(k, c);
        }
    }
    f
}
