//! Poisson bracket for `dx ^ dy - i sum_j j^{-1} dz_j ^ dzbar_j`.

use num_complex::Complex64 as C64;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::modes::{site_add, site_dec, site_pow, TermIndex};
use crate::series::{pair_reduce, HamSeries};

/// `{U,V} = <d_x U, d_y V> - <d_y U, d_x V> + i sum_j j (d_{z_j}U d_{zbar_j}V - d_{zbar_j}U d_{z_j}V)`.
pub fn poisson_bracket(u: &HamSeries, v: &HamSeries) -> Result<HamSeries> {
    if u.modes() != v.modes() {
        return Err(Error::ModeMismatch);
    }
    let k_cut = u.fourier_cutoff().min(v.fourier_cutoff());
    let d_cut = u.degree_cutoff().min(v.degree_cutoff()) as i64;
    let ut: Vec<_> = u.iter().map(|(t, c)| (t.clone(), *c)).collect();
    let vt: Vec<_> = v.iter().map(|(t, c)| (t.clone(), *c)).collect();
    let terms = pair_reduce(&ut, &vt, |a, ca, b, cb, emit| {
        if a.degree() as i64 + b.degree() as i64 - 2 > d_cut {
            return;
        }
        let k: SmallVec<[i32; 4]> = a.k.iter().zip(&b.k).map(|(x, y)| x + y).collect();
        if k.iter().map(|x| x.unsigned_abs()).sum::<u32>() > k_cut {
            return;
        }
        let cc = ca * cb;
        let has_xy = a.k.iter().zip(&b.alpha).any(|(x, y)| *x != 0 && *y != 0)
            || a.alpha.iter().zip(&b.k).any(|(x, y)| *x != 0 && *y != 0);
        if has_xy {
            let mu = site_add(&a.mu, &b.mu);
            let gamma = site_add(&a.gamma, &b.gamma);
            for i in 0..a.k.len() {
                let w = a.k[i] as i64 * b.alpha[i] as i64 - a.alpha[i] as i64 * b.k[i] as i64;
                if w == 0 {
                    continue;
                }
                let mut alpha: SmallVec<[u32; 4]> = a.alpha.iter().zip(&b.alpha).map(|(x, y)| x + y).collect();
                alpha[i] -= 1;
                emit(
                    TermIndex { k: k.clone(), alpha, mu: mu.clone(), gamma: gamma.clone() },
                    cc * C64::new(0.0, w as f64),
                );
            }
        }
        for_shared_sites(a, b, |j, w| {
            let mut mu = site_add(&a.mu, &b.mu);
            let mut gamma = site_add(&a.gamma, &b.gamma);
            site_dec(&mut mu, j);
            site_dec(&mut gamma, j);
            emit(
                TermIndex {
                    k: k.clone(),
                    alpha: a.alpha.iter().zip(&b.alpha).map(|(x, y)| x + y).collect(),
                    mu,
                    gamma,
                },
                cc * C64::new(0.0, j as f64 * w as f64),
            );
        });
    });
    let mut out = HamSeries::new(u.modes_arc().clone(), k_cut, d_cut as u32, u.is_real() && v.is_real());
    out.set_terms(terms);
    out.finish();
    Ok(out)
}

/// Calls `f(j, mu_a(j) gamma_b(j) - gamma_a(j) mu_b(j))` for every site where this is nonzero.
fn for_shared_sites<F: FnMut(i32, i64)>(a: &TermIndex, b: &TermIndex, mut f: F) {
    let mut seen: SmallVec<[i32; 8]> = SmallVec::new();
    for &(j, _) in a.mu.iter().chain(a.gamma.iter()) {
        if seen.contains(&j) {
            continue;
        }
        seen.push(j);
        let w = site_pow(&a.mu, j) as i64 * site_pow(&b.gamma, j) as i64
            - site_pow(&a.gamma, j) as i64 * site_pow(&b.mu, j) as i64;
        if w != 0 {
            f(j, w);
        }
    }
}

/// `ad_F H = {H, F}`.
pub fn ad(h: &HamSeries, f: &HamSeries) -> Result<HamSeries> {
    poisson_bracket(h, f)
}
