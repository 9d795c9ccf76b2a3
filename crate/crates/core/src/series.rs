//! Sparse truncated Fourier-Taylor series.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::modes::{momentum_unchecked, site_add, ModeSystem, TermIndex};

/// Relative threshold below which coefficients are discarded.
pub const PRUNE_REL: f64 = 1e-14;

const CHUNK: usize = 32;

#[derive(Clone, Debug)]
pub struct HamSeries {
    modes: Arc<ModeSystem>,
    terms: BTreeMap<TermIndex, C64>,
    k_cut: u32,
    d_cut: u32,
    real: bool,
}

impl PartialEq for HamSeries {
    fn eq(&self, other: &Self) -> bool {
        *self.modes == *other.modes
            && self.k_cut == other.k_cut
            && self.d_cut == other.d_cut
            && self.real == other.real
            && self.terms == other.terms
    }
}

impl HamSeries {
    pub fn new(modes: Arc<ModeSystem>, k_cut: u32, d_cut: u32, real: bool) -> Self {
        HamSeries { modes, terms: BTreeMap::new(), k_cut, d_cut, real }
    }

    /// Empty series with the same modes, cutoffs and reality flag.
    pub fn empty_like(&self) -> Self {
        HamSeries::new(self.modes.clone(), self.k_cut, self.d_cut, self.real)
    }

    /// Build from explicit terms. Indices are validated; out-of-cutoff terms are rejected.
    pub fn from_terms<I>(modes: Arc<ModeSystem>, k_cut: u32, d_cut: u32, real: bool, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TermIndex, C64)>,
    {
        let mut s = HamSeries::new(modes, k_cut, d_cut, real);
        for (t, c) in terms {
            t.check(&s.modes)?;
            if !s.fits(&t) {
                return Err(Error::Invalid(format!("term {t:?} exceeds the cutoffs")));
            }
            *s.terms.entry(t).or_insert(C64::new(0.0, 0.0)) += c;
        }
        s.finish();
        Ok(s)
    }

    pub fn modes(&self) -> &ModeSystem {
        &self.modes
    }

    pub fn modes_arc(&self) -> &Arc<ModeSystem> {
        &self.modes
    }

    pub fn fourier_cutoff(&self) -> u32 {
        self.k_cut
    }

    pub fn degree_cutoff(&self) -> u32 {
        self.d_cut
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn n(&self) -> usize {
        self.modes.n()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TermIndex, &C64)> {
        self.terms.iter()
    }

    pub fn terms(&self) -> &BTreeMap<TermIndex, C64> {
        &self.terms
    }

    pub fn get(&self, t: &TermIndex) -> C64 {
        self.terms.get(t).copied().unwrap_or_default()
    }

    pub fn fits(&self, t: &TermIndex) -> bool {
        t.k_l1() <= self.k_cut && t.degree() <= self.d_cut
    }

    /// Accumulate a coefficient; terms outside the cutoffs are silently truncated.
    pub fn add_term(&mut self, t: TermIndex, c: C64) -> bool {
        if !self.fits(&t) {
            return false;
        }
        *self.terms.entry(t).or_insert(C64::new(0.0, 0.0)) += c;
        true
    }

    pub fn set_real(&mut self, real: bool) {
        self.real = real;
        if real {
            self.symmetrize();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Remove exact zeros and coefficients below the relative threshold.
    pub fn prune(&mut self) {
        let cut = PRUNE_REL * self.max_abs();
        self.terms.retain(|_, c| c.norm() > cut && c.norm() > 0.0);
    }

    /// Project onto the conjugation-symmetric part; removes roundoff asymmetry.
    pub fn symmetrize(&mut self) {
        let mut out = BTreeMap::new();
        for (t, c) in &self.terms {
            let m = t.mirror();
            if &m == t {
                out.insert(t.clone(), C64::new(c.re, 0.0));
            } else {
                let cm = self.terms.get(&m).copied().unwrap_or_default();
                out.insert(t.clone(), 0.5 * (c + cm.conj()));
                out.entry(m).or_insert(0.5 * (cm + c.conj()));
            }
        }
        self.terms = out;
    }

    pub(crate) fn finish(&mut self) {
        if self.real {
            self.symmetrize();
        }
        self.prune();
    }

    /// Largest deviation from conjugation symmetry.
    pub fn reality_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(t, c)| (c - self.get(&t.mirror()).conj()).norm())
            .fold(0.0, f64::max)
    }

    fn same_modes(&self, other: &HamSeries) -> Result<()> {
        if Arc::ptr_eq(&self.modes, &other.modes) || *self.modes == *other.modes {
            Ok(())
        } else {
            Err(Error::ModeMismatch)
        }
    }

    fn combine(&self, other: &HamSeries, sign: f64) -> Result<HamSeries> {
        self.same_modes(other)?;
        let mut out = HamSeries::new(
            self.modes.clone(),
            self.k_cut.min(other.k_cut),
            self.d_cut.min(other.d_cut),
            self.real && other.real,
        );
        for (t, c) in &self.terms {
            out.add_term(t.clone(), *c);
        }
        for (t, c) in &other.terms {
            out.add_term(t.clone(), sign * c);
        }
        out.finish();
        Ok(out)
    }

    pub fn add(&self, other: &HamSeries) -> Result<HamSeries> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &HamSeries) -> Result<HamSeries> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, c: C64) -> HamSeries {
        let mut out = self.empty_like();
        out.real = self.real && c.im == 0.0;
        for (t, v) in &self.terms {
            out.terms.insert(t.clone(), c * v);
        }
        out.terms.retain(|_, v| v.norm() > 0.0);
        out
    }

    pub fn scale_re(&self, c: f64) -> HamSeries {
        self.scale(C64::new(c, 0.0))
    }

    /// Product with truncation to the common cutoffs.
    pub fn mul(&self, other: &HamSeries) -> Result<HamSeries> {
        self.same_modes(other)?;
        let k_cut = self.k_cut.min(other.k_cut);
        let d_cut = self.d_cut.min(other.d_cut);
        let u: Vec<_> = self.terms.iter().map(|(t, c)| (t.clone(), *c)).collect();
        let v: Vec<_> = other.terms.iter().map(|(t, c)| (t.clone(), *c)).collect();
        let terms = pair_reduce(&u, &v, |a, ca, b, cb, emit| {
            if a.degree() + b.degree() > d_cut {
                return;
            }
            let k: smallvec::SmallVec<[i32; 4]> = a.k.iter().zip(&b.k).map(|(x, y)| x + y).collect();
            if k.iter().map(|x| x.unsigned_abs()).sum::<u32>() > k_cut {
                return;
            }
            emit(
                TermIndex {
                    k,
                    alpha: a.alpha.iter().zip(&b.alpha).map(|(x, y)| x + y).collect(),
                    mu: site_add(&a.mu, &b.mu),
                    gamma: site_add(&a.gamma, &b.gamma),
                },
                ca * cb,
            );
        });
        let mut out = HamSeries::new(self.modes.clone(), k_cut, d_cut, self.real && other.real);
        out.terms = terms;
        out.finish();
        Ok(out)
    }

    /// Keep the terms satisfying `keep`; cutoffs and flag are inherited.
    pub fn filter<F: Fn(&TermIndex) -> bool>(&self, keep: F) -> HamSeries {
        let mut out = self.empty_like();
        out.terms = self
            .terms
            .iter()
            .filter(|(t, _)| keep(t))
            .map(|(t, c)| (t.clone(), *c))
            .collect();
        out
    }

    /// Map coefficients; the caller is responsible for the reality flag.
    pub fn map_coeffs<F: Fn(&TermIndex, C64) -> C64>(&self, f: F, real: bool) -> HamSeries {
        let mut out = self.empty_like();
        out.real = real;
        for (t, c) in &self.terms {
            let v = f(t, *c);
            if v.norm() > 0.0 {
                out.terms.insert(t.clone(), v);
            }
        }
        out
    }

    /// Change cutoffs; lowering them truncates.
    pub fn with_cutoffs(&self, k_cut: u32, d_cut: u32) -> HamSeries {
        let mut out = HamSeries::new(self.modes.clone(), k_cut, d_cut, self.real);
        for (t, c) in &self.terms {
            out.add_term(t.clone(), *c);
        }
        out
    }

    pub fn momentum_of(&self, t: &TermIndex) -> i64 {
        momentum_unchecked(t, &self.modes)
    }

    /// Terms of momentum `b`.
    pub fn filter_momentum_class(&self, b: i64) -> HamSeries {
        let mut out = self.filter(|t| momentum_unchecked(t, &self.modes) == b);
        out.real = self.real && b == 0;
        out
    }

    /// Largest |momentum| over the stored terms.
    pub fn max_momentum(&self) -> i64 {
        self.terms.keys().map(|t| self.momentum_of(t).abs()).max().unwrap_or(0)
    }

    /// Fourier truncation `Gamma_K`.
    pub fn gamma_truncate(&self, k: u32) -> HamSeries {
        self.filter(|t| t.k_l1() <= k)
    }

    /// Degree <= 2 part and the rest.
    pub fn split_low_high(&self) -> (HamSeries, HamSeries) {
        (self.filter(|t| t.degree() <= 2), self.filter(|t| t.degree() > 2))
    }

    /// Mean over the angles.
    pub fn x_mean(&self) -> HamSeries {
        self.filter(|t| t.k.iter().all(|v| *v == 0))
    }

    pub fn degree_part(&self, h: u32) -> HamSeries {
        self.filter(|t| t.degree() == h)
    }

    /// Largest coefficient distance to another series.
    pub fn max_diff(&self, other: &HamSeries) -> f64 {
        let mut m: f64 = 0.0;
        for (t, c) in &self.terms {
            m = m.max((c - other.get(t)).norm());
        }
        for (t, c) in &other.terms {
            if !self.terms.contains_key(t) {
                m = m.max(c.norm());
            }
        }
        m
    }

    pub(crate) fn raw_terms_mut(&mut self) -> &mut BTreeMap<TermIndex, C64> {
        &mut self.terms
    }

    pub(crate) fn set_terms(&mut self, terms: BTreeMap<TermIndex, C64>) {
        self.terms = terms;
    }
}

/// Deterministic reduction over all term pairs.
///
/// `u` is cut into fixed-size chunks independent of the thread count; each chunk
/// accumulates in loop order and the chunks are merged in order.
pub(crate) fn pair_reduce<F>(
    u: &[(TermIndex, C64)],
    v: &[(TermIndex, C64)],
    f: F,
) -> BTreeMap<TermIndex, C64>
where
    F: Fn(&TermIndex, C64, &TermIndex, C64, &mut dyn FnMut(TermIndex, C64)) + Sync,
{
    let partial: Vec<Vec<(TermIndex, C64)>> = u
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc: HashMap<TermIndex, C64> = HashMap::new();
            let mut order: Vec<TermIndex> = Vec::new();
            for (a, ca) in chunk {
                for (b, cb) in v {
                    f(a, *ca, b, *cb, &mut |t, c| match acc.get_mut(&t) {
                        Some(x) => *x += c,
                        None => {
                            order.push(t.clone());
                            acc.insert(t, c);
                        }
                    });
                }
            }
            order
                .into_iter()
                .map(|t| {
                    let c = acc[&t];
                    (t, c)
                })
                .collect()
        })
        .collect();
    let mut out: BTreeMap<TermIndex, C64> = BTreeMap::new();
    for chunk in partial {
        for (t, c) in chunk {
            *out.entry(t).or_insert(C64::new(0.0, 0.0)) += c;
        }
    }
    out
}
