//! Grouping of series terms into coefficient functions `W^{alpha mu gamma}(x)`.

use nf_core::fourier::{l1_modes, Fourier};
use nf_core::modes::SiteMap;
use nf_core::solve::Basis;
use nf_core::{HamSeries, ModeSystem, TermIndex};
use smallvec::SmallVec;
use std::collections::{BTreeMap, HashMap};

use crate::error::{EngineError, Result};

/// `(alpha, mu, gamma)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassKey {
    pub alpha: SmallVec<[u32; 4]>,
    pub mu: SiteMap,
    pub gamma: SiteMap,
}

impl ClassKey {
    pub fn of(t: &TermIndex) -> Self {
        ClassKey { alpha: t.alpha.clone(), mu: t.mu.clone(), gamma: t.gamma.clone() }
    }

    pub fn mirror(&self) -> Self {
        ClassKey { alpha: self.alpha.clone(), mu: self.gamma.clone(), gamma: self.mu.clone() }
    }

    pub fn is_paired(&self) -> bool {
        self.mu == self.gamma
    }

    pub fn term(&self, k: &[i32]) -> TermIndex {
        TermIndex { k: k.iter().copied().collect(), alpha: self.alpha.clone(), mu: self.mu.clone(), gamma: self.gamma.clone() }
    }

    /// `sum_j j (mu_j - gamma_j)`.
    pub fn z_momentum(&self) -> i64 {
        self.mu.iter().map(|(j, p)| *j as i64 * *p as i64).sum::<i64>()
            - self.gamma.iter().map(|(j, p)| *j as i64 * *p as i64).sum::<i64>()
    }

    pub fn degree(&self) -> u32 {
        self.term(&vec![0; self.alpha.len()]).degree()
    }

    pub fn label(&self) -> String {
        let sites = |s: &SiteMap| s.iter().map(|(j, p)| format!("{j}^{p}")).collect::<Vec<_>>().join(" ");
        format!("y{:?} z[{}] zb[{}]", self.alpha.as_slice(), sites(&self.mu), sites(&self.gamma))
    }
}

pub fn group(h: &HamSeries) -> BTreeMap<ClassKey, Fourier> {
    let mut out: BTreeMap<ClassKey, Fourier> = BTreeMap::new();
    let n = h.n();
    for (t, c) in h.iter() {
        out.entry(ClassKey::of(t)).or_insert_with(|| Fourier::zero(n)).add(t.k.to_vec(), *c);
    }
    out
}

/// Assemble a series with the cutoffs and flag of `template`.
pub fn assemble<'a, I>(template: &HamSeries, parts: I) -> HamSeries
where
    I: IntoIterator<Item = (&'a ClassKey, &'a Fourier)>,
{
    let mut out = template.empty_like();
    for (key, f) in parts {
        for (k, c) in f.iter() {
            out.add_term(key.term(k), *c);
        }
    }
    out
}

/// `W(k) -> conj W(-k)`: coefficient function of the mirrored class in a real series.
pub fn mirror_coeff(f: &Fourier) -> Fourier {
    f.conj_mirror()
}

/// Fourier modes with `|k|_1 <= kmax` and `sum k_i |j_i| = b`.
pub struct CosetCache {
    n: usize,
    weights: Vec<i64>,
    kmax: u32,
    cache: HashMap<i64, Basis>,
}

impl CosetCache {
    pub fn new(m: &ModeSystem, kmax: u32) -> Self {
        CosetCache { n: m.n(), weights: (0..m.n()).map(|i| m.tangent_weight(i)).collect(), kmax, cache: HashMap::new() }
    }

    pub fn basis(&mut self, b: i64) -> &Basis {
        let (n, kmax, w) = (self.n, self.kmax, &self.weights);
        self.cache.entry(b).or_insert_with(|| {
            Basis::from_modes(
                l1_modes(n, kmax)
                    .into_iter()
                    .filter(|k| k.iter().zip(w).map(|(a, b)| *a as i64 * b).sum::<i64>() == b)
                    .collect(),
            )
        })
    }

    /// Basis for the coefficient of a class: the whole monomial must have momentum zero.
    pub fn for_class(&mut self, key: &ClassKey) -> &Basis {
        self.basis(-key.z_momentum())
    }
}

/// Asserts that every monomial of `h` has momentum `b`.
pub fn check_momentum(h: &HamSeries, b: i64, what: &str) -> Result<()> {
    for (t, c) in h.iter() {
        let m = h.momentum_of(t);
        if m != b {
            return Err(EngineError::Momentum(format!("{what}: term {t:?} (coefficient {c}) has momentum {m}, expected {b}")));
        }
    }
    Ok(())
}

/// Per-class largest deviation from `x`-independence, relative to the class mean.
pub fn x_dependence(h: &HamSeries, keep: impl Fn(&ClassKey) -> bool) -> f64 {
    let mut worst: f64 = 0.0;
    for (key, f) in group(h) {
        if !keep(&key) {
            continue;
        }
        let mean = f.mean().norm();
        let osc: f64 = f.iter().filter(|(k, _)| k.iter().any(|v| *v != 0)).map(|(_, c)| c.norm()).sum();
        if osc > 0.0 {
            worst = worst.max(osc / mean.max(f64::MIN_POSITIVE));
        }
    }
    worst
}
