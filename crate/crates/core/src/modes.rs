//! Lattice bookkeeping: tangent sites, the truncated normal set and monomial indices.

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Tangent sites `J_n` together with the finite normal lattice `0 < |j| <= J_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeSystem {
    tangent: Vec<i32>,
    jmax: i32,
    normal: Vec<i32>,
}

impl ModeSystem {
    pub fn new(tangent: Vec<i32>, jmax: i32) -> Result<Self> {
        if jmax <= 0 {
            return Err(Error::Invalid(format!("lattice cutoff {jmax} must be positive")));
        }
        for (i, &j) in tangent.iter().enumerate() {
            if j == 0 || j.abs() > jmax {
                return Err(Error::Site(j));
            }
            if tangent[..i].contains(&j) {
                return Err(Error::Invalid(format!("tangent site {j} repeated")));
            }
        }
        let normal = (-jmax..=jmax)
            .filter(|j| *j != 0 && !tangent.contains(j))
            .collect();
        Ok(ModeSystem { tangent, jmax, normal })
    }

    pub fn n(&self) -> usize {
        self.tangent.len()
    }

    pub fn tangent_sites(&self) -> &[i32] {
        &self.tangent
    }

    pub fn normal_sites(&self) -> &[i32] {
        &self.normal
    }

    pub fn lattice_cutoff(&self) -> i32 {
        self.jmax
    }

    pub fn is_normal(&self, j: i32) -> bool {
        j != 0 && j.abs() <= self.jmax && !self.tangent.contains(&j)
    }

    /// Position of a normal site inside `normal_sites`.
    pub fn normal_index(&self, j: i32) -> Option<usize> {
        self.normal.binary_search(&j).ok()
    }

    /// Momentum weight of the tangent angle `x_i`.
    pub fn tangent_weight(&self, i: usize) -> i64 {
        self.tangent[i].abs() as i64
    }
}

pub type SiteMap = SmallVec<[(i32, u32); 4]>;

/// One monomial `e^{i<k,x>} y^alpha z^mu zbar^gamma`.
///
/// Site maps are kept sorted by site with strictly positive powers, so the
/// derived ordering is lexicographic on `(k, alpha, mu, gamma)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermIndex {
    pub k: SmallVec<[i32; 4]>,
    pub alpha: SmallVec<[u32; 4]>,
    pub mu: SiteMap,
    pub gamma: SiteMap,
}

impl TermIndex {
    pub fn zero(n: usize) -> Self {
        TermIndex {
            k: SmallVec::from_elem(0, n),
            alpha: SmallVec::from_elem(0, n),
            mu: SiteMap::new(),
            gamma: SiteMap::new(),
        }
    }

    /// Build from unsorted site lists; repeated sites are merged and zero powers dropped.
    pub fn new(k: &[i32], alpha: &[u32], mu: &[(i32, u32)], gamma: &[(i32, u32)]) -> Self {
        TermIndex {
            k: k.iter().copied().collect(),
            alpha: alpha.iter().copied().collect(),
            mu: normalize(mu),
            gamma: normalize(gamma),
        }
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    pub fn degree(&self) -> u32 {
        2 * self.alpha.iter().sum::<u32>() + site_total(&self.mu) + site_total(&self.gamma)
    }

    pub fn k_l1(&self) -> u32 {
        self.k.iter().map(|v| v.unsigned_abs()).sum()
    }

    pub fn z_degree(&self) -> u32 {
        site_total(&self.mu) + site_total(&self.gamma)
    }

    pub fn y_degree(&self) -> u32 {
        self.alpha.iter().sum()
    }

    pub fn mu_pow(&self, j: i32) -> u32 {
        site_pow(&self.mu, j)
    }

    pub fn gamma_pow(&self, j: i32) -> u32 {
        site_pow(&self.gamma, j)
    }

    /// Index of the complex-conjugate monomial: `k -> -k`, `mu <-> gamma`.
    pub fn mirror(&self) -> Self {
        TermIndex {
            k: self.k.iter().map(|v| -v).collect(),
            alpha: self.alpha.clone(),
            mu: self.gamma.clone(),
            gamma: self.mu.clone(),
        }
    }

    /// The same monomial with the Fourier part removed.
    pub fn without_k(&self) -> Self {
        TermIndex {
            k: SmallVec::from_elem(0, self.k.len()),
            alpha: self.alpha.clone(),
            mu: self.mu.clone(),
            gamma: self.gamma.clone(),
        }
    }

    pub fn is_paired(&self) -> bool {
        self.mu == self.gamma
    }

    pub fn check(&self, m: &ModeSystem) -> Result<()> {
        if self.k.len() != m.n() || self.alpha.len() != m.n() {
            return Err(Error::Invalid("index length differs from tangent dimension".into()));
        }
        for &(j, p) in self.mu.iter().chain(self.gamma.iter()) {
            if !m.is_normal(j) {
                return Err(Error::Site(j));
            }
            if p == 0 {
                return Err(Error::Invalid(format!("zero power stored at site {j}")));
            }
        }
        Ok(())
    }
}

pub fn site_total(s: &SiteMap) -> u32 {
    s.iter().map(|e| e.1).sum()
}

pub fn site_pow(s: &SiteMap, j: i32) -> u32 {
    s.iter().find(|e| e.0 == j).map_or(0, |e| e.1)
}

pub fn normalize(entries: &[(i32, u32)]) -> SiteMap {
    let mut v: SiteMap = entries.iter().copied().filter(|e| e.1 > 0).collect();
    v.sort_unstable_by_key(|e| e.0);
    let mut out = SiteMap::new();
    for (j, p) in v {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += p,
            _ => out.push((j, p)),
        }
    }
    out
}

/// Sum of two sorted site maps.
pub fn site_add(a: &SiteMap, b: &SiteMap) -> SiteMap {
    let mut out = SiteMap::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

/// Lower the power at site `j` by one; the caller guarantees it is present.
pub fn site_dec(s: &mut SiteMap, j: i32) {
    if let Some(pos) = s.iter().position(|e| e.0 == j) {
        if s[pos].1 == 1 {
            s.remove(pos);
        } else {
            s[pos].1 -= 1;
        }
    }
}

/// Momentum of a monomial: `sum_i k_i |j_i| + sum_j j (mu_j - gamma_j)`.
pub fn momentum(t: &TermIndex, m: &ModeSystem) -> Result<i64> {
    t.check(m)?;
    Ok(momentum_unchecked(t, m))
}

pub(crate) fn momentum_unchecked(t: &TermIndex, m: &ModeSystem) -> i64 {
    let mut total = 0i64;
    for (i, &k) in t.k.iter().enumerate() {
        total += k as i64 * m.tangent_weight(i);
    }
    for &(j, p) in &t.mu {
        total += j as i64 * p as i64;
    }
    for &(j, p) in &t.gamma {
        total -= j as i64 * p as i64;
    }
    total
}
