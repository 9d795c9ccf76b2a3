//! Property suites for the series algebra and the small-divisor solvers, and
//! the fitted-constant sweeps of the norm estimates.

use std::sync::Arc;

use nf_core::fourier::Fourier;
use nf_core::norms::{majorant_norms_at, triple};
use nf_core::random::{random_fourier, random_index, random_series, RandSpec};
use nf_core::solve::{dense_solve, dw_inverse, solve_large_coeff, Basis, CoeffFunction, DioParams, LargeCoeffOptions};
use nf_core::{poisson_bracket, vf_norm, DomainSpec, HamSeries, ModeSystem, SampleGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Independent per-instance seed from a run seed, a stream tag and an index.
pub fn sub_seed(seed: u64, tag: u64, i: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.set_word_pos(2 * i as u128);
    rng.gen()
}

/// Radial loss used in the bracket sweep.
pub const RADIAL_LOSS: f64 = 0.1;

pub const GOLDEN: f64 = 0.6180339887498949;
pub const PLASTIC: f64 = 1.324_717_957_244_746;

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraReport {
    pub pairs: usize,
    pub triples: usize,
    pub momentum_pairs: usize,
    pub antisymmetry_failures: usize,
    pub jacobi_worst: f64,
    pub leibniz_worst: f64,
    pub momentum_violations: usize,
    pub reality_failures: usize,
}

impl AlgebraReport {
    pub fn pass(&self) -> bool {
        self.antisymmetry_failures == 0
            && self.jacobi_worst <= 1e-10
            && self.leibniz_worst <= 1e-10
            && self.momentum_violations == 0
            && self.reality_failures == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "antisymmetry failures {}/{}, Jacobi worst {:.2e} and Leibniz worst {:.2e} on {} triples, momentum violations {} on {} pairs, reality failures {}",
            self.antisymmetry_failures,
            self.pairs,
            self.jacobi_worst,
            self.leibniz_worst,
            self.triples,
            self.momentum_violations,
            self.momentum_pairs,
            self.reality_failures
        )
    }
}

fn algebra_modes() -> Arc<ModeSystem> {
    Arc::new(ModeSystem::new(vec![1, 2], 5).expect("valid mode system"))
}

// cutoffs far above anything a product of these inputs reaches
fn algebra_triple(seed: u64, real: bool) -> [HamSeries; 3] {
    let m = algebra_modes();
    let spec = RandSpec { k_max: 2, deg_max: 3, terms: 6, sites: vec![-3, 3, 4], real };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [0, 1, 2].map(|_| random_series(&mut rng, &m, 20, 20, &spec))
}

pub fn algebra_suite(seed: u64, triples: usize, momentum_pairs: usize) -> nf_core::Result<AlgebraReport> {
    let per: Vec<nf_core::Result<(bool, f64, f64, bool)>> = (0..triples as u64)
        .into_par_iter()
        .map(|i| {
            let [u, v, w] = algebra_triple(seed.wrapping_add(i), false);
            let uv = poisson_bracket(&u, &v)?;
            let vu = poisson_bracket(&v, &u)?.scale_re(-1.0);
            let anti = uv.terms() == vu.terms();
            let t1 = poisson_bracket(&u, &poisson_bracket(&v, &w)?)?;
            let t2 = poisson_bracket(&v, &poisson_bracket(&w, &u)?)?;
            let t3 = poisson_bracket(&w, &uv)?;
            let scale = t1.max_abs().max(t2.max_abs()).max(t3.max_abs()).max(1.0);
            let jac = t1.add(&t2)?.add(&t3)?.max_abs() / scale;
            let lhs = poisson_bracket(&u, &v.mul(&w)?)?;
            let rhs = uv.mul(&w)?.add(&v.mul(&poisson_bracket(&u, &w)?)?)?;
            let leib = lhs.max_diff(&rhs) / lhs.max_abs().max(1.0);
            let [ur, vr, _] = algebra_triple(seed.wrapping_add(i) ^ 0x5a5a, true);
            let b = poisson_bracket(&ur, &vr)?;
            let real = b.is_real() && b.reality_defect() <= 1e-13 * b.max_abs().max(1e-300);
            Ok((anti, jac, leib, real))
        })
        .collect();
    let mut r = AlgebraReport {
        pairs: triples,
        triples,
        momentum_pairs,
        antisymmetry_failures: 0,
        jacobi_worst: 0.0,
        leibniz_worst: 0.0,
        momentum_violations: 0,
        reality_failures: 0,
    };
    for p in per {
        let (anti, jac, leib, real) = p?;
        r.antisymmetry_failures += usize::from(!anti);
        r.jacobi_worst = r.jacobi_worst.max(jac);
        r.leibniz_worst = r.leibniz_worst.max(leib);
        r.reality_failures += usize::from(!real);
    }
    let violations: Vec<nf_core::Result<usize>> = (0..momentum_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 4, i));
            let [u, v, _] = algebra_triple(rng.gen(), false);
            let a = rng.gen_range(-6..=6);
            let b = rng.gen_range(-6..=6);
            let br = poisson_bracket(&u.filter_momentum_class(a), &v.filter_momentum_class(b))?;
            Ok(br.iter().filter(|(t, _)| br.momentum_of(t) != a + b).count())
        })
        .collect();
    for v in violations {
        r.momentum_violations += v?;
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub n: usize,
    pub k: i32,
    pub lambda: f64,
    pub a_norm: f64,
    pub rel_error: f64,
    pub residual: f64,
    pub fallback: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn worst_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    pub fn worst_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn fallbacks(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback).count()
    }

    pub fn pass(&self) -> bool {
        self.failures.is_empty() && self.fallbacks() == 0 && self.worst_error() <= 1e-7 && self.worst_residual() <= 1e-8
    }

    pub fn summary(&self) -> String {
        format!(
            "{} instances, worst relative error {:.2e}, worst residual {:.2e}, fallbacks {}, failures {}",
            self.rows.len(),
            self.worst_error(),
            self.worst_residual(),
            self.fallbacks(),
            self.failures.len()
        )
    }
}

pub fn oracle_dio() -> DioParams {
    DioParams::new(0.1, 0.05, 2.0, 50).expect("valid Diophantine parameters")
}

fn zero_mean_coeff(rng: &mut ChaCha8Rng, n: usize, size: f64) -> Fourier {
    let a = random_fourier(rng, n, 1, 4, true).zero_mean();
    let nrm = a.norm(0.5).unwrap_or(1.0).max(1e-300);
    a.scale(C64::new(size / nrm, 0.0))
}

/// The straightening pipeline against the dense Galerkin solve.
pub fn solver_oracle_suite(seed: u64, instances: usize) -> OracleReport {
    let out: Vec<Result<OracleRow, String>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let n = if i % 2 == 0 { 1 } else { 2 };
            let (omega, k): (Vec<f64>, i32) = if n == 1 { (vec![GOLDEN], 16) } else { (vec![GOLDEN, PLASTIC], 12) };
            let basis = Basis::boxed(n, k);
            let lam = rng.gen_range(5.0..15.0);
            let size = rng.gen_range(0.01..0.1);
            let a = zero_mean_coeff(&mut rng, n, size);
            let r = random_fourier(&mut rng, n, 3, 8, false);
            let lamc = C64::new(lam, 0.0);
            let got = solve_large_coeff(&omega, lamc, &CoeffFunction::single(a.clone(), 0.5), &r, &oracle_dio(), &basis, &LargeCoeffOptions { allow_fallback: false, ..LargeCoeffOptions::default() })
                .map_err(|e| format!("instance {i}: pipeline {e}"))?;
            let dense = dense_solve(&omega, lamc, &a.scale(lamc), &basis.project(&r), &basis).map_err(|e| format!("instance {i}: oracle {e}"))?;
            let scale = dense.norm(0.0).map_err(|e| e.to_string())?.max(1e-300);
            Ok(OracleRow {
                n,
                k,
                lambda: lam,
                a_norm: size,
                rel_error: got.solution.distance(&dense) / scale,
                residual: got.report.residual,
                fallback: got.report.fallback,
            })
        })
        .collect();
    let mut rep = OracleReport { rows: Vec::new(), failures: Vec::new() };
    for o in out {
        match o {
            Ok(r) => rep.rows.push(r),
            Err(e) => rep.failures.push(e),
        }
    }
    rep
}

/// One instance of an estimate family: its ratio to the unit-constant envelope.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeSample {
    pub family: String,
    pub sigma: f64,
    pub degree: u32,
    pub normalized: f64,
    pub fit_half: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyFit {
    pub family: String,
    pub fitted: f64,
    pub worst_holdout: f64,
    pub n_fit: usize,
    pub n_holdout: usize,
}

impl FamilyFit {
    /// Holdout must stay under the fitted constant; equal values evaluated at
    /// different widths may differ in the last few bits.
    pub fn pass(&self) -> bool {
        let slack = 8.0 * f64::EPSILON * self.fitted;
        self.n_fit > 0 && self.n_holdout > 0 && self.fitted.is_finite() && self.worst_holdout <= self.fitted + slack
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub samples: Vec<EnvelopeSample>,
    pub fits: Vec<FamilyFit>,
}

impl EstimateReport {
    pub fn pass(&self) -> bool {
        !self.fits.is_empty() && self.fits.iter().all(FamilyFit::pass)
    }

    pub fn summary(&self) -> String {
        self.fits
            .iter()
            .map(|f| format!("{} C={:.3e} holdout/C={:.3}", f.family, f.fitted, f.worst_holdout / f.fitted))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Largest normalized ratio on the fit half, checked against the other half.
pub fn fit_family(family: &str, samples: &[EnvelopeSample]) -> FamilyFit {
    let of = |fit: bool| samples.iter().filter(move |s| s.family == family && s.fit_half == fit).map(|s| s.normalized);
    FamilyFit {
        family: family.to_string(),
        fitted: of(true).fold(0.0, f64::max),
        worst_holdout: of(false).fold(0.0, f64::max),
        n_fit: of(true).count(),
        n_holdout: of(false).count(),
    }
}

pub fn sigma_grid(s: f64) -> Vec<f64> {
    (1..=10).map(|i| 0.05 * i as f64 * s).collect()
}

fn homogeneous(rng: &mut ChaCha8Rng, m: &Arc<ModeSystem>, h: u32, terms: usize, k_max: u32, real: bool) -> HamSeries {
    let spec = RandSpec { k_max, deg_max: h, terms, sites: vec![-3, -1, 3, 4, -5], real };
    let mut out = HamSeries::new(m.clone(), 20, 20, false);
    let mut made = 0;
    while made < terms {
        let t = random_index(rng, m.n(), &spec);
        if t.degree() != h {
            continue;
        }
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if real {
            let mt = t.mirror();
            out.add_term(t, c);
            out.add_term(mt, c.conj());
        } else {
            out.add_term(t, c);
        }
        made += 1;
    }
    out.set_real(real);
    out.prune();
    out
}

/// Sweeps for the `D_omega` inverse, the straightened variable-coefficient
/// solve, the bracket estimate and the tame vector-field estimate.
pub fn estimate_sweeps(seed: u64, inputs_per_sigma: usize, random_inputs: usize) -> nf_core::Result<EstimateReport> {
    let d = oracle_dio();
    let s = 0.5;
    let sigmas = sigma_grid(s);
    let mut samples = Vec::new();

    let omega2 = [GOLDEN, PLASTIC];
    for i in 0..inputs_per_sigma {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 1, i as u64));
        let a = random_fourier(&mut rng, 2, 6, 12, false).zero_mean();
        for (q, &sg) in sigmas.iter().enumerate() {
            let out = dw_inverse(&a, &omega2, &d, s, sg)?;
            samples.push(EnvelopeSample { family: "dw_inverse".into(), sigma: sg, degree: 0, normalized: out.report.measured_ratio, fit_half: q % 2 == 1 });
        }
    }

    let basis = Basis::boxed(1, 16);
    let large: Vec<nf_core::Result<Vec<EnvelopeSample>>> = (0..inputs_per_sigma)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 2, i as u64));
            let size = rng.gen_range(0.01..0.05);
            let a = zero_mean_coeff(&mut rng, 1, size);
            let r = random_fourier(&mut rng, 1, 6, 8, false);
            let mut v = Vec::new();
            for (q, &sg) in sigmas.iter().enumerate() {
                let opts = LargeCoeffOptions { s, s_next: s - sg, allow_fallback: false, ..LargeCoeffOptions::default() };
                let out = solve_large_coeff(&[GOLDEN], C64::new(10.0, 0.0), &CoeffFunction::single(a.clone(), s), &r, &d, &basis, &opts)?;
                v.push(EnvelopeSample { family: "large_coeff".into(), sigma: sg, degree: 0, normalized: out.report.measured_ratio, fit_half: q % 2 == 1 });
            }
            Ok(v)
        })
        .collect();
    for v in large {
        samples.extend(v?);
    }

    let m = Arc::new(ModeSystem::new(vec![1, 2], 5)?);
    let r = 0.5;
    let grid = SampleGrid { angles: 6, radial: 3, seed };
    let inst: Vec<nf_core::Result<Vec<EnvelopeSample>>> = (0..random_inputs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 3, i as u64));
            let h = rng.gen_range(2..=4);
            let u = homogeneous(&mut rng, &m, h, 1, 3, false);
            let g = rng.gen_range(0..=2);
            let v = homogeneous(&mut rng, &m, g, 1, 2, false);
            let hw = rng.gen_range(3..=4);
            let w = homogeneous(&mut rng, &m, hw, 1, 3, true);
            let kv = v.iter().map(|(t, _)| t.k.iter().map(|x| x.unsigned_abs()).sum::<u32>()).max().unwrap_or(0).max(1) as f64;
            let br = poisson_bracket(&u, &v)?;
            let (nu, _) = majorant_norms_at(&u, s, r)?;
            let (_, nv) = majorant_norms_at(&v, s, r)?;
            let p = 2.0;
            let nw = triple(&w, s, r);
            let mut out = Vec::new();
            for (q, &sg) in sigmas.iter().enumerate() {
                let env = (kv.powi(2) / (r * RADIAL_LOSS)).max(1.0 / (r * r * sg)) * nu * nv;
                out.push(EnvelopeSample { family: "bracket".into(), sigma: sg, degree: h, normalized: triple(&br, s - sg, r - RADIAL_LOSS) / env, fit_half: q % 2 == 1 });
                let dom = DomainSpec::new(s - sg, r, p)?;
                let vf = vf_norm(&w, &dom, p - 1.0, &grid);
                let base = (hw as f64).powf(p + 2.0) * sg.powf(-p) * nw / (r * r);
                let c = (vf / base).powf(1.0 / (hw - 2) as f64);
                out.push(EnvelopeSample { family: "tame".into(), sigma: sg, degree: hw, normalized: c, fit_half: q % 2 == 1 });
            }
            Ok(out)
        })
        .collect();
    for x in inst {
        samples.extend(x?);
    }

    let fits = ["dw_inverse", "large_coeff", "bracket", "tame"].iter().map(|f| fit_family(f, &samples)).collect();
    Ok(EstimateReport { samples, fits })
}
