//! Small-divisor equations on the torus.
//!
//! All solvers act on `L x = (i omega . d + lam + mu(theta)) x`, whose Fourier
//! symbol on `e^{i<k,theta>}` is `lam - <k,omega>` plus convolution by `mu`.

mod dense;
mod large;
mod ladder;

pub use dense::{apply_operator, dense_solve, Basis};
pub use ladder::WidthLadder;
pub use large::{solve_large_coeff, solve_liu_yuan_mode, CoeffFunction, LargeCoeffOptions};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{box_modes, dot, l1, Fourier};

/// Smallest admissible divisor.
pub const DIVISOR_FLOOR: f64 = 1e-10;
/// Largest Galerkin system the dense oracle accepts.
pub const ORACLE_CAP: usize = 40_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DioParams {
    pub gamma0: f64,
    pub gamma: f64,
    pub tau: f64,
    pub k_scan: u32,
}

impl DioParams {
    pub fn new(gamma0: f64, gamma: f64, tau: f64, k_scan: u32) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= gamma0) {
            return Err(Error::Invalid("need 0 < gamma <= gamma0".into()));
        }
        Ok(DioParams { gamma0, gamma, tau, k_scan })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverReport {
    pub branch: String,
    pub min_divisor: f64,
    pub residual: f64,
    pub picard_iters: usize,
    pub picard_steps: Vec<f64>,
    pub norm_in: f64,
    pub norm_out: f64,
    pub widths: Vec<f64>,
    pub measured_ratio: f64,
    pub im_contraction: f64,
    pub envelope_factor: f64,
    pub fallback: bool,
}

impl SolverReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub solution: Fourier,
    pub report: SolverReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub pass: bool,
    /// Smallest ratio `|divisor| |k|^tau / gamma` met; below one is a violation.
    pub worst_margin: f64,
    pub worst_k: Vec<i32>,
    pub violator: Option<Vec<i32>>,
    pub min_divisor: f64,
}

/// Brute scan of both Diophantine conditions over `0 < |k|_1 <= k_scan`.
pub fn diophantine_scan(omega: &[f64], lam: f64, d: &DioParams) -> ScanReport {
    let n = omega.len();
    let mut rep = ScanReport { pass: true, worst_margin: f64::INFINITY, worst_k: vec![0; n], violator: None, min_divisor: f64::INFINITY };
    let note = |k: &[i32], div: f64, g: f64, rep: &mut ScanReport| {
        let kk = (l1(k).max(1) as f64).powf(d.tau);
        let margin = div.abs() * kk / g;
        rep.min_divisor = rep.min_divisor.min(div.abs());
        if margin < rep.worst_margin {
            rep.worst_margin = margin;
            rep.worst_k = k.to_vec();
        }
        if margin < 1.0 && rep.violator.is_none() {
            rep.pass = false;
            rep.violator = Some(k.to_vec());
        }
    };
    for k in box_modes(n, d.k_scan as i32) {
        if l1(&k) > d.k_scan {
            continue;
        }
        let kw = dot(&k, omega);
        if l1(&k) > 0 {
            note(&k, kw, d.gamma0, &mut rep);
        }
        note(&k, lam + kw, d.gamma, &mut rep);
    }
    rep
}

fn check_divisor(k: &[i32], div: C64) -> Result<()> {
    if div.norm() < DIVISOR_FLOOR {
        Err(Error::Resonance { k: k.to_vec(), divisor: div.norm() })
    } else {
        Ok(())
    }
}

/// Solve `i omega . d X = A` for zero-mean `A`.
pub fn dw_inverse(a: &Fourier, omega: &[f64], d: &DioParams, s: f64, sigma: f64) -> Result<SolveOutcome> {
    let scale = a.norm(0.0)?;
    let m = a.mean().norm();
    if m > 1e-14 * scale.max(1.0) {
        return Err(Error::NonzeroMean(m));
    }
    let mut min_div = f64::INFINITY;
    let mut x = Fourier::zero(a.n());
    for (k, c) in a.iter() {
        if l1(k) == 0 {
            continue;
        }
        let div = dot(k, omega);
        check_divisor(k, C64::new(div, 0.0))?;
        min_div = min_div.min(div.abs());
        x.add(k.clone(), -c / div);
    }
    let back = x.omega_deriv(omega).scale(C64::i());
    let residual = if scale > 0.0 { back.minus(&a.zero_mean()).norm(0.0)? / scale } else { 0.0 };
    if residual > 1e-12 {
        return Err(Error::Residual { residual, tol: 1e-12 });
    }
    let n = a.n() as f64;
    let norm_in = a.norm(s)?;
    let norm_out = x.norm(s - sigma)?;
    let measured = if norm_in > 0.0 { norm_out * d.gamma0 * sigma.powf(10.0 * (n + d.tau)) / norm_in } else { 0.0 };
    Ok(SolveOutcome {
        solution: x,
        report: SolverReport {
            branch: "dw_inverse".into(),
            min_divisor: min_div,
            residual,
            norm_in,
            norm_out,
            widths: vec![s, s - sigma],
            measured_ratio: measured,
            ..Default::default()
        },
    })
}

/// `y(k) = R(k) / (lam - <k,omega>)` on the modes of `R` with `|k|_1 <= kmax`.
pub fn solve_division(omega: &[f64], lam: C64, r: &Fourier, kmax: u32) -> Result<SolveOutcome> {
    let mut min_div = f64::INFINITY;
    let mut y = Fourier::zero(r.n());
    for (k, c) in r.iter() {
        if l1(k) > kmax {
            continue;
        }
        let div = lam - dot(k, omega);
        check_divisor(k, div)?;
        min_div = min_div.min(div.norm());
        y.add(k.clone(), c / div);
    }
    let target = r.retain(|k| l1(k) <= kmax);
    let scale = target.norm(0.0)?;
    let back = y.omega_deriv(omega).scale(C64::i()).plus(&y.scale(lam));
    let residual = if scale > 0.0 { back.minus(&target).norm(0.0)? / scale } else { 0.0 };
    if residual > 1e-12 {
        return Err(Error::Residual { residual, tol: 1e-12 });
    }
    Ok(SolveOutcome {
        report: SolverReport {
            branch: "division".into(),
            min_divisor: min_div,
            residual,
            norm_in: scale,
            norm_out: y.norm(0.0)?,
            ..Default::default()
        },
        solution: y,
    })
}
