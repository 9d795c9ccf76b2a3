//! Class equations `(omega . d + i c(x)) G = E` and the solver dispatch.

use nf_core::fourier::{l1, Fourier};
use nf_core::solve::{
    apply_operator, solve_division, solve_large_coeff, solve_liu_yuan_mode, Basis, CoeffFunction, DioParams,
    LargeCoeffOptions,
};
use nf_core::C64;
use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct ClassOptions {
    /// `|[c]|` at or above which the straightening branch may be used.
    pub large_threshold: f64,
    /// Largest `||c~||_s / |[c]|` accepted by the straightening branch.
    pub small_ratio: f64,
    pub s: f64,
    pub s_next: f64,
    pub eta0: f64,
    pub residual_tol: f64,
}

impl Default for ClassOptions {
    fn default() -> Self {
        ClassOptions { large_threshold: 1.0, small_ratio: 0.1, s: 0.5, s_next: 0.4, eta0: 0.1, residual_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub class: String,
    pub component: String,
    pub branch: String,
    pub mean_coeff: f64,
    pub coeff_norm: f64,
    pub min_divisor: f64,
    pub residual: f64,
    pub fallback: bool,
    pub norm_rhs: f64,
    pub norm_sol: f64,
    /// Branch precondition re-checked after the solve.
    pub precondition_ok: bool,
}

/// Solve `(omega . d + i c) G = E` on `basis`.
///
/// In the solver normal form `(i omega . d + lam + mu) G = R` this is `lam = -[c]`,
/// `mu = -c~`, `R = i E`.
pub fn solve_class(
    omega: &[f64],
    c: &Fourier,
    e: &Fourier,
    basis: &Basis,
    dio: &DioParams,
    opts: &ClassOptions,
) -> Result<(Fourier, ClassReport)> {
    let n = omega.len();
    let cm = c.mean();
    let ct = c.zero_mean();
    let lam = -cm;
    let mu = ct.scale(C64::new(-1.0, 0.0));
    let r = basis.project(&e.scale(C64::i()));
    let kmax = basis.modes().iter().map(|k| l1(k)).max().unwrap_or(0);
    let coeff_norm = ct.norm(opts.s)?;
    let large = cm.norm() >= opts.large_threshold && coeff_norm <= opts.small_ratio * cm.norm();
    let (sol, branch, min_div, fallback) = if r.is_empty() {
        (Fourier::zero(n), "none", f64::INFINITY, false)
    } else if ct.is_empty() {
        let out = solve_division(omega, lam, &r, kmax)?;
        (basis.project(&out.solution), "division", out.report.min_divisor, false)
    } else if large {
        let a = ct.scale(1.0 / cm);
        let lopts = LargeCoeffOptions {
            s: opts.s,
            s_next: opts.s_next,
            residual_tol: opts.residual_tol,
            ..Default::default()
        };
        let out = solve_large_coeff(omega, lam, &CoeffFunction::single(a, opts.s), &r, dio, basis, &lopts)?;
        (out.solution, "large_coeff", out.report.min_divisor, out.report.fallback)
    } else {
        let out = solve_liu_yuan_mode(omega, lam, &mu, &r, dio, opts.s, opts.s - opts.s_next, opts.eta0, basis)?;
        (out.solution, "liu_yuan", out.report.min_divisor, false)
    };
    let scale = r.norm(0.0)?;
    let residual = if scale > 0.0 { apply_operator(omega, lam, &mu, &sol, basis).minus(&r).norm(0.0)? / scale } else { 0.0 };
    if residual > opts.residual_tol {
        return Err(nf_core::Error::Residual { residual, tol: opts.residual_tol }.into());
    }
    let precondition_ok = match branch {
        "division" => ct.is_empty(),
        "large_coeff" => large,
        _ => true,
    };
    Ok((
        sol.clone(),
        ClassReport {
            class: String::new(),
            component: String::new(),
            branch: branch.into(),
            mean_coeff: cm.re,
            coeff_norm,
            min_divisor: min_div,
            residual,
            fallback,
            norm_rhs: e.norm(opts.s)?,
            norm_sol: sol.norm(opts.s_next)?,
            precondition_ok,
        },
    ))
}
