//! Variable-coefficient equations `(i omega . d + lam (1 + a)) x = R`.

use num_complex::Complex64 as C64;

use super::{apply_operator, dense_solve, solve_division, Basis, DioParams, SolveOutcome, SolverReport, DIVISOR_FLOOR};
use crate::error::{Error, Result};
use crate::fourier::{dot, l1, Fourier, Grid};

/// `a = sum_j a_j`, each part carried with its analyticity width.
#[derive(Clone, Debug)]
pub struct CoeffFunction {
    pub parts: Vec<(Fourier, f64)>,
}

impl CoeffFunction {
    pub fn single(a: Fourier, s: f64) -> Self {
        CoeffFunction { parts: vec![(a, s)] }
    }

    pub fn total(&self, n: usize) -> Fourier {
        self.parts.iter().fold(Fourier::zero(n), |acc, (a, _)| acc.plus(a))
    }
}

#[derive(Clone, Debug)]
pub struct LargeCoeffOptions {
    /// Points per dimension; `None` picks from the basis size.
    pub grid: Option<usize>,
    /// Widths `s_m` and `s_{m+1}` used for the logged estimate.
    pub s: f64,
    pub s_next: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub residual_tol: f64,
    pub allow_fallback: bool,
}

impl Default for LargeCoeffOptions {
    fn default() -> Self {
        LargeCoeffOptions {
            grid: None,
            s: 0.5,
            s_next: 0.25,
            picard_tol: 1e-13,
            picard_max: 50,
            residual_tol: 1e-8,
            allow_fallback: true,
        }
    }
}

fn pick_grid(n: usize, basis: &Basis) -> usize {
    let kb = basis.modes().iter().flat_map(|k| k.iter().map(|v| v.unsigned_abs())).max().unwrap_or(0) as usize;
    let need = (2 * kb + 2).next_power_of_two();
    need.max(if n == 1 { 256 } else { 32 })
}

/// Straighten `omega . d + lam a` by `theta = phi + alpha(phi) omega`, divide, and pull back.
pub fn solve_large_coeff(
    omega: &[f64],
    lam: C64,
    a: &CoeffFunction,
    r: &Fourier,
    d: &DioParams,
    basis: &Basis,
    opts: &LargeCoeffOptions,
) -> Result<SolveOutcome> {
    let n = omega.len();
    let a_orig = a.total(n);
    let kmax_basis = basis.modes().iter().map(|k| l1(k)).max().unwrap_or(0);
    if a_orig.is_empty() {
        let mut out = solve_division(omega, lam, &basis.project(r), kmax_basis)?;
        out.solution = basis.project(&out.solution);
        out.report.branch = "large_coeff".into();
        return Ok(out);
    }
    let mean = a_orig.mean();
    let lam_eff = lam * (1.0 + mean);
    let a_eff = a_orig.zero_mean().scale(1.0 / (1.0 + mean));

    // omega . d alpha = a
    let mut alpha = Fourier::zero(n);
    let mut min_div = f64::INFINITY;
    for (k, c) in a_eff.iter() {
        let div = dot(k, omega);
        if div.abs() < DIVISOR_FLOOR {
            return Err(Error::Resonance { k: k.clone(), divisor: div.abs() });
        }
        min_div = min_div.min(div.abs());
        alpha.add(k.clone(), c / C64::new(0.0, div));
    }

    let g = opts.grid.unwrap_or_else(|| pick_grid(n, basis));
    let grid = Grid { n, g };
    let pts: Vec<Vec<C64>> = grid.points().into_iter().map(|p| p.into_iter().map(|v| C64::new(v, 0.0)).collect()).collect();

    // Im alpha on the strip |Im theta| = s/2
    let t = 0.5 * opts.s;
    let shifted: Vec<Vec<C64>> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| p.iter().enumerate().map(|(dd, v)| v + C64::new(0.0, if (i >> dd) & 1 == 0 { t } else { -t })).collect())
        .collect();
    let im_ratio = alpha
        .eval_points(&shifted)
        .iter()
        .zip(&shifted)
        .map(|(v, p)| v.im.abs() / p.iter().map(|q| q.im.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    if im_ratio >= 1.0 {
        return Err(Error::Strip(format!("|Im alpha| / |Im theta| = {im_ratio:.3e}")));
    }

    // inverse map phi = theta + psi(theta) omega by Picard iteration
    let along = |base: &[Vec<C64>], f: &[C64]| -> Vec<Vec<C64>> {
        base.iter().zip(f).map(|(p, s)| p.iter().zip(omega).map(|(v, w)| v + s * w).collect()).collect()
    };
    let mut psi: Vec<C64> = alpha.eval_points(&pts).into_iter().map(|v| -v).collect();
    let mut steps = Vec::new();
    let mut iters = 0;
    loop {
        iters += 1;
        let next: Vec<C64> = alpha.eval_points(&along(&pts, &psi)).into_iter().map(|v| -v).collect();
        let step = next.iter().zip(&psi).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        psi = next;
        steps.push(step);
        if !step.is_finite() {
            return Err(Error::Picard(iters));
        }
        if step < opts.picard_tol {
            break;
        }
        if iters >= opts.picard_max {
            if step > 1e-8 {
                return Err(Error::Picard(iters));
            }
            break;
        }
    }
    let phi = along(&pts, &psi);

    // R* = R(phi) / (1 + a(phi)), evaluated from the finite Fourier sums
    let r_phi = r.eval_points(&phi);
    let a_phi = a_eff.eval_points(&phi);
    let rstar: Vec<C64> = r_phi.iter().zip(&a_phi).map(|(u, v)| u / (1.0 + v)).collect();
    let total: f64 = rstar.iter().map(|v| v.norm()).sum::<f64>() / grid.size() as f64;
    let rstar_hat = grid.analyze(&rstar, 1e-17 * total);

    let mut y = Fourier::zero(n);
    for (k, c) in rstar_hat.iter() {
        let div = lam_eff - dot(k, omega);
        if div.norm() < DIVISOR_FLOOR {
            return Err(Error::Resonance { k: k.clone(), divisor: div.norm() });
        }
        min_div = min_div.min(div.norm());
        y.add(k.clone(), c / div);
    }

    // x(phi) = y(phi + alpha(phi) omega)
    let alpha_grid = alpha.eval_points(&pts);
    let xs = y.eval_points(&along(&pts, &alpha_grid));
    let xs_total: f64 = xs.iter().map(|v| v.norm()).sum::<f64>() / grid.size() as f64;
    let x = basis.project(&grid.analyze(&xs, 1e-17 * xs_total));

    let target = basis.project(r);
    let scale = target.norm(0.0)?.max(f64::MIN_POSITIVE);
    let mu = a_orig.scale(lam);
    let residual = apply_operator(omega, lam, &mu, &x, basis).minus(&target).norm(0.0)? / scale;

    let nn = n as f64;
    let sigma = opts.s - opts.s_next;
    let mut report = SolverReport {
        branch: "large_coeff".into(),
        min_divisor: min_div,
        residual,
        picard_iters: iters,
        picard_steps: steps,
        norm_in: r.norm(opts.s)?,
        norm_out: 0.0,
        widths: vec![opts.s, opts.s_next],
        measured_ratio: 0.0,
        im_contraction: im_ratio,
        envelope_factor: 0.0,
        fallback: false,
    };
    let solution = if residual <= opts.residual_tol {
        x
    } else if opts.allow_fallback {
        let xd = dense_solve(omega, lam, &mu, &target, basis)?;
        report.residual = apply_operator(omega, lam, &mu, &xd, basis).minus(&target).norm(0.0)? / scale;
        report.fallback = true;
        if report.residual > opts.residual_tol {
            return Err(Error::Residual { residual: report.residual, tol: opts.residual_tol });
        }
        xd
    } else {
        return Err(Error::Residual { residual, tol: opts.residual_tol });
    };
    report.norm_out = solution.norm(opts.s_next)?;
    if report.norm_in > 0.0 {
        report.measured_ratio = report.norm_out * d.gamma * sigma.powf(20.0 * (nn + d.tau)) / report.norm_in;
    }
    Ok(SolveOutcome { solution, report })
}

/// Zero-average coefficient `mu`, solved by the Galerkin system on `basis`.
#[allow(clippy::too_many_arguments)]
pub fn solve_liu_yuan_mode(
    omega: &[f64],
    lam: C64,
    mu: &Fourier,
    p: &Fourier,
    d: &DioParams,
    s: f64,
    sigma: f64,
    eta0: f64,
    basis: &Basis,
) -> Result<SolveOutcome> {
    let scale_mu = mu.norm(0.0)?;
    if mu.mean().norm() > 1e-13 * scale_mu.max(1.0) {
        return Err(Error::NonzeroMean(mu.mean().norm()));
    }
    let target = basis.project(p);
    let scale = target.norm(0.0)?;
    let u = if mu.is_empty() {
        let kmax = basis.modes().iter().map(|k| l1(k)).max().unwrap_or(0);
        basis.project(&solve_division(omega, lam, &target, kmax)?.solution)
    } else {
        dense_solve(omega, lam, mu, &target, basis)?
    };
    let residual = if scale > 0.0 {
        apply_operator(omega, lam, mu, &u, basis).minus(&target).norm(0.0)? / scale
    } else {
        0.0
    };
    if residual > 1e-10 {
        return Err(Error::Residual { residual, tol: 1e-10 });
    }
    let min_div = basis
        .modes()
        .iter()
        .map(|k| (lam - dot(k, omega)).norm())
        .fold(f64::INFINITY, f64::min);
    let c_alpha = mu.weighted_norm(s, d.tau + 1.0);
    let norm_in = p.norm(s)?;
    let norm_out = u.norm(s - sigma)?;
    Ok(SolveOutcome {
        solution: u,
        report: SolverReport {
            branch: "liu_yuan".into(),
            min_divisor: min_div,
            residual,
            norm_in,
            norm_out,
            widths: vec![s, s - sigma],
            measured_ratio: if norm_in > 0.0 { norm_out / norm_in } else { 0.0 },
            envelope_factor: (2.0 * c_alpha * s / eta0).exp(),
            ..Default::default()
        },
    })
}
