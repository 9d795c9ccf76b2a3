//! Composition with time-one flows via Lie series.

use crate::bracket::poisson_bracket;
use crate::error::{Error, Result};
use crate::norms::{majorant_norms_at, triple};
use crate::series::HamSeries;

#[derive(Clone, Debug)]
pub struct LiePlan {
    /// Largest power of `ad_F` kept.
    pub order_cap: usize,
    /// Width and radius used to measure the summands.
    pub s: f64,
    pub r: f64,
    /// Summands below `tol * |||H|||` end the series.
    pub tol: f64,
    /// Per-stage `(sigma, sigma')` shrink, logged only.
    pub stages: Vec<(f64, f64)>,
}

impl LiePlan {
    pub fn new(order_cap: usize, s: f64, r: f64) -> Self {
        LiePlan { order_cap: order_cap.max(1), s, r, tol: 1e-17, stages: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct LieOutcome {
    pub series: HamSeries,
    pub orders_used: usize,
    pub term_norms: Vec<f64>,
    /// Twice the norm of the first summand not included.
    pub remainder: f64,
    /// `|||F|||*` at the plan's domain.
    pub generator_star: f64,
}

/// `H o X_F^1 = sum_j ad_F^j H / j!` with `ad_F H = {H, F}`.
pub fn lie_transform(h: &HamSeries, f: &HamSeries, plan: &LiePlan) -> Result<LieOutcome> {
    let mut out = lie_increment(h, f, plan)?;
    out.series = h.add(&out.series)?;
    Ok(out)
}

/// `H o X_F^1 - H`, kept apart so that small increments are not pruned against `H`.
pub fn lie_increment(h: &HamSeries, f: &HamSeries, plan: &LiePlan) -> Result<LieOutcome> {
    let generator_star = majorant_norms_at(f, plan.s, plan.r)?.1;
    let scale = triple(h, plan.s, plan.r).max(f64::MIN_POSITIVE);
    let mut result = h.empty_like();
    let mut term = h.clone();
    let mut norms = Vec::new();
    let mut growth = 0;
    let mut remainder = 0.0;
    let mut used = 0;
    for j in 1..=plan.order_cap + 1 {
        if f.is_empty() || term.is_empty() {
            break;
        }
        term = poisson_bracket(&term, f)?.scale_re(1.0 / j as f64);
        let nrm = triple(&term, plan.s, plan.r);
        if term.is_empty() {
            break;
        }
        if j > plan.order_cap || nrm <= plan.tol * scale {
            remainder = 2.0 * nrm;
            break;
        }
        if let Some(prev) = norms.last() {
            if nrm > *prev {
                growth += 1;
                if growth >= 3 {
                    return Err(Error::Gate(format!("summand norms grew three times in a row at order {j}")));
                }
            } else {
                growth = 0;
            }
        }
        norms.push(nrm);
        result = result.add(&term)?;
        used = j;
    }
    Ok(LieOutcome { series: result, orders_used: used, term_norms: norms, remainder, generator_star })
}
