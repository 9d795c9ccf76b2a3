//! The subcommands: each writes a manifest and its CSV set into one directory.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;

use nf_core::serial::to_text;
use nf_dnls::{build_hamiltonian, DnlsConfig};
use nf_engine::{run_kam, KamRun};
use nf_lab::measure::loglog_slope;
use nf_lab::{build_pipeline, frequency_derivative_check, measure_estimate, stability_experiment, FrequencyModel, StabilityReport};

use crate::config::RunConfig;
use crate::error::RunError;
use crate::output::{emit_plotdata, Cell, RunDir, Table};
use crate::suites::{algebra_suite, estimate_sweeps, solver_oracle_suite};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Selftest,
    Kam,
    Birkhoff,
    Simulate,
    Stability,
    Measure,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Selftest => "selftest",
            Command::Kam => "kam",
            Command::Birkhoff => "birkhoff",
            Command::Simulate => "simulate",
            Command::Stability => "stability",
            Command::Measure => "measure",
        }
    }
}

/// What a finished run reports back to the caller.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub pass: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'static str,
    config: &'a RunConfig,
    artifacts: Vec<String>,
    pass: bool,
    results: Value,
}

fn finish(dir: &RunDir, cmd: Command, cfg: &RunConfig, mut artifacts: Vec<String>, pass: bool, results: Value) -> Result<(), RunError> {
    if cfg.output.plotdata {
        artifacts.extend(emit_plotdata(&dir.root)?);
    }
    artifacts.push("manifest.json".into());
    dir.write_manifest(&Manifest { command: cmd.name(), version: env!("CARGO_PKG_VERSION"), config: cfg, artifacts, pass, results })
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let dir = RunDir::create(out)?;
    match cmd {
        Command::Selftest => selftest(cfg, &dir),
        Command::Kam => kam(cfg, &dir),
        Command::Birkhoff => birkhoff(cfg, &dir),
        Command::Simulate => simulate(cfg, &dir),
        Command::Stability => stability(cfg, &dir),
        Command::Measure => measure(cfg, &dir),
    }
}

fn selftest(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome, RunError> {
    let st = &cfg.selftest;
    let alg = algebra_suite(cfg.seed, st.triples, st.momentum_pairs)?;
    let ora = solver_oracle_suite(cfg.seed, st.oracle_instances);
    let est = estimate_sweeps(cfg.seed, st.estimate_inputs, st.estimate_random)?;

    let mut t = Table::new(&["n", "k", "lambda", "a_norm", "rel_error", "residual", "fallback"]);
    for r in &ora.rows {
        t.push(vec![r.n.into(), r.k.into(), r.lambda.into(), r.a_norm.into(), r.rel_error.into(), r.residual.into(), r.fallback.into()]);
    }
    dir.write_table("oracle.csv", &t)?;
    let mut e = Table::new(&["family", "sigma", "degree", "normalized", "half"]);
    for s in &est.samples {
        e.push(vec![s.family.clone().into(), s.sigma.into(), s.degree.into(), s.normalized.into(), (if s.fit_half { "fit" } else { "holdout" }).into()]);
    }
    dir.write_table("estimates.csv", &e)?;
    let mut f = Table::new(&["family", "fitted", "worst_holdout", "n_fit", "n_holdout", "pass"]);
    for x in &est.fits {
        f.push(vec![x.family.clone().into(), x.fitted.into(), x.worst_holdout.into(), x.n_fit.into(), x.n_holdout.into(), x.pass().into()]);
    }
    dir.write_table("estimate_fits.csv", &f)?;

    let verdicts = [("algebra", alg.pass(), alg.summary()), ("solver_oracle", ora.pass(), ora.summary()), ("estimates", est.pass(), est.summary())];
    let mut s = Table::new(&["suite", "pass", "detail"]);
    for (name, ok, detail) in &verdicts {
        s.push(vec![(*name).into(), (*ok).into(), detail.clone().into()]);
    }
    dir.write_table("selftest.csv", &s)?;
    let pass = verdicts.iter().all(|v| v.1);
    let results = json!({ "algebra": alg, "oracle_failures": ora.failures, "estimate_fits": est.fits });
    let arts = ["oracle.csv", "estimates.csv", "estimate_fits.csv", "selftest.csv"].map(String::from).to_vec();
    finish(dir, Command::Selftest, cfg, arts, pass, results)?;
    let lines: Vec<String> = verdicts.iter().map(|(n, ok, d)| format!("{} {n}: {d}", if *ok { "PASS" } else { "FAIL" })).collect();
    if !pass {
        return Err(RunError::Math(format!("selftest failed\n{}", lines.join("\n"))));
    }
    Ok(Outcome { lines, pass })
}

/// `log p_{m+1} / log p_m` along the trace; the first entry has no predecessor.
pub fn log_ratios(run: &KamRun) -> Vec<f64> {
    let lows: Vec<f64> = run.trace.iter().map(|r| r.p_low).collect();
    std::iter::once(f64::NAN).chain(lows.windows(2).map(|w| w[1].ln() / w[0].ln())).take(lows.len()).collect()
}

fn kam_table(run: &KamRun) -> Table {
    let n = run.normal_form.omega.len();
    let mut head: Vec<String> = ["step", "s", "r", "eta_m", "eps_m", "k_schedule", "k_used", "clamped", "p_low", "p_high", "residual", "f_star"]
        .map(String::from)
        .to_vec();
    head.extend((1..=n).map(|i| format!("omega_{i}")));
    head.extend(["omega_shift", "min_divisor", "scan_margin", "lie_orders", "lie_remainder", "p_low_after", "log_ratio", "superlinear"].map(String::from));
    let mut t = Table::new(&head);
    for (i, (row, lr)) in run.trace.iter().zip(log_ratios(run)).enumerate() {
        let mut cells: Vec<Cell> = vec![
            row.step.into(),
            row.s.into(),
            row.r.into(),
            row.eta_m.into(),
            row.eps_m.into(),
            row.k_schedule.into(),
            row.k_used.into(),
            row.clamped.into(),
            row.p_low.into(),
            row.p_high.into(),
            row.residual.into(),
            row.f_star.into(),
        ];
        cells.extend(row.omega.iter().map(|w| Cell::from(*w)));
        cells.extend([
            row.omega_shift.into(),
            row.min_divisor.into(),
            row.scan_margin.into(),
            row.lie_orders.into(),
            row.lie_remainder.into(),
            run.p_low_after.get(i).copied().unwrap_or(f64::NAN).into(),
            lr.into(),
            (if lr.is_nan() { "" } else if lr >= 1.1 { "true" } else { "false" }).into(),
        ]);
        t.push(cells);
    }
    t
}

fn run_kam_model(cfg: &RunConfig, dnls: &DnlsConfig) -> Result<(nf_dnls::Model, KamRun), RunError> {
    let model = build_hamiltonian(dnls, cfg.modes.k_cut, cfg.modes.d_cut)?;
    let run = run_kam(&model.normal_form, &model.perturbation, &cfg.schedule()?, cfg.kam.steps, &cfg.dio()?, &cfg.kam_options())?;
    Ok((model, run))
}

fn kam(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome, RunError> {
    let dnls = cfg.dnls_config()?;
    let (model, run) = run_kam_model(cfg, &dnls)?;
    dir.write_table("kam_steps.csv", &kam_table(&run))?;
    let mut arts = vec!["kam_steps.csv".to_string()];
    if cfg.kam.checkpoints {
        dir.write_text("checkpoints/initial_perturbation.txt", &to_text(&model.perturbation))?;
        for (m, g) in run.generators.iter().enumerate() {
            let name = format!("checkpoints/generator_{m}.txt");
            dir.write_text(&name, &to_text(g))?;
            arts.push(name);
        }
        dir.write_text("checkpoints/final_perturbation.txt", &to_text(&run.perturbation))?;
        arts.extend(["checkpoints/initial_perturbation.txt".into(), "checkpoints/final_perturbation.txt".into()]);
    }
    let ratios = log_ratios(&run);
    let superlinear = ratios.iter().skip(1).all(|r| *r >= 1.1);
    let results = json!({
        "schedule": cfg.schedule()?,
        "omega_initial": model.normal_form.omega,
        "omega_final": run.normal_form.omega,
        "trace": run.trace,
        "p_low_after": run.p_low_after,
    });
    finish(dir, Command::Kam, cfg, arts, superlinear, results)?;
    let lows: Vec<String> = run.trace.iter().map(|r| format!("{:.3e}", r.p_low)).collect();
    Ok(Outcome { lines: vec![format!("kam: {} steps, |||P^low||| = [{}], superlinear = {superlinear}", run.trace.len(), lows.join(", "))], pass: superlinear })
}

fn birkhoff(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome, RunError> {
    let mut pc = cfg.pipeline_config()?;
    pc.birkhoff = Some(cfg.birkhoff_config());
    let pipe = build_pipeline(&pc)?;
    let (Some(kam), Some(b)) = (&pipe.kam, &pipe.birkhoff) else {
        return Err(RunError::Schema("birkhoff needs eps > 0".into()));
    };
    dir.write_table("kam_steps.csv", &kam_table(kam))?;
    let mut s = Table::new(&["j0", "r_before", "r_after", "residual", "k_used", "generator_terms"]);
    let mut rows = Table::new(&["j0", "class", "case", "branch", "norm_before", "norm_after", "min_divisor", "threshold_ok"]);
    for st in &b.steps {
        s.push(vec![st.j0.into(), st.r_before.into(), st.r_after.into(), st.residual.into(), st.k_used.into(), st.f.len().into()]);
        for r in &st.rows {
            rows.push(vec![
                r.step.into(),
                r.class.clone().into(),
                r.case.clone().into(),
                r.branch.clone().into(),
                r.norm_before.into(),
                r.norm_after.into(),
                r.min_divisor.into(),
                r.threshold_ok.into(),
            ]);
        }
    }
    dir.write_table("birkhoff_steps.csv", &s)?;
    dir.write_table("birkhoff_rows.csv", &rows)?;
    let rel = if b.initial_r_scale > 0.0 { b.final_r_max / b.initial_r_scale } else { 0.0 };
    let pass = rel <= 1e-10;
    let results = json!({
        "initial_r_scale": b.initial_r_scale,
        "final_r_max": b.final_r_max,
        "relative": rel,
        "warnings": b.warnings,
        "norms": b.norms,
    });
    let arts = ["kam_steps.csv", "birkhoff_steps.csv", "birkhoff_rows.csv"].map(String::from).to_vec();
    finish(dir, Command::Birkhoff, cfg, arts, pass, results)?;
    Ok(Outcome { lines: vec![format!("birkhoff: R {:.3e} -> {:.3e} (relative {rel:.3e})", b.initial_r_scale, b.final_r_max)], pass })
}

fn trajectory_table(reports: &[StabilityReport], with_delta: bool) -> Table {
    let n = reports.first().and_then(|r| r.rows.first()).map_or(0, |r| r.y.len());
    let mut head: Vec<String> = Vec::new();
    if with_delta {
        head.push("delta".into());
    }
    head.extend(["t", "H", "N_tilde"].map(String::from));
    head.extend((1..=n).map(|i| format!("Y_{i}")));
    head.push("d".into());
    let mut t = Table::new(&head);
    for rep in reports {
        for r in &rep.rows {
            let mut cells: Vec<Cell> = Vec::new();
            if with_delta {
                cells.push(rep.delta.into());
            }
            cells.extend([r.t.into(), r.h.into(), r.n_tilde.into()]);
            cells.extend(r.y.iter().map(|y| Cell::from(*y)));
            cells.push(r.distance.into());
            t.push(cells);
        }
    }
    t
}

fn report_json(r: &StabilityReport) -> Value {
    json!({
        "delta": r.delta,
        "horizon": r.horizon,
        "d0": r.d0,
        "sup_distance": r.sup_distance,
        "two_delta": 2.0 * r.delta,
        "t_star": r.t_star,
        "t_j": r.t_j,
        "max_energy_drift": r.max_energy_drift,
        "x_removal_worst": r.x_removal_worst,
        "torus_tail": r.torus_tail,
        "pass": r.pass,
        "verdict": r.verdict,
    })
}

fn pipeline_json(pipe: &nf_lab::Pipeline) -> Value {
    json!({
        "kam_p_low": pipe.kam.as_ref().map(|k| k.trace.iter().map(|r| r.p_low).collect::<Vec<_>>()),
        "birkhoff_relative": pipe.birkhoff.as_ref().map(|b| if b.initial_r_scale > 0.0 { b.final_r_max / b.initial_r_scale } else { 0.0 }),
    })
}

fn simulate(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome, RunError> {
    let pipe = build_pipeline(&cfg.pipeline_config()?)?;
    let sc = cfg.stability_config(cfg.simulate.delta, cfg.simulate.samples, cfg.simulate.dt);
    let rep = stability_experiment(&pipe, &sc)?;
    dir.write_table("trajectory.csv", &trajectory_table(std::slice::from_ref(&rep), false))?;
    let results = json!({ "pipeline": pipeline_json(&pipe), "run": report_json(&rep) });
    finish(dir, Command::Simulate, cfg, vec!["trajectory.csv".into()], rep.pass, results)?;
    Ok(Outcome {
        lines: vec![format!(
            "simulate: delta {} horizon {:.3} sup d {:.4e} drift {:.2e} -> {}",
            rep.delta, rep.horizon, rep.sup_distance, rep.max_energy_drift, rep.verdict
        )],
        pass: rep.pass,
    })
}

fn stability(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome, RunError> {
    let pipe = build_pipeline(&cfg.pipeline_config()?)?;
    let reports: Vec<StabilityReport> = cfg
        .stability
        .deltas
        .par_iter()
        .map(|&d| stability_experiment(&pipe, &cfg.stability_config(d, cfg.stability.samples, cfg.stability.dt)))
        .collect::<Result<_, _>>()?;
    dir.write_table("stability.csv", &trajectory_table(&reports, true))?;
    let mut s = Table::new(&["delta", "horizon", "d0", "sup_distance", "two_delta", "t_star", "max_energy_drift", "pass", "verdict"]);
    for r in &reports {
        s.push(vec![
            r.delta.into(),
            r.horizon.into(),
            r.d0.into(),
            r.sup_distance.into(),
            (2.0 * r.delta).into(),
            r.t_star.unwrap_or(f64::NAN).into(),
            r.max_energy_drift.into(),
            r.pass.into(),
            r.verdict.clone().into(),
        ]);
    }
    dir.write_table("stability_summary.csv", &s)?;
    let smallest = reports.iter().min_by(|a, b| a.delta.total_cmp(&b.delta)).expect("deltas validated non-empty");
    let pass = smallest.pass;
    let results = json!({ "pipeline": pipeline_json(&pipe), "runs": reports.iter().map(report_json).collect::<Vec<_>>() });
    finish(dir, Command::Stability, cfg, vec!["stability.csv".into(), "stability_summary.csv".into()], pass, results)?;
    let lines = reports
        .iter()
        .map(|r| format!("stability: delta {} sup d {:.4e} vs 2 delta {:.4e} -> {}", r.delta, r.sup_distance, 2.0 * r.delta, r.verdict))
        .collect();
    Ok(Outcome { lines, pass })
}

fn measure(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome, RunError> {
    let mc = cfg.measure_config();
    let ms = &cfg.measure;
    let model = if ms.post_kam {
        if ms.tangent != cfg.modes.tangent || ms.jmax != cfg.modes.jmax {
            return Err(RunError::Schema("measure.post_kam needs measure.tangent/jmax equal to [modes]".into()));
        }
        let dnls = cfg.dnls_config()?;
        let (_, run) = run_kam_model(cfg, &dnls)?;
        FrequencyModel::from_normal_form(&ms.tangent, &run.normal_form, &dnls.xi)
    } else {
        let centre: BTreeMap<i32, f64> = (-ms.jmax..=ms.jmax).filter(|j| *j != 0).map(|j| (j, 1.5 / j.abs() as f64)).collect();
        FrequencyModel::unperturbed(&ms.tangent, &centre)
    };
    let etas = cfg.etas();
    let rep = measure_estimate(&mc, &model, &etas, ms.samples, cfg.seed)?;
    let mut t = Table::new(&["eta", "removed_fraction", "ci_lo", "ci_hi", "n_samples"]);
    for r in &rep.rows {
        t.push(vec![r.eta.into(), r.removed_fraction.into(), r.ci_lo.into(), r.ci_hi.into(), r.n_samples.into()]);
    }
    dir.write_table("measure.csv", &t)?;
    let mut arts = vec!["measure.csv".to_string()];
    let xs: Vec<f64> = rep.rows.iter().map(|r| r.eta).collect();
    let ys: Vec<f64> = rep.rows.iter().map(|r| r.removed_fraction).collect();
    let slope = loglog_slope(&xs, &ys);
    let mut pass = (slope - 1.0).abs() <= 0.2;
    let mut derivative = Value::Null;
    if !ms.derivative_params.is_empty() {
        let d = frequency_derivative_check(&cfg.dnls_config()?, &cfg.kam_recipe()?, &ms.derivative_params, ms.derivative_step)?;
        let mut dt = Table::new(&["a", "target", "site", "derivative", "scaled"]);
        for r in &d.rows {
            dt.push(vec![r.a.into(), r.target.clone().into(), r.site.into(), r.derivative.into(), r.scaled.into()]);
        }
        dir.write_table("frequency_derivative.csv", &dt)?;
        arts.push("frequency_derivative.csv".into());
        pass &= d.fitted_c <= 10.0;
        derivative = json!({ "fitted_c": d.fitted_c });
    }
    let results = json!({
        "slope": slope,
        "queries": rep.queries,
        "active_queries": rep.active_queries,
        "active_sites": rep.active_sites,
        "derivative": derivative,
    });
    finish(dir, Command::Measure, cfg, arts, pass, results)?;
    Ok(Outcome { lines: vec![format!("measure: slope {slope:.4} over {} eta values, {} active queries", etas.len(), rep.active_queries)], pass })
}
