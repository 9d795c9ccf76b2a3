//! Acceptance suite: every criterion runs at its stated tolerance and time
//! budget, prints one PASS/FAIL line, and the test fails if any line fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nf_cli::commands::log_ratios;
use nf_cli::suites::{algebra_suite, estimate_sweeps, solver_oracle_suite};
use nf_cli::RunConfig;
use nf_core::{TermIndex, C64};
use nf_dnls::{build_hamiltonian, DnlsConfig, LatticeState, Simulator, StepControl};
use nf_engine::xremove::{datum_actions, oscillation};
use nf_engine::{remove_x_dependence, run_birkhoff, run_kam, xy_part, BirkhoffConfig, XRemovalConfig};
use nf_lab::measure::loglog_slope;
use nf_lab::{build_pipeline, frequency_derivative_check, measure_estimate, stability_experiment, FrequencyModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_917;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn timed<F: FnOnce() -> Result<(bool, String), String>>(name: &'static str, budget: Duration, f: F) -> Verdict {
    let t0 = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let el = t0.elapsed();
    let in_time = el <= budget;
    Verdict { name, pass: pass && in_time, detail: format!("{detail}; {:.1}s of {}s", el.as_secs_f64(), budget.as_secs()) }
}

fn algebra() -> Verdict {
    timed("algebra identities", Duration::from_secs(60), || {
        let r = algebra_suite(SEED, 200, 500).map_err(|e| e.to_string())?;
        Ok((r.pass(), r.summary()))
    })
}

fn oracle() -> Verdict {
    timed("solver oracle", Duration::from_secs(120), || {
        let r = solver_oracle_suite(SEED, 100);
        Ok((r.pass() && r.rows.len() == 100, r.summary()))
    })
}

fn estimates() -> Verdict {
    timed("estimate constants", Duration::from_secs(600), || {
        let r = estimate_sweeps(SEED, 10, 100).map_err(|e| e.to_string())?;
        Ok((r.pass(), r.summary()))
    })
}

fn toy() -> RunConfig {
    RunConfig::default()
}

/// Inject angle dependence of zero momentum on `|z_3|^2` monomials.
fn inject(h: &mut nf_core::HamSeries) {
    for (k, a, s) in [([2, -1], [0, 0], 3e-5), ([2, -1], [1, 0], 2e-5), ([4, -2], [0, 1], 1e-5)] {
        for kk in [k, [-k[0], -k[1]]] {
            h.add_term(TermIndex::new(&kk, &a, &[(3, 1)], &[(3, 1)]), C64::new(s, 0.0));
        }
    }
}

fn x_free(h: &nf_core::HamSeries, z0: &BTreeMap<i32, C64>, m: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for (alpha, f) in &xy_part(h, &datum_actions(z0)) {
        if alpha.iter().sum::<u32>() <= m + 2 {
            worst = worst.max(oscillation(f) / f.mean().norm().max(1e-5));
        }
    }
    worst
}

fn kam_and_birkhoff() -> (Verdict, Verdict) {
    let cfg = toy();
    let t0 = Instant::now();
    let kam = (|| -> Result<_, String> {
        let dnls = cfg.dnls_config().map_err(|e| e.to_string())?;
        let model = build_hamiltonian(&dnls, cfg.modes.k_cut, cfg.modes.d_cut).map_err(|e| e.to_string())?;
        let sched = cfg.schedule().map_err(|e| e.to_string())?;
        let dio = cfg.dio().map_err(|e| e.to_string())?;
        let run = run_kam(&model.normal_form, &model.perturbation, &sched, cfg.kam.steps, &dio, &cfg.kam_options()).map_err(|e| e.to_string())?;
        Ok((model, run, dio))
    })();
    let kam_time = t0.elapsed();
    let (model, run, dio) = match kam {
        Ok(x) => x,
        Err(e) => {
            let fail = |name| Verdict { name, pass: false, detail: e.clone() };
            return (fail("kam superlinear decay"), fail("birkhoff elimination"));
        }
    };
    let ratios: Vec<f64> = log_ratios(&run).into_iter().skip(1).collect();
    let residual_ok = run.trace.iter().all(|r| r.residual <= 1e-9 * r.p_low);
    let kam_pass = run.trace.len() >= 3 && ratios.iter().all(|r| *r >= 1.1) && residual_ok && kam_time <= Duration::from_secs(600);
    let kam_v = Verdict {
        name: "kam superlinear decay",
        pass: kam_pass,
        detail: format!(
            "J={} K={} D={}, {} steps, log ratios {:?}, residual within 1e-9 |||P^low|||: {residual_ok}; {:.1}s of 600s",
            cfg.modes.jmax,
            cfg.modes.k_cut,
            cfg.modes.d_cut,
            run.trace.len(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            kam_time.as_secs_f64()
        ),
    };

    let b = timed("birkhoff elimination", Duration::from_secs(600), || {
        let bc = BirkhoffConfig { m: 2, n_split: 4, ..BirkhoffConfig::default() };
        let br = run_birkhoff(&run.normal_form, &run.perturbation, &bc, &dio).map_err(|e| e.to_string())?;
        let rel = br.final_r_max / br.initial_r_scale;
        let modes = br.perturbation.modes_arc().clone();
        let mut h = br.perturbation.add(&run.normal_form.to_series(&modes, cfg.modes.k_cut, cfg.modes.d_cut).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let mut z0 = BTreeMap::new();
        z0.insert(3, C64::new(0.04 / 9.0, 0.0));
        z0.insert(-4, C64::new(0.0, 0.04 / 32.0));
        let xc = XRemovalConfig { m: 2, n_split: 4, ..XRemovalConfig::default() };
        let natural = remove_x_dependence(&h, &xc, &z0, 2.0).map_err(|e| e.to_string())?;
        let nat = x_free(&natural.hamiltonian, &z0, 2);
        inject(&mut h);
        let injected = remove_x_dependence(&h, &xc, &z0, 2.0).map_err(|e| e.to_string())?;
        let inj = x_free(&injected.hamiltonian, &z0, 2);
        let pass = rel <= 1e-10 && natural.worst <= 1e-10 && nat <= 1e-10 && injected.worst <= 1e-10 && inj <= 1e-10 && model.normal_form.omega.len() == 2;
        Ok((
            pass,
            format!(
                "M=2 N=4: R {:.3e} -> {:.3e} (relative {rel:.2e}); x-dependence left {nat:.2e} natural, {inj:.2e} injected ({} rounds)",
                br.initial_r_scale,
                br.final_r_max,
                injected.rows.len()
            ),
        ))
    });
    (kam_v, b)
}

fn lattice_state(rng: &mut ChaCha8Rng, cfg: &DnlsConfig, normal_amp: f64) -> LatticeState {
    let mut s = LatticeState::zeros(cfg.jmax);
    for j in (-cfg.jmax..=cfg.jmax).filter(|j| *j != 0) {
        let amp = match cfg.tangent.iter().position(|t| *t == j) {
            Some(i) => (j.abs() as f64 * cfg.zeta[i]).sqrt(),
            None => normal_amp / j.abs() as f64,
        };
        s.set(j, C64::from_polar(amp, rng.gen_range(0.0..2.0 * PI)));
    }
    s
}

/// Torus actions on the tangent sites, normal part of `H^1` norm `size`.
fn near_torus_state(rng: &mut ChaCha8Rng, cfg: &DnlsConfig, size: f64) -> LatticeState {
    let normal = (2 * cfg.jmax as usize) - cfg.tangent.len();
    lattice_state(rng, cfg, size / (normal as f64).sqrt())
}

fn simulator() -> Verdict {
    timed("simulator", Duration::from_secs(600), || {
        let e = |x: nf_dnls::DnlsError| x.to_string();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);

        let lin = DnlsConfig::new(vec![1, 2], 16, 0.0).map_err(e)?.with_seeded_xi(2);
        let s0 = lattice_state(&mut rng, &lin, 0.2);
        let mut s = s0.clone();
        Simulator::new(&lin, StepControl::default()).integrate(&mut s, 100.0, 0, |_| {}).map_err(e)?;
        let action = s.sites().map(|j| (s.get(j).norm_sqr() - s0.get(j).norm_sqr()).abs()).fold(0.0, f64::max);

        let strong = DnlsConfig::new(vec![1, 2], 6, 0.5).map_err(e)?;
        let s1 = lattice_state(&mut rng, &strong, 0.5);
        let run = |dt: f64| -> Result<LatticeState, String> {
            let mut sim = Simulator::new(&strong, StepControl { dt, reject_tol: 1.0, ..Default::default() });
            let mut s = s1.clone();
            sim.integrate(&mut s, 1.0, 0, |_| {}).map_err(e)?;
            Ok(s)
        };
        let (a, b, c) = (run(0.02)?, run(0.01)?, run(0.005)?);
        let slope = (a.distance(&b, 0.0) / b.distance(&c, 0.0)).log2();

        let toy = DnlsConfig::new(vec![1, 2], 16, 1e-3).map_err(e)?.with_seeded_xi(3);
        let s2 = near_torus_state(&mut rng, &toy, 0.05);
        let mut sim = Simulator::new(&toy, StepControl::default());
        let probe = Simulator::new(&toy, StepControl::default());
        let h0 = probe.hamiltonian(&s2);
        let mut drift: f64 = 0.0;
        let mut s = s2.clone();
        sim.integrate(&mut s, 1e3, 100, |st| drift = drift.max(((probe.hamiltonian(st) - h0) / h0).abs())).map_err(e)?;
        sim.integrate(&mut s, 0.0, 0, |_| {}).map_err(e)?;
        let reversal = s.distance(&s2, 0.0);

        let pass = action <= 1e-13 && (slope - 2.0).abs() <= 0.1 && drift <= 1e-6 && reversal <= 1e-9;
        Ok((pass, format!("eps=0 action change {action:.2e}, order slope {slope:.3}, H drift {drift:.2e} over T=1e3 with a 0.05 normal part, reversal {reversal:.2e}")))
    })
}

fn stability() -> Verdict {
    timed("torus stability", Duration::from_secs(1800), || {
        let mut cfg = toy();
        cfg.kam.steps = 4;
        let pipe = build_pipeline(&cfg.pipeline_config().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let mut lines = Vec::new();
        let mut smallest_pass = false;
        for (i, delta) in [0.02, 0.05].into_iter().enumerate() {
            let sc = cfg.stability_config(delta, cfg.stability.samples, cfg.stability.dt);
            let r = stability_experiment(&pipe, &sc).map_err(|e| e.to_string())?;
            if i == 0 {
                smallest_pass = r.pass;
            }
            lines.push(format!("delta {delta}: sup d {:.4e} vs {:.2e} over |t| <= {:.2} ({})", r.sup_distance, 2.0 * delta, r.horizon, r.verdict));
        }
        Ok((smallest_pass, lines.join(", ")))
    })
}

fn measure() -> Verdict {
    timed("measure scaling", Duration::from_secs(600), || {
        let mut cfg = toy();
        cfg.measure.samples = 20_000;
        let etas = cfg.etas();
        let ms = &cfg.measure;
        let centre: BTreeMap<i32, f64> = (-ms.jmax..=ms.jmax).filter(|j| *j != 0).map(|j| (j, 1.5 / j.abs() as f64)).collect();
        let model = FrequencyModel::unperturbed(&ms.tangent, &centre);
        let r = measure_estimate(&cfg.measure_config(), &model, &etas, ms.samples, SEED).map_err(|e| e.to_string())?;
        let xs: Vec<f64> = r.rows.iter().map(|r| r.eta).collect();
        let ys: Vec<f64> = r.rows.iter().map(|r| r.removed_fraction).collect();
        let slope = loglog_slope(&xs, &ys);
        let decade = (xs[xs.len() - 1] / xs[0]).log10();

        let mut d = toy();
        d.modes.jmax = 8;
        d.modes.k_cut = 6;
        d.domain.k_scan = 6;
        d.kam.steps = 2;
        let der = frequency_derivative_check(&d.dnls_config().map_err(|e| e.to_string())?, &d.kam_recipe().map_err(|e| e.to_string())?, &[3, -4, 5, -6], 1e-6)
            .map_err(|e| e.to_string())?;
        let pass = (slope - 1.0).abs() <= 0.2 && decade >= 1.0 - 1e-12 && r.rows.iter().all(|r| r.n_samples >= 10_000) && der.fitted_c <= 10.0;
        Ok((pass, format!("slope {slope:.4} over {decade:.2} decades with {} samples; frequency-derivative C {:.3e}", ms.samples, der.fitted_c)))
    })
}

#[test]
fn acceptance() {
    let mut verdicts = vec![algebra(), oracle(), estimates()];
    let (k, b) = kam_and_birkhoff();
    verdicts.extend([k, b, simulator(), stability(), measure()]);
    for v in &verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.pass).map(|v| v.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
