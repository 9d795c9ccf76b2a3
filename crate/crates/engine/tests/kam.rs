use nf_core::fourier::{dot, Grid};
use nf_core::norms::triple;
use nf_core::random::{random_series, RandSpec};
use nf_core::solve::DioParams;
use nf_core::vfield::vector_field;
use nf_core::*;
use nf_dnls::{build_hamiltonian, DnlsConfig, Model};
use nf_engine::kam::assemble_homological_rhs_explicit;
use nf_engine::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

fn toy(jmax: i32, eps: f64) -> DnlsConfig {
    let mut cfg = DnlsConfig::new(vec![1, 2], jmax, eps).unwrap().with_seeded_xi(7);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let ratio = 1.0 + 1.0 / (1.0 + 1.0 / (8.0 + 1.0 / phi));
    cfg.set_xi(2, ratio * cfg.lambda(1) - 4.0).unwrap();
    cfg
}

fn sched() -> KamSchedule {
    KamSchedule::new(0.1, 1e-3, 0.5, 3.0).unwrap()
}

fn dio() -> DioParams {
    DioParams::new(0.1, 0.1, 3.0, 6).unwrap()
}

fn small_run() -> &'static (Model, KamRun) {
    static CELL: OnceLock<(Model, KamRun)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = build_hamiltonian(&toy(8, 1e-3), 6, 4).unwrap();
        let r = run_kam(&m.normal_form, &m.perturbation, &sched(), 3, &dio(), &KamOptions::default()).unwrap();
        (m, r)
    })
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn unperturbed() -> Model {
    build_hamiltonian(&toy(6, 0.0), 4, 4).unwrap()
}

#[test]
fn schedule_sequences_are_monotone() {
    let s = sched();
    for m in 0..8 {
        assert!(s.s_m(m + 1) < s.s_m(m) && s.r_m(m + 1) < s.r_m(m));
        assert!(s.s_m(m) > s.s_m(0) / 2.0 && s.r_m(m) > s.r_m(0) / 2.0);
        assert!(s.k_m(m + 1) > s.k_m(m));
        assert!((s.eta_m(m) - 0.1 * 0.5f64.powi(m as i32)).abs() < 1e-15);
    }
    assert!(KamSchedule::new(0.0, 1e-3, 0.5, 3.0).is_err());
}

#[test]
fn zero_perturbation_gives_zero_step_and_no_iterations() {
    let m = unperturbed();
    let step = kam_solve_step(&m.normal_form, &m.perturbation, 0, &sched(), &dio(), &KamOptions::default()).unwrap();
    assert!(step.f.is_empty() && step.p_hat.is_empty() && step.n_hat.is_zero());
    let run = run_kam(&m.normal_form, &m.perturbation, &sched(), 4, &dio(), &KamOptions::default()).unwrap();
    assert!(run.trace.is_empty() && run.generators.is_empty());
}

#[test]
fn single_mode_angle_term_is_a_division() {
    let m = unperturbed();
    let modes = m.perturbation.modes_arc().clone();
    let k = [2, -1];
    let mut p = m.perturbation.empty_like();
    p.add_term(TermIndex::new(&k, &[0, 0], &[], &[]), c(5e-4));
    p.add_term(TermIndex::new(&[-2, 1], &[0, 0], &[], &[]), c(5e-4));
    let step = kam_solve_step(&m.normal_form, &p, 0, &sched(), &dio(), &KamOptions::default()).unwrap();
    assert!(step.residual <= 1e-12, "residual {}", step.residual);
    assert_eq!(step.f.len(), 2);
    let f = step.f.get(&TermIndex::new(&k, &[0, 0], &[], &[]));
    let div = dot(&k, &m.normal_form.omega);
    assert!((f.norm() - 5e-4 / div.abs()).abs() < 1e-15);
    let check = poisson_bracket(&m.normal_form.to_series(&modes, 4, 4).unwrap(), &step.f).unwrap().add(&p).unwrap();
    assert!(check.max_abs() < 1e-18);
}

#[test]
fn rhs_reduces_to_low_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let modes = Arc::new(ModeSystem::new(vec![1, 2], 6).unwrap());
    let spec = RandSpec { k_max: 2, deg_max: 4, terms: 40, sites: vec![-2, 3, -3, 4], real: true };
    let p = random_series(&mut rng, &modes, 4, 4, &spec);
    let (low, high) = p.split_low_high();
    let empty = p.empty_like();
    assert_eq!(assemble_homological_rhs(&low, &high, &empty).unwrap().max_diff(&low), 0.0);
    let f = random_series(&mut rng, &modes, 4, 4, &RandSpec { deg_max: 2, ..spec });
    assert_eq!(assemble_homological_rhs(&low, &empty, &f).unwrap().max_diff(&low), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn rhs_two_ways_agree(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = Arc::new(ModeSystem::new(vec![1, 2], 6).unwrap());
        let spec = RandSpec { k_max: 2, deg_max: 5, terms: 30, sites: vec![-2, -1, 3, -3, 4], real: false };
        let p = random_series(&mut rng, &modes, 5, 5, &spec);
        let f = random_series(&mut rng, &modes, 5, 5, &RandSpec { deg_max: 2, ..spec });
        let (low, high) = p.split_low_high();
        let a = assemble_homological_rhs(&low, &high, &f).unwrap();
        let b = assemble_homological_rhs_explicit(&low, &high, &f).unwrap();
        prop_assert!(a.max_diff(&b) <= 1e-14 * (1.0 + a.max_abs()));
    }
}

#[test]
fn compose_with_zero_generator_is_identity() {
    let (m, _) = small_run();
    let step = StepResult {
        f: m.perturbation.empty_like(),
        parts: BTreeMap::new(),
        g: m.perturbation.empty_like(),
        n_hat: NormalIncrement::zero(2),
        p_hat: m.perturbation.empty_like(),
        reports: vec![],
        residual: 0.0,
        p_low_norm: 0.0,
        k_used: 0,
        clamped: false,
    };
    let (nf, p, _) = compose_step(&m.normal_form, &m.perturbation, &step, &LiePlan::new(8, 0.1, 0.1)).unwrap();
    assert_eq!(nf, m.normal_form);
    assert_eq!(p.max_diff(&m.perturbation), 0.0);
}

#[test]
fn constant_action_coefficient_shifts_the_frequency() {
    let m = unperturbed();
    let mut p = m.perturbation.empty_like();
    p.add_term(TermIndex::new(&[0, 0], &[1, 0], &[], &[]), c(3e-4));
    let step = kam_solve_step(&m.normal_form, &p, 0, &sched(), &dio(), &KamOptions::default()).unwrap();
    let (nf, p_next, _) = compose_step(&m.normal_form, &p, &step, &LiePlan::new(8, 0.1, 0.1)).unwrap();
    assert!((nf.omega[0] - m.normal_form.omega[0] - 3e-4).abs() < 1e-15);
    assert_eq!(nf.omega[1], m.normal_form.omega[1]);
    assert!(p_next.max_abs() < 1e-15);
}

#[test]
fn composition_matches_direct_lie_transform() {
    let (m, _) = small_run();
    let modes = m.perturbation.modes_arc().clone();
    let s = sched();
    let step = kam_solve_step(&m.normal_form, &m.perturbation, 0, &s, &dio(), &KamOptions::default()).unwrap();
    let plan = LiePlan::new(16, s.s_m(1), s.r_m(1));
    let (nf, p, _) = compose_step(&m.normal_form, &m.perturbation, &step, &plan).unwrap();
    let h = m.normal_form.to_series(&modes, 6, 4).unwrap().add(&m.perturbation).unwrap();
    let direct = lie_transform(&h, &step.f, &plan).unwrap().series;
    // the normal form keeps its constant in `energy`, outside the series
    let mut two_path = nf.to_series(&modes, 6, 4).unwrap().add(&p).unwrap();
    two_path.add_term(TermIndex::new(&[0, 0], &[0, 0], &[], &[]), c(nf.energy - m.normal_form.energy));
    let scale = triple(&m.perturbation, s.s_m(1), s.r_m(1));
    assert!(triple(&direct.sub(&two_path).unwrap(), s.s_m(1), s.r_m(1)) <= 1e-9 * scale);
}

#[test]
fn toy_step_residual_momentum_and_reality() {
    let (m, _) = small_run();
    let step = kam_solve_step(&m.normal_form, &m.perturbation, 0, &sched(), &dio(), &KamOptions::default()).unwrap();
    assert!(step.residual <= 1e-9 * step.p_low_norm);
    for (comp, part) in &step.parts {
        assert!(part.iter().all(|(t, _)| part.momentum_of(t) == 0), "{}", comp.name());
        assert!(part.iter().all(|(t, _)| Component::of(t) == Some(*comp)));
    }
    assert!(step.f.is_real() && step.f.reality_defect() < 1e-15);
}

#[test]
fn toy_run_decays_superlinearly() {
    let (_, run) = small_run();
    let lows: Vec<f64> = run.trace.iter().map(|r| r.p_low).collect();
    assert!(lows.len() >= 2);
    for w in lows.windows(2) {
        assert!(w[1] < w[0]);
        assert!(w[1].ln() / w[0].ln() >= 1.1, "{lows:?}");
    }
    for row in &run.trace {
        assert!(row.residual <= 1e-9 * row.p_low);
    }
    assert!(run.perturbation.is_real());
    assert_eq!(run.perturbation.max_momentum(), 0);
    assert!(run.normal_form.big_omega.values().all(|f| f.zero_mean().iter().all(|(k, _)| {
        k[0] + 2 * k[1] == 0
    })));
}

#[test]
fn frequency_drift_is_proportional_to_the_perturbation() {
    let (_, run) = small_run();
    let ratios: Vec<f64> = run.trace.iter().filter(|r| r.omega_shift > 0.0).map(|r| r.omega_shift / r.p_low).collect();
    assert!(!ratios.is_empty());
    let c = ratios.iter().copied().fold(0.0, f64::max);
    assert!(c < 100.0, "{ratios:?}");
}

#[test]
fn final_torus_is_nearly_invariant() {
    let (m, run) = small_run();
    let modes = m.perturbation.modes_arc().clone();
    let s = sched();
    let steps = run.trace.len();
    let h = run.normal_form.to_series(&modes, 6, 4).unwrap().add(&run.perturbation).unwrap();
    let low = run.p_low_after.last().copied().unwrap();
    let r = s.r_m(steps);
    let grid = Grid { n: 2, g: 8 };
    let mut worst: f64 = 0.0;
    for x in grid.points() {
        let w = PhasePoint::real(&modes, &x, &[0.0, 0.0], &vec![c(0.0); modes.normal_sites().len()]);
        let v = vector_field(&h, &w);
        worst = v.dy.iter().chain(&v.dz).map(|z| z.norm()).fold(worst, f64::max);
    }
    assert!(worst <= 10.0 * low / (r * r) + 1e-18, "sup {worst} vs {low}");
}

#[test]
fn resonance_scan_reports_a_positive_margin_on_the_toy() {
    let (m, _) = small_run();
    let scan = resonance_scan(&m.normal_form, m.perturbation.modes(), 0.1, 3.0, 4).unwrap();
    assert!(scan.checked > 0 && scan.min_divisor > 0.0);
}
