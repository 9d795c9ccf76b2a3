use nf_core::solve::DioParams;
use nf_core::{PhasePoint, C64};
use nf_dnls::{to_lattice, DnlsConfig};
use nf_engine::{KamOptions, KamSchedule};
use nf_lab::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn toy(jmax: i32, eps: f64) -> DnlsConfig {
    let mut cfg = DnlsConfig::new(vec![1, 2], jmax, eps).unwrap().with_seeded_xi(7);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let ratio = 1.0 + 1.0 / (1.0 + 1.0 / (8.0 + 1.0 / phi));
    cfg.set_xi(2, ratio * cfg.lambda(1) - 4.0).unwrap();
    cfg
}

fn pipeline_config(eps: f64) -> PipelineConfig {
    PipelineConfig {
        dnls: toy(8, eps),
        k_cut: 6,
        d_cut: 4,
        kam_steps: 2,
        schedule: KamSchedule::new(0.1, 1e-3, 0.5, 3.0).unwrap(),
        dio: DioParams::new(0.1, 0.1, 3.0, 6).unwrap(),
        kam_options: KamOptions::default(),
        birkhoff: None,
        rk4_steps: 4,
    }
}

fn small() -> &'static (Pipeline, Torus) {
    static CELL: OnceLock<(Pipeline, Torus)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = build_pipeline(&pipeline_config(1e-3)).unwrap();
        let t = Torus::build(&p.kam_chain(), &p.config.dnls.zeta, 16, 1e-3).unwrap();
        (p, t)
    })
}

#[test]
fn chain_round_trip() {
    let (p, _) = small();
    let chain = p.kam_chain();
    assert!(!chain.generators.is_empty());
    let m = &chain.modes;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..6.28)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let z: Vec<C64> = m.normal_sites().iter().map(|_| C64::new(rng.gen_range(-1e-3..1e-3), rng.gen_range(-1e-3..1e-3))).collect();
        let w = PhasePoint::real(m, &x, &y, &z);
        let back = chain.to_normal(&chain.to_original(&w));
        let err = w.x.iter().zip(&back.x).chain(w.y.iter().zip(&back.y)).chain(w.z.iter().zip(&back.z)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "round trip error {err}");
    }
}

#[test]
fn points_on_the_torus_have_zero_distance() {
    let (_, torus) = small();
    for x in [[0.0, 0.0], [0.37, 2.1], [5.9, 4.4]] {
        let d = torus_distance(&torus.point(&x), torus, 1.0);
        assert!(d < 1e-8, "distance {d} at {x:?}");
    }
}

#[test]
fn displaced_point_is_at_the_displacement() {
    let (_, torus) = small();
    let w = 1.0;
    for (j, delta) in [(5, 0.03), (-3, 0.01)] {
        let mut s = torus.point(&[1.2, 0.4]);
        s.set(j, s.get(j) + C64::new(delta * (j.abs() as f64).powf(-w), 0.0));
        let d = torus_distance(&s, torus, w);
        assert!((d / delta - 1.0).abs() < 1e-3, "site {j}: {d} vs {delta}");
    }
}

#[test]
fn distance_shrinks_with_the_amplitude() {
    let (_, torus) = small();
    let mut last = f64::INFINITY;
    for a in [0.08, 0.04, 0.02, 0.01, 0.005] {
        let mut s = torus.point(&[2.0, 3.0]);
        s.set(4, s.get(4) + C64::new(a, a));
        s.set(-1, s.get(-1) + C64::new(0.0, a));
        let d = torus_distance(&s, torus, 1.0);
        assert!(d < last);
        last = d;
    }
}

#[test]
fn linear_flow_is_stable_with_flat_distance() {
    let p = build_pipeline(&pipeline_config(0.0)).unwrap();
    let sc = StabilityConfig { delta: 0.05, samples: 20, ..StabilityConfig::default() };
    let r = stability_experiment(&p, &sc).unwrap();
    assert_eq!(r.verdict, "stable (linear)");
    let lo = r.rows.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
    let hi = r.rows.iter().map(|r| r.distance).fold(0.0, f64::max);
    assert!(hi - lo < 1e-9, "distance varies by {}", hi - lo);
    assert!((r.d0 / (0.9 * 0.05) - 1.0).abs() < 1e-3);
    assert!(r.max_energy_drift < 1e-12);
}

#[test]
fn initial_distance_hits_its_target_and_run_reports() {
    let (p, _) = small();
    let sc = StabilityConfig { delta: 0.02, samples: 10, ..StabilityConfig::default() };
    let r = stability_experiment(p, &sc).unwrap();
    assert!((r.d0 / (0.9 * 0.02) - 1.0).abs() < 1e-3, "d0 {}", r.d0);
    assert!(r.rows.iter().any(|row| row.t < 0.0) && r.rows.iter().any(|row| row.t > 0.0));
    assert!((r.horizon - 0.02f64.powf(-0.5)).abs() < 1e-12);
    assert!(r.sup_distance >= r.d0);
}

#[test]
fn doubling_delta_never_lowers_the_peak_distance() {
    let (p, _) = small();
    for seed in 0..3 {
        let run = |delta: f64| {
            // m = 0 keeps the same unit horizon for both amplitudes
            let sc = StabilityConfig { delta, seed, m: 0, samples: 10, ..StabilityConfig::default() };
            stability_experiment(p, &sc).unwrap().sup_distance
        };
        let (a, b) = (run(0.01), run(0.02));
        assert!(b >= a, "seed {seed}: {b} < {a}");
    }
}

#[test]
fn lattice_image_of_the_reference_point() {
    let (p, torus) = small();
    let m = &p.model.modes;
    let w = PhasePoint::real(m, &[0.5, 0.25], &[0.0, 0.0], &vec![C64::new(0.0, 0.0); m.normal_sites().len()]);
    let direct = to_lattice(&p.kam_chain().to_original(&w), m, &p.config.dnls.zeta);
    assert!(direct.distance(&torus.point(&[0.5, 0.25]), 1.0) < 1e-9);
}
