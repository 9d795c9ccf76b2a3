use nf_core::{evaluate, momentum, PhasePoint, TermIndex, C64};
use nf_dnls::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_state(rng: &mut ChaCha8Rng, cfg: &DnlsConfig, normal_amp: f64) -> LatticeState {
    let mut s = LatticeState::zeros(cfg.jmax);
    for j in -cfg.jmax..=cfg.jmax {
        if j == 0 {
            continue;
        }
        let amp = if let Some(i) = cfg.tangent.iter().position(|t| *t == j) {
            (j.abs() as f64 * cfg.zeta[i]).sqrt()
        } else {
            normal_amp / (j.abs() as f64)
        };
        s.set(j, C64::from_polar(amp, rng.gen_range(0.0..2.0 * PI)));
    }
    s
}

/// `(eps/8pi) sum_{a-b+c-d=0} q_a qbar_b q_c qbar_d`, summed directly.
fn brute_quartic(s: &LatticeState, eps: f64) -> f64 {
    let j = s.jmax;
    let mut acc = C64::new(0.0, 0.0);
    for a in -j..=j {
        for b in -j..=j {
            for c in -j..=j {
                let d = a - b + c;
                if [a, b, c, d].contains(&0) || d.abs() > j {
                    continue;
                }
                acc += s.get(a) * s.get(b).conj() * s.get(c) * s.get(d).conj();
            }
        }
    }
    eps / (8.0 * PI) * acc.re
}

#[test]
fn linear_model_has_the_stated_frequencies() {
    let cfg = DnlsConfig::new(vec![1], 6, 0.0).unwrap();
    let m = build_hamiltonian(&cfg, 8, 4).unwrap();
    assert!(m.perturbation.is_empty());
    assert_eq!(m.normal_form.omega, vec![2.5]);
    for j in m.modes.normal_sites() {
        assert_eq!(m.normal_form.mean(*j), (j * j) as f64 + 1.5 / j.abs() as f64);
    }
}

#[test]
fn quartic_multiplicities() {
    let eps = 1e-3;
    let cfg = DnlsConfig::new(vec![1], 6, eps).unwrap();
    let m = build_hamiltonian(&cfg, 8, 4).unwrap();
    let base = eps / (8.0 * PI);
    // z_3^2 zbar_4 zbar_2: one ordering of (a,c), two of (b,d)
    let t = TermIndex::new(&[0], &[0], &[(3, 2)], &[(2, 1), (4, 1)]);
    assert!((m.perturbation.get(&t).re - 2.0 * base).abs() < 1e-18);
    // |z_3|^2 |z_4|^2: two and two
    let t = TermIndex::new(&[0], &[0], &[(3, 1), (4, 1)], &[(3, 1), (4, 1)]);
    assert!((m.perturbation.get(&t).re - 4.0 * base).abs() < 1e-18);
    // |z_5|^4: a single ordering
    let t = TermIndex::new(&[0], &[0], &[(5, 2)], &[(5, 2)]);
    assert!((m.perturbation.get(&t).re - base).abs() < 1e-18);
    // |q_1|^4 -> (zeta + y)^2: constant, linear and quadratic parts
    let z = cfg.zeta[0];
    assert!((m.perturbation.get(&TermIndex::new(&[0], &[0], &[], &[])).re - base * z * z).abs() < 1e-16);
    assert!((m.perturbation.get(&TermIndex::new(&[0], &[1], &[], &[])).re - base * 2.0 * z).abs() < 1e-16);
    assert!((m.perturbation.get(&TermIndex::new(&[0], &[2], &[], &[])).re - base).abs() < 1e-16);
}

#[test]
fn series_matches_direct_quartic_sum_at_zero_action_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for tangent in [vec![1], vec![1, 2], vec![2, -3]] {
        let cfg = DnlsConfig::new(tangent, 5, 1e-2).unwrap().with_seeded_xi(3);
        let m = build_hamiltonian(&cfg, 8, 4).unwrap();
        for _ in 0..5 {
            let s = random_state(&mut rng, &cfg, 0.3);
            let w = from_lattice(&s, &m.modes, &cfg.zeta);
            assert!(w.y.iter().all(|y| y.norm() < 1e-12));
            let series = evaluate(&m.perturbation, &w);
            let direct = brute_quartic(&s, cfg.eps);
            assert!(series.im.abs() < 1e-15);
            assert!((series.re - direct).abs() <= 1e-13 * direct.abs(), "{} vs {}", series.re, direct);
            let sim = Simulator::new(&cfg, StepControl::default());
            let quad: f64 = s.sites().map(|j| cfg.lambda(j) / j as f64 * s.get(j).norm_sqr()).sum();
            assert!((sim.hamiltonian(&s) - quad - direct).abs() <= 1e-12 * direct.abs());
        }
    }
}

#[test]
fn every_term_has_zero_momentum_and_the_series_is_real() {
    let cfg = DnlsConfig::new(vec![1, 2], 8, 1e-3).unwrap();
    let m = build_hamiltonian(&cfg, 8, 4).unwrap();
    assert!(m.perturbation.is_real());
    assert_eq!(m.perturbation.reality_defect(), 0.0);
    for (t, _) in m.perturbation.iter() {
        assert_eq!(momentum(t, &m.modes).unwrap(), 0, "{t:?}");
    }
    assert!(m.taylor_tail > 0.0);
}

#[test]
fn lattice_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = DnlsConfig::new(vec![1, -2], 6, 1e-3).unwrap();
    let m = build_hamiltonian(&cfg, 8, 4).unwrap();
    let s = random_state(&mut rng, &cfg, 0.1);
    let back = to_lattice(&from_lattice(&s, &m.modes, &cfg.zeta), &m.modes, &cfg.zeta);
    assert!(back.distance(&s, 0.0) < 1e-13);
    let w = PhasePoint::zero(&m.modes);
    assert!((to_lattice(&w, &m.modes, &cfg.zeta).get(1).norm() - 1.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn linear_flow_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = DnlsConfig::new(vec![1, 2], 8, 0.0).unwrap().with_seeded_xi(2);
    let s0 = random_state(&mut rng, &cfg, 0.2);
    let mut s = s0.clone();
    let mut sim = Simulator::new(&cfg, StepControl::default());
    sim.integrate(&mut s, 10.0, 0, |_| {}).unwrap();
    for j in s.sites() {
        assert!((s.get(j).norm() - s0.get(j).norm()).abs() < 1e-13, "amp {j} {:e}", (s.get(j).norm() - s0.get(j).norm()).abs());
        let expect = s0.get(j) * C64::from_polar(1.0, cfg.lambda(j) * 10.0);
        assert!((s.get(j) - expect).norm() < 1e-11, "site {j}: {:e}", (s.get(j) - expect).norm());
    }
}

#[test]
fn reversal_conservation_and_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = DnlsConfig::new(vec![1, 2], 10, 1e-2).unwrap().with_seeded_xi(4);
    let s0 = random_state(&mut rng, &cfg, 0.2);
    let mut sim = Simulator::new(&cfg, StepControl::default());
    let mut s = s0.clone();
    let (p0, c0) = (s0.momentum(), s0.charge());
    let mut worst: f64 = 0.0;
    sim.integrate(&mut s, 20.0, 10, |st| {
        worst = worst.max((st.momentum() - p0).abs() / p0).max((st.charge() - c0).abs() / c0.abs());
    })
    .unwrap();
    assert!(worst <= 1e-8, "invariant drift {worst:e}");
    let fwd = s.clone();
    sim.integrate(&mut s, 0.0, 0, |_| {}).unwrap();
    assert!(s.distance(&s0, 0.0) <= 1e-9, "reversal error {:e}", s.distance(&s0, 0.0));

    let mut shifted = s0.translate(0.7);
    sim.integrate(&mut shifted, 20.0, 0, |_| {}).unwrap();
    assert!(shifted.distance(&fwd.translate(0.7), 0.0) <= 1e-10);
}

#[test]
fn splitting_is_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = DnlsConfig::new(vec![1, 2], 6, 0.5).unwrap();
    let s0 = random_state(&mut rng, &cfg, 0.5);
    let run = |dt: f64| {
        let mut sim = Simulator::new(&cfg, StepControl { dt, reject_tol: 1.0, ..Default::default() });
        let mut s = s0.clone();
        sim.integrate(&mut s, 1.0, 0, |_| {}).unwrap();
        s
    };
    let a = run(0.02);
    let b = run(0.01);
    let c = run(0.005);
    let slope = (a.distance(&b, 0.0) / b.distance(&c, 0.0)).log2();
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
    #[test]
    fn energy_is_invariant_under_translation_and_gauge(seed in 0u64..10_000, c in -3.0f64..3.0, theta in 0.0f64..6.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = DnlsConfig::new(vec![1, 2], 6, 0.3).unwrap().with_seeded_xi(seed);
        let s = random_state(&mut rng, &cfg, 0.3);
        let sim = Simulator::new(&cfg, StepControl::default());
        let h = sim.hamiltonian(&s);
        let mut g = s.clone();
        for j in s.sites() {
            g.set(j, s.get(j) * C64::from_polar(1.0, theta));
        }
        proptest::prop_assert!((sim.hamiltonian(&s.translate(c)) - h).abs() <= 1e-12 * h.abs().max(1.0));
        proptest::prop_assert!((sim.hamiltonian(&g) - h).abs() <= 1e-12 * h.abs().max(1.0));
        let m = build_hamiltonian(&cfg, 4, 4).unwrap();
        let back = to_lattice(&from_lattice(&s, &m.modes, &cfg.zeta), &m.modes, &cfg.zeta);
        proptest::prop_assert!(back.distance(&s, 0.0) < 1e-12);
    }
}
