use nf_core::fourier::{l1, Fourier};
use nf_core::norms::majorant_norms_at;
use nf_core::random::{random_fourier, random_series, RandSpec};
use nf_core::serial::{from_text, to_text};
use nf_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn modes() -> Arc<ModeSystem> {
    Arc::new(ModeSystem::new(vec![1, 2], 6).unwrap())
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn spec() -> RandSpec {
    RandSpec { k_max: 3, deg_max: 4, terms: 50, sites: vec![-4, -3, 3, 4, 5], real: false }
}

#[test]
fn mode_system_invariants() {
    let m = ModeSystem::new(vec![1, -3], 5).unwrap();
    assert_eq!(m.normal_sites(), &[-5, -4, -2, -1, 2, 3, 4, 5]);
    assert!(ModeSystem::new(vec![1, 1], 5).is_err());
    assert!(ModeSystem::new(vec![0], 5).is_err());
    assert!(ModeSystem::new(vec![7], 5).is_err());
}

#[test]
fn momentum_examples() {
    let m = ModeSystem::new(vec![1], 4).unwrap();
    let t = TermIndex::new(&[0], &[0], &[(2, 1)], &[(2, 1)]);
    assert_eq!(momentum(&t, &m).unwrap(), 0);
    let t = TermIndex::new(&[1], &[0], &[], &[]);
    assert_eq!(momentum(&t, &m).unwrap(), 1);
    assert!(momentum(&TermIndex::new(&[0], &[0], &[(1, 1)], &[]), &m).is_err());
    assert!(momentum(&TermIndex::new(&[0], &[0], &[(9, 1)], &[]), &m).is_err());
}

#[test]
fn quartic_selection_rule_gives_zero_momentum() {
    // q_i qbar_j q_k qbar_l with the tangent site 1 realised as e^{+-ix}
    let m = ModeSystem::new(vec![1], 5).unwrap();
    let sites: Vec<i32> = (-5..=5).filter(|j| *j != 0).collect();
    let mut checked = 0;
    for &i in &sites {
        for &j in &sites {
            for &k in &sites {
                let l = i - j + k;
                if l == 0 || l.abs() > 5 {
                    continue;
                }
                let mut kv = 0;
                let mut mu = vec![];
                let mut gamma = vec![];
                for (s, conj) in [(i, false), (j, true), (k, false), (l, true)] {
                    if s == 1 {
                        kv += if conj { -1 } else { 1 };
                    } else if conj {
                        gamma.push((s, 1));
                    } else {
                        mu.push((s, 1));
                    }
                }
                let t = TermIndex::new(&[kv], &[0], &mu, &gamma);
                assert_eq!(momentum(&t, &m).unwrap(), 0, "{i} {j} {k} {l}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn momentum_partition_reassembles() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = modes();
    let h = random_series(&mut rng, &m, 6, 6, &spec());
    let bound = h.max_momentum();
    let mut sum = h.empty_like();
    for b in -bound..=bound {
        let part = h.filter_momentum_class(b);
        assert!(part.iter().all(|(t, _)| h.momentum_of(t) == b));
        for (t, v) in part.iter() {
            sum.add_term(t.clone(), *v);
        }
    }
    assert_eq!(sum.terms(), h.terms());
    let z2 = HamSeries::from_terms(m, 4, 4, false, [(TermIndex::new(&[0, 0], &[0, 0], &[(3, 1)], &[]), c(1.0))]).unwrap();
    assert!(z2.filter_momentum_class(0).is_empty());
    assert_eq!(z2.filter_momentum_class(3), z2);
}

#[test]
fn gamma_truncate_examples() {
    let m = modes();
    let h = HamSeries::from_terms(m.clone(), 4, 4, false, [(TermIndex::new(&[3, 0], &[0, 0], &[], &[]), c(1.0))]).unwrap();
    assert!(h.gamma_truncate(2).is_empty());
    assert_eq!(h.gamma_truncate(4), h);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let h = random_series(&mut rng, &m, 6, 6, &spec());
        let once = h.gamma_truncate(2);
        assert_eq!(once.gamma_truncate(2), once);
        // tail bound |||(1 - Gamma_K) H|||_s <= e^{-K sigma} |||H|||_{s + sigma}
        let (s, sigma, r) = (0.3, 0.2, 0.5);
        for k in 0..4u32 {
            let tail = h.filter(|t| t.k_l1() > k);
            let lhs = majorant_norms_at(&tail, s, r).unwrap().0;
            let rhs = (-(k as f64) * sigma).exp() * majorant_norms_at(&h, s + sigma, r).unwrap().0;
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }
}

#[test]
fn split_and_mean_reassemble() {
    let m = modes();
    let y1 = HamSeries::from_terms(m.clone(), 4, 4, false, [(TermIndex::new(&[0, 0], &[1, 0], &[], &[]), c(1.0))]).unwrap();
    let (lo, hi) = y1.split_low_high();
    assert_eq!(lo, y1);
    assert!(hi.is_empty());
    let y1z = HamSeries::from_terms(m.clone(), 4, 4, false, [(TermIndex::new(&[0, 0], &[1, 0], &[(3, 1)], &[]), c(1.0))]).unwrap();
    let (lo, hi) = y1z.split_low_high();
    assert!(lo.is_empty());
    assert_eq!(hi, y1z);

    let h = HamSeries::from_terms(
        m.clone(),
        4,
        4,
        true,
        [
            (TermIndex::zero(2), c(3.0)),
            (TermIndex::new(&[1, 0], &[0, 0], &[], &[]), c(0.5)),
            (TermIndex::new(&[-1, 0], &[0, 0], &[], &[]), c(0.5)),
        ],
    )
    .unwrap();
    let mean = h.x_mean();
    assert_eq!(mean.len(), 1);
    assert_eq!(mean.get(&TermIndex::zero(2)), c(3.0));
    assert_eq!(mean.x_mean(), mean);
    assert_eq!(mean.add(&h.sub(&mean).unwrap()).unwrap(), h);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let h = random_series(&mut rng, &m, 6, 6, &spec());
        let (lo, hi) = h.split_low_high();
        let mut sum = lo.clone();
        for (t, v) in hi.iter() {
            sum.add_term(t.clone(), *v);
        }
        assert_eq!(sum.terms(), h.terms());
    }
}

#[test]
fn norm_coeff_examples() {
    let w = Fourier::single(vec![1, 1], c(1.0));
    assert!((norm_coeff(&w, 0.5).unwrap() - 1f64.exp()).abs() < 1e-15);
    assert_eq!(norm_coeff(&Fourier::constant(2, C64::new(3.0, 4.0)), 0.7).unwrap(), 5.0);
    assert!(norm_coeff(&Fourier::single(vec![400], c(1.0)), 2.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let f = random_fourier(&mut rng, 2, 6, 10, false);
        let mut prev = 0.0;
        for s in [0.0, 0.1, 0.3, 0.7] {
            let v = norm_coeff(&f, s).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}

#[test]
fn majorant_examples() {
    let m = Arc::new(ModeSystem::new(vec![1], 6).unwrap());
    let h = HamSeries::from_terms(m.clone(), 2, 4, true, [(TermIndex::new(&[0], &[0], &[(5, 1)], &[(5, 1)]), c(2.0))]).unwrap();
    let (a, b) = majorant_norms(&h, &DomainSpec::new(0.5, 0.5, 2.0).unwrap()).unwrap();
    assert!((a - 0.5).abs() < 1e-15);
    assert!((b - 2.5).abs() < 1e-15);
    let y = HamSeries::from_terms(m, 2, 4, false, [(TermIndex::new(&[0], &[1], &[], &[]), C64::new(0.0, -3.0))]).unwrap();
    let (a, _) = majorant_norms_at(&y, 0.2, 0.3).unwrap();
    assert!((a - 3.0 * 0.09).abs() < 1e-15);
}

#[test]
fn cauchy_estimate_on_single_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = 0.6;
    for _ in 0..200 {
        let w = random_fourier(&mut rng, 2, 12, 1, false);
        for sigma in [0.1 * s, 0.5 * s] {
            // |d_x| taken as the l1 sum of the partials
            let dw = w.map(|k, v| v * l1(k) as f64);
            let lhs = dw.norm(s - sigma).unwrap();
            let rhs = w.norm(s).unwrap() / (std::f64::consts::E * sigma);
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}

#[test]
fn evaluate_examples_and_reality() {
    let m = modes();
    let one = HamSeries::from_terms(m.clone(), 2, 4, true, [(TermIndex::zero(2), c(1.0))]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let zs: Vec<C64> = (0..m.normal_sites().len()).map(|_| C64::new(0.01, -0.02)).collect();
    let w = PhasePoint::real(&m, &[0.3, 1.1], &[0.3, 0.0], &zs);
    assert_eq!(evaluate(&one, &w), c(1.0));
    let y1 = HamSeries::from_terms(m.clone(), 2, 4, true, [(TermIndex::new(&[0, 0], &[1, 0], &[], &[]), c(1.0))]).unwrap();
    assert!((evaluate(&y1, &w) - 0.3).norm() < 1e-16);

    let mut sp = spec();
    sp.real = true;
    let h = random_series(&mut rng, &m, 6, 6, &sp);
    assert_eq!(h.reality_defect(), 0.0);
    use rand::Rng;
    for _ in 0..100 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..6.3)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let z: Vec<C64> = (0..m.normal_sites().len()).map(|_| C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect();
        let v = evaluate(&h, &PhasePoint::real(&m, &x, &y, &z));
        assert!(v.im.abs() <= 1e-12 * v.norm().max(1e-300));
    }
}

#[test]
fn reality_closure_of_sum_and_product() {
    let m = modes();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sp = spec();
    sp.real = true;
    sp.deg_max = 3;
    for _ in 0..20 {
        let a = random_series(&mut rng, &m, 6, 6, &sp);
        let b = random_series(&mut rng, &m, 6, 6, &sp);
        let s = a.add(&b).unwrap();
        let p = a.mul(&b).unwrap();
        assert!(s.is_real() && p.is_real());
        assert!(s.reality_defect() == 0.0 && p.reality_defect() == 0.0);
        // symmetrisation only removes roundoff
        let raw = a.mul(&b.scale(C64::new(1.0, 1e-300))).unwrap();
        assert!(p.max_diff(&raw) <= 1e-13 * p.max_abs());
    }
}

#[test]
fn product_degree_grading() {
    let m = modes();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (h1, h2) in [(1u32, 2u32), (2, 2), (3, 1)] {
        let a = random_series(&mut rng, &m, 8, 12, &spec()).degree_part(h1);
        let b = random_series(&mut rng, &m, 8, 12, &spec()).degree_part(h2);
        let p = a.mul(&b).unwrap();
        assert!(p.iter().all(|(t, _)| t.degree() == h1 + h2));
    }
}

#[test]
fn serialization_round_trip_is_bit_exact() {
    let m = modes();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for real in [false, true] {
        let mut sp = spec();
        sp.real = real;
        let h = random_series(&mut rng, &m, 6, 6, &sp);
        let text = to_text(&h);
        let back = from_text(&text).unwrap();
        assert_eq!(back, h);
        for ((t1, c1), (t2, c2)) in back.iter().zip(h.iter()) {
            assert_eq!(t1, t2);
            assert_eq!(c1.re.to_bits(), c2.re.to_bits());
            assert_eq!(c1.im.to_bits(), c2.im.to_bits());
        }
        assert_eq!(to_text(&back), text);
    }
    assert!(from_text("nonsense").is_err());
    assert!(from_text("hamseries v1\nmodes tangent=1 jmax=3\ncutoffs K=1 D=2 real=0\n0|0|mu(1:1)|gamma()|1,0\n").is_err());
}
