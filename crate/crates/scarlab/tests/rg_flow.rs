use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scarlab::lattice::{boltzmann_weight, PlaquetteWeight};
use scarlab::rg::*;
use scarlab::rqc::ChannelParams;
use scarlab::variational::{meanfield_optimize, MeanFieldOptions};

fn random_weight(rng: &mut ChaCha8Rng) -> PlaquetteWeight {
    PlaquetteWeight { w: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) }
}

#[test]
fn contraction_matches_exhaustive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let w = random_weight(&mut rng);
        let rule = if k % 5 == 4 { BlockRule::Decimation } else { BlockRule::Majority };
        let fast = block_sum(&w, rule);
        let slow = block_sum_brute(&w, rule);
        let scale = slow.max_abs();
        for i in 0..16 {
            assert!((fast.w[i] - slow.w[i]).abs() <= 1e-10 * scale, "weight {k} entry {i}: {} vs {}", fast.w[i], slow.w[i]);
        }
    }
}

#[test]
fn qmbs_fixed_point_is_quadratically_stable() {
    let star = qmbs_fixed_point();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = random_weight(&mut rng);
    let dev = |d: f64| {
        let w = PlaquetteWeight { w: std::array::from_fn(|i| star.w[i] + d * dir.w[i]) };
        block_spin_step(&w).unwrap().distance(&star)
    };
    let (d1, d2) = (dev(1e-3), dev(5e-4));
    let exponent = (d1 / d2).log2();
    assert!((1.8..=2.2).contains(&exponent), "exponent {exponent}");
}

#[test]
fn large_c_flows_to_qmbs() {
    let f = rg_flow(&ChannelParams::new(0.0, 0.9, 0.5).unwrap(), 5).unwrap();
    assert_eq!(f.classification.phase, RgPhase::Qmbs);
    assert!(f.classification.down_component > 0.99);
    assert_eq!(f.state.rescale_log.len(), 5);
}

#[test]
fn small_c_flows_to_thermal() {
    let f = rg_flow(&ChannelParams::new(0.9, 0.02, 0.5).unwrap(), 5).unwrap();
    assert_eq!(f.classification.phase, RgPhase::Thermal);
    let w = &f.state.weight;
    assert_eq!(w.w[THERMAL_INDEX], 1.0);
    assert!(f.classification.slow_components.is_some());
}

#[test]
fn single_point_diagram() {
    let rows = rg_phase_diagram(&[(0.1, 0.5)], &RgOptions::default()).unwrap();
    assert_eq!(rows.len(), 1);
}

fn boundary_in_c<F: Fn(f64) -> bool>(a: f64, is_scar: F) -> f64 {
    let hi_max = 1.0 - a;
    let (mut lo, mut hi) = (0.0, hi_max);
    assert!(is_scar(hi) && !is_scar(lo), "no bracket at a={a}");
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if is_scar(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn boundary_agrees_with_mean_field() {
    for a in [0.1, 0.2, 0.3] {
        let rg = boundary_in_c(a, |c| rg_point(a, c, &RgOptions::default()).unwrap().down_component > 0.5);
        let mf = boundary_in_c(a, |c| {
            let w = boltzmann_weight(&ChannelParams::new(a, c, 0.5).unwrap());
            meanfield_optimize(&w, &MeanFieldOptions::default()).unwrap().magnetization > 0.3
        });
        assert!((rg - mf).abs() < 0.1, "a={a}: rg {rg} mf {mf}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn classification_is_scale_invariant(a in 0.0..0.95f64, frac in 0.0..1.0f64, s in 0.01..100.0f64) {
        let c = frac * (1.0 - a);
        let w = boltzmann_weight(&ChannelParams::new(a, c, 0.5).unwrap());
        let th = ClassifyThresholds::default();
        let f1 = rg_flow_weight(&w, 5, BlockRule::Majority, &th).unwrap();
        let f2 = rg_flow_weight(&w.scaled(s), 5, BlockRule::Majority, &th).unwrap();
        prop_assert_eq!(f1.classification.phase, f2.classification.phase);
    }

    #[test]
    fn rescaled_max_is_one(a in 0.0..0.95f64, frac in 0.0..1.0f64) {
        let c = frac * (1.0 - a);
        let w = boltzmann_weight(&ChannelParams::new(a, c, 0.5).unwrap());
        let next = block_spin_step(&w).unwrap();
        prop_assert!((next.max_abs() - 1.0).abs() < 1e-15);
    }
}
