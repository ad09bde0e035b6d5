use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scarlab::eft::*;

/// Σ_i (D¹_i + D²_i + D³_i)/q on a ring, with each site's Θ_i from its own θ_i.
fn ring_energy(p: &EftParams, th: &[f64], ph: &[f64]) -> f64 {
    let (r, k, j2, v2) = (p.r, p.kappa, p.j * p.j, p.v * p.v);
    let big: Vec<f64> = th.iter().map(|&t| ((2.0 * k + 1.0) / (1.0 - r) - r / (1.0 - r) * t.cosh()).acosh()).collect();
    let l = th.len();
    let kk = r * r * (1.0 - r) * (1.0 - r);
    let mut e = 0.0;
    for i in 0..l {
        let n = (i + 1) % l;
        let (si, sj, ci, cj) = (th[i].sinh(), th[n].sinh(), th[i].cosh(), th[n].cosh());
        let (bsi, bsj, bci, bcj) = (big[i].sinh(), big[n].sinh(), big[i].cosh(), big[n].cosh());
        let z = r * (Complex64::from_polar(1.0, ph[i]) * si * bsj + Complex64::from_polar(1.0, ph[n]) * bsi * sj) + (1.0 - r) * bsi * bsj;
        let d1 = j2 / 8.0 * (1.0 - r).powi(2) * z.norm_sqr()
            - j2 / 8.0 * (4.0 * k * k - r * r * (ci - 1.0) * (cj - 1.0)) * (4.0 * (1.0 + k).powi(2) - r * r * (ci + 1.0) * (cj + 1.0));
        let cross = si * sj * bsi * bsj;
        let d2 = v2 / 8.0 * kk * (Complex64::from_polar(cross, -(ph[i] + ph[n])) - (ci + 1.0) * (cj + 1.0) * (bci - 1.0) * (bcj - 1.0));
        let d3 = v2 / 8.0 * kk * (Complex64::from_polar(cross, ph[i] + ph[n]) - (ci - 1.0) * (cj - 1.0) * (bci + 1.0) * (bcj + 1.0));
        e += d1 + (d2 + d3).re;
    }
    e
}

struct Fd {
    t_theta: f64,
    m_theta: f64,
    t_phi: f64,
    m_phi: f64,
}

fn fd_coeffs(p: &EftParams, theta: f64) -> Fd {
    let l = 6;
    let mixed = |on_theta: bool, i: usize, j: usize, h: f64| {
        let f = |a: f64, b: f64| {
            let mut th = vec![theta; l];
            let mut ph = vec![0.0; l];
            let v = if on_theta { &mut th } else { &mut ph };
            v[i] += a;
            v[j] += b;
            ring_energy(p, &th, &ph)
        };
        (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h)
    };
    let rich = |on_theta: bool, i: usize, j: usize| {
        let h = 2e-3;
        let a = mixed(on_theta, i, j, h);
        let b = mixed(on_theta, i, j, h / 2.0);
        (4.0 * b - a) / 3.0
    };
    Fd { m_theta: -rich(true, 0, 0) / 2.0, t_theta: -rich(true, 0, 1), m_phi: -rich(false, 0, 0) / 2.0, t_phi: -rich(false, 0, 1) }
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale
}

#[test]
fn coefficients_match_finite_difference_hessian() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 0..10 {
        let kappa = rng.gen_range(0.5..1.5);
        let r = rng.gen_range(0.05..0.6);
        let tmax = u_max(kappa, r).acosh();
        let theta = rng.gen_range(0.15..0.85) * tmax;
        let p = EftParams::new(rng.gen_range(0.3..1.5), rng.gen_range(0.0..1.5), 0.0, kappa, r).unwrap();
        let c = spin_wave_coeffs(&p, theta).unwrap();
        let f = fd_coeffs(&p, theta);
        let scale = c.t_theta.abs().max(c.m_theta.abs()).max(c.t_phi.abs()).max(c.m_phi.abs());
        assert!(close(c.t_theta, f.t_theta, scale, 1e-6), "#{n} t_theta {} vs {}", c.t_theta, f.t_theta);
        assert!(close(c.m_theta, f.m_theta, scale, 1e-6), "#{n} m_theta {} vs {}", c.m_theta, f.m_theta);
        assert!(close(c.t_phi, f.t_phi, scale, 1e-6), "#{n} t_phi {} vs {}", c.t_phi, f.t_phi);
        assert!(close(c.m_phi, f.m_phi, scale, 1e-6), "#{n} m_phi {} vs {}", c.m_phi, f.m_phi);
    }
}

#[test]
fn printed_theta_mass_misses_hessian_when_v_nonzero() {
    let p = EftParams::new(0.0, 1.0, 0.0, 1.0, 0.1).unwrap();
    let printed = spin_wave_coeffs_with(&p, 2.0, MassVariant::Printed).unwrap();
    let f = fd_coeffs(&p, 2.0);
    assert!((printed.m_theta - f.m_theta).abs() > 1e-3 * f.m_theta.abs());
}

#[test]
fn homogeneous_energy_matches_ring() {
    let p = EftParams::new(1.0, 0.7, 0.0, 1.0, 0.1).unwrap();
    for &(theta, phi) in &[(0.5, 0.0), (1.7, 0.3), (2.5, 2.0)] {
        let cfg = EftConfig::new(theta, phi, 1.0, 0.1).unwrap();
        let ring = ring_energy(&p, &[theta; 4], &[phi; 4]) / 4.0;
        assert!((energy_density(&p, &cfg) - ring).abs() < 1e-10 * ring.abs());
    }
}

#[test]
fn d2_plus_d3_is_twice_real_part() {
    let p = EftParams::new(0.0, 1.3, 0.0, 0.8, 0.3).unwrap();
    let cfg = EftConfig::new(0.9, 0.0, 0.8, 0.3).unwrap();
    let (s, c, bs, bc) = (0.9f64.sinh(), 0.9f64.cosh(), cfg.theta_big.sinh(), cfg.theta_big.cosh());
    let kk = 0.09 * 0.49;
    let d2 = 1.69 / 8.0 * kk * (bs * bs * s * s - (bc - 1.0).powi(2) * (c + 1.0).powi(2));
    let d3 = 1.69 / 8.0 * kk * (bs * bs * s * s - (bc + 1.0).powi(2) * (c - 1.0).powi(2));
    assert!((coupling_energy(&p, &cfg) - (d2 + d3)).abs() < 1e-12 * (d2 + d3).abs().max(1.0));
}

#[test]
fn theta_big_derivatives_match_finite_differences() {
    for &(theta, kappa, r) in &[(0.4, 1.0, 0.1), (1.5, 0.7, 0.3), (2.2, 1.2, 0.05)] {
        let (d1, d2) = theta_big_derivatives(theta, kappa, r).unwrap();
        let h = 1e-4;
        let f = |t: f64| theta_big(t, kappa, r).unwrap();
        let fd1 = (f(theta + h) - f(theta - h)) / (2.0 * h);
        let fd2 = (f(theta + h) - 2.0 * f(theta) + f(theta - h)) / (h * h);
        assert!((d1 - fd1).abs() < 1e-7 * d1.abs());
        assert!((d2 - fd2).abs() < 1e-5 * d2.abs());
    }
}

#[test]
fn boundary_case_at_strong_loss() {
    let p = EftParams::new(1.0, 0.1, 2.0, 1.0, 0.1).unwrap();
    let s = optimize_config(&p, &OptimizeOptions::default()).unwrap();
    assert_eq!(s.case, SaddleCase::Boundary);
    assert!((s.m_z - 1.0).abs() < 1e-12);
    assert!(energy_slope(&p, s.config.theta) > 1e-3);
    let c = spin_wave_coeffs(&p, s.config.theta - 1e-9).unwrap();
    assert!(c.j_theta >= 0.0);
}

#[test]
fn interior_case_at_strong_coupling() {
    let p = EftParams::new(1.0, 2.0, 0.1, 1.0, 0.1).unwrap();
    let s = optimize_config(&p, &OptimizeOptions::default()).unwrap();
    assert_eq!(s.case, SaddleCase::Interior);
    assert!(s.m_z < 0.3);
    assert!(energy_slope(&p, s.config.theta).abs() < 1e-8);
}

#[test]
fn v_zero_column_is_scarred() {
    for g in [0.01, 0.1, 1.0, 3.0] {
        let s = optimize_config(&EftParams::new(1.0, 0.0, g, 1.0, 0.1).unwrap(), &OptimizeOptions::default()).unwrap();
        assert_eq!(s.case, SaddleCase::Boundary, "g={g}");
    }
}

#[test]
fn phase_zero_is_optimal() {
    let p = EftParams::new(1.0, 0.8, 0.4, 1.0, 0.1).unwrap();
    let s = optimize_config(&p, &OptimizeOptions::default()).unwrap();
    assert!(s.phase_gain <= 1e-12);
}

#[test]
fn interior_correction_asymptotics() {
    let c = SpinWaveCoeffs { t_theta: 0.0, m_theta: 1.5, t_phi: 0.0, m_phi: 0.7, j_theta: 0.0, t_j: 0.0, m_j: 0.0, t_v: 0.0, m_v: 0.0 };
    let inp = CorrectionInput { q: 50, s_size: 5, l: 1, t: 30.0, kappa: 1.0, r: 0.1 };
    let got = finite_q_correction(&c, SaddleCase::Interior, &inp).unwrap();
    let m = dispersion(&c, 0.1, 0.0).unwrap();
    let w = m.omega_k.real().unwrap();
    let want = -0.5 * (w * 30.0 + (4.0 * std::f64::consts::PI / 5.0).ln() - 2f64.ln() - (m.m_k * w).ln());
    assert!((got - want).abs() < 1e-9 * want.abs());
}

#[test]
fn boundary_correction_is_log_q_over_q() {
    let p = EftParams::new(1.0, 0.1, 2.0, 1.0, 0.1).unwrap();
    let s = optimize_config(&p, &OptimizeOptions::default()).unwrap();
    let c = spin_wave_coeffs(&p, s.config.theta - 1e-9).unwrap();
    let mut ratios = vec![];
    for q in [1000usize, 10000, 100000] {
        let inp = CorrectionInput { q, s_size: q / 10, l: 4, t: 1.0, kappa: 1.0, r: 0.1 };
        let corr = finite_q_correction(&c, SaddleCase::Boundary, &inp).unwrap();
        let smf = q as f64 * 4.0 * 1.0 * s.energy_density;
        ratios.push((corr / smf).abs() / ((q as f64).ln() / q as f64));
    }
    assert!(ratios.windows(2).all(|w| (w[1] / w[0] - 1.0).abs() < 0.5), "{ratios:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn constraint_is_consistent(kappa in 0.2..3.0f64, r in 0.02..0.9f64, frac in 0.0..1.0f64) {
        let u = 1.0 + frac * (u_max(kappa, r) - 1.0);
        let big = theta_big(u.acosh(), kappa, r).unwrap();
        let g = r / 2.0 * u + (1.0 - r) / 2.0 * big.cosh() - (2.0 * kappa + 1.0) / 2.0;
        prop_assert!(g.abs() < 1e-12 * (1.0 + kappa));
    }

    #[test]
    fn phi_stiffness_positive(kappa in 0.2..3.0f64, r in 0.02..0.9f64, frac in 0.01..0.99f64, j in 0.0..2.0f64, v in 0.0..2.0f64) {
        prop_assume!(j + v > 0.05);
        let theta = (1.0 + frac * (u_max(kappa, r) - 1.0)).acosh();
        let p = EftParams::new(j, v, 0.0, kappa, r).unwrap();
        let c = spin_wave_coeffs(&p, theta).unwrap();
        prop_assert!(c.m_phi > 0.0);
        prop_assert!(c.t_phi < c.m_phi);
        prop_assert!(min_gap(c.t_phi, c.m_phi, 64) > 0.0);
    }

    #[test]
    fn magnetization_in_range(g in 0.0..3.0f64, v in 0.0..3.0f64) {
        let s = optimize_config(&EftParams::new(1.0, v, g, 1.0, 0.1).unwrap(), &OptimizeOptions { grid: 128, ..Default::default() }).unwrap();
        prop_assert!(s.m_z >= -1e-14 && s.m_z <= 1.0 + 1e-12);
    }

    #[test]
    fn omega_even_in_k(k in -3.14..3.14f64, t in -1.0..1.0f64) {
        let c = SpinWaveCoeffs { t_theta: t, m_theta: 2.0, t_phi: 0.3, m_phi: 1.0, j_theta: 0.0, t_j: 0.0, m_j: 0.0, t_v: 0.0, m_v: 0.0 };
        let a = dispersion(&c, 0.1, k).unwrap();
        let b = dispersion(&c, 0.1, -k).unwrap();
        prop_assert_eq!(a, b);
    }
}
