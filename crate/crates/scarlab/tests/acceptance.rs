//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after reporting unless `SCARLAB_ACCEPTANCE_STRICT=1`, in which case any FAIL makes
//! the exit status nonzero.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scarlab::dmrg::dmrg_run;
use scarlab::eft::*;
use scarlab::lattice::{boltzmann_weight, transfer_matrix_dense, transfer_mpo, PlaquetteWeight};
use scarlab::linalg::{self, c, CVector};
use scarlab::rg::*;
use scarlab::rqc::{steady_state_exact, uniform_product, ChannelParams, DOWN, UP};
use scarlab::spin::*;
use scarlab::variational::{phase_point, triangle_grid, DiagramOptions, Method};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = f();
    let el = t.elapsed();
    let pass = out.pass && limit.map_or(true, |l| el <= l);
    let status = if pass { "PASS" } else { "FAIL" };
    let lim = limit.map_or("none".to_string(), |l| format!("{}s", l.as_secs()));
    println!("{status} [{id:2}] {name}: {} ({:.1}s, limit {lim})", out.detail, el.as_secs_f64());
    pass
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn weight(a: f64, cc: f64) -> PlaquetteWeight {
    boltzmann_weight(&ChannelParams::new(a, cc, 0.5).unwrap())
}

fn c1_solvable_limits() -> Outcome {
    let l = 6;
    let mut worst_overlap: f64 = 1.0;
    let mut worst_eig: f64 = 0.0;
    for (a, cc, label) in [(0.7, 0.3, DOWN), (0.7, 0.0, UP)] {
        let p = ChannelParams::new(a, cc, 0.5).unwrap();
        let s = steady_state_exact(&p, l, 1e-13).unwrap();
        let target = uniform_product(l, label);
        let ov = target.dotc(&s.pair.vector).norm_sqr() / s.pair.vector.norm_squared();
        worst_overlap = worst_overlap.min(ov);
        worst_eig = worst_eig.max((s.pair.value - c(1.0, 0.0)).norm());
    }
    Outcome {
        pass: worst_overlap >= 1.0 - 1e-10 && worst_eig <= 1e-10,
        detail: format!("min overlap 1 - {:.2e}, max |λ - 1| = {:.2e}", 1.0 - worst_overlap, worst_eig),
    }
}

fn sigma_max_sq(w: &PlaquetteWeight, l: usize) -> f64 {
    let u: DMatrix<f64> = transfer_matrix_dense(w, l).unwrap().dense().unwrap();
    (u.transpose() * &u).symmetric_eigen().eigenvalues.max()
}

fn c2_variational_chain() -> Outcome {
    let l = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut ok = true;
    let mut worst_rel: f64 = 0.0;
    for _ in 0..5 {
        let a = rng.gen_range(0.0..1.0);
        let cc = rng.gen_range(0.0..(1.0 - a));
        let opts = DiagramOptions { l, ..DiagramOptions::default() };
        let mf = phase_point(a, cc, &opts).unwrap().lambda_sq;
        let w = weight(a, cc);
        let dm = dmrg_run(&transfer_mpo(&w, true), l, 16, 20, 1e-12, 3).unwrap().lambda_sq;
        let exact = sigma_max_sq(&w, l);
        let rel = (dm - exact).abs() / exact;
        worst_rel = worst_rel.max(rel);
        ok &= mf <= dm * (1.0 + 1e-12) && dm <= exact * (1.0 + 1e-12) && rel <= 1e-6;
    }
    Outcome { pass: ok, detail: format!("chain ordered on 5 points, max DMRG rel. error {worst_rel:.2e} (tol 1e-6)") }
}

/// Index k such that the largest successive jump in `m` is between k and k+1.
fn jump_index(m: &[f64]) -> Option<usize> {
    (0..m.len().saturating_sub(1)).max_by(|&i, &j| (m[i + 1] - m[i]).abs().total_cmp(&(m[j + 1] - m[j]).abs()))
}

fn c3_concordance() -> Outcome {
    let n = 11;
    let step = 0.1;
    let mf_opts = DiagramOptions::default();
    let dm_opts = DiagramOptions { method: Method::Dmrg, ..DiagramOptions::default() };
    let mut columns = Vec::new();
    let mut jumps = Vec::new();
    for i in 0..n {
        let a = i as f64 * step;
        let cs: Vec<f64> = (0..n).map(|j| j as f64 * step).filter(|&cc| a + cc <= 1.0 + 1e-12).map(|cc| cc.min(1.0 - a)).collect();
        let mf: Vec<f64> = cs.iter().map(|&cc| phase_point(a, cc, &mf_opts).unwrap().magnetization).collect();
        let dm: Vec<f64> = cs.iter().map(|&cc| phase_point(a, cc, &dm_opts).unwrap().magnetization).collect();
        for k in [jump_index(&mf), jump_index(&dm)].into_iter().flatten() {
            jumps.push((a, 0.5 * (cs[k] + cs[k + 1])));
        }
        columns.push((a, cs, mf, dm));
    }
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut excluded = 0;
    for (a, cs, mf, dm) in &columns {
        for (k, &cc) in cs.iter().enumerate() {
            if jumps.iter().any(|&(ja, jc)| (a - ja).abs() <= step + 1e-12 && (cc - jc).abs() <= step + 1e-12) {
                excluded += 1;
                continue;
            }
            compared += 1;
            worst = worst.max((mf[k] - dm[k]).abs());
        }
    }
    Outcome {
        pass: worst <= 0.05,
        detail: format!("max |m_MF - m_DMRG| = {worst:.4} on {compared} points, {excluded} within one cell of a jump excluded (tol 0.05)"),
    }
}

fn c4_rg_fixed_point() -> Outcome {
    let star = qmbs_fixed_point();
    let next = block_spin_step(&star).unwrap();
    let invariant = next.w == star.w;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = PlaquetteWeight { w: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
    let dev = |d: f64| {
        let w = PlaquetteWeight { w: std::array::from_fn(|i| star.w[i] + d * dir.w[i]) };
        block_spin_step(&w).unwrap().distance(&star)
    };
    let exponent = (dev(1e-3) / dev(5e-4)).log2();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = PlaquetteWeight { w: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
        let fast = block_sum(&w, BlockRule::Majority);
        let slow = block_sum_brute(&w, BlockRule::Majority);
        let scale = slow.max_abs();
        for i in 0..16 {
            worst = worst.max((fast.w[i] - slow.w[i]).abs() / scale);
        }
    }
    Outcome {
        pass: invariant && (1.8..=2.2).contains(&exponent) && worst <= 1e-10,
        detail: format!("W* invariant {invariant}, exponent {exponent:.3}, oracle max rel. diff {worst:.2e}"),
    }
}

fn boundary_in_c(a: f64, is_scar: impl Fn(f64) -> bool) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, 1.0 - a);
    if !is_scar(hi) || is_scar(lo) {
        return None;
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if is_scar(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn c5_two_basin_flow() -> Outcome {
    let opts = RgOptions::default();
    let rows = rg_phase_diagram(&triangle_grid(21), &opts).unwrap();
    let undecided = rows.iter().filter(|r| r.phase == RgPhase::Undecided).count();
    let frac = undecided as f64 / rows.len() as f64;
    let large_c = rows.iter().filter(|r| r.c >= 0.8 - 1e-12);
    let large_b = rows.iter().filter(|r| 1.0 - r.a - r.c >= 0.8 - 1e-12);
    let qmbs_ok = large_c.clone().all(|r| r.phase == RgPhase::Qmbs);
    let thermal_ok = large_b.clone().all(|r| r.phase == RgPhase::Thermal);
    let dm_opts = DiagramOptions { method: Method::Dmrg, ..DiagramOptions::default() };
    let mut worst: f64 = 0.0;
    let mut bracketed = true;
    for a in [0.1, 0.2, 0.3] {
        let rg = boundary_in_c(a, |cc| rg_point(a, cc, &opts).unwrap().down_component > 0.5);
        let dm = boundary_in_c(a, |cc| phase_point(a, cc, &dm_opts).unwrap().magnetization > 0.5);
        match (rg, dm) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            _ => bracketed = false,
        }
    }
    Outcome {
        pass: frac <= 0.05 && qmbs_ok && thermal_ok && bracketed && worst <= 0.1,
        detail: format!(
            "undecided {undecided}/{} = {:.1}% (tol 5%), large-c QMBS {qmbs_ok}, large-b thermal {thermal_ok}, max boundary offset vs DMRG {worst:.3} (tol 0.1)",
            rows.len(),
            100.0 * frac
        ),
    }
}

/// Successive jumps above `min_step` along a g scan of one V slice.
fn eft_slice(v: f64) -> (Vec<(f64, f64)>, Vec<SaddleResult>, Vec<f64>) {
    let opts = OptimizeOptions::default();
    let gs: Vec<f64> = (0..=80).map(|i| 2.0 * i as f64 / 80.0).collect();
    let res: Vec<SaddleResult> =
        gs.iter().map(|&g| optimize_config(&EftParams::new(1.0, v, g, 1.0, 0.1).unwrap(), &opts).unwrap()).collect();
    let jumps = (1..res.len())
        .filter(|&i| (res[i].m_z - res[i - 1].m_z).abs() > 0.25)
        .map(|i| (gs[i], res[i].m_z - res[i - 1].m_z))
        .collect();
    (jumps, res, gs)
}

fn c6_eft_transition() -> Outcome {
    let mut details = Vec::new();
    let mut good = 0;
    for v in [0.25, 0.5, 0.75] {
        let (jumps, res, gs) = eft_slice(v);
        let single = jumps.len() == 1 && jumps[0].1.abs() >= 0.5;
        let mut cases_ok = single;
        let mut worst_slope: f64 = 0.0;
        if single {
            let gj = jumps[0].0;
            for (s, &g) in res.iter().zip(&gs) {
                let p = EftParams::new(1.0, v, g, 1.0, 0.1).unwrap();
                if g < gj {
                    let slope = energy_slope(&p, s.config.theta).abs();
                    worst_slope = worst_slope.max(slope);
                    cases_ok &= s.case == SaddleCase::Interior && slope < 1e-8;
                } else {
                    cases_ok &= s.case == SaddleCase::Boundary;
                }
            }
        }
        if cases_ok {
            good += 1;
        }
        details.push(format!("V={v}: jumps {:?}, interior max |dE/dθ| {worst_slope:.1e}", jumps));
    }
    Outcome { pass: good >= 3, detail: format!("{good}/3 slices ok; {}", details.join("; ")) }
}

/// Σ_i (D¹ + D² + D³) on a ring with site-dependent θ_i and φ_i.
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
        let z = r * (Complex64::from_polar(1.0, ph[i]) * si * bsj + Complex64::from_polar(1.0, ph[n]) * bsi * sj)
            + (1.0 - r) * bsi * bsj;
        let d1 = j2 / 8.0 * (1.0 - r).powi(2) * z.norm_sqr()
            - j2 / 8.0
                * (4.0 * k * k - r * r * (ci - 1.0) * (cj - 1.0))
                * (4.0 * (1.0 + k).powi(2) - r * r * (ci + 1.0) * (cj + 1.0));
        let cross = si * sj * bsi * bsj;
        let d2 = v2 / 8.0 * kk * (Complex64::from_polar(cross, -(ph[i] + ph[n])) - (ci + 1.0) * (cj + 1.0) * (bci - 1.0) * (bcj - 1.0));
        let d3 = v2 / 8.0 * kk * (Complex64::from_polar(cross, ph[i] + ph[n]) - (ci - 1.0) * (cj - 1.0) * (bci + 1.0) * (bcj + 1.0));
        e += d1 + (d2 + d3).re;
    }
    e
}

fn fd_coeffs(p: &EftParams, theta: f64) -> [f64; 4] {
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
        (4.0 * mixed(on_theta, i, j, h / 2.0) - mixed(on_theta, i, j, h)) / 3.0
    };
    [-rich(true, 0, 1), -rich(true, 0, 0) / 2.0, -rich(false, 0, 1), -rich(false, 0, 0) / 2.0]
}

fn c7_rpa() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_rel: f64 = 0.0;
    let mut phi_min = f64::INFINITY;
    for _ in 0..10 {
        let kappa = rng.gen_range(0.5..1.5);
        let r = rng.gen_range(0.05..0.6);
        let theta = rng.gen_range(0.15..0.85) * u_max(kappa, r).acosh();
        let p = EftParams::new(rng.gen_range(0.3..1.5), rng.gen_range(0.0..1.5), 0.0, kappa, r).unwrap();
        let cf = spin_wave_coeffs(&p, theta).unwrap();
        let fd = fd_coeffs(&p, theta);
        let ours = [cf.t_theta, cf.m_theta, cf.t_phi, cf.m_phi];
        let scale = ours.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in ours.iter().zip(fd) {
            worst_rel = worst_rel.max((a - b).abs() / scale);
        }
        phi_min = phi_min.min(min_gap(cf.t_phi, cf.m_phi, STABILITY_K_POINTS));
    }
    let mut theta_min = f64::INFINITY;
    let mut thermal = 0;
    for v in [0.25, 0.5, 0.75, 1.0, 2.0] {
        let (_, res, gs) = eft_slice(v);
        for (s, &g) in res.iter().zip(&gs) {
            if s.case != SaddleCase::Interior || s.config.theta <= 0.0 {
                continue;
            }
            let p = EftParams::new(1.0, v, g, 1.0, 0.1).unwrap();
            let cf = spin_wave_coeffs(&p, s.config.theta).unwrap();
            theta_min = theta_min.min(min_gap(cf.t_theta, cf.m_theta, STABILITY_K_POINTS));
            phi_min = phi_min.min(min_gap(cf.t_phi, cf.m_phi, STABILITY_K_POINTS));
            thermal += 1;
        }
    }
    Outcome {
        pass: worst_rel <= 1e-6 && phi_min > 0.0 && theta_min >= -1e-9 && thermal > 0,
        detail: format!(
            "Hessian max rel. diff {worst_rel:.2e} (tol 1e-6), min φ gap {phi_min:.3e}, min θ gap {theta_min:.3e} over {thermal} thermal optima"
        ),
    }
}

fn c8_scar_exactness() -> Outcome {
    let l = 6;
    let o = order_parameter(l);
    let p = SpinOneXYParams { g: 0.37, ..SpinOneXYParams::uniform(l, c(0.0, 0.0), 0.37) };
    let h = build_xy_hamiltonian(&p, Terms::CLEAN).unwrap();
    let mut worst: f64 = 0.0;
    let mut scars = Vec::new();
    for n in 0..=l {
        let s = scar_state(n, l).unwrap();
        worst = worst.max((expectation(&o, &s) - 1.0).abs());
        for i in 0..l {
            worst = worst.max(linalg::LinearOperator::apply(&site_projector(l, i), &s).norm());
        }
        for (a, b) in bonds(l, Boundary::Periodic) {
            worst = worst.max(linalg::LinearOperator::apply(&bond_projector(l, a, b), &s).norm());
        }
        let e = h.expectation(&s);
        worst = worst.max(e.im.abs()).max(linalg::residual(&h, e, &s));
        scars.push(s);
    }
    let basis = orthonormalize(&scars, 1e-10);
    let psi = af_state(l).unwrap();
    let res = span_residual(&basis, &psi);
    let weight = 1.0 - res * res;
    Outcome {
        pass: worst < 1e-10 && weight >= 1.0 - 1e-10,
        detail: format!("max scar defect {worst:.2e}, AF weight in scar span 1 - {:.2e}", 1.0 - weight),
    }
}

/// O in the largest-Im eigenvector of the full dense H (no symmetry blocks).
fn dense_oracle_o(p: &SpinOneXYParams) -> f64 {
    let h = build_xy_hamiltonian(p, Terms::ALL).unwrap();
    let eig = linalg::dense_eigen(&h.dense());
    let k = (0..eig.values.len()).max_by(|&i, &j| eig.values[i].im.total_cmp(&eig.values[j].im)).unwrap();
    let v: CVector = eig.vectors.column(k).into_owned();
    expectation(&order_parameter(p.l), &v)
}

fn c9_system1() -> Outcome {
    let p = SpinOneXYParams::uniform(6, c(1.0, 0.0), 1e-4);
    let small = steady_state(&p, &SteadyOptions::default()).unwrap();
    let oracle = dense_oracle_o(&p);
    let zero = steady_state(&SpinOneXYParams { g: 0.0, ..p.clone() }, &SteadyOptions::default()).unwrap();
    let agree = (small.o_expect - oracle).abs() < 1e-8;
    Outcome {
        pass: small.o_expect >= 0.95 && zero.o_expect <= 0.9 && agree,
        detail: format!(
            "O(g=1e-4) = {:.6} (need >= 0.95; dense oracle {oracle:.6}), O(g=0) = {:.6} over a rank-{} span (need <= 0.9)",
            small.o_expect, zero.o_expect, zero.rank
        ),
    }
}

fn c10_system2() -> Outcome {
    let gs: Vec<f64> = (1..=100).map(|k| 3.0 * k as f64 / 100.0).collect();
    let states: Vec<SteadyState> = gs
        .iter()
        .map(|&g| steady_state(&SpinOneXYParams::uniform(6, c(1.0, 0.1), g), &SteadyOptions::default()).unwrap())
        .collect();
    let diffs: Vec<f64> = states.windows(2).map(|w| w[1].o_expect - w[0].o_expect).collect();
    let spikes: Vec<usize> = (0..diffs.len()).filter(|&i| diffs[i].abs() > 0.3).collect();
    let largest = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let pxy_ok = spikes.len() == 1 && states[spikes[0] + 1..].iter().all(|s| s.pxy_expect <= 0.05);
    Outcome {
        pass: spikes.len() == 1 && pxy_ok,
        detail: format!(
            "g/J in (0, 3]: {} spikes > 0.3 (need exactly 1), largest step {largest:.4}, final P_xy {:.4}",
            spikes.len(),
            states.last().unwrap().pxy_expect
        ),
    }
}

fn c11_trajectories() -> Outcome {
    let p = SpinOneXYParams::uniform(8, c(1.0, 0.0), 0.0);
    let base = TrajectoryOptions { t_final: 10.0, dt: 0.01, n_traj: 30, seed: 2025, ..TrajectoryOptions::default() };
    let second_half = |e: &TrajectoryEnsemble| {
        let h = e.mean_o.len() / 2;
        e.mean_o[h..].iter().sum::<f64>() / (e.mean_o.len() - h) as f64
    };
    let free = trajectory_run(&p, &base, None).unwrap();
    let measured =
        trajectory_run(&p, &TrajectoryOptions { scheme: MeasurementScheme::GateReplacement { p: 0.03 }, ..base }, None).unwrap();
    let gap = second_half(&measured) - second_half(&free);
    let clean = SpinOneXYParams::uniform(8, c(0.0, 0.0), 0.0);
    let e = trajectory_run(&clean, &TrajectoryOptions { n_traj: 1, ..base }, None).unwrap();
    let dev = e.mean_o.iter().fold(0.0f64, |m, o| m.max((1.0 - o).abs()));
    Outcome {
        pass: gap >= 0.2 && dev < 1e-3,
        detail: format!(
            "second-half mean O: p=0.03 {:.4}, p=0 {:.4}, gap {gap:.4} (need >= 0.2); V=0 max |1 - O| {dev:.2e} at dt = 0.01",
            second_half(&measured),
            second_half(&free)
        ),
    }
}

fn c12_deformed_pxp() -> Outcome {
    let rep = deformed_pxp_verify(8).unwrap();
    let full = rep.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let ryd = rep.rows.iter().map(|r| r.ryd_residual).fold(0.0, f64::max);
    let sm = rep.rows.iter().map(|r| r.sm_residual).fold(0.0, f64::max);
    Outcome {
        pass: full < 1e-10 && ryd < 1e-10,
        detail: format!(
            "max residual of H'+V on S~_n {full:.2e}, of H' on P_Ryd S~_n {ryd:.2e} (tol 1e-10); displayed SM form {sm:.2e}"
        ),
    }
}

fn main() {
    println!("acceptance suite");
    let results = [
        run(1, "solvable limits", secs(60), c1_solvable_limits),
        run(2, "variational chain", secs(300), c2_variational_chain),
        run(3, "mean-field / DMRG concordance", secs(900), c3_concordance),
        run(4, "RG fixed point", secs(300), c4_rg_fixed_point),
        run(5, "two-basin RG flow", secs(600), c5_two_basin_flow),
        run(6, "EFT first-order transition", secs(120), c6_eft_transition),
        run(7, "RPA coefficients and stability", secs(120), c7_rpa),
        run(8, "XY scar exactness", None, c8_scar_exactness),
        run(9, "System 1 sensitivity", secs(120), c9_system1),
        run(10, "System 2 jump", secs(300), c10_system2),
        run(11, "trajectory stabilization", secs(600), c11_trajectories),
        run(12, "deformed PXP tower", secs(120), c12_deformed_pxp),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    let strict = std::env::var("SCARLAB_ACCEPTANCE_STRICT").map(|v| v == "1").unwrap_or(false);
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
