//! Quick oracle and invariant checks across every module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use scarlab::dmrg::dmrg_run;
use scarlab::eft::{self, EftParams, OptimizeOptions, SaddleCase};
use scarlab::lattice::{self, boltzmann_weight, transfer_mpo, PlaquetteWeight};
use scarlab::linalg::{self, c, CMatrix, LinearOperator, Mode};
use scarlab::rg::{self, BlockRule};
use scarlab::rqc::{self, ChannelParams};
use scarlab::spin::{self, SpinOneXYParams, SteadyOptions, Terms};
use scarlab::variational::{phase_point, DiagramOptions};

use crate::error::CliError;
use crate::table::ResultTable;

struct Check {
    name: &'static str,
    /// Measured defect; the check passes when it is at most `tol`.
    run: fn() -> Result<f64, CliError>,
    tol: f64,
}

fn dominant_imaginary() -> Result<f64, CliError> {
    let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
    let p = linalg::dominant_eigenpair(&m, Mode::LargestImaginary, 1e-12, 100, 1)?;
    Ok((p.value - c(0.0, 1.0)).norm())
}

fn unitary_propagation() -> Result<f64, CliError> {
    let h = spin::build_xy_hamiltonian(&SpinOneXYParams::uniform(4, c(1.0, 0.0), 0.0), Terms::ALL)?;
    let v = spin::af_state(4)?;
    let out = linalg::propagate(&h, &v, c(0.0, -1.0), 1.3, 1e-10)?;
    Ok((out.norm() - v.norm()).abs())
}

fn solvable_limit() -> Result<f64, CliError> {
    let s = rqc::steady_state_exact(&ChannelParams::new(0.7, 0.3, 0.5)?, 6, 1e-10)?;
    Ok((s.scar_weight - 1.0).abs().max((s.pair.value - c(1.0, 0.0)).norm()))
}

fn spectral_radius() -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for (a, cc, r) in [(0.2, 0.3, 0.4), (0.6, 0.1, 0.7), (0.05, 0.9, 0.2)] {
        let op = rqc::brickwork_operator(&ChannelParams::new(a, cc, r)?, 4)?;
        let rho = linalg::dense_eigenvalues(&op.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(rho - 1.0);
    }
    Ok(worst.max(0.0))
}

fn transfer_trace() -> Result<f64, CliError> {
    let w = boltzmann_weight(&ChannelParams::new(0.3, 0.4, 0.5)?);
    let brute = lattice::partition_function_brute(&w, 2)?;
    let tm = lattice::partition_function_transfer(&w, 2)?;
    Ok((brute - tm).abs() / brute.abs().max(1e-300))
}

fn variational_chain() -> Result<f64, CliError> {
    let (a, cc, l) = (0.35, 0.3, 6);
    let w = boltzmann_weight(&ChannelParams::new(a, cc, 0.5)?);
    let mf = phase_point(a, cc, &DiagramOptions { l, ..DiagramOptions::default() })?.lambda_sq;
    let dm = dmrg_run(&transfer_mpo(&w, true), l, 16, 20, 1e-12, 3)?.lambda_sq;
    let u: DMatrix<f64> = lattice::transfer_matrix_dense(&w, l)?.dense()?;
    let exact = (u.transpose() * &u).symmetric_eigen().eigenvalues.max();
    let order = (mf - dm).max(0.0) + (dm - exact).max(0.0);
    Ok(order.max((dm - exact).abs() / exact))
}

fn rg_fixed_point() -> Result<f64, CliError> {
    let star = rg::qmbs_fixed_point();
    let drift = rg::block_spin_step(&star)?.distance(&star);
    let w = PlaquetteWeight { w: std::array::from_fn(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4) };
    let fast = rg::block_sum(&w, BlockRule::Majority);
    let slow = rg::block_sum_brute(&w, BlockRule::Majority);
    Ok(drift.max(fast.distance(&slow) / slow.max_abs()))
}

fn eft_interior_stationary() -> Result<f64, CliError> {
    let p = EftParams::new(1.0, 0.5, 0.0, 1.0, 0.1)?;
    let s = eft::optimize_config(&p, &OptimizeOptions::default())?;
    if s.case != SaddleCase::Interior {
        return Ok(f64::INFINITY);
    }
    let cf = eft::spin_wave_coeffs(&p, s.config.theta)?;
    let gap = eft::min_gap(cf.t_phi, cf.m_phi, eft::STABILITY_K_POINTS);
    Ok(eft::energy_slope(&p, s.config.theta).abs() + if gap > 0.0 { 0.0 } else { 1.0 })
}

fn xy_scars() -> Result<f64, CliError> {
    let l = 6;
    let h = spin::build_xy_hamiltonian(&SpinOneXYParams::uniform(l, c(0.0, 0.0), 0.4), Terms::CLEAN)?;
    let o = spin::order_parameter(l);
    let mut worst: f64 = 0.0;
    for n in 0..=l {
        let s = spin::scar_state(n, l)?;
        let e: Complex64 = h.expectation(&s);
        worst = worst.max(linalg::residual(&h, e, &s)).max(e.im.abs()).max((spin::expectation(&o, &s) - 1.0).abs());
    }
    Ok(worst)
}

fn clean_steady_state() -> Result<f64, CliError> {
    let s = spin::steady_state(&SpinOneXYParams::uniform(4, c(0.0, 0.0), 0.5), &SteadyOptions::default())?;
    Ok((s.o_expect - 1.0).abs())
}

fn rydberg_tower() -> Result<f64, CliError> {
    let rep = spin::deformed_pxp_verify(6)?;
    Ok(rep.rows.iter().map(|r| r.ryd_residual.max(r.sm_residual)).fold(0.0, f64::max))
}

const CHECKS: &[Check] = &[
    Check { name: "largest-imaginary eigenpair of a rotation", run: dominant_imaginary, tol: 1e-10 },
    Check { name: "Hermitian propagation preserves the norm", run: unitary_propagation, tol: 1e-8 },
    Check { name: "scar limit steady state", run: solvable_limit, tol: 1e-10 },
    Check { name: "channel spectral radius at most one", run: spectral_radius, tol: 1e-10 },
    Check { name: "transfer trace equals brute partition function", run: transfer_trace, tol: 1e-10 },
    Check { name: "mean field <= DMRG <= dense", run: variational_chain, tol: 1e-6 },
    Check { name: "RG fixed point and block oracle", run: rg_fixed_point, tol: 1e-10 },
    Check { name: "EFT interior saddle is stationary and stable", run: eft_interior_stationary, tol: 1e-8 },
    Check { name: "XY scar tower", run: xy_scars, tol: 1e-10 },
    Check { name: "clean chain steady state is in the scar span", run: clean_steady_state, tol: 1e-8 },
    Check { name: "projected deformed PXP tower", run: rydberg_tower, tol: 1e-10 },
];

/// Runs every check; the table has one row per check, and failures are reported through
/// the returned count.
pub fn run() -> (ResultTable, usize) {
    let results: Vec<Result<f64, String>> = CHECKS.par_iter().map(|ch| (ch.run)().map_err(|e| e.to_string())).collect();
    let mut t = ResultTable::new(&["check", "pass", "defect", "tol"]);
    t.flagged.push("defect".into());
    let mut failed = 0;
    let mut names = Vec::new();
    for (i, (ch, res)) in CHECKS.iter().zip(results).enumerate() {
        let (pass, defect, err) = match res {
            Ok(d) => (d <= ch.tol, d, None),
            Err(e) => (false, f64::NAN, Some(e)),
        };
        if !pass {
            failed += 1;
        }
        eprintln!("{} {} (defect {defect:.3e}, tol {:.0e})", if pass { "PASS" } else { "FAIL" }, ch.name, ch.tol);
        t.push(vec![i as f64, if pass { 1.0 } else { 0.0 }, defect, ch.tol]);
        names.push(json!({"check": i, "name": ch.name, "error": err}));
    }
    t.extra.insert("checks".into(), json!(names));
    (t, failed)
}
