use nalgebra::DMatrix;
use scarlab::dmrg::dmrg_run;
use scarlab::lattice::{boltzmann_weight, partition_function_brute, partition_function_transfer, transfer_matrix_dense, transfer_mpo, PlaquetteWeight};
use scarlab::rqc::ChannelParams;
use scarlab::variational::{meanfield_chain_lambda_sq, meanfield_optimize, MeanFieldOptions, Optimum};

fn weight(a: f64, c: f64, r: f64) -> PlaquetteWeight {
    boltzmann_weight(&ChannelParams::new(a, c, r).unwrap())
}

fn dense_u(w: &PlaquetteWeight, l: usize) -> DMatrix<f64> {
    transfer_matrix_dense(w, l).unwrap().dense().unwrap()
}

fn sigma_max_sq(u: &DMatrix<f64>) -> f64 {
    (u.transpose() * u).symmetric_eigen().eigenvalues.max()
}

#[test]
fn partition_function_matches_brute_force() {
    for &(a, c) in &[(0.2, 0.3), (0.6, 0.1), (0.05, 0.9)] {
        let w = weight(a, c, 0.5);
        for l in [2, 4] {
            let zb = partition_function_brute(&w, l).unwrap();
            let zt = partition_function_transfer(&w, l).unwrap();
            assert!((zb - zt).abs() <= 1e-11 * zb.abs().max(1.0), "a={a} c={c} l={l}: {zb} vs {zt}");
        }
    }
}

#[test]
fn squared_mpo_closes_to_gram_matrix() {
    let w = weight(0.3, 0.4, 0.35);
    for l in [4, 6] {
        let u = dense_u(&w, l);
        let g = u.transpose() * &u;
        let m = transfer_mpo(&w, true).closure_dense(l);
        assert!((&g - &m).amax() < 1e-12 * g.amax(), "l={l}");
        let plain = transfer_mpo(&w, false).closure_dense(l);
        assert!((&u - &plain).amax() < 1e-12 * u.amax(), "l={l}");
    }
}

#[test]
fn dmrg_reaches_dense_sigma_max() {
    for &(a, c) in &[(0.2, 0.3), (0.1, 0.8), (0.7, 0.2)] {
        let w = weight(a, c, 0.5);
        for l in [6, 8] {
            let exact = sigma_max_sq(&dense_u(&w, l));
            let out = dmrg_run(&transfer_mpo(&w, true), l, 16, 20, 1e-10, 3).unwrap();
            assert!((out.lambda_sq - exact).abs() <= 1e-8 * exact, "a={a} c={c} l={l}: {} vs {exact}", out.lambda_sq);
            assert!(out.monotone);
        }
    }
}

#[test]
fn dmrg_mps_is_top_singular_vector() {
    let w = weight(0.25, 0.5, 0.5);
    let l = 6;
    let u = dense_u(&w, l);
    let out = dmrg_run(&transfer_mpo(&w, true), l, 16, 20, 1e-12, 5).unwrap();
    let v = nalgebra::DVector::from_vec(out.to_dense());
    let v = &v / v.norm();
    let g = u.transpose() * &u;
    let rq = (v.transpose() * &g * &v)[(0, 0)];
    assert!((rq - out.lambda_sq).abs() < 1e-9 * rq);
}

#[test]
fn meanfield_chain_value_is_below_exact() {
    for &(a, c) in &[(0.2, 0.3), (0.1, 0.8), (0.5, 0.1)] {
        let w = weight(a, c, 0.5);
        let res = meanfield_optimize(&w, &MeanFieldOptions::default()).unwrap();
        let Optimum::MeanField { ansatz, .. } = res.optimum else { panic!() };
        for l in [4, 6] {
            let mf = meanfield_chain_lambda_sq(&w, &ansatz, l, Default::default());
            let exact = sigma_max_sq(&dense_u(&w, l));
            assert!(mf <= exact * (1.0 + 1e-10), "a={a} c={c} l={l}: {mf} > {exact}");
        }
    }
}
