use nalgebra::Matrix4;
use proptest::prelude::*;
use scarlab::linalg::{c, dense_eigenvalues, CMatrix, LinearOperator};
use scarlab::rqc::*;

fn p(a: f64, cc: f64, r: f64) -> ChannelParams {
    ChannelParams::new(a, cc, r).unwrap()
}

#[test]
fn unitary_limit_blocks() {
    let r = 0.3;
    let m = local_channel_matrix(&p(1.0, 0.0, r));
    let expect = Matrix4::new(1.0, 0.0, 1.0 - r, 1.0 - r, 0.0, 1.0, r, r, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert!((m - expect).abs().max() < 1e-15);
}

#[test]
fn projector_limit_blocks() {
    let m = local_channel_matrix(&p(0.0, 1.0, 0.5));
    let expect = Matrix4::new(0.0, 0.0, 0.0, 0.0, 0.25, 1.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert!((m - expect).abs().max() < 1e-15);
}

#[test]
fn label_action_matches_matrix_columns() {
    let pp = p(0.35, 0.25, 0.4);
    let m = local_channel_matrix(&pp);
    let labels = [(Label::Q, Label::Q, 0), (Label::S, Label::S, 1), (Label::Q, Label::S, 2), (Label::S, Label::Q, 3)];
    for (l, r, col) in labels {
        let (s, q) = channel_action_labels(&pp, l, r);
        assert_eq!(s, m[(1, col)]);
        assert_eq!(q, m[(0, col)]);
    }
    let (s, q) = channel_action_labels(&pp, Label::S, Label::S);
    assert!((s + q - 1.0).abs() < 1e-15);
    let (s, q) = channel_action_labels(&pp, Label::Q, Label::Q);
    assert!((s + q - (1.0 - pp.c * (1.0 - pp.r * pp.r))).abs() < 1e-15);
}

#[test]
fn two_site_kronecker_oracle() {
    let pp = p(0.2, 0.5, 0.6);
    let g = local_gate_computational(&pp);
    let swap = CMatrix::from_fn(4, 4, |i, j| {
        let (i0, i1) = (i >> 1, i & 1);
        if j == (i1 << 1) | i0 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let expect = &swap * &g * &swap * &g;
    let op = brickwork_operator(&pp, 2).unwrap();
    assert!((op.to_dense() - expect).norm() < 1e-15);
}

#[test]
fn fixed_products() {
    let l = 6;
    let down = uniform_product(l, DOWN);
    let out = brickwork_operator(&p(0.45, 0.55, 0.3), l).unwrap().apply(&down);
    assert!((out - &down).norm() < 1e-14);
    let up = uniform_product(l, UP);
    let out = brickwork_operator(&p(0.6, 0.0, 0.3), l).unwrap().apply(&up);
    assert!((out - &up).norm() < 1e-14);
}

#[test]
fn solvable_steady_states() {
    let l = 6;
    let s = steady_state_exact(&p(0.7, 0.3, 0.5), l, 1e-10).unwrap();
    assert!((s.scar_weight - 1.0).abs() < 1e-10);
    assert!((s.pair.value - c(1.0, 0.0)).norm() < 1e-10);
    let s = steady_state_exact(&p(0.7, 0.0, 0.5), l, 1e-10).unwrap();
    assert!(s.scar_weight.abs() < 1e-10);
    let ov = uniform_product(l, UP).dotc(&s.pair.vector).norm_sqr();
    assert!(ov > 1.0 - 1e-10);
}

#[test]
fn unitary_point_has_two_steady_states() {
    let op = brickwork_operator(&p(1.0, 0.0, 0.5), 4).unwrap();
    let ones = dense_eigenvalues(&op.to_dense()).iter().filter(|z| (**z - c(1.0, 0.0)).norm() < 1e-8).count();
    assert!(ones >= 2);
    for label in [UP, DOWN] {
        let v = uniform_product(4, label);
        assert!((op.apply(&v) - &v).norm() < 1e-14);
    }
}

#[test]
fn rejects_odd_and_large_chains() {
    let pp = p(0.5, 0.2, 0.5);
    assert!(matches!(brickwork_operator(&pp, 5), Err(ChannelError::SizeTooLarge(5))));
    assert!(matches!(brickwork_operator(&pp, 16), Err(ChannelError::SizeTooLarge(16))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_radius_at_most_one(a in 0.0..1.0f64, frac in 0.0..1.0f64, r in 0.05..0.95f64) {
        let pp = p(a, frac * (1.0 - a), r);
        let op = brickwork_operator(&pp, 4).unwrap();
        let rho = dense_eigenvalues(&op.to_dense()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(rho <= 1.0 + 1e-10);
    }
}
