//! Scar-preserving random-circuit channel in its effective spin-1/2 form.
//!
//! Local basis: ↑ = maximally mixed full-space state q̂, ↓ = maximally mixed scar state ŝ.
//! Two-site basis order is (↑↑, ↓↓, ↑↓, ↓↑). As a computational basis digit ↑ = 0, ↓ = 1.

use crate::linalg::{self, c, CMatrix, CVector, EigenPair, LinalgError, LinearOperator, Mode};
use nalgebra::Matrix4;
use thiserror::Error;

pub const UP: usize = 0;
pub const DOWN: usize = 1;

/// Largest chain length accepted by the exact brickwork routines.
pub const MAX_BRICKWORK_L: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("chain length {0} must be even and between 2 and {MAX_BRICKWORK_L}")]
    SizeTooLarge(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Gate probabilities (a, b, c) with b = 1 − a − c, and scar fraction r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub a: f64,
    pub c: f64,
    pub r: f64,
}

impl ChannelParams {
    pub fn new(a: f64, c: f64, r: f64) -> Result<Self, ChannelError> {
        let ok = a.is_finite() && c.is_finite() && r.is_finite();
        if !ok || a < 0.0 || c < 0.0 || a + c > 1.0 + 1e-12 {
            return Err(ChannelError::InvalidParams(format!("need a, c >= 0 and a + c <= 1, got a={a}, c={c}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(ChannelError::InvalidParams(format!("need 0 < r < 1, got {r}")));
        }
        Ok(ChannelParams { a, c, r })
    }

    pub fn b(&self) -> f64 {
        (1.0 - self.a - self.c).max(0.0)
    }
}

/// Index of a two-site label pair in the (↑↑, ↓↓, ↑↓, ↓↑) ordering.
pub fn pair_index(left: usize, right: usize) -> usize {
    match (left, right) {
        (UP, UP) => 0,
        (DOWN, DOWN) => 1,
        (UP, DOWN) => 2,
        _ => 3,
    }
}

/// The 4×4 local channel, rows = outputs, columns = inputs.
pub fn local_channel_matrix(p: &ChannelParams) -> Matrix4<f64> {
    let (a, b, cc, r) = (p.a, p.b(), p.c, p.r);
    let x = a * (1.0 - r) + b;
    let y = (a + cc) * r;
    Matrix4::new(
        a + b, b, x, x, //
        cc * r * r, a + cc, y, y, //
        0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0,
    )
}

/// Label of a single site in the reduced dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    /// Scar-space mixed state ŝ (↓).
    S,
    /// Full-space mixed state q̂ (↑).
    Q,
}

/// Channel action on a product of labels: (coefficient on ŝŝ, coefficient on q̂q̂).
pub fn channel_action_labels(p: &ChannelParams, left: Label, right: Label) -> (f64, f64) {
    let (a, b, cc, r) = (p.a, p.b(), p.c, p.r);
    match (left, right) {
        (Label::S, Label::S) => (a + cc, b),
        (Label::S, Label::Q) | (Label::Q, Label::S) => ((a + cc) * r, a * (1.0 - r) + b),
        (Label::Q, Label::Q) => (cc * r * r, a + b),
    }
}

/// 4×4 local channel expanded to the computational two-qubit basis |left right⟩ = 2·left + right.
pub fn local_gate_computational(p: &ChannelParams) -> CMatrix {
    let m = local_channel_matrix(p);
    let mut g = CMatrix::zeros(4, 4);
    for o1 in 0..2 {
        for o2 in 0..2 {
            for i1 in 0..2 {
                for i2 in 0..2 {
                    g[(2 * o1 + o2, 2 * i1 + i2)] = c(m[(pair_index(o1, o2), pair_index(i1, i2))], 0.0);
                }
            }
        }
    }
    g
}

/// Brickwork L̂ = L_even ∘ L_odd on a periodic chain; with 0-based sites the odd layer acts
/// on bonds (0,1), (2,3), …, the even layer on (1,2), …, (L−1, 0).
#[derive(Clone, Debug)]
pub struct BrickworkOperator {
    l: usize,
    gate: CMatrix,
}

impl BrickworkOperator {
    pub fn len(&self) -> usize {
        self.l
    }
    pub fn is_empty(&self) -> bool {
        self.l == 0
    }
}

pub fn brickwork_operator(p: &ChannelParams, l: usize) -> Result<BrickworkOperator, ChannelError> {
    if l < 2 || l % 2 == 1 || l > MAX_BRICKWORK_L {
        return Err(ChannelError::SizeTooLarge(l));
    }
    Ok(BrickworkOperator { l, gate: local_gate_computational(p) })
}

impl LinearOperator for BrickworkOperator {
    fn dim(&self) -> usize {
        1 << self.l
    }
    fn apply(&self, x: &CVector) -> CVector {
        let dims = vec![2; self.l];
        let mut v = x.clone();
        for parity in [0, 1] {
            for i in (parity..self.l).step_by(2) {
                let j = (i + 1) % self.l;
                v = linalg::apply_local_gate(&v, &self.gate, &[i, j], &dims).expect("brickwork gate shape is consistent");
            }
        }
        v
    }
}

/// Fraction of ↓ labels in a basis configuration.
pub fn down_fraction(config: usize, l: usize) -> f64 {
    (config.count_ones() as f64) / l as f64
}

#[derive(Clone, Debug)]
pub struct ExactSteadyState {
    pub pair: EigenPair,
    /// Σ_config (fraction of ↓) · |amplitude|² / ‖v‖².
    pub scar_weight: f64,
}

/// Dominant (largest-real) eigenpair of the brickwork channel.
pub fn steady_state_exact(p: &ChannelParams, l: usize, tol: f64) -> Result<ExactSteadyState, ChannelError> {
    let op = brickwork_operator(p, l)?;
    let mut pair = linalg::dominant_eigenpair(&op, Mode::LargestReal, tol, 200, 7)?;
    // Fix the global phase so the largest component is real positive.
    let (imax, _) = pair.vector.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let ph = pair.vector[imax] / c(pair.vector[imax].norm(), 0.0);
    pair.vector /= ph;
    let norm2 = pair.vector.norm_squared();
    let scar_weight = pair.vector.iter().enumerate().map(|(k, z)| down_fraction(k, l) * z.norm_sqr()).sum::<f64>() / norm2;
    Ok(ExactSteadyState { pair, scar_weight })
}

/// |σ…σ⟩ as a normalized computational basis vector.
pub fn uniform_product(l: usize, label: usize) -> CVector {
    let mut v = CVector::zeros(1 << l);
    v[if label == DOWN { (1 << l) - 1 } else { 0 }] = c(1.0, 0.0);
    v
}
