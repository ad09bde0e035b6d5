//! Two-dimensional classical model behind the circuit channel.
//!
//! A plaquette weight `W(σ1 σ2 | σ3 σ4)` is the matrix element ⟨σ1σ2|L̂|σ3σ4⟩ of the local
//! channel. Inside the tilted transfer matrix the same tensor is read as a vertex with legs
//! (left, top, bottom, right) = (σ1, σ2, σ3, σ4).

use crate::linalg::{c, CVector, LinearOperator};
use crate::rqc::{local_channel_matrix, pair_index, ChannelParams};
use nalgebra::DMatrix;
use thiserror::Error;

pub const MAX_TRANSFER_L: usize = 14;
pub const MAX_DENSE_TRANSFER_L: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("chain length {0} outside the supported range")]
    SizeTooLarge(usize),
    #[error("partition function needs an even L >= 2, got {0}")]
    OddLength(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaquetteWeight {
    /// Flattened as index (σ1 << 3) | (σ2 << 2) | (σ3 << 1) | σ4 with ↑ = 0, ↓ = 1.
    pub w: [f64; 16],
}

#[inline]
pub fn widx(s1: usize, s2: usize, s3: usize, s4: usize) -> usize {
    (s1 << 3) | (s2 << 2) | (s3 << 1) | s4
}

impl PlaquetteWeight {
    pub fn zero() -> Self {
        PlaquetteWeight { w: [0.0; 16] }
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut w = [0.0; 16];
        for (k, x) in w.iter_mut().enumerate() {
            *x = f(k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
        }
        PlaquetteWeight { w }
    }

    #[inline]
    pub fn get(&self, s1: usize, s2: usize, s3: usize, s4: usize) -> f64 {
        self.w[widx(s1, s2, s3, s4)]
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut w = self.w;
        w.iter_mut().for_each(|x| *x *= s);
        PlaquetteWeight { w }
    }

    pub fn distance(&self, other: &PlaquetteWeight) -> f64 {
        self.w.iter().zip(&other.w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// Label like "uudd" for the flattened index.
    pub fn label(k: usize) -> String {
        (0..4).map(|p| if (k >> (3 - p)) & 1 == 0 { 'u' } else { 'd' }).collect()
    }
}

pub fn boltzmann_weight(p: &ChannelParams) -> PlaquetteWeight {
    let m = local_channel_matrix(p);
    PlaquetteWeight::from_fn(|s1, s2, s3, s4| m[(pair_index(s1, s2), pair_index(s3, s4))])
}

#[inline]
fn bit(config: usize, site: usize, l: usize) -> usize {
    (config >> (l - 1 - site)) & 1
}

/// ⟨σ'|Û|σ⟩ = Σ_τ Π_i W(τ_i, σ'_i | σ_i, τ_{i+1}) with τ_{L+1} = τ_1.
pub fn transfer_element(w: &PlaquetteWeight, l: usize, out: usize, inp: usize) -> f64 {
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    for i in 0..l {
        let (so, si) = (bit(out, i, l), bit(inp, i, l));
        let m = [[w.get(0, so, si, 0), w.get(0, so, si, 1)], [w.get(1, so, si, 0), w.get(1, so, si, 1)]];
        let mut next = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                next[a][b] = acc[a][0] * m[0][b] + acc[a][1] * m[1][b];
            }
        }
        acc = next;
    }
    acc[0][0] + acc[1][1]
}

/// Transfer operator Û on L sites, applied lazily leg by leg.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    pub weight: PlaquetteWeight,
    pub l: usize,
}

pub fn transfer_matrix_dense(w: &PlaquetteWeight, l: usize) -> Result<TransferOperator, LatticeError> {
    if !(2..=MAX_TRANSFER_L).contains(&l) {
        return Err(LatticeError::SizeTooLarge(l));
    }
    Ok(TransferOperator { weight: *w, l })
}

impl TransferOperator {
    /// Explicit 2^L × 2^L real matrix.
    pub fn dense(&self) -> Result<DMatrix<f64>, LatticeError> {
        if self.l > MAX_DENSE_TRANSFER_L {
            return Err(LatticeError::SizeTooLarge(self.l));
        }
        let n = 1 << self.l;
        Ok(DMatrix::from_fn(n, n, |o, i| transfer_element(&self.weight, self.l, o, i)))
    }

    fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let l = self.l;
        let n = 1usize << l;
        let mut y = vec![0.0; n];
        for tau1 in 0..2 {
            // z[t][config]: legs 0..k already output legs, current bond value t.
            let mut z = vec![vec![0.0; n], vec![0.0; n]];
            z[tau1].copy_from_slice(x);
            for site in 0..l {
                let shift = l - 1 - site;
                let mut nz = vec![vec![0.0; n], vec![0.0; n]];
                for t in 0..2 {
                    for (cfg, &val) in z[t].iter().enumerate() {
                        if val == 0.0 {
                            continue;
                        }
                        let si = (cfg >> shift) & 1;
                        let base = cfg & !(1 << shift);
                        for so in 0..2 {
                            let oc = base | (so << shift);
                            for tn in 0..2 {
                                let wv = self.weight.get(t, so, si, tn);
                                if wv != 0.0 {
                                    nz[tn][oc] += wv * val;
                                }
                            }
                        }
                    }
                }
                z = nz;
            }
            for (yi, zi) in y.iter_mut().zip(&z[tau1]) {
                *yi += zi;
            }
        }
        y
    }

    /// Û† applied to a real vector.
    pub fn apply_transpose_real(&self, x: &[f64]) -> Vec<f64> {
        let t = TransferOperator {
            weight: PlaquetteWeight::from_fn(|s1, s2, s3, s4| self.weight.get(s1, s3, s2, s4)),
            l: self.l,
        };
        t.apply_real(x)
    }
}

impl LinearOperator for TransferOperator {
    fn dim(&self) -> usize {
        1 << self.l
    }
    fn apply(&self, x: &CVector) -> CVector {
        let re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let im: Vec<f64> = x.iter().map(|z| z.im).collect();
        let (yr, yi) = (self.apply_real(&re), self.apply_real(&im));
        CVector::from_iterator(x.len(), yr.iter().zip(&yi).map(|(a, b)| c(*a, *b)))
    }
}

/// Repeated site tensor M[l][out][in][r] of Û or of Û†Û.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMPO {
    pub bond: usize,
    pub squared: bool,
    /// Flattened as ((l · 2 + out) · 2 + in) · bond + r.
    pub data: Vec<f64>,
}

impl TransferMPO {
    #[inline]
    pub fn get(&self, l: usize, o: usize, i: usize, r: usize) -> f64 {
        self.data[((l * 2 + o) * 2 + i) * self.bond + r]
    }

    /// Periodic closure tr(M ⋯ M) over L sites as a dense matrix.
    pub fn closure_dense(&self, l: usize) -> DMatrix<f64> {
        let n = 1 << l;
        let d = self.bond;
        DMatrix::from_fn(n, n, |out, inp| {
            let mut acc = DMatrix::<f64>::identity(d, d);
            for s in 0..l {
                let (so, si) = (bit(out, s, l), bit(inp, s, l));
                let m = DMatrix::from_fn(d, d, |a, b| self.get(a, so, si, b));
                acc *= m;
            }
            acc.trace()
        })
    }

    /// Open-boundary form of the periodic closure: bond index (running, wrap).
    /// Returns per-site tensors with left/right bond dimensions.
    pub fn open_chain(&self, l: usize) -> Vec<OpenMpoSite> {
        let d = self.bond;
        (0..l)
            .map(|s| {
                let (dl, dr) = (if s == 0 { 1 } else { d * d }, if s + 1 == l { 1 } else { d * d });
                let mut data = vec![0.0; dl * 4 * dr];
                let mut put = |lb: usize, o: usize, i: usize, rb: usize, v: f64| {
                    data[((lb * 2 + o) * 2 + i) * dr + rb] += v;
                };
                for o in 0..2 {
                    for i in 0..2 {
                        for a in 0..d {
                            for b in 0..d {
                                let v = self.get(a, o, i, b);
                                if v == 0.0 {
                                    continue;
                                }
                                match (s == 0, s + 1 == l) {
                                    (true, true) => {
                                        if a == b {
                                            put(0, o, i, 0, v)
                                        }
                                    }
                                    (true, false) => put(0, o, i, b * d + a, v),
                                    (false, true) => {
                                        for w in 0..d {
                                            if b == w {
                                                put(a * d + w, o, i, 0, v)
                                            }
                                        }
                                    }
                                    (false, false) => {
                                        for w in 0..d {
                                            put(a * d + w, o, i, b * d + w, v)
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                OpenMpoSite { left: dl, right: dr, data }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct OpenMpoSite {
    pub left: usize,
    pub right: usize,
    /// Flattened as ((l · 2 + out) · 2 + in) · right + r.
    pub data: Vec<f64>,
}

impl OpenMpoSite {
    #[inline]
    pub fn get(&self, l: usize, o: usize, i: usize, r: usize) -> f64 {
        self.data[((l * 2 + o) * 2 + i) * self.right + r]
    }
}

pub fn transfer_mpo(w: &PlaquetteWeight, squared: bool) -> TransferMPO {
    if !squared {
        let mut data = vec![0.0; 16];
        for l in 0..2 {
            for o in 0..2 {
                for i in 0..2 {
                    for r in 0..2 {
                        data[((l * 2 + o) * 2 + i) * 2 + r] = w.get(l, o, i, r);
                    }
                }
            }
        }
        return TransferMPO { bond: 2, squared: false, data };
    }
    // (Û†Û)_{σ σ''} = Σ_{σ'} Û_{σ' σ} Û_{σ' σ''}; bond (l1, l2) -> l1 · 2 + l2.
    let mut data = vec![0.0; 4 * 4 * 4];
    for l1 in 0..2 {
        for l2 in 0..2 {
            for o in 0..2 {
                for i in 0..2 {
                    for r1 in 0..2 {
                        for r2 in 0..2 {
                            let v: f64 = (0..2).map(|mid| w.get(l1, mid, o, r1) * w.get(l2, mid, i, r2)).sum();
                            data[(((l1 * 2 + l2) * 2 + o) * 2 + i) * 4 + r1 * 2 + r2] = v;
                        }
                    }
                }
            }
        }
    }
    TransferMPO { bond: 4, squared: true, data }
}

/// Exhaustive sum over an L × L checkerboard torus: L sites, L time layers of the
/// brickwork (odd bonds first). Each layer pair contributes W(out, out | in, in).
pub fn partition_function_brute(w: &PlaquetteWeight, l: usize) -> Result<f64, LatticeError> {
    if l < 2 || l % 2 == 1 {
        return Err(LatticeError::OddLength(l));
    }
    if l * l > 24 {
        return Err(LatticeError::SizeTooLarge(l));
    }
    let nspins = l * l;
    let spin = |cfg: usize, t: usize, i: usize| (cfg >> (t * l + i)) & 1;
    let mut z = 0.0;
    for cfg in 0..(1usize << nspins) {
        let mut prod = 1.0;
        'layers: for t in 0..l {
            let tn = (t + 1) % l;
            for i in ((t % 2)..l).step_by(2) {
                let j = (i + 1) % l;
                let v = w.get(spin(cfg, tn, i), spin(cfg, tn, j), spin(cfg, t, i), spin(cfg, t, j));
                prod *= v;
                if prod == 0.0 {
                    break 'layers;
                }
            }
        }
        z += prod;
    }
    Ok(z)
}

/// The same torus from the tilted transfer matrix: tr(Û^{L/2} S^{L/2}), S the cyclic shift.
pub fn partition_function_transfer(w: &PlaquetteWeight, l: usize) -> Result<f64, LatticeError> {
    if l < 2 || l % 2 == 1 {
        return Err(LatticeError::OddLength(l));
    }
    let u = transfer_matrix_dense(w, l)?.dense()?;
    let n = 1usize << l;
    let k = l / 2;
    let shift = DMatrix::from_fn(n, n, |t, s| {
        let target: usize = (0..l).map(|i| bit(s, (i + k) % l, l) << (l - 1 - i)).sum();
        if target == t {
            1.0
        } else {
            0.0
        }
    });
    let mut acc = shift;
    for _ in 0..k {
        acc = &u * acc;
    }
    Ok(acc.trace())
}
