//! Two-site DMRG maximizing ⟨Φ|Û†Û|Φ⟩/⟨Φ|Φ⟩ on an open MPS.
//!
//! The periodic MPO is carried in open form (bond = running ⊗ wrap index, see
//! [`TransferMPO::open_chain`]). All tensors are real.

use crate::lattice::{OpenMpoSite, TransferMPO};
use crate::linalg::lanczos_largest;
use crate::variational::{Optimum, VariationalResult};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmrgError {
    #[error("invalid DMRG argument: {0}")]
    InvalidArgument(String),
    #[error("DMRG did not converge in {sweeps} sweeps (relative change {rel_change:e})")]
    NoConvergence { sweeps: usize, rel_change: f64 },
}

/// Site tensor with shape (left, 2, right), flattened as (a · 2 + s) · right + b.
#[derive(Clone, Debug)]
struct Site {
    dl: usize,
    dr: usize,
    t: Vec<f64>,
}

/// Environment with shape (bra, mpo, ket), flattened as (a · w + m) · k + a'.
#[derive(Clone, Debug)]
struct Env {
    a: usize,
    w: usize,
    t: Vec<f64>,
}

impl Env {
    fn unit() -> Self {
        Env { a: 1, w: 1, t: vec![1.0] }
    }
    #[inline]
    fn at(&self, a: usize, m: usize, ap: usize) -> f64 {
        self.t[(a * self.w + m) * self.a + ap]
    }
}

#[derive(Clone, Debug)]
pub struct DmrgOutcome {
    pub lambda_sq: f64,
    pub magnetization: f64,
    pub site_magnetization: Vec<f64>,
    pub sweep_values: Vec<f64>,
    pub monotone: bool,
    pub bond_dims: Vec<usize>,
    pub sweeps_done: usize,
    /// Site tensors of the final MPS.
    tensors: Vec<Site>,
}

impl DmrgOutcome {
    /// Dense amplitude vector of the final MPS (site 0 most significant).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut acc = vec![1.0];
        let mut d = 1;
        for s in &self.tensors {
            let mut next = vec![0.0; acc.len() / d * 2 * s.dr];
            let npre = acc.len() / d;
            for p in 0..npre {
                for a in 0..d {
                    let v = acc[p * d + a];
                    if v == 0.0 {
                        continue;
                    }
                    for sp in 0..2 {
                        for b in 0..s.dr {
                            next[((p * 2 + sp) * s.dr) + b] += v * s.t[(a * 2 + sp) * s.dr + b];
                        }
                    }
                }
            }
            acc = next;
            d = s.dr;
        }
        acc
    }
}

fn update_left(env: &Env, a: &Site, m: &OpenMpoSite) -> Env {
    let (dl, dr, wl, wr) = (a.dl, a.dr, m.left, m.right);
    // t1(a, w, s', b') = Σ_{a'} L(a,w,a') A(a',s',b')
    let mut t1 = vec![0.0; dl * wl * 2 * dr];
    for x in 0..dl {
        for w in 0..wl {
            for xp in 0..dl {
                let l = env.at(x, w, xp);
                if l == 0.0 {
                    continue;
                }
                for sp in 0..2 {
                    for bp in 0..dr {
                        t1[((x * wl + w) * 2 + sp) * dr + bp] += l * a.t[(xp * 2 + sp) * dr + bp];
                    }
                }
            }
        }
    }
    // t2(a, s, w', b') = Σ_{w,s'} M(w,s,s',w') t1(a,w,s',b')
    let mut t2 = vec![0.0; dl * 2 * wr * dr];
    for x in 0..dl {
        for w in 0..wl {
            for s in 0..2 {
                for sp in 0..2 {
                    for wp in 0..wr {
                        let mv = m.get(w, s, sp, wp);
                        if mv == 0.0 {
                            continue;
                        }
                        for bp in 0..dr {
                            t2[((x * 2 + s) * wr + wp) * dr + bp] += mv * t1[((x * wl + w) * 2 + sp) * dr + bp];
                        }
                    }
                }
            }
        }
    }
    // L'(b, w', b') = Σ_{a,s} A(a,s,b) t2(a,s,w',b')
    let mut out = vec![0.0; dr * wr * dr];
    for x in 0..dl {
        for s in 0..2 {
            for b in 0..dr {
                let av = a.t[(x * 2 + s) * dr + b];
                if av == 0.0 {
                    continue;
                }
                for wp in 0..wr {
                    for bp in 0..dr {
                        out[(b * wr + wp) * dr + bp] += av * t2[((x * 2 + s) * wr + wp) * dr + bp];
                    }
                }
            }
        }
    }
    Env { a: dr, w: wr, t: out }
}

fn update_right(env: &Env, a: &Site, m: &OpenMpoSite) -> Env {
    let (dl, dr, wl, wr) = (a.dl, a.dr, m.left, m.right);
    // t1(a', s', w', b) = Σ_{b'} A(a',s',b') R(b,w',b')
    let mut t1 = vec![0.0; dl * 2 * wr * dr];
    for xp in 0..dl {
        for sp in 0..2 {
            for bp in 0..dr {
                let av = a.t[(xp * 2 + sp) * dr + bp];
                if av == 0.0 {
                    continue;
                }
                for b in 0..dr {
                    for wp in 0..wr {
                        t1[((xp * 2 + sp) * wr + wp) * dr + b] += av * env.at(b, wp, bp);
                    }
                }
            }
        }
    }
    // t2(a', s, w, b) = Σ_{s',w'} M(w,s,s',w') t1(a',s',w',b)
    let mut t2 = vec![0.0; dl * 2 * wl * dr];
    for xp in 0..dl {
        for w in 0..wl {
            for s in 0..2 {
                for sp in 0..2 {
                    for wp in 0..wr {
                        let mv = m.get(w, s, sp, wp);
                        if mv == 0.0 {
                            continue;
                        }
                        for b in 0..dr {
                            t2[((xp * 2 + s) * wl + w) * dr + b] += mv * t1[((xp * 2 + sp) * wr + wp) * dr + b];
                        }
                    }
                }
            }
        }
    }
    // R'(a, w, a') = Σ_{s,b} A(a,s,b) t2(a',s,w,b)
    let mut out = vec![0.0; dl * wl * dl];
    for x in 0..dl {
        for s in 0..2 {
            for b in 0..dr {
                let av = a.t[(x * 2 + s) * dr + b];
                if av == 0.0 {
                    continue;
                }
                for w in 0..wl {
                    for xp in 0..dl {
                        out[(x * wl + w) * dl + xp] += av * t2[((xp * 2 + s) * wl + w) * dr + b];
                    }
                }
            }
        }
    }
    Env { a: dl, w: wl, t: out }
}

/// y = H_eff x for the two-site block (a, s1, s2, b).
fn apply_two_site(le: &Env, m1: &OpenMpoSite, m2: &OpenMpoSite, re: &Env, dl: usize, dr: usize, x: &[f64]) -> Vec<f64> {
    let (wl, wm, wr) = (m1.left, m1.right, m2.right);
    // t1(a, w, s1', s2', b') = Σ_{a'} L(a,w,a') x(a',s1',s2',b')
    let blk = 4 * dr;
    let mut t1 = vec![0.0; dl * wl * blk];
    for a in 0..dl {
        for w in 0..wl {
            let dst = &mut t1[(a * wl + w) * blk..(a * wl + w + 1) * blk];
            for ap in 0..dl {
                let l = le.at(a, w, ap);
                if l == 0.0 {
                    continue;
                }
                let src = &x[ap * blk..(ap + 1) * blk];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += l * s);
            }
        }
    }
    // t2(a, s1, w1, s2', b') = Σ_{w,s1'} M1(w,s1,s1',w1) t1(a,w,s1',s2',b')
    let mut t2 = vec![0.0; dl * 2 * wm * 2 * dr];
    for a in 0..dl {
        for w in 0..wl {
            for s1 in 0..2 {
                for s1p in 0..2 {
                    for w1 in 0..wm {
                        let mv = m1.get(w, s1, s1p, w1);
                        if mv == 0.0 {
                            continue;
                        }
                        let src = &t1[((a * wl + w) * 2 + s1p) * 2 * dr..((a * wl + w) * 2 + s1p + 1) * 2 * dr];
                        let off = ((a * 2 + s1) * wm + w1) * 2 * dr;
                        t2[off..off + 2 * dr].iter_mut().zip(src).for_each(|(d, s)| *d += mv * s);
                    }
                }
            }
        }
    }
    // t3(a, s1, s2, w2, b') = Σ_{w1,s2'} M2(w1,s2,s2',w2) t2(a,s1,w1,s2',b')
    let mut t3 = vec![0.0; dl * 4 * wr * dr];
    for a in 0..dl {
        for s1 in 0..2 {
            for w1 in 0..wm {
                for s2 in 0..2 {
                    for s2p in 0..2 {
                        for w2 in 0..wr {
                            let mv = m2.get(w1, s2, s2p, w2);
                            if mv == 0.0 {
                                continue;
                            }
                            let so = (((a * 2 + s1) * wm + w1) * 2 + s2p) * dr;
                            let off = (((a * 2 + s1) * 2 + s2) * wr + w2) * dr;
                            for bp in 0..dr {
                                t3[off + bp] += mv * t2[so + bp];
                            }
                        }
                    }
                }
            }
        }
    }
    // y(a, s1, s2, b) = Σ_{w2,b'} R(b,w2,b') t3(a,s1,s2,w2,b')
    let mut y = vec![0.0; dl * 4 * dr];
    for idx in 0..dl * 4 {
        for b in 0..dr {
            let mut acc = 0.0;
            for w2 in 0..wr {
                let src = &t3[(idx * wr + w2) * dr..(idx * wr + w2 + 1) * dr];
                for (bp, s) in src.iter().enumerate() {
                    acc += re.at(b, w2, bp) * s;
                }
            }
            y[idx * dr + b] = acc;
        }
    }
    y
}

struct Split {
    left: Site,
    right: Site,
}

/// SVD split of θ(a s1, s2 b); singular values go to the right tensor if `to_right`.
fn split(theta: &[f64], dl: usize, dr: usize, chi: usize, to_right: bool) -> Split {
    let m = DMatrix::from_row_slice(dl * 2, 2 * dr, theta);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let smax = svd.singular_values[order[0]].max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = order.into_iter().take(chi).filter(|&k| svd.singular_values[k] > 1e-14 * smax).collect();
    let k = keep.len().max(1);
    let mut lt = vec![0.0; dl * 2 * k];
    let mut rt = vec![0.0; k * 2 * dr];
    for (col, &ki) in keep.iter().enumerate() {
        let s = svd.singular_values[ki];
        let (sl, sr) = if to_right { (1.0, s) } else { (s, 1.0) };
        for row in 0..dl * 2 {
            lt[row * k + col] = u[(row, ki)] * sl;
        }
        for j in 0..2 * dr {
            rt[col * 2 * dr + j] = vt[(ki, j)] * sr;
        }
    }
    Split { left: Site { dl, dr: k, t: lt }, right: Site { dl: k, dr, t: rt } }
}

fn merge(a: &Site, b: &Site) -> Vec<f64> {
    let mut th = vec![0.0; a.dl * 4 * b.dr];
    for x in 0..a.dl {
        for s1 in 0..2 {
            for m in 0..a.dr {
                let av = a.t[(x * 2 + s1) * a.dr + m];
                if av == 0.0 {
                    continue;
                }
                for s2 in 0..2 {
                    for y in 0..b.dr {
                        th[((x * 2 + s1) * 2 + s2) * b.dr + y] += av * b.t[(m * 2 + s2) * b.dr + y];
                    }
                }
            }
        }
    }
    th
}

fn random_mps(l: usize, chi: usize, seed: u64) -> Vec<Site> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bond = |k: usize| -> usize {
        let e = k.min(l - k);
        if e >= 20 {
            chi
        } else {
            (1usize << e).min(chi)
        }
    };
    let mut sites: Vec<Site> = (0..l)
        .map(|k| {
            let (dl, dr) = (bond(k), bond(k + 1));
            Site { dl, dr, t: (0..dl * 2 * dr).map(|_| rng.gen::<f64>() + 0.1).collect() }
        })
        .collect();
    // Right-canonicalize.
    for k in (1..l).rev() {
        let s = &sites[k];
        let m = DMatrix::from_row_slice(s.dl, 2 * s.dr, &s.t);
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let r = svd.singular_values.len();
        let mut nt = vec![0.0; r * 2 * s.dr];
        for i in 0..r {
            for j in 0..2 * s.dr {
                nt[i * 2 * s.dr + j] = vt[(i, j)];
            }
        }
        let us = &u * DMatrix::from_diagonal(&svd.singular_values);
        let prev = &sites[k - 1];
        let mut pt = vec![0.0; prev.dl * 2 * r];
        for row in 0..prev.dl * 2 {
            for i in 0..r {
                let mut acc = 0.0;
                for m2 in 0..prev.dr {
                    acc += prev.t[row * prev.dr + m2] * us[(m2, i)];
                }
                pt[row * r + i] = acc;
            }
        }
        let pdl = prev.dl;
        sites[k - 1] = Site { dl: pdl, dr: r, t: pt };
        let sdr = sites[k].dr;
        sites[k] = Site { dl: r, dr: sdr, t: nt };
    }
    let n: f64 = sites[0].t.iter().map(|x| x * x).sum::<f64>().sqrt();
    sites[0].t.iter_mut().for_each(|x| *x /= n);
    sites
}

fn site_diag_expectations(sites: &[Site], diag: [f64; 2]) -> Vec<f64> {
    let l = sites.len();
    // Left norm environments E_k(a, a') over sites < k.
    let mut lefts = vec![DMatrix::<f64>::from_element(1, 1, 1.0)];
    for s in sites.iter() {
        lefts.push(transfer(lefts.last().expect("seeded"), s, [1.0, 1.0]));
    }
    let mut rights = vec![DMatrix::<f64>::from_element(1, 1, 1.0); l + 1];
    for k in (0..l).rev() {
        rights[k] = transfer_back(&rights[k + 1], &sites[k], [1.0, 1.0]);
    }
    let norm = lefts[l][(0, 0)];
    (0..l)
        .map(|k| {
            let e = transfer(&lefts[k], &sites[k], diag);
            (e.component_mul(&rights[k + 1])).sum() / norm
        })
        .collect()
}

fn transfer(e: &DMatrix<f64>, s: &Site, diag: [f64; 2]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(s.dr, s.dr);
    for a in 0..s.dl {
        for ap in 0..s.dl {
            let ev = e[(a, ap)];
            if ev == 0.0 {
                continue;
            }
            for sp in 0..2 {
                for b in 0..s.dr {
                    let x = ev * diag[sp] * s.t[(a * 2 + sp) * s.dr + b];
                    for bp in 0..s.dr {
                        out[(b, bp)] += x * s.t[(ap * 2 + sp) * s.dr + bp];
                    }
                }
            }
        }
    }
    out
}

fn transfer_back(e: &DMatrix<f64>, s: &Site, diag: [f64; 2]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(s.dl, s.dl);
    for a in 0..s.dl {
        for ap in 0..s.dl {
            let mut acc = 0.0;
            for sp in 0..2 {
                for b in 0..s.dr {
                    let x = diag[sp] * s.t[(a * 2 + sp) * s.dr + b];
                    if x == 0.0 {
                        continue;
                    }
                    for bp in 0..s.dr {
                        acc += x * e[(b, bp)] * s.t[(ap * 2 + sp) * s.dr + bp];
                    }
                }
            }
            out[(a, ap)] = acc;
        }
    }
    out
}

fn expectation(sites: &[Site], mpo: &[OpenMpoSite]) -> f64 {
    let mut e = Env::unit();
    for (s, m) in sites.iter().zip(mpo) {
        e = update_left(&e, s, m);
    }
    let num = e.t[0];
    let mut n = DMatrix::<f64>::from_element(1, 1, 1.0);
    for s in sites {
        n = transfer(&n, s, [1.0, 1.0]);
    }
    num / n[(0, 0)]
}

/// Maximize ⟨Φ|Û†Û|Φ⟩/⟨Φ|Φ⟩ over open MPS of bond dimension ≤ χ.
pub fn dmrg_run(mpo: &TransferMPO, l: usize, chi: usize, sweeps: usize, tol: f64, seed: u64) -> Result<DmrgOutcome, DmrgError> {
    if chi < 2 {
        return Err(DmrgError::InvalidArgument(format!("chi must be >= 2, got {chi}")));
    }
    if l < 2 || l % 2 == 1 {
        return Err(DmrgError::InvalidArgument(format!("L must be even and >= 2, got {l}")));
    }
    if sweeps == 0 {
        return Err(DmrgError::InvalidArgument("sweeps must be positive".into()));
    }
    let ops = mpo.open_chain(l);
    let mut sites = random_mps(l, chi, seed);
    let mut rights = vec![Env::unit(); l + 1];
    for k in (1..l).rev() {
        rights[k] = update_right(&rights[k + 1], &sites[k], &ops[k]);
    }
    let mut lefts = vec![Env::unit(); l + 1];
    let mut sweep_values = Vec::new();
    let mut last = f64::NAN;
    let mut rel_change = f64::INFINITY;
    let mut done = 0;
    for _ in 0..sweeps {
        let mut value = 0.0;
        for k in 0..l - 1 {
            value = local_solve(&mut sites, &ops, &lefts[k], &rights[k + 2], k, chi, false);
            lefts[k + 1] = update_left(&lefts[k], &sites[k], &ops[k]);
        }
        for k in (0..l - 1).rev() {
            value = local_solve(&mut sites, &ops, &lefts[k], &rights[k + 2], k, chi, true);
            rights[k + 1] = update_right(&rights[k + 2], &sites[k + 1], &ops[k + 1]);
        }
        done += 1;
        sweep_values.push(value);
        if last.is_finite() {
            rel_change = ((value - last) / value.abs().max(1e-300)).abs();
            if rel_change <= tol {
                break;
            }
        }
        last = value;
    }
    if rel_change > tol {
        return Err(DmrgError::NoConvergence { sweeps: done, rel_change });
    }
    let lambda_sq = expectation(&sites, &ops);
    let zs = site_diag_expectations(&sites, [-1.0, 1.0]);
    let inner: Vec<f64> = if l > 2 { zs[1..l - 1].to_vec() } else { zs.clone() };
    let magnetization = inner.iter().sum::<f64>() / inner.len() as f64;
    let monotone = sweep_values.windows(2).all(|p| p[1] >= p[0] - 1e-12 * p[0].abs().max(1e-300));
    let bond_dims = sites.iter().map(|s| s.dr).collect();
    Ok(DmrgOutcome { lambda_sq, magnetization, site_magnetization: zs, sweep_values, monotone, bond_dims, sweeps_done: done, tensors: sites })
}

fn local_solve(sites: &mut [Site], ops: &[OpenMpoSite], le: &Env, re: &Env, k: usize, chi: usize, moving_left: bool) -> f64 {
    let (dl, dr) = (sites[k].dl, sites[k + 1].dr);
    let theta = merge(&sites[k], &sites[k + 1]);
    let apply = |x: &[f64]| apply_two_site(le, &ops[k], &ops[k + 1], re, dl, dr, x);
    let start = if theta.iter().all(|x| *x == 0.0) { vec![1.0; theta.len()] } else { theta };
    let (val, vec) = lanczos_largest(&apply, &start, 40, 1e-13, 30);
    let sp = split(&vec, dl, dr, chi, !moving_left);
    sites[k] = sp.left;
    sites[k + 1] = sp.right;
    val
}

/// DMRG wrapped as a [`VariationalResult`].
pub fn dmrg_maximize(mpo: &TransferMPO, l: usize, chi: usize, sweeps: usize, tol: f64, seed: u64) -> Result<VariationalResult, DmrgError> {
    let out = dmrg_run(mpo, l, chi, sweeps, tol, seed)?;
    Ok(VariationalResult {
        lambda_sq: out.lambda_sq,
        magnetization: out.magnetization,
        converged: true,
        iterations: out.sweeps_done,
        coexistence: false,
        optimum: Optimum::Mps { chi, bond_dims: out.bond_dims.clone(), tensors: out.tensors.iter().map(|s| s.t.clone()).collect() },
    })
}
