//! Spin-1 XY chains with non-Hermitian driving, stochastic projection trajectories and the
//! deformed PXP scar tower.
//!
//! Spin-1 local basis is `(+, 0, −)` = `(0, 1, 2)`, spin-1/2 local basis is `(↑, ↓)` = `(0, 1)`,
//! site 0 most significant.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, c, CMatrix, CVector, EigenPair, LinalgError, LinearOperator, SparseMatrix};

/// Largest chain length accepted by the sparse Hamiltonian builder.
pub const MAX_ED_L: usize = 12;
pub const MAX_STEADY_L: usize = 10;
pub const MAX_SPECTRUM_L: usize = 8;
pub const MAX_GIBBS_L: usize = 6;
pub const MAX_TRAJECTORY_L: usize = 10;

const ANNIHILATED_NORM: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("chain length {l} exceeds the limit {max} for this operation")]
    SizeTooLarge { l: usize, max: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("scar index {n} out of range for L = {l}")]
    OutOfRange { n: usize, l: usize },
    #[error("chain length {0} must be even")]
    OddL(usize),
    #[error("every trajectory was annihilated after {attempts} attempts")]
    AllTrajectoriesAnnihilated { attempts: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    Open,
    #[default]
    Periodic,
}

/// Form of the nearest-neighbour XY coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum XyCoupling {
    /// SˣSˣ + SʸSʸ.
    #[default]
    Standard,
    /// SˣSʸ + SʸSʸ.
    Skewed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinOneXYParams {
    pub j: f64,
    pub h: f64,
    pub d: f64,
    pub v: Complex64,
    pub g: f64,
    pub l: usize,
    pub boundary: Boundary,
    pub coupling: XyCoupling,
}

impl SpinOneXYParams {
    /// All couplings zero, periodic boundary, standard coupling.
    pub fn new(l: usize) -> Self {
        SpinOneXYParams {
            j: 0.0,
            h: 0.0,
            d: 0.0,
            v: c(0.0, 0.0),
            g: 0.0,
            l,
            boundary: Boundary::Periodic,
            coupling: XyCoupling::Standard,
        }
    }

    /// J = h = D = 1 with the given V and g.
    pub fn uniform(l: usize, v: Complex64, g: f64) -> Self {
        SpinOneXYParams { j: 1.0, h: 1.0, d: 1.0, v, g, ..Self::new(l) }
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        if self.l < 2 {
            return Err(SpinError::InvalidParams(format!("L = {} < 2", self.l)));
        }
        let finite = [self.j, self.h, self.d, self.v.re, self.v.im, self.g].iter().all(|x| x.is_finite());
        if !finite {
            return Err(SpinError::InvalidParams("non-finite coupling".into()));
        }
        if self.g < 0.0 {
            return Err(SpinError::InvalidParams(format!("g = {} < 0", self.g)));
        }
        Ok(())
    }

    pub fn bonds(&self) -> Vec<(usize, usize)> {
        bonds(self.l, self.boundary)
    }
}

/// Which pieces of H = H₀ + H_NH + V to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub h0: bool,
    pub nh: bool,
    pub v: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { h0: true, nh: true, v: true };
    pub const H0: Terms = Terms { h0: true, nh: false, v: false };
    pub const CLEAN: Terms = Terms { h0: true, nh: true, v: false };
}

/// Nearest-neighbour bonds; periodic chains include (L−1, 0).
pub fn bonds(l: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<_> = (0..l.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && l >= 2 {
        b.push((l - 1, 0));
    }
    b
}

/// Spin-1 matrices in the (+, 0, −) basis.
#[derive(Clone, Debug)]
pub struct SpinOneOps {
    pub sz: CMatrix,
    pub sp: CMatrix,
    pub sm: CMatrix,
    pub sx: CMatrix,
    pub sy: CMatrix,
}

pub fn spin_one() -> SpinOneOps {
    let mut sz = CMatrix::zeros(3, 3);
    sz[(0, 0)] = c(1.0, 0.0);
    sz[(2, 2)] = c(-1.0, 0.0);
    let mut sp = CMatrix::zeros(3, 3);
    sp[(0, 1)] = c(SQRT_2, 0.0);
    sp[(1, 2)] = c(SQRT_2, 0.0);
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * c(0.5, 0.0);
    let sy = (&sp - &sm) * c(0.0, -0.5);
    SpinOneOps { sz, sp, sm, sx, sy }
}

fn basis_projector(d: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(k, k)] = c(1.0, 0.0);
    m
}

/// Two-site XY coupling matrix (9×9, first site most significant).
pub fn xy_bond(coupling: XyCoupling) -> CMatrix {
    let s = spin_one();
    match coupling {
        XyCoupling::Standard => s.sx.kronecker(&s.sx) + s.sy.kronecker(&s.sy),
        XyCoupling::Skewed => s.sx.kronecker(&s.sy) + s.sy.kronecker(&s.sy),
    }
}

/// Single-site part h Sᶻ + D (Sᶻ)² + V Sˣ.
fn onsite(p: &SpinOneXYParams, terms: Terms) -> CMatrix {
    let s = spin_one();
    let mut m = CMatrix::zeros(3, 3);
    if terms.h0 {
        m += &s.sz * c(p.h, 0.0) + &s.sz * &s.sz * c(p.d, 0.0);
    }
    if terms.v {
        m += &s.sx * p.v;
    }
    m
}

fn push_local(
    trip: &mut Vec<(usize, usize, Complex64)>,
    d: usize,
    l: usize,
    sites: &[usize],
    op: &CMatrix,
) {
    let dim = d.pow(l as u32);
    let st = linalg::strides(&vec![d; l]);
    let k = sites.len();
    let lst = linalg::strides(&vec![d; k]);
    for s in 0..dim {
        let col: usize = sites.iter().enumerate().map(|(p, &x)| ((s / st[x]) % d) * lst[p]).sum();
        let base = s - sites.iter().map(|&x| ((s / st[x]) % d) * st[x]).sum::<usize>();
        for row in 0..op.nrows() {
            let v = op[(row, col)];
            if v == c(0.0, 0.0) {
                continue;
            }
            let t = base + (0..k).map(|p| ((row / lst[p]) % d) * st[sites[p]]).sum::<usize>();
            trip.push((t, s, v));
        }
    }
}

/// Embed a local operator acting on `sites` (in the order given) of an L-site chain with local
/// dimension `d`.
pub fn embed(d: usize, l: usize, sites: &[usize], op: &CMatrix) -> SparseMatrix {
    let mut trip = Vec::new();
    push_local(&mut trip, d, l, sites, op);
    SparseMatrix::from_triplets(d.pow(l as u32), &trip)
}

pub fn build_xy_hamiltonian(p: &SpinOneXYParams, terms: Terms) -> Result<SparseMatrix, SpinError> {
    p.validate()?;
    if p.l > MAX_ED_L {
        return Err(SpinError::SizeTooLarge { l: p.l, max: MAX_ED_L });
    }
    let l = p.l;
    let mut trip = Vec::new();
    if terms.h0 && p.j != 0.0 {
        let bond = xy_bond(p.coupling) * c(p.j, 0.0);
        for (a, b) in p.bonds() {
            push_local(&mut trip, 3, l, &[a, b], &bond);
        }
    }
    let mut site = onsite(p, terms);
    if terms.nh {
        site += basis_projector(3, 1) * c(0.0, -p.g);
    }
    if site.iter().any(|z| *z != c(0.0, 0.0)) {
        for i in 0..l {
            push_local(&mut trip, 3, l, &[i], &site);
        }
    }
    Ok(SparseMatrix::from_triplets(3usize.pow(l as u32), &trip))
}

fn zero_count(mut s: usize, l: usize) -> usize {
    let mut n = 0;
    for _ in 0..l {
        if s % 3 == 1 {
            n += 1;
        }
        s /= 3;
    }
    n
}

/// Ô = L⁻¹ Σᵢ (Sᶻᵢ)².
pub fn order_parameter(l: usize) -> SparseMatrix {
    let dim = 3usize.pow(l as u32);
    let trip: Vec<_> = (0..dim)
        .map(|s| (s, s, c(1.0 - zero_count(s, l) as f64 / l as f64, 0.0)))
        .collect();
    SparseMatrix::from_triplets(dim, &trip)
}

/// P̂ᵢ = |0⟩⟨0|ᵢ.
pub fn site_projector(l: usize, i: usize) -> SparseMatrix {
    embed(3, l, &[i], &basis_projector(3, 1))
}

/// Local 9×9 matrix of ½(|+−⟩ + |−+⟩)(⟨+−| + ⟨−+|).
pub fn bond_projector_local() -> CMatrix {
    let mut v = CVector::zeros(9);
    v[2] = c(1.0 / SQRT_2, 0.0);
    v[6] = c(1.0 / SQRT_2, 0.0);
    &v * v.adjoint()
}

pub fn bond_projector(l: usize, i: usize, j: usize) -> SparseMatrix {
    embed(3, l, &[i, j], &bond_projector_local())
}

/// Re ⟨ψ|A|ψ⟩ / ⟨ψ|ψ⟩.
pub fn expectation(op: &SparseMatrix, v: &CVector) -> f64 {
    op.expectation(v).re
}

/// Normalized Σ_{|A|=n} Π_{i∈A} sᵢ · ⊗ᵢ (a if i ∈ A else b), with sᵢ = (−1)^(i+1) for
/// 0-based i. Amplitudes come from the xⁿ coefficient of Πᵢ (bᵢ + sᵢ aᵢ x).
fn alternating_tower(n: usize, l: usize, d: usize, a: &[f64], b: &[f64]) -> CVector {
    let dim = d.pow(l as u32);
    let mut v = CVector::zeros(dim);
    let mut poly = vec![0.0; l + 1];
    for s in 0..dim {
        poly.iter_mut().for_each(|x| *x = 0.0);
        poly[0] = 1.0;
        let mut deg = 0;
        let mut rest = s;
        for i in (0..l).rev() {
            let k = rest % d;
            rest /= d;
            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
            let (bk, ak) = (b[k], sign * a[k]);
            for m in (0..=deg + 1).rev() {
                let lower = if m > 0 { poly[m - 1] } else { 0.0 };
                poly[m] = poly[m] * bk + lower * ak;
            }
            deg += 1;
        }
        v[s] = c(poly[n], 0.0);
    }
    let nv = v.norm();
    if nv > 0.0 {
        v /= c(nv, 0.0);
    }
    v
}

/// |S_n⟩ ∝ (Σᵢ (−1)ⁱ (Sᵢ⁺)²)ⁿ |−…−⟩ with 1-based i.
pub fn scar_state(n: usize, l: usize) -> Result<CVector, SpinError> {
    if n > l {
        return Err(SpinError::OutOfRange { n, l });
    }
    if l > MAX_ED_L {
        return Err(SpinError::SizeTooLarge { l, max: MAX_ED_L });
    }
    Ok(alternating_tower(n, l, 3, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]))
}

/// ⊗ (|+⟩ + |−⟩)/√2 on even 0-based sites and (|+⟩ − |−⟩)/√2 on odd ones.
pub fn af_state(l: usize) -> Result<CVector, SpinError> {
    if l % 2 == 1 {
        return Err(SpinError::OddL(l));
    }
    if l > MAX_ED_L {
        return Err(SpinError::SizeTooLarge { l, max: MAX_ED_L });
    }
    let r = 1.0 / SQRT_2;
    let factors: Vec<CMatrix> = (0..l)
        .map(|i| {
            let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
            CMatrix::from_column_slice(3, 1, &[c(r, 0.0), c(0.0, 0.0), c(sgn * r, 0.0)])
        })
        .collect();
    Ok(linalg::kron_all(&factors).column(0).into_owned())
}

/// Orthonormal basis of `vectors`' span by modified Gram–Schmidt, dropping directions whose
/// remaining norm falls below `tol` times the original.
pub fn orthonormalize(vectors: &[CVector], tol: f64) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::new();
    for v in vectors {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let p = q.dotc(&w);
                w -= q * p;
            }
        }
        let nw = w.norm();
        if nw > tol * n0 {
            out.push(w / c(nw, 0.0));
        }
    }
    out
}

/// ‖ψ − Πψ‖/‖ψ‖ for Π the orthogonal projector onto span(basis) (basis orthonormal).
pub fn span_residual(basis: &[CVector], v: &CVector) -> f64 {
    let mut w = v.clone();
    for q in basis {
        let p = q.dotc(&w);
        w -= q * p;
    }
    w.norm() / v.norm()
}

// ---------------------------------------------------------------------------------------------
// Translation sectors

/// Momentum basis of one sector: columns (1/√p) Σ_{j<p} e^{−ikj} T^j |r⟩.
#[derive(Clone, Debug)]
struct Sector {
    k: usize,
    reps: Vec<usize>,
    periods: Vec<usize>,
}

/// Site i moves to site i+1 (mod L).
fn translate(s: usize, d: usize, l: usize) -> usize {
    let last = s % d;
    s / d + last * d.pow(l as u32 - 1)
}

fn momentum_sectors(d: usize, l: usize) -> Vec<Sector> {
    let dim = d.pow(l as u32);
    let mut seen = vec![false; dim];
    let mut orbits = Vec::new();
    for s in 0..dim {
        if seen[s] {
            continue;
        }
        let mut t = s;
        let mut p = 0;
        loop {
            seen[t] = true;
            p += 1;
            t = translate(t, d, l);
            if t == s {
                break;
            }
        }
        orbits.push((s, p));
    }
    (0..l)
        .map(|k| {
            let (reps, periods) = orbits.iter().filter(|&&(_, p)| (k * p) % l == 0).cloned().unzip();
            Sector { k, reps, periods }
        })
        .collect()
}

fn phase(k: usize, j: usize, l: usize) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * (k * j) as f64 / l as f64)
}

fn sector_block(cols: &[Vec<(usize, Complex64)>], sec: &Sector, d: usize, l: usize) -> CMatrix {
    let n = sec.reps.len();
    let index: HashMap<usize, usize> = sec.reps.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut m = CMatrix::zeros(n, n);
    for (col, (&r, &p)) in sec.reps.iter().zip(&sec.periods).enumerate() {
        let norm = 1.0 / (p as f64).sqrt();
        let mut s = r;
        for j in 0..p {
            let coef = phase(sec.k, j, l) * norm;
            for &(row, v) in &cols[s] {
                if let Some(&rc) = index.get(&row) {
                    m[(rc, col)] += coef * v * (sec.periods[rc] as f64).sqrt();
                }
            }
            s = translate(s, d, l);
        }
    }
    m
}

fn sector_lift(w: &CVector, sec: &Sector, d: usize, l: usize) -> CVector {
    let mut v = CVector::zeros(d.pow(l as u32));
    for (col, (&r, &p)) in sec.reps.iter().zip(&sec.periods).enumerate() {
        let norm = 1.0 / (p as f64).sqrt();
        let mut s = r;
        for j in 0..p {
            v[s] += w[col] * phase(sec.k, j, l) * norm;
            s = translate(s, d, l);
        }
    }
    v
}

/// Dense blocks of H: one per momentum sector on periodic chains, the full matrix otherwise.
struct Blocks {
    mats: Vec<CMatrix>,
    sectors: Option<Vec<Sector>>,
    l: usize,
}

impl Blocks {
    fn new(h: &SparseMatrix, p: &SpinOneXYParams) -> Self {
        if p.boundary == Boundary::Open {
            return Blocks { mats: vec![h.dense()], sectors: None, l: p.l };
        }
        let dim = h.dim();
        let mut cols: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (i, j, v) in h.triplets() {
            cols[j].push((i, v));
        }
        let sectors = momentum_sectors(3, p.l);
        let mats = sectors.iter().map(|s| sector_block(&cols, s, 3, p.l)).collect();
        Blocks { mats, sectors: Some(sectors), l: p.l }
    }

    fn lift(&self, b: usize, w: &CVector) -> CVector {
        match &self.sectors {
            Some(s) => sector_lift(w, &s[b], 3, self.l),
            None => w.clone(),
        }
    }
}

/// All eigenvalues of H (dense, by translation sector on periodic chains).
pub fn xy_spectrum(p: &SpinOneXYParams) -> Result<Vec<Complex64>, SpinError> {
    let h = build_xy_hamiltonian(p, Terms::ALL)?;
    let blocks = Blocks::new(&h, p);
    Ok(blocks.mats.iter().flat_map(linalg::dense_eigenvalues).collect())
}

fn null_space(a: &CMatrix, lam: Complex64, thresh: f64) -> Vec<CVector> {
    let n = a.nrows();
    let shifted = a - CMatrix::identity(n, n) * lam;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thresh)
        .map(|(i, _)| vt.row(i).adjoint())
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct SteadyOptions {
    /// Eigenvalues within this distance of the largest Im E form the steady cluster.
    pub cluster_tol: f64,
    pub seed: u64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions { cluster_tol: 1e-9, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    /// Normalized right eigenvector (or projection onto the degenerate steady span).
    pub pair: EigenPair,
    pub o_expect: f64,
    pub pxy_expect: f64,
    /// Dimension of the steady eigenspace.
    pub rank: usize,
    pub cluster: Vec<Complex64>,
}

pub fn steady_state(p: &SpinOneXYParams, opts: &SteadyOptions) -> Result<SteadyState, SpinError> {
    p.validate()?;
    if p.l > MAX_STEADY_L {
        return Err(SpinError::SizeTooLarge { l: p.l, max: MAX_STEADY_L });
    }
    let h = build_xy_hamiltonian(p, Terms::ALL)?;
    let blocks = Blocks::new(&h, p);
    let values: Vec<Vec<Complex64>> = blocks.mats.iter().map(linalg::dense_eigenvalues).collect();
    let top = values.iter().flatten().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    let scale = values.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
    let mut cluster = Vec::new();
    let mut span = Vec::new();
    let near = 1e-8 * scale;
    for (b, vals) in values.iter().enumerate() {
        if !vals.iter().any(|z| z.im >= top - opts.cluster_tol) {
            continue;
        }
        let eig = linalg::dense_eigen(&blocks.mats[b]);
        let members: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k].im >= top - opts.cluster_tol).collect();
        let mut local = Vec::new();
        let mut grouped: Vec<Complex64> = Vec::new();
        for &k in &members {
            let z = eig.values[k];
            cluster.push(z);
            let isolated = eig.values.iter().enumerate().all(|(j, w)| j == k || (w - z).norm() > near);
            if isolated {
                local.push(eig.vectors.column(k).into_owned());
            } else if !grouped.iter().any(|g| (g - z).norm() <= near) {
                // Back substitution is unreliable on coincident eigenvalues.
                grouped.push(z);
                local.extend(null_space(&blocks.mats[b], z, 1e-8 * scale));
            }
        }
        for w in orthonormalize(&local, 1e-8) {
            span.push(blocks.lift(b, &w));
        }
    }
    let span = orthonormalize(&span, 1e-8);
    if span.is_empty() {
        return Err(SpinError::Linalg(LinalgError::NoConvergence { iterations: 0, best_residual: f64::NAN }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = linalg::random_vector(h.dim(), &mut rng);
    let mut v = CVector::zeros(h.dim());
    for q in &span {
        v += q * q.dotc(&r);
    }
    let nv = v.norm();
    v /= c(nv, 0.0);
    let value = h.expectation(&v);
    let residual = linalg::residual(&h, value, &v);
    let o_expect = expectation(&order_parameter(p.l), &v);
    let bds = p.bonds();
    let pxy_expect =
        bds.iter().map(|&(a, b)| expectation(&bond_projector(p.l, a, b), &v)).sum::<f64>() / bds.len() as f64;
    cluster.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
    Ok(SteadyState { pair: EigenPair { value, vector: v, residual }, o_expect, pxy_expect, rank: span.len(), cluster })
}

#[derive(Clone, Debug)]
pub struct SpectrumRow {
    pub g: f64,
    /// Top-k eigenvalues by Im E, descending.
    pub values: Vec<Complex64>,
}

pub fn spectrum_scan(p: &SpinOneXYParams, g_list: &[f64], k: usize) -> Result<Vec<SpectrumRow>, SpinError> {
    if p.l > MAX_SPECTRUM_L {
        return Err(SpinError::SizeTooLarge { l: p.l, max: MAX_SPECTRUM_L });
    }
    let dim = 3usize.pow(p.l as u32);
    if k > dim {
        return Err(SpinError::InvalidParams(format!("k = {k} exceeds the dimension {dim}")));
    }
    g_list
        .iter()
        .map(|&g| {
            let q = SpinOneXYParams { g, ..p.clone() };
            let mut vals = xy_spectrum(&q)?;
            vals.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
            vals.truncate(k);
            Ok(SpectrumRow { g, values: vals })
        })
        .collect()
}

/// tr(e^{−βH} Ô) / tr(e^{−βH}) for the Hermitian chain (real V, g = 0).
pub fn gibbs_order_parameter(p: &SpinOneXYParams, beta: f64) -> Result<f64, SpinError> {
    p.validate()?;
    if p.l > MAX_GIBBS_L {
        return Err(SpinError::SizeTooLarge { l: p.l, max: MAX_GIBBS_L });
    }
    if p.v.im != 0.0 || p.g != 0.0 {
        return Err(SpinError::InvalidParams("Gibbs state needs real V and g = 0".into()));
    }
    if !beta.is_finite() {
        return Err(SpinError::InvalidParams("beta must be finite".into()));
    }
    let h = build_xy_hamiltonian(p, Terms::ALL)?.dense();
    let eig = h.symmetric_eigen();
    let o = order_parameter(p.l);
    let odiag: Vec<f64> = (0..o.dim()).map(|s| 1.0 - zero_count(s, p.l) as f64 / p.l as f64).collect();
    let shift = eig.eigenvalues.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (n, &e) in eig.eigenvalues.iter().enumerate() {
        let w = (-beta * e - shift).exp();
        let col = eig.eigenvectors.column(n);
        let on: f64 = col.iter().zip(&odiag).map(|(z, o)| z.norm_sqr() * o).sum();
        num += w * on;
        den += w;
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------------------------
// Trajectories

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasurementScheme {
    /// Each gate application is replaced by 1 − P̂ on one of its two sites with probability p.
    GateReplacement { p: f64 },
    /// Projections arrive as a Poisson process with the given rate per site.
    Poisson { rate: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct TrajectoryOptions {
    pub scheme: MeasurementScheme,
    pub t_final: f64,
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Give up after this many annihilated restarts per requested trajectory.
    pub max_restarts: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            scheme: MeasurementScheme::GateReplacement { p: 0.0 },
            t_final: 10.0,
            dt: 0.05,
            n_traj: 1,
            seed: 1,
            max_restarts: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub o_values: Vec<f64>,
    pub projection_events: Vec<(f64, usize)>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub records: Vec<TrajectoryRecord>,
    pub times: Vec<f64>,
    pub mean_o: Vec<f64>,
    pub annihilated: usize,
}

/// Counter-based seed derivation (splitmix64 finalizer).
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Two-site Hermitian ĥ for every bond; on-site terms are shared evenly among the bonds that
/// touch a site so that Σ ĥ = H₀ + V.
pub fn bond_terms(p: &SpinOneXYParams) -> Vec<((usize, usize), CMatrix)> {
    let bds = p.bonds();
    let mut count = vec![0usize; p.l];
    for &(a, b) in &bds {
        count[a] += 1;
        count[b] += 1;
    }
    let site = onsite(p, Terms { h0: true, nh: false, v: true });
    let id = CMatrix::identity(3, 3);
    let xy = xy_bond(p.coupling) * c(p.j, 0.0);
    bds.iter()
        .map(|&(a, b)| {
            let wa = c(1.0 / count[a] as f64, 0.0);
            let wb = c(1.0 / count[b] as f64, 0.0);
            let m = &xy + site.kronecker(&id) * wa + id.kronecker(&site) * wb;
            ((a, b), m)
        })
        .collect()
}

fn hermitian_exp(h: &CMatrix, tau: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -tau * e)));
    q * d * q.adjoint()
}

/// Bonds grouped into layers of mutually disjoint bonds.
fn layers(bonds: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut used: Vec<Vec<usize>> = Vec::new();
    for (k, &(a, b)) in bonds.iter().enumerate() {
        match used.iter().position(|u| !u.contains(&a) && !u.contains(&b)) {
            Some(x) => {
                out[x].push(k);
                used[x].extend([a, b]);
            }
            None => {
                out.push(vec![k]);
                used.push(vec![a, b]);
            }
        }
    }
    out
}

/// One symmetric Trotter step as (bond index, fraction of dt) in application order.
fn strang_sequence(bonds: &[(usize, usize)]) -> Vec<(usize, bool)> {
    let ls = layers(bonds);
    let mut seq = Vec::new();
    let m = ls.len();
    for layer in &ls[..m - 1] {
        seq.extend(layer.iter().map(|&k| (k, true)));
    }
    seq.extend(ls[m - 1].iter().map(|&k| (k, false)));
    for layer in ls[..m - 1].iter().rev() {
        seq.extend(layer.iter().map(|&k| (k, true)));
    }
    seq
}

fn o_of(v: &CVector, odiag: &[f64]) -> f64 {
    let n = v.norm_squared();
    v.iter().zip(odiag).map(|(z, o)| z.norm_sqr() * o).sum::<f64>() / n
}

struct Evolution {
    sites: Vec<(usize, usize)>,
    full: Vec<CMatrix>,
    half: Vec<CMatrix>,
    seq: Vec<(usize, bool)>,
    odiag: Vec<f64>,
    not_zero: CMatrix,
    dims: Vec<usize>,
}

impl Evolution {
    fn new(p: &SpinOneXYParams, dt: f64) -> Self {
        let terms = bond_terms(p);
        let sites: Vec<_> = terms.iter().map(|(b, _)| *b).collect();
        let full = terms.iter().map(|(_, h)| hermitian_exp(h, dt)).collect();
        let half = terms.iter().map(|(_, h)| hermitian_exp(h, 0.5 * dt)).collect();
        let seq = strang_sequence(&sites);
        let odiag = (0..3usize.pow(p.l as u32)).map(|s| 1.0 - zero_count(s, p.l) as f64 / p.l as f64).collect();
        let not_zero = CMatrix::identity(3, 3) - basis_projector(3, 1);
        Evolution { sites, full, half, seq, odiag, not_zero, dims: vec![3; p.l] }
    }

    fn project(&self, v: &CVector, site: usize) -> Result<CVector, SpinError> {
        Ok(linalg::apply_local_gate(v, &self.not_zero, &[site], &self.dims)?)
    }

    /// One trajectory; `None` if the state was annihilated.
    fn run(
        &self,
        psi0: &CVector,
        opts: &TrajectoryOptions,
        seed: u64,
        l: usize,
    ) -> Result<Option<TrajectoryRecord>, SpinError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = (opts.t_final / opts.dt).round() as usize;
        let mut v = psi0.clone();
        let mut times = vec![0.0];
        let mut o_values = vec![o_of(&v, &self.odiag)];
        let mut events = Vec::new();
        let mut next_poisson = match opts.scheme {
            MeasurementScheme::Poisson { rate } if rate > 0.0 => exponential(&mut rng, rate * l as f64),
            _ => f64::INFINITY,
        };
        for step in 0..steps {
            let t = step as f64 * opts.dt;
            for &(k, halfstep) in &self.seq {
                let (a, b) = self.sites[k];
                if let MeasurementScheme::GateReplacement { p } = opts.scheme {
                    if p > 0.0 && rng.gen::<f64>() < p {
                        let site = if rng.gen::<bool>() { a } else { b };
                        v = self.project(&v, site)?;
                        events.push((t, site));
                        if !renormalize(&mut v) {
                            return Ok(None);
                        }
                        continue;
                    }
                }
                let gate = if halfstep { &self.half[k] } else { &self.full[k] };
                v = linalg::apply_local_gate(&v, gate, &[a, b], &self.dims)?;
            }
            let t_end = (step + 1) as f64 * opts.dt;
            if let MeasurementScheme::Poisson { rate } = opts.scheme {
                while next_poisson < t_end {
                    let site = rng.gen_range(0..l);
                    v = self.project(&v, site)?;
                    events.push((next_poisson, site));
                    if !renormalize(&mut v) {
                        return Ok(None);
                    }
                    next_poisson += exponential(&mut rng, rate * l as f64);
                }
            }
            renormalize(&mut v);
            times.push(t_end);
            o_values.push(o_of(&v, &self.odiag));
        }
        Ok(Some(TrajectoryRecord { times, o_values, projection_events: events, seed }))
    }
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

fn renormalize(v: &mut CVector) -> bool {
    let n = v.norm();
    if n < ANNIHILATED_NORM {
        return false;
    }
    *v /= c(n, 0.0);
    true
}

/// Brickwork Strang-split trajectories from |ψ_AF⟩ (or `initial` if given).
pub fn trajectory_run(
    p: &SpinOneXYParams,
    opts: &TrajectoryOptions,
    initial: Option<&CVector>,
) -> Result<TrajectoryEnsemble, SpinError> {
    p.validate()?;
    if p.l > MAX_TRAJECTORY_L {
        return Err(SpinError::SizeTooLarge { l: p.l, max: MAX_TRAJECTORY_L });
    }
    if p.v.im != 0.0 {
        return Err(SpinError::InvalidParams("trajectories need real V".into()));
    }
    if !(opts.dt > 0.0 && opts.t_final >= 0.0 && opts.dt.is_finite() && opts.t_final.is_finite()) {
        return Err(SpinError::InvalidParams("need dt > 0 and T ≥ 0".into()));
    }
    let prob_ok = match opts.scheme {
        MeasurementScheme::GateReplacement { p } => (0.0..=1.0).contains(&p),
        MeasurementScheme::Poisson { rate } => rate >= 0.0 && rate.is_finite(),
    };
    if !prob_ok || opts.n_traj == 0 {
        return Err(SpinError::InvalidParams("bad measurement scheme or n_traj = 0".into()));
    }
    let psi0 = match initial {
        Some(v) => {
            if v.len() != 3usize.pow(p.l as u32) {
                return Err(SpinError::InvalidParams("initial state has the wrong dimension".into()));
            }
            v / c(v.norm(), 0.0)
        }
        None => af_state(p.l)?,
    };
    let evo = Evolution::new(p, opts.dt);
    let mut records = Vec::with_capacity(opts.n_traj);
    let mut counter = 0u64;
    let mut annihilated = 0;
    let budget = opts.n_traj * (opts.max_restarts + 1);
    while records.len() < opts.n_traj {
        if counter as usize >= budget {
            return Err(SpinError::AllTrajectoriesAnnihilated { attempts: counter as usize });
        }
        let seed = derive_seed(opts.seed, counter);
        counter += 1;
        match evo.run(&psi0, opts, seed, p.l)? {
            Some(r) => records.push(r),
            None => annihilated += 1,
        }
    }
    let times = records[0].times.clone();
    let mut mean_o = vec![0.0; times.len()];
    for r in &records {
        for (m, o) in mean_o.iter_mut().zip(&r.o_values) {
            *m += o / records.len() as f64;
        }
    }
    Ok(TrajectoryEnsemble { records, times, mean_o, annihilated })
}

// ---------------------------------------------------------------------------------------------
// Deformed PXP

pub const MAX_PXP_L: usize = 12;

fn half_state(bits: &[usize]) -> CVector {
    let mut v = CVector::zeros(1 << bits.len());
    let idx = bits.iter().fold(0, |acc, &b| (acc << 1) | b);
    v[idx] = c(1.0, 0.0);
    v
}

/// Σ coefficient · |kets⟩⟨bras| on consecutive sites.
fn dyad(kets: &[(f64, &[usize])], bras: &[(f64, &[usize])]) -> CMatrix {
    let ket = kets.iter().map(|(a, b)| half_state(b) * c(*a, 0.0)).reduce(|x, y| x + y).unwrap();
    let bra = bras.iter().map(|(a, b)| half_state(b) * c(*a, 0.0)).reduce(|x, y| x + y).unwrap();
    ket * bra.transpose()
}

const UP: usize = 0;
const DN: usize = 1;

fn wrap(i: isize, l: usize) -> usize {
    i.rem_euclid(l as isize) as usize
}

fn sum_local(l: usize, offsets: &[isize], op: &CMatrix) -> SparseMatrix {
    let mut trip = Vec::new();
    for i in 0..l {
        let sites: Vec<usize> = offsets.iter().map(|&o| wrap(i as isize + o, l)).collect();
        push_local(&mut trip, 2, l, &sites, op);
    }
    SparseMatrix::from_triplets(1 << l, &trip)
}

#[derive(Clone, Debug)]
pub struct PxpOperators {
    /// H_PXP + δH_NH.
    pub h_deformed: SparseMatrix,
    pub v: SparseMatrix,
    /// The displayed SM form Σ Wᵢ + interaction terms.
    pub sm_form: SparseMatrix,
    /// Π (1 − |↑↑⟩⟨↑↑|) as a diagonal matrix.
    pub p_ryd: SparseMatrix,
}

pub fn pxp_operators(l: usize) -> Result<PxpOperators, SpinError> {
    if l % 2 == 1 {
        return Err(SpinError::OddL(l));
    }
    if !(4..=MAX_PXP_L).contains(&l) {
        return Err(SpinError::SizeTooLarge { l, max: MAX_PXP_L });
    }
    let p = dyad(&[(1.0, &[DN])], &[(1.0, &[DN])]);
    let x = dyad(&[(1.0, &[UP])], &[(1.0, &[DN])]) + dyad(&[(1.0, &[DN])], &[(1.0, &[UP])]);
    let sp = dyad(&[(1.0, &[UP])], &[(1.0, &[DN])]);
    let pxp = sum_local(l, &[-1, 0, 1], &linalg::kron_all(&[p.clone(), x, p.clone()]));
    // Sites (i−2, i−1, i, i+1) and (i−1, i, i+1, i+2).
    let left = linalg::kron_all(&[p.clone(), p.clone(), sp.clone(), p.clone()]);
    let right = linalg::kron_all(&[p.clone(), sp.clone(), p.clone(), p.clone()]);
    let dh = sum_local(l, &[-2, -1, 0, 1], &left).add(&sum_local(l, &[-1, 0, 1, 2], &right)).scale(c(0.25, 0.0));
    let h_deformed = pxp.add(&dh);

    let v2 = dyad(&[(0.75, &[UP, UP])], &[(1.0, &[UP, DN]), (1.0, &[DN, UP])]);
    let v3 = dyad(&[(-1.0, &[UP, UP, UP])], &[(1.0, &[DN, DN, DN])]);
    let v4 = dyad(&[(0.25, &[UP, UP, DN, DN])], &[(1.0, &[UP, DN, DN, DN])])
        + dyad(&[(0.25, &[DN, DN, UP, UP])], &[(1.0, &[DN, DN, DN, UP])]);
    let v = sum_local(l, &[0, 1], &v2).add(&sum_local(l, &[-1, 0, 1], &v3)).add(&sum_local(l, &[-1, 0, 1, 2], &v4));

    let w = &sp * c(0.5, 0.0) + sp.transpose();
    let bra2: [(f64, &[usize]); 2] = [(1.0, &[UP, UP]), (-0.5, &[DN, DN])];
    let i2 = dyad(&[(-0.5, &[UP, DN]), (-0.5, &[DN, UP])], &bra2);
    let i3 = dyad(&[(-0.5, &[UP, DN, DN])], &[(1.0, &[UP, UP, DN]), (-0.5, &[DN, DN, DN])])
        + dyad(&[(-0.5, &[DN, DN, UP])], &[(1.0, &[DN, UP, UP]), (-0.5, &[DN, DN, DN])]);
    let sm_form = sum_local(l, &[0], &w).add(&sum_local(l, &[0, 1], &i2)).add(&sum_local(l, &[-1, 0, 1], &i3));

    let dim = 1usize << l;
    let trip: Vec<_> = (0..dim)
        .filter(|&s| (0..l).all(|i| !(bit(s, i, l) == UP && bit(s, (i + 1) % l, l) == UP)))
        .map(|s| (s, s, c(1.0, 0.0)))
        .collect();
    let p_ryd = SparseMatrix::from_triplets(dim, &trip);
    Ok(PxpOperators { h_deformed, v, sm_form, p_ryd })
}

fn bit(s: usize, i: usize, l: usize) -> usize {
    (s >> (l - 1 - i)) & 1
}

/// |S̃_n⟩ ∝ (Σᵢ (−1)ⁱ |+̃⟩⟨−̃'|ᵢ)ⁿ |−̃…−̃⟩.
pub fn deformed_scar_state(n: usize, l: usize) -> Result<CVector, SpinError> {
    if n > l {
        return Err(SpinError::OutOfRange { n, l });
    }
    let (a, b) = ((1.0f64 / 3.0).sqrt(), (2.0f64 / 3.0).sqrt());
    Ok(alternating_tower(n, l, 2, &[a, b], &[a, -b]))
}

#[derive(Clone, Debug)]
pub struct PxpRow {
    pub n: usize,
    /// (2n − L)/√2 from the Zeeman term.
    pub zeeman_energy: f64,
    /// Rayleigh quotient of H'_PXP + V̂ on |S̃_n⟩.
    pub energy: f64,
    pub residual: f64,
    /// Residual of the displayed SM form against `zeeman_energy`.
    pub sm_residual: f64,
    /// Rayleigh quotient of H'_PXP on the normalized P̂_Ryd|S̃_n⟩.
    pub ryd_energy: f64,
    pub ryd_residual: f64,
}

#[derive(Clone, Debug)]
pub struct PxpReport {
    pub l: usize,
    pub rows: Vec<PxpRow>,
}

impl PxpReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual).collect()
    }
    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }
}

pub fn deformed_pxp_verify(l: usize) -> Result<PxpReport, SpinError> {
    let ops = pxp_operators(l)?;
    let full = ops.h_deformed.add(&ops.v);
    let mut rows = Vec::with_capacity(l + 1);
    for n in 0..=l {
        let s = deformed_scar_state(n, l)?;
        let zeeman_energy = (2.0 * n as f64 - l as f64) / SQRT_2;
        let e = full.expectation(&s);
        let residual = linalg::residual(&full, e, &s);
        let sm_residual = linalg::residual(&ops.sm_form, c(zeeman_energy, 0.0), &s);
        let mut r = ops.p_ryd.apply(&s);
        let nr = r.norm();
        r /= c(nr, 0.0);
        let er = ops.h_deformed.expectation(&r);
        let ryd_residual = linalg::residual(&ops.h_deformed, er, &r);
        rows.push(PxpRow {
            n,
            zeeman_energy,
            energy: e.re,
            residual,
            sm_residual,
            ryd_energy: er.re,
            ryd_residual,
        });
    }
    Ok(PxpReport { l, rows })
}
