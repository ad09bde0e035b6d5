//! Complex linear algebra shared by every model in the crate.
//!
//! Vectors are [`CVector`] (a `nalgebra` column of [`Complex64`]). Operators are anything
//! implementing [`LinearOperator`]: dense matrices, CSR sparse matrices, or lazy gate
//! products defined elsewhere. Basis indices are site-major with site 0 the most
//! significant digit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const DEFAULT_PROP_TOL: f64 = 1e-8;

/// Operators up to this dimension are diagonalized densely by [`dominant_eigenpair`].
pub const DENSE_EIG_LIMIT: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },
    #[error("adaptive propagation step fell below {floor:e}")]
    StepUnderflow { floor: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Anything that can act linearly on a [`CVector`].
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CVector) -> CVector;

    /// Materialize the operator column by column.
    fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        let mut e = CVector::zeros(n);
        for j in 0..n {
            e[j] = c(1.0, 0.0);
            m.set_column(j, &self.apply(&e));
            e[j] = c(0.0, 0.0);
        }
        m
    }
}

impl LinearOperator for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &CVector) -> CVector {
        self * x
    }
    fn to_dense(&self) -> CMatrix {
        self.clone()
    }
}

/// Compressed sparse row complex matrix.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    inner: CsrMatrix<Complex64>,
}

impl SparseMatrix {
    /// Build from triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut coo = CooMatrix::new(n, n);
        for &(i, j, v) in triplets {
            if v != c(0.0, 0.0) {
                coo.push(i, j, v);
            }
        }
        SparseMatrix { inner: CsrMatrix::from(&coo) }
    }

    pub fn zeros(n: usize) -> Self {
        SparseMatrix { inner: CsrMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { inner: CsrMatrix::identity(n) }
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        self.inner.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut inner = self.inner.clone();
        inner.values_mut().iter_mut().for_each(|v| *v *= s);
        SparseMatrix { inner }
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        SparseMatrix { inner: &self.inner + &other.inner }
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Self {
        SparseMatrix { inner: &self.inner * &other.inner }
    }

    pub fn adjoint(&self) -> Self {
        let t = self.inner.transpose();
        let trip: Vec<_> = t.triplet_iter().map(|(i, j, v)| (i, j, v.conj())).collect();
        Self::from_triplets(self.dim(), &trip)
    }

    pub fn dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.inner.triplet_iter() {
            m[(i, j)] += *v;
        }
        m
    }

    /// ⟨x|A|x⟩ / ⟨x|x⟩.
    pub fn expectation(&self, x: &CVector) -> Complex64 {
        x.dotc(&self.apply(x)) / x.norm_squared()
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.inner.nrows()
    }
    fn apply(&self, x: &CVector) -> CVector {
        let mut y = CVector::zeros(self.dim());
        for (row, yi) in self.inner.row_iter().zip(y.iter_mut()) {
            let mut acc = c(0.0, 0.0);
            for (&j, v) in row.col_indices().iter().zip(row.values()) {
                acc += v * x[j];
            }
            *yi = acc;
        }
        y
    }
    fn to_dense(&self) -> CMatrix {
        self.dense()
    }
}

/// Eigenvalue selection rule for [`dominant_eigenpair`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    LargestReal,
    LargestImaginary,
    LargestMagnitude,
}

impl Mode {
    /// Ordering key: larger is better. Largest-imaginary is the largest real part of −iλ.
    pub fn key(self, z: Complex64) -> f64 {
        match self {
            Mode::LargestReal => z.re,
            Mode::LargestImaginary => (c(0.0, -1.0) * z).re,
            Mode::LargestMagnitude => z.norm(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: CVector,
    pub residual: f64,
}

/// Right eigen-decomposition of a dense complex matrix.
#[derive(Clone, Debug)]
pub struct DenseEigen {
    pub values: Vec<Complex64>,
    /// Unit-norm right eigenvectors, one per column.
    pub vectors: CMatrix,
}

/// Complex Schur form (Q, T) with M = Q T Q†. The QR sweep is capped, and a stalled sweep is
/// retried on a random unitary rotation of M.
fn schur(m: &CMatrix) -> (CMatrix, CMatrix) {
    let n = m.nrows();
    let cap = 100 * n.max(10);
    if let Some(s) = m.clone().try_schur(f64::EPSILON, cap) {
        return s.unpack();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5C4D);
    loop {
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let u = g.qr().q();
        let rotated = u.adjoint() * m * &u;
        if let Some(s) = rotated.try_schur(f64::EPSILON, cap) {
            let (q, t) = s.unpack();
            return (u * q, t);
        }
    }
}

/// Eigenvalues of a dense complex matrix from its Schur form.
pub fn dense_eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let (_, t) = schur(m);
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Full right eigen-decomposition: complex Schur form then triangular back substitution.
pub fn dense_eigen(m: &CMatrix) -> DenseEigen {
    let n = m.nrows();
    let (q, t) = schur(m);
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut vectors = CMatrix::zeros(n, n);
    for k in 0..n {
        let y = triangular_eigvec(&t, k, scale);
        let mut v = &q * y;
        let nv = v.norm();
        if nv > 0.0 {
            v /= c(nv, 0.0);
        }
        vectors.set_column(k, &v);
    }
    DenseEigen { values, vectors }
}

fn triangular_eigvec(t: &CMatrix, k: usize, scale: f64) -> CVector {
    let n = t.nrows();
    let lam = t[(k, k)];
    let floor = scale * f64::EPSILON;
    let mut y = CVector::zeros(n);
    y[k] = c(1.0, 0.0);
    for j in (0..k).rev() {
        let mut acc = c(0.0, 0.0);
        for l in (j + 1)..=k {
            acc += t[(j, l)] * y[l];
        }
        let mut d = t[(j, j)] - lam;
        if d.norm() < floor {
            d = c(floor, 0.0);
        }
        y[j] = -acc / d;
    }
    y
}

/// ‖A v − λ v‖ / ‖v‖.
pub fn residual(op: &dyn LinearOperator, value: Complex64, v: &CVector) -> f64 {
    let r = op.apply(v) - v * value;
    r.norm() / v.norm()
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    let v = CVector::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let nv = v.norm();
    v / c(nv, 0.0)
}

/// Dominant eigenpair in the requested sense, with unit-norm eigenvector.
///
/// Small operators are diagonalized densely; larger ones use explicitly restarted Arnoldi
/// from seeded random starts.
pub fn dominant_eigenpair(
    op: &dyn LinearOperator,
    mode: Mode,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenPair, LinalgError> {
    if tol <= 0.0 {
        return Err(LinalgError::InvalidArgument("tol must be positive".into()));
    }
    let n = op.dim();
    if n == 0 {
        return Err(LinalgError::InvalidArgument("empty operator".into()));
    }
    if n <= DENSE_EIG_LIMIT {
        return dense_dominant(op, mode, tol, max_iter);
    }
    let mut best_residual = f64::INFINITY;
    for attempt in 0..3u64 {
        match arnoldi_dominant(op, mode, tol, max_iter, seed.wrapping_add(attempt * 0x9E37_79B9)) {
            Ok(p) => return Ok(p),
            Err(LinalgError::NoConvergence { best_residual: r, .. }) => best_residual = best_residual.min(r),
            Err(e) => return Err(e),
        }
    }
    Err(LinalgError::NoConvergence { iterations: max_iter, best_residual })
}

fn dense_dominant(op: &dyn LinearOperator, mode: Mode, tol: f64, max_iter: usize) -> Result<EigenPair, LinalgError> {
    let m = op.to_dense();
    let eig = dense_eigen(&m);
    let k = argmax_by(&eig.values, |z| mode.key(*z));
    let value = eig.values[k];
    let mut vector = eig.vectors.column(k).into_owned();
    let mut res = residual(op, value, &vector);
    let mut value = value;
    // Inverse iteration polishes vectors whose back-substitution lost accuracy.
    let mut it = 0;
    while res > tol && it < max_iter.clamp(1, 8) {
        let shift = value + c(1e-12 * (1.0 + value.norm()), 0.0);
        let a = &m - CMatrix::identity(m.nrows(), m.nrows()) * shift;
        let Some(x) = a.lu().solve(&vector) else { break };
        let nx = x.norm();
        if !(nx.is_finite() && nx > 0.0) {
            break;
        }
        vector = x / c(nx, 0.0);
        value = vector.dotc(&op.apply(&vector));
        res = residual(op, value, &vector);
        it += 1;
    }
    if res > tol {
        return Err(LinalgError::NoConvergence { iterations: it, best_residual: res });
    }
    Ok(EigenPair { value, vector, residual: res })
}

fn argmax_by<T>(xs: &[T], key: impl Fn(&T) -> f64) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if key(&xs[i]) > key(&xs[best]) {
            best = i;
        }
    }
    best
}

fn arnoldi_dominant(
    op: &dyn LinearOperator,
    mode: Mode,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenPair, LinalgError> {
    let n = op.dim();
    let m = 40.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = random_vector(n, &mut rng);
    let mut best_res = f64::INFINITY;
    for it in 0..max_iter.max(1) {
        let mut basis: Vec<CVector> = vec![start.clone()];
        let mut h = CMatrix::zeros(m + 1, m);
        let mut kdim = m;
        for j in 0..m {
            let mut w = op.apply(&basis[j]);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let proj = b.dotc(&w);
                    h[(i, j)] += proj;
                    w -= b * proj;
                }
            }
            let nw = w.norm();
            h[(j + 1, j)] = c(nw, 0.0);
            if nw < 1e-14 {
                kdim = j + 1;
                break;
            }
            basis.push(w / c(nw, 0.0));
        }
        let hk = h.view((0, 0), (kdim, kdim)).into_owned();
        let eig = dense_eigen(&hk);
        let k = argmax_by(&eig.values, |z| mode.key(*z));
        let y = eig.vectors.column(k);
        let mut v = CVector::zeros(n);
        for (i, yi) in y.iter().enumerate() {
            v += &basis[i] * *yi;
        }
        let nv = v.norm();
        v /= c(nv, 0.0);
        let value = v.dotc(&op.apply(&v));
        let res = residual(op, value, &v);
        best_res = best_res.min(res);
        if res <= tol {
            return Ok(EigenPair { value, vector: v, residual: res });
        }
        if it + 1 == max_iter.max(1) {
            break;
        }
        start = v;
    }
    Err(LinalgError::NoConvergence { iterations: max_iter, best_residual: best_res })
}

/// Crude upper estimate of ‖A‖ from a few power steps on a seeded random vector.
pub fn norm_estimate(op: &dyn LinearOperator) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = random_vector(op.dim(), &mut rng);
    let mut est: f64 = 0.0;
    for _ in 0..12 {
        let w = op.apply(&v);
        let nw = w.norm();
        est = est.max(nw);
        if nw == 0.0 {
            break;
        }
        v = w / c(nw, 0.0);
    }
    2.0 * est
}

/// exp(prefactor · t · A) |ψ⟩ by Taylor substeps. The result is not renormalized.
pub fn propagate(
    op: &dyn LinearOperator,
    state: &CVector,
    prefactor: Complex64,
    t: f64,
    tol: f64,
) -> Result<CVector, LinalgError> {
    if t < 0.0 {
        return Err(LinalgError::InvalidArgument("t must be non-negative".into()));
    }
    if state.len() != op.dim() {
        return Err(LinalgError::DimensionMismatch { expected: op.dim(), got: state.len() });
    }
    if t == 0.0 || prefactor == c(0.0, 0.0) {
        return Ok(state.clone());
    }
    let rate = prefactor.norm() * norm_estimate(op);
    if rate == 0.0 {
        return Ok(state.clone());
    }
    let floor = 1e-12 * t;
    let mut h = (0.5 / rate).min(t);
    let mut v = state.clone();
    let mut elapsed = 0.0;
    while elapsed < t {
        let step = h.min(t - elapsed);
        match taylor_step(op, &v, prefactor * step, tol) {
            Some(next) => {
                v = next;
                elapsed += step;
            }
            None => {
                h *= 0.5;
                if h < floor {
                    return Err(LinalgError::StepUnderflow { floor });
                }
            }
        }
    }
    Ok(v)
}

fn taylor_step(op: &dyn LinearOperator, v: &CVector, z: Complex64, tol: f64) -> Option<CVector> {
    let mut term = v.clone();
    let mut sum = v.clone();
    let scale = v.norm().max(f64::MIN_POSITIVE);
    for k in 1..=60 {
        term = op.apply(&term) * (z / c(k as f64, 0.0));
        sum += &term;
        let nt = term.norm();
        if !nt.is_finite() {
            return None;
        }
        if nt <= 1e-3 * tol * scale {
            return Some(sum);
        }
    }
    None
}

/// Row-major strides for a site-major tensor-product basis.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Apply a gate acting on `sites` (in the order given) of a tensor-product state.
pub fn apply_local_gate(
    state: &CVector,
    gate: &CMatrix,
    sites: &[usize],
    dims: &[usize],
) -> Result<CVector, LinalgError> {
    let total: usize = dims.iter().product();
    if state.len() != total {
        return Err(LinalgError::DimensionMismatch { expected: total, got: state.len() });
    }
    if sites.iter().any(|&s| s >= dims.len()) {
        return Err(LinalgError::InvalidArgument("site index out of range".into()));
    }
    for (i, a) in sites.iter().enumerate() {
        if sites[i + 1..].contains(a) {
            return Err(LinalgError::InvalidArgument("repeated site".into()));
        }
    }
    let local: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
    let d: usize = local.iter().product();
    if gate.nrows() != d || gate.ncols() != d {
        return Err(LinalgError::DimensionMismatch { expected: d, got: gate.nrows() });
    }
    let st = strides(dims);
    // Offsets of each local configuration relative to a base index.
    let lst = strides(&local);
    let offsets: Vec<usize> = (0..d)
        .map(|k| sites.iter().enumerate().map(|(p, &s)| ((k / lst[p]) % local[p]) * st[s]).sum())
        .collect();
    let mut out = CVector::zeros(total);
    let mut buf = vec![c(0.0, 0.0); d];
    for base in 0..total {
        if sites.iter().any(|&s| (base / st[s]) % dims[s] != 0) {
            continue;
        }
        for (k, o) in offsets.iter().enumerate() {
            buf[k] = state[base + o];
        }
        for (r, o) in offsets.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for (k, b) in buf.iter().enumerate() {
                acc += gate[(r, k)] * b;
            }
            out[base + o] = acc;
        }
    }
    Ok(out)
}

/// Kronecker product of dense matrices, first factor most significant.
pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    let mut acc = CMatrix::from_element(1, 1, c(1.0, 0.0));
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// Largest eigenpair of a real symmetric operator by restarted Lanczos with full
/// reorthogonalization. Returns (eigenvalue, unit eigenvector).
pub fn lanczos_largest(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    krylov: usize,
    tol: f64,
    restarts: usize,
) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut v0: Vec<f64> = start.to_vec();
    let nrm = dot(&v0, &v0).sqrt();
    v0.iter_mut().for_each(|x| *x /= nrm);
    let mut best = (f64::NEG_INFINITY, v0.clone());
    for _ in 0..restarts.max(1) {
        let m = krylov.min(n).max(1);
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let mut w = apply(&basis[j]);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let p = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
            let nb = dot(&w, &w).sqrt();
            if j + 1 == m || nb < 1e-13 {
                break;
            }
            beta.push(nb);
            w.iter_mut().for_each(|x| *x /= nb);
            basis.push(w);
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let se = SymmetricEigen::new(t);
        let (imax, &lam) = se
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        let y = se.eigenvectors.column(imax);
        let mut v = vec![0.0; n];
        for (i, b) in basis.iter().enumerate().take(k) {
            v.iter_mut().zip(b).for_each(|(x, bb)| *x += y[i] * bb);
        }
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let av = apply(&v);
        let rq = dot(&v, &av);
        let res: f64 = av.iter().zip(&v).map(|(a, x)| (a - rq * x).powi(2)).sum::<f64>().sqrt();
        if rq > best.0 {
            best = (rq, v.clone());
        }
        if res <= tol * rq.abs().max(1e-300) || k < m {
            return (rq, v);
        }
        let _ = lam;
        v0 = v;
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
