//! Variational maximization of ⟨Φ|Û†Û|Φ⟩/⟨Φ|Φ⟩: the product-state mean field and DMRG.

use crate::dmrg::{dmrg_maximize, DmrgError};
use crate::lattice::{boltzmann_weight, transfer_mpo, PlaquetteWeight};
use crate::rqc::{ChannelError, ChannelParams};
use nalgebra::Matrix2;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Dmrg(#[from] DmrgError),
    #[error("invalid grid point a={a}, c={c}")]
    InvalidGridPoint { a: f64, c: f64 },
    #[error("grid must have at least 16 points per axis, got {0}")]
    GridTooSmall(usize),
}

/// Which closed form to use for the C and D entries of the 2×2 mean-field kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelVariant {
    /// All four entries from the contraction K_{st} = |Σ_x α_x W(s s | x t)|².
    #[default]
    Contracted,
    /// C and D exactly as printed (D with sin θ in both terms).
    Printed,
    /// Printed C, with D's first coefficient replaced by cos θ.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldAnsatz {
    pub theta: f64,
    pub phi: f64,
}

impl MeanFieldAnsatz {
    /// Canonical θ ∈ [0, π/2], φ ∈ [0, 2π).
    pub fn canonical(theta: f64, phi: f64) -> Self {
        MeanFieldAnsatz { theta: theta.clamp(0.0, FRAC_PI_2), phi: phi.rem_euclid(2.0 * PI) }
    }

    /// Site amplitudes (A↑, A↓).
    pub fn amplitudes(&self) -> [Complex64; 2] {
        [
            Complex64::from_polar(self.theta.cos(), self.phi / 2.0),
            Complex64::from_polar(self.theta.sin(), -self.phi / 2.0),
        ]
    }

    /// ⟨M̂_rot⟩ per site of the product state, ↓ counted +1: sin²θ − cos²θ.
    pub fn magnetization(&self) -> f64 {
        -(2.0 * self.theta).cos()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TauResult {
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Bond-space eigenvector (B, ½(√… − (A − D))), not normalized.
    pub local_vec: [Complex64; 2],
}

impl TauResult {
    pub fn kernel(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.c, self.d)
    }

    /// (|v↓|² − |v↑|²)/‖v‖² of the bond-space eigenvector.
    pub fn bond_magnetization(&self) -> f64 {
        let (u, d) = (self.local_vec[0].norm_sqr(), self.local_vec[1].norm_sqr());
        if u + d == 0.0 {
            0.0
        } else {
            (d - u) / (u + d)
        }
    }
}

fn amp2(z: Complex64) -> f64 {
    z.norm_sqr()
}

pub fn meanfield_kernel(w: &PlaquetteWeight, theta: f64, phi: f64, variant: KernelVariant) -> [f64; 4] {
    let e = Complex64::from_polar(1.0, -phi / 2.0);
    let (ct, st) = (theta.cos(), theta.sin());
    let term = |c1: f64, w1: f64, c2: f64, w2: f64| amp2(e * c1 * w1 + e.conj() * c2 * w2);
    let a = term(ct, w.get(0, 0, 0, 0), st, w.get(0, 0, 1, 0));
    let b = term(ct, w.get(0, 0, 0, 1), st, w.get(0, 0, 1, 1));
    let (cc, d) = match variant {
        KernelVariant::Contracted => (
            term(ct, w.get(1, 1, 0, 0), st, w.get(1, 1, 1, 0)),
            term(ct, w.get(1, 1, 0, 1), st, w.get(1, 1, 1, 1)),
        ),
        KernelVariant::Printed => (
            term(ct, w.get(1, 1, 0, 0), st, w.get(1, 1, 1, 1)),
            term(st, w.get(1, 1, 0, 0), st, w.get(1, 1, 1, 1)),
        ),
        KernelVariant::Symmetric => (
            term(ct, w.get(1, 1, 0, 0), st, w.get(1, 1, 1, 1)),
            term(ct, w.get(1, 1, 0, 0), st, w.get(1, 1, 1, 1)),
        ),
    };
    [a, b, cc, d]
}

pub fn meanfield_tau(w: &PlaquetteWeight, theta: f64, phi: f64) -> TauResult {
    meanfield_tau_with(w, theta, phi, KernelVariant::default())
}

pub fn meanfield_tau_with(w: &PlaquetteWeight, theta: f64, phi: f64, variant: KernelVariant) -> TauResult {
    let [a, b, cc, d] = meanfield_kernel(w, theta, phi, variant);
    let disc = ((a - d).powi(2) + 4.0 * b * cc).max(0.0).sqrt();
    let tau = 0.5 * (a + d) + 0.5 * disc;
    let mut v = [Complex64::new(b, 0.0), Complex64::new(0.5 * (disc - (a - d)), 0.0)];
    if v[0].norm() == 0.0 && v[1].norm() == 0.0 {
        v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    }
    TauResult { tau, a, b, c: cc, d, local_vec: v }
}

/// tr K^L: the exact normalized expectation of Û†Û in the product state on an L-ring.
pub fn meanfield_chain_lambda_sq(w: &PlaquetteWeight, ans: &MeanFieldAnsatz, l: usize, variant: KernelVariant) -> f64 {
    let k = meanfield_tau_with(w, ans.theta, ans.phi, variant).kernel();
    k.pow(l as u32).trace()
}

/// Result of a variational maximization.
#[derive(Clone, Debug)]
pub struct VariationalResult {
    pub lambda_sq: f64,
    pub magnetization: f64,
    pub optimum: Optimum,
    pub converged: bool,
    pub iterations: usize,
    /// Two maxima of equal height were found; the scar-side one is reported.
    pub coexistence: bool,
}

#[derive(Clone, Debug)]
pub enum Optimum {
    MeanField { ansatz: MeanFieldAnsatz, tau: TauResult },
    Mps { chi: usize, bond_dims: Vec<usize>, tensors: Vec<Vec<f64>> },
}

#[derive(Clone, Copy, Debug)]
pub struct MeanFieldOptions {
    pub grid: usize,
    pub refine_tol: f64,
    pub variant: KernelVariant,
    /// Offset of the φ grid as a fraction of one cell.
    pub grid_offset: f64,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions { grid: 64, refine_tol: 1e-10, variant: KernelVariant::default(), grid_offset: 0.0 }
    }
}

/// Grid scan plus Nelder–Mead refinement of τ(θ, φ). `lambda_sq` is τ itself.
pub fn meanfield_optimize(w: &PlaquetteWeight, opts: &MeanFieldOptions) -> Result<VariationalResult, VariationalError> {
    if opts.grid < 16 {
        return Err(VariationalError::GridTooSmall(opts.grid));
    }
    let n = opts.grid;
    let f = |th: f64, ph: f64| meanfield_tau_with(w, th, ph, opts.variant).tau;
    let thetas: Vec<f64> = (0..n).map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64).collect();
    let phis: Vec<f64> = (0..n).map(|j| 2.0 * PI * (j as f64 + opts.grid_offset) / n as f64).collect();
    // Best φ per θ row, then local maxima in θ.
    let rows: Vec<(f64, f64)> = thetas
        .iter()
        .map(|&th| phis.iter().map(|&ph| (f(th, ph), ph)).fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a }))
        .collect();
    let mut seeds = Vec::new();
    for i in 0..n {
        let left = if i == 0 { f64::NEG_INFINITY } else { rows[i - 1].0 };
        let right = if i + 1 == n { f64::NEG_INFINITY } else { rows[i + 1].0 };
        if rows[i].0 >= left && rows[i].0 >= right {
            seeds.push((thetas[i], rows[i].1));
        }
    }
    let h = FRAC_PI_2 / (n - 1) as f64;
    let mut cands: Vec<(f64, MeanFieldAnsatz, usize)> = seeds
        .iter()
        .map(|&(th, ph)| {
            let (x, val, it) = nelder_mead(
                |x| {
                    let a = MeanFieldAnsatz::canonical(x[0], x[1]);
                    -f(a.theta, a.phi)
                },
                [th, ph],
                [0.5 * h, 0.5 * h],
                opts.refine_tol,
                2000,
            );
            (-val, MeanFieldAnsatz::canonical(x[0], x[1]), it)
        })
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = cands[0].0;
    let near: Vec<&(f64, MeanFieldAnsatz, usize)> =
        cands.iter().filter(|c| (top - c.0).abs() <= 1e-12 * top.abs().max(1.0)).collect();
    let distinct = near.iter().any(|c| (c.1.theta - near[0].1.theta).abs() > 2.0 * h);
    let chosen = near.iter().max_by(|a, b| a.1.magnetization().total_cmp(&b.1.magnetization())).expect("non-empty");
    let tau = meanfield_tau_with(w, chosen.1.theta, chosen.1.phi, opts.variant);
    Ok(VariationalResult {
        lambda_sq: tau.tau,
        magnetization: chosen.1.magnetization(),
        optimum: Optimum::MeanField { ansatz: chosen.1, tau },
        converged: true,
        iterations: cands.iter().map(|c| c.2).sum(),
        coexistence: distinct,
    })
}

/// Minimize a function of two variables; returns (argmin, min, iterations).
pub fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2], tol: f64, max_iter: usize) -> ([f64; 2], f64, usize) {
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut vals = simplex.map(&f);
    let mut it = 0;
    while it < max_iter {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        let spread = (vals[2] - vals[0]).abs();
        let size = (0..3).map(|k| (simplex[k][0] - simplex[0][0]).abs() + (simplex[k][1] - simplex[0][1]).abs()).fold(0.0, f64::max);
        if spread <= tol * vals[0].abs().max(1e-300) && size < 1e-9 {
            break;
        }
        let cen = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let lerp = |t: f64| [cen[0] + t * (simplex[2][0] - cen[0]), cen[1] + t * (simplex[2][1] - cen[1])];
        let xr = lerp(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = lerp(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { lerp(-0.5) } else { lerp(0.5) };
            let fc = f(xc);
            if fc < vals[2].min(fr) {
                simplex[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [(simplex[k][0] + simplex[0][0]) / 2.0, (simplex[k][1] + simplex[0][1]) / 2.0];
                    vals[k] = f(simplex[k]);
                }
            }
        }
        it += 1;
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("three vertices");
    (simplex[best], vals[best], it)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    MeanField,
    Dmrg,
}

#[derive(Clone, Copy, Debug)]
pub struct DiagramOptions {
    pub r: f64,
    pub method: Method,
    pub meanfield: MeanFieldOptions,
    /// Chain length and bond dimension for the DMRG method; L also sets the chain value
    /// of λ² reported by the mean-field method.
    pub l: usize,
    pub chi: usize,
    pub sweeps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        DiagramOptions {
            r: 0.5,
            method: Method::MeanField,
            meanfield: MeanFieldOptions::default(),
            l: 8,
            chi: 16,
            sweeps: 12,
            tol: 1e-10,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagramRow {
    pub a: f64,
    pub c: f64,
    pub magnetization: f64,
    pub lambda_sq: f64,
}

/// One variational point.
pub fn phase_point(a: f64, cc: f64, opts: &DiagramOptions) -> Result<DiagramRow, VariationalError> {
    let p = ChannelParams::new(a, cc, opts.r).map_err(|_| VariationalError::InvalidGridPoint { a, c: cc })?;
    let w = boltzmann_weight(&p);
    let (m, lam) = match opts.method {
        Method::MeanField => {
            let res = meanfield_optimize(&w, &opts.meanfield)?;
            let Optimum::MeanField { ansatz, .. } = res.optimum else { unreachable!() };
            (res.magnetization, meanfield_chain_lambda_sq(&w, &ansatz, opts.l, opts.meanfield.variant))
        }
        Method::Dmrg => {
            let res = dmrg_maximize(&transfer_mpo(&w, true), opts.l, opts.chi, opts.sweeps, opts.tol, opts.seed)?;
            (res.magnetization, res.lambda_sq)
        }
    };
    Ok(DiagramRow { a, c: cc, magnetization: m, lambda_sq: lam })
}

/// Rows sorted by (a, then c).
pub fn phase_diagram(points: &[(f64, f64)], opts: &DiagramOptions) -> Result<Vec<DiagramRow>, VariationalError> {
    let mut pts = points.to_vec();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    pts.iter().map(|&(a, cc)| phase_point(a, cc, opts)).collect()
}

/// Points (a, c) of an n × n grid on [0, 1]² restricted to a + c ≤ 1.
pub fn triangle_grid(n: usize) -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    if n == 0 {
        return v;
    }
    let step = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
    for i in 0..n {
        for j in 0..n {
            let (a, cc) = (i as f64 * step, j as f64 * step);
            if a + cc <= 1.0 + 1e-12 {
                v.push((a, cc.min(1.0 - a)));
            }
        }
    }
    v
}
