//! Semiclassical SU(1,1) coherent-state theory of the disordered scar model.
//!
//! Energies are per site and per q. The optimizer works in u = cosh θ.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EftError {
    #[error("invalid EFT parameters: {0}")]
    InvalidParams(String),
    #[error("constraint violated: cosh Θ argument {0} < 1")]
    ConstraintViolated(f64),
    #[error("m_k diverges at k = {0}")]
    PoleAtK(f64),
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("grid must have at least 64 points, got {0}")]
    GridTooSmall(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EftParams {
    pub j: f64,
    pub v: f64,
    pub g: f64,
    pub kappa: f64,
    pub r: f64,
}

impl EftParams {
    pub fn new(j: f64, v: f64, g: f64, kappa: f64, r: f64) -> Result<Self, EftError> {
        let finite = [j, v, g, kappa, r].iter().all(|x| x.is_finite());
        if !finite || j < 0.0 || v < 0.0 || g < 0.0 {
            return Err(EftError::InvalidParams(format!("need J, V, g >= 0, got J={j}, V={v}, g={g}")));
        }
        if kappa <= 0.0 {
            return Err(EftError::InvalidParams(format!("need kappa > 0, got {kappa}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(EftError::InvalidParams(format!("need 0 < r < 1, got {r}")));
        }
        Ok(EftParams { j, v, g, kappa, r })
    }

    /// Upper end of the cosh θ domain, where Θ = 0.
    pub fn u_max(&self) -> f64 {
        u_max(self.kappa, self.r)
    }
}

pub fn u_max(kappa: f64, r: f64) -> f64 {
    (2.0 * kappa + r) / r
}

/// cosh Θ as fixed by the per-site particle-number constraint.
pub fn cosh_theta_big(u: f64, kappa: f64, r: f64) -> f64 {
    (2.0 * kappa + 1.0) / (1.0 - r) - r / (1.0 - r) * u
}

pub fn theta_big(theta: f64, kappa: f64, r: f64) -> Result<f64, EftError> {
    theta_big_u(theta.cosh(), kappa, r)
}

fn theta_big_u(u: f64, kappa: f64, r: f64) -> Result<f64, EftError> {
    let x = cosh_theta_big(u, kappa, r);
    if x < 1.0 - 1e-12 {
        return Err(EftError::ConstraintViolated(x));
    }
    Ok(x.max(1.0).acosh())
}

/// dΘ/dθ and d²Θ/dθ².
pub fn theta_big_derivatives(theta: f64, kappa: f64, r: f64) -> Result<(f64, f64), EftError> {
    let big = theta_big(theta, kappa, r)?;
    let rr = r / (1.0 - r);
    let (s, c, bs, bc) = (theta.sinh(), theta.cosh(), big.sinh(), big.cosh());
    let d1 = -rr * s / bs;
    let d2 = -rr * (c / bs + rr * s * s * bc / bs.powi(3));
    Ok((d1, d2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EftConfig {
    pub theta: f64,
    pub delta_phi: f64,
    pub theta_big: f64,
}

impl EftConfig {
    pub fn new(theta: f64, delta_phi: f64, kappa: f64, r: f64) -> Result<Self, EftError> {
        Ok(EftConfig { theta, delta_phi, theta_big: theta_big(theta, kappa, r)? })
    }
}

/// (D¹ + D² + D³)/q for the homogeneous ansatz.
pub fn coupling_energy(p: &EftParams, cfg: &EftConfig) -> f64 {
    let (r, k) = (p.r, p.kappa);
    let (s, c) = (cfg.theta.sinh(), cfg.theta.cosh());
    let (bs, bc) = (cfg.theta_big.sinh(), cfg.theta_big.cosh());
    let ph = cfg.delta_phi;
    let j2 = p.j * p.j;
    let v2 = p.v * p.v;
    let kk = r * r * (1.0 - r) * (1.0 - r);
    let re = 2.0 * r * ph.cos() * s * bs + (1.0 - r) * bs * bs;
    let im = 2.0 * r * ph.sin() * s * bs;
    let d1 = j2 / 8.0 * (1.0 - r).powi(2) * (re * re + im * im)
        - j2 / 8.0 * (4.0 * k * k - r * r * (c - 1.0).powi(2)) * (4.0 * (1.0 + k).powi(2) - r * r * (c + 1.0).powi(2));
    let cross = (2.0 * ph).cos() * bs * bs * s * s;
    let d2 = v2 / 8.0 * kk * (cross - (bc - 1.0).powi(2) * (c + 1.0).powi(2));
    let d3 = v2 / 8.0 * kk * (cross - (bc + 1.0).powi(2) * (c - 1.0).powi(2));
    d1 + d2 + d3
}

/// Non-Hermitian contribution per site and per q.
///
/// The loss term −i g Σ_{μ∉𝔰} a†a counts non-scar bosons, 2L̂^z − (q − |𝔰|) per site.
/// With ⟨L̂^z⟩ = ((q − |𝔰|)/2) cosh Θ its weight in the action is −g (1 − r)(cosh Θ − 1)
/// per site and per q. It vanishes when Θ = 0.
pub fn dissipation_energy(p: &EftParams, cfg: &EftConfig) -> f64 {
    -p.g * (1.0 - p.r) * (cfg.theta_big.cosh() - 1.0)
}

pub fn energy_density(p: &EftParams, cfg: &EftConfig) -> f64 {
    coupling_energy(p, cfg) + dissipation_energy(p, cfg)
}

/// Energy along Δφ = 0 as a function of u = cosh θ.
pub fn energy_u(p: &EftParams, u: f64) -> Result<f64, EftError> {
    let theta = u.max(1.0).acosh();
    let cfg = EftConfig { theta, delta_phi: 0.0, theta_big: theta_big_u(u, p.kappa, p.r)? };
    Ok(energy_density(p, &cfg))
}

/// ∂E/∂θ at Δφ = 0 by a five-point stencil in θ.
pub fn energy_slope(p: &EftParams, theta: f64) -> f64 {
    let tmax = p.u_max().acosh();
    let h = 1e-3 * (1.0 + theta);
    let f = |t: f64| {
        let t = t.clamp(0.0, tmax);
        let cfg = EftConfig { theta: t, delta_phi: 0.0, theta_big: theta_big_u(t.cosh().min(p.u_max()), p.kappa, p.r).unwrap_or(0.0) };
        energy_density(p, &cfg)
    };
    if theta - 2.0 * h < 0.0 || theta + 2.0 * h > tmax {
        // One-sided second order at an end of the domain.
        let sgn = if theta + 2.0 * h > tmax { -1.0 } else { 1.0 };
        let hh = sgn * h;
        return (-3.0 * f(theta) + 4.0 * f(theta + hh) - f(theta + 2.0 * hh)) / (2.0 * hh);
    }
    (f(theta - 2.0 * h) - 8.0 * f(theta - h) + 8.0 * f(theta + h) - f(theta + 2.0 * h)) / (12.0 * h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaddleCase {
    /// Case 1: the optimum solves the Euler-Lagrange equation.
    Interior,
    /// Case 2: the optimum sits at cosh θ = u_max.
    Boundary,
}

impl SaddleCase {
    pub fn as_str(self) -> &'static str {
        match self {
            SaddleCase::Interior => "interior",
            SaddleCase::Boundary => "boundary",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleResult {
    pub config: EftConfig,
    pub energy_density: f64,
    pub case: SaddleCase,
    pub m_z: f64,
    /// The energy is flat in u to round-off (g = V = 0 and similar).
    pub degenerate: bool,
    /// Largest energy gain found away from Δφ = 0 on the coarse 2D scan.
    pub phase_gain: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub grid: usize,
    /// Case 2 if |u − u_max| < tol · u_max.
    pub boundary_tol: f64,
    pub phase_scan: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { grid: 1024, boundary_tol: 1e-6, phase_scan: 32 }
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Maximize the homogeneous energy over u ∈ [1, u_max] at Δφ = 0.
pub fn optimize_config(p: &EftParams, opts: &OptimizeOptions) -> Result<SaddleResult, EftError> {
    if opts.grid < 64 {
        return Err(EftError::GridTooSmall(opts.grid));
    }
    let umax = p.u_max();
    let e = |u: f64| energy_u(p, u.clamp(1.0, umax)).unwrap_or(f64::NEG_INFINITY);
    let n = opts.grid;
    let us: Vec<f64> = (0..n).map(|i| 1.0 + (umax - 1.0) * i as f64 / (n - 1) as f64).collect();
    let es: Vec<f64> = us.iter().map(|&u| e(u)).collect();
    let (emin, emax) = es.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let degenerate = (emax - emin).abs() <= 1e-12 * emax.abs().max(1.0);
    let u_star = if degenerate {
        umax
    } else {
        // Refine every grid-local maximum and keep the best.
        let mut best = (f64::NEG_INFINITY, umax);
        for i in 0..n {
            let left = if i > 0 { es[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < n { es[i + 1] } else { f64::NEG_INFINITY };
            if es[i] < left || es[i] < right {
                continue;
            }
            let u = if i == n - 1 {
                umax
            } else if i == 0 {
                // Interior refinement only if the slope at u = 1 points inward.
                golden_max(&e, us[0], us[1], 1e-13 * umax)
            } else {
                refine_interior(p, &e, us[i - 1], us[i + 1])
            };
            let val = e(u);
            if val > best.0 {
                best = (val, u);
            }
        }
        best.1
    };
    let case = if (u_star - umax).abs() < opts.boundary_tol * umax { SaddleCase::Boundary } else { SaddleCase::Interior };
    let u_star = if case == SaddleCase::Boundary { umax } else { u_star };
    let config = EftConfig::new(u_star.acosh(), 0.0, p.kappa, p.r)?;
    let energy = energy_density(p, &config);
    // Coarse check that Δφ = 0 is optimal.
    let mut phase_gain = f64::NEG_INFINITY;
    let m = opts.phase_scan.max(4);
    for iu in 0..m {
        let u = 1.0 + (umax - 1.0) * iu as f64 / (m - 1) as f64;
        let theta = u.acosh();
        let big = theta_big_u(u, p.kappa, p.r)?;
        let e0 = energy_density(p, &EftConfig { theta, delta_phi: 0.0, theta_big: big });
        for ip in 1..m {
            let ph = 2.0 * PI * ip as f64 / m as f64;
            let gain = energy_density(p, &EftConfig { theta, delta_phi: ph, theta_big: big }) - e0;
            phase_gain = phase_gain.max(gain);
        }
    }
    Ok(SaddleResult { config, energy_density: energy, case, m_z: p.r / 2.0 * (u_star - 1.0), degenerate, phase_gain })
}

/// Golden section on [lo, hi], then Newton on ∂E/∂θ to drive the slope to round-off.
fn refine_interior(p: &EftParams, e: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let u = golden_max(e, lo, hi, 1e-10 * hi);
    let mut theta = u.acosh();
    let tmax = p.u_max().acosh();
    for _ in 0..20 {
        let s = energy_slope(p, theta);
        if s.abs() < 1e-12 {
            break;
        }
        let h = 1e-4 * (1.0 + theta);
        let curv = (energy_slope(p, theta + h) - energy_slope(p, theta - h)) / (2.0 * h);
        if curv >= 0.0 {
            break;
        }
        let next = (theta - s / curv).clamp(lo.acosh(), hi.acosh().min(tmax));
        if (next - theta).abs() < 1e-15 * (1.0 + theta) {
            theta = next;
            break;
        }
        theta = next;
    }
    theta.cosh()
}

/// Which closed form to use for the θ mass from D² + D³.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MassVariant {
    /// Printed m_V plus −(V²/4) K Θ' sinh θ cosh θ sinh Θ cosh Θ, so that the coefficient of
    /// that term is −V²/2 as in t_V. Agrees with the finite-difference Hessian.
    #[default]
    Corrected,
    /// m_V exactly as printed.
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinWaveCoeffs {
    pub t_theta: f64,
    pub m_theta: f64,
    pub t_phi: f64,
    pub m_phi: f64,
    pub j_theta: f64,
    pub t_j: f64,
    pub m_j: f64,
    pub t_v: f64,
    pub m_v: f64,
}

pub fn spin_wave_coeffs(p: &EftParams, theta: f64) -> Result<SpinWaveCoeffs, EftError> {
    spin_wave_coeffs_with(p, theta, MassVariant::Corrected)
}

pub fn spin_wave_coeffs_with(p: &EftParams, theta: f64, variant: MassVariant) -> Result<SpinWaveCoeffs, EftError> {
    let (r, k) = (p.r, p.kappa);
    let big = theta_big(theta, k, r)?;
    let (dt, d2t) = theta_big_derivatives(theta, k, r)?;
    let (s, c, bs, bc) = (theta.sinh(), theta.cosh(), big.sinh(), big.cosh());
    let (j2, v2) = (p.j * p.j, p.v * p.v);
    let kk = r * r * (1.0 - r).powi(2);
    let q1 = 1.0 - r;
    let n2 = 2.0 * (2.0 * k * k + 2.0 * k + 1.0);

    let t_phi = (v2 - j2) / 4.0 * kk * s * s * bs * bs;
    let m_phi = ((j2 + v2) * kk * s * s * bs * bs + j2 * r * q1.powi(3) * s * bs.powi(3)) / 4.0;

    let lead = r * (c * bs + dt * s * bc) + q1 * dt * bs * bc;
    let t_j = -j2 / 4.0 * q1 * q1 * lead * lead
        - j2 / 4.0 * q1 * q1 * dt * bs * bc * (2.0 * r * s + q1 * bs) * (2.0 * r * c + q1 * dt * bc)
        - j2 / 4.0 * r * r * s * s * (n2 - r * r * (c * c + 1.0))
        + j2 / 4.0 * r.powi(4) * s.powi(4);
    let m_j = -j2 / 4.0 * q1 * q1 * lead * lead
        - j2 / 4.0 * q1 * q1 * bs * (r * s * ((1.0 + dt * dt) * bs + d2t * bc) + q1 * bs * (dt * dt * bs + d2t * bc)) * (2.0 * r * s + q1 * bs)
        - j2 / 4.0 * r * r * c * (n2 * c - 2.0 * (2.0 * k + 1.0) - r * r * s * s * c)
        + j2 / 4.0 * r.powi(4) * s.powi(4);
    let t_v = -v2 / 4.0 * kk * (c * c * bs * bs + dt * dt * s * s * bc * bc) - v2 / 2.0 * kk * dt * s * c * bs * bc
        + v2 / 4.0 * kk * (s * s * (bc * bc + 1.0) + dt * dt * bs * bs * (c * c + 1.0))
        + v2 / 2.0 * kk * dt * s * bs * (c * bc - 1.0);
    let mut m_v = -v2 / 4.0 * kk * s * s * bs * ((1.0 + dt * dt) * bs + d2t * bc) - v2 / 4.0 * kk * dt * s * c * bs * bc
        + v2 / 4.0 * kk * c * (c * (bc * bc + 1.0) - 2.0 * bc)
        + v2 / 4.0 * kk * (d2t * bs + dt * dt * bc) * (bc * (c * c + 1.0) - 2.0 * c)
        + v2 / 2.0 * kk * dt * s * bs * (c * bc - 1.0);
    if variant == MassVariant::Corrected {
        m_v += -v2 / 4.0 * kk * dt * s * c * bs * bc;
    }
    Ok(SpinWaveCoeffs {
        t_theta: t_j + t_v,
        m_theta: m_j + m_v,
        t_phi,
        m_phi,
        j_theta: energy_slope(p, theta),
        t_j,
        m_j,
        t_v,
        m_v,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frequency {
    Real(f64),
    /// The product under the square root was negative.
    Unstable(f64),
}

impl Frequency {
    pub fn real(self) -> Option<f64> {
        match self {
            Frequency::Real(w) => Some(w),
            Frequency::Unstable(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub m_k: f64,
    pub omega_k: Frequency,
}

pub fn dispersion(c: &SpinWaveCoeffs, r: f64, k: f64) -> Result<Mode, EftError> {
    let a = c.t_theta * k.cos() + c.m_theta;
    if a == 0.0 || a.abs() < 1e-14 * (c.t_theta.abs() + c.m_theta.abs()) {
        return Err(EftError::PoleAtK(k));
    }
    let b = c.t_phi * k.cos() + c.m_phi;
    let prod = a * b;
    let omega_k = if prod >= 0.0 { Frequency::Real(4.0 / r * prod.sqrt()) } else { Frequency::Unstable(prod) };
    Ok(Mode { m_k: 4.0 / r / a, omega_k })
}

/// min over k of (t cos k + m) on a uniform grid plus k = 0, π.
pub fn min_gap(t: f64, m: f64, points: usize) -> f64 {
    let n = points.max(2);
    let grid = (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64);
    grid.chain([0.0, PI]).map(|k| t * k.cos() + m).fold(f64::INFINITY, f64::min)
}

pub const STABILITY_K_POINTS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionInput {
    pub q: usize,
    pub s_size: usize,
    pub l: usize,
    pub t: f64,
    pub kappa: f64,
    pub r: f64,
}

pub fn finite_q_correction(c: &SpinWaveCoeffs, case: SaddleCase, inp: &CorrectionInput) -> Result<f64, EftError> {
    match case {
        SaddleCase::Interior => {
            if inp.l == 0 || inp.s_size == 0 {
                return Err(EftError::InvalidCase("interior correction needs L > 0 and |s| > 0".into()));
            }
            let mut acc = 0.0;
            for n in 0..inp.l {
                let k = 2.0 * PI * n as f64 / inp.l as f64;
                let mode = dispersion(c, inp.r, k)?;
                let w = mode.omega_k.real().ok_or_else(|| EftError::InvalidCase(format!("unstable mode at k = {k}")))?;
                let x = w * inp.t;
                // ln sinh x computed without overflow.
                let ln_sinh = if x > 20.0 { x - 2f64.ln() + (-(-2.0 * x).exp()).ln_1p() } else { x.sinh().ln() };
                acc += (4.0 * PI / inp.s_size as f64).ln() + ln_sinh - (mode.m_k * w).ln();
            }
            Ok(-0.5 * acc)
        }
        SaddleCase::Boundary => {
            if c.j_theta <= 0.0 {
                return Err(EftError::InvalidCase(format!("boundary correction needs J_theta > 0, got {}", c.j_theta)));
            }
            let vmin = -(2.0 * inp.kappa + inp.r) / (1.0 - inp.r);
            Ok(-(inp.l as f64) * inp.t * (inp.q as f64 * c.j_theta / (1.0 - vmin.exp())).ln())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EftRow {
    pub g: f64,
    pub v: f64,
    pub m_z: f64,
    pub case: SaddleCase,
}

/// Rows for every (g/J, V/J) pair with J = 1, sorted by (g, then V).
pub fn eft_phase_diagram(points: &[(f64, f64)], kappa: f64, r: f64, opts: &OptimizeOptions) -> Result<Vec<EftRow>, EftError> {
    let mut pts = points.to_vec();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    pts.iter()
        .map(|&(g, v)| {
            let p = EftParams::new(1.0, v, g, kappa, r)?;
            let s = optimize_config(&p, opts)?;
            Ok(EftRow { g, v, m_z: s.m_z, case: s.case })
        })
        .collect()
}
