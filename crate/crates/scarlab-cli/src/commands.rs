//! One function per subcommand, each turning validated params into a [`ResultTable`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use scarlab::eft::{self, CorrectionInput, EftError, EftParams, OptimizeOptions, SaddleCase};
use scarlab::rg::{self, BlockRule, RgOptions, RgPhase};
use scarlab::rqc::{self, ChannelParams};
use scarlab::spin::{self, Boundary, MeasurementScheme, SpinOneXYParams, SteadyOptions, TrajectoryOptions, XyCoupling};
use scarlab::variational::{self, DiagramOptions, KernelVariant, MeanFieldOptions, Method};

use crate::config::*;
use crate::error::CliError;
use crate::table::ResultTable;

type Row = Result<Vec<f64>, CliError>;

fn collect<T: Sync>(items: &[T], f: impl Fn(&T) -> Row + Sync + Send) -> Result<Vec<Vec<f64>>, CliError> {
    items.par_iter().map(f).collect()
}

fn fill(columns: &[&str], rows: Vec<Vec<f64>>) -> ResultTable {
    let mut t = ResultTable::new(columns);
    rows.into_iter().for_each(|r| t.push(r));
    t
}

fn channel_points(grid: &ChannelGrid, r: f64) -> Result<Vec<ChannelParams>, CliError> {
    grid.expand().into_iter().map(|(a, c)| ChannelParams::new(a, c, r).map_err(CliError::from)).collect()
}

fn as_flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn case_code(c: SaddleCase) -> f64 {
    match c {
        SaddleCase::Interior => 0.0,
        SaddleCase::Boundary => 1.0,
    }
}

pub fn rqc_exact(p: &RqcExactParams) -> Result<ResultTable, CliError> {
    let pts = channel_points(&p.grid, p.r)?;
    rqc::brickwork_operator(&ChannelParams::new(0.5, 0.0, p.r)?, p.l)?;
    let rows = collect(&pts, |cp| {
        let s = rqc::steady_state_exact(cp, p.l, p.tol)?;
        Ok(vec![cp.a, cp.b(), cp.c, s.pair.value.re, s.pair.value.im, s.pair.residual, s.scar_weight])
    })?;
    Ok(fill(&["a", "b", "c", "eigenvalue_re", "eigenvalue_im", "residual", "scar_weight"], rows))
}

fn diagram(pts: &[ChannelParams], opts: &DiagramOptions) -> Result<ResultTable, CliError> {
    let rows = collect(pts, |cp| {
        let d = variational::phase_point(cp.a, cp.c, opts)?;
        Ok(vec![cp.a, cp.b(), cp.c, d.magnetization, d.lambda_sq])
    })?;
    Ok(fill(&["a", "b", "c", "magnetization", "lambda_sq"], rows))
}

pub fn rqc_meanfield(p: &RqcMeanfieldParams) -> Result<ResultTable, CliError> {
    let pts = channel_points(&p.grid, p.r)?;
    let variant = match p.kernel {
        Kernel::Contracted => KernelVariant::Contracted,
        Kernel::Printed => KernelVariant::Printed,
        Kernel::Symmetric => KernelVariant::Symmetric,
    };
    let opts = DiagramOptions {
        r: p.r,
        method: Method::MeanField,
        meanfield: MeanFieldOptions { grid: p.angle_grid, variant, ..MeanFieldOptions::default() },
        l: p.l,
        ..DiagramOptions::default()
    };
    diagram(&pts, &opts)
}

pub fn rqc_dmrg(p: &RqcDmrgParams, seed: u64) -> Result<ResultTable, CliError> {
    let pts = channel_points(&p.grid, p.r)?;
    let opts = DiagramOptions {
        r: p.r,
        method: Method::Dmrg,
        l: p.l,
        chi: p.chi,
        sweeps: p.sweeps,
        tol: p.tol,
        seed,
        ..DiagramOptions::default()
    };
    diagram(&pts, &opts)
}

pub fn rqc_rg(p: &RqcRgParams) -> Result<ResultTable, CliError> {
    let pts = channel_points(&p.grid, p.r)?;
    let rule = match p.rule {
        Rule::Majority => BlockRule::Majority,
        Rule::Decimation => BlockRule::Decimation,
    };
    let opts = RgOptions { steps: p.steps, r: p.r, rule, ..RgOptions::default() };
    let rows = collect(&pts, |cp| {
        let row = rg::rg_point(cp.a, cp.c, &opts)?;
        let phase = match row.phase {
            RgPhase::Qmbs => 1.0,
            RgPhase::Thermal => 0.0,
            RgPhase::Undecided => -1.0,
        };
        Ok(vec![cp.a, cp.b(), cp.c, row.down_component, phase])
    })?;
    let mut t = fill(&["a", "b", "c", "down_component", "phase"], rows);
    t.extra.insert("phase_codes".into(), json!({"qmbs": 1, "thermal": 0, "undecided": -1}));
    Ok(t)
}

fn eft_points(b: &EftParamsBlock) -> Result<Vec<EftParams>, CliError> {
    let vs = b.v.expand();
    let mut out = Vec::new();
    for g in b.g.expand() {
        for &v in &vs {
            out.push(EftParams::new(b.j, v, g, b.kappa, b.r)?);
        }
    }
    Ok(out)
}

fn eft_opts(b: &EftParamsBlock) -> OptimizeOptions {
    OptimizeOptions { grid: b.u_grid, ..OptimizeOptions::default() }
}

pub fn eft_diagram(b: &EftParamsBlock) -> Result<ResultTable, CliError> {
    let pts = eft_points(b)?;
    let opts = eft_opts(b);
    let rows = collect(&pts, |p| {
        let s = eft::optimize_config(p, &opts)?;
        Ok(vec![p.g, p.v, s.config.theta, s.config.delta_phi, s.energy_density, s.m_z, case_code(s.case), as_flag(s.degenerate)])
    })?;
    let mut t = fill(&["g", "v", "theta", "delta_phi", "energy_density", "m_z", "case", "degenerate"], rows);
    t.extra.insert("case_codes".into(), json!({"interior": 0, "boundary": 1}));
    Ok(t)
}

pub fn eft_rpa(p: &EftRpaParams) -> Result<ResultTable, CliError> {
    let pts = eft_points(&p.eft)?;
    let opts = eft_opts(&p.eft);
    let rows = collect(&pts, |e| {
        let s = eft::optimize_config(e, &opts)?;
        let c = eft::spin_wave_coeffs(e, s.config.theta)?;
        let gap_theta = eft::min_gap(c.t_theta, c.m_theta, p.k_points);
        let gap_phi = eft::min_gap(c.t_phi, c.m_phi, p.k_points);
        let vals = [c.t_theta, c.m_theta, c.t_phi, c.m_phi, c.j_theta, gap_theta, gap_phi];
        let defined = as_flag(vals.iter().all(|x| x.is_finite()));
        let mut row = vec![e.g, e.v, s.config.theta, case_code(s.case), defined];
        row.extend(vals);
        Ok(row)
    })?;
    let mut t = fill(RPA_COLUMNS, rows);
    t.flagged.extend(RPA_COLUMNS[5..].iter().map(|s| s.to_string()));
    Ok(t)
}

/// Coefficients at boundary optima (Θ = 0) are undefined and come out as NaN.
const RPA_COLUMNS: &[&str] =
    &["g", "v", "theta", "case", "defined", "t_theta", "m_theta", "t_phi", "m_phi", "j_theta", "gap_theta", "gap_phi"];

pub fn eft_correction(p: &EftCorrectionParams) -> Result<ResultTable, CliError> {
    let pts = eft_points(&p.eft)?;
    let opts = eft_opts(&p.eft);
    let rows = collect(&pts, |e| {
        let s = eft::optimize_config(e, &opts)?;
        let c = eft::spin_wave_coeffs(e, s.config.theta)?;
        let inp = CorrectionInput { q: p.q, s_size: p.s_size, l: p.l, t: p.t, kappa: e.kappa, r: e.r };
        let (value, valid) = match eft::finite_q_correction(&c, s.case, &inp) {
            Ok(x) => (x, 1.0),
            Err(EftError::InvalidCase(_)) | Err(EftError::PoleAtK(_)) => (f64::NAN, 0.0),
            Err(err) => return Err(err.into()),
        };
        Ok(vec![e.g, e.v, case_code(s.case), value, valid])
    })?;
    let mut t = fill(&["g", "v", "case", "correction", "valid"], rows);
    t.flagged.push("correction".into());
    Ok(t)
}

fn xy_params(m: &XyModel, g: f64) -> Result<SpinOneXYParams, CliError> {
    let mut p = SpinOneXYParams::new(m.l);
    p.j = m.j;
    p.h = m.h;
    p.d = m.d;
    p.v = Complex64::new(m.v_re, m.v_im);
    p.g = g;
    p.boundary = match m.boundary {
        BoundaryName::Open => Boundary::Open,
        BoundaryName::Periodic => Boundary::Periodic,
    };
    p.coupling = match m.coupling {
        CouplingName::Standard => XyCoupling::Standard,
        CouplingName::Skewed => XyCoupling::Skewed,
    };
    p.validate()?;
    Ok(p)
}

pub fn xy_steady(p: &XySteadyParams, seed: u64) -> Result<ResultTable, CliError> {
    let pts: Vec<SpinOneXYParams> = p.g.expand().into_iter().map(|g| xy_params(&p.model, g)).collect::<Result<_, _>>()?;
    let opts = SteadyOptions { cluster_tol: p.cluster_tol, seed };
    let rows = collect(&pts, |q| {
        let s = spin::steady_state(q, &opts)?;
        Ok(vec![q.g, s.pair.value.re, s.pair.value.im, s.pair.residual, s.o_expect, s.pxy_expect, s.rank as f64])
    })?;
    Ok(fill(&["g", "energy_re", "energy_im", "residual", "order_parameter", "pxy", "rank"], rows))
}

pub fn xy_spectrum(p: &XySpectrumParams) -> Result<ResultTable, CliError> {
    let pts: Vec<SpinOneXYParams> = p.g.expand().into_iter().map(|g| xy_params(&p.model, g)).collect::<Result<_, _>>()?;
    let blocks: Vec<Vec<Vec<f64>>> = pts
        .par_iter()
        .map(|q| {
            let rows = spin::spectrum_scan(q, &[q.g], p.k)?;
            Ok(rows[0].values.iter().enumerate().map(|(i, z)| vec![q.g, i as f64, z.re, z.im]).collect())
        })
        .collect::<Result<_, CliError>>()?;
    Ok(fill(&["g", "index", "energy_re", "energy_im"], blocks.into_iter().flatten().collect()))
}

pub fn xy_trajectory(p: &XyTrajectoryParams, seed: u64) -> Result<ResultTable, CliError> {
    let q = xy_params(&p.model, 0.0)?;
    let scheme = match p.scheme {
        Scheme::GateReplacement { p } => MeasurementScheme::GateReplacement { p },
        Scheme::Poisson { rate } => MeasurementScheme::Poisson { rate },
    };
    let opts = TrajectoryOptions { scheme, t_final: p.t_final, dt: p.dt, n_traj: p.n_traj, seed, max_restarts: p.max_restarts };
    let ens = spin::trajectory_run(&q, &opts, None)?;
    let rows = ens.times.iter().zip(&ens.mean_o).map(|(&t, &o)| vec![t, o]).collect();
    let mut t = fill(&["t", "mean_order_parameter"], rows);
    t.extra.insert("annihilated".into(), json!(ens.annihilated));
    t.extra.insert(
        "trajectories".into(),
        json!(ens.records.iter().map(|r| json!({"seed": r.seed, "projections": r.projection_events.len()})).collect::<Vec<_>>()),
    );
    Ok(t)
}

pub fn xy_gibbs(p: &XyGibbsParams) -> Result<ResultTable, CliError> {
    let q = xy_params(&p.model, 0.0)?;
    let betas = p.beta.expand();
    let rows = collect(&betas, |&b| Ok(vec![b, spin::gibbs_order_parameter(&q, b)?]))?;
    Ok(fill(&["beta", "order_parameter"], rows))
}

pub fn pxp_verify(p: &PxpParams) -> Result<ResultTable, CliError> {
    let rep = spin::deformed_pxp_verify(p.l)?;
    let rows = rep
        .rows
        .iter()
        .map(|r| vec![r.n as f64, r.zeeman_energy, r.energy, r.residual, r.sm_residual, r.ryd_energy, r.ryd_residual])
        .collect();
    Ok(fill(&["n", "zeeman_energy", "energy", "residual", "sm_residual", "ryd_energy", "ryd_residual"], rows))
}
