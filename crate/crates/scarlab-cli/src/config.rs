//! Run configuration: one JSON object per run, unknown keys rejected at every level.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    RqcExact,
    RqcMeanfield,
    RqcDmrg,
    RqcRg,
    EftDiagram,
    EftRpa,
    EftCorrection,
    XySteady,
    XySpectrum,
    XyTrajectory,
    XyGibbs,
    PxpVerify,
    Validate,
}

impl Subcommand {
    pub fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

/// Either an explicit list or `{start, stop, n}` with both ends included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range(Linspace),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Values {
    pub fn range(start: f64, stop: f64, n: usize) -> Self {
        Values::Range(Linspace { start, stop, n })
    }

    pub fn expand(&self) -> Vec<f64> {
        match self {
            Values::List(v) => v.clone(),
            Values::Range(r) => match r.n {
                0 => Vec::new(),
                1 => vec![r.start],
                n => (0..n).map(|i| r.start + (r.stop - r.start) * i as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

/// (a, c) points: an explicit list overrides the n × n triangle grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelGrid {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
}

impl ChannelGrid {
    fn triangle(n: usize) -> Self {
        ChannelGrid { n, points: None }
    }

    pub fn expand(&self) -> Vec<(f64, f64)> {
        match &self.points {
            Some(p) => p.iter().map(|x| (x[0], x[1])).collect(),
            None => scarlab::variational::triangle_grid(self.n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RqcExactParams {
    pub l: usize,
    pub r: f64,
    pub tol: f64,
    pub grid: ChannelGrid,
}

impl Default for RqcExactParams {
    fn default() -> Self {
        RqcExactParams { l: 6, r: 0.5, tol: 1e-10, grid: ChannelGrid::triangle(11) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    Contracted,
    Printed,
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RqcMeanfieldParams {
    pub l: usize,
    pub r: f64,
    pub angle_grid: usize,
    pub kernel: Kernel,
    pub grid: ChannelGrid,
}

impl Default for RqcMeanfieldParams {
    fn default() -> Self {
        RqcMeanfieldParams { l: 8, r: 0.5, angle_grid: 64, kernel: Kernel::Contracted, grid: ChannelGrid::triangle(11) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RqcDmrgParams {
    pub l: usize,
    pub r: f64,
    pub chi: usize,
    pub sweeps: usize,
    pub tol: f64,
    pub grid: ChannelGrid,
}

impl Default for RqcDmrgParams {
    fn default() -> Self {
        RqcDmrgParams { l: 8, r: 0.5, chi: 16, sweeps: 12, tol: 1e-10, grid: ChannelGrid::triangle(11) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    #[default]
    Majority,
    Decimation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RqcRgParams {
    pub r: f64,
    pub steps: usize,
    pub rule: Rule,
    pub grid: ChannelGrid,
}

impl Default for RqcRgParams {
    fn default() -> Self {
        RqcRgParams { r: 0.5, steps: 5, rule: Rule::Majority, grid: ChannelGrid::triangle(21) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EftParamsBlock {
    pub j: f64,
    pub kappa: f64,
    pub r: f64,
    pub g: Values,
    pub v: Values,
    pub u_grid: usize,
}

impl Default for EftParamsBlock {
    fn default() -> Self {
        EftParamsBlock { j: 1.0, kappa: 1.0, r: 0.1, g: Values::range(0.0, 2.0, 41), v: Values::range(0.0, 2.0, 41), u_grid: 1024 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EftRpaParams {
    pub eft: EftParamsBlock,
    pub k_points: usize,
}

impl Default for EftRpaParams {
    fn default() -> Self {
        EftRpaParams { eft: EftParamsBlock::default(), k_points: scarlab::eft::STABILITY_K_POINTS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EftCorrectionParams {
    pub eft: EftParamsBlock,
    pub q: usize,
    pub s_size: usize,
    pub l: usize,
    pub t: f64,
}

impl Default for EftCorrectionParams {
    fn default() -> Self {
        EftCorrectionParams { eft: EftParamsBlock::default(), q: 8, s_size: 4, l: 8, t: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryName {
    Open,
    #[default]
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingName {
    #[default]
    Standard,
    Skewed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XyModel {
    pub l: usize,
    pub j: f64,
    pub h: f64,
    pub d: f64,
    pub v_re: f64,
    pub v_im: f64,
    pub boundary: BoundaryName,
    pub coupling: CouplingName,
}

impl Default for XyModel {
    fn default() -> Self {
        XyModel {
            l: 6,
            j: 1.0,
            h: 1.0,
            d: 1.0,
            v_re: 1.0,
            v_im: 0.0,
            boundary: BoundaryName::Periodic,
            coupling: CouplingName::Standard,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XySteadyParams {
    pub model: XyModel,
    pub g: Values,
    pub cluster_tol: f64,
}

impl Default for XySteadyParams {
    fn default() -> Self {
        XySteadyParams { model: XyModel::default(), g: Values::range(0.03, 3.0, 100), cluster_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XySpectrumParams {
    pub model: XyModel,
    pub g: Values,
    pub k: usize,
}

impl Default for XySpectrumParams {
    fn default() -> Self {
        XySpectrumParams { model: XyModel::default(), g: Values::range(0.0, 3.0, 31), k: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scheme {
    GateReplacement { p: f64 },
    Poisson { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XyTrajectoryParams {
    pub model: XyModel,
    pub scheme: Scheme,
    pub t_final: f64,
    pub dt: f64,
    pub n_traj: usize,
    pub max_restarts: usize,
}

impl Default for XyTrajectoryParams {
    fn default() -> Self {
        XyTrajectoryParams {
            model: XyModel { l: 8, ..XyModel::default() },
            scheme: Scheme::GateReplacement { p: 0.03 },
            t_final: 10.0,
            dt: 0.05,
            n_traj: 30,
            max_restarts: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XyGibbsParams {
    pub model: XyModel,
    pub beta: Values,
}

impl Default for XyGibbsParams {
    fn default() -> Self {
        XyGibbsParams { model: XyModel::default(), beta: Values::range(0.0, 10.0, 41) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PxpParams {
    pub l: usize,
}

impl Default for PxpParams {
    fn default() -> Self {
        PxpParams { l: 8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateParams {}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    RqcExact(RqcExactParams),
    RqcMeanfield(RqcMeanfieldParams),
    RqcDmrg(RqcDmrgParams),
    RqcRg(RqcRgParams),
    EftDiagram(EftParamsBlock),
    EftRpa(EftRpaParams),
    EftCorrection(EftCorrectionParams),
    XySteady(XySteadyParams),
    XySpectrum(XySpectrumParams),
    XyTrajectory(XyTrajectoryParams),
    XyGibbs(XyGibbsParams),
    PxpVerify(PxpParams),
    Validate(ValidateParams),
}

impl Params {
    pub fn from_value(cmd: Subcommand, v: Value) -> Result<Self, CliError> {
        fn de<T: for<'a> Deserialize<'a>>(v: Value) -> Result<T, CliError> {
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("params: {e}")))
        }
        Ok(match cmd {
            Subcommand::RqcExact => Params::RqcExact(de(v)?),
            Subcommand::RqcMeanfield => Params::RqcMeanfield(de(v)?),
            Subcommand::RqcDmrg => Params::RqcDmrg(de(v)?),
            Subcommand::RqcRg => Params::RqcRg(de(v)?),
            Subcommand::EftDiagram => Params::EftDiagram(de(v)?),
            Subcommand::EftRpa => Params::EftRpa(de(v)?),
            Subcommand::EftCorrection => Params::EftCorrection(de(v)?),
            Subcommand::XySteady => Params::XySteady(de(v)?),
            Subcommand::XySpectrum => Params::XySpectrum(de(v)?),
            Subcommand::XyTrajectory => Params::XyTrajectory(de(v)?),
            Subcommand::XyGibbs => Params::XyGibbs(de(v)?),
            Subcommand::PxpVerify => Params::PxpVerify(de(v)?),
            Subcommand::Validate => Params::Validate(de(v)?),
        })
    }
}

/// The fully resolved configuration; its JSON form is the metadata echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub params: Params,
    pub out: Option<String>,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    subcommand: Subcommand,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    out: Option<String>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_threads")]
    threads: usize,
}

fn default_seed() -> u64 {
    1
}

fn default_threads() -> usize {
    1
}

impl TryFrom<RawConfig> for RunConfig {
    type Error = CliError;

    fn try_from(raw: RawConfig) -> Result<Self, CliError> {
        let params = Params::from_value(raw.subcommand, raw.params.unwrap_or_else(|| Value::Object(Default::default())))?;
        Ok(RunConfig { subcommand: raw.subcommand, params, out: raw.out, seed: raw.seed, threads: raw.threads })
    }
}

impl RunConfig {
    pub fn defaults(subcommand: Subcommand) -> Self {
        let params = Params::from_value(subcommand, Value::Object(Default::default())).expect("defaults deserialize");
        RunConfig { subcommand, params, out: None, seed: default_seed(), threads: default_threads() }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips_for_every_subcommand() {
        for cmd in Subcommand::value_variants() {
            let cfg = RunConfig::defaults(*cmd);
            let back = RunConfig::parse(&cfg.echo().to_string()).unwrap();
            assert_eq!(back, cfg, "{}", cmd.name());
        }
    }

    #[test]
    fn ranges_include_both_ends() {
        assert_eq!(Values::range(0.0, 1.0, 3).expand(), vec![0.0, 0.5, 1.0]);
        assert!(Values::range(0.0, 1.0, 0).expand().is_empty());
    }

    #[test]
    fn nested_unknown_key_rejected() {
        let text = r#"{"subcommand": "xy-steady", "params": {"model": {"l": 4, "spin": 1}}}"#;
        assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))));
    }
}
