//! 3×3 block-spin renormalization of the plaquette weight.
//!
//! The block is a 3×3 patch of vertices. Vertex (i, j), row i counted from the bottom,
//! carries W(left, top, bottom, right) on its four bonds. Each coarse leg is read off the
//! three external bonds on that side of the block.

use crate::lattice::{boltzmann_weight, widx, PlaquetteWeight};
use crate::rqc::{ChannelError, ChannelParams, DOWN, UP};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RgError {
    #[error("all weight components vanished")]
    DegenerateWeight,
    #[error("x and y are both zero")]
    ZeroDenominator,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// How a coarse leg is assigned from its three fine legs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BlockRule {
    /// Indicator on the 3-spin majority.
    #[default]
    Majority,
    /// Coarse leg equals the central fine leg.
    Decimation,
}

impl BlockRule {
    #[inline]
    fn coarse(self, s: [usize; 3]) -> usize {
        match self {
            BlockRule::Majority => {
                if s.iter().filter(|&&x| x == DOWN).count() >= 2 {
                    DOWN
                } else {
                    UP
                }
            }
            BlockRule::Decimation => s[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgPhase {
    Qmbs,
    Thermal,
    Undecided,
}

impl RgPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            RgPhase::Qmbs => "qmbs",
            RgPhase::Thermal => "thermal",
            RgPhase::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgClassification {
    pub phase: RgPhase,
    pub down_component: f64,
    /// (x, y) = (W(↑↑↓↑), W(↑↑↑↑)) when thermal.
    pub slow_components: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyThresholds {
    pub qmbs: f64,
    pub others: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        ClassifyThresholds { qmbs: 0.99, others: 0.01 }
    }
}

#[derive(Clone, Debug)]
pub struct RgState {
    pub weight: PlaquetteWeight,
    pub step: usize,
    pub rescale_log: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RgFlow {
    pub trajectory: Vec<PlaquetteWeight>,
    pub state: RgState,
    pub classification: RgClassification,
}

/// Entry index of the thermal fixed point, W(↑↑↓↓).
pub const THERMAL_INDEX: usize = 0b0011;
pub const QMBS_INDEX: usize = 0b1111;
const X_INDEX: usize = 0b0010;
const Y_INDEX: usize = 0b0000;

/// Block sum before rescaling, via row contraction.
pub fn block_sum(w: &PlaquetteWeight, rule: BlockRule) -> PlaquetteWeight {
    // Row of three vertices: R[l][T U V][B C D][r], tops and bottoms packed as 3-bit words,
    // first vertex most significant.
    let mut row = vec![0.0; 2 * 8 * 8 * 2];
    let ridx = |l: usize, t: usize, b: usize, r: usize| ((l * 8 + t) * 8 + b) * 2 + r;
    for l in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                for r in 0..2 {
                    for t in 0..8 {
                        for b in 0..8 {
                            let bit = |v: usize, k: usize| (v >> (2 - k)) & 1;
                            let v = w.get(l, bit(t, 0), bit(b, 0), x) * w.get(x, bit(t, 1), bit(b, 1), y) * w.get(y, bit(t, 2), bit(b, 2), r);
                            if v != 0.0 {
                                row[ridx(l, t, b, r)] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    // Stack rows 0 (bottom), 1, 2 (top): top word of row k equals bottom word of row k+1.
    let mut out = PlaquetteWeight::zero();
    for l0 in 0..2 {
        for r0 in 0..2 {
            for b in 0..8 {
                for m1 in 0..8 {
                    let v0 = row[ridx(l0, m1, b, r0)];
                    if v0 == 0.0 {
                        continue;
                    }
                    for l1 in 0..2 {
                        for r1 in 0..2 {
                            for m2 in 0..8 {
                                let v1 = row[ridx(l1, m2, m1, r1)];
                                if v1 == 0.0 {
                                    continue;
                                }
                                let v01 = v0 * v1;
                                for l2 in 0..2 {
                                    for r2 in 0..2 {
                                        for t in 0..8 {
                                            let v2 = row[ridx(l2, t, m2, r2)];
                                            if v2 == 0.0 {
                                                continue;
                                            }
                                            let cl = rule.coarse([l0, l1, l2]);
                                            let cr = rule.coarse([r0, r1, r2]);
                                            let ct = rule.coarse([t >> 2, (t >> 1) & 1, t & 1]);
                                            let cb = rule.coarse([b >> 2, (b >> 1) & 1, b & 1]);
                                            out.w[widx(cl, ct, cb, cr)] += v01 * v2;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Block sum by direct enumeration of all 24 bonds of the 3×3 vertex patch.
pub fn block_sum_brute(w: &PlaquetteWeight, rule: BlockRule) -> PlaquetteWeight {
    // Horizontal bonds h[i][j], j = 0..=3, j = 0 and 3 external. Vertical bonds v[i][j],
    // i = 0..=3 counted from the bottom, i = 0 and 3 external.
    let hbit = |cfg: u32, i: usize, j: usize| ((cfg >> (i * 4 + j)) & 1) as usize;
    let vbit = |cfg: u32, i: usize, j: usize| ((cfg >> (12 + i * 3 + j)) & 1) as usize;
    let mut out = PlaquetteWeight::zero();
    for cfg in 0u32..(1 << 24) {
        let mut prod = 1.0;
        'outer: for i in 0..3 {
            for j in 0..3 {
                prod *= w.get(hbit(cfg, i, j), vbit(cfg, i + 1, j), vbit(cfg, i, j), hbit(cfg, i, j + 1));
                if prod == 0.0 {
                    break 'outer;
                }
            }
        }
        if prod == 0.0 {
            continue;
        }
        let cl = rule.coarse([hbit(cfg, 0, 0), hbit(cfg, 1, 0), hbit(cfg, 2, 0)]);
        let cr = rule.coarse([hbit(cfg, 0, 3), hbit(cfg, 1, 3), hbit(cfg, 2, 3)]);
        let ct = rule.coarse([vbit(cfg, 3, 0), vbit(cfg, 3, 1), vbit(cfg, 3, 2)]);
        let cb = rule.coarse([vbit(cfg, 0, 0), vbit(cfg, 0, 1), vbit(cfg, 0, 2)]);
        out.w[widx(cl, ct, cb, cr)] += prod;
    }
    out
}

/// One RG step; returns the rescaled weight and the reference value W_c.
pub fn block_spin_step_with(w: &PlaquetteWeight, rule: BlockRule) -> Result<(PlaquetteWeight, f64), RgError> {
    let raw = block_sum(w, rule);
    let wc = raw.w.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
    if wc == 0.0 || !wc.is_finite() {
        return Err(RgError::DegenerateWeight);
    }
    Ok((raw.scaled(1.0 / wc), wc))
}

pub fn block_spin_step(w: &PlaquetteWeight) -> Result<PlaquetteWeight, RgError> {
    block_spin_step_with(w, BlockRule::Majority).map(|x| x.0)
}

pub fn classify(w: &PlaquetteWeight, th: &ClassifyThresholds) -> RgClassification {
    let down = w.w[QMBS_INDEX];
    let others_small = (0..16).filter(|&k| k != QMBS_INDEX).all(|k| w.w[k].abs() < th.others);
    if down > th.qmbs && others_small {
        return RgClassification { phase: RgPhase::Qmbs, down_component: down, slow_components: None };
    }
    let tval = w.w[THERMAL_INDEX];
    let is_max = (0..16).all(|k| w.w[k].abs() <= tval * (1.0 + 1e-12));
    if tval > 0.0 && is_max {
        return RgClassification { phase: RgPhase::Thermal, down_component: down, slow_components: Some((w.w[X_INDEX], w.w[Y_INDEX])) };
    }
    RgClassification { phase: RgPhase::Undecided, down_component: down, slow_components: None }
}

pub fn rg_flow_weight(w0: &PlaquetteWeight, steps: usize, rule: BlockRule, th: &ClassifyThresholds) -> Result<RgFlow, RgError> {
    let mut trajectory = vec![w0.clone()];
    let mut rescale_log = Vec::with_capacity(steps);
    let mut w = w0.clone();
    for _ in 0..steps {
        let (next, wc) = block_spin_step_with(&w, rule)?;
        rescale_log.push(wc);
        trajectory.push(next.clone());
        w = next;
    }
    let classification = if steps == 0 {
        RgClassification { phase: RgPhase::Undecided, down_component: w.w[QMBS_INDEX], slow_components: None }
    } else {
        classify(&w, th)
    };
    Ok(RgFlow { trajectory, state: RgState { weight: w, step: steps, rescale_log }, classification })
}

/// Flow from the channel weight for 5 steps by default.
pub fn rg_flow(p: &ChannelParams, steps: usize) -> Result<RgFlow, RgError> {
    rg_flow_weight(&boltzmann_weight(p), steps, BlockRule::Majority, &ClassifyThresholds::default())
}

pub fn thermal_magnetization(x: f64, y: f64) -> Result<f64, RgError> {
    let d = x * x + y * y;
    if d == 0.0 {
        return Err(RgError::ZeroDenominator);
    }
    Ok(-(x * x - y * y) / d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgRow {
    pub a: f64,
    pub c: f64,
    pub down_component: f64,
    pub phase: RgPhase,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgOptions {
    pub steps: usize,
    pub r: f64,
    pub rule: BlockRule,
    pub thresholds: ClassifyThresholds,
}

impl Default for RgOptions {
    fn default() -> Self {
        RgOptions { steps: 5, r: 0.5, rule: BlockRule::Majority, thresholds: ClassifyThresholds::default() }
    }
}

pub fn rg_point(a: f64, cc: f64, opts: &RgOptions) -> Result<RgRow, RgError> {
    let p = ChannelParams::new(a, cc, opts.r)?;
    let f = rg_flow_weight(&boltzmann_weight(&p), opts.steps, opts.rule, &opts.thresholds)?;
    Ok(RgRow { a, c: cc, down_component: f.classification.down_component, phase: f.classification.phase })
}

/// Rows sorted by (a, then c).
pub fn rg_phase_diagram(points: &[(f64, f64)], opts: &RgOptions) -> Result<Vec<RgRow>, RgError> {
    let mut pts = points.to_vec();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    pts.iter().map(|&(a, cc)| rg_point(a, cc, opts)).collect()
}

/// The QMBS fixed point W(↓↓↓↓) = 1.
pub fn qmbs_fixed_point() -> PlaquetteWeight {
    let mut w = PlaquetteWeight::zero();
    w.w[QMBS_INDEX] = 1.0;
    w
}
