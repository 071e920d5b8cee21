//! Backscatter power budget for buried tags and the activation / read
//! distance solvers built on it.
//!
//! Everything is handled in the dB domain. Losses are positive magnitudes:
//!
//! ```text
//! P_rx,tag  = P_T + G_T + G_tag - L_AG2UG(d1)
//! P_rx,read = P_rx,tag + G_tag + G_R + 10 log10(M) - L_UG2AG(d2)
//! ```
//!
//! Distances are horizontal antenna-to-tag offsets, found by bisection on the
//! strictly decreasing received power.

use std::fmt;

use thiserror::Error;

use crate::soil::{Direction, LinkGeometry, SoilChannel, SoilError, SoilProfile};

/// Upper end of the offset bracket searched by the solvers, m.
pub const MAX_OFFSET_M: f64 = 10_000.0;

/// Width at which bisection stops, m.
pub const SOLVER_TOLERANCE_M: f64 = 1.0e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RangeError {
    #[error(transparent)]
    Soil(#[from] SoilError),
    #[error("invalid link parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("no {link} solution: received power at zero offset is {power_dbm:.2} dBm, below the {threshold_dbm} dBm threshold")]
    NoSolution { link: LimitingLink, power_dbm: f64, threshold_dbm: f64 },
    #[error("exciter offset {exciter_offset} m exceeds the activation distance {d_act} m")]
    InfeasibleExcitation { exciter_offset: f64, d_act: f64 },
    #[error("{link} threshold still met at the {MAX_OFFSET_M} m search limit")]
    Unbounded { link: LimitingLink },
}

impl RangeError {
    /// True for the errors that mean "the link cannot close", as opposed to
    /// malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, RangeError::NoSolution { .. } | RangeError::InfeasibleExcitation { .. })
    }
}

/// Link-budget inputs. Powers in dBm, gains in dBi, `m_factor` linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub p_t: f64,
    pub g_t: f64,
    pub g_r: f64,
    pub g_tag: f64,
    pub m_factor: f64,
    pub p_thr: f64,
    pub sensitivity: f64,
    pub gamma: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), RangeError> {
        let fields = [
            ("p_t", self.p_t),
            ("g_t", self.g_t),
            ("g_r", self.g_r),
            ("g_tag", self.g_tag),
            ("p_thr", self.p_thr),
            ("sensitivity", self.sensitivity),
            ("gamma", self.gamma),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(RangeError::InvalidParams(format!("{name} = {value}")));
            }
        }
        if !(self.m_factor > 0.0 && self.m_factor <= 1.0) {
            return Err(RangeError::InvalidParams(format!("m_factor {} not in (0, 1]", self.m_factor)));
        }
        if self.gamma < 2.0 {
            return Err(RangeError::InvalidParams(format!("gamma {} < 2", self.gamma)));
        }
        if self.p_thr <= self.sensitivity {
            return Err(RangeError::InvalidParams(format!(
                "activation threshold {} dBm must exceed reader sensitivity {} dBm",
                self.p_thr, self.sensitivity
            )));
        }
        Ok(())
    }

    pub fn modulation_db(&self) -> f64 {
        10.0 * self.m_factor.log10()
    }
}

/// Power arriving at the tag, dBm.
pub fn tag_received_power(link: &LinkParams, dl_loss: f64) -> f64 {
    link.p_t + link.g_t + link.g_tag - dl_loss
}

/// Backscattered power arriving at the reader, dBm.
pub fn reader_received_power(tag_rx: f64, link: &LinkParams, ul_loss: f64) -> f64 {
    tag_rx + link.g_tag + link.g_r + link.modulation_db() - ul_loss
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Monostatic,
    Bistatic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Monostatic => "monostatic",
            Mode::Bistatic => "bistatic",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "monostatic" | "mono" => Ok(Mode::Monostatic),
            "bistatic" | "bi" => Ok(Mode::Bistatic),
            other => Err(format!("unknown mode '{other}' (expected monostatic or bistatic)")),
        }
    }
}

/// Exciter / reader arrangement.
///
/// In bistatic mode the exciter offset is fixed and only the reader offset is
/// solved for; the reader geometry's own offset is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    pub kind: Mode,
    pub exciter_geometry: LinkGeometry,
    pub reader_geometry: LinkGeometry,
}

impl Configuration {
    pub fn monostatic(geometry: LinkGeometry) -> Self {
        Self { kind: Mode::Monostatic, exciter_geometry: geometry, reader_geometry: geometry }
    }

    pub fn bistatic(exciter_geometry: LinkGeometry, reader_geometry: LinkGeometry) -> Self {
        Self { kind: Mode::Bistatic, exciter_geometry, reader_geometry }
    }

    pub fn validate(&self, link: &LinkParams) -> Result<(), RangeError> {
        self.exciter_geometry.validate()?;
        match self.kind {
            Mode::Monostatic => {
                if link.g_t != link.g_r {
                    return Err(RangeError::InvalidConfiguration(format!(
                        "monostatic link needs G_T = G_R, got {} and {}",
                        link.g_t, link.g_r
                    )));
                }
            }
            Mode::Bistatic => {
                self.reader_geometry.validate()?;
                if self.reader_geometry.tag_depth != self.exciter_geometry.tag_depth {
                    return Err(RangeError::InvalidConfiguration(
                        "exciter and reader must see the same tag depth".into(),
                    ));
                }
                if self.reader_geometry.frequency != self.exciter_geometry.frequency {
                    return Err(RangeError::InvalidConfiguration(
                        "exciter and reader must share one carrier frequency".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitingLink {
    Dl,
    Ul,
}

impl fmt::Display for LimitingLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitingLink::Dl => "DL",
            LimitingLink::Ul => "UL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReport {
    pub d_act: f64,
    pub d_read: f64,
    pub limiting_link: LimitingLink,
    pub effective_range: f64,
}

impl RangeReport {
    /// Distances closer than the solver tolerance count as a tie, which is
    /// reported as DL.
    pub fn new(d_act: f64, d_read: f64) -> Self {
        let limiting_link = if d_act <= d_read + SOLVER_TOLERANCE_M { LimitingLink::Dl } else { LimitingLink::Ul };
        Self { d_act, d_read, limiting_link, effective_range: d_act.min(d_read) }
    }
}

/// Largest offset in `[0, MAX_OFFSET_M]` where `margin` is still non-negative.
/// `margin` must be non-increasing in the offset.
fn solve_offset(link: LimitingLink, threshold: f64, received: impl Fn(f64) -> f64) -> Result<f64, RangeError> {
    let at_zero = received(0.0);
    if at_zero < threshold {
        return Err(RangeError::NoSolution { link, power_dbm: at_zero, threshold_dbm: threshold });
    }
    if received(MAX_OFFSET_M) >= threshold {
        return Err(RangeError::Unbounded { link });
    }
    let (mut lo, mut hi) = (0.0, MAX_OFFSET_M);
    while hi - lo > SOLVER_TOLERANCE_M {
        let mid = 0.5 * (lo + hi);
        if received(mid) >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Activation distance for an already-built soil channel.
pub fn activation_distance_in(
    link: &LinkParams,
    channel: &SoilChannel,
    base_geometry: &LinkGeometry,
) -> Result<f64, RangeError> {
    solve_offset(LimitingLink::Dl, link.p_thr, |x| {
        let dl = channel.path_loss(&base_geometry.with_offset(x), Direction::Ag2Ug, link.gamma);
        tag_received_power(link, dl)
    })
}

/// Read distance for an already-built soil channel. Assumes `config` and
/// `link` were validated.
pub fn read_distance_in(link: &LinkParams, channel: &SoilChannel, config: &Configuration) -> Result<f64, RangeError> {
    match config.kind {
        Mode::Monostatic => {
            let base = config.exciter_geometry;
            solve_offset(LimitingLink::Ul, link.sensitivity, |x| {
                let g = base.with_offset(x);
                let tag_rx = tag_received_power(link, channel.path_loss(&g, Direction::Ag2Ug, link.gamma));
                reader_received_power(tag_rx, link, channel.path_loss(&g, Direction::Ug2Ag, link.gamma))
            })
        }
        Mode::Bistatic => {
            let exciter = config.exciter_geometry;
            let d_act = activation_distance_in(link, channel, &exciter)?;
            if exciter.horizontal_offset > d_act {
                return Err(RangeError::InfeasibleExcitation { exciter_offset: exciter.horizontal_offset, d_act });
            }
            let tag_rx = tag_received_power(link, channel.path_loss(&exciter, Direction::Ag2Ug, link.gamma));
            let reader = config.reader_geometry;
            solve_offset(LimitingLink::Ul, link.sensitivity, |x| {
                let ul = channel.path_loss(&reader.with_offset(x), Direction::Ug2Ag, link.gamma);
                reader_received_power(tag_rx, link, ul)
            })
        }
    }
}

/// Horizontal offset at which the tag's received power falls to `p_thr`.
/// The offset in `base_geometry` is ignored.
pub fn activation_distance(
    link: &LinkParams,
    soil: &SoilProfile,
    base_geometry: &LinkGeometry,
) -> Result<f64, RangeError> {
    link.validate()?;
    base_geometry.validate()?;
    let channel = SoilChannel::new(soil, base_geometry.frequency)?;
    activation_distance_in(link, &channel, base_geometry)
}

/// Horizontal offset at which backscatter at the reader falls to the reader
/// sensitivity.
pub fn read_distance(link: &LinkParams, soil: &SoilProfile, config: &Configuration) -> Result<f64, RangeError> {
    link.validate()?;
    config.validate(link)?;
    let channel = SoilChannel::new(soil, config.exciter_geometry.frequency)?;
    read_distance_in(link, &channel, config)
}

pub fn solve_range(link: &LinkParams, soil: &SoilProfile, config: &Configuration) -> Result<RangeReport, RangeError> {
    link.validate()?;
    config.validate(link)?;
    let channel = SoilChannel::new(soil, config.exciter_geometry.frequency)?;
    let d_act = activation_distance_in(link, &channel, &config.exciter_geometry)?;
    let d_read = read_distance_in(link, &channel, config)?;
    Ok(RangeReport::new(d_act, d_read))
}

/// One moisture point of a sweep. `None` marks a distance with no solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub vwc: f64,
    pub d_act: Option<f64>,
    pub d_read: Option<f64>,
}

impl SweepRow {
    pub fn report(&self) -> Option<RangeReport> {
        Some(RangeReport::new(self.d_act?, self.d_read?))
    }
}

/// `steps` evenly spaced moisture values from `lo` to `hi` inclusive.
pub fn vwc_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let last = steps - 1;
    (0..steps).map(|i| if i == last { hi } else { lo + (hi - lo) * i as f64 / last as f64 }).collect()
}

pub fn sweep_vwc(
    link: &LinkParams,
    soil_base: &SoilProfile,
    vwc_lo: f64,
    vwc_hi: f64,
    steps: usize,
    config: &Configuration,
) -> Result<Vec<SweepRow>, RangeError> {
    if !(0.0 <= vwc_lo && vwc_lo < vwc_hi && vwc_hi <= 1.0) {
        return Err(RangeError::InvalidConfiguration(format!(
            "sweep bounds must satisfy 0 <= lo < hi <= 1, got {vwc_lo}..{vwc_hi}"
        )));
    }
    if steps < 2 {
        return Err(RangeError::InvalidConfiguration(format!("sweep needs at least 2 steps, got {steps}")));
    }
    link.validate()?;
    config.validate(link)?;

    let frequency = config.exciter_geometry.frequency;
    vwc_grid(vwc_lo, vwc_hi, steps)
        .into_iter()
        .map(|vwc| {
            let channel = SoilChannel::new(&SoilProfile { vwc, ..*soil_base }, frequency)?;
            let infeasible_as_none = |r: Result<f64, RangeError>| match r {
                Ok(d) => Ok(Some(d)),
                Err(e) if e.is_infeasible() => Ok(None),
                Err(e) => Err(e),
            };
            let d_act = infeasible_as_none(activation_distance_in(link, &channel, &config.exciter_geometry))?;
            let d_read = infeasible_as_none(read_distance_in(link, &channel, config))?;
            Ok(SweepRow { vwc, d_act, d_read })
        })
        .collect()
}
