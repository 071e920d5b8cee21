//! Soil dielectric properties and the composite above-ground / underground
//! channel used by both halves of a buried-tag link.
//!
//! The loss model has three additive dB terms:
//!
//! * an above-ground log-distance term with exponent `gamma`, anchored to the
//!   free-space loss at 1 m,
//! * an underground modified-Friis term, `20 log10(4 pi d / lambda_soil)`
//!   spreading plus `8.686 alpha d` absorption,
//! * a Fresnel power-transmission loss at the air/soil boundary, evaluated at
//!   normal incidence and depending on the direction of travel.
//!
//! The ray is the straight segment from the antenna to the tag, split where
//! it crosses the surface. Snell bending is not modeled.

use std::f64::consts::{LN_10, PI};
use std::fmt;

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permeability, H/m.
pub const MU_0: f64 = 4.0e-7 * PI;

/// Vacuum permittivity, F/m, chosen consistent with [`MU_0`] and [`SPEED_OF_LIGHT`].
pub const EPS_0: f64 = 1.0 / (MU_0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// UHF RFID carrier used when none is given.
pub const DEFAULT_FREQUENCY_HZ: f64 = 915.0e6;

/// Validity band of the Peplinski model, Hz.
pub const PEPLINSKI_BAND_HZ: (f64, f64) = (0.3e9, 1.3e9);

/// Reference distance of the above-ground log-distance model, m.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// Nepers to decibels.
const NP_TO_DB: f64 = 20.0 / LN_10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoilError {
    #[error("invalid soil profile: {0}")]
    InvalidSoil(String),
    #[error("invalid permittivity: {0}")]
    InvalidPermittivity(String),
    #[error("invalid link geometry: {0}")]
    InvalidGeometry(String),
    #[error(
        "frequency {frequency_hz} Hz outside the dielectric model band {lo_hz}..{hi_hz} Hz",
        lo_hz = .band_hz.0,
        hi_hz = .band_hz.1
    )]
    OutOfModelRange { frequency_hz: f64, band_hz: (f64, f64) },
}

/// Composition and moisture state of a soil volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilProfile {
    /// Volumetric water content, fraction.
    pub vwc: f64,
    pub clay_fraction: f64,
    pub sand_fraction: f64,
    /// g/cm³
    pub bulk_density: f64,
    /// g/cm³
    pub particle_density: f64,
}

impl SoilProfile {
    /// Default composition (silty clay loam) at the given moisture.
    pub fn with_vwc(vwc: f64) -> Self {
        Self { vwc, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SoilError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.vwc) {
            return Err(SoilError::InvalidSoil(format!("vwc {} not in [0, 1]", self.vwc)));
        }
        if !in_unit(self.clay_fraction) || !in_unit(self.sand_fraction) {
            return Err(SoilError::InvalidSoil("clay and sand fractions must lie in [0, 1]".into()));
        }
        if self.clay_fraction + self.sand_fraction > 1.0 {
            return Err(SoilError::InvalidSoil(format!(
                "clay + sand = {} exceeds 1",
                self.clay_fraction + self.sand_fraction
            )));
        }
        if !(self.bulk_density > 0.0 && self.particle_density > 0.0) {
            return Err(SoilError::InvalidSoil("densities must be positive".into()));
        }
        if self.bulk_density >= self.particle_density {
            return Err(SoilError::InvalidSoil(format!(
                "bulk density {} must be below particle density {}",
                self.bulk_density, self.particle_density
            )));
        }
        Ok(())
    }
}

impl Default for SoilProfile {
    fn default() -> Self {
        Self { vwc: 0.15, clay_fraction: 0.30, sand_fraction: 0.50, bulk_density: 1.5, particle_density: 2.66 }
    }
}

/// Relative complex permittivity `eps_real - j eps_imag`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPermittivity {
    pub eps_real: f64,
    pub eps_imag: f64,
}

impl ComplexPermittivity {
    pub const FREE_SPACE: Self = Self { eps_real: 1.0, eps_imag: 0.0 };

    pub fn new(eps_real: f64, eps_imag: f64) -> Result<Self, SoilError> {
        let eps = Self { eps_real, eps_imag };
        eps.validate()?;
        Ok(eps)
    }

    pub fn validate(&self) -> Result<(), SoilError> {
        if !(self.eps_real >= 1.0) || !self.eps_real.is_finite() {
            return Err(SoilError::InvalidPermittivity(format!("eps_real {} < 1", self.eps_real)));
        }
        if !(self.eps_imag >= 0.0) || !self.eps_imag.is_finite() {
            return Err(SoilError::InvalidPermittivity(format!("eps_imag {} < 0", self.eps_imag)));
        }
        Ok(())
    }

    /// Complex refractive index `n - j k` as `(n, k)`, with `n > 0`, `k >= 0`.
    pub fn refractive_index(&self) -> (f64, f64) {
        let modulus = self.eps_real.hypot(self.eps_imag);
        let n = ((modulus + self.eps_real) / 2.0).sqrt();
        let k = ((modulus - self.eps_real) / 2.0).max(0.0).sqrt();
        (n, k)
    }
}

/// Above-ground point, buried tag, and the horizontal distance between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Antenna height above the surface, m.
    pub tx_height: f64,
    /// Tag burial depth, m.
    pub tag_depth: f64,
    /// Horizontal distance between antenna and tag, m.
    pub horizontal_offset: f64,
    /// Carrier frequency, Hz.
    pub frequency: f64,
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<(), SoilError> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !ok(self.tx_height) {
            return Err(SoilError::InvalidGeometry(format!("tx_height {}", self.tx_height)));
        }
        if !ok(self.tag_depth) {
            return Err(SoilError::InvalidGeometry(format!("tag_depth {}", self.tag_depth)));
        }
        if !ok(self.horizontal_offset) {
            return Err(SoilError::InvalidGeometry(format!("horizontal_offset {}", self.horizontal_offset)));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(SoilError::InvalidGeometry(format!("frequency {}", self.frequency)));
        }
        Ok(())
    }

    pub fn with_offset(self, horizontal_offset: f64) -> Self {
        Self { horizontal_offset, ..self }
    }

    /// Splits the straight antenna-tag ray at the surface into
    /// `(above_ground, underground)` path lengths.
    pub fn segments(&self) -> (f64, f64) {
        let vertical = self.tx_height + self.tag_depth;
        if vertical == 0.0 {
            return (self.horizontal_offset, 0.0);
        }
        let total = self.horizontal_offset.hypot(vertical);
        (total * self.tx_height / vertical, total * self.tag_depth / vertical)
    }
}

/// Which side of the air/soil boundary the wave starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Above-ground antenna to buried tag (downlink).
    Ag2Ug,
    /// Buried tag to above-ground antenna (uplink).
    Ug2Ag,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ag2Ug => "AG2UG",
            Direction::Ug2Ag => "UG2AG",
        })
    }
}

/// Peplinski semi-empirical mixing model for the 0.3-1.3 GHz band.
pub fn soil_complex_permittivity(soil: &SoilProfile, frequency: f64) -> Result<ComplexPermittivity, SoilError> {
    soil.validate()?;
    let (lo, hi) = PEPLINSKI_BAND_HZ;
    if !(lo..=hi).contains(&frequency) {
        return Err(SoilError::OutOfModelRange { frequency_hz: frequency, band_hz: PEPLINSKI_BAND_HZ });
    }

    // Debye relaxation of free water at room temperature.
    const EPS_W_INF: f64 = 4.9;
    const EPS_W_STATIC: f64 = 80.1;
    const TWO_PI_TAU_W: f64 = 0.58e-10;
    const SHAPE: f64 = 0.65;

    let SoilProfile { vwc, clay_fraction: clay, sand_fraction: sand, bulk_density: rho_b, particle_density: rho_s } =
        *soil;

    let x = TWO_PI_TAU_W * frequency;
    let relax = 1.0 + x * x;
    let water_real = EPS_W_INF + (EPS_W_STATIC - EPS_W_INF) / relax;
    let water_imag_relax = x * (EPS_W_STATIC - EPS_W_INF) / relax;
    let sigma_eff = 0.0467 + 0.2204 * rho_b - 0.4111 * sand + 0.6614 * clay;
    // Conductive part of the water loss, without its 1/vwc factor.
    let water_imag_cond = sigma_eff / (2.0 * PI * EPS_0 * frequency) * (rho_s - rho_b) / rho_s;

    let eps_solid = (1.01 + 0.44 * rho_s).powi(2) - 0.062;
    let beta_real = 1.2748 - 0.519 * sand - 0.152 * clay;
    let beta_imag = 1.33797 - 0.603 * sand - 0.166 * clay;

    let mix = 1.0 + rho_b / rho_s * (eps_solid.powf(SHAPE) - 1.0) + vwc.powf(beta_real) * water_real.powf(SHAPE) - vwc;
    let eps_real = 1.15 * mix.powf(1.0 / SHAPE) - 0.68;

    // (vwc^b * e_fw''^a)^(1/a) with e_fw'' = relax + cond / vwc, expanded so
    // that vwc = 0 gives exactly zero loss. b / a > 1 for every valid texture.
    let eps_imag = if vwc == 0.0 {
        0.0
    } else {
        let p = beta_imag / SHAPE;
        vwc.powf(p) * water_imag_relax + water_imag_cond * vwc.powf(p - 1.0)
    };

    ComplexPermittivity::new(eps_real.max(1.0), eps_imag)
}

/// Attenuation constant `alpha` (Np/m) and phase constant `beta` (rad/m) of a
/// plane wave in a non-magnetic medium.
pub fn propagation_constants(eps: &ComplexPermittivity, frequency: f64) -> (f64, f64) {
    let k0 = 2.0 * PI * frequency / SPEED_OF_LIGHT;
    let loss_tangent = eps.eps_imag / eps.eps_real;
    let root = (1.0 + loss_tangent * loss_tangent).sqrt();
    let alpha = k0 * (eps.eps_real / 2.0 * (root - 1.0)).sqrt();
    let beta = k0 * (eps.eps_real / 2.0 * (root + 1.0)).sqrt();
    (alpha, beta)
}

/// Modified-Friis loss of the underground segment, dB.
///
/// The spreading term is floored at 0 dB inside the first `lambda / 4 pi`,
/// where the far-field expression would turn into a gain.
pub fn underground_path_loss(alpha: f64, beta: f64, d_ug: f64) -> f64 {
    if d_ug <= 0.0 {
        return 0.0;
    }
    // 4 pi d / lambda_soil with lambda_soil = 2 pi / beta
    let spreading = (20.0 * (2.0 * beta * d_ug).log10()).max(0.0);
    spreading + NP_TO_DB * alpha * d_ug
}

/// Log-distance loss of the above-ground segment, dB, anchored at free-space
/// loss over [`REFERENCE_DISTANCE_M`]. Floored at 0 dB.
pub fn above_ground_path_loss(d_ag: f64, gamma: f64, frequency: f64) -> f64 {
    if d_ag <= 0.0 {
        return 0.0;
    }
    let reference = 20.0 * (4.0 * PI * REFERENCE_DISTANCE_M * frequency / SPEED_OF_LIGHT).log10();
    (reference + 10.0 * gamma * (d_ag / REFERENCE_DISTANCE_M).log10()).max(0.0)
}

/// Fresnel power-transmission loss through the air/soil boundary at normal
/// incidence, dB.
///
/// Transmitted power fraction is `Re(n_t) / Re(n_i) * |2 n_i / (n_i + n_t)|^2`.
/// For a lossless soil both directions coincide; with loss they differ.
pub fn refraction_loss(eps: &ComplexPermittivity, direction: Direction) -> f64 {
    let (n, k) = eps.refractive_index();
    // |1 + n_soil|^2 with n_soil = n - jk
    let sum_sq = (1.0 + n).powi(2) + k * k;
    let transmitted = match direction {
        Direction::Ag2Ug => 4.0 * n / sum_sq,
        Direction::Ug2Ag => 4.0 * (n * n + k * k) / (n * sum_sq),
    };
    (-10.0 * transmitted.log10()).max(0.0)
}

/// The three dB terms of one link direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossBreakdown {
    pub above_ground: f64,
    pub underground: f64,
    pub refraction: f64,
}

impl PathLossBreakdown {
    pub fn total(&self) -> f64 {
        self.above_ground + self.underground + self.refraction
    }
}

/// Soil-derived quantities that do not depend on geometry. Building one per
/// soil profile lets repeated geometry evaluations skip the dielectric model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilChannel {
    pub eps: ComplexPermittivity,
    pub alpha: f64,
    pub beta: f64,
    pub frequency: f64,
}

impl SoilChannel {
    pub fn new(soil: &SoilProfile, frequency: f64) -> Result<Self, SoilError> {
        let eps = soil_complex_permittivity(soil, frequency)?;
        Ok(Self::from_permittivity(eps, frequency))
    }

    pub fn from_permittivity(eps: ComplexPermittivity, frequency: f64) -> Self {
        let (alpha, beta) = propagation_constants(&eps, frequency);
        Self { eps, alpha, beta, frequency }
    }

    /// Loss terms for a geometry; the geometry's frequency is assumed to be
    /// the one this channel was built for.
    pub fn breakdown(&self, geometry: &LinkGeometry, direction: Direction, gamma: f64) -> PathLossBreakdown {
        let (d_ag, d_ug) = geometry.segments();
        PathLossBreakdown {
            above_ground: above_ground_path_loss(d_ag, gamma, self.frequency),
            underground: underground_path_loss(self.alpha, self.beta, d_ug),
            refraction: if geometry.tag_depth > 0.0 { refraction_loss(&self.eps, direction) } else { 0.0 },
        }
    }

    pub fn path_loss(&self, geometry: &LinkGeometry, direction: Direction, gamma: f64) -> f64 {
        self.breakdown(geometry, direction, gamma).total()
    }
}

/// Total AG2UG or UG2AG loss magnitude in dB for one geometry.
pub fn composite_path_loss(
    geometry: &LinkGeometry,
    soil: &SoilProfile,
    direction: Direction,
    gamma: f64,
) -> Result<f64, SoilError> {
    geometry.validate()?;
    let channel = SoilChannel::new(soil, geometry.frequency)?;
    Ok(channel.path_loss(geometry, direction, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-12)
    }

    #[test]
    fn peplinski_matches_reference_script() {
        // oracles/soil_oracle.py
        let cases = [
            (0.05, 5.144203459749919, 0.7141409887400387),
            (0.15, 11.214614378792223, 1.4105382368264934),
            (0.25, 18.468629876523448, 2.031866093850742),
        ];
        for (vwc, er, ei) in cases {
            let eps = soil_complex_permittivity(&SoilProfile::with_vwc(vwc), 915e6).unwrap();
            assert!(close(eps.eps_real, er, 1e-10), "{vwc}: {} vs {er}", eps.eps_real);
            assert!(close(eps.eps_imag, ei, 1e-10), "{vwc}: {} vs {ei}", eps.eps_imag);
        }
    }

    #[test]
    fn wetter_soil_is_lossier() {
        let dry = soil_complex_permittivity(&SoilProfile::with_vwc(0.05), 915e6).unwrap();
        let wet = soil_complex_permittivity(&SoilProfile::with_vwc(0.25), 915e6).unwrap();
        assert!(wet.eps_imag > dry.eps_imag);
    }

    #[test]
    fn dry_soil_has_no_loss() {
        let eps = soil_complex_permittivity(&SoilProfile::with_vwc(0.0), 915e6).unwrap();
        assert_eq!(eps.eps_imag, 0.0);
        assert!(eps.eps_real > 1.0);
    }

    #[test]
    fn rejects_frequency_outside_band() {
        let err = soil_complex_permittivity(&SoilProfile::default(), 2.4e9).unwrap_err();
        assert!(matches!(err, SoilError::OutOfModelRange { .. }));
        assert!(err.to_string().contains("300000000"));
    }

    #[test]
    fn rejects_bad_soil() {
        let soil = SoilProfile { clay_fraction: 0.7, ..SoilProfile::default() };
        assert!(soil.validate().is_err());
        let soil = SoilProfile { bulk_density: 2.7, ..SoilProfile::default() };
        assert!(soil.validate().is_err());
        assert!(SoilProfile::with_vwc(1.2).validate().is_err());
    }

    #[test]
    fn free_space_constants() {
        let f = 915e6;
        let (alpha, beta) = propagation_constants(&ComplexPermittivity::FREE_SPACE, f);
        assert_eq!(alpha, 0.0);
        assert!(close(beta, 2.0 * PI * f / SPEED_OF_LIGHT, 1e-15));
    }

    #[test]
    fn propagation_constants_match_reference_script() {
        let eps = ComplexPermittivity::new(11.214614378792223, 1.4105382368264934).unwrap();
        let (alpha, beta) = propagation_constants(&eps, 915e6);
        assert!(close(alpha, 4.0307809641488035, 1e-9));
        assert!(close(beta, 64.34668648424093, 1e-9));
    }

    #[test]
    fn more_loss_means_more_attenuation() {
        let a = propagation_constants(&ComplexPermittivity::new(10.0, 1.0).unwrap(), 915e6).0;
        let b = propagation_constants(&ComplexPermittivity::new(10.0, 2.0).unwrap(), 915e6).0;
        assert!(b > a);
    }

    #[test]
    fn underground_loss_fixture() {
        let (alpha, beta) = (4.0307809641488035, 64.34668648424093);
        assert_eq!(underground_path_loss(alpha, beta, 0.0), 0.0);
        let l1 = underground_path_loss(alpha, beta, 0.025);
        assert!(close(l1, 11.025196810678704, 1e-10));
        let l2 = underground_path_loss(alpha, beta, 0.05);
        assert!(close(l2, 17.921069689203577, 1e-10));
        assert!(l2 > l1);
    }

    #[test]
    fn refraction_fixtures() {
        assert_eq!(refraction_loss(&ComplexPermittivity::FREE_SPACE, Direction::Ag2Ug), 0.0);
        assert_eq!(refraction_loss(&ComplexPermittivity::FREE_SPACE, Direction::Ug2Ag), 0.0);
        let eps = ComplexPermittivity::new(11.214614378792223, 1.4105382368264934).unwrap();
        assert!(close(refraction_loss(&eps, Direction::Ag2Ug), 1.5126295469371276, 1e-10));
        assert!(close(refraction_loss(&eps, Direction::Ug2Ag), 1.4956212964543958, 1e-10));
    }

    #[test]
    fn lossless_boundary_is_symmetric() {
        let eps = ComplexPermittivity::new(9.0, 0.0).unwrap();
        let down = refraction_loss(&eps, Direction::Ag2Ug);
        let up = refraction_loss(&eps, Direction::Ug2Ag);
        // n = 3: T = 4*3/16
        let expected = -10.0 * (0.75f64).log10();
        assert!((down - expected).abs() < 1e-12);
        assert!((up - expected).abs() < 1e-12);
    }

    #[test]
    fn composite_trial_geometry_fixture() {
        let geometry = LinkGeometry { tx_height: 0.3, tag_depth: 0.025, horizontal_offset: 1.0, frequency: 915e6 };
        let soil = SoilProfile::with_vwc(0.15);
        let down = composite_path_loss(&geometry, &soil, Direction::Ag2Ug, 3.0).unwrap();
        let up = composite_path_loss(&geometry, &soil, Direction::Ug2Ag, 3.0).unwrap();
        assert!(close(down, 55.98023413343229, 1e-10), "{down}");
        assert!(close(up, 55.96322588294956, 1e-10), "{up}");
        let (d_ag, d_ug) = geometry.segments();
        assert!(close(d_ag, 0.970603423606758, 1e-12));
        assert!(close(d_ug, 0.08088361863389651, 1e-12));
    }

    #[test]
    fn zero_depth_free_space_is_pure_log_distance() {
        let geometry = LinkGeometry { tx_height: 0.3, tag_depth: 0.0, horizontal_offset: 2.0, frequency: 915e6 };
        let channel = SoilChannel::from_permittivity(ComplexPermittivity::FREE_SPACE, 915e6);
        let loss = channel.path_loss(&geometry, Direction::Ag2Ug, 3.0);
        let d = 2.0f64.hypot(0.3);
        let expected = 20.0 * (4.0 * PI * 915e6 / SPEED_OF_LIGHT).log10() + 30.0 * d.log10();
        assert!((loss - expected).abs() < 1e-9);
    }

    #[test]
    fn segments_handle_degenerate_geometry() {
        let g = LinkGeometry { tx_height: 0.0, tag_depth: 0.0, horizontal_offset: 3.0, frequency: 915e6 };
        assert_eq!(g.segments(), (3.0, 0.0));
        let g = LinkGeometry { tx_height: 0.5, tag_depth: 0.0, horizontal_offset: 0.0, frequency: 915e6 };
        assert_eq!(g.segments(), (0.5, 0.0));
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let g = LinkGeometry { tx_height: -0.1, tag_depth: 0.0, horizontal_offset: 0.0, frequency: 915e6 };
        assert!(composite_path_loss(&g, &SoilProfile::default(), Direction::Ag2Ug, 3.0).is_err());
    }
}
