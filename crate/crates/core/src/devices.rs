//! Device classes, their radio presets, and the architecture comparison
//! table for low-power IoT.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::link_budget::LinkParams;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown device class '{0}' (expected one of RFID-UHF, AIOT-BL, AIOT-BA, AIOT-BSA)")]
pub struct UnknownDevice(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceClass {
    RfidUhf,
    /// Backscatter-only A-IoT device.
    AiotBl,
    /// Backscatter with an amplifier, no own carrier.
    AiotBa,
    /// Own energy source and independent signal generation.
    AiotBsa,
}

impl DeviceClass {
    pub const ALL: [DeviceClass; 4] =
        [DeviceClass::RfidUhf, DeviceClass::AiotBl, DeviceClass::AiotBa, DeviceClass::AiotBsa];

    pub fn name(self) -> &'static str {
        match self {
            DeviceClass::RfidUhf => "RFID-UHF",
            DeviceClass::AiotBl => "AIOT-BL",
            DeviceClass::AiotBa => "AIOT-BA",
            DeviceClass::AiotBsa => "AIOT-BSA",
        }
    }

    pub fn is_aiot(self) -> bool {
        !matches!(self, DeviceClass::RfidUhf)
    }
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeviceClass {
    type Err = UnknownDevice;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownDevice(s.to_string()))
    }
}

/// Shared antenna gains and path-loss exponent of the budget analysis.
pub const READER_GAIN_DBI: f64 = 6.0;
pub const TAG_GAIN_DBI: f64 = -1.0;
pub const PATH_LOSS_EXPONENT: f64 = 3.0;

/// RF-to-DC harvesting efficiency quoted for low-input-power rectifiers.
/// Informational only.
pub const RF_HARVEST_EFFICIENCY: f64 = 0.182;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: &'static str,
    pub device_class: DeviceClass,
    /// Transmit (exciter) power used with this device, dBm.
    pub p_t: f64,
    /// Power consumption class, W. Not given for the RFID reference.
    pub max_power: Option<f64>,
    pub p_thr: f64,
    pub sensitivity: f64,
    pub m_factor: f64,
    /// kbps
    pub data_rate_range: Option<(f64, f64)>,
    pub description: &'static str,
    pub complexity_note: &'static str,
    /// Radio parameters borrowed from a neighbouring class rather than stated.
    pub interpolated: bool,
    pub harvest_efficiency: Option<f64>,
}

impl DeviceProfile {
    /// Budget parameters with the shared gains and exponent.
    pub fn link_params(&self) -> LinkParams {
        LinkParams {
            p_t: self.p_t,
            g_t: READER_GAIN_DBI,
            g_r: READER_GAIN_DBI,
            g_tag: TAG_GAIN_DBI,
            m_factor: self.m_factor,
            p_thr: self.p_thr,
            sensitivity: self.sensitivity,
            gamma: PATH_LOSS_EXPONENT,
        }
    }
}

const AIOT_DATA_RATE_KBPS: (f64, f64) = (0.1, 5.0);

pub fn preset(class: DeviceClass) -> DeviceProfile {
    let aiot = |name, max_power, description, complexity_note, interpolated| DeviceProfile {
        name,
        device_class: class,
        p_t: 24.0,
        max_power: Some(max_power),
        p_thr: -25.0,
        sensitivity: -100.0,
        m_factor: 0.25,
        data_rate_range: Some(AIOT_DATA_RATE_KBPS),
        description,
        complexity_note,
        interpolated,
        harvest_efficiency: Some(RF_HARVEST_EFFICIENCY),
    };
    match class {
        DeviceClass::RfidUhf => DeviceProfile {
            name: "RFID-UHF",
            device_class: class,
            p_t: 30.0,
            max_power: None,
            p_thr: -10.0,
            sensitivity: -75.0,
            m_factor: 0.33,
            data_rate_range: None,
            description: "Passive UHF RFID tag with OOK backscatter",
            complexity_note: "ISO18000-6C (EPC C1G2)",
            interpolated: false,
            harvest_efficiency: None,
        },
        DeviceClass::AiotBl => aiot(
            "AIOT-BL",
            10e-6,
            "No energy source. Only backscatter communication.",
            "Comparable to UHF RFID ISO18000-6C (EPC C1G2)",
            false,
        ),
        DeviceClass::AiotBa => aiot(
            "AIOT-BA",
            1e-3,
            "Energy source for amplifying the backscattered signal. No independent signal generation.",
            "Between BL and BSA devices",
            true,
        ),
        DeviceClass::AiotBsa => aiot(
            "AIOT-BSA",
            10e-3,
            "Has an energy source. Can independently generate signal.",
            "Much lower than NB-IoT devices",
            false,
        ),
    }
}

pub fn preset_by_name(name: &str) -> Result<DeviceProfile, UnknownDevice> {
    Ok(preset(name.parse()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureRow {
    pub name: &'static str,
    /// W
    pub max_power: f64,
    /// m, (min, max)
    pub coverage: (f64, f64),
    pub coverage_note: &'static str,
    /// kbps, (min, max)
    pub data_rate: (f64, f64),
}

pub fn architecture_table() -> Vec<ArchitectureRow> {
    vec![
        ArchitectureRow {
            name: "LoRaWAN",
            max_power: 25e-3,
            coverage: (10_000.0, 15_000.0),
            coverage_note: "rural",
            data_rate: (0.3, 5.5),
        },
        ArchitectureRow {
            name: "NB-IoT",
            max_power: 200e-3,
            coverage: (5_000.0, 15_000.0),
            coverage_note: "rural",
            data_rate: (250.0, 250.0),
        },
        ArchitectureRow {
            name: "Active A-IoT",
            max_power: 10e-3,
            coverage: (500.0, 500.0),
            coverage_note: "",
            data_rate: (5.0, 5.0),
        },
        ArchitectureRow {
            name: "Battery-free A-IoT",
            max_power: 10e-6,
            coverage: (500.0, 500.0),
            coverage_note: "",
            data_rate: (5.0, 5.0),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Environment {
    Indoor,
    Outdoor,
}

impl FromStr for Environment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "indoor" => Ok(Environment::Indoor),
            "outdoor" => Ok(Environment::Outdoor),
            other => Err(format!("unknown environment '{other}'")),
        }
    }
}

/// Supported device density, devices per m².
pub fn density_limit(environment: Environment) -> f64 {
    match environment {
        Environment::Indoor => 150.0 / 100.0,
        Environment::Outdoor => 20.0 / 100.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCheck {
    pub pass: bool,
    /// Limit in devices per m².
    pub limit_per_m2: f64,
    /// Largest device count the area supports.
    pub max_devices: f64,
}

pub fn density_check(device_count: usize, area_m2: f64, environment: Environment) -> DensityCheck {
    assert!(area_m2 > 0.0, "area must be positive");
    let limit = density_limit(environment);
    let max_devices = limit * area_m2;
    // compare counts, not densities, so that 150 per 100 m² is exactly on the limit
    let pass = device_count as f64 <= max_devices + 1e-9 * max_devices;
    DensityCheck { pass, limit_per_m2: limit, max_devices }
}

/// Coverage range, m.
pub fn coverage_envelope(environment: Environment) -> (f64, f64) {
    match environment {
        Environment::Indoor => (10.0, 50.0),
        Environment::Outdoor => (50.0, 500.0),
    }
}
