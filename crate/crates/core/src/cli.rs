//! Command-line front end.
//!
//! Every subcommand resolves its settings as: command-line flag, then the
//! `--config` file, then the built-in default. All validation happens before
//! any computation, and output files are only written once a run succeeds.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 link cannot close,
//! 4 calibration did not converge, 1 I/O failure.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{self, KeyValues};
use crate::devices::{preset, DeviceClass, DeviceProfile};
use crate::field_sim::{
    calibrate_modifiers, calibrated_modifiers, moisture_map_from_zones, simulate_with_link, trial_preset, FieldError,
    FieldLayout, LossModifiers, ModifierBounds, MoistureMap, TRIAL_DEPTH_M, TRIAL_ROW_SPACING_M, TRIAL_TAG_SPACING_M,
};
use crate::link_budget::{solve_range, sweep_vwc, Configuration, LinkParams, Mode, RangeError, SweepRow};
use crate::mac::{derive_seed, expected_successes, framed_slotted_aloha_seeded, q_protocol_inventory, Scheme, Q_MAX};
use crate::report::{self, InventorySummary};
use crate::soil::{LinkGeometry, SoilProfile, DEFAULT_FREQUENCY_HZ};

/// Stand-in threshold used when thresholds or the transmitter are switched off.
const DISABLED_DBM: f64 = -1.0e9;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Invalid(String),
    NoSolution(String),
    Unconverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::NoSolution(_) => 3,
            CliError::Unconverged(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            CliError::NoSolution(m) => write!(f, "no solution: {m}"),
            CliError::Unconverged(m) => write!(f, "calibration did not converge: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<RangeError> for CliError {
    fn from(e: RangeError) -> Self {
        match e {
            RangeError::NoSolution { .. } | RangeError::InfeasibleExcitation { .. } | RangeError::Unbounded { .. } => {
                CliError::NoSolution(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Range(r) => r.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "aiot-ug", version, about = "Underground backscatter link budgets and field-trial simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Activation and read distance for one device and moisture level.
    Linkbudget(LinkArgs),
    /// Activation and read distance over a moisture sweep.
    Sweep(LinkArgs),
    /// Simulated field trial with a moving multi-antenna reader.
    Fieldsim(FieldArgs),
    /// Anti-collision inventory statistics.
    Inventory(InventoryArgs),
    /// Architecture comparison and device preset tables.
    Presets(CommonArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct LinkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// RFID-UHF, AIOT-BL, AIOT-BA or AIOT-BSA.
    #[arg(long)]
    pub device: Option<String>,
    /// Comma-separated devices (sweep only).
    #[arg(long)]
    pub devices: Option<String>,
    /// monostatic or bistatic.
    #[arg(long)]
    pub mode: Option<String>,
    /// Fraction or percentage; `lo:hi:steps` for sweep.
    #[arg(long)]
    pub vwc: Option<String>,
    /// Tag depth (m, or with cm/mm suffix).
    #[arg(long)]
    pub depth: Option<String>,
    /// Exciter (or monostatic reader) antenna height.
    #[arg(long)]
    pub height: Option<String>,
    /// Fixed horizontal exciter offset in bistatic mode.
    #[arg(long)]
    pub offset: Option<String>,
    /// Reader antenna height in bistatic mode.
    #[arg(long)]
    pub reader_height: Option<String>,
    #[arg(long)]
    pub frequency: Option<String>,
    #[arg(long)]
    pub clay: Option<String>,
    #[arg(long)]
    pub sand: Option<String>,
    #[arg(long)]
    pub bulk_density: Option<String>,
    #[arg(long)]
    pub particle_density: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct FieldArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub device: Option<String>,
    /// Only monostatic is simulated.
    #[arg(long)]
    pub mode: Option<String>,
    /// Uniform moisture for every row (overrides the zone layout).
    #[arg(long)]
    pub vwc: Option<String>,
    /// Moisture zones, e.g. `1-4:0.05,5-8:0.15,9-12:0.25`.
    #[arg(long)]
    pub zones: Option<String>,
    /// Nominal depth of every tag.
    #[arg(long)]
    pub depth: Option<String>,
    /// Antenna height.
    #[arg(long)]
    pub height: Option<String>,
    #[arg(long)]
    pub canopy_loss: Option<String>,
    #[arg(long)]
    pub depth_jitter: Option<String>,
    #[arg(long)]
    pub misc_margin: Option<String>,
    /// Distance between crop rows.
    #[arg(long)]
    pub row_spacing: Option<String>,
    /// Distance between tags along a row.
    #[arg(long)]
    pub tag_spacing: Option<String>,
    #[arg(long)]
    pub tags_per_row: Option<String>,
    /// Rig speed, m/s.
    #[arg(long)]
    pub speed: Option<String>,
    /// Inventory attempts per metre travelled, per antenna.
    #[arg(long)]
    pub dwell: Option<String>,
    /// Air-interface slots per second shared by all antennas.
    #[arg(long)]
    pub slot_rate: Option<String>,
    /// fsa or q.
    #[arg(long)]
    pub scheme: Option<String>,
    /// FSA frame size.
    #[arg(long)]
    pub frame: Option<String>,
    #[arg(long)]
    pub q_init: Option<String>,
    /// Fit canopy loss and depth jitter to this success rate first.
    #[arg(long)]
    pub calibrate: Option<String>,
    #[arg(long)]
    pub no_thresholds: bool,
    #[arg(long)]
    pub no_transmit: bool,
    #[arg(long)]
    pub no_contention: bool,
}

#[derive(Debug, Args, Default)]
pub struct InventoryArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// fsa or q.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub tags: Option<String>,
    /// FSA frame size.
    #[arg(long)]
    pub frame: Option<String>,
    #[arg(long)]
    pub q_init: Option<String>,
    #[arg(long)]
    pub max_slots: Option<String>,
    /// Independent runs averaged into the output row.
    #[arg(long)]
    pub trials: Option<String>,
}

/// Resolved, validated settings shared by the link-budget commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub devices: Vec<DeviceClass>,
    pub soil: SoilProfile,
    pub geometry: LinkGeometry,
    pub reader_height: f64,
    pub configuration: Mode,
    pub sweep: (f64, f64, usize),
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn link_configuration(&self) -> Configuration {
        match self.configuration {
            Mode::Monostatic => Configuration::monostatic(self.geometry),
            Mode::Bistatic => Configuration::bistatic(
                self.geometry,
                LinkGeometry { tx_height: self.reader_height, horizontal_offset: 0.0, ..self.geometry },
            ),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        self.soil.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        self.geometry.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if !(self.reader_height >= 0.0) {
            return Err(CliError::Invalid(format!("reader height {}", self.reader_height)));
        }
        let (lo, hi, steps) = self.sweep;
        if !(lo < hi) || steps < 2 {
            return Err(CliError::Invalid(format!("sweep {lo}:{hi}:{steps} needs lo < hi and steps >= 2")));
        }
        for &d in &self.devices {
            self.link_configuration().validate(&preset(d).link_params())?;
        }
        Ok(())
    }
}

/// Result of a command: the CSV body plus a human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub summary: String,
    pub out: Option<PathBuf>,
}

/// Flag-then-file lookup with unit-aware parsing.
struct Settings {
    file: KeyValues,
}

impl Settings {
    fn load(common: &CommonArgs, allowed: &[&str]) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(path) => KeyValues::load(path)?,
            None => KeyValues::default(),
        };
        file.check_keys(allowed)?;
        Ok(Self { file })
    }

    fn raw(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone().or_else(|| self.file.get(key).map(str::to_string))
    }

    fn get<T>(
        &self,
        flag: &Option<String>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        self.raw(flag, key)
            .map(|v| parse(&v).map_err(|m| CliError::Invalid(format!("--{}: {m}", key.replace('_', "-")))))
            .transpose()
    }

    fn flag(&self, set: bool, key: &str) -> Result<bool, CliError> {
        if set {
            return Ok(true);
        }
        match self.file.get(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(CliError::Invalid(format!("{key}: expected true/false, got '{other}'"))),
            },
        }
    }
}

fn parse_device(s: &str) -> Result<DeviceClass, String> {
    s.parse::<DeviceClass>().map_err(|e| e.to_string())
}

fn parse_devices(s: &str) -> Result<Vec<DeviceClass>, String> {
    s.split(',').map(parse_device).collect()
}

fn parse_seed(s: &str) -> Result<u64, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not a fraction in [0, 1]"))
    }
}

fn parse_density(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("'{s}' is not a number (g/cm³)"))
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

const LINK_KEYS: &[&str] = &[
    "device",
    "devices",
    "mode",
    "vwc",
    "depth",
    "height",
    "offset",
    "reader_height",
    "frequency",
    "clay",
    "sand",
    "bulk_density",
    "particle_density",
    "seed",
];

fn resolve_link(args: &LinkArgs, sweep: bool) -> Result<RunConfig, CliError> {
    let s = Settings::load(&args.common, LINK_KEYS)?;

    if !sweep && s.raw(&args.devices, "devices").is_some() {
        return Err(CliError::Invalid("--devices is only valid for sweep; use --device".into()));
    }
    if args.devices.is_some() && args.device.is_some() {
        return Err(CliError::Invalid("give either --device or --devices, not both".into()));
    }
    let list = s.get(&args.devices, "devices", parse_devices)?;
    let one = s.get(&args.device, "device", parse_device)?;
    let devices = match (list, one) {
        // an explicit flag beats the other key coming from the file
        (_, Some(one)) if args.device.is_some() => vec![one],
        (Some(list), _) => list,
        (None, Some(one)) => vec![one],
        (None, None) if sweep => vec![DeviceClass::RfidUhf, DeviceClass::AiotBl],
        (None, None) => vec![DeviceClass::RfidUhf],
    };

    let base = SoilProfile::default();
    let (vwc, sweep_range) = if sweep {
        let range = s.get(&args.vwc, "vwc", config::parse_vwc_range)?.unwrap_or((0.05, 0.25, 21));
        (range.0, range)
    } else {
        (s.get(&args.vwc, "vwc", config::parse_vwc)?.unwrap_or(base.vwc), (0.05, 0.25, 21))
    };
    let soil = SoilProfile {
        vwc,
        clay_fraction: s.get(&args.clay, "clay", parse_fraction)?.unwrap_or(base.clay_fraction),
        sand_fraction: s.get(&args.sand, "sand", parse_fraction)?.unwrap_or(base.sand_fraction),
        bulk_density: s.get(&args.bulk_density, "bulk_density", parse_density)?.unwrap_or(base.bulk_density),
        particle_density: s
            .get(&args.particle_density, "particle_density", parse_density)?
            .unwrap_or(base.particle_density),
    };

    let mode = s.get(&args.mode, "mode", parse_mode)?.unwrap_or(Mode::Monostatic);
    let offset = s.get(&args.offset, "offset", config::parse_length)?;
    let reader_height = s.get(&args.reader_height, "reader_height", config::parse_length)?;
    if mode == Mode::Monostatic && (offset.is_some() || reader_height.is_some()) {
        return Err(CliError::Invalid("--offset and --reader-height apply to bistatic mode only".into()));
    }
    let height = s.get(&args.height, "height", config::parse_length)?.unwrap_or(0.3);
    let geometry = LinkGeometry {
        tx_height: height,
        tag_depth: s.get(&args.depth, "depth", config::parse_length)?.unwrap_or(0.025),
        horizontal_offset: offset.unwrap_or(0.0),
        frequency: s.get(&args.frequency, "frequency", config::parse_frequency)?.unwrap_or(DEFAULT_FREQUENCY_HZ),
    };

    let cfg = RunConfig {
        devices,
        soil,
        geometry,
        reader_height: reader_height.unwrap_or(height),
        configuration: mode,
        sweep: sweep_range,
        seed: s.get(&args.common.seed, "seed", parse_seed)?,
        output_path: args.common.out.clone(),
    };
    cfg.validate()?;
    Ok(cfg)
}

const RAY_NOTE: &str =
    "ray model: straight antenna-tag ray split at the surface; boundary loss at normal incidence (no Snell bending)";

fn cmd_linkbudget(args: &LinkArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_link(args, false)?;
    let class = cfg.devices[0];
    let report = solve_range(&preset(class).link_params(), &cfg.soil, &cfg.link_configuration())?;
    let row = SweepRow { vwc: cfg.soil.vwc, d_act: Some(report.d_act), d_read: Some(report.d_read) };

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "device={} mode={} vwc={} depth_m={} height_m={}",
        class,
        cfg.configuration,
        report::fmt_num(cfg.soil.vwc),
        report::fmt_num(cfg.geometry.tag_depth),
        report::fmt_num(cfg.geometry.tx_height)
    );
    let _ = writeln!(
        summary,
        "d_act_m={} d_read_m={} effective_range_m={} limiting_link={}",
        report::fmt_num(report.d_act),
        report::fmt_num(report.d_read),
        report::fmt_num(report.effective_range),
        report.limiting_link
    );
    let _ = writeln!(summary, "{RAY_NOTE}");
    Ok(Outcome { csv: report::sweep_csv([(class.name(), &row)]), summary, out: cfg.output_path })
}

fn cmd_sweep(args: &LinkArgs) -> Result<Outcome, CliError> {
    let cfg = resolve_link(args, true)?;
    let (lo, hi, steps) = cfg.sweep;
    let config = cfg.link_configuration();
    let mut tables: Vec<(DeviceClass, Vec<SweepRow>)> = Vec::new();
    for &class in &cfg.devices {
        let rows = sweep_vwc(&preset(class).link_params(), &cfg.soil, lo, hi, steps, &config)?;
        tables.push((class, rows));
    }
    let csv = report::sweep_csv(tables.iter().flat_map(|(c, rows)| rows.iter().map(move |r| (c.name(), r))));
    let infeasible =
        tables.iter().flat_map(|(_, rows)| rows).filter(|r| r.d_act.is_none() || r.d_read.is_none()).count();
    let summary = format!(
        "mode={} devices={} points={} infeasible_points={}\n{RAY_NOTE}\n",
        cfg.configuration,
        cfg.devices.iter().map(|d| d.name()).collect::<Vec<_>>().join(","),
        tables.iter().map(|(_, r)| r.len()).sum::<usize>(),
        infeasible
    );
    Ok(Outcome { csv, summary, out: cfg.output_path })
}

const FIELD_KEYS: &[&str] = &[
    "device",
    "mode",
    "vwc",
    "zones",
    "depth",
    "height",
    "canopy_loss",
    "depth_jitter",
    "misc_margin",
    "row_spacing",
    "tag_spacing",
    "tags_per_row",
    "speed",
    "dwell",
    "slot_rate",
    "scheme",
    "frame",
    "q_init",
    "calibrate",
    "no_thresholds",
    "no_transmit",
    "no_contention",
    "seed",
];

fn cmd_fieldsim(args: &FieldArgs) -> Result<Outcome, CliError> {
    let s = Settings::load(&args.common, FIELD_KEYS)?;
    let seed = s
        .get(&args.common.seed, "seed", parse_seed)?
        .ok_or_else(|| CliError::Invalid("fieldsim needs an explicit --seed".into()))?;
    if s.get(&args.mode, "mode", parse_mode)?.unwrap_or(Mode::Monostatic) != Mode::Monostatic {
        return Err(CliError::Invalid("fieldsim models a monostatic reader rig only".into()));
    }
    let device: DeviceProfile = preset(s.get(&args.device, "device", parse_device)?.unwrap_or(DeviceClass::RfidUhf));

    let (mut layout, mut rig) = trial_preset();
    let uniform = s.get(&args.vwc, "vwc", config::parse_vwc)?;
    let zones = s.get(&args.zones, "zones", config::parse_zones)?;
    match (uniform, zones) {
        (Some(_), Some(_)) => return Err(CliError::Invalid("give either --vwc or --zones, not both".into())),
        (Some(vwc), None) => layout.moisture_zones = MoistureMap::uniform(layout.rows, SoilProfile::with_vwc(vwc)),
        (None, Some(z)) => layout.moisture_zones = moisture_map_from_zones(&z, layout.rows, &SoilProfile::default())?,
        (None, None) => {}
    }
    let row_spacing = s.get(&args.row_spacing, "row_spacing", config::parse_length)?;
    let tag_spacing = s.get(&args.tag_spacing, "tag_spacing", config::parse_length)?;
    let tags_per_row = s.get(&args.tags_per_row, "tags_per_row", parse_count)?;
    let depth = s.get(&args.depth, "depth", config::parse_length)?;
    if row_spacing.is_some() || tag_spacing.is_some() || tags_per_row.is_some() || depth.is_some() {
        layout = FieldLayout::regular(
            layout.rows,
            row_spacing.unwrap_or(TRIAL_ROW_SPACING_M),
            tags_per_row.unwrap_or(layout.tags_per_row),
            tag_spacing.unwrap_or(TRIAL_TAG_SPACING_M),
            depth.unwrap_or(TRIAL_DEPTH_M),
            layout.moisture_zones,
        );
    }
    if let Some(height) = s.get(&args.height, "height", config::parse_length)? {
        rig.antennas.iter_mut().for_each(|a| a.height = height);
    }
    rig.speed = s.get(&args.speed, "speed", parse_positive)?.unwrap_or(rig.speed);
    rig.dwell_per_m = s.get(&args.dwell, "dwell", parse_positive)?.unwrap_or(rig.dwell_per_m);
    rig.slot_rate = s.get(&args.slot_rate, "slot_rate", parse_positive)?.unwrap_or(rig.slot_rate);
    if rig.window_slots() == 0 {
        return Err(CliError::Invalid("slot rate too low: no slots left per inventory attempt".into()));
    }
    if let Some(scheme) = s.get(&args.scheme, "scheme", |v| v.parse::<Scheme>())? {
        // Naming the rig's own scheme keeps its parameters.
        if std::mem::discriminant(&scheme) != std::mem::discriminant(&rig.scheme) {
            rig.scheme = scheme;
        }
    }
    apply_scheme_params(&s, &mut rig.scheme, &args.frame, &args.q_init)?;
    rig.contention = !s.flag(args.no_contention, "no_contention")?;

    let mut link: LinkParams = device.link_params();
    if s.flag(args.no_thresholds, "no_thresholds")? {
        link.p_thr = DISABLED_DBM;
        link.sensitivity = 2.0 * DISABLED_DBM;
    }
    if s.flag(args.no_transmit, "no_transmit")? {
        link.p_t = DISABLED_DBM;
    }

    let defaults = calibrated_modifiers();
    let mut modifiers = LossModifiers {
        canopy_loss: s.get(&args.canopy_loss, "canopy_loss", config::parse_db)?.unwrap_or(defaults.canopy_loss),
        depth_jitter: s.get(&args.depth_jitter, "depth_jitter", config::parse_length)?.unwrap_or(defaults.depth_jitter),
        misc_margin: s.get(&args.misc_margin, "misc_margin", config::parse_db)?.unwrap_or(defaults.misc_margin),
    };
    let target = s.get(&args.calibrate, "calibrate", config::parse_vwc)?;

    layout.validate()?;
    rig.validate()?;
    link.validate()?;
    modifiers.validate()?;

    let mut summary = String::new();
    if let Some(target) = target {
        let bounds = ModifierBounds {
            canopy_loss: (0.0, 20.0),
            depth_jitter: (0.0, 0.02),
            misc_margin: (modifiers.misc_margin, modifiers.misc_margin),
        };
        let cal = calibrate_modifiers(target, &layout, &rig, &link, &bounds, seed)?;
        let line = format!(
            "calibration target={} rate={} canopy_loss={} depth_jitter={} misc_margin={} converged={}",
            report::fmt_num(target),
            report::fmt_num(cal.rate),
            report::fmt_num(cal.modifiers.canopy_loss),
            report::fmt_num(cal.modifiers.depth_jitter),
            report::fmt_num(cal.modifiers.misc_margin),
            cal.converged
        );
        if !cal.converged {
            return Err(CliError::Unconverged(line));
        }
        let _ = writeln!(summary, "{line}");
        modifiers = cal.modifiers;
    }

    let result = simulate_with_link(&layout, &rig, &link, &modifiers, seed)?;
    let _ = writeln!(
        summary,
        "device={} seed={} canopy_loss_db={} depth_jitter_m={} misc_margin_db={}",
        device.name,
        seed,
        report::fmt_num(modifiers.canopy_loss),
        report::fmt_num(modifiers.depth_jitter),
        report::fmt_num(modifiers.misc_margin)
    );
    let _ = writeln!(
        summary,
        "attempted={} unique_reads={} success_rate={} pass_reads={}",
        result.attempted,
        result.unique_reads,
        report::fmt_num(result.success_rate),
        result.pass_reads.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("/")
    );
    Ok(Outcome { csv: report::fieldsim_csv(&result), summary, out: args.common.out.clone() })
}

/// Applies `frame` / `q_init` overrides to `scheme`, rejecting the one that
/// does not belong to it.
fn apply_scheme_params(
    s: &Settings,
    scheme: &mut Scheme,
    frame: &Option<String>,
    q_init_arg: &Option<String>,
) -> Result<(), CliError> {
    match scheme {
        Scheme::Fsa { frame_size } => {
            if s.raw(q_init_arg, "q_init").is_some() {
                return Err(CliError::Invalid("--q-init applies to the q scheme only".into()));
            }
            *frame_size = s.get(frame, "frame", parse_count)?.unwrap_or(*frame_size);
            if *frame_size == 0 {
                return Err(CliError::Invalid("--frame must be at least 1".into()));
            }
        }
        Scheme::Q { q_init } => {
            if s.raw(frame, "frame").is_some() {
                return Err(CliError::Invalid("--frame applies to the fsa scheme only".into()));
            }
            *q_init =
                s.get(q_init_arg, "q_init", |v| v.trim().parse::<f64>().map_err(|e| e.to_string()))?.unwrap_or(*q_init);
            if !(0.0..=Q_MAX).contains(q_init) {
                return Err(CliError::Invalid(format!("--q-init {q_init} outside [0, {Q_MAX}]")));
            }
        }
    }
    Ok(())
}

const INVENTORY_KEYS: &[&str] = &["scheme", "tags", "frame", "q_init", "max_slots", "trials", "seed"];

fn cmd_inventory(args: &InventoryArgs) -> Result<Outcome, CliError> {
    let s = Settings::load(&args.common, INVENTORY_KEYS)?;
    let scheme_name = s.raw(&args.scheme, "scheme").unwrap_or_else(|| "q".into());
    let mut scheme: Scheme = scheme_name.parse().map_err(CliError::Invalid)?;
    let n_tags = s.get(&args.tags, "tags", parse_count)?.unwrap_or(0);
    let trials = s.get(&args.trials, "trials", parse_count)?.unwrap_or(1);
    let seed = s.get(&args.common.seed, "seed", parse_seed)?.unwrap_or(0);
    let max_slots = s.get(&args.max_slots, "max_slots", parse_count)?.unwrap_or(100_000);
    if trials == 0 || max_slots == 0 {
        return Err(CliError::Invalid("--trials and --max-slots must be at least 1".into()));
    }
    apply_scheme_params(&s, &mut scheme, &args.frame, &args.q_init)?;

    let (mut slots, mut successes, mut collisions, mut idle) = (0usize, 0usize, 0usize, 0usize);
    for t in 0..trials {
        let trial_seed = derive_seed(seed, t as u64);
        let r = match scheme {
            Scheme::Fsa { frame_size } => framed_slotted_aloha_seeded(n_tags, frame_size, trial_seed),
            Scheme::Q { q_init } => q_protocol_inventory(n_tags, q_init, max_slots, trial_seed),
        };
        slots += r.slots_used;
        successes += r.successes;
        collisions += r.collisions;
        idle += r.idle_slots;
    }
    let mean = |x: usize| x as f64 / trials as f64;
    let summary_row = InventorySummary {
        scheme: scheme.to_string(),
        n_tags,
        slots: mean(slots),
        successes: mean(successes),
        collisions: mean(collisions),
        idle: mean(idle),
    };
    let mut summary = format!("scheme={} n_tags={} trials={} seed={}", scheme, n_tags, trials, seed);
    if let Scheme::Fsa { frame_size } = scheme {
        let _ = write!(summary, " expected_successes={}", report::fmt_num(expected_successes(n_tags, frame_size)));
    }
    summary.push('\n');
    Ok(Outcome { csv: report::inventory_csv(&summary_row), summary, out: args.common.out.clone() })
}

fn cmd_presets(args: &CommonArgs) -> Result<Outcome, CliError> {
    Settings::load(args, &[])?;
    Ok(Outcome { csv: report::presets_csv(), summary: String::new(), out: args.out.clone() })
}

/// Runs a parsed command without touching stdout or the filesystem.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Linkbudget(a) => cmd_linkbudget(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Fieldsim(a) => cmd_fieldsim(a),
        Command::Inventory(a) => cmd_inventory(a),
        Command::Presets(a) => cmd_presets(a),
    }
}

/// Runs a command and delivers its output: CSV to `--out` (summary on
/// stdout) or CSV on stdout (summary on stderr). Returns the exit code.
pub fn run(cli: &Cli) -> u8 {
    let delivered = execute(cli).and_then(|outcome| {
        match &outcome.out {
            Some(path) => {
                std::fs::write(path, &outcome.csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                print!("{}", outcome.summary);
            }
            None => {
                print!("{}", outcome.csv);
                eprint!("{}", outcome.summary);
            }
        }
        Ok(())
    });
    match delivered {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
