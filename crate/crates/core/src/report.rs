//! CSV emission. Every table is UTF-8, comma separated, LF terminated, with
//! one header line and numbers printed to six significant digits.

use crate::devices::{architecture_table, preset, DeviceClass};
use crate::field_sim::TrialResult;
use crate::link_budget::SweepRow;

pub const SWEEP_COLUMNS: [&str; 6] = ["device", "vwc", "d_act_m", "d_read_m", "effective_range_m", "limiting_link"];
pub const FIELDSIM_COLUMNS: [&str; 5] = ["tag_id", "row", "activated", "read", "margin_db"];
pub const INVENTORY_COLUMNS: [&str; 6] = ["scheme", "n_tags", "slots", "successes", "collisions", "idle"];
pub const PRESET_COLUMNS: [&str; 13] = [
    "table",
    "name",
    "class",
    "max_power_w",
    "coverage_min_m",
    "coverage_max_m",
    "data_rate_min_kbps",
    "data_rate_max_kbps",
    "p_t_dbm",
    "p_thr_dbm",
    "sensitivity_dbm",
    "m_factor",
    "note",
];

/// Marker written in place of a distance that has no solution.
pub const INFEASIBLE: &str = "infeasible";

/// Formats like C's `%.6g`.
pub fn fmt_num(x: f64) -> String {
    const PRECISION: i32 = 6;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| INFEASIBLE.to_string(), fmt_num)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer cannot fail");
    String::from_utf8(bytes).expect("CSV content is UTF-8")
}

/// Rows of one or more devices' sweeps, in the order given.
pub fn sweep_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a SweepRow)>) -> String {
    let mut w = writer();
    w.write_record(SWEEP_COLUMNS).expect("in-memory write");
    for (device, row) in rows {
        let report = row.report();
        w.write_record([
            device.to_string(),
            fmt_num(row.vwc),
            fmt_opt(row.d_act),
            fmt_opt(row.d_read),
            fmt_opt(report.map(|r| r.effective_range)),
            report.map_or_else(|| "none".to_string(), |r| r.limiting_link.to_string()),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn fieldsim_csv(result: &TrialResult) -> String {
    let mut w = writer();
    w.write_record(FIELDSIM_COLUMNS).expect("in-memory write");
    for t in &result.per_tag {
        w.write_record([
            t.tag_id.to_string(),
            t.row.to_string(),
            t.activated.to_string(),
            t.read.to_string(),
            fmt_num(t.best_margin),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// Seed-averaged inventory statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct InventorySummary {
    pub scheme: String,
    pub n_tags: usize,
    pub slots: f64,
    pub successes: f64,
    pub collisions: f64,
    pub idle: f64,
}

pub fn inventory_csv(summary: &InventorySummary) -> String {
    let mut w = writer();
    w.write_record(INVENTORY_COLUMNS).expect("in-memory write");
    w.write_record([
        summary.scheme.clone(),
        summary.n_tags.to_string(),
        fmt_num(summary.slots),
        fmt_num(summary.successes),
        fmt_num(summary.collisions),
        fmt_num(summary.idle),
    ])
    .expect("in-memory write");
    finish(w)
}

/// Architecture comparison rows followed by the device presets.
pub fn presets_csv() -> String {
    let mut w = writer();
    w.write_record(PRESET_COLUMNS).expect("in-memory write");
    let empty = String::new;
    for row in architecture_table() {
        w.write_record([
            "architecture".to_string(),
            row.name.to_string(),
            empty(),
            fmt_num(row.max_power),
            fmt_num(row.coverage.0),
            fmt_num(row.coverage.1),
            fmt_num(row.data_rate.0),
            fmt_num(row.data_rate.1),
            empty(),
            empty(),
            empty(),
            empty(),
            row.coverage_note.to_string(),
        ])
        .expect("in-memory write");
    }
    for class in DeviceClass::ALL {
        let p = preset(class);
        let note = if p.interpolated {
            format!("{} [radio values interpolated]", p.complexity_note)
        } else {
            p.complexity_note.to_string()
        };
        w.write_record([
            "device".to_string(),
            p.name.to_string(),
            p.device_class.to_string(),
            p.max_power.map_or_else(empty, fmt_num),
            empty(),
            empty(),
            p.data_rate_range.map_or_else(empty, |r| fmt_num(r.0)),
            p.data_rate_range.map_or_else(empty, |r| fmt_num(r.1)),
            fmt_num(p.p_t),
            fmt_num(p.p_thr),
            fmt_num(p.sensitivity),
            fmt_num(p.m_factor),
            note,
        ])
        .expect("in-memory write");
    }
    finish(w)
}
