use std::path::PathBuf;
use std::process::{Command, Output};

use aiot_underground::devices::{preset, DeviceClass};
use aiot_underground::link_budget::{solve_range, Configuration};
use aiot_underground::report::{fmt_num, FIELDSIM_COLUMNS, INVENTORY_COLUMNS, PRESET_COLUMNS, SWEEP_COLUMNS};
use aiot_underground::soil::{LinkGeometry, SoilProfile, DEFAULT_FREQUENCY_HZ};

fn aiot_ug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aiot-ug")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = aiot_ug(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    aiot_ug(args).status.code().expect("exited normally")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    let _ = std::fs::remove_file(&path);
    path
}

fn parse(csv_text: &str, columns: &[&str]) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), columns);
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert!(rows.iter().all(|r| r.len() == columns.len()));
    assert!(!csv_text.contains('\r'));
    rows
}

#[test]
fn linkbudget_row_matches_library() {
    let text = stdout(&["linkbudget", "--device", "AIOT-BL", "--vwc", "0.15", "--mode", "monostatic"]);
    let rows = parse(&text, &SWEEP_COLUMNS);
    assert_eq!(rows.len(), 1);
    let g = LinkGeometry { tx_height: 0.3, tag_depth: 0.025, horizontal_offset: 0.0, frequency: DEFAULT_FREQUENCY_HZ };
    let r = solve_range(
        &preset(DeviceClass::AiotBl).link_params(),
        &SoilProfile::with_vwc(0.15),
        &Configuration::monostatic(g),
    )
    .unwrap();
    assert_eq!(&rows[0][2], fmt_num(r.d_act));
    assert_eq!(&rows[0][3], fmt_num(r.d_read));
    assert_eq!(&rows[0][5], "DL");
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&["linkbudget", "--device", "BOGUS"]), 2);
    assert_eq!(exit_code(&["linkbudget", "--device", "RFID-UHF", "--vwc", "0.9", "--depth", "2.0"]), 3);
    assert_eq!(exit_code(&["linkbudget", "--vwc", "15"]), 2);
    assert_eq!(exit_code(&["linkbudget", "--mode", "monostatic", "--offset", "0.2"]), 2);
    assert_eq!(exit_code(&["sweep", "--device", "AIOT-BL", "--devices", "RFID-UHF"]), 2);
    assert_eq!(exit_code(&["fieldsim"]), 2);
    assert_eq!(exit_code(&["fieldsim", "--seed", "1", "--no-transmit", "--calibrate", "0.5"]), 4);
    assert_eq!(exit_code(&["presets"]), 0);
}

#[test]
fn failed_runs_leave_no_output_file() {
    let out = scratch("failed.csv");
    let path = out.to_str().unwrap();
    assert_eq!(exit_code(&["linkbudget", "--device", "BOGUS", "--out", path]), 2);
    assert_eq!(exit_code(&["linkbudget", "--vwc", "0.9", "--depth", "2.0", "--out", path]), 3);
    assert!(!out.exists());
}

#[test]
fn config_file_with_flag_override() {
    let conf = scratch("run.conf");
    std::fs::write(&conf, "# test\ndevice = AIOT-BL\nvwc = 15%\ndepth = 2.5cm\n").unwrap();
    let conf = conf.to_str().unwrap();
    let from_file = stdout(&["linkbudget", "--config", conf]);
    assert_eq!(from_file, stdout(&["linkbudget", "--device", "AIOT-BL", "--vwc", "0.15", "--depth", "0.025"]));
    let overridden = stdout(&["linkbudget", "--config", conf, "--device", "RFID-UHF"]);
    assert!(overridden.lines().nth(1).unwrap().starts_with("RFID-UHF,0.15,"));

    let bad = scratch("bad.conf");
    std::fs::write(&bad, "device = AIOT-BL\ncolour = blue\n").unwrap();
    assert_eq!(exit_code(&["linkbudget", "--config", bad.to_str().unwrap()]), 2);
}

#[test]
fn sweep_has_one_row_per_device_and_point() {
    let text = stdout(&["sweep", "--devices", "RFID-UHF,AIOT-BL", "--vwc", "0.05:0.25:21", "--mode", "monostatic"]);
    let rows = parse(&text, &SWEEP_COLUMNS);
    assert_eq!(rows.len(), 42);
    for (device, first, last) in [("RFID-UHF", 0, 20), ("AIOT-BL", 21, 41)] {
        for (idx, vwc) in [(first, "0.05"), (last, "0.25")] {
            let single = stdout(&["linkbudget", "--device", device, "--vwc", vwc, "--mode", "monostatic"]);
            let single = parse(&single, &SWEEP_COLUMNS);
            assert_eq!(rows[idx], single[0]);
        }
    }
}

#[test]
fn fieldsim_seed_42_is_in_band() {
    let out = scratch("field.csv");
    let path = out.to_str().unwrap();
    // Loss modifiers default to the calibrated fixture.
    let summary = stdout(&["fieldsim", "--seed", "42", "--out", path]);
    assert!(summary.contains("canopy_loss_db=7 depth_jitter_m=0.02"), "{summary}");
    let rate =
        summary.split_whitespace().find_map(|kv| kv.strip_prefix("success_rate=")).expect("summary has success_rate");
    let value: f64 = rate.parse().unwrap();
    assert!((0.49..=0.59).contains(&value), "{rate}");
    let rows = parse(&std::fs::read_to_string(&out).unwrap(), &FIELDSIM_COLUMNS);
    assert_eq!(rows.len(), 288);
    let read = rows.iter().filter(|r| &r[3] == "true").count();
    assert_eq!(fmt_num(read as f64 / 288.0), rate);
}

#[test]
fn fieldsim_without_thresholds_reads_everything() {
    let text = stdout(&["fieldsim", "--seed", "3", "--no-thresholds"]);
    let rows = parse(&text, &FIELDSIM_COLUMNS);
    assert!(rows.iter().all(|r| &r[3] == "true"));
}

#[test]
fn inventory_rows() {
    let fsa = stdout(&[
        "inventory",
        "--scheme",
        "fsa",
        "--tags",
        "100",
        "--frame",
        "128",
        "--trials",
        "10000",
        "--seed",
        "7",
    ]);
    let rows = parse(&fsa, &INVENTORY_COLUMNS);
    let successes: f64 = rows[0][3].parse().unwrap();
    assert!((successes - 46.0025).abs() <= 0.02 * 46.0025, "{successes}");

    let empty = stdout(&["inventory", "--scheme", "q", "--tags", "0"]);
    assert_eq!(empty, "scheme,n_tags,slots,successes,collisions,idle\nq,0,1,0,0,1\n");
    let fifty = stdout(&["inventory", "--scheme", "q", "--tags", "50", "--seed", "1"]);
    assert_eq!(fifty, "scheme,n_tags,slots,successes,collisions,idle\nq,50,151,50,48,53\n");
}

#[test]
fn presets_table() {
    let text = stdout(&["presets"]);
    let rows = parse(&text, &PRESET_COLUMNS);
    assert_eq!(rows.iter().filter(|r| &r[0] == "architecture").count(), 4);
    let devices: Vec<&str> = rows.iter().filter(|r| &r[0] == "device").map(|r| r.get(1).unwrap()).collect();
    assert_eq!(devices, ["RFID-UHF", "AIOT-BL", "AIOT-BA", "AIOT-BSA"]);
}

#[test]
fn every_subcommand_is_deterministic() {
    let runs: [&[&str]; 5] = [
        &["linkbudget", "--device", "AIOT-BL", "--mode", "bistatic", "--offset", "0.2"],
        &["sweep", "--devices", "RFID-UHF,AIOT-BL", "--vwc", "0.05:0.25:21"],
        &["fieldsim", "--seed", "11"],
        &["inventory", "--scheme", "fsa", "--tags", "30", "--trials", "50", "--seed", "4"],
        &["presets"],
    ];
    for args in runs {
        let a = scratch("det_a.csv");
        let b = scratch("det_b.csv");
        for path in [&a, &b] {
            let mut full = args.to_vec();
            full.extend(["--out", path.to_str().unwrap()]);
            assert_eq!(exit_code(&full), 0, "{full:?}");
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn fieldsim_layout_and_rig_overrides_from_config() {
    let conf = scratch("field.conf");
    std::fs::write(&conf, "tags_per_row = 10\nrow_spacing = 90cm\nspeed = 2\nscheme = fsa\nframe = 8\n").unwrap();
    let conf = conf.to_str().unwrap();
    let from_file = stdout(&["fieldsim", "--seed", "5", "--config", conf]);
    assert_eq!(parse(&from_file, &FIELDSIM_COLUMNS).len(), 120);
    let from_flags = stdout(&[
        "fieldsim",
        "--seed",
        "5",
        "--tags-per-row",
        "10",
        "--row-spacing",
        "0.9",
        "--speed",
        "2",
        "--scheme",
        "fsa",
        "--frame",
        "8",
    ]);
    assert_eq!(from_file, from_flags);
    // naming the default scheme keeps the rig's own Q start value
    assert_eq!(stdout(&["fieldsim", "--seed", "5", "--scheme", "q"]), stdout(&["fieldsim", "--seed", "5"]));
    assert_eq!(exit_code(&["fieldsim", "--seed", "5", "--scheme", "fsa", "--q-init", "3"]), 2);
}
