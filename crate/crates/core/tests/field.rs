use aiot_underground::devices::{preset, DeviceClass};
use aiot_underground::field_sim::*;
use aiot_underground::link_budget::LinkParams;

fn rfid() -> LinkParams {
    preset(DeviceClass::RfidUhf).link_params()
}

#[test]
fn calibrated_fixture_lands_in_reported_band() {
    let (layout, rig) = trial_preset();
    let m = calibrated_modifiers();
    let rate = mean_success_rate(&layout, &rig, &rfid(), &m, 42, CALIBRATION_SEEDS).unwrap();
    assert!((0.49..=0.59).contains(&rate), "{rate}");
    assert!((rate - 0.539).abs() <= CALIBRATION_TOLERANCE);
    // A different master seed stays in the band too.
    let other = mean_success_rate(&layout, &rig, &rfid(), &m, 7, CALIBRATION_SEEDS).unwrap();
    assert!((0.49..=0.59).contains(&other), "{other}");
}

#[test]
fn calibration_reproduces_fixture() {
    let (layout, rig) = trial_preset();
    let bounds = ModifierBounds { canopy_loss: (0.0, 20.0), depth_jitter: (0.0, 0.02), misc_margin: (0.0, 0.0) };
    let cal = calibrate_modifiers(0.539, &layout, &rig, &rfid(), &bounds, 42).unwrap();
    assert!(cal.converged);
    assert_eq!(cal.modifiers, calibrated_modifiers());
}

#[test]
fn calibration_reports_unreachable_target() {
    let (layout, rig) = trial_preset();
    let bounds = ModifierBounds { canopy_loss: (10.0, 10.0), depth_jitter: (0.0, 0.0), misc_margin: (0.0, 0.0) };
    let cal = calibrate_modifiers(0.9, &layout, &rig, &rfid(), &bounds, 1).unwrap();
    assert!(!cal.converged);
    assert!(cal.rate < 0.5);
}

#[test]
fn coarse_canopy_scan_is_monotone_and_brackets_fixture() {
    let (layout, rig) = trial_preset();
    let fixture = calibrated_modifiers();
    let rate_at = |canopy_loss: f64| {
        let m = LossModifiers { canopy_loss, ..fixture };
        mean_success_rate(&layout, &rig, &rfid(), &m, 42, 10).unwrap()
    };
    let rates: Vec<f64> = (0..=5).map(|k| rate_at(4.0 * k as f64)).collect();
    for w in rates.windows(2) {
        assert!(w[1] <= w[0], "{rates:?}");
    }
    let below = rate_at(fixture.canopy_loss - 2.0);
    let above = rate_at(fixture.canopy_loss + 2.0);
    assert!(below > 0.539 && above < 0.539, "{below} {above}");
}

#[test]
fn runs_are_deterministic() {
    let (layout, rig) = trial_preset();
    let m = calibrated_modifiers();
    let a = simulate_with_link(&layout, &rig, &rfid(), &m, 99).unwrap();
    let b = simulate_with_link(&layout, &rig, &rfid(), &m, 99).unwrap();
    assert_eq!(a, b);
    let c = simulate_with_link(&layout, &rig, &rfid(), &m, 100).unwrap();
    assert_ne!(a.per_tag, c.per_tag);
}

#[test]
fn threshold_and_transmitter_limits() {
    let (layout, rig) = trial_preset();
    let m = calibrated_modifiers();
    let open = LinkParams { p_thr: -1e9, sensitivity: -2e9, ..rfid() };
    let r = simulate_with_link(&layout, &rig, &open, &m, 42).unwrap();
    assert_eq!((r.unique_reads, r.attempted), (288, 288));
    let dark = LinkParams { p_t: -1e9, ..rfid() };
    let r = simulate_with_link(&layout, &rig, &dark, &m, 42).unwrap();
    assert_eq!((r.unique_reads, r.attempted), (0, 288));
    assert!(r.per_tag.iter().all(|t| !t.activated));
}

#[test]
fn without_contention_reads_follow_link_margins() {
    let (layout, mut rig) = trial_preset();
    rig.contention = false;
    let m = calibrated_modifiers();
    let weak = simulate_with_link(&layout, &rig, &rfid(), &m, 5).unwrap();
    let strong = simulate_with_link(&layout, &rig, &preset(DeviceClass::AiotBl).link_params(), &m, 5).unwrap();
    let lossier =
        simulate_with_link(&layout, &rig, &rfid(), &LossModifiers { canopy_loss: m.canopy_loss + 3.0, ..m }, 5)
            .unwrap();
    for ((w, s), l) in weak.per_tag.iter().zip(&strong.per_tag).zip(&lossier.per_tag) {
        assert!(!w.read || s.read, "tag {} read by RFID but not A-IoT", w.tag_id);
        assert!(!l.read || w.read, "tag {} read only with more canopy loss", w.tag_id);
        assert_eq!(w.read, w.best_margin >= 0.0, "tag {}", w.tag_id);
    }
    assert!(strong.unique_reads >= weak.unique_reads);
    assert!(lossier.unique_reads <= weak.unique_reads);
}

#[test]
fn result_accounting() {
    let (layout, rig) = trial_preset();
    let r = simulate_with_link(&layout, &rig, &rfid(), &calibrated_modifiers(), 3).unwrap();
    assert_eq!(r.per_tag.len(), r.attempted);
    assert_eq!(r.pass_reads.iter().sum::<usize>(), r.unique_reads);
    assert_eq!(r.per_tag.iter().filter(|t| t.read).count(), r.unique_reads);
    assert!(r.per_tag.iter().all(|t| !t.read || t.activated));
    assert_eq!(r.success_rate, r.unique_reads as f64 / 288.0);
}

#[test]
fn dry_zone_reads_best() {
    let (layout, mut rig) = trial_preset();
    rig.contention = false;
    let r = simulate_with_link(&layout, &rig, &rfid(), &LossModifiers::default(), 1).unwrap();
    let zone_reads =
        |rows: std::ops::RangeInclusive<usize>| r.per_tag.iter().filter(|t| rows.contains(&t.row) && t.read).count();
    assert!(zone_reads(1..=4) >= zone_reads(5..=8));
    assert!(zone_reads(5..=8) >= zone_reads(9..=12));
}
