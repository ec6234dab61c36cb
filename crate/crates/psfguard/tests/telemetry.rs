use psfguard::telemetry::{read_records, summarize_records, ColumnStats, TelemetryWriter};
use psfguard_core::sim::{run_episode, EngineOptions, NullClock};

fn short_episode() -> Vec<psfguard_core::sim::TelemetryRecord> {
    let mut s = psfguard::catalog::static_clutter(2);
    s.dims = psfguard_core::grid::GridDims::cube(24).unwrap();
    run_episode(&s, EngineOptions::default(), Some(30), &NullClock)
        .unwrap()
        .records
}

#[test]
fn records_round_trip_through_jsonl() {
    let records = short_episode();
    let mut w = TelemetryWriter::new(Vec::new());
    for r in &records {
        w.write(r).unwrap();
    }
    assert_eq!(w.records(), records.len());
    let (back, corrupt) = read_records(w.into_inner().as_slice()).unwrap();
    assert_eq!(corrupt, 0);
    assert_eq!(back, records);
}

#[test]
fn unbounded_values_are_written_as_null() {
    let mut r = short_episode().remove(0);
    r.min_true_clearance = f64::INFINITY;
    let mut w = TelemetryWriter::new(Vec::new());
    w.write(&r).unwrap();
    let text = String::from_utf8(w.into_inner()).unwrap();
    assert!(text.contains("\"min_true_clearance\":null"), "{text}");
    let (back, _) = read_records(text.as_bytes()).unwrap();
    assert_eq!(back[0].min_true_clearance, f64::INFINITY);
}

#[test]
fn corrupt_lines_are_counted_and_skipped() {
    let records = short_episode();
    let mut w = TelemetryWriter::new(Vec::new());
    w.write(&records[0]).unwrap();
    let mut text = String::from_utf8(w.into_inner()).unwrap();
    text.push_str("not json\n\n{\"t\": 1}\n");
    let (back, corrupt) = read_records(text.as_bytes()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(corrupt, 2);
}

#[test]
fn summary_counts_match_the_records() {
    let records = short_episode();
    let s = summarize_records(&records, 3);
    assert_eq!(s.records, 30);
    assert_eq!(s.corrupt_lines, 3);
    assert_eq!(s.n_samples, Some(records[0].n_samples));
    assert_eq!(s.epsilon, Some(0.1));
    assert_eq!(
        s.violations,
        records
            .iter()
            .filter(|r| r.min_h_samples <= 0.0 || r.min_true_clearance < 0.0)
            .count()
    );
    assert_eq!(
        s.field_refreshes,
        records.iter().filter(|r| r.field_refreshed).count()
    );
    let h = &s.columns["min_h_samples"];
    assert!(h.min <= h.mean && h.mean <= h.max);
}

#[test]
fn percentile_is_nearest_rank_over_finite_values() {
    let s = ColumnStats::of((1..=200).map(f64::from).chain([f64::NAN, f64::INFINITY])).unwrap();
    assert_eq!(s.min, 1.0);
    assert_eq!(s.max, 200.0);
    assert_eq!(s.p99, 198.0);
    assert_eq!(s.mean, 100.5);
    assert!(ColumnStats::of([f64::NAN]).is_none());
    assert_eq!(ColumnStats::of([4.0]).unwrap().p99, 4.0);
}
