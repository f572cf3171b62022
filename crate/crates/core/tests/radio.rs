use jamsense::radio::{
    bandwidth_for_prbs, prbs_for_bandwidth, synthesize_scenario, JammerStrategy, ScenarioConfig, LTE_BANDWIDTHS,
};
use jamsense::Error;

#[test]
fn lte_bandwidths_map_to_block_counts() {
    assert_eq!(prbs_for_bandwidth(1.4).unwrap(), 6);
    assert_eq!(prbs_for_bandwidth(20.0).unwrap(), 100);
    assert!(matches!(prbs_for_bandwidth(7.0), Err(Error::Config(_))));
    for (mhz, n) in LTE_BANDWIDTHS {
        assert_eq!(bandwidth_for_prbs(n).unwrap(), mhz);
        assert_eq!(prbs_for_bandwidth(mhz).unwrap(), n);
    }
    assert!(bandwidth_for_prbs(12).is_err());
}

#[test]
fn grid_export_has_one_row_per_cell() {
    let cfg = ScenarioConfig {
        n_subcarriers: 3,
        n_slots: 10,
        jammer: JammerStrategy::full_band(vec![(5, 10)]),
        ..ScenarioConfig::default()
    };
    let sc = synthesize_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    sc.write_grid_csv(&path).unwrap();
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["t", "subcarrier", "I", "Q", "label"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 30);
    for row in &rows {
        let t: usize = row[0].parse().unwrap();
        let n: usize = row[1].parse().unwrap();
        let i: f64 = row[2].parse().unwrap();
        let q: f64 = row[3].parse().unwrap();
        assert_eq!((i, q), (sc.grid.samples[(n, t)].re, sc.grid.samples[(n, t)].im));
        assert_eq!(&row[4], if t >= 5 { "1" } else { "0" });
    }
}
