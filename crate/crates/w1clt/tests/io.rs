use w1clt::io::{parse_values, read_json, read_values_csv, write_json, write_values, write_values_csv};
use w1clt_core::DistributionModel;

#[test]
fn csv_round_trips_bits_and_skips_comments() {
    let values = [0.1, 1.0 / 3.0, 1e-300, 5e300, 0.0, 2.5];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/sample.csv");
    write_values_csv(&path, &values, &["process: iid\nseed: 4".to_string()]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# process: iid\n# seed: 4\nvalue\n"));
    let back = read_values_csv(&path).unwrap();
    assert_eq!(back.len(), values.len());
    for (a, b) in back.iter().zip(&values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn writer_output_is_stable() {
    let mut out = Vec::new();
    write_values(&mut out, &[1.0, 0.25], &[]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "value\n1.0\n0.25\n");
}

#[test]
fn parser_accepts_headerless_and_multi_column_files() {
    assert_eq!(parse_values("1.5\n2\n").unwrap(), vec![1.5, 2.0]);
    assert_eq!(parse_values("n,value\n3,0.5\n4,0.75\n").unwrap(), vec![0.5, 0.75]);
    assert_eq!(parse_values("# note\nvalue\n 7 \n").unwrap(), vec![7.0]);
    assert!(parse_values("x,y\n1,2\n").is_err());
    assert!(parse_values("value\nabc\n").is_err());
}

#[test]
fn json_round_trip_and_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let m = DistributionModel::pareto(1.0, 4.0).unwrap();
    write_json(&path, &m).unwrap();
    let back: DistributionModel = read_json(&path).unwrap();
    assert_eq!(back, m);
    std::fs::write(&path, "{not json").unwrap();
    let err = read_json::<DistributionModel>(&path).unwrap_err();
    assert!(err.to_string().contains("model.json"));
    assert_eq!(err.exit_code(), 1);
}
