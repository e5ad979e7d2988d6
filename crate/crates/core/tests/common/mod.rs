#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Oracle cases: name → (y, x).
pub fn oracle_series() -> BTreeMap<String, (Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(fixture("oracle_series.csv")).unwrap();
    let mut out: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for line in text.lines() {
        let mut fields = line.split(',');
        let case = fields.next().unwrap().to_string();
        let which = fields.next().unwrap();
        let values: Vec<f64> = fields.map(|v| v.parse().unwrap()).collect();
        let entry = out.entry(case).or_default();
        match which {
            "y" => entry.0 = values,
            "x" => entry.1 = values,
            other => panic!("unexpected series label {other}"),
        }
    }
    out
}

/// Expected values keyed by (case, check, field).
pub fn oracle_expected() -> BTreeMap<(String, String, String), f64> {
    let text = std::fs::read_to_string(fixture("oracle_expected.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            ((f[0].to_string(), f[1].to_string(), f[2].to_string()), f[3].parse().unwrap())
        })
        .collect()
}
