#![allow(dead_code)]

use std::path::PathBuf;

use gridgame::cli::{load_scenario, Scenario};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Scenario {
    load_scenario(&fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
