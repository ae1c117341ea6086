#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use linfa_cli::ingest::export_manifest;
use linfa_core::sim::{build_pattern, generate_ground_truth, simulate_data};

pub fn linfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linfa"))
        .args(args)
        .output()
        .expect("run linfa")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a simulated linked dataset in manifest form and returns the manifest path.
pub fn linked_manifest(dir: &Path, d: usize, q: usize, k: usize, n: usize, eta: f64, seed: u64) -> PathBuf {
    let truth = generate_ground_truth(d, q, seed).unwrap();
    let pattern = build_pattern(d, k, eta).unwrap();
    let sizes = vec![n / k; k];
    let (data, _) = simulate_data(&truth, &pattern, &sizes, seed).unwrap();
    let names: Vec<String> = (1..=d).map(|i| format!("v{i}")).collect();
    export_manifest(&names, &data, dir).unwrap()
}

/// Writes a single CSV whose rows alternate between observing the first and
/// the last `keep` of `d` columns; missing cells are `NA` or empty.
pub fn masked_csv(path: &Path, d: usize, keep: usize, n: usize, seed: u64) {
    let truth = generate_ground_truth(d, 2, seed).unwrap();
    let pattern = linfa_core::ObservationPattern::complete(d).unwrap();
    let (_, gt) = simulate_data(&truth, &pattern, &[n], seed).unwrap();
    let mut text = (1..=d).map(|i| format!("c{i}")).collect::<Vec<_>>().join(",") + "\n";
    for r in 0..n {
        let cells: Vec<String> = (0..d)
            .map(|c| {
                let observed = if r % 2 == 0 { c < keep } else { c >= d - keep };
                if observed {
                    format!("{}", gt.x_full[(r, c)] + 10.0)
                } else if r % 4 == 1 {
                    "NA".into()
                } else {
                    String::new()
                }
            })
            .collect();
        text += &(cells.join(",") + "\n");
    }
    std::fs::write(path, text).unwrap();
}
