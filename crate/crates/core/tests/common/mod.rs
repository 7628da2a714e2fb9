#![allow(dead_code)]

use std::path::{Path, PathBuf};

use flash_core::arch::{LayerDescriptor, SpaceSpec};
use flash_core::fixtures::{fit_models, generate_samples, reduced_spec, SyntheticTruth};
use flash_core::hwmodel::{HwConfig, LayerTiles};
use flash_core::optimizer::{Objective, ObjectiveMode};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

/// Rows of the committed tile table as (layer, hw, expected).
pub fn tile_table() -> Vec<(LayerDescriptor, HwConfig, LayerTiles)> {
    let mut reader = csv::Reader::from_path(data("tile_table.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            let v: Vec<u64> = r.unwrap().iter().map(|x| x.parse().unwrap()).collect();
            let u = |i: usize| v[i] as u32;
            let layer = LayerDescriptor {
                cell: 0,
                layer: 0,
                kx: u(0),
                ky: u(1),
                n_if: u(2),
                n_of: u(3),
                h: 8,
                w: 8,
                concat_count: 0,
            };
            let hw = HwConfig {
                n_bits: u(4),
                pe_x: u(5),
                pe_y: u(6),
                ce_per_tile: u(7),
                impe_per_ce: u(8),
                ..HwConfig::default()
            };
            let tiles = LayerTiles {
                rows: v[9],
                cols: v[10],
                tiles: v[11],
            };
            (layer, hw, tiles)
        })
        .collect()
}

/// Reduced spec `seed` with models fitted on 180 noise-free synthetic rows.
pub fn suite_instance(seed: u64) -> (SpaceSpec, Objective) {
    let hw = HwConfig::default();
    let spec = reduced_spec(seed);
    let truth = SyntheticTruth::for_space(&spec, &hw, seed).unwrap();
    let rows = generate_samples(&spec, &hw, &truth, 180, seed, 0.0).unwrap();
    let (acc, costs) = fit_models(&spec, &hw, &rows).unwrap();
    (
        spec,
        Objective::new(ObjectiveMode::Full, Some(acc), costs, hw),
    )
}

/// Runs the `flash` binary; panics unless it exits with 0.
pub fn flash_ok(args: &[&str]) -> Vec<u8> {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_flash"))
        .args(args)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "flash {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

/// Fixture export, four fits and a constrained search in `dir`. Returns the
/// bytes of the shgo result file and the brute-force result on stdout.
pub fn golden_pipeline(dir: &Path) -> (Vec<u8>, serde_json::Value) {
    let d = dir.to_str().unwrap();
    let spec = data("fixture_spec.json");
    let spec = spec.to_str().unwrap();
    let (fx, models, result) = (
        format!("{d}/fx"),
        format!("{d}/models"),
        format!("{d}/result.json"),
    );
    flash_ok(&[
        "export", "fixtures", "--out", &fx, "--spec", spec, "--n", "180", "--seed", "7", "--noise",
        "0.02",
    ]);
    let samples = format!("{fx}/samples.csv");
    for kind in ["accuracy", "latency", "energy", "area"] {
        flash_ok(&[
            "fit",
            kind,
            "--samples",
            &samples,
            "--spec",
            spec,
            "--models",
            &models,
        ]);
    }
    let search = ["--spec", spec, "--models", &models, "--theta-min", "0.9"];
    flash_ok(
        &[
            &[
                "search", "--mode", "shgo", "--lambda", "4", "--out", &result,
            ][..],
            &search[..],
        ]
        .concat(),
    );
    let brute = flash_ok(&[&["search", "--mode", "brute"][..], &search[..]].concat());
    (
        std::fs::read(&result).unwrap(),
        serde_json::from_slice(&brute).unwrap(),
    )
}
