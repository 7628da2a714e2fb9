mod common;

use flash_core::arch::{sample_uniform, LayerDescriptor, SpaceSpec};
use flash_core::fixtures::{fit_models, generate_samples, SyntheticTruth};
use flash_core::hwmodel::{
    area, features, tile_requirements, total_tiles, EnergyModel, HwConfig, LatencyModel,
};
use proptest::prelude::*;

fn layer(kx: u32, ky: u32, n_if: u32, n_of: u32) -> LayerDescriptor {
    LayerDescriptor {
        cell: 0,
        layer: 0,
        kx,
        ky,
        n_if,
        n_of,
        h: 8,
        w: 8,
        concat_count: 0,
    }
}

fn hw(n_bits: u32, pe_x: u32, pe_y: u32, c: u32, p: u32) -> HwConfig {
    HwConfig {
        pe_x,
        pe_y,
        n_bits,
        ce_per_tile: c,
        impe_per_ce: p,
        ..HwConfig::default()
    }
}

#[test]
fn tile_table_matches() {
    let table = common::tile_table();
    assert_eq!(table.len(), 20);
    for (l, h, expected) in table {
        assert_eq!(tile_requirements(&l, &h), expected, "{l:?} {h:?}");
    }
}

#[test]
fn noise_free_fit_recovers_weights() {
    let spec = SpaceSpec::default();
    let hw = HwConfig::default();
    let truth = SyntheticTruth::for_space(&spec, &hw, 21).unwrap();
    let rows = generate_samples(&spec, &hw, &truth, 180, 4, 0.0).unwrap();
    let (_, costs) = fit_models(&spec, &hw, &rows).unwrap();
    let close = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * y.abs())
    };
    assert!(close(
        &costs.latency.unwrap().weights(),
        &truth.latency.weights()
    ));
    assert!(close(&costs.energy.unwrap().weights, &truth.energy.weights));
    assert!(close(&costs.area.unwrap().weights(), &truth.area.weights()));
}

#[test]
fn noisy_fit_predicts_held_out_rows() {
    let spec = SpaceSpec::default();
    let hw = HwConfig::default();
    let truth = SyntheticTruth::for_space(&spec, &hw, 5).unwrap();
    let train = generate_samples(&spec, &hw, &truth, 180, 6, 0.03).unwrap();
    let test = generate_samples(&spec, &hw, &truth, 180, 7, 0.03).unwrap();
    let (_, costs) = fit_models(&spec, &hw, &train).unwrap();
    let (mut lat, mut en) = (0.0, 0.0);
    for r in &test {
        let f = features(&r.config, &spec, &hw).unwrap();
        lat += (costs.predict_latency(&f).unwrap() - r.latency_ms).abs() / r.latency_ms;
        en += (costs.predict_energy(&f).unwrap() - r.energy_mj).abs() / r.energy_mj;
    }
    let n = test.len() as f64;
    assert!(lat / n < 0.04, "latency {}", lat / n);
    assert!(en / n < 0.04, "energy {}", en / n);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tiles_monotone(
        n_if in 1u32..600, n_of in 1u32..600, n_bits in 1u32..16,
        pe_x in 8u32..256, pe_y in 8u32..256, c in 1u32..8, p in 1u32..8,
        grow in 1u32..64,
    ) {
        let base = tile_requirements(&layer(3, 3, n_if, n_of), &hw(n_bits, pe_x, pe_y, c, p));
        let t = |l: LayerDescriptor, h: HwConfig| tile_requirements(&l, &h).tiles;
        prop_assert!(t(layer(3, 3, n_if + grow, n_of), hw(n_bits, pe_x, pe_y, c, p)) >= base.tiles);
        prop_assert!(t(layer(3, 3, n_if, n_of + grow), hw(n_bits, pe_x, pe_y, c, p)) >= base.tiles);
        prop_assert!(t(layer(3, 3, n_if, n_of), hw(n_bits + grow, pe_x, pe_y, c, p)) >= base.tiles);
        prop_assert!(t(layer(3, 3, n_if, n_of), hw(n_bits, pe_x + grow, pe_y, c, p)) <= base.tiles);
        prop_assert!(t(layer(3, 3, n_if, n_of), hw(n_bits, pe_x, pe_y + grow, c, p)) <= base.tiles);
        prop_assert!(t(layer(3, 3, n_if, n_of), hw(n_bits, pe_x, pe_y, c + grow, p)) <= base.tiles);
        prop_assert!(t(layer(3, 3, n_if, n_of), hw(n_bits, pe_x, pe_y, c, p + grow)) <= base.tiles);
    }

    #[test]
    fn predictions_linear_in_weights(
        seed in any::<u64>(),
        lat in prop::array::uniform6(-5.0f64..5.0),
        en in prop::array::uniform7(-5.0f64..5.0),
        alpha in -10.0f64..10.0,
    ) {
        let spec = SpaceSpec::default();
        let hw = HwConfig::default();
        let c = &sample_uniform(&spec, seed, 1).unwrap()[0];
        let f = features(c, &spec, &hw).unwrap();
        let l = LatencyModel::from_weights(&lat, 0.0).unwrap();
        let la: Vec<f64> = lat.iter().map(|w| alpha * w).collect();
        let l2 = LatencyModel::from_weights(&la, 0.0).unwrap();
        let tol = |x: f64| 1e-9 * x.abs().max(1.0);
        prop_assert!((l2.predict(&f) - alpha * l.predict(&f)).abs() <= tol(alpha * l.predict(&f)));
        let e = EnergyModel::from_weights(&en, 0.0).unwrap();
        let ea: Vec<f64> = en.iter().map(|w| alpha * w).collect();
        let e2 = EnergyModel::from_weights(&ea, 0.0).unwrap();
        prop_assert!((e2.predict(&f) - alpha * e.predict(&f)).abs() <= tol(alpha * e.predict(&f)));
    }

    #[test]
    fn area_is_whole_tiles(seed in any::<u64>(), a_t in 0.01f64..2.0, a_r in 0.0f64..0.5, rest in 0.0f64..10.0) {
        let spec = SpaceSpec::default();
        let hw = HwConfig { a_tile: a_t, a_router: a_r, a_rest: rest, ..HwConfig::default() };
        let c = &sample_uniform(&spec, seed, 1).unwrap()[0];
        let tiles = total_tiles(c, &spec, &hw).unwrap();
        let k = (area(c, &spec, &hw).unwrap() - rest) / (a_t + a_r);
        prop_assert!((k - tiles as f64).abs() < 1e-9 * tiles as f64);
    }
}
