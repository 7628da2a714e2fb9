//! IMC accelerator mapping and the analytical area, latency and energy models.
//!
//! Each layer's weights occupy `N_r x N_cols` crossbars (imPEs); a tile holds
//! `c * p` of them and owns one NoC router. Area is linear in the tile count,
//! latency is linear in compute and NoC features, and energy is a per-tile
//! linear model scaled by the tile count.

use serde::{Deserialize, Serialize};

use crate::arch::{
    realize_layers, validate, ArchConfig, LayerDescriptor, LayerGeometry, SpaceSpec,
};
use crate::error::{Error, Result};
use crate::ols::fit_linear;

/// Missing JSON keys take their default values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwConfig {
    pub pe_x: u32,
    pub pe_y: u32,
    pub n_bits: u32,
    pub ce_per_tile: u32,
    pub impe_per_ce: u32,
    pub kx: u32,
    pub ky: u32,
    pub h0: u32,
    pub w0: u32,
    pub c0: u32,
    /// Tile area (mm²).
    pub a_tile: f64,
    /// Router area (mm²).
    pub a_router: f64,
    /// Peripheral and remaining NoC area (mm²).
    pub a_rest: f64,
}

impl Default for HwConfig {
    fn default() -> Self {
        HwConfig {
            pe_x: 128,
            pe_y: 128,
            n_bits: 8,
            ce_per_tile: 4,
            impe_per_ce: 4,
            kx: 3,
            ky: 3,
            h0: 32,
            w0: 32,
            c0: 3,
            a_tile: 0.25,
            a_router: 0.05,
            a_rest: 2.0,
        }
    }
}

impl HwConfig {
    pub fn check(&self) -> Result<()> {
        let ints = [
            ("pe_x", self.pe_x),
            ("pe_y", self.pe_y),
            ("n_bits", self.n_bits),
            ("ce_per_tile", self.ce_per_tile),
            ("impe_per_ce", self.impe_per_ce),
            ("kx", self.kx),
            ("ky", self.ky),
            ("h0", self.h0),
            ("w0", self.w0),
            ("c0", self.c0),
        ];
        if let Some((name, _)) = ints.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Domain(format!(
                "hardware config: {name} must be positive"
            )));
        }
        for (name, v) in [
            ("a_tile", self.a_tile),
            ("a_router", self.a_router),
            ("a_rest", self.a_rest),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "hardware config: {name} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> LayerGeometry {
        LayerGeometry {
            h0: self.h0,
            w0: self.w0,
            c0: self.c0,
            kx: self.kx,
            ky: self.ky,
        }
    }

    pub fn impe_per_tile(&self) -> u64 {
        self.ce_per_tile as u64 * self.impe_per_ce as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerTiles {
    /// Crossbar rows `N_r`.
    pub rows: u64,
    /// Crossbar columns `N_cols`.
    pub cols: u64,
    pub tiles: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TileCount {
    pub per_layer: Vec<LayerTiles>,
    pub total: u64,
}

/// Crossbars and tiles needed to hold one layer's weights.
pub fn tile_requirements(layer: &LayerDescriptor, hw: &HwConfig) -> LayerTiles {
    let rows = (layer.kx as u64 * layer.ky as u64 * layer.n_if as u64).div_ceil(hw.pe_x as u64);
    let cols = (layer.n_of as u64 * hw.n_bits as u64).div_ceil(hw.pe_y as u64);
    let tiles = (rows * cols).div_ceil(hw.impe_per_tile());
    LayerTiles { rows, cols, tiles }
}

pub fn count_tiles(layers: &[LayerDescriptor], hw: &HwConfig) -> TileCount {
    let per_layer: Vec<LayerTiles> = layers.iter().map(|l| tile_requirements(l, hw)).collect();
    let total = per_layer.iter().map(|t| t.tiles).sum();
    TileCount { per_layer, total }
}

/// Total tile count `N_T` of a realized config.
pub fn total_tiles(config: &ArchConfig, spec: &SpaceSpec, hw: &HwConfig) -> Result<u64> {
    let layers = realize_layers(config, spec, &hw.geometry())?;
    Ok(count_tiles(&layers, hw).total)
}

pub fn area_from_tiles(tiles: u64, hw: &HwConfig) -> f64 {
    tiles as f64 * (hw.a_tile + hw.a_router) + hw.a_rest
}

/// Chip area (mm²) from the hardware constants.
pub fn area(config: &ArchConfig, spec: &SpaceSpec, hw: &HwConfig) -> Result<f64> {
    Ok(area_from_tiles(total_tiles(config, spec, hw)?, hw))
}

/// Architecture features consumed by the cost models, summed over cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Features {
    pub w_m: u32,
    pub d_c: u32,
    pub n_c: u32,
    /// Skip-connection kernels, `sum_c SC_c`.
    pub skip_connections: u64,
    /// Skip traffic, `sum_c SC_c * H_c * W_c` elements.
    pub comm: u64,
    /// `2 * sum_layers Kx * Ky * N_if * N_of * H * W`.
    pub flops: u64,
    /// Output feature-map elements, `sum_c d_c * w_c * H_c * W_c`.
    pub feature_map: u64,
    pub tiles: u64,
}

pub const LATENCY_FEATURES: [&str; 6] =
    ["w_m", "d_c", "n_c", "n_c*d_c*w_m^2", "sum_sc", "sum_comm"];

pub const ENERGY_FEATURES: [&str; 7] = [
    "w_m", "d_c", "n_c", "sum_sc", "sum_comm", "sum_flop", "sum_fm",
];

impl Features {
    /// `F_comp = [w_m, d_c, N_c, N_c * d_c * w_m^2]`.
    pub fn comp(&self) -> [f64; 4] {
        let (w, d, n) = (self.w_m as f64, self.d_c as f64, self.n_c as f64);
        [w, d, n, n * d * w * w]
    }

    /// `F_NoC = [sum SC_c, sum Comm_c]`.
    pub fn noc(&self) -> [f64; 2] {
        [self.skip_connections as f64, self.comm as f64]
    }

    /// `F_E = [w_m, d_c, N_c, sum SC_c, sum Comm_c, sum FLOP_c, sum FM_c]`.
    pub fn energy(&self) -> [f64; 7] {
        [
            self.w_m as f64,
            self.d_c as f64,
            self.n_c as f64,
            self.skip_connections as f64,
            self.comm as f64,
            self.flops as f64,
            self.feature_map as f64,
        ]
    }

    pub fn latency_row(&self) -> Vec<f64> {
        self.comp()
            .iter()
            .chain(self.noc().iter())
            .copied()
            .collect()
    }

    pub fn energy_row(&self) -> Vec<f64> {
        let tiles = self.tiles as f64;
        self.energy().iter().map(|f| f * tiles).collect()
    }
}

pub fn features_from_layers(
    config: &ArchConfig,
    layers: &[LayerDescriptor],
    hw: &HwConfig,
) -> Features {
    let mut f = Features {
        w_m: config.w_m,
        d_c: config.d_c,
        n_c: config.n_c,
        skip_connections: 0,
        comm: 0,
        flops: 0,
        feature_map: 0,
        tiles: 0,
    };
    for layer in layers {
        let hw_elems = layer.h as u64 * layer.w as u64;
        let out = layer.n_of as u64;
        let sc = layer.concat_count as u64 * out;
        f.skip_connections += sc;
        f.comm += sc * hw_elems;
        f.flops += 2 * layer.kx as u64 * layer.ky as u64 * layer.n_if as u64 * out * hw_elems;
        f.feature_map += out * hw_elems;
        f.tiles += tile_requirements(layer, hw).tiles;
    }
    f
}

/// Cost-model features of a valid config.
pub fn features(config: &ArchConfig, spec: &SpaceSpec, hw: &HwConfig) -> Result<Features> {
    let report = validate(config, spec);
    if !report.is_valid() {
        return Err(Error::Domain(format!("invalid config {config}: {report}")));
    }
    features_unchecked(config, spec, hw)
}

pub fn features_unchecked(
    config: &ArchConfig,
    spec: &SpaceSpec,
    hw: &HwConfig,
) -> Result<Features> {
    let layers = realize_layers(config, spec, &hw.geometry())?;
    Ok(features_from_layers(config, &layers, hw))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L = Λ_comp·F_comp + Λ_NoC·F_NoC` (ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    pub comp: [f64; 4],
    pub noc: [f64; 2],
    pub rmse: f64,
}

impl LatencyModel {
    pub fn from_weights(weights: &[f64], rmse: f64) -> Result<Self> {
        if weights.len() != 6 {
            return Err(Error::Data(format!(
                "latency model needs 6 weights, got {}",
                weights.len()
            )));
        }
        Ok(LatencyModel {
            comp: [weights[0], weights[1], weights[2], weights[3]],
            noc: [weights[4], weights[5]],
            rmse,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.comp.iter().chain(self.noc.iter()).copied().collect()
    }

    pub fn predict(&self, f: &Features) -> f64 {
        dot(&self.comp, &f.comp()) + dot(&self.noc, &f.noc())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        LatencyModel {
            comp: self.comp.map(|w| w * alpha),
            noc: self.noc.map(|w| w * alpha),
            rmse: self.rmse,
        }
    }
}

/// `E = (Λ_E·F_E) * N_T` (mJ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub weights: [f64; 7],
    pub rmse: f64,
}

impl EnergyModel {
    pub fn from_weights(weights: &[f64], rmse: f64) -> Result<Self> {
        let weights: [f64; 7] = weights.try_into().map_err(|_| {
            Error::Data(format!(
                "energy model needs 7 weights, got {}",
                weights.len()
            ))
        })?;
        Ok(EnergyModel { weights, rmse })
    }

    /// Energy of one tile, `Λ_E·F_E`.
    pub fn per_tile(&self, f: &Features) -> f64 {
        dot(&self.weights, &f.energy())
    }

    pub fn predict(&self, f: &Features) -> f64 {
        self.per_tile(f) * f.tiles as f64
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        EnergyModel {
            weights: self.weights.map(|w| w * alpha),
            rmse: self.rmse,
        }
    }
}

/// `A = N_T * (A_T + A_R) + A_rest` (mm²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaModel {
    /// `A_T + A_R`.
    pub per_tile: f64,
    pub rest: f64,
    pub rmse: f64,
}

impl AreaModel {
    pub fn from_hw(hw: &HwConfig) -> Self {
        AreaModel {
            per_tile: hw.a_tile + hw.a_router,
            rest: hw.a_rest,
            rmse: 0.0,
        }
    }

    pub fn from_weights(weights: &[f64], rmse: f64) -> Result<Self> {
        match weights {
            [per_tile, rest] => Ok(AreaModel {
                per_tile: *per_tile,
                rest: *rest,
                rmse,
            }),
            _ => Err(Error::Data(format!(
                "area model needs 2 weights, got {}",
                weights.len()
            ))),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.per_tile, self.rest]
    }

    pub fn predict(&self, tiles: u64) -> f64 {
        tiles as f64 * self.per_tile + self.rest
    }
}

/// The fitted hardware models; any of them may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostModels {
    pub latency: Option<LatencyModel>,
    pub energy: Option<EnergyModel>,
    pub area: Option<AreaModel>,
}

impl CostModels {
    pub fn predict_latency(&self, f: &Features) -> Result<f64> {
        self.latency
            .as_ref()
            .map(|m| m.predict(f))
            .ok_or_else(|| Error::State("latency model not fitted".into()))
    }

    pub fn predict_energy(&self, f: &Features) -> Result<f64> {
        self.energy
            .as_ref()
            .map(|m| m.predict(f))
            .ok_or_else(|| Error::State("energy model not fitted".into()))
    }

    /// Area from the fitted model, falling back to the hardware constants.
    pub fn predict_area(&self, f: &Features, hw: &HwConfig) -> f64 {
        self.area
            .unwrap_or_else(|| AreaModel::from_hw(hw))
            .predict(f.tiles)
    }
}

pub fn predict_latency(
    models: &CostModels,
    config: &ArchConfig,
    spec: &SpaceSpec,
    hw: &HwConfig,
) -> Result<f64> {
    models.predict_latency(&features(config, spec, hw)?)
}

pub fn predict_energy(
    models: &CostModels,
    config: &ArchConfig,
    spec: &SpaceSpec,
    hw: &HwConfig,
) -> Result<f64> {
    models.predict_energy(&features(config, spec, hw)?)
}

pub fn fit_latency(rows: &[(Features, f64)]) -> Result<LatencyModel> {
    let x: Vec<Vec<f64>> = rows.iter().map(|(f, _)| f.latency_row()).collect();
    let y: Vec<f64> = rows.iter().map(|(_, t)| *t).collect();
    let fit = fit_linear(&x, &y, Some(&LATENCY_FEATURES))?;
    LatencyModel::from_weights(&fit.weights, fit.rmse)
}

pub fn fit_energy(rows: &[(Features, f64)]) -> Result<EnergyModel> {
    let x: Vec<Vec<f64>> = rows.iter().map(|(f, _)| f.energy_row()).collect();
    let y: Vec<f64> = rows.iter().map(|(_, t)| *t).collect();
    let fit = fit_linear(&x, &y, Some(&ENERGY_FEATURES))?;
    EnergyModel::from_weights(&fit.weights, fit.rmse)
}

/// Calibrates `(A_T + A_R, A_rest)` from measured `(N_T, area)` pairs.
pub fn fit_area(rows: &[(u64, f64)]) -> Result<AreaModel> {
    let x: Vec<Vec<f64>> = rows.iter().map(|(t, _)| vec![*t as f64, 1.0]).collect();
    let y: Vec<f64> = rows.iter().map(|(_, a)| *a).collect();
    let fit = fit_linear(&x, &y, Some(&["n_tiles", "constant"]))?;
    AreaModel::from_weights(&fit.weights, fit.rmse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(kx: u32, n_if: u32, n_of: u32) -> LayerDescriptor {
        LayerDescriptor {
            cell: 0,
            layer: 0,
            kx,
            ky: kx,
            n_if,
            n_of,
            h: 8,
            w: 8,
            concat_count: 0,
        }
    }

    #[test]
    fn tile_hand_checks() {
        let hw = HwConfig::default();
        assert_eq!(
            tile_requirements(&layer(3, 16, 16), &hw),
            LayerTiles {
                rows: 2,
                cols: 1,
                tiles: 1
            }
        );
        let tiny = HwConfig {
            n_bits: 1,
            ..HwConfig::default()
        };
        assert_eq!(
            tile_requirements(&layer(1, 1, 1), &tiny),
            LayerTiles {
                rows: 1,
                cols: 1,
                tiles: 1
            }
        );
        for k in 1..5 {
            assert_eq!(
                tile_requirements(&layer(3, 128 * k, 16), &hw).rows,
                9 * k as u64
            );
        }
    }

    #[test]
    fn area_is_linear_in_tiles() {
        let hw = HwConfig {
            a_tile: 1.5,
            a_router: 0.5,
            a_rest: 5.0,
            ..HwConfig::default()
        };
        assert_eq!(area_from_tiles(10, &hw), 25.0);
        assert!(area_from_tiles(11, &hw) > area_from_tiles(10, &hw));
    }

    #[test]
    fn feature_vectors_for_example_config() {
        let spec = SpaceSpec::default();
        let hw = HwConfig::default();
        let f = features(&ArchConfig::new(1, 5, vec![5, 10, 20]), &spec, &hw).unwrap();
        assert_eq!(f.skip_connections, 5040);
        assert_eq!(f.comm, 240 * 1024 + 960 * 256 + 3840 * 64);
        assert_eq!(f.feature_map, 5 * (16 * 1024 + 32 * 256 + 64 * 64));
        assert_eq!(f.comp(), [1.0, 5.0, 3.0, 15.0]);

        let f0 = features_unchecked(&ArchConfig::new(1, 5, vec![0, 0, 0]), &spec, &hw).unwrap();
        assert_eq!(f0.noc(), [0.0, 0.0]);

        let f2 = features(&ArchConfig::new(2, 10, vec![5, 10, 20]), &spec, &hw).unwrap();
        assert_eq!(f2.comp()[3], 120.0);
    }

    #[test]
    fn zero_and_one_hot_weights() {
        let spec = SpaceSpec::default();
        let hw = HwConfig::default();
        let f = features(&ArchConfig::new(3, 9, vec![7, 20, 41]), &spec, &hw).unwrap();
        let zero = LatencyModel::from_weights(&[0.0; 6], 0.0).unwrap();
        assert_eq!(zero.predict(&f), 0.0);
        let one_hot = LatencyModel::from_weights(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(one_hot.predict(&f), 3.0);
        let e0 = EnergyModel::from_weights(&[0.0; 7], 0.0).unwrap();
        assert_eq!(e0.predict(&f), 0.0);
    }

    #[test]
    fn energy_doubles_with_tiles() {
        let spec = SpaceSpec::default();
        let hw = HwConfig::default();
        let f = features(&ArchConfig::new(1, 6, vec![5, 10, 20]), &spec, &hw).unwrap();
        let m = EnergyModel::from_weights(&[0.1, 0.02, 0.3, 1e-4, 1e-7, 1e-9, 1e-6], 0.0).unwrap();
        let doubled = Features {
            tiles: f.tiles * 2,
            ..f
        };
        assert_eq!(m.predict(&doubled), 2.0 * m.predict(&f));
    }

    #[test]
    fn unfitted_models_are_state_errors() {
        let models = CostModels::default();
        let spec = SpaceSpec::default();
        let hw = HwConfig::default();
        let c = ArchConfig::new(1, 5, vec![5, 10, 20]);
        assert!(matches!(
            predict_latency(&models, &c, &spec, &hw),
            Err(Error::State(_))
        ));
        assert!(matches!(
            predict_energy(&models, &c, &spec, &hw),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn single_layer_network_uses_its_own_tiles() {
        let spec = SpaceSpec {
            d_c_min: 1,
            n_c: 1,
            base_widths: vec![64],
            t1_min: 0,
            ..SpaceSpec::default()
        };
        let hw = HwConfig::default();
        let c = ArchConfig::new(1, 1, vec![0]);
        let layers = realize_layers(&c, &spec, &hw.geometry()).unwrap();
        assert_eq!(layers.len(), 1);
        assert_eq!(
            total_tiles(&c, &spec, &hw).unwrap(),
            tile_requirements(&layers[0], &hw).tiles
        );
    }
}
