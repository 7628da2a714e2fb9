//! Sample tables (CSV) and the on-disk model directory (JSON).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::arch::{validate, ArchConfig, SpaceSpec};
use crate::error::{Error, Result};
use crate::fixtures::SampleRow;
use crate::hwmodel::{AreaModel, CostModels, EnergyModel, HwConfig, LatencyModel};
use crate::predictor::AccuracyModel;

pub const SCHEMA_VERSION: u32 = 1;

const ARCH_COLUMNS: [&str; 4] = ["w_m", "n_c", "d_c", "t"];
const MEASUREMENT_COLUMNS: [&str; 4] = ["accuracy", "latency_ms", "energy_mj", "area_mm2"];

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// One-based line number in the source file.
    pub line: u64,
    pub config: ArchConfig,
    /// Fraction in (0, 1).
    pub accuracy: Option<f64>,
    pub latency_ms: Option<f64>,
    pub energy_mj: Option<f64>,
    pub area_mm2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub path: PathBuf,
    pub rows: Vec<SampleRecord>,
}

impl SampleTable {
    /// Rows with a value in `column`, paired with that value.
    pub fn column(&self, column: &str) -> Result<Vec<(&ArchConfig, f64)>> {
        let pick = |r: &SampleRecord| match column {
            "accuracy" => r.accuracy,
            "latency_ms" => r.latency_ms,
            "energy_mj" => r.energy_mj,
            "area_mm2" => r.area_mm2,
            _ => None,
        };
        let out: Vec<_> = self
            .rows
            .iter()
            .filter_map(|r| pick(r).map(|v| (&r.config, v)))
            .collect();
        if out.is_empty() {
            return Err(Error::Data(format!(
                "{}: no values in column {column}",
                self.path.display()
            )));
        }
        Ok(out)
    }
}

/// Reads and validates a sample CSV.
///
/// Required header columns: `w_m,n_c,d_c,t`; any of `accuracy, latency_ms,
/// energy_mj, area_mm2` may follow. Accuracy values above 1 are percentages.
pub fn load_samples(path: &Path, spec: &SpaceSpec) -> Result<SampleTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let where_ = path.display().to_string();
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{where_}: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    for col in &names {
        if !ARCH_COLUMNS.contains(col) && !MEASUREMENT_COLUMNS.contains(col) {
            return Err(Error::Data(format!("{where_}: unknown column '{col}'")));
        }
    }
    let index = |name: &str| names.iter().position(|c| *c == name);
    let mut arch_idx = [0usize; 4];
    for (slot, name) in arch_idx.iter_mut().zip(ARCH_COLUMNS) {
        *slot = index(name)
            .ok_or_else(|| Error::Data(format!("{where_}: header lacks column '{name}'")))?;
    }
    let meas_idx: Vec<Option<usize>> = MEASUREMENT_COLUMNS.iter().map(|n| index(n)).collect();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{where_}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let at = |msg: String| Error::Data(format!("{where_}: line {line}: {msg}"));
        let int = |i: usize, name: &str| -> Result<u32> {
            record[i].parse().map_err(|_| {
                at(format!(
                    "{name} = '{}' is not a non-negative integer",
                    &record[i]
                ))
            })
        };
        let w_m = int(arch_idx[0], "w_m")?;
        let n_c = int(arch_idx[1], "n_c")?;
        let d_c = int(arch_idx[2], "d_c")?;
        let t = crate::arch::skip_list::parse(&record[arch_idx[3]]).map_err(&at)?;
        let config = ArchConfig { w_m, n_c, d_c, t };
        let report = validate(&config, spec);
        if !report.is_valid() {
            return Err(at(format!("invalid architecture {config}: {report}")));
        }

        let mut values = [None; 4];
        for (k, idx) in meas_idx.iter().enumerate() {
            let Some(i) = *idx else { continue };
            let raw = &record[i];
            if raw.is_empty() {
                continue;
            }
            let name = MEASUREMENT_COLUMNS[k];
            let v: f64 = raw
                .parse()
                .map_err(|_| at(format!("{name} = '{raw}' is not a number")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(at(format!("{name} = {raw} must be finite and positive")));
            }
            values[k] = Some(v);
        }
        if let Some(a) = values[0] {
            let a = if a > 1.0 { a / 100.0 } else { a };
            if a >= 1.0 {
                return Err(at(format!(
                    "accuracy {a} outside (0, 1) after percentage normalization"
                )));
            }
            values[0] = Some(a);
        }
        rows.push(SampleRecord {
            line,
            config,
            accuracy: values[0],
            latency_ms: values[1],
            energy_mj: values[2],
            area_mm2: values[3],
        });
    }
    Ok(SampleTable {
        path: path.to_path_buf(),
        rows,
    })
}

/// Writes rows with every measurement column.
pub fn write_samples<W: Write>(out: W, rows: &[SampleRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let data = |e: csv::Error| Error::Data(format!("csv: {e}"));
    w.write_record(ARCH_COLUMNS.iter().chain(&MEASUREMENT_COLUMNS))
        .map_err(data)?;
    for r in rows {
        w.write_record([
            r.config.w_m.to_string(),
            r.config.n_c.to_string(),
            r.config.d_c.to_string(),
            r.config.t_string(),
            r.accuracy.to_string(),
            r.latency_ms.to_string(),
            r.energy_mj.to_string(),
            r.area_mm2.to_string(),
        ])
        .map_err(data)?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("model types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_text(value)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccuracyFile {
    kind: String,
    a: f64,
    b: f64,
    c: f64,
    rmse: f64,
    n_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearFile {
    kind: String,
    weights: Vec<f64>,
    rmse: f64,
}

/// A directory holding `accuracy.json`, `latency.json`, `energy.json`,
/// `area.json`, `hw.json` and a `manifest.json` with the schema version.
#[derive(Debug, Clone)]
pub struct ModelStore {
    dir: PathBuf,
}

impl ModelStore {
    /// Opens `dir`, creating it and its manifest when absent.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let store = ModelStore { dir };
        let manifest = store.path("manifest.json");
        if manifest.exists() {
            store.check_version()?;
        } else {
            write_json(
                &manifest,
                &Manifest {
                    schema_version: SCHEMA_VERSION,
                },
            )?;
        }
        Ok(store)
    }

    /// Opens an existing store without creating anything.
    pub fn open_existing(dir: impl Into<PathBuf>) -> Result<Self> {
        let store = ModelStore { dir: dir.into() };
        if !store.dir.is_dir() {
            return Err(Error::Data(format!(
                "model directory {} does not exist",
                store.dir.display()
            )));
        }
        store.check_version()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn check_version(&self) -> Result<()> {
        let path = self.path("manifest.json");
        if !path.exists() {
            return Err(Error::Data(format!(
                "{}: missing manifest.json",
                self.dir.display()
            )));
        }
        let m: Manifest = read_json(&path)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                m.schema_version
            )));
        }
        Ok(())
    }

    fn load_opt<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>> {
        let path = self.path(name);
        if path.exists() {
            read_json(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    fn load_linear(&self, kind: &str) -> Result<Option<LinearFile>> {
        let name = format!("{kind}.json");
        let file: Option<LinearFile> = self.load_opt(&name)?;
        if let Some(f) = &file {
            if f.kind != kind {
                return Err(Error::Data(format!(
                    "{}: kind '{}' where '{kind}' was expected",
                    self.path(&name).display(),
                    f.kind
                )));
            }
        }
        Ok(file)
    }

    fn save_linear(&self, kind: &str, weights: Vec<f64>, rmse: f64) -> Result<()> {
        write_json(
            &self.path(&format!("{kind}.json")),
            &LinearFile {
                kind: kind.to_string(),
                weights,
                rmse,
            },
        )
    }

    pub fn save_accuracy(&self, m: &AccuracyModel) -> Result<()> {
        write_json(
            &self.path("accuracy.json"),
            &AccuracyFile {
                kind: "accuracy".into(),
                a: m.a,
                b: m.b,
                c: m.c,
                rmse: m.rmse,
                n_samples: m.n_samples,
            },
        )
    }

    pub fn load_accuracy(&self) -> Result<Option<AccuracyModel>> {
        let Some(f) = self.load_opt::<AccuracyFile>("accuracy.json")? else {
            return Ok(None);
        };
        if f.kind != "accuracy" {
            return Err(Error::Data(format!(
                "accuracy.json: unexpected kind '{}'",
                f.kind
            )));
        }
        let mut m = AccuracyModel::new(f.a, f.b, f.c)
            .map_err(|e| Error::Data(format!("accuracy.json: {e}")))?;
        m.rmse = f.rmse;
        m.n_samples = f.n_samples;
        Ok(Some(m))
    }

    pub fn save_latency(&self, m: &LatencyModel) -> Result<()> {
        self.save_linear("latency", m.weights(), m.rmse)
    }

    pub fn save_energy(&self, m: &EnergyModel) -> Result<()> {
        self.save_linear("energy", m.weights.to_vec(), m.rmse)
    }

    pub fn save_area(&self, m: &AreaModel) -> Result<()> {
        self.save_linear("area", m.weights(), m.rmse)
    }

    pub fn save_hw(&self, hw: &HwConfig) -> Result<()> {
        write_json(&self.path("hw.json"), hw)
    }

    pub fn load_hw(&self) -> Result<Option<HwConfig>> {
        self.load_opt("hw.json")
    }

    /// Every cost model present in the store.
    pub fn load_costs(&self) -> Result<CostModels> {
        fn ctx(kind: &'static str) -> impl Fn(Error) -> Error {
            move |e| Error::Data(format!("{kind}.json: {e}"))
        }
        let latency = self
            .load_linear("latency")?
            .map(|f| LatencyModel::from_weights(&f.weights, f.rmse))
            .transpose()
            .map_err(ctx("latency"))?;
        let energy = self
            .load_linear("energy")?
            .map(|f| EnergyModel::from_weights(&f.weights, f.rmse))
            .transpose()
            .map_err(ctx("energy"))?;
        let area = self
            .load_linear("area")?
            .map(|f| AreaModel::from_weights(&f.weights, f.rmse))
            .transpose()
            .map_err(ctx("area"))?;
        Ok(CostModels {
            latency,
            energy,
            area,
        })
    }

    pub fn save_costs(&self, costs: &CostModels) -> Result<()> {
        if let Some(m) = &costs.latency {
            self.save_latency(m)?;
        }
        if let Some(m) = &costs.energy {
            self.save_energy(m)?;
        }
        if let Some(m) = &costs.area {
            self.save_area(m)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn percentages_are_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.csv",
            "w_m,n_c,d_c,t,accuracy\n1,3,5,5;10;20,96.1\n2,3,6,5;10;20,0.9\n",
        );
        let t = load_samples(&p, &SpaceSpec::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!((t.rows[0].accuracy.unwrap() - 0.961).abs() < 1e-15);
        assert_eq!(t.rows[1].accuracy, Some(0.9));
        assert_eq!(t.rows[1].line, 3);
    }

    #[test]
    fn invalid_row_names_line_and_violation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.csv",
            "w_m,n_c,d_c,t,latency_ms\n1,3,5,5;10;20,1.0\n1,3,5,5;9;20,1.0\n",
        );
        let err = load_samples(&p, &SpaceSpec::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("9 < 10"), "{msg}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn bad_measurements_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SpaceSpec::default();
        for body in ["1,3,5,5;10;20,NaN", "1,3,5,5;10;20,-2", "1,3,5,5;10;20,abc"] {
            let p = write(
                dir.path(),
                "s.csv",
                &format!("w_m,n_c,d_c,t,energy_mj\n{body}\n"),
            );
            assert!(
                matches!(load_samples(&p, &spec), Err(Error::Data(_))),
                "{body}"
            );
        }
        let p = write(dir.path(), "s.csv", "w_m,n_c,t\n1,3,5;10;20\n");
        assert!(matches!(load_samples(&p, &spec), Err(Error::Data(_))));
        let p = write(
            dir.path(),
            "s.csv",
            "w_m,n_c,d_c,t,speed\n1,3,5,5;10;20,1\n",
        );
        assert!(matches!(load_samples(&p, &spec), Err(Error::Data(_))));
    }

    #[test]
    fn store_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::open(dir.path().join("m")).unwrap();
        let mut acc = AccuracyModel::new(1.0123456789, 17.25, -2.5).unwrap();
        acc.rmse = 1.0 / 3.0;
        acc.n_samples = 25;
        store.save_accuracy(&acc).unwrap();
        let costs = CostModels {
            latency: Some(
                LatencyModel::from_weights(&[0.1, 0.2, 0.3, 1e-3, 1e-7, 3e-10], 0.01).unwrap(),
            ),
            energy: Some(
                EnergyModel::from_weights(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.1], 0.5).unwrap(),
            ),
            area: Some(AreaModel::from_weights(&[0.3, 2.0], 0.0).unwrap()),
        };
        store.save_costs(&costs).unwrap();
        store.save_hw(&HwConfig::default()).unwrap();

        let snapshot = |name: &str| fs::read(store.dir().join(name)).unwrap();
        let before: Vec<_> = [
            "accuracy.json",
            "latency.json",
            "energy.json",
            "area.json",
            "hw.json",
        ]
        .iter()
        .map(|n| snapshot(n))
        .collect();

        let again = ModelStore::open_existing(store.dir()).unwrap();
        let acc2 = again.load_accuracy().unwrap().unwrap();
        let costs2 = again.load_costs().unwrap();
        assert_eq!(acc2, acc);
        assert_eq!(costs2, costs);
        again.save_accuracy(&acc2).unwrap();
        again.save_costs(&costs2).unwrap();
        again.save_hw(&again.load_hw().unwrap().unwrap()).unwrap();
        let after: Vec<_> = [
            "accuracy.json",
            "latency.json",
            "energy.json",
            "area.json",
            "hw.json",
        ]
        .iter()
        .map(|n| snapshot(n))
        .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.json", "{\"schema_version\": 2}\n");
        let err = ModelStore::open(dir.path()).unwrap_err();
        assert!(err.to_string().contains("schema_version 2"), "{err}");
        let empty = tempfile::tempdir().unwrap();
        assert!(ModelStore::open_existing(empty.path()).is_err());
    }
}
