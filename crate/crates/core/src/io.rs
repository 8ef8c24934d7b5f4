//! File formats: field-series payloads with JSON sidecars, mask files, and the
//! flat CSV/JSON/binary exports produced by the pipeline.
//!
//! A field series is stored as a payload (CSV with one row per site, or raw
//! little-endian `f64`, row-major) next to a sidecar with the same stem and a
//! `.json` extension:
//!
//! ```json
//! { "dims": [ny, nx], "mask": "all", "dt": 1.0, "t0": "", "n": 2601, "l": 5000, "units": "" }
//! ```
//!
//! `mask` is either `"all"` or a path (relative to the sidecar) to a CSV of
//! 0/1 flags with shape `dims`. The payload may hold either the `n` active
//! rows or one row for every grid cell, in which case masked rows are dropped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, SpatialGrid};
use crate::scalar::{Cplx, Real};
use crate::wavelet::{Padding, WaveletCoeffs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadFormat {
    Csv,
    RawF64,
}

impl PayloadFormat {
    /// `.csv` means CSV, anything else raw `f64`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => PayloadFormat::Csv,
            _ => PayloadFormat::RawF64,
        }
    }
}

impl std::str::FromStr for PayloadFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(PayloadFormat::Csv),
            "raw-f64" | "raw" | "f64" | "bin" => Ok(PayloadFormat::RawF64),
            other => Err(Error::invalid(format!("unknown payload format '{other}'"))),
        }
    }
}

/// Metadata stored next to every field-series payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: Vec<usize>,
    /// `"all"` or a mask CSV path relative to the sidecar.
    pub mask: String,
    pub dt: f64,
    #[serde(default)]
    pub t0: String,
    pub n: usize,
    pub l: usize,
    #[serde(default)]
    pub units: String,
    /// Optional grid spacing per axis (defaults to 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    /// Optional grid origin per axis (defaults to 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

/// The sidecar belonging to `payload`: same path with a `.json` extension.
pub fn sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Numeric CSV as rows of `f64`. Blank lines are skipped.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (line, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::format(path, format!("line {}: '{f}' is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// 0/1 mask CSV with shape `dims` (a 1-D grid may be written as a single row or column).
pub fn read_mask(path: &Path, dims: &[usize]) -> Result<Vec<bool>> {
    let rows = read_numeric_csv(path)?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let cells: usize = dims.iter().product();
    if flat.len() != cells {
        return Err(Error::DimensionMismatch {
            what: format!("mask cells in {}", path.display()),
            expected: cells,
            found: flat.len(),
        });
    }
    flat.iter()
        .map(|&v| match v {
            v if v == 0.0 => Ok(false),
            v if v == 1.0 => Ok(true),
            v => Err(Error::format(
                path,
                format!("mask entries must be 0 or 1, found {v}"),
            )),
        })
        .collect()
}

pub fn write_mask(path: &Path, grid: &SpatialGrid) -> Result<()> {
    let (ny, nx) = grid.shape2();
    let mut w = csv_writer(path)?;
    for i in 0..ny {
        let row: Vec<&str> = (0..nx)
            .map(|j| if grid.mask()[i * nx + j] { "1" } else { "0" })
            .collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_raw_f64(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(
            path,
            format!("{} bytes is not a whole number of f64 values", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Reads a payload and its sidecar into a [`FieldSeries`].
pub fn load_field_series<T: Real>(path: &Path, format: PayloadFormat) -> Result<FieldSeries<T>> {
    let side_path = sidecar_path(path);
    let side: Sidecar = read_json(&side_path)?;
    let cells: usize = side.dims.iter().product();
    let mask = if side.mask.eq_ignore_ascii_case("all") {
        vec![true; cells]
    } else {
        let base = side_path.parent().unwrap_or(Path::new("."));
        read_mask(&base.join(&side.mask), &side.dims)?
    };
    let mut grid = SpatialGrid::new(side.dims.clone(), mask)?;
    if side.spacing.is_some() || side.origin.is_some() {
        let nd = side.dims.len();
        grid = grid.with_geometry(
            side.spacing.clone().unwrap_or_else(|| vec![1.0; nd]),
            side.origin.clone().unwrap_or_else(|| vec![0.0; nd]),
        )?;
    }
    if side.n != grid.n_active() {
        return Err(Error::DimensionMismatch {
            what: "sidecar n vs active mask sites".into(),
            expected: grid.n_active(),
            found: side.n,
        });
    }

    let values: Vec<f64> = match format {
        PayloadFormat::RawF64 => read_raw_f64(path)?,
        PayloadFormat::Csv => {
            let rows = read_numeric_csv(path)?;
            for (r, row) in rows.iter().enumerate() {
                if row.len() != side.l {
                    return Err(Error::DimensionMismatch {
                        what: format!("values in payload row {r}"),
                        expected: side.l,
                        found: row.len(),
                    });
                }
            }
            rows.into_iter().flatten().collect()
        }
    };
    let rows = if values.len() == side.n * side.l {
        side.n
    } else if values.len() == cells * side.l {
        cells
    } else {
        return Err(Error::DimensionMismatch {
            what: "payload values (n * l or cells * l)".into(),
            expected: side.n * side.l,
            found: values.len(),
        });
    };

    let mut data = Array2::<T>::zeros((side.n, side.l));
    for row in 0..side.n {
        let src = if rows == side.n {
            row
        } else {
            grid.cell_of_row(row)
        };
        for t in 0..side.l {
            data[[row, t]] = T::lit(values[src * side.l + t]);
        }
    }
    let fs = FieldSeries::new(grid, data, side.dt)?;
    Ok(fs.with_metadata(side.t0, side.units))
}

/// Writes `fs` as a payload plus sidecar (and `<stem>_mask.csv` if any cell is masked).
pub fn save_field_series<T: Real>(
    fs: &FieldSeries<T>,
    path: &Path,
    format: PayloadFormat,
) -> Result<()> {
    let grid = &fs.grid;
    let mask = if grid.mask().iter().all(|&m| m) {
        "all".to_string()
    } else {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
        let name = format!("{stem}_mask.csv");
        write_mask(&path.with_file_name(&name), grid)?;
        name
    };
    let default_geometry =
        grid.spacing().iter().all(|&s| s == 1.0) && grid.origin().iter().all(|&o| o == 0.0);
    let side = Sidecar {
        dims: grid.dims().to_vec(),
        mask,
        dt: fs.dt,
        t0: fs.t0.clone(),
        n: fs.n(),
        l: fs.l(),
        units: fs.units.clone(),
        spacing: (!default_geometry).then(|| grid.spacing().to_vec()),
        origin: (!default_geometry).then(|| grid.origin().to_vec()),
    };

    match format {
        PayloadFormat::RawF64 => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            for v in fs.data.iter() {
                w.write_all(&v.as_f64().to_le_bytes())
                    .map_err(|e| Error::io(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        PayloadFormat::Csv => {
            let mut w = csv_writer(path)?;
            for row in fs.data.rows() {
                let rec: Vec<String> = row.iter().map(|v| format_f64(v.as_f64())).collect();
                w.write_record(&rec).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    write_json(&sidecar_path(path), &side)
}

/// Shortest representation that parses back to the same `f64`.
fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Eigenvector map: `site_row, coords..., modulus, phase` per active site.
pub fn write_eigenvector_csv<T: Real>(
    path: &Path,
    grid: &SpatialGrid,
    u: &[Cplx<T>],
) -> Result<()> {
    if u.len() != grid.n_active() {
        return Err(Error::DimensionMismatch {
            what: "eigenvector length vs grid sites".into(),
            expected: grid.n_active(),
            found: u.len(),
        });
    }
    let mut w = csv_writer(path)?;
    let mut header = vec!["site_row".to_string()];
    header.extend((0..grid.ndim()).map(|a| format!("y{a}")));
    header.extend(["modulus".to_string(), "phase".to_string()]);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (row, z) in u.iter().enumerate() {
        let mut rec = vec![row.to_string()];
        rec.extend(grid.coords(row).into_iter().map(format_f64));
        rec.push(format_f64(z.norm().as_f64()));
        rec.push(format_f64(z.arg().as_f64()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_eigenvector_csv`]; rows must appear in site order.
pub fn read_eigenvector_csv(path: &Path) -> Result<Vec<Cplx<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("missing column '{name}'")))
    };
    let (c_row, c_mod, c_phase) = (col("site_row")?, col("modulus")?, col("phase")?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let num = |c: usize| {
            record
                .get(c)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| Error::format(path, format!("bad value in row {}", out.len())))
        };
        if num(c_row)? as usize != out.len() {
            return Err(Error::format(
                path,
                format!("site rows out of order at row {}", out.len()),
            ));
        }
        out.push(Cplx::from_polar(num(c_mod)?, num(c_phase)?));
    }
    Ok(out)
}

/// Two-column `t, value` CSV.
pub fn write_series_csv(path: &Path, t0: f64, dt: f64, values: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "value"])
        .map_err(|e| csv_err(path, e))?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([format_f64(t0 + i as f64 * dt), format_f64(*v)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let v = record
            .get(1)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| Error::format(path, format!("bad value in row {}", out.len())))?;
        out.push(v);
    }
    Ok(out)
}

/// Generic table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        let rec: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar for exported wavelet coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSidecar {
    pub scale: f64,
    pub freq: f64,
    pub dt: f64,
    pub log_step: f64,
    pub n: usize,
    pub l: usize,
    pub padding: Padding,
    /// Element layout of the payload.
    pub dtype: String,
    /// Run lengths of the cone-of-influence flag, starting with a run of
    /// `false` (possibly of length zero) and alternating.
    pub coi_runs: Vec<usize>,
}

pub fn rle_encode(flags: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &f in flags {
        if f == current {
            len += 1;
        } else {
            runs.push(len);
            current = f;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_decode(runs: &[usize]) -> Vec<bool> {
    runs.iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i % 2 == 1, n))
        .collect()
}

/// Coefficients as interleaved little-endian `f64` (re, im), row-major `N x L`,
/// plus a `.json` sidecar.
pub fn write_coefficients<T: Real>(path: &Path, coeffs: &WaveletCoeffs<T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for z in coeffs.coeffs.iter() {
        w.write_all(&z.re.as_f64().to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.write_all(&z.im.as_f64().to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let (n, l) = coeffs.coeffs.dim();
    let side = CoeffSidecar {
        scale: coeffs.scale,
        freq: coeffs.freq,
        dt: coeffs.dt,
        log_step: coeffs.log_step,
        n,
        l,
        padding: coeffs.padding,
        dtype: "f64-pair-le".into(),
        coi_runs: rle_encode(&coeffs.coi),
    };
    write_json(&sidecar_path(path), &side)
}

pub fn read_coefficients<T: Real>(path: &Path) -> Result<WaveletCoeffs<T>> {
    let side: CoeffSidecar = read_json(&sidecar_path(path))?;
    let values = read_raw_f64(path)?;
    if values.len() != 2 * side.n * side.l {
        return Err(Error::DimensionMismatch {
            what: "coefficient payload values".into(),
            expected: 2 * side.n * side.l,
            found: values.len(),
        });
    }
    let coi = rle_decode(&side.coi_runs);
    if coi.len() != side.l {
        return Err(Error::DimensionMismatch {
            what: "cone-of-influence flags".into(),
            expected: side.l,
            found: coi.len(),
        });
    }
    let coeffs = Array2::from_shape_fn((side.n, side.l), |(i, t)| {
        let k = 2 * (i * side.l + t);
        Cplx::new(T::lit(values[k]), T::lit(values[k + 1]))
    });
    Ok(WaveletCoeffs {
        scale: side.scale,
        freq: side.freq,
        coeffs,
        coi,
        padding: side.padding,
        log_step: side.log_step,
        dt: side.dt,
    })
}
