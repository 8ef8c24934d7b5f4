//! File ingestion and round trips through the on-disk formats.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use tempfile::tempdir;

use rspca_core::io::{
    read_coefficients, read_eigenvector_csv, read_series_csv, rle_decode, rle_encode,
    write_coefficients, write_eigenvector_csv, write_json, write_series_csv, Sidecar,
};
use rspca_core::wavelet::cwt_scale;
use rspca_core::{
    load_field_series, save_field_series, Cplx, Error, FieldSeries, MorletParams, Padding,
    PayloadFormat, SpatialGrid,
};

fn sidecar(dims: Vec<usize>, mask: &str, n: usize, l: usize) -> Sidecar {
    Sidecar {
        dims,
        mask: mask.into(),
        dt: 1.0,
        t0: String::new(),
        n,
        l,
        units: String::new(),
        spacing: None,
        origin: None,
    }
}

fn write_csv(path: &Path, rows: &[&str]) {
    fs::write(path, rows.join("\n") + "\n").unwrap();
}

#[test]
fn three_by_four_csv_gives_three_sites_four_samples() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("field.csv");
    write_csv(&path, &["1,2,3,4", "5,6,7,8", "9,10,11,12"]);
    write_json(&path.with_extension("json"), &sidecar(vec![3], "all", 3, 4)).unwrap();
    let fs: FieldSeries<f64> = load_field_series(&path, PayloadFormat::Csv).unwrap();
    assert_eq!((fs.n(), fs.l()), (3, 4));
    assert_eq!(fs.data[[1, 2]], 7.0);
    assert_eq!(fs.data[[2, 3]], 12.0);
}

#[test]
fn one_masked_row_of_three_leaves_two_sites() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("field.csv");
    // payload lists every cell; the masked row is dropped on load
    write_csv(&path, &["1,2,3,4", "5,6,7,8", "9,10,11,12"]);
    write_csv(&dir.path().join("mask.csv"), &["1", "0", "1"]);
    write_json(
        &path.with_extension("json"),
        &sidecar(vec![3], "mask.csv", 2, 4),
    )
    .unwrap();
    let fs: FieldSeries<f64> = load_field_series(&path, PayloadFormat::Csv).unwrap();
    assert_eq!(fs.n(), 2);
    assert_eq!(fs.data.row(1).to_vec(), vec![9.0, 10.0, 11.0, 12.0]);

    // a payload holding only the active rows is accepted as well
    write_csv(&path, &["1,2,3,4", "9,10,11,12"]);
    let fs: FieldSeries<f64> = load_field_series(&path, PayloadFormat::Csv).unwrap();
    assert_eq!(fs.data.row(1).to_vec(), vec![9.0, 10.0, 11.0, 12.0]);
}

#[test]
fn short_payload_is_a_dimension_mismatch() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("field.f64");
    let bytes: Vec<u8> = (0..11).flat_map(|v| (v as f64).to_le_bytes()).collect();
    fs::write(&path, bytes).unwrap();
    write_json(&path.with_extension("json"), &sidecar(vec![3], "all", 3, 4)).unwrap();
    let err = load_field_series::<f64>(&path, PayloadFormat::RawF64).unwrap_err();
    assert!(
        matches!(err, Error::DimensionMismatch { found: 11, .. }),
        "{err}"
    );

    let csv = dir.path().join("ragged.csv");
    write_csv(&csv, &["1,2,3,4", "5,6,7", "9,10,11,12"]);
    write_json(&csv.with_extension("json"), &sidecar(vec![3], "all", 3, 4)).unwrap();
    assert!(matches!(
        load_field_series::<f64>(&csv, PayloadFormat::Csv),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn non_finite_values_are_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("field.csv");
    write_csv(&path, &["1,2,3,4", "5,NaN,7,8"]);
    write_json(&path.with_extension("json"), &sidecar(vec![2], "all", 2, 4)).unwrap();
    let err = load_field_series::<f64>(&path, PayloadFormat::Csv).unwrap_err();
    assert!(
        matches!(err, Error::NonFinite { site: 1, time: 1 }),
        "{err}"
    );
}

#[test]
fn sidecar_site_count_must_match_mask() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("field.csv");
    write_csv(&path, &["1,2", "3,4"]);
    write_json(&path.with_extension("json"), &sidecar(vec![2], "all", 3, 2)).unwrap();
    assert!(matches!(
        load_field_series::<f64>(&path, PayloadFormat::Csv),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn field_series_round_trips_in_both_formats() {
    let dir = tempdir().unwrap();
    let mut mask = vec![true; 12];
    mask[5] = false;
    let grid = SpatialGrid::new(vec![3, 4], mask).unwrap();
    let data = Array2::from_shape_fn((11, 7), |(i, t)| {
        (i as f64 + 0.1).powf(1.3) - t as f64 / 3.0
    });
    let fs = FieldSeries::new(grid, data, 0.5)
        .unwrap()
        .with_metadata("2001-01", "K");
    for (name, format) in [
        ("a.f64", PayloadFormat::RawF64),
        ("b.csv", PayloadFormat::Csv),
    ] {
        let path = dir.path().join(name);
        save_field_series(&fs, &path, format).unwrap();
        let back: FieldSeries<f64> = load_field_series(&path, format).unwrap();
        assert_eq!(back.data, fs.data);
        assert_eq!(back.grid.mask(), fs.grid.mask());
        assert_eq!(
            (back.dt, back.t0.as_str(), back.units.as_str()),
            (0.5, "2001-01", "K")
        );
    }
    assert!(dir.path().join("a_mask.csv").exists());
    let single: FieldSeries<f32> =
        load_field_series(&dir.path().join("a.f64"), PayloadFormat::RawF64).unwrap();
    assert_eq!(single.data[[3, 2]], fs.data[[3, 2]] as f32);
}

#[test]
fn eigenvector_and_series_csv_round_trip() {
    let dir = tempdir().unwrap();
    let grid = SpatialGrid::full(vec![2, 3]).unwrap();
    let u: Vec<Cplx<f64>> = (0..6)
        .map(|k| Cplx::from_polar(0.1 + k as f64 / 10.0, k as f64 - 2.5))
        .collect();
    let path = dir.path().join("mode.csv");
    write_eigenvector_csv(&path, &grid, &u).unwrap();
    let back = read_eigenvector_csv(&path).unwrap();
    for (a, b) in u.iter().zip(&back) {
        assert!((a - b).norm() < 1e-15);
    }
    assert!(write_eigenvector_csv(&path, &grid, &u[..5]).is_err());

    let values = vec![0.25, -1.0 / 3.0, 1e-300, 7.0];
    let path = dir.path().join("series.csv");
    write_series_csv(&path, 10.0, 0.5, &values).unwrap();
    assert_eq!(read_series_csv(&path).unwrap(), values);
}

#[test]
fn coefficients_round_trip_exactly() {
    let dir = tempdir().unwrap();
    let grid = SpatialGrid::full(vec![3]).unwrap();
    let data = Array2::from_shape_fn((3, 120), |(i, t)| ((t * (i + 2)) as f64 * 0.37).sin());
    let fs = FieldSeries::new(grid, data, 1.0).unwrap();
    let w = cwt_scale(&fs, 9.0, MorletParams::default(), Padding::Mirror, 8).unwrap();
    let path = dir.path().join("coeffs.bin");
    write_coefficients(&path, &w).unwrap();
    let back = read_coefficients::<f64>(&path).unwrap();
    assert_eq!(back.coeffs, w.coeffs);
    assert_eq!(back.coi, w.coi);
    assert_eq!(
        (back.scale, back.freq, back.padding),
        (w.scale, w.freq, w.padding)
    );
}

#[test]
fn run_length_codec_round_trips() {
    for flags in [
        vec![],
        vec![true],
        vec![false, false, true, true, true, false],
        vec![true, false, true, false],
    ] {
        let runs = rle_encode(&flags);
        assert_eq!(rle_decode(&runs), flags);
    }
    assert_eq!(rle_encode(&[true, true, false]), vec![0, 2, 1]);
}
