//! Command implementations behind the `rspca` binary.
//!
//! Every command reads and writes plain files (CSV / JSON / raw `f64`) so the
//! steps can be scripted and their outputs plotted directly. The `cmd_*`
//! functions are public so experiments can drive the same code paths without
//! spawning a process.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use rspca_core::io::{self, PayloadFormat};
use rspca_core::periodogram::{cumulative_fractions, white_noise_series};
use rspca_core::reconstruct::{reconstruct_rotated, rotate_bands, BandDecomposition, BandRotation};
use rspca_core::rotation::verify_pair;
use rspca_core::spectra::{numerical_rank, project, BandSummary};
use rspca_core::wavelet::cwt_scale;
use rspca_core::{
    build_laplacian, classical_pca, estimate_propagation_speed, generate_two_wave_system,
    periodogram_cross_spectral_matrix, reconstruct_band, CoiPolicy, Cplx, Error, FieldSeries,
    MorletParams, Padding, PeriodogramConfig, PhaseCost, RotationOptions, ScaleSet, SpatialGrid,
    SpectralSettings, WaveConfig, Weighting, Window, DEFAULT_F0,
};

/// Failure of a command, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files (exit code 2).
    #[error("{0}")]
    Usage(String),
    /// The numerics failed on otherwise valid input (exit code 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_)
            | Error::NotHermitian(_)
            | Error::NotOrthonormal(_)
            | Error::NonPlanarPhase(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Debug, Parser)]
#[command(
    name = "rspca",
    version,
    about = "Rotated spectral PCA of gridded time series"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the two-wave synthetic system.
    Synth(SynthArgs),
    /// Wavelet cross-spectral PCA per frequency band.
    Spca(SpcaArgs),
    /// Rotate a pair of spectral modes towards plane-wave phase fields.
    Rotate(RotateArgs),
    /// Band-limited time series of a (possibly rotated) mode.
    Reconstruct(ReconstructArgs),
    /// Propagation speed from a mode's phase map.
    Speed(SpeedArgs),
    /// Classical (zero-lag covariance) PCA.
    Classical(ClassicalArgs),
    /// Periodogram rank experiment on white noise.
    Rankexp(RankexpArgs),
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Spca(a) => cmd_spca(&a).map(|_| ()),
        Command::Rotate(a) => cmd_rotate(&a).map(|_| ()),
        Command::Reconstruct(a) => cmd_reconstruct(&a).map(|_| ()),
        Command::Speed(a) => cmd_speed(&a).map(|_| ()),
        Command::Classical(a) => cmd_classical(&a).map(|_| ()),
        Command::Rankexp(a) => cmd_rankexp(&a).map(|_| ()),
    }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON file with generator settings (fields of the wave configuration).
    #[arg(long, conflicts_with = "setup")]
    pub config: Option<PathBuf>,
    /// Built-in preset: 1 (shares 6/4/90) or 2 (shares 5/5/90).
    #[arg(long)]
    pub setup: Option<u8>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Payload format of the written field.
    #[arg(long, default_value = "raw-f64")]
    pub format: PayloadFormat,
    /// Also write the a, b and noise fields as payloads.
    #[arg(long)]
    pub truth_fields: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Realized parameters of a synthetic run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthReport {
    pub config: WaveConfig,
    pub gamma1: f64,
    pub gamma2: f64,
    pub shares: (f64, f64, f64),
    pub field: PathBuf,
    pub waveforms: PathBuf,
}

fn payload_name(stem: &str, format: PayloadFormat) -> String {
    match format {
        PayloadFormat::Csv => format!("{stem}.csv"),
        PayloadFormat::RawF64 => format!("{stem}.f64"),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<SynthReport> {
    let mut cfg = match (&args.config, args.setup) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(usage(format!("config file {} not found", path.display())));
            }
            io::read_json::<WaveConfig>(path)?
        }
        (None, Some(1)) => WaveConfig::setup1(0),
        (None, Some(2)) => WaveConfig::setup2(0),
        (None, Some(other)) => {
            return Err(usage(format!("unknown setup {other}; expected 1 or 2")))
        }
        (None, None) => return Err(usage("either --config or --setup is required")),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    create_dir(&args.out)?;
    let sys = generate_two_wave_system::<f64>(&cfg)?;
    info!(
        "generated {}x{} sites, L = {}; gamma1 = {:.4}, gamma2 = {:.4}",
        cfg.grid_shape.0, cfg.grid_shape.1, cfg.l, sys.gamma1, sys.gamma2
    );

    let field = args.out.join(payload_name("field", args.format));
    io::save_field_series(&sys.series, &field, args.format)?;
    if args.truth_fields {
        for (stem, data) in [
            ("truth_a", &sys.a_field),
            ("truth_b", &sys.b_field),
            ("truth_noise", &sys.noise_field),
        ] {
            let fs = sys.series.with_data(data.clone())?;
            io::save_field_series(
                &fs,
                &args.out.join(payload_name(stem, args.format)),
                args.format,
            )?;
        }
    }
    let waveforms = args.out.join("truth_waveforms.csv");
    let rows: Vec<Vec<f64>> = (0..cfg.l)
        .map(|t| vec![t as f64, sys.a[t], sys.b[t]])
        .collect();
    io::write_table(&waveforms, &["t", "a", "b"], &rows)?;

    let report = SynthReport {
        config: cfg,
        gamma1: sys.gamma1,
        gamma2: sys.gamma2,
        shares: sys.shares,
        field,
        waveforms,
    };
    io::write_json(&args.out.join("truth.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- shared wavelet flags

/// Parses `true`/`false` (also `yes`/`no`, `1`/`0`).
fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn parse_padding(s: &str) -> std::result::Result<Padding, String> {
    match s.to_ascii_lowercase().as_str() {
        "edge" | "edge-replicate" => Ok(Padding::EdgeReplicate),
        "zero" => Ok(Padding::Zero),
        "mirror" => Ok(Padding::Mirror),
        "antisymmetric" => Ok(Padding::Antisymmetric),
        other => Err(format!("unknown padding '{other}'")),
    }
}

/// `none` or `mask:<eps>` (sites with `|u| < eps * max|u|` are ignored).
pub fn parse_weighting(s: &str) -> std::result::Result<Weighting, String> {
    let lower = s.to_ascii_lowercase();
    if lower == "none" {
        return Ok(Weighting::None);
    }
    if let Some(eps) = lower
        .strip_prefix("mask:")
        .or_else(|| lower.strip_prefix("mask="))
    {
        let eps: f64 = eps
            .parse()
            .map_err(|_| format!("bad mask threshold '{eps}'"))?;
        if !(0.0..1.0).contains(&eps) {
            return Err(format!("mask threshold {eps} outside [0, 1)"));
        }
        return Ok(Weighting::ModulusMask(eps));
    }
    if lower == "mask" {
        return Ok(Weighting::ModulusMask(0.1));
    }
    Err(format!(
        "unknown weighting '{s}'; use 'none' or 'mask:<eps>'"
    ))
}

#[derive(Debug, Clone, Args)]
pub struct WaveletArgs {
    /// Morlet central frequency.
    #[arg(long, default_value_t = DEFAULT_F0)]
    pub f0: f64,
    /// Scales per octave.
    #[arg(long, default_value_t = 8)]
    pub voices: usize,
    /// Lowest band centre frequency (default: 4 cycles over the record).
    #[arg(long)]
    pub fmin: Option<f64>,
    /// Highest band centre frequency (default: a quarter of the sampling rate).
    #[arg(long)]
    pub fmax: Option<f64>,
    /// Frequency the scale grid is anchored on (default: fmax).
    #[arg(long)]
    pub anchor: Option<f64>,
    /// Restrict each band's statistics to edge-free samples (default: only
    /// when the record is short relative to the scale).
    #[arg(long, value_parser = parse_bool)]
    pub coi_only: Option<bool>,
    /// Series extension at the record ends: edge, zero, mirror, antisymmetric.
    #[arg(long, default_value = "edge", value_parser = parse_padding)]
    pub padding: Padding,
}

impl WaveletArgs {
    pub fn settings(&self) -> CliResult<SpectralSettings> {
        let params = MorletParams::new(self.f0)?;
        Ok(SpectralSettings {
            params,
            padding: self.padding,
            coi: CoiPolicy::from_flag(self.coi_only),
        })
    }

    pub fn scales(&self, l: usize, dt: f64) -> CliResult<ScaleSet> {
        let fmax = self.fmax.unwrap_or((0.25_f64).min(self.f0 / 2.0) / dt);
        let fmin = self.fmin.unwrap_or(4.0 / (l as f64 * dt));
        if fmin > fmax {
            return Err(usage(format!("--fmin {fmin} exceeds --fmax {fmax}")));
        }
        let anchor = self.anchor.unwrap_or(fmax);
        let scales = ScaleSet::for_band(fmin, fmax, anchor, self.voices, self.f0)?;
        scales.validate(dt, l)?;
        Ok(scales)
    }
}

// ---------------------------------------------------------------- spca

#[derive(Debug, Clone, Args)]
pub struct SpcaArgs {
    /// Field payload (its `.json` sidecar must sit next to it).
    #[arg(long)]
    pub data: PathBuf,
    /// Payload format (default: from the file extension).
    #[arg(long)]
    pub format: Option<PayloadFormat>,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    /// Modes retained per band.
    #[arg(short, long, default_value_t = 4)]
    pub k: usize,
    /// Also export each band's wavelet coefficients.
    #[arg(long)]
    pub save_coeffs: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Index of an `spca` output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenManifest {
    pub data: PathBuf,
    pub format: PayloadFormat,
    pub f0: f64,
    pub voices: usize,
    pub padding: Padding,
    pub coi_only: Option<bool>,
    pub k: usize,
    pub bands: Vec<BandEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandEntry {
    pub index: usize,
    pub freq: f64,
    pub scale: f64,
    pub log_step: f64,
    pub summary: String,
    /// Eigenvector CSVs, one per retained mode (mode 1 first).
    pub modes: Vec<String>,
}

impl EigenManifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join("manifest.json");
        if !path.exists() {
            return Err(usage(format!(
                "{} has no manifest.json; run `spca` first",
                dir.display()
            )));
        }
        Ok(io::read_json(&path)?)
    }

    /// Band whose centre frequency is nearest `f`.
    pub fn nearest(&self, f: f64) -> CliResult<&BandEntry> {
        self.bands
            .iter()
            .min_by(|a, b| (a.freq - f).abs().total_cmp(&(b.freq - f).abs()))
            .ok_or_else(|| usage("manifest lists no bands"))
    }

    pub fn settings(&self) -> CliResult<SpectralSettings> {
        Ok(SpectralSettings {
            params: MorletParams::new(self.f0)?,
            padding: self.padding,
            coi: CoiPolicy::from_flag(self.coi_only),
        })
    }

    pub fn mode_vector(
        &self,
        dir: &Path,
        band: &BandEntry,
        mode: usize,
    ) -> CliResult<Vec<Cplx<f64>>> {
        if mode == 0 || mode > band.modes.len() {
            return Err(usage(format!(
                "mode {mode} not found; band {} has modes 1..={}",
                band.index,
                band.modes.len()
            )));
        }
        Ok(io::read_eigenvector_csv(&dir.join(&band.modes[mode - 1]))?)
    }

    pub fn load_data(&self) -> CliResult<FieldSeries<f64>> {
        Ok(io::load_field_series(&self.data, self.format)?)
    }
}

fn load_data(
    path: &Path,
    format: Option<PayloadFormat>,
) -> CliResult<(FieldSeries<f64>, PayloadFormat)> {
    if !path.exists() {
        return Err(usage(format!("data file {} not found", path.display())));
    }
    let format = format.unwrap_or_else(|| PayloadFormat::from_path(path));
    Ok((io::load_field_series(path, format)?, format))
}

/// Grid of a payload, read from its sidecar (and mask) only.
pub fn load_grid(path: &Path) -> CliResult<SpatialGrid> {
    let side_path = io::sidecar_path(path);
    let side: io::Sidecar = io::read_json(&side_path)?;
    let cells: usize = side.dims.iter().product();
    let mask = if side.mask.eq_ignore_ascii_case("all") {
        vec![true; cells]
    } else {
        io::read_mask(
            &side_path
                .parent()
                .unwrap_or(Path::new("."))
                .join(&side.mask),
            &side.dims,
        )?
    };
    Ok(SpatialGrid::new(side.dims, mask)?)
}

/// Result of `spca`: the manifest and each band's summary.
#[derive(Debug, Clone)]
pub struct SpcaOutput {
    pub manifest: EigenManifest,
    pub summaries: Vec<BandSummary>,
}

pub fn cmd_spca(args: &SpcaArgs) -> CliResult<SpcaOutput> {
    if args.k == 0 {
        return Err(usage("-k must be at least 1"));
    }
    let (fs, format) = load_data(&args.data, args.format)?;
    let scales = args.wavelet.scales(fs.l(), fs.dt)?;
    let settings = args.wavelet.settings()?;
    let k = args.k.min(fs.n());
    create_dir(&args.out)?;

    let mut bands = Vec::new();
    let mut summaries = Vec::new();
    let mut table = Vec::new();
    rspca_core::spectra::for_each_band(&fs, &scales, k, &settings, |idx, coeffs, modes| {
        let summary = BandSummary::from_modes(&modes, coeffs.scale);
        info!(
            "band {idx}: f = {:.5}, fractions {:?}",
            coeffs.freq,
            &summary.fractions[..summary.fractions.len().min(3)]
        );
        let summary_name = format!("band_{idx:03}_summary.json");
        io::write_json(&args.out.join(&summary_name), &summary)?;
        let mut mode_names = Vec::new();
        for i in 0..modes.len() {
            let name = format!("band_{idx:03}_mode_{}.csv", i + 1);
            io::write_eigenvector_csv(&args.out.join(&name), &fs.grid, &modes.vector(i)?)?;
            mode_names.push(name);
        }
        if args.save_coeffs {
            io::write_coefficients(&args.out.join(format!("band_{idx:03}_coeffs.bin")), coeffs)?;
        }
        let mut row = vec![coeffs.freq, coeffs.scale];
        row.extend(summary.fractions.iter().copied());
        table.push(row);
        bands.push(BandEntry {
            index: idx,
            freq: coeffs.freq,
            scale: coeffs.scale,
            log_step: coeffs.log_step,
            summary: summary_name,
            modes: mode_names,
        });
        summaries.push(summary);
        Ok(())
    })?;

    let mut header = vec!["freq".to_string(), "scale".to_string()];
    header.extend((1..=k).map(|i| format!("fraction_{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(
        &args.out.join("explained_variance.csv"),
        &header_refs,
        &table,
    )?;

    let data = fs::canonicalize(&args.data).unwrap_or_else(|_| args.data.clone());
    let manifest = EigenManifest {
        data,
        format,
        f0: args.wavelet.f0,
        voices: args.wavelet.voices,
        padding: args.wavelet.padding,
        coi_only: args.wavelet.coi_only,
        k,
        bands,
    };
    io::write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(SpcaOutput {
        manifest,
        summaries,
    })
}

// ---------------------------------------------------------------- rotate

#[derive(Debug, Clone, Args)]
pub struct RotateArgs {
    /// Output directory of `spca`.
    #[arg(long)]
    pub eigen: PathBuf,
    /// Frequency of the band to rotate (nearest band is used).
    #[arg(long)]
    pub freq: f64,
    /// The two modes to rotate (1-based).
    #[arg(long, num_args = 2, default_values_t = [1, 2])]
    pub modes: Vec<usize>,
    /// Also rotate every band in [fmin, fmax], labelling the rotated vectors
    /// consistently with the band at --freq.
    #[arg(long)]
    pub fmin: Option<f64>,
    #[arg(long)]
    pub fmax: Option<f64>,
    /// Site weighting of the phase criterion: none or mask:<eps>.
    #[arg(long, default_value = "none", value_parser = parse_weighting)]
    pub weighting: Weighting,
    /// Evaluate the criterion on the raw vectors instead of a 3x3 complex
    /// moving average.
    #[arg(long)]
    pub no_smoothing: bool,
    /// Re-check span and orthonormality of every rotated pair.
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Rotation report as written to `rotation.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationReport {
    pub band_index: usize,
    pub band_freq: f64,
    pub modes: (usize, usize),
    pub theta: f64,
    pub phi: f64,
    pub cost: f64,
    pub cost_partner: f64,
    pub local_minima: Vec<rspca_core::rotation::LocalMinimum>,
    pub swapped: bool,
    pub rotated: (String, String),
    /// Largest span/orthonormality violation, when `--verify` was given.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verify_max_violation: Option<f64>,
}

/// Index of a `rotate` output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationManifest {
    pub eigen: PathBuf,
    pub reference: usize,
    pub bands: Vec<RotationReport>,
}

impl RotationManifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join("rotations.json");
        if !path.exists() {
            return Err(usage(format!(
                "{} has no rotations.json; run `rotate` first",
                dir.display()
            )));
        }
        Ok(io::read_json(&path)?)
    }
}

fn decomposition_from_dir(
    manifest: &EigenManifest,
    dir: &Path,
    fs: &FieldSeries<f64>,
    entries: &[&BandEntry],
    modes: &[usize],
) -> CliResult<Vec<BandDecomposition<f64>>> {
    let settings = manifest.settings()?;
    entries
        .iter()
        .map(|band| {
            let vectors = modes
                .iter()
                .map(|&m| manifest.mode_vector(dir, band, m))
                .collect::<CliResult<Vec<_>>>()?;
            let coeffs = cwt_scale(
                fs,
                band.scale,
                settings.params,
                settings.padding,
                manifest.voices,
            )?;
            let pcs = vectors
                .iter()
                .map(|u| project(&coeffs, u))
                .collect::<rspca_core::Result<Vec<_>>>()?;
            let summary: BandSummary = io::read_json(&dir.join(&band.summary))?;
            let n = fs.n();
            let mut eigenvectors = ndarray::Array2::<Cplx<f64>>::zeros((n, vectors.len()));
            for (c, u) in vectors.iter().enumerate() {
                for (r, z) in u.iter().enumerate() {
                    eigenvectors[[r, c]] = *z;
                }
            }
            let eigenvalues = modes
                .iter()
                .map(|&m| summary.eigenvalues.get(m - 1).copied().unwrap_or(0.0))
                .collect();
            let trace = summary.eigenvalues.iter().sum::<f64>()
                / summary.fractions.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            Ok(BandDecomposition {
                scale: band.scale,
                freq: band.freq,
                log_step: band.log_step,
                modes: rspca_core::EigenModes {
                    eigenvalues,
                    eigenvectors,
                    trace,
                    band_freq: Some(band.freq),
                    norm_constant: 1.0,
                    effective_samples: summary.effective_samples,
                },
                pcs,
                coi: coeffs.coi.clone(),
            })
        })
        .collect()
}

pub fn cmd_rotate(args: &RotateArgs) -> CliResult<RotationManifest> {
    let (i, j) = match args.modes.as_slice() {
        [i, j] => (*i, *j),
        _ => return Err(usage("--modes takes exactly two mode numbers")),
    };
    if i == j {
        return Err(usage("--modes must name two different modes"));
    }
    if i == 0 || j == 0 {
        return Err(usage("mode numbers are 1-based"));
    }
    let manifest = EigenManifest::load(&args.eigen)?;
    let reference = manifest.nearest(args.freq)?.index;
    let (lo, hi) = match (args.fmin, args.fmax) {
        (None, None) => (args.freq, args.freq),
        (Some(lo), Some(hi)) if lo <= hi => (lo, hi),
        _ => {
            return Err(usage(
                "--fmin and --fmax must be given together with fmin <= fmax",
            ))
        }
    };
    let tol = 1e-9;
    let entries: Vec<&BandEntry> = manifest
        .bands
        .iter()
        .filter(|b| b.index == reference || (b.freq >= lo - tol && b.freq <= hi + tol))
        .collect();
    for b in &entries {
        for m in [i, j] {
            if m > b.modes.len() {
                return Err(usage(format!(
                    "mode {m} not found; band {} has {} modes",
                    b.index,
                    b.modes.len()
                )));
            }
        }
    }
    let ref_pos = entries
        .iter()
        .position(|b| b.index == reference)
        .expect("reference band listed");

    let grid = load_grid(&manifest.data)?;
    let fs = manifest.load_data()?;
    // modes are re-indexed 0, 1 inside the reduced decomposition
    let bands = decomposition_from_dir(&manifest, &args.eigen, &fs, &entries, &[i, j])?;
    let mut cost = PhaseCost::new(build_laplacian(&grid)?, args.weighting);
    if !args.no_smoothing {
        cost = cost.with_smoothing(&grid);
    }
    let rotations = rotate_bands(&bands, (0, 1), ref_pos, &cost, &RotationOptions::default())?;

    create_dir(&args.out)?;
    let mut reports = Vec::new();
    for (entry, (rot, band)) in entries.iter().zip(rotations.iter().zip(&bands)) {
        let names = (
            format!("band_{:03}_rotated_1.csv", entry.index),
            format!("band_{:03}_rotated_2.csv", entry.index),
        );
        io::write_eigenvector_csv(&args.out.join(&names.0), &grid, rot.vector(0))?;
        io::write_eigenvector_csv(&args.out.join(&names.1), &grid, rot.vector(1))?;
        let verify_max_violation = if args.verify {
            let worst = verify_pair(&band.modes.vector(0)?, &band.modes.vector(1)?, &rot.pair);
            if worst > rspca_core::rotation::ORTHONORMAL_TOLERANCE {
                return Err(CliError::Numerical(format!(
                    "band {}: rotated pair violates span/orthonormality by {worst:.3e}",
                    entry.index
                )));
            }
            Some(worst)
        } else {
            None
        };
        reports.push(report_for(entry, (i, j), rot, names, verify_max_violation));
    }
    let out = RotationManifest {
        eigen: fs::canonicalize(&args.eigen).unwrap_or_else(|_| args.eigen.clone()),
        reference,
        bands: reports,
    };
    io::write_json(&args.out.join("rotations.json"), &out)?;
    let main = out
        .bands
        .iter()
        .find(|r| r.band_index == reference)
        .expect("reference band reported");
    io::write_json(&args.out.join("rotation.json"), main)?;
    info!("band {reference}: {} local minima", main.local_minima.len());
    Ok(out)
}

fn report_for(
    entry: &BandEntry,
    modes: (usize, usize),
    rot: &BandRotation<f64>,
    rotated: (String, String),
    verify_max_violation: Option<f64>,
) -> RotationReport {
    RotationReport {
        band_index: entry.index,
        band_freq: entry.freq,
        modes,
        theta: rot.pair.params.theta,
        phi: rot.pair.params.phi,
        cost: rot.pair.cost1,
        cost_partner: rot.pair.cost2,
        local_minima: rot.pair.local_minima.clone(),
        swapped: rot.swapped,
        rotated,
        verify_max_violation,
    }
}

// ---------------------------------------------------------------- reconstruct

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    /// Output directory of `spca`.
    #[arg(long)]
    pub eigen: PathBuf,
    /// Output directory of `rotate`; when given, --mode refers to the rotated
    /// vectors (1 or 2).
    #[arg(long)]
    pub rotation: Option<PathBuf>,
    #[arg(long)]
    pub fmin: f64,
    #[arg(long)]
    pub fmax: f64,
    /// Mode rank (1-based).
    #[arg(long, default_value_t = 1)]
    pub mode: usize,
    /// Output CSV (t, value).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> CliResult<Vec<f64>> {
    if args.mode == 0 {
        return Err(usage("--mode is 1-based"));
    }
    if args.fmin > args.fmax {
        return Err(usage("--fmin exceeds --fmax"));
    }
    let manifest = EigenManifest::load(&args.eigen)?;
    let settings = manifest.settings()?;
    let fs = manifest.load_data()?;
    let tol = 1e-9;
    let in_band = |f: f64| f >= args.fmin - tol && f <= args.fmax + tol;

    let series = match &args.rotation {
        None => {
            let entries: Vec<&BandEntry> =
                manifest.bands.iter().filter(|b| in_band(b.freq)).collect();
            if entries.is_empty() {
                return Err(usage(format!(
                    "no band lies in [{}, {}]",
                    args.fmin, args.fmax
                )));
            }
            let per_band = entries
                .iter()
                .map(|b| {
                    let u = manifest.mode_vector(&args.eigen, b, args.mode)?;
                    let coeffs = cwt_scale(
                        &fs,
                        b.scale,
                        settings.params,
                        settings.padding,
                        manifest.voices,
                    )?;
                    let kappa = rspca_core::PCSeries {
                        values: project(&coeffs, &u)?,
                        mode: args.mode - 1,
                        band_freq: Some(b.freq),
                    };
                    Ok(rspca_core::reconstruct::BandPc {
                        scale: b.scale,
                        freq: b.freq,
                        log_step: b.log_step,
                        kappa,
                        u,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            reconstruct_band(&per_band, (args.fmin, args.fmax), &settings.params)?
        }
        Some(rot_dir) => {
            if args.mode > 2 {
                return Err(usage("rotated modes are numbered 1 and 2"));
            }
            let rot = RotationManifest::load(rot_dir)?;
            let reports: Vec<&RotationReport> =
                rot.bands.iter().filter(|r| in_band(r.band_freq)).collect();
            if reports.is_empty() {
                return Err(usage(format!(
                    "no rotated band lies in [{}, {}]",
                    args.fmin, args.fmax
                )));
            }
            let per_band = reports
                .iter()
                .map(|r| {
                    let entry = manifest
                        .bands
                        .iter()
                        .find(|b| b.index == r.band_index)
                        .ok_or_else(|| {
                            usage(format!(
                                "band {} missing from the spca manifest",
                                r.band_index
                            ))
                        })?;
                    let name = if args.mode == 1 {
                        &r.rotated.0
                    } else {
                        &r.rotated.1
                    };
                    let u = io::read_eigenvector_csv(&rot_dir.join(name))?;
                    let coeffs = cwt_scale(
                        &fs,
                        entry.scale,
                        settings.params,
                        settings.padding,
                        manifest.voices,
                    )?;
                    let kappa = rspca_core::PCSeries {
                        values: project(&coeffs, &u)?,
                        mode: args.mode - 1,
                        band_freq: Some(entry.freq),
                    };
                    Ok(rspca_core::reconstruct::BandPc {
                        scale: entry.scale,
                        freq: entry.freq,
                        log_step: entry.log_step,
                        kappa,
                        u,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            reconstruct_band(&per_band, (args.fmin, args.fmax), &settings.params)?
        }
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let t0 = fs.t0.parse::<f64>().unwrap_or(0.0);
    io::write_series_csv(&args.out, t0, fs.dt, &series)?;
    Ok(series)
}

/// Reconstruction of rotated mode `which` (0 or 1) straight from in-memory rotations.
pub fn reconstruct_from_rotations(
    rotations: &[BandRotation<f64>],
    which: usize,
    band: (f64, f64),
    params: &MorletParams,
) -> CliResult<Vec<f64>> {
    Ok(reconstruct_rotated(rotations, which, band, params)?)
}

// ---------------------------------------------------------------- speed

#[derive(Debug, Clone, Args)]
pub struct SpeedArgs {
    /// Output directory of `spca`.
    #[arg(long)]
    pub eigen: PathBuf,
    /// Output directory of `rotate`; when given, --mode selects rotated vector 1 or 2.
    #[arg(long)]
    pub rotation: Option<PathBuf>,
    #[arg(long)]
    pub freq: f64,
    #[arg(long, default_value_t = 1)]
    pub mode: usize,
    /// Output JSON.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_speed(args: &SpeedArgs) -> CliResult<rspca_core::SpeedEstimate> {
    if args.mode == 0 {
        return Err(usage("--mode is 1-based"));
    }
    let manifest = EigenManifest::load(&args.eigen)?;
    let band = manifest.nearest(args.freq)?;
    let grid = load_grid(&manifest.data)?;
    let u = match &args.rotation {
        None => manifest.mode_vector(&args.eigen, band, args.mode)?,
        Some(dir) => {
            if args.mode > 2 {
                return Err(usage("rotated modes are numbered 1 and 2"));
            }
            let rot = RotationManifest::load(dir)?;
            let report = rot
                .bands
                .iter()
                .find(|r| r.band_index == band.index)
                .ok_or_else(|| usage(format!("band {} was not rotated", band.index)))?;
            let name = if args.mode == 1 {
                &report.rotated.0
            } else {
                &report.rotated.1
            };
            io::read_eigenvector_csv(&dir.join(name))?
        }
    };
    let estimate = estimate_propagation_speed(&u, &grid, band.freq)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    io::write_json(&args.out, &estimate)?;
    Ok(estimate)
}

// ---------------------------------------------------------------- classical

#[derive(Debug, Clone, Args)]
pub struct ClassicalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub format: Option<PayloadFormat>,
    #[arg(short, long, default_value_t = 12)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub eigenvalues: Vec<f64>,
    pub fractions: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub trace: f64,
}

pub fn cmd_classical(args: &ClassicalArgs) -> CliResult<ClassicalReport> {
    if args.k == 0 {
        return Err(usage("-k must be at least 1"));
    }
    let (fs, _) = load_data(&args.data, args.format)?;
    let (modes, pcs) = classical_pca(&fs, args.k.min(fs.n()))?;
    let fractions = modes.fractions();
    let mut acc = 0.0;
    let cumulative: Vec<f64> = fractions
        .iter()
        .map(|f| {
            acc += f;
            acc
        })
        .collect();
    create_dir(&args.out)?;
    for i in 0..modes.len() {
        let u = modes.vector(i)?;
        io::write_eigenvector_csv(&args.out.join(format!("mode_{}.csv", i + 1)), &fs.grid, &u)?;
        let values: Vec<f64> = pcs[i].values.iter().map(|z| z.re).collect();
        io::write_series_csv(
            &args.out.join(format!("pc_{}.csv", i + 1)),
            0.0,
            fs.dt,
            &values,
        )?;
    }
    let report = ClassicalReport {
        eigenvalues: modes.eigenvalues.clone(),
        fractions: fractions.clone(),
        cumulative: cumulative.clone(),
        trace: modes.trace,
    };
    let rows: Vec<Vec<f64>> = (0..fractions.len())
        .map(|i| {
            vec![
                (i + 1) as f64,
                report.eigenvalues[i],
                fractions[i],
                cumulative[i],
            ]
        })
        .collect();
    io::write_table(
        &args.out.join("classical.csv"),
        &["rank", "eigenvalue", "fraction", "cumulative"],
        &rows,
    )?;
    io::write_json(&args.out.join("classical.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- rankexp

#[derive(Debug, Clone, Args)]
pub struct RankexpArgs {
    /// JSON experiment description; flags below are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 4096)]
    pub l: usize,
    /// Number of white-noise realizations (seeds 0..reps, offset by --seed).
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RankexpConfig {
    pub n: usize,
    pub l: usize,
    pub reps: usize,
    pub seed: u64,
    pub segments: Vec<usize>,
    pub freqs_per_band: Vec<usize>,
    pub windows: Vec<Window>,
    pub overlap: f64,
    pub band: (f64, f64),
}

impl Default for RankexpConfig {
    fn default() -> Self {
        Self {
            n: 50,
            l: 4096,
            reps: 5,
            seed: 0,
            segments: vec![1, 2, 4],
            freqs_per_band: vec![1, 2, 4],
            windows: vec![Window::Boxcar],
            overlap: 0.0,
            band: (0.2, 0.2),
        }
    }
}

/// One configuration's result across realizations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankexpCurve {
    pub segments: usize,
    pub freqs_per_band: usize,
    pub window: Window,
    /// Largest numerical rank seen over the realizations.
    pub max_rank: usize,
    /// `curves[rep][r-1]`: cumulative fraction at rank `r`.
    pub curves: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
}

pub fn cmd_rankexp(args: &RankexpArgs) -> CliResult<Vec<RankexpCurve>> {
    let cfg = match &args.config {
        Some(path) => {
            if !path.exists() {
                return Err(usage(format!("config file {} not found", path.display())));
            }
            io::read_json::<RankexpConfig>(path)?
        }
        None => RankexpConfig {
            n: args.n,
            l: args.l,
            reps: args.reps,
            seed: args.seed,
            ..RankexpConfig::default()
        },
    };
    let curves = rank_experiment(&cfg)?;
    create_dir(&args.out)?;
    let mut rows = Vec::new();
    for c in &curves {
        for (r, v) in c.mean_curve.iter().enumerate() {
            rows.push(vec![
                c.segments as f64,
                c.freqs_per_band as f64,
                (r + 1) as f64,
                *v,
            ]);
        }
    }
    io::write_table(
        &args.out.join("rankexp.csv"),
        &["segments", "freqs_per_band", "rank", "cumulative"],
        &rows,
    )?;
    io::write_json(&args.out.join("rankexp.json"), &curves)?;
    Ok(curves)
}

/// Cumulative-eigenvalue curves of periodogram estimates on white noise for
/// every `(segments, freqs_per_band, window)` combination of `cfg`.
pub fn rank_experiment(cfg: &RankexpConfig) -> CliResult<Vec<RankexpCurve>> {
    if cfg.n == 0 || cfg.reps == 0 {
        return Err(usage("rank experiment needs n >= 1 and reps >= 1"));
    }
    let noise = (0..cfg.reps)
        .map(|r| white_noise_series(cfg.n, cfg.l, cfg.seed + r as u64))
        .collect::<rspca_core::Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for &window in &cfg.windows {
        for &ls in &cfg.segments {
            for &lf in &cfg.freqs_per_band {
                let pcfg = PeriodogramConfig {
                    segments: ls,
                    overlap: cfg.overlap,
                    window,
                    freqs_per_band: lf,
                };
                let mut curves = Vec::new();
                let mut max_rank = 0;
                for fs in &noise {
                    let s = periodogram_cross_spectral_matrix(fs, &pcfg, cfg.band)?;
                    let modes = rspca_core::hermitian_eigen(&s, cfg.n)?;
                    max_rank = max_rank.max(numerical_rank(&modes.eigenvalues));
                    curves.push(cumulative_fractions(&s)?);
                }
                let mean_curve = (0..cfg.n)
                    .map(|r| curves.iter().map(|c| c[r]).sum::<f64>() / curves.len() as f64)
                    .collect();
                out.push(RankexpCurve {
                    segments: ls,
                    freqs_per_band: lf,
                    window,
                    max_rank,
                    curves,
                    mean_curve,
                });
            }
        }
    }
    Ok(out)
}
