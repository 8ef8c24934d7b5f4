//! Segment-averaged periodogram estimates of the cross-spectral matrix.
//!
//! The field is cut into `L_s` (possibly overlapping) segments, each segment is
//! tapered and Fourier transformed at the `L_f` frequencies nearest the band
//! centre, and the outer products of the resulting site vectors are averaged.
//! Such an estimate has rank at most `L_s * L_f`, which makes it a useful
//! baseline for how much structure a noisy estimate can fake.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FieldSeries;
use crate::scalar::{Cplx, Real};
use crate::spectra::{CrossSpectralMatrix, Estimator};

/// Taper / smoother applied by [`periodogram_cross_spectral_matrix`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Rectangular taper, uniform weights across the band's bins.
    #[default]
    Boxcar,
    /// Rectangular taper; bins combined with the modified Daniell kernel
    /// (half weight on the two outermost bins when `L_f >= 3`).
    Daniell,
    /// Hann taper on every segment, uniform bin weights.
    Hann,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boxcar" => Ok(Window::Boxcar),
            "daniell" | "daniel" => Ok(Window::Daniell),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::invalid(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodogramConfig {
    /// Number of segments `L_s`.
    pub segments: usize,
    /// Fractional overlap between consecutive segments, in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
    /// Number of Fourier frequencies `L_f` combined per band.
    pub freqs_per_band: usize,
}

impl Default for PeriodogramConfig {
    fn default() -> Self {
        Self {
            segments: 1,
            overlap: 0.0,
            window: Window::Boxcar,
            freqs_per_band: 1,
        }
    }
}

impl PeriodogramConfig {
    pub fn new(segments: usize, freqs_per_band: usize) -> Self {
        Self {
            segments,
            freqs_per_band,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::invalid("at least one segment is required"));
        }
        if self.freqs_per_band == 0 {
            return Err(Error::invalid(
                "at least one frequency per band is required",
            ));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::invalid(format!(
                "overlap {} outside [0, 1)",
                self.overlap
            )));
        }
        Ok(())
    }

    /// `(segment length, step)` for a series of `l` samples. Trailing samples
    /// that do not fill a segment are dropped.
    pub fn segment_layout(&self, l: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let stride = 1.0 - self.overlap;
        let len = (l as f64 / (1.0 + (self.segments - 1) as f64 * stride)).floor() as usize;
        let step = ((len as f64 * stride).floor() as usize).max(1);
        if len < 2 * self.freqs_per_band {
            return Err(Error::InsufficientSamples(format!(
                "segment length {len} is shorter than twice the {} frequencies per band",
                self.freqs_per_band
            )));
        }
        debug_assert!(len + (self.segments - 1) * step <= l);
        Ok((len, step))
    }

    pub fn estimator(&self) -> Estimator {
        if self.overlap == 0.0 {
            Estimator::Bartlett
        } else {
            Estimator::Welch
        }
    }
}

fn taper(window: Window, len: usize) -> Vec<f64> {
    match window {
        Window::Boxcar | Window::Daniell => vec![1.0; len],
        Window::Hann => (0..len)
            .map(|t| {
                let x = std::f64::consts::PI * (t as f64 + 0.5) / len as f64;
                x.sin().powi(2)
            })
            .collect(),
    }
}

fn bin_weights(window: Window, n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    if window == Window::Daniell && n >= 3 {
        w[0] = 0.5;
        w[n - 1] = 0.5;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// The `count` Fourier bins (indices into a length-`len` transform) nearest
/// `centre`, restricted to `0..=len/2`.
fn nearest_bins(centre: f64, len: usize, dt: f64, count: usize) -> Vec<usize> {
    let df = 1.0 / (len as f64 * dt);
    let mut bins: Vec<usize> = (0..=len / 2).collect();
    bins.sort_by(|&a, &b| {
        let da = (a as f64 * df - centre).abs();
        let db = (b as f64 * df - centre).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    bins.truncate(count);
    bins.sort_unstable();
    bins
}

/// Fourier frequencies (cycles per time unit) used for `band` under `cfg`.
pub fn band_bins(l: usize, dt: f64, cfg: &PeriodogramConfig, band: (f64, f64)) -> Result<Vec<f64>> {
    let (len, _) = cfg.segment_layout(l)?;
    check_band(band, dt)?;
    let centre = 0.5 * (band.0 + band.1);
    Ok(nearest_bins(centre, len, dt, cfg.freqs_per_band)
        .into_iter()
        .map(|m| m as f64 / (len as f64 * dt))
        .collect())
}

fn check_band(band: (f64, f64), dt: f64) -> Result<()> {
    let nyquist = 0.5 / dt;
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        return Err(Error::invalid(format!("invalid band [{lo}, {hi}]")));
    }
    if hi > nyquist {
        return Err(Error::invalid(format!(
            "band [{lo}, {hi}] extends past the Nyquist frequency {nyquist}"
        )));
    }
    Ok(())
}

/// `S = sum_j sum_l w_l xhat_j(f_l) xhat_j(f_l)^H / L_s` with `sum_l w_l = 1`.
///
/// `xhat_j(f)` is the tapered, mean-removed DFT of segment `j`, scaled by
/// `1 / sqrt(sum h_t^2)` so that the diagonal estimates power per frequency
/// bin regardless of taper.
pub fn periodogram_cross_spectral_matrix<T: Real>(
    fs: &FieldSeries<T>,
    cfg: &PeriodogramConfig,
    band: (f64, f64),
) -> Result<CrossSpectralMatrix<T>> {
    check_band(band, fs.dt)?;
    let (len, step) = cfg.segment_layout(fs.l())?;
    let centre = 0.5 * (band.0 + band.1);
    let bins = nearest_bins(centre, len, fs.dt, cfg.freqs_per_band);
    let weights = bin_weights(cfg.window, bins.len());
    let h = taper(cfg.window, len);
    let h_norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();

    // twiddles[l][t] = h_t e^{-2 pi i m_l t / len} / |h|
    let twiddles: Vec<Vec<Cplx<f64>>> = bins
        .iter()
        .map(|&m| {
            (0..len)
                .map(|t| {
                    let angle = -std::f64::consts::TAU * ((m * t) % len) as f64 / len as f64;
                    Cplx::from_polar(h[t] / h_norm, angle)
                })
                .collect()
        })
        .collect();

    let n = fs.n();
    let n_vectors = cfg.segments * bins.len();
    // each column is one sqrt(w_l / L_s)-scaled site vector
    let mut x = Array2::<Cplx<f64>>::zeros((n, n_vectors));
    for site in 0..n {
        let row = fs.data.row(site);
        for seg in 0..cfg.segments {
            let start = seg * step;
            let slice: Vec<f64> = (start..start + len).map(|t| row[t].as_f64()).collect();
            let mean = slice.iter().sum::<f64>() / len as f64;
            for (l, tw) in twiddles.iter().enumerate() {
                let acc = slice
                    .iter()
                    .zip(tw)
                    .fold(Cplx::new(0.0, 0.0), |acc, (v, w)| acc + w * (v - mean));
                let scale = (weights[l] / cfg.segments as f64).sqrt();
                x[[site, seg * bins.len() + l]] = acc * scale;
            }
        }
    }

    let mut mat = Array2::<Cplx<T>>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut acc = Cplx::new(0.0, 0.0);
            for c in 0..n_vectors {
                acc += x[[i, c]] * x[[j, c]].conj();
            }
            mat[[i, j]] = Cplx::new(T::lit(acc.re), T::lit(acc.im));
            mat[[j, i]] = Cplx::new(T::lit(acc.re), T::lit(-acc.im));
        }
        mat[[i, i]].im = T::zero();
    }

    Ok(CrossSpectralMatrix {
        band_freq: centre,
        scale: None,
        mat,
        estimator: cfg.estimator(),
        effective_samples: n_vectors,
        norm_constant: 1.0 / cfg.segments as f64,
    })
}

/// `n` independent unit-variance Gaussian series of length `l` on a 1-D grid.
pub fn white_noise_series(n: usize, l: usize, seed: u64) -> Result<FieldSeries<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_fn((n, l), |_| StandardNormal.sample(&mut rng));
    FieldSeries::new(crate::grid::SpatialGrid::full(vec![n])?, data, 1.0)
}

/// Cumulative explained-variance curve `sum_{i<=r} lambda_i / trace` for
/// `r = 1..=N`, from the full eigendecomposition of `s`.
pub fn cumulative_fractions<T: Real>(s: &CrossSpectralMatrix<T>) -> Result<Vec<f64>> {
    let n = s.mat.nrows();
    let modes = crate::spectra::hermitian_eigen(s, n)?;
    let trace = modes.trace.as_f64();
    let mut acc = 0.0;
    Ok(modes
        .eigenvalues
        .iter()
        .map(|v| {
            acc += v.as_f64().max(0.0);
            if trace > 0.0 {
                acc / trace
            } else {
                0.0
            }
        })
        .collect())
}
