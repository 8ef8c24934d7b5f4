//! Morlet continuous wavelet transform: analysis per scale, scale grids, edge
//! padding, cone of influence and approximate inverse synthesis.

use std::sync::Arc;

use ndarray::Array2;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FieldSeries;
use crate::scalar::{Cplx, Real};

/// Default Morlet central frequency, `sqrt(1 / (2 ln 2))`: the first side lobe
/// of the wavelet is then half the height of the main lobe.
pub const DEFAULT_F0: f64 = 0.849_321_800_288_019;

/// Optional admissibility correction of the Morlet wavelet.
///
/// The plain Morlet wavelet has a tiny but non-zero mean and first moment, so
/// constants and linear trends leak into the coefficients at the `1e-6` to
/// `1e-4` level. The corrections subtract Gaussian terms that cancel those
/// moments exactly while changing the wavelet by less than `e^{-(2 pi f0)^2 / 2}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorletCorrection {
    /// The textbook form `pi^{-1/4} e^{i 2 pi f0 t} e^{-t^2/2}`.
    None,
    /// Zero-mean wavelet (annihilates constants).
    ZeroMean,
    /// Zero mean and zero first moment (annihilates linear trends).
    #[default]
    TrendFree,
}

/// Morlet mother-wavelet parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorletParams {
    /// Central frequency in cycles per unit of wavelet time.
    pub f0: f64,
    #[serde(default)]
    pub correction: MorletCorrection,
}

impl Default for MorletParams {
    fn default() -> Self {
        Self {
            f0: DEFAULT_F0,
            correction: MorletCorrection::default(),
        }
    }
}

impl MorletParams {
    pub fn new(f0: f64) -> Result<Self> {
        let p = Self {
            f0,
            correction: MorletCorrection::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_correction(mut self, correction: MorletCorrection) -> Self {
        self.correction = correction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && std::f64::consts::TAU * self.f0 > 5.0) {
            return Err(Error::invalid(format!(
                "Morlet central frequency must satisfy 2*pi*f0 > 5, got f0 = {}",
                self.f0
            )));
        }
        Ok(())
    }

    fn omega0(&self) -> f64 {
        std::f64::consts::TAU * self.f0
    }

    /// Mother wavelet in the time domain, including the configured correction.
    pub fn wavelet<T: Real>(&self, t: T) -> Cplx<T> {
        let w0 = T::lit(self.omega0());
        let norm = T::PI().powf(T::lit(-0.25));
        let env = (-(t * t) / T::lit(2.0)).exp();
        let wave = Cplx::new(T::zero(), w0 * t).exp();
        let damp = (-(w0 * w0) / T::lit(2.0)).exp();
        let corr = match self.correction {
            MorletCorrection::None => Cplx::zero(),
            MorletCorrection::ZeroMean => Cplx::new(damp, T::zero()),
            MorletCorrection::TrendFree => Cplx::new(damp, damp * w0 * t),
        };
        (wave - corr) * (norm * env)
    }

    /// Fourier transform of the mother wavelet at angular frequency `omega`
    /// (real valued for every correction).
    pub fn fourier<T: Real>(&self, omega: T) -> T {
        let w0 = T::lit(self.omega0());
        let two = T::lit(2.0);
        let norm = T::PI().powf(T::lit(0.25)) * two.sqrt();
        let main = (-(omega - w0) * (omega - w0) / two).exp();
        let damp = (-(w0 * w0) / two).exp() * (-(omega * omega) / two).exp();
        let corr = match self.correction {
            MorletCorrection::None => T::zero(),
            MorletCorrection::ZeroMean => damp,
            MorletCorrection::TrendFree => damp * (T::one() + w0 * omega),
        };
        norm * (main - corr)
    }

    /// Frequency-domain response of the daughter wavelet at scale `scale` to
    /// frequency `f` (cycles per time unit), including the `sqrt(scale)` factor.
    pub fn daughter_response<T: Real>(&self, f: T, scale: T) -> T {
        scale.sqrt() * self.fourier(T::TAU() * scale * f)
    }
}

/// The textbook Morlet wavelet `pi^{-1/4} e^{i 2 pi f0 t} e^{-t^2/2}`.
pub fn morlet_mother<T: Real>(t: T, f0: f64) -> Cplx<T> {
    MorletParams {
        f0,
        correction: MorletCorrection::None,
    }
    .wavelet(t)
}

/// Fourier magnitude of the textbook Morlet daughter wavelet,
/// `sqrt(scale) pi^{1/4} sqrt(2) exp(-(2 pi scale f - 2 pi f0)^2 / 2)`.
pub fn morlet_fourier<T: Real>(f: T, scale: T, f0: f64) -> T {
    MorletParams {
        f0,
        correction: MorletCorrection::None,
    }
    .daughter_response(f, scale)
}

/// Geometric grid of wavelet scales (time units), `voices` per octave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSet {
    pub scales: Vec<f64>,
    pub voices_per_octave: usize,
    pub f0: f64,
}

impl ScaleSet {
    /// `count` scales starting at `smallest`, each `2^(1/voices)` times the previous.
    pub fn dyadic(smallest: f64, count: usize, voices: usize, f0: f64) -> Result<Self> {
        if voices == 0 || count == 0 || !(smallest > 0.0 && smallest.is_finite()) {
            return Err(Error::invalid(
                "scale grid needs positive start, count and voices",
            ));
        }
        let r = 2f64.powf(1.0 / voices as f64);
        let scales = (0..count).map(|k| smallest * r.powi(k as i32)).collect();
        Ok(Self {
            scales,
            voices_per_octave: voices,
            f0,
        })
    }

    /// All scales whose central frequency lies in `[fmin, fmax]`, on the grid
    /// anchored so that one scale has central frequency exactly `anchor`.
    pub fn for_band(fmin: f64, fmax: f64, anchor: f64, voices: usize, f0: f64) -> Result<Self> {
        if !(fmin > 0.0 && fmax >= fmin && anchor > 0.0) || voices == 0 {
            return Err(Error::invalid(format!(
                "invalid frequency band [{fmin}, {fmax}] with anchor {anchor}"
            )));
        }
        let v = voices as f64;
        let tol = 1e-9;
        // f_j = anchor * 2^{-j/v}
        let j_lo = (v * (anchor / fmax).log2() - tol).ceil() as i64;
        let j_hi = (v * (anchor / fmin).log2() + tol).floor() as i64;
        if j_hi < j_lo {
            return Err(Error::invalid(format!(
                "no scale of the grid anchored at {anchor} falls in [{fmin}, {fmax}]"
            )));
        }
        let scales = (j_lo..=j_hi)
            .map(|j| f0 / anchor * 2f64.powf(j as f64 / v))
            .collect();
        Ok(Self {
            scales,
            voices_per_octave: voices,
            f0,
        })
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Central frequency `f0 / scale` of each scale.
    pub fn frequencies(&self) -> Vec<f64> {
        self.scales.iter().map(|s| self.f0 / s).collect()
    }

    /// Spacing of the grid in natural-log scale.
    pub fn log_step(&self) -> f64 {
        std::f64::consts::LN_2 / self.voices_per_octave as f64
    }

    /// Index of the scale whose central frequency is closest to `f`.
    pub fn nearest(&self, f: f64) -> usize {
        let freqs = self.frequencies();
        let mut best = 0;
        for (i, fi) in freqs.iter().enumerate() {
            if (fi - f).abs() < (freqs[best] - f).abs() {
                best = i;
            }
        }
        best
    }

    /// Checks every scale is resolvable for a series of `l` samples at spacing `dt`.
    pub fn validate(&self, dt: f64, l: usize) -> Result<()> {
        for &s in &self.scales {
            validate_scale(s, self.f0, dt, l)?;
        }
        Ok(())
    }
}

fn validate_scale(scale: f64, f0: f64, dt: f64, l: usize) -> Result<()> {
    if !(scale.is_finite() && scale / dt >= 2.0) {
        return Err(Error::UnresolvableScale {
            scale,
            reason: format!("scale must span at least 2 samples (dt = {dt})"),
        });
    }
    if (l as f64) * dt < 2.0 * scale / f0 {
        return Err(Error::UnresolvableScale {
            scale,
            reason: format!("{l} samples cannot hold two oscillations"),
        });
    }
    Ok(())
}

/// How the series is extended beyond its ends before filtering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Padding {
    /// Repeat the first and last values.
    #[default]
    EdgeReplicate,
    Zero,
    /// Symmetric reflection about the end samples.
    Mirror,
    /// Point reflection about the end samples; continues linear trends exactly.
    Antisymmetric,
}

/// Value of the padded extension of `x` at (possibly out-of-range) index `k`.
pub fn extended_value<T: Real>(x: &[T], k: isize, padding: Padding) -> T {
    let l = x.len() as isize;
    if (0..l).contains(&k) {
        return x[k as usize];
    }
    match padding {
        Padding::Zero => T::zero(),
        Padding::EdgeReplicate => x[k.clamp(0, l - 1) as usize],
        Padding::Mirror => {
            if l == 1 {
                return x[0];
            }
            let period = 2 * (l - 1);
            let m = k.rem_euclid(period);
            x[if m < l { m } else { period - m } as usize]
        }
        Padding::Antisymmetric => {
            if l == 1 {
                return x[0];
            }
            if k < 0 {
                T::lit(2.0) * x[0] - extended_value(x, -k, padding)
            } else {
                T::lit(2.0) * x[(l - 1) as usize] - extended_value(x, 2 * (l - 1) - k, padding)
            }
        }
    }
}

/// Pads `x` with `left` samples before and enough after to reach `total` samples.
pub fn pad_series<T: Real>(x: &[T], left: usize, total: usize, padding: Padding) -> Vec<T> {
    (0..total)
        .map(|i| extended_value(x, i as isize - left as isize, padding))
        .collect()
}

/// `true` where a coefficient is free of edge effects: every sample farther
/// than `ceil(sqrt(2) * scale / dt)` from both ends of the series.
pub fn cone_of_influence(scale: f64, l: usize, dt: f64) -> Vec<bool> {
    let h = coi_horizon(scale, dt);
    (0..l).map(|t| t >= h && t + h < l).collect()
}

/// Number of edge samples excluded by the cone of influence at `scale`.
pub fn coi_horizon(scale: f64, dt: f64) -> usize {
    let h = std::f64::consts::SQRT_2 * scale / dt;
    // guard against representation error pushing an exact integer upwards
    let r = h.round();
    if (h - r).abs() < 1e-9 {
        r as usize
    } else {
        h.ceil() as usize
    }
}

/// Wavelet coefficients of every site at one scale.
#[derive(Clone, Debug)]
pub struct WaveletCoeffs<T: Real> {
    /// Scale in time units.
    pub scale: f64,
    /// Central frequency `f0 / scale`.
    pub freq: f64,
    /// `N x L` complex coefficients.
    pub coeffs: Array2<Cplx<T>>,
    /// `true` outside the cone of influence (edge-free samples).
    pub coi: Vec<bool>,
    pub padding: Padding,
    /// Natural-log spacing of the scale grid the coefficients came from.
    pub log_step: f64,
    pub dt: f64,
}

impl<T: Real> WaveletCoeffs<T> {
    /// Half-open range of edge-free samples (empty if the cone covers everything).
    pub fn coi_range(&self) -> std::ops::Range<usize> {
        let start = self.coi.iter().position(|&c| c).unwrap_or(self.coi.len());
        let end = self.coi.iter().rposition(|&c| c).map_or(start, |e| e + 1);
        start..end
    }
}

/// Forward spectra of every padded site series, reused across scales.
pub struct CwtPlan<T: Real> {
    params: MorletParams,
    padding: Padding,
    dt: f64,
    l: usize,
    left: usize,
    m: usize,
    spectra: Vec<Vec<Cplx<T>>>,
    inverse: Arc<dyn Fft<T>>,
    log_step: f64,
}

impl<T: Real> CwtPlan<T> {
    /// Prepares transforms for scales up to `max_scale` (time units).
    pub fn new(
        fs: &FieldSeries<T>,
        params: MorletParams,
        padding: Padding,
        max_scale: f64,
        voices: usize,
    ) -> Result<Self> {
        params.validate()?;
        if voices == 0 {
            return Err(Error::invalid("voices per octave must be positive"));
        }
        let l = fs.l();
        let dt = fs.dt;
        let pad = (8.0 * max_scale / dt).ceil() as usize + 1;
        let m = (l + 2 * pad).next_power_of_two();
        let left = (m - l) / 2;
        let mut planner = FftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut spectra = Vec::with_capacity(fs.n());
        for row in fs.data.rows() {
            let x: Vec<T> = row.to_vec();
            let mut buf: Vec<Cplx<T>> = pad_series(&x, left, m, padding)
                .into_iter()
                .map(|v| Cplx::new(v, T::zero()))
                .collect();
            forward.process(&mut buf);
            spectra.push(buf);
        }
        Ok(Self {
            params,
            padding,
            dt,
            l,
            left,
            m,
            spectra,
            inverse,
            log_step: std::f64::consts::LN_2 / voices as f64,
        })
    }

    /// Frequency (cycles per time unit) of FFT bin `k`.
    fn bin_freq(&self, k: usize) -> f64 {
        let kk = if k <= self.m / 2 {
            k as f64
        } else {
            k as f64 - self.m as f64
        };
        kk / (self.m as f64 * self.dt)
    }

    /// Coefficients of every site at `scale`.
    pub fn transform(&self, scale: f64) -> Result<WaveletCoeffs<T>> {
        validate_scale(scale, self.params.f0, self.dt, self.l)?;
        let inv_m = T::one() / T::count(self.m);
        let filter: Vec<T> = (0..self.m)
            .map(|k| {
                self.params
                    .daughter_response(T::lit(self.bin_freq(k)), T::lit(scale))
                    * inv_m
            })
            .collect();
        let n = self.spectra.len();
        let mut coeffs = Array2::<Cplx<T>>::zeros((n, self.l));
        let mut buf = vec![Cplx::<T>::zero(); self.m];
        let mut scratch = vec![Cplx::<T>::zero(); self.inverse.get_inplace_scratch_len()];
        for (site, spec) in self.spectra.iter().enumerate() {
            for ((b, s), h) in buf.iter_mut().zip(spec).zip(&filter) {
                *b = *s * *h;
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for (dst, src) in coeffs
                .row_mut(site)
                .iter_mut()
                .zip(&buf[self.left..self.left + self.l])
            {
                *dst = *src;
            }
        }
        Ok(WaveletCoeffs {
            scale,
            freq: self.params.f0 / scale,
            coeffs,
            coi: cone_of_influence(scale, self.l, self.dt),
            padding: self.padding,
            log_step: self.log_step,
            dt: self.dt,
        })
    }
}

/// Coefficients at one scale.
pub fn cwt_scale<T: Real>(
    fs: &FieldSeries<T>,
    scale: f64,
    params: MorletParams,
    padding: Padding,
    voices: usize,
) -> Result<WaveletCoeffs<T>> {
    CwtPlan::new(fs, params, padding, scale, voices)?.transform(scale)
}

/// Coefficients at every scale of `scales`.
///
/// Each element holds an `N x L` complex matrix; for large fields prefer
/// [`CwtPlan`] and process one scale at a time.
pub fn cwt<T: Real>(
    fs: &FieldSeries<T>,
    scales: &ScaleSet,
    params: MorletParams,
    padding: Padding,
) -> Result<Vec<WaveletCoeffs<T>>> {
    if (scales.f0 - params.f0).abs() > 1e-12 {
        return Err(Error::invalid(
            "scale set and wavelet use different central frequencies",
        ));
    }
    scales.validate(fs.dt, fs.l())?;
    let max = scales.scales.iter().cloned().fold(0.0, f64::max);
    let plan = CwtPlan::new(fs, params, padding, max, scales.voices_per_octave)?;
    scales.scales.iter().map(|&s| plan.transform(s)).collect()
}

/// Reconstruction constant for the discretized inverse transform.
///
/// Obtained by round-tripping a unit impulse through a scale grid wide
/// enough to cover every frequency of the impulse, evaluated directly in the
/// frequency domain.
pub fn reconstruction_constant(params: &MorletParams, log_step: f64) -> f64 {
    let m = 4096usize;
    // scales in samples, from well below the Nyquist scale up to the record length
    let smin = 0.05;
    let smax = m as f64;
    let count = ((smax / smin).ln() / log_step).ceil() as usize + 1;
    let mut total = 0.0;
    for k in 0..m {
        let kk = if k <= m / 2 {
            k as f64
        } else {
            k as f64 - m as f64
        };
        let f = kk / m as f64;
        let mut acc = 0.0;
        for j in 0..count {
            let s = smin * (j as f64 * log_step).exp();
            // Re(W) / sqrt(s) for an impulse: response / sqrt(s) = fourier(2 pi s f)
            acc += params.fourier::<f64>(std::f64::consts::TAU * s * f);
        }
        total += acc;
    }
    let impulse_peak = total * log_step / m as f64;
    1.0 / impulse_peak
}

/// Inverse transform of per-scale complex series sharing one scale grid:
/// `C * sum_k Re(w_k(t)) * dlog(scale) / sqrt(scale_k)`.
pub fn icwt_series<T: Real>(
    scales: &[f64],
    series: &[Vec<Cplx<T>>],
    log_step: f64,
    params: &MorletParams,
) -> Result<Vec<T>> {
    if series.is_empty() || scales.len() != series.len() {
        return Err(Error::invalid(
            "inverse transform needs one series per scale",
        ));
    }
    let l = series[0].len();
    if series.iter().any(|s| s.len() != l) {
        return Err(Error::DimensionMismatch {
            what: "series length across scales".into(),
            expected: l,
            found: series
                .iter()
                .map(|s| s.len())
                .find(|&x| x != l)
                .unwrap_or(l),
        });
    }
    let c = reconstruction_constant(params, log_step);
    let mut out = vec![T::zero(); l];
    for (s, w) in scales.iter().zip(series) {
        let f = T::lit(c * log_step / s.sqrt());
        for (o, z) in out.iter_mut().zip(w) {
            *o += z.re * f;
        }
    }
    Ok(out)
}

/// Inverse transform of full coefficient sets back to an `N x L` real field.
pub fn icwt<T: Real>(coeff_sets: &[WaveletCoeffs<T>], params: &MorletParams) -> Result<Array2<T>> {
    let first = coeff_sets
        .first()
        .ok_or_else(|| Error::invalid("inverse transform needs at least one scale"))?;
    let (n, l) = first.coeffs.dim();
    for c in coeff_sets {
        if c.coeffs.dim() != (n, l) {
            return Err(Error::DimensionMismatch {
                what: "coefficient matrices".into(),
                expected: n * l,
                found: c.coeffs.len(),
            });
        }
    }
    let c = reconstruction_constant(params, first.log_step);
    let mut out = Array2::<T>::zeros((n, l));
    for set in coeff_sets {
        let f = T::lit(c * set.log_step / set.scale.sqrt());
        ndarray::Zip::from(&mut out)
            .and(&set.coeffs)
            .for_each(|o, z| *o += z.re * f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;

    #[test]
    fn mother_at_origin() {
        let v = morlet_mother::<f64>(0.0, DEFAULT_F0);
        assert!((v.re - 0.751_125_544_5).abs() < 1e-9);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn fourier_peak_value_and_location() {
        let peak = morlet_fourier::<f64>(DEFAULT_F0, 1.0, DEFAULT_F0);
        let closed_form = std::f64::consts::PI.powf(0.25) * std::f64::consts::SQRT_2;
        assert!((peak - closed_form).abs() < 1e-12);
        assert!((peak - 1.882_792).abs() < 1e-6);
        let at_half = morlet_fourier::<f64>(DEFAULT_F0 / 2.0, 2.0, DEFAULT_F0);
        let off = morlet_fourier::<f64>(DEFAULT_F0 / 2.0 * 1.01, 2.0, DEFAULT_F0);
        assert!(at_half > off);
        assert!(morlet_fourier::<f64>(50.0, 1.0, DEFAULT_F0) < 1e-300);
    }

    #[test]
    fn corrected_wavelets_have_vanishing_moments() {
        let p = MorletParams::default();
        let v0: f64 = p.fourier(0.0);
        assert!(v0.abs() < 1e-15);
        let h = 1e-5;
        let d: f64 = (p.fourier(h) - p.fourier(-h)) / (2.0 * h);
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn coi_examples() {
        let m = cone_of_influence(10.0, 100, 1.0);
        assert_eq!(m.iter().filter(|&&b| !b).count(), 30);
        assert!(!m[14] && m[15] && m[84] && !m[85]);
        assert!(cone_of_influence(1000.0, 100, 1.0).iter().all(|&b| !b));
        let m = cone_of_influence(0.7, 100, 1.0);
        assert!(!m[0] && m[1] && m[98] && !m[99]);
    }

    #[test]
    fn band_scales_anchor_exactly() {
        let s = ScaleSet::for_band(0.026, 0.053, 0.04, 8, DEFAULT_F0).unwrap();
        let f = s.frequencies();
        assert!(f.iter().any(|x| (x - 0.04).abs() < 1e-12));
        assert!(f.iter().all(|x| *x >= 0.026 && *x <= 0.053));
        for w in s.scales.windows(2) {
            assert!((w[1] / w[0] - 2f64.powf(0.125)).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_modes_extend_as_expected() {
        let x = [1.0f64, 2.0, 4.0];
        assert_eq!(extended_value(&x, -1, Padding::EdgeReplicate), 1.0);
        assert_eq!(extended_value(&x, 4, Padding::Zero), 0.0);
        assert_eq!(extended_value(&x, -1, Padding::Mirror), 2.0);
        assert_eq!(extended_value(&x, 3, Padding::Mirror), 2.0);
        assert_eq!(extended_value(&x, -1, Padding::Antisymmetric), 0.0);
        assert_eq!(extended_value(&x, 3, Padding::Antisymmetric), 6.0);
        let ramp: Vec<f64> = (0..5).map(|i| i as f64).collect();
        for k in -20..25 {
            assert_eq!(extended_value(&ramp, k, Padding::Antisymmetric), k as f64);
        }
    }

    #[test]
    fn tone_round_trip_and_scale_selection() {
        let l = 2048;
        let dt = 1.0;
        let f = 0.04;
        let g = SpatialGrid::full(vec![1]).unwrap();
        let data = Array2::from_shape_fn((1, l), |(_, t)| {
            (std::f64::consts::TAU * f * t as f64).cos()
        });
        let fs = FieldSeries::new(g, data.clone(), dt).unwrap();
        let scales = ScaleSet::for_band(f / 4.0, f * 4.0, f, 8, DEFAULT_F0).unwrap();
        let params = MorletParams::default();
        let sets = cwt(&fs, &scales, params, Padding::Mirror).unwrap();
        let power: Vec<f64> = sets
            .iter()
            .map(|s| s.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .collect();
        let best = (0..power.len())
            .max_by(|&a, &b| power[a].total_cmp(&power[b]))
            .unwrap();
        assert_eq!(best, scales.nearest(f));
        let rec = icwt(&sets, &params).unwrap();
        let coi = cone_of_influence(*scales.scales.last().unwrap(), l, dt);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for t in (0..l).filter(|&t| coi[t]) {
            sxy += rec[[0, t]] * data[[0, t]];
            sxx += data[[0, t]] * data[[0, t]];
            syy += rec[[0, t]] * rec[[0, t]];
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr > 0.99, "corr {corr}");
        let gain = (syy / sxx).sqrt();
        assert!((gain - 1.0).abs() < 0.05, "gain {gain}");
    }
}
