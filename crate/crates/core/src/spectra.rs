//! Covariance and cross-spectral matrices, their eigendecomposition and the
//! associated principal-component series.
//!
//! Both the real covariance and the wavelet cross-spectral matrices carry a
//! `1/N` normalization (N = number of sites). The constant never affects
//! eigenvectors or explained-variance fractions; it is recorded on every
//! matrix so eigenvalues can be rescaled if another convention is preferred.

use ndarray::{s, Array2, ArrayView2};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FieldSeries;
use crate::linalg::{
    fix_phases, hermitian_defect, top_eigenpairs, Eigenpairs, HermitianOperator, KrylovOptions,
};
use crate::scalar::{Cplx, Real};
use crate::wavelet::{CwtPlan, MorletParams, Padding, ScaleSet, WaveletCoeffs};

/// Eigenvalues below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Relative asymmetry above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// `C = (1/N) X X^T`.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix<T: Real> {
    pub mat: Array2<T>,
    pub norm_constant: f64,
}

/// Which estimator produced a cross-spectral matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Morlet,
    Bartlett,
    Welch,
}

/// Hermitian `N x N` cross-spectral matrix of one frequency band.
#[derive(Clone, Debug)]
pub struct CrossSpectralMatrix<T: Real> {
    pub band_freq: f64,
    pub scale: Option<f64>,
    pub mat: Array2<Cplx<T>>,
    pub estimator: Estimator,
    pub effective_samples: usize,
    pub norm_constant: f64,
}

/// Leading eigenpairs of a covariance or cross-spectral matrix.
#[derive(Clone, Debug)]
pub struct EigenModes<T: Real> {
    /// Descending eigenvalues.
    pub eigenvalues: Vec<T>,
    /// Unit eigenvectors, one per column (`N x k`). Each is phase-fixed so its
    /// largest-modulus entry is real and positive.
    pub eigenvectors: Array2<Cplx<T>>,
    /// Trace of the decomposed matrix (total variance of the band).
    pub trace: T,
    pub band_freq: Option<f64>,
    pub norm_constant: f64,
    pub effective_samples: usize,
}

impl<T: Real> EigenModes<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> Result<Vec<Cplx<T>>> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(self.eigenvectors.column(i).to_vec())
    }

    /// Eigenvalue over trace for each retained mode.
    pub fn fractions(&self) -> Vec<T> {
        let tr = self.trace;
        self.eigenvalues
            .iter()
            .map(|&v| if tr > T::zero() { v / tr } else { T::zero() })
            .collect()
    }
}

/// A principal-component time series.
#[derive(Clone, Debug)]
pub struct PCSeries<T: Real> {
    pub values: Vec<Cplx<T>>,
    pub mode: usize,
    pub band_freq: Option<f64>,
}

impl<T: Real> PCSeries<T> {
    /// `||kappa||^2` over the samples `range`.
    pub fn energy(&self, range: std::ops::Range<usize>) -> T {
        self.values[range].iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Number of eigenvalues above `RANK_TOLERANCE` times the largest.
pub fn numerical_rank<T: Real>(values: &[T]) -> usize {
    let top = values.iter().cloned().fold(T::zero(), T::max);
    if top <= T::zero() {
        return 0;
    }
    values
        .iter()
        .filter(|&&v| v > T::lit(RANK_TOLERANCE) * top)
        .count()
}

/// `C = (1/N) X X^T` formed explicitly.
pub fn covariance_matrix<T: Real>(fs: &FieldSeries<T>) -> CovarianceMatrix<T> {
    let n = fs.n();
    let c = T::one() / T::count(n);
    let mut mat = fs.data.dot(&fs.data.t());
    mat.mapv_inplace(|v| v * c);
    // enforce exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = (mat[[i, j]] + mat[[j, i]]) / T::lit(2.0);
            mat[[i, j]] = v;
            mat[[j, i]] = v;
        }
    }
    CovarianceMatrix {
        mat,
        norm_constant: 1.0 / n as f64,
    }
}

/// `v -> c * A A^T v` for a real `N x L` data matrix, without forming `A A^T`.
struct RealGramOperator<'a, T: Real> {
    a: ArrayView2<'a, T>,
    c: T,
}

impl<T: Real> HermitianOperator<T> for RealGramOperator<'_, T> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        let l = self.a.ncols();
        let mut tmp = vec![Cplx::<T>::zero(); l];
        for (row, xi) in self.a.rows().into_iter().zip(x) {
            for (t, a) in tmp.iter_mut().zip(row) {
                *t += *xi * *a;
            }
        }
        for (row, yi) in self.a.rows().into_iter().zip(y.iter_mut()) {
            let mut acc = Cplx::<T>::zero();
            for (t, a) in tmp.iter().zip(row) {
                acc += *t * *a;
            }
            *yi = acc * self.c;
        }
    }
}

/// Classical PCA: top-`k` eigenpairs of `C = (1/N) X X^T` and the series
/// `kappa_i = X^T u_i`.
pub fn classical_pca<T: Real>(
    fs: &FieldSeries<T>,
    k: usize,
) -> Result<(EigenModes<T>, Vec<PCSeries<T>>)> {
    let (n, l) = fs.data.dim();
    if k == 0 || k > n.min(l) {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: n.min(l),
        });
    }
    let c = T::one() / T::count(n);
    let trace = fs.data.iter().map(|v| *v * *v).sum::<T>() * c;
    let op = RealGramOperator {
        a: fs.data.view(),
        c,
    };
    let mut pairs = top_eigenpairs(&op, k, &KrylovOptions::default())?;
    // real symmetric problem: eigenvectors are real up to a global phase
    fix_phases(&mut pairs.vectors);
    pairs.vectors.mapv_inplace(|z| Cplx::new(z.re, T::zero()));
    normalize_columns(&mut pairs.vectors);
    let series = (0..k)
        .map(|i| {
            let u = pairs.vectors.column(i);
            let values = (0..l)
                .map(|t| {
                    let v: T = (0..n).map(|s| fs.data[[s, t]] * u[s].re).sum();
                    Cplx::new(v, T::zero())
                })
                .collect();
            PCSeries {
                values,
                mode: i,
                band_freq: None,
            }
        })
        .collect();
    Ok((
        EigenModes {
            eigenvalues: pairs.values.iter().map(|v| v.max(T::zero())).collect(),
            eigenvectors: pairs.vectors,
            trace,
            band_freq: None,
            norm_constant: 1.0 / n as f64,
            effective_samples: l,
        },
        series,
    ))
}

fn normalize_columns<T: Real>(v: &mut Array2<Cplx<T>>) {
    for mut col in v.columns_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if nrm > T::zero() {
            col.mapv_inplace(|z| z / nrm);
        }
    }
}

/// Which samples enter a wavelet cross-spectral estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoiPolicy {
    /// Edge-free samples only when fewer than 50 scale lengths fit in the record.
    #[default]
    Auto,
    Always,
    Never,
}

impl CoiPolicy {
    pub fn from_flag(flag: Option<bool>) -> Self {
        match flag {
            None => CoiPolicy::Auto,
            Some(true) => CoiPolicy::Always,
            Some(false) => CoiPolicy::Never,
        }
    }

    /// Whether edge-free-only accumulation applies at `scale`.
    pub fn use_coi_only(&self, scale: f64, l: usize, dt: f64) -> bool {
        match self {
            CoiPolicy::Always => true,
            CoiPolicy::Never => false,
            CoiPolicy::Auto => (l as f64 * dt) / scale < 50.0,
        }
    }
}

/// Minimum number of samples a cross-spectral estimate may use.
pub const MIN_RETAINED_SAMPLES: usize = 8;

/// Range of time samples entering the estimate.
pub fn retained_range<T: Real>(
    coeffs: &WaveletCoeffs<T>,
    use_coi_only: bool,
) -> Result<std::ops::Range<usize>> {
    let range = if use_coi_only {
        coeffs.coi_range()
    } else {
        0..coeffs.coeffs.ncols()
    };
    if range.len() < MIN_RETAINED_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "only {} edge-free samples remain at scale {} (need {MIN_RETAINED_SAMPLES})",
            range.len(),
            coeffs.scale
        )));
    }
    Ok(range)
}

/// `S = (1/N) W W^H` over the retained samples, formed explicitly.
pub fn wavelet_cross_spectral_matrix<T: Real>(
    coeffs: &WaveletCoeffs<T>,
    use_coi_only: bool,
) -> Result<CrossSpectralMatrix<T>> {
    let range = retained_range(coeffs, use_coi_only)?;
    let w = coeffs.coeffs.slice(s![.., range.clone()]);
    let n = w.nrows();
    let c = T::one() / T::count(n);
    let mut mat = Array2::<Cplx<T>>::zeros((n, n));
    for i in 0..n {
        let wi = w.row(i);
        for j in 0..=i {
            let wj = w.row(j);
            let mut acc = Cplx::<T>::zero();
            for (a, b) in wi.iter().zip(wj.iter()) {
                acc += *a * b.conj();
            }
            acc *= c;
            if i == j {
                acc = Cplx::new(acc.re, T::zero());
            }
            mat[[i, j]] = acc;
            mat[[j, i]] = acc.conj();
        }
    }
    Ok(CrossSpectralMatrix {
        band_freq: coeffs.freq,
        scale: Some(coeffs.scale),
        mat,
        estimator: Estimator::Morlet,
        effective_samples: range.len(),
        norm_constant: 1.0 / n as f64,
    })
}

/// Top-`k` eigenpairs of an explicit cross-spectral matrix.
pub fn hermitian_eigen<T: Real>(s: &CrossSpectralMatrix<T>, k: usize) -> Result<EigenModes<T>> {
    let n = s.mat.nrows();
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let defect = hermitian_defect(&s.mat);
    if defect.as_f64() > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian(defect.as_f64()));
    }
    let trace = (0..n).map(|i| s.mat[[i, i]].re).sum();
    let mut pairs = top_eigenpairs(&s.mat, k, &KrylovOptions::default())?;
    fix_phases(&mut pairs.vectors);
    Ok(EigenModes {
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors,
        trace,
        band_freq: Some(s.band_freq),
        norm_constant: s.norm_constant,
        effective_samples: s.effective_samples,
    })
}

/// `v -> c W W^H v` for a complex `N x L` coefficient block.
pub struct CrossSpectralOperator<'a, T: Real> {
    w: ArrayView2<'a, Cplx<T>>,
    c: T,
}

impl<'a, T: Real> CrossSpectralOperator<'a, T> {
    pub fn new(w: ArrayView2<'a, Cplx<T>>, c: T) -> Self {
        Self { w, c }
    }
}

impl<T: Real> HermitianOperator<T> for CrossSpectralOperator<'_, T> {
    fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        let l = self.w.ncols();
        // tmp = W^H x
        let mut tre = vec![T::zero(); l];
        let mut tim = vec![T::zero(); l];
        for (row, xi) in self.w.rows().into_iter().zip(x) {
            let (xr, xim) = (xi.re, xi.im);
            for ((a, tr), ti) in row.iter().zip(tre.iter_mut()).zip(tim.iter_mut()) {
                // conj(a) * x
                *tr += a.re * xr + a.im * xim;
                *ti += a.re * xim - a.im * xr;
            }
        }
        for (row, yi) in self.w.rows().into_iter().zip(y.iter_mut()) {
            let (mut ar, mut ai) = (T::zero(), T::zero());
            for ((a, tr), ti) in row.iter().zip(&tre).zip(&tim) {
                ar += a.re * *tr - a.im * *ti;
                ai += a.re * *ti + a.im * *tr;
            }
            *yi = Cplx::new(ar, ai) * self.c;
        }
    }
}

/// `v -> c W^H W v`, the dual (time-by-time) Gram operator.
struct DualOperator<'a, T: Real> {
    w: ArrayView2<'a, Cplx<T>>,
    c: T,
}

impl<T: Real> HermitianOperator<T> for DualOperator<'_, T> {
    fn dim(&self) -> usize {
        self.w.ncols()
    }

    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        let n = self.w.nrows();
        let mut tmp = vec![Cplx::<T>::zero(); n];
        for (row, t) in self.w.rows().into_iter().zip(tmp.iter_mut()) {
            let mut acc = Cplx::<T>::zero();
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            *t = acc;
        }
        for v in y.iter_mut() {
            *v = Cplx::zero();
        }
        for (row, t) in self.w.rows().into_iter().zip(&tmp) {
            for (a, v) in row.iter().zip(y.iter_mut()) {
                *v += a.conj() * *t;
            }
        }
        for v in y.iter_mut() {
            *v *= self.c;
        }
    }
}

/// Top-`k` eigenpairs of `S = (1/N) W W^H` without forming `S`.
///
/// When the number of sites exceeds twice the number of retained samples,
/// the equivalent dual problem on `W^H W` is solved instead and its
/// eigenvectors are mapped back through `W`.
pub fn band_eigen<T: Real>(
    coeffs: &WaveletCoeffs<T>,
    k: usize,
    use_coi_only: bool,
) -> Result<EigenModes<T>> {
    let range = retained_range(coeffs, use_coi_only)?;
    let w = coeffs.coeffs.slice(s![.., range.clone()]);
    let (n, lr) = w.dim();
    if k == 0 || k > n.min(lr) {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: n.min(lr),
        });
    }
    let c = T::one() / T::count(n);
    let trace = w.iter().map(|z| z.norm_sqr()).sum::<T>() * c;
    let opts = KrylovOptions::default();
    let mut pairs = if n > 2 * lr {
        let dual = top_eigenpairs(&DualOperator { w, c }, k, &opts)?;
        lift_dual(w, &dual)
    } else {
        top_eigenpairs(&CrossSpectralOperator { w, c }, k, &opts)?
    };
    fix_phases(&mut pairs.vectors);
    Ok(EigenModes {
        eigenvalues: pairs.values.iter().map(|v| v.max(T::zero())).collect(),
        eigenvectors: pairs.vectors,
        trace,
        band_freq: Some(coeffs.freq),
        norm_constant: 1.0 / n as f64,
        effective_samples: lr,
    })
}

fn lift_dual<T: Real>(w: ArrayView2<'_, Cplx<T>>, dual: &Eigenpairs<T>) -> Eigenpairs<T> {
    let n = w.nrows();
    let k = dual.values.len();
    let mut vectors = Array2::<Cplx<T>>::zeros((n, k));
    for i in 0..k {
        let g = dual.vectors.column(i);
        for (r, row) in w.rows().into_iter().enumerate() {
            let mut acc = Cplx::<T>::zero();
            for (a, b) in row.iter().zip(g.iter()) {
                acc += *a * *b;
            }
            vectors[[r, i]] = acc;
        }
    }
    normalize_columns(&mut vectors);
    Eigenpairs {
        values: dual.values.clone(),
        vectors,
    }
}

/// Projection `kappa(t) = u^H w(t)` of the band coefficients on mode `i`.
///
/// With this convention `||kappa||^2 * norm_constant` equals the eigenvalue
/// on the samples used for estimation.
pub fn spectral_pc_series<T: Real>(
    coeffs: &WaveletCoeffs<T>,
    modes: &EigenModes<T>,
    i: usize,
) -> Result<PCSeries<T>> {
    let u = modes.vector(i)?;
    project(coeffs, &u).map(|values| PCSeries {
        values,
        mode: i,
        band_freq: Some(coeffs.freq),
    })
}

/// `u^H w(t)` for every sample.
pub fn project<T: Real>(coeffs: &WaveletCoeffs<T>, u: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
    let (n, l) = coeffs.coeffs.dim();
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            what: "eigenvector length".into(),
            expected: n,
            found: u.len(),
        });
    }
    let mut out = vec![Cplx::<T>::zero(); l];
    for (row, ui) in coeffs.coeffs.rows().into_iter().zip(u) {
        let uc = ui.conj();
        for (o, w) in out.iter_mut().zip(row) {
            *o += uc * *w;
        }
    }
    Ok(out)
}

/// Per-band eigen summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandSummary {
    pub freq: f64,
    pub scale: f64,
    pub eigenvalues: Vec<f64>,
    pub fractions: Vec<f64>,
    pub effective_samples: usize,
}

impl BandSummary {
    pub fn from_modes<T: Real>(modes: &EigenModes<T>, scale: f64) -> Self {
        Self {
            freq: modes.band_freq.unwrap_or(f64::NAN),
            scale,
            eigenvalues: modes.eigenvalues.iter().map(|v| v.as_f64()).collect(),
            fractions: modes.fractions().iter().map(|v| v.as_f64()).collect(),
            effective_samples: modes.effective_samples,
        }
    }
}

/// Settings shared by per-band spectral decompositions.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpectralSettings {
    pub params: MorletParams,
    pub padding: Padding,
    pub coi: CoiPolicy,
}

/// Runs `f` on the coefficients and top-`k` modes of every scale in turn,
/// holding only one scale's coefficients in memory at a time.
pub fn for_each_band<T: Real, F>(
    fs: &FieldSeries<T>,
    scales: &ScaleSet,
    k: usize,
    settings: &SpectralSettings,
    mut f: F,
) -> Result<()>
where
    F: FnMut(usize, &WaveletCoeffs<T>, EigenModes<T>) -> Result<()>,
{
    scales.validate(fs.dt, fs.l())?;
    let max = scales.scales.iter().cloned().fold(0.0, f64::max);
    let plan = CwtPlan::new(
        fs,
        settings.params,
        settings.padding,
        max,
        scales.voices_per_octave,
    )?;
    for (idx, &scale) in scales.scales.iter().enumerate() {
        let coeffs = plan.transform(scale)?;
        let coi_only = settings.coi.use_coi_only(scale, fs.l(), fs.dt);
        let modes = band_eigen(&coeffs, k, coi_only)?;
        log::debug!(
            "band f={:.5}: leading fractions {:?}",
            coeffs.freq,
            modes
                .fractions()
                .iter()
                .take(3)
                .map(|v| v.as_f64())
                .collect::<Vec<_>>()
        );
        f(idx, &coeffs, modes)?;
    }
    Ok(())
}

/// Explained-variance fractions of the leading `k` modes for every band.
pub fn explained_variance_spectrum<T: Real>(
    fs: &FieldSeries<T>,
    scales: &ScaleSet,
    k: usize,
    settings: &SpectralSettings,
) -> Result<Vec<BandSummary>> {
    let mut out = Vec::with_capacity(scales.len());
    for_each_band(fs, scales, k, settings, |idx, _, modes| {
        out.push(BandSummary::from_modes(&modes, scales.scales[idx]));
        Ok(())
    })?;
    Ok(out)
}
