//! Band-limited reconstruction of mode time series and propagation-speed
//! estimation from eigenvector phase maps.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, SpatialGrid};
use crate::rotation::{optimize_rotation, PhaseCost, RotatedPair, RotationOptions, RotationParams};
use crate::scalar::{cdot, wrap_phase, Cplx, Real};
use crate::spectra::{for_each_band, project, EigenModes, PCSeries, SpectralSettings};
use crate::wavelet::{icwt_series, MorletParams, ScaleSet};

/// Index of the largest-modulus entry.
fn dominant_site<T: Real>(u: &[Cplx<T>]) -> Result<usize> {
    let (idx, max) = u
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bm), (i, z)| {
            if z.norm() > bm {
                (i, z.norm())
            } else {
                (bi, bm)
            }
        });
    if max <= T::zero() {
        return Err(Error::invalid("eigenvector is identically zero"));
    }
    Ok(idx)
}

/// Phase-references a PC series to the site where its eigenvector peaks.
///
/// Since `kappa = u^H w`, a global phase `e^{i psi}` on `u` shows up as
/// `e^{-i psi}` on `kappa`; multiplying by `e^{i arg u[j*]}` removes that
/// ambiguity and makes `kappa` track the signal at site `j*`.
pub fn align_pc_phase<T: Real>(kappa: &PCSeries<T>, u: &[Cplx<T>]) -> Result<PCSeries<T>> {
    let j = dominant_site(u)?;
    let rot = u[j] / u[j].norm();
    Ok(PCSeries {
        values: kappa.values.iter().map(|z| *z * rot).collect(),
        mode: kappa.mode,
        band_freq: kappa.band_freq,
    })
}

/// Leading modes of one band with their PC series, kept after the band's
/// coefficients are released.
#[derive(Clone, Debug)]
pub struct BandDecomposition<T: Real> {
    pub scale: f64,
    pub freq: f64,
    pub log_step: f64,
    pub modes: EigenModes<T>,
    /// `kappa_i = u_i^H w(t)` over the whole record, one per retained mode.
    pub pcs: Vec<Vec<Cplx<T>>>,
    pub coi: Vec<bool>,
}

impl<T: Real> BandDecomposition<T> {
    pub fn pc(&self, i: usize) -> Result<PCSeries<T>> {
        let values = self
            .pcs
            .get(i)
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.pcs.len(),
            })?
            .clone();
        Ok(PCSeries {
            values,
            mode: i,
            band_freq: Some(self.freq),
        })
    }
}

/// Decomposes every band of `scales`, keeping the top-`k` modes and PC series.
pub fn decompose_bands<T: Real>(
    fs: &FieldSeries<T>,
    scales: &ScaleSet,
    k: usize,
    settings: &SpectralSettings,
) -> Result<Vec<BandDecomposition<T>>> {
    let mut out = Vec::with_capacity(scales.len());
    for_each_band(fs, scales, k, settings, |_, coeffs, modes| {
        let pcs = (0..modes.len())
            .map(|i| project(coeffs, &modes.vector(i)?))
            .collect::<Result<Vec<_>>>()?;
        out.push(BandDecomposition {
            scale: coeffs.scale,
            freq: coeffs.freq,
            log_step: coeffs.log_step,
            modes,
            pcs,
            coi: coeffs.coi.clone(),
        });
        Ok(())
    })?;
    Ok(out)
}

/// One band's contribution to a reconstruction: the scale, the (unaligned)
/// PC series and the eigenvector it was projected on.
#[derive(Clone, Debug)]
pub struct BandPc<T: Real> {
    pub scale: f64,
    pub freq: f64,
    pub log_step: f64,
    pub kappa: PCSeries<T>,
    pub u: Vec<Cplx<T>>,
}

/// Inverse-wavelet synthesis of phase-aligned PC series of all bands with
/// central frequency in `[fmin, fmax]`.
pub fn reconstruct_band<T: Real>(
    per_band: &[BandPc<T>],
    band: (f64, f64),
    params: &MorletParams,
) -> Result<Vec<T>> {
    let (fmin, fmax) = band;
    let tol = 1e-9 * fmax.abs().max(1.0);
    let chosen: Vec<&BandPc<T>> = per_band
        .iter()
        .filter(|b| b.freq >= fmin - tol && b.freq <= fmax + tol)
        .collect();
    if chosen.is_empty() {
        return Err(Error::invalid(format!("no band lies in [{fmin}, {fmax}]")));
    }
    let log_step = chosen[0].log_step;
    let mut scales = Vec::with_capacity(chosen.len());
    let mut series = Vec::with_capacity(chosen.len());
    for b in chosen {
        scales.push(b.scale);
        series.push(align_pc_phase(&b.kappa, &b.u)?.values);
    }
    icwt_series(&scales, &series, log_step, params)
}

/// Reconstruction of mode `i` from decomposed bands.
pub fn reconstruct_mode<T: Real>(
    bands: &[BandDecomposition<T>],
    i: usize,
    band: (f64, f64),
    params: &MorletParams,
) -> Result<Vec<T>> {
    let per_band = bands
        .iter()
        .map(|b| {
            Ok(BandPc {
                scale: b.scale,
                freq: b.freq,
                log_step: b.log_step,
                kappa: b.pc(i)?,
                u: b.modes.vector(i)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    reconstruct_band(&per_band, band, params)
}

/// PC series of the rotated pair, obtained linearly from the unrotated ones:
/// `kappa_r1 = cos(theta) kappa_1 + sin(theta) e^{-i phi} kappa_2` and
/// `kappa_r2 = -sin(theta) e^{i phi} kappa_1 + cos(theta) kappa_2`.
pub fn rotate_pcs<T: Real>(
    k1: &[Cplx<T>],
    k2: &[Cplx<T>],
    p: RotationParams,
) -> (Vec<Cplx<T>>, Vec<Cplx<T>>) {
    let c = T::lit(p.theta.cos());
    let s = T::lit(p.theta.sin());
    let e_minus = Cplx::from_polar(s, -T::lit(p.phi));
    let e_plus = Cplx::from_polar(-s, T::lit(p.phi));
    let r1 = k1
        .iter()
        .zip(k2)
        .map(|(a, b)| *a * c + *b * e_minus)
        .collect();
    let r2 = k1
        .iter()
        .zip(k2)
        .map(|(a, b)| *a * e_plus + *b * c)
        .collect();
    (r1, r2)
}

/// Rotation of one band's mode pair, ordered consistently with the
/// reference band (see [`rotate_bands`]).
#[derive(Clone, Debug)]
pub struct BandRotation<T: Real> {
    pub scale: f64,
    pub freq: f64,
    pub log_step: f64,
    pub pair: RotatedPair<T>,
    /// `true` if `u_r1`/`u_r2` (and the PCs) were exchanged to match the
    /// neighbouring band.
    pub swapped: bool,
    /// Rotated PC series matching `pair.u_r1` and `pair.u_r2`.
    pub pcs: (Vec<Cplx<T>>, Vec<Cplx<T>>),
}

impl<T: Real> BandRotation<T> {
    /// Rotated vector `which` (0 or 1) after pairing.
    pub fn vector(&self, which: usize) -> &[Cplx<T>] {
        if which == 0 {
            &self.pair.u_r1
        } else {
            &self.pair.u_r2
        }
    }

    pub fn pc(&self, which: usize) -> &[Cplx<T>] {
        if which == 0 {
            &self.pcs.0
        } else {
            &self.pcs.1
        }
    }
}

/// Rotates modes `(i, j)` in every band and labels the rotated vectors
/// consistently across bands.
///
/// The reference band is optimized first; moving outward from it, each band's
/// `u_r1`/`u_r2` are swapped if that makes `u_r1` overlap more with the
/// neighbouring, already-labelled band's `u_r1`.
pub fn rotate_bands<T: Real>(
    bands: &[BandDecomposition<T>],
    modes: (usize, usize),
    reference: usize,
    cost: &PhaseCost,
    opts: &RotationOptions,
) -> Result<Vec<BandRotation<T>>> {
    let (i, j) = modes;
    if i == j {
        return Err(Error::invalid("rotation needs two distinct modes"));
    }
    if reference >= bands.len() {
        return Err(Error::IndexOutOfRange {
            index: reference,
            len: bands.len(),
        });
    }
    let rotate = |b: &BandDecomposition<T>| -> Result<BandRotation<T>> {
        let (u1, u2) = (b.modes.vector(i)?, b.modes.vector(j)?);
        let pair = optimize_rotation(&u1, &u2, cost, opts)?;
        let pcs = rotate_pcs(&b.pc(i)?.values, &b.pc(j)?.values, pair.params);
        Ok(BandRotation {
            scale: b.scale,
            freq: b.freq,
            log_step: b.log_step,
            pair,
            swapped: false,
            pcs,
        })
    };
    let align = |mut r: BandRotation<T>, prev: &BandRotation<T>| {
        let keep = cdot(&prev.pair.u_r1, &r.pair.u_r1).norm();
        let swap = cdot(&prev.pair.u_r1, &r.pair.u_r2).norm();
        if swap > keep {
            std::mem::swap(&mut r.pair.u_r1, &mut r.pair.u_r2);
            std::mem::swap(&mut r.pair.cost1, &mut r.pair.cost2);
            std::mem::swap(&mut r.pcs.0, &mut r.pcs.1);
            r.swapped = true;
        }
        r
    };

    let mut out: Vec<Option<BandRotation<T>>> = (0..bands.len()).map(|_| None).collect();
    out[reference] = Some(rotate(&bands[reference])?);
    for b in (reference + 1)..bands.len() {
        let r = rotate(&bands[b])?;
        out[b] = Some(align(
            r,
            out[b - 1].as_ref().expect("previous band rotated"),
        ));
    }
    for b in (0..reference).rev() {
        let r = rotate(&bands[b])?;
        out[b] = Some(align(r, out[b + 1].as_ref().expect("next band rotated")));
    }
    Ok(out
        .into_iter()
        .map(|r| r.expect("every band rotated"))
        .collect())
}

/// Band-limited reconstruction of rotated mode `which` (0 or 1).
pub fn reconstruct_rotated<T: Real>(
    rotations: &[BandRotation<T>],
    which: usize,
    band: (f64, f64),
    params: &MorletParams,
) -> Result<Vec<T>> {
    if which > 1 {
        return Err(Error::IndexOutOfRange {
            index: which,
            len: 2,
        });
    }
    let per_band: Vec<BandPc<T>> = rotations
        .iter()
        .map(|r| BandPc {
            scale: r.scale,
            freq: r.freq,
            log_step: r.log_step,
            kappa: PCSeries {
                values: r.pc(which).to_vec(),
                mode: which,
                band_freq: Some(r.freq),
            },
            u: r.vector(which).to_vec(),
        })
        .collect();
    reconstruct_band(&per_band, band, params)
}

/// Propagation estimate from an eigenvector's phase map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Grid units per time unit; infinite for a stationary pattern.
    pub speed: f64,
    /// Direction of propagation in degrees, counter-clockwise from the
    /// column axis (grid axes: 0 = rows, 1 = columns).
    pub direction_deg: f64,
    /// RMS (radians) of neighbour phase differences not explained by the
    /// local phase gradient.
    pub fit_rms: f64,
    /// Dominant spatial wavenumber, radians per grid unit.
    pub wavenumber: f64,
    pub stationary: bool,
}

/// Half-width (in cells) of the window used for local wavevectors.
pub const SPEED_WINDOW: usize = 2;

/// Modulus threshold (fraction of the maximum) for sites entering the estimate.
pub const SIGNIFICANCE: f64 = 0.05;

/// Phase-gradient magnitude below which a pattern counts as stationary.
const STATIONARY_WAVENUMBER: f64 = 1e-9;

/// Phase speed `2 pi f / |k|` of an eigenvector's phase pattern.
///
/// The wavenumber `|k|` is read off the peak of the zero-padded spatial power
/// spectrum of `u` over the modulus-significant sites. A second wave leaking
/// into the mode from another origin puts its power at its own wavevector
/// instead of shortening the local phase gradients, which is what biases
/// gradient averages and plane fits on mixed modes.
/// Direction and `fit_rms` come from windowed local phase gradients.
pub fn estimate_propagation_speed<T: Real>(
    u: &[Cplx<T>],
    grid: &SpatialGrid,
    f_k: f64,
) -> Result<SpeedEstimate> {
    if u.len() != grid.n_active() {
        return Err(Error::DimensionMismatch {
            what: "eigenvector length vs grid sites".into(),
            expected: grid.n_active(),
            found: u.len(),
        });
    }
    let max = u.iter().map(|z| z.norm().as_f64()).fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::invalid("eigenvector is identically zero"));
    }
    let significant: Vec<bool> = u
        .iter()
        .map(|z| z.norm().as_f64() >= SIGNIFICANCE * max)
        .collect();
    let phase: Vec<f64> = u.iter().map(|z| z.arg().as_f64()).collect();
    let spacing = grid.spacing().to_vec();
    let axis_step = |axis: usize| {
        if axis < spacing.len() {
            spacing[axis]
        } else {
            1.0
        }
    };

    // Local wavevector: argument of the lag-one complex autocorrelation summed
    // over a small window. Averaging the products suppresses noise and weights
    // neighbours by modulus.
    let radius = SPEED_WINDOW as isize;
    let mut grads: Vec<(usize, [f64; 2])> = Vec::new();
    for row in 0..u.len() {
        if !significant[row] {
            continue;
        }
        let (i, j) = grid.position(row);
        let mut acc = [Cplx::<f64>::new(0.0, 0.0); 2];
        let mut hits = [0usize; 2];
        for wi in -radius..=radius {
            for wj in -radius..=radius {
                let Some(p) = grid.row_at(i as isize + wi, j as isize + wj) else {
                    continue;
                };
                let zp = Cplx::new(u[p].re.as_f64(), u[p].im.as_f64());
                for (axis, (di, dj)) in [(1isize, 0isize), (0, 1)].into_iter().enumerate() {
                    if let Some(q) = grid.row_at(i as isize + wi + di, j as isize + wj + dj) {
                        let zq = Cplx::new(u[q].re.as_f64(), u[q].im.as_f64());
                        acc[axis] += zq * zp.conj();
                        hits[axis] += 1;
                    }
                }
            }
        }
        if hits.iter().all(|&h| h == 0) {
            continue;
        }
        let mut g = [0.0; 2];
        for axis in 0..2 {
            if hits[axis] > 0 && acc[axis].norm() > 0.0 {
                g[axis] = acc[axis].arg() / axis_step(axis);
            }
        }
        grads.push((row, g));
    }
    if grads.is_empty() {
        return Err(Error::InsufficientSamples(
            "no significant site has a significant neighbour".into(),
        ));
    }

    // residuals of neighbour differences against the local gradient
    let mut sq = 0.0;
    let mut count = 0usize;
    for (row, g) in &grads {
        let (i, j) = grid.position(*row);
        for (axis, (di, dj)) in [(1isize, 0isize), (0, 1)].into_iter().enumerate() {
            for sign in [1isize, -1] {
                let nb = grid.row_at(i as isize + sign * di, j as isize + sign * dj);
                if let Some(f) = nb.filter(|&r| significant[r]) {
                    let r = wrap_phase(
                        phase[f] - phase[*row] - sign as f64 * g[axis] * axis_step(axis),
                    );
                    sq += r * r;
                    count += 1;
                }
            }
        }
    }
    let fit_rms = if count > 0 {
        (sq / count as f64).sqrt()
    } else {
        0.0
    };
    if fit_rms > std::f64::consts::FRAC_PI_2 {
        return Err(Error::NonPlanarPhase(fit_rms));
    }

    let mut mags: Vec<f64> = grads.iter().map(|(_, g)| g[0].hypot(g[1])).collect();
    mags.sort_by(f64::total_cmp);
    let local_k = mags[mags.len() / 2];

    let mean = grads
        .iter()
        .fold([0.0, 0.0], |acc, (_, g)| [acc[0] + g[0], acc[1] + g[1]]);
    if local_k < STATIONARY_WAVENUMBER {
        return Ok(SpeedEstimate {
            speed: f64::INFINITY,
            direction_deg: 0.0,
            fit_rms,
            wavenumber: 0.0,
            stationary: true,
        });
    }
    let k = radial_peak_wavenumber(u, &significant, grid);
    // propagation runs against the phase gradient
    let direction_deg = (-mean[0]).atan2(-mean[1]).to_degrees();
    Ok(SpeedEstimate {
        speed: std::f64::consts::TAU * f_k / k,
        direction_deg,
        fit_rms,
        wavenumber: k,
        stationary: false,
    })
}

/// Magnitude of the peak wavevector in the zero-padded spatial power spectrum
/// of `u` (insignificant and inactive sites set to zero).
fn radial_peak_wavenumber<T: Real>(u: &[Cplx<T>], significant: &[bool], grid: &SpatialGrid) -> f64 {
    let (ny, nx) = grid.shape2();
    let spacing = grid.spacing();
    let (hy, hx) = match spacing.len() {
        0 => (1.0, 1.0),
        1 => (spacing[0], 1.0),
        _ => (spacing[0], spacing[1]),
    };
    let pad = |n: usize| {
        if n <= 1 {
            1
        } else {
            (8 * n).next_power_of_two().max(1024)
        }
    };
    let (py, px) = (pad(ny), pad(nx));

    let mut buf = vec![Cplx::<f64>::new(0.0, 0.0); py * px];
    for (row, z) in u.iter().enumerate() {
        if significant[row] {
            let (i, j) = grid.position(row);
            buf[i * px + j] = Cplx::new(z.re.as_f64(), z.im.as_f64());
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    if px > 1 {
        let fft = planner.plan_fft_forward(px);
        for line in buf.chunks_exact_mut(px) {
            fft.process(line);
        }
    }
    if py > 1 {
        let fft = planner.plan_fft_forward(py);
        let mut col = vec![Cplx::<f64>::new(0.0, 0.0); py];
        for j in 0..px {
            for i in 0..py {
                col[i] = buf[i * px + j];
            }
            fft.process(&mut col);
            for i in 0..py {
                buf[i * px + j] = col[i];
            }
        }
    }

    let freq = |idx: f64, n: usize, h: f64| {
        let m = if idx <= n as f64 / 2.0 {
            idx
        } else {
            idx - n as f64
        };
        std::f64::consts::TAU * m / (n as f64 * h)
    };
    let power = |i: usize, j: usize| buf[(i % py) * px + (j % px)].norm_sqr();
    let mut best = (0usize, 0usize);
    for i in 0..py {
        for j in 0..px {
            if power(i, j) > power(best.0, best.1) {
                best = (i, j);
            }
        }
    }
    // parabolic refinement along each axis
    let refine = |l: f64, c: f64, r: f64| {
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let (i, j) = best;
    let di = if py > 1 {
        refine(power(i + py - 1, j), power(i, j), power(i + 1, j))
    } else {
        0.0
    };
    let dj = if px > 1 {
        refine(power(i, j + px - 1), power(i, j), power(i, j + 1))
    } else {
        0.0
    };
    let ky = if py > 1 {
        freq((i as f64 + di).rem_euclid(py as f64), py, hy)
    } else {
        0.0
    };
    let kx = if px > 1 {
        freq((j as f64 + dj).rem_euclid(px as f64), px, hx)
    } else {
        0.0
    };
    ky.hypot(kx)
}
