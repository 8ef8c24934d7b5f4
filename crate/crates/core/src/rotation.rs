//! Rotation of a pair of complex eigenvectors within their span so that the
//! spatial phase of the rotated vector is as regular as possible.
//!
//! The rotated vector is `u(theta, phi) = cos(theta) u1 + sin(theta) e^{i phi} u2`
//! and the criterion is the summed absolute discrete Laplacian of its locally
//! unwrapped phase, which vanishes for plane-wave phase fields.

use ndarray::Array2;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LaplacianStencil, SpatialGrid};
use crate::scalar::{cdot, cnorm, wrap_phase, wrap_positive, Cplx, Real};

/// Angles of a rotation within a two-vector span. The third Euler angle is
/// gauge-fixed to zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    /// In `[0, pi/2]`.
    pub theta: f64,
    /// In `[0, 2 pi)`.
    pub phi: f64,
}

impl RotationParams {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: theta.clamp(0.0, std::f64::consts::FRAC_PI_2),
            phi: wrap_positive(phi),
        }
    }

    /// Angle between the rays `u(self)` and `u(other)` in the span
    /// (Fubini-Study distance); zero iff they differ by a global phase.
    pub fn distance(&self, other: &RotationParams) -> f64 {
        let (ca, sa) = (self.theta.cos(), self.theta.sin());
        let (cb, sb) = (other.theta.cos(), other.theta.sin());
        let z = Cplx::new(ca * cb, 0.0) + Cplx::from_polar(sa * sb, other.phi - self.phi);
        z.norm().min(1.0).acos()
    }

    /// Parameters of the same rotated vector when the input pair is swapped.
    pub fn swapped(&self) -> RotationParams {
        RotationParams::new(std::f64::consts::FRAC_PI_2 - self.theta, -self.phi)
    }
}

/// Per-site weighting of the phase-regularity criterion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "epsilon")]
pub enum Weighting {
    #[default]
    None,
    /// Skip sites whose modulus is below `epsilon` times the largest modulus.
    ModulusMask(f64),
}

/// Orthonormality tolerance for rotation inputs.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

fn check_pair<T: Real>(u1: &[Cplx<T>], u2: &[Cplx<T>]) -> Result<()> {
    if u1.len() != u2.len() {
        return Err(Error::DimensionMismatch {
            what: "rotation pair".into(),
            expected: u1.len(),
            found: u2.len(),
        });
    }
    let tol = T::lit(ORTHONORMAL_TOLERANCE);
    let n1 = cnorm(u1);
    let n2 = cnorm(u2);
    let ip = cdot(u1, u2).norm();
    if (n1 - T::one()).abs() > tol || (n2 - T::one()).abs() > tol || ip > tol {
        return Err(Error::NotOrthonormal(format!(
            "norms {:.3e}, {:.3e}, overlap {:.3e}",
            n1.as_f64(),
            n2.as_f64(),
            ip.as_f64()
        )));
    }
    Ok(())
}

/// `cos(theta) u1 + sin(theta) e^{i phi} u2` for an orthonormal pair.
pub fn rotate_pair<T: Real>(
    u1: &[Cplx<T>],
    u2: &[Cplx<T>],
    p: RotationParams,
) -> Result<Vec<Cplx<T>>> {
    check_pair(u1, u2)?;
    Ok(combine(u1, u2, p))
}

fn combine<T: Real>(u1: &[Cplx<T>], u2: &[Cplx<T>], p: RotationParams) -> Vec<Cplx<T>> {
    let c = T::lit(p.theta.cos());
    let s = Cplx::from_polar(T::lit(p.theta.sin()), T::lit(p.phi));
    u1.iter().zip(u2).map(|(a, b)| *a * c + *b * s).collect()
}

/// The unit vector of the span orthogonal to `u(p)`:
/// `-sin(theta) e^{-i phi} u1 + cos(theta) u2`.
pub fn complement<T: Real>(u1: &[Cplx<T>], u2: &[Cplx<T>], p: RotationParams) -> Vec<Cplx<T>> {
    let s = Cplx::from_polar(-T::lit(p.theta.sin()), -T::lit(p.phi));
    let c = T::lit(p.theta.cos());
    u1.iter().zip(u2).map(|(a, b)| *a * s + *b * c).collect()
}

/// Summed absolute Laplacian of the locally unwrapped phase of `u`.
///
/// Each neighbour's phase difference to the centre site is wrapped to
/// `(-pi, pi]` before the stencil is applied.
pub fn phase_laplacian_cost<T: Real>(
    u: &[Cplx<T>],
    stencil: &LaplacianStencil,
    weighting: Weighting,
) -> T {
    let phase: Vec<T> = u.iter().map(|z| z.arg()).collect();
    let threshold = match weighting {
        Weighting::None => None,
        Weighting::ModulusMask(eps) => {
            let max = u.iter().map(|z| z.norm()).fold(T::zero(), T::max);
            Some(T::lit(eps) * max)
        }
    };
    let mut total = T::zero();
    for (i, nb) in stencil.neighbors.iter().enumerate() {
        if let Some(th) = threshold {
            if u[i].norm() < th {
                continue;
            }
        }
        let mut acc = T::zero();
        for &(j, w) in nb {
            acc += T::lit(-w) * wrap_phase(phase[j] - phase[i]);
        }
        total += acc.abs();
    }
    total
}

/// The phase-regularity criterion with its configuration.
#[derive(Clone, Debug)]
pub struct PhaseCost {
    pub stencil: LaplacianStencil,
    pub weighting: Weighting,
    /// Sites averaged (as complex numbers) into each site before the phase
    /// is taken; `None` disables smoothing.
    pub smoothing: Option<Vec<Vec<usize>>>,
}

impl PhaseCost {
    pub fn new(stencil: LaplacianStencil, weighting: Weighting) -> Self {
        Self {
            stencil,
            weighting,
            smoothing: None,
        }
    }

    /// Enables a 3x3 complex moving average over active sites before the phase is taken.
    pub fn with_smoothing(mut self, grid: &SpatialGrid) -> Self {
        self.smoothing = Some(
            (0..grid.n_active())
                .map(|r| grid.neighborhood(r, 1))
                .collect(),
        );
        self
    }

    pub fn smooth<T: Real>(&self, u: &[Cplx<T>]) -> Vec<Cplx<T>> {
        match &self.smoothing {
            None => u.to_vec(),
            Some(nb) => nb
                .iter()
                .map(|idx| {
                    let s = idx.iter().fold(Cplx::<T>::zero(), |acc, &j| acc + u[j]);
                    s / T::count(idx.len())
                })
                .collect(),
        }
    }

    pub fn eval<T: Real>(&self, u: &[Cplx<T>]) -> T {
        if self.smoothing.is_some() {
            phase_laplacian_cost(&self.smooth(u), &self.stencil, self.weighting)
        } else {
            phase_laplacian_cost(u, &self.stencil, self.weighting)
        }
    }
}

/// Search settings for [`optimize_rotation`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RotationOptions {
    /// Coarse grid: `n_theta` points over `[0, pi/2]` (inclusive), `n_phi` over `[0, 2 pi)`.
    pub grid_steps: (usize, usize),
    /// Coordinate-descent sweeps per local refinement.
    pub refine_iters: usize,
    /// Basins of the coarse landscape whose depth (cost rise before merging
    /// with a deeper basin) is below this fraction of the landscape's range
    /// are treated as noise. Zero keeps every grid-local minimum.
    pub prominence: f64,
    /// Minima closer than this (radians, ray distance) with equal cost are merged.
    pub min_separation: f64,
    pub cost_tolerance: f64,
}

impl Default for RotationOptions {
    fn default() -> Self {
        Self {
            grid_steps: (64, 128),
            refine_iters: 6,
            prominence: 0.1,
            min_separation: 0.05,
            cost_tolerance: 1e-6,
        }
    }
}

/// A local minimum of the criterion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub params: RotationParams,
    pub cost: f64,
}

/// Optimal rotation of a pair and the orthogonal partner vector.
#[derive(Clone, Debug)]
pub struct RotatedPair<T: Real> {
    pub params: RotationParams,
    pub u_r1: Vec<Cplx<T>>,
    pub u_r2: Vec<Cplx<T>>,
    pub cost1: T,
    pub cost2: T,
    /// All distinct minima, ascending by cost; the first is `params`.
    pub local_minima: Vec<LocalMinimum>,
    /// Coarse-grid landscape, `n_theta x n_phi`.
    pub landscape: Array2<f64>,
}

/// Coordinates of the coarse grid.
pub fn grid_params(steps: (usize, usize)) -> (Vec<f64>, Vec<f64>) {
    let (nt, np) = steps;
    let thetas = (0..nt)
        .map(|a| std::f64::consts::FRAC_PI_2 * a as f64 / (nt - 1) as f64)
        .collect();
    let phis = (0..np)
        .map(|b| std::f64::consts::TAU * b as f64 / np as f64)
        .collect();
    (thetas, phis)
}

/// Criterion evaluated on the coarse `(theta, phi)` grid.
pub fn cost_landscape<T: Real>(
    u1: &[Cplx<T>],
    u2: &[Cplx<T>],
    cost: &PhaseCost,
    steps: (usize, usize),
) -> Array2<f64> {
    let (thetas, phis) = grid_params(steps);
    let mut out = Array2::zeros(steps);
    for (a, &th) in thetas.iter().enumerate() {
        for (b, &ph) in phis.iter().enumerate() {
            out[[a, b]] = cost
                .eval(&combine(u1, u2, RotationParams { theta: th, phi: ph }))
                .as_f64();
        }
    }
    out
}

/// Grid cells that are minima of basins deeper than `min_depth`, found by
/// flooding the landscape from its lowest value upwards (8-connected, periodic
/// in phi). The global minimum is always included.
pub fn basin_minima(j: &Array2<f64>, min_depth: f64) -> Vec<(usize, usize)> {
    let (nt, np) = j.dim();
    let idx = |a: usize, b: usize| a * np + b;
    let mut order: Vec<usize> = (0..nt * np).collect();
    order.sort_by(|&x, &y| {
        j[[x / np, x % np]]
            .total_cmp(&j[[y / np, y % np]])
            .then(x.cmp(&y))
    });
    let mut parent: Vec<usize> = (0..nt * np).collect();
    let mut active = vec![false; nt * np];
    let root_min: Vec<usize> = (0..nt * np).collect();
    let mut survivors = Vec::new();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for &cell in &order {
        let (a, b) = (cell / np, cell % np);
        active[cell] = true;
        let level = j[[a, b]];
        for da in -1isize..=1 {
            for db in -1isize..=1 {
                if da == 0 && db == 0 {
                    continue;
                }
                let a2 = a as isize + da;
                if a2 < 0 || a2 >= nt as isize {
                    continue;
                }
                let b2 = (b as isize + db).rem_euclid(np as isize) as usize;
                let nb = idx(a2 as usize, b2);
                if !active[nb] {
                    continue;
                }
                let r1 = find(&mut parent, cell);
                let r2 = find(&mut parent, nb);
                if r1 == r2 {
                    continue;
                }
                let m1 = root_min[r1];
                let m2 = root_min[r2];
                let v1 = j[[m1 / np, m1 % np]];
                let v2 = j[[m2 / np, m2 % np]];
                // the basin with the higher minimum dies at this level
                let (dying, living) = if (v1, m1) > (v2, m2) {
                    (r1, r2)
                } else {
                    (r2, r1)
                };
                let dmin = root_min[dying];
                if level - j[[dmin / np, dmin % np]] > min_depth {
                    survivors.push(dmin);
                }
                parent[dying] = living;
            }
        }
    }
    // the basin left standing holds the global minimum
    survivors.push(order[0]);
    survivors.sort_by(|&x, &y| j[[x / np, x % np]].total_cmp(&j[[y / np, y % np]]));
    survivors.into_iter().map(|c| (c / np, c % np)).collect()
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of `f` on `[lo, hi]`.
fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Coordinate descent from `start` with golden-section line searches on
/// brackets that start at one grid step and halve every sweep.
fn refine<T: Real>(
    u1: &[Cplx<T>],
    u2: &[Cplx<T>],
    cost: &PhaseCost,
    start: RotationParams,
    steps: (usize, usize),
    sweeps: usize,
) -> LocalMinimum {
    let eval = |p: RotationParams| cost.eval(&combine(u1, u2, p)).as_f64();
    let mut best = LocalMinimum {
        params: start,
        cost: eval(start),
    };
    let mut ht = std::f64::consts::FRAC_PI_2 / (steps.0 - 1) as f64;
    let mut hp = std::f64::consts::TAU / steps.1 as f64;
    for _ in 0..sweeps {
        let p = best.params;
        let lo = (p.theta - ht).max(0.0);
        let hi = (p.theta + ht).min(std::f64::consts::FRAC_PI_2);
        let (t, c) = golden_section(
            |t| {
                eval(RotationParams {
                    theta: t,
                    phi: p.phi,
                })
            },
            lo,
            hi,
            24,
        );
        if c < best.cost {
            best = LocalMinimum {
                params: RotationParams::new(t, p.phi),
                cost: c,
            };
        }
        let p = best.params;
        let (f, c) = golden_section(
            |f| {
                eval(RotationParams {
                    theta: p.theta,
                    phi: f,
                })
            },
            p.phi - hp,
            p.phi + hp,
            24,
        );
        if c < best.cost {
            best = LocalMinimum {
                params: RotationParams::new(p.theta, f),
                cost: c,
            };
        }
        ht *= 0.5;
        hp *= 0.5;
    }
    best
}

/// Globally minimizes the criterion over rotations of `(u1, u2)`.
///
/// The coarse landscape is flooded into basins, every sufficiently deep
/// basin is refined locally, and the best refined point defines `u_r1`;
/// `u_r2` is its orthogonal partner in the span.
pub fn optimize_rotation<T: Real>(
    u1: &[Cplx<T>],
    u2: &[Cplx<T>],
    cost: &PhaseCost,
    opts: &RotationOptions,
) -> Result<RotatedPair<T>> {
    check_pair(u1, u2)?;
    if u1.len() != cost.stencil.len() {
        return Err(Error::DimensionMismatch {
            what: "eigenvector length vs stencil sites".into(),
            expected: cost.stencil.len(),
            found: u1.len(),
        });
    }
    let (nt, np) = opts.grid_steps;
    if nt < 3 || np < 4 {
        return Err(Error::invalid("rotation grid needs at least 3 x 4 points"));
    }
    let landscape = cost_landscape(u1, u2, cost, opts.grid_steps);
    let (lo, hi) = landscape
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let depth = opts.prominence * (hi - lo);
    let starts = basin_minima(&landscape, depth);
    let (thetas, phis) = grid_params(opts.grid_steps);

    let mut minima: Vec<LocalMinimum> = Vec::new();
    for (a, b) in starts {
        let start = RotationParams::new(thetas[a], phis[b]);
        let m = refine(u1, u2, cost, start, opts.grid_steps, opts.refine_iters);
        let duplicate = minima.iter().any(|o| {
            (o.cost - m.cost).abs() <= opts.cost_tolerance
                && o.params.distance(&m.params) <= opts.min_separation
        });
        if !duplicate {
            minima.push(m);
        }
    }
    minima.sort_by(|x, y| x.cost.total_cmp(&y.cost));
    let best = minima[0].params;
    let u_r1 = combine(u1, u2, best);
    let u_r2 = complement(u1, u2, best);
    let cost1 = cost.eval(&u_r1);
    let cost2 = cost.eval(&u_r2);
    Ok(RotatedPair {
        params: best,
        u_r1,
        u_r2,
        cost1,
        cost2,
        local_minima: minima,
        landscape,
    })
}

/// Checks unit norms, mutual orthogonality and that both rotated vectors lie
/// in the original span; returns the largest violation.
pub fn verify_pair<T: Real>(u1: &[Cplx<T>], u2: &[Cplx<T>], pair: &RotatedPair<T>) -> T {
    let mut worst = T::zero();
    for v in [&pair.u_r1, &pair.u_r2] {
        worst = worst.max((cnorm(v) - T::one()).abs());
        let a = cdot(u1, v);
        let b = cdot(u2, v);
        let resid: T = v
            .iter()
            .zip(u1.iter().zip(u2))
            .map(|(x, (p, q))| (*x - *p * a - *q * b).norm_sqr())
            .sum::<T>()
            .sqrt();
        worst = worst.max(resid);
    }
    worst.max(cdot(&pair.u_r1, &pair.u_r2).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_laplacian;

    fn basis(n: usize, i: usize) -> Vec<Cplx<f64>> {
        let mut v = vec![Cplx::new(0.0, 0.0); n];
        v[i] = Cplx::new(1.0, 0.0);
        v
    }

    #[test]
    fn rotation_endpoints() {
        let u1 = basis(3, 0);
        let u2 = basis(3, 1);
        assert_eq!(
            rotate_pair(&u1, &u2, RotationParams::new(0.0, 1.0)).unwrap(),
            u1
        );
        let v = rotate_pair(
            &u1,
            &u2,
            RotationParams {
                theta: std::f64::consts::FRAC_PI_2,
                phi: 0.0,
            },
        )
        .unwrap();
        assert!((v[1] - Cplx::new(1.0, 0.0)).norm() < 1e-15 && v[0].norm() < 1e-15);
        let q = rotate_pair(
            &u1,
            &u2,
            RotationParams::new(std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2),
        )
        .unwrap();
        assert!((cnorm(&q) - 1.0).abs() < 1e-12);
        assert!((q[1] - Cplx::new(0.0, 1.0 / 2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn non_orthonormal_inputs_fail() {
        let u1 = basis(3, 0);
        assert!(matches!(
            rotate_pair(&u1, &u1, RotationParams::new(0.1, 0.0)),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn linear_phase_has_zero_interior_cost() {
        let g = SpatialGrid::full(vec![6, 6]).unwrap();
        let s = build_laplacian(&g).unwrap();
        let u: Vec<Cplx<f64>> = (0..36)
            .map(|r| Cplx::from_polar(1.0, 1.3 * g.position(r).0 as f64))
            .collect();
        let interior: f64 = {
            let phase: Vec<f64> = u.iter().map(|z| z.arg()).collect();
            (0..36)
                .filter(|&r| s.center[r] == 4.0)
                .map(|r| {
                    s.neighbors[r]
                        .iter()
                        .map(|&(j, w)| -w * wrap_phase(phase[j] - phase[r]))
                        .sum::<f64>()
                        .abs()
                })
                .sum()
        };
        assert!(interior < 1e-10);
        let c: Vec<Cplx<f64>> = vec![Cplx::from_polar(1.0, 2.0); 36];
        assert_eq!(phase_laplacian_cost(&c, &s, Weighting::None), 0.0);
    }

    #[test]
    fn basins_of_two_wells() {
        let (nt, np) = (20, 40);
        let mut j = Array2::from_shape_fn((nt, np), |(a, b)| {
            let x = a as f64 / nt as f64;
            let y = b as f64 / np as f64 * std::f64::consts::TAU;
            (x - 0.5).powi(2) + 0.3 * (2.0 * y).cos()
        });
        // a shallow dimple away from both wells
        j[[3, 10]] -= 0.05;
        let m = basin_minima(&j, 0.1 * 1.3);
        assert_eq!(m.len(), 2);
        let all = basin_minima(&j, 0.0);
        assert!(all.len() > 2);
    }

    #[test]
    fn fubini_study_distance() {
        let p = RotationParams::new(0.3, 1.0);
        assert!(p.distance(&p) < 1e-7);
        let q = RotationParams::new(
            std::f64::consts::FRAC_PI_2 - 0.3,
            1.0 + std::f64::consts::PI,
        );
        assert!((p.distance(&q) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(p.distance(&p.swapped()) > 0.1);
    }
}
