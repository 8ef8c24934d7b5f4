//! Hermitian eigensolvers.
//!
//! Two routes are provided: a dense solver (Householder reduction to a real
//! tridiagonal matrix followed by implicit QL iterations) for moderate sizes,
//! and a thick-restarted Krylov solver for the leading eigenpairs of large
//! operators that are only available through matrix-vector products.

use ndarray::Array2;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{cdot, cnorm, Cplx, Real};

/// A Hermitian linear operator `y = A x`.
pub trait HermitianOperator<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]);
}

impl<T: Real> HermitianOperator<T> for Array2<Cplx<T>> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        for (yi, row) in y.iter_mut().zip(self.rows()) {
            let mut acc = Cplx::<T>::zero();
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yi = acc;
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds one unit
/// eigenvector per column.
#[derive(Clone, Debug)]
pub struct Eigenpairs<T: Real> {
    pub values: Vec<T>,
    pub vectors: Array2<Cplx<T>>,
}

impl<T: Real> Eigenpairs<T> {
    pub fn vector(&self, i: usize) -> Vec<Cplx<T>> {
        self.vectors.column(i).to_vec()
    }
}

/// Largest relative deviation from Hermitian symmetry, `max|a_ij - conj(a_ji)| / max|a_ij|`.
pub fn hermitian_defect<T: Real>(a: &Array2<Cplx<T>>) -> T {
    let n = a.nrows();
    let mut scale = T::zero();
    let mut defect = T::zero();
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[[i, j]].norm());
            if j >= i {
                defect = defect.max((a[[i, j]] - a[[j, i]].conj()).norm());
            }
        }
    }
    if scale > T::zero() {
        defect / scale
    } else {
        T::zero()
    }
}

/// Full eigendecomposition of a dense Hermitian matrix.
///
/// The input is symmetrized as `(A + A^H) / 2` before reduction.
pub fn hermitian_eigh<T: Real>(a: &Array2<Cplx<T>>) -> Result<Eigenpairs<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "square matrix columns".into(),
            expected: n,
            found: a.ncols(),
        });
    }
    if n == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let half = T::lit(0.5);
    let mut m = Array2::<Cplx<T>>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = (a[[i, j]] + a[[j, i]].conj()) * half;
        }
    }

    let (diag, sub, q) = tridiagonalize(m);

    // Diagonal unitary scaling turning the complex subdiagonal real.
    let mut phase = vec![Cplx::<T>::one(); n];
    let mut off = vec![T::zero(); n];
    for i in 0..n.saturating_sub(1) {
        let mag = sub[i].norm();
        off[i] = mag;
        phase[i + 1] = if mag > T::zero() {
            phase[i] * (sub[i] / mag)
        } else {
            phase[i]
        };
    }
    let mut d = diag;
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    tql2(&mut d, &mut off, &mut z, n)?;

    // vectors = Q * diag(phase) * Z
    let mut qd = q;
    for i in 0..n {
        for j in 0..n {
            qd[[i, j]] *= phase[j];
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].partial_cmp(&d[x]).unwrap_or(std::cmp::Ordering::Equal));
    let mut vectors = Array2::<Cplx<T>>::zeros((n, n));
    let mut values = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        values.push(d[src]);
        for i in 0..n {
            let mut acc = Cplx::<T>::zero();
            for l in 0..n {
                let zl = z[l * n + src];
                if zl != T::zero() {
                    acc += qd[[i, l]] * zl;
                }
            }
            vectors[[i, col]] = acc;
        }
    }
    Ok(Eigenpairs { values, vectors })
}

/// Householder reduction `A = Q T Q^H`; returns (diagonal, complex subdiagonal, Q).
fn tridiagonalize<T: Real>(mut a: Array2<Cplx<T>>) -> (Vec<T>, Vec<Cplx<T>>, Array2<Cplx<T>>) {
    let n = a.nrows();
    let mut q = Array2::<Cplx<T>>::eye(n);
    let two = T::lit(2.0);
    let mut sub = vec![Cplx::<T>::zero(); n.saturating_sub(1)];
    for k in 0..n.saturating_sub(1) {
        let len = n - k - 1;
        let x: Vec<Cplx<T>> = (0..len).map(|i| a[[k + 1 + i, k]]).collect();
        let xnorm = cnorm(&x);
        let tail: T = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if xnorm == T::zero() || tail == T::zero() {
            sub[k] = x[0];
            continue;
        }
        let x0n = x[0].norm();
        let ph = if x0n > T::zero() {
            x[0] / x0n
        } else {
            Cplx::one()
        };
        let alpha = -ph * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vn = cnorm(&v);
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        // trailing block update B <- B - 2 v q^H - 2 q v^H with q = Bv - (v^H B v) v
        let off = k + 1;
        let mut w = vec![Cplx::<T>::zero(); len];
        for i in 0..len {
            let mut acc = Cplx::<T>::zero();
            for j in 0..len {
                acc += a[[off + i, off + j]] * v[j];
            }
            w[i] = acc;
        }
        let kk = cdot(&v, &w);
        let qv: Vec<Cplx<T>> = w.iter().zip(&v).map(|(wi, vi)| *wi - *vi * kk).collect();
        for i in 0..len {
            for j in 0..len {
                let upd = (v[i] * qv[j].conj() + qv[i] * v[j].conj()) * two;
                a[[off + i, off + j]] -= upd;
            }
        }
        sub[k] = alpha;
        a[[k + 1, k]] = alpha;
        a[[k, k + 1]] = alpha.conj();
        for i in 1..len {
            a[[k + 1 + i, k]] = Cplx::<T>::zero();
            a[[k, k + 1 + i]] = Cplx::<T>::zero();
        }
        // Q <- Q (I - 2 v v^H) on columns off..n
        for r in 0..n {
            let mut acc = Cplx::<T>::zero();
            for j in 0..len {
                acc += q[[r, off + j]] * v[j];
            }
            for j in 0..len {
                let upd = acc * v[j].conj() * two;
                q[[r, off + j]] -= upd;
            }
        }
    }
    let diag = (0..n).map(|i| a[[i, i]].re).collect();
    (diag, sub, q)
}

/// Implicit QL iterations on a real symmetric tridiagonal matrix.
///
/// `e[i]` couples rows `i` and `i + 1`; `z` (row-major n x n) accumulates the
/// rotations. Eigenvalues are left unsorted in `d`.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], z: &mut [T], n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Numerical("tridiagonal QL failed to converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * zk;
                        z[k * n + i] = c * z[k * n + i] - s * zk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Settings for [`top_eigenpairs`].
#[derive(Clone, Debug)]
pub struct KrylovOptions {
    /// Operators of at most this dimension are materialized and solved densely.
    pub dense_cutoff: usize,
    pub max_restarts: usize,
    /// Relative residual target, `||A y - theta y|| <= tol * |theta_1|`.
    pub tol: Option<f64>,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            dense_cutoff: 400,
            max_restarts: 2000,
            tol: None,
        }
    }
}

/// Materializes an operator as a dense matrix by applying it to unit vectors.
pub fn materialize<T: Real, A: HermitianOperator<T> + ?Sized>(op: &A) -> Array2<Cplx<T>> {
    let n = op.dim();
    let mut out = Array2::zeros((n, n));
    let mut e = vec![Cplx::<T>::zero(); n];
    let mut col = vec![Cplx::<T>::zero(); n];
    for j in 0..n {
        e[j] = Cplx::one();
        op.apply(&e, &mut col);
        for i in 0..n {
            out[[i, j]] = col[i];
        }
        e[j] = Cplx::<T>::zero();
    }
    out
}

/// Leading `k` eigenpairs (largest algebraic eigenvalues) of a Hermitian operator.
pub fn top_eigenpairs<T: Real, A: HermitianOperator<T> + ?Sized>(
    op: &A,
    k: usize,
    opts: &KrylovOptions,
) -> Result<Eigenpairs<T>> {
    let n = op.dim();
    if k > n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    if k == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: Array2::zeros((n, 0)),
        });
    }
    let m_max = (2 * k + 24).max(k + 32);
    if n <= opts.dense_cutoff || m_max + 1 >= n {
        let full = hermitian_eigh(&materialize(op))?;
        return Ok(truncate(full, k));
    }
    krylov_schur(op, k, m_max, opts)
}

fn truncate<T: Real>(full: Eigenpairs<T>, k: usize) -> Eigenpairs<T> {
    let vectors = full.vectors.slice(ndarray::s![.., ..k]).to_owned();
    Eigenpairs {
        values: full.values[..k].to_vec(),
        vectors,
    }
}

/// Deterministic start vector (real valued so real operators keep real Krylov spaces).
fn start_vector<T: Real>(n: usize, salt: u64) -> Vec<Cplx<T>> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut v: Vec<Cplx<T>> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            Cplx::new(T::lit(u - 0.5), T::zero())
        })
        .collect();
    let nrm = cnorm(&v);
    for x in v.iter_mut() {
        *x /= nrm;
    }
    v
}

/// Orthogonalizes `w` against `basis` (classical Gram-Schmidt, two passes).
fn orthogonalize<T: Real>(basis: &[Vec<Cplx<T>>], w: &mut [Cplx<T>]) -> Vec<Cplx<T>> {
    let mut coef = vec![Cplx::<T>::zero(); basis.len()];
    for _ in 0..2 {
        for (c, b) in coef.iter_mut().zip(basis) {
            let h = cdot(b, w);
            *c += h;
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= *bi * h;
            }
        }
    }
    coef
}

fn krylov_schur<T: Real, A: HermitianOperator<T> + ?Sized>(
    op: &A,
    k: usize,
    m_max: usize,
    opts: &KrylovOptions,
) -> Result<Eigenpairs<T>> {
    let n = op.dim();
    let tol = opts.tol.map(T::lit).unwrap_or_else(T::solver_tol);
    let keep = (k + (m_max - k) / 2).min(m_max - 1);

    let mut basis: Vec<Vec<Cplx<T>>> = vec![start_vector(n, 0)];
    let mut h = Array2::<Cplx<T>>::zeros((m_max, m_max));
    let mut w = vec![Cplx::<T>::zero(); n];
    let mut salt = 1u64;
    let mut scale = T::zero();

    for _restart in 0..opts.max_restarts {
        let mut residual_norm;
        // extend the basis up to m_max vectors
        let mut j = basis.len() - 1;
        loop {
            op.apply(&basis[j], &mut w);
            let coef = orthogonalize(&basis, &mut w);
            for (i, c) in coef.iter().enumerate() {
                h[[i, j]] = *c;
                h[[j, i]] = c.conj();
            }
            h[[j, j]] = Cplx::new(coef[j].re, T::zero());
            residual_norm = cnorm(&w);
            scale = scale.max(h[[j, j]].norm()).max(residual_norm);
            if j + 1 == m_max {
                break;
            }
            if residual_norm <= T::epsilon() * T::lit(64.0) * scale.max(T::min_positive_value()) {
                // invariant subspace: continue with a fresh orthogonal direction
                let mut fresh = start_vector::<T>(n, salt);
                salt += 1;
                orthogonalize(&basis, &mut fresh);
                let nrm = cnorm(&fresh);
                if nrm <= T::lit(1e-3) {
                    break;
                }
                for x in fresh.iter_mut() {
                    *x /= nrm;
                }
                basis.push(fresh);
            } else {
                basis.push(w.iter().map(|x| *x / residual_norm).collect());
            }
            j += 1;
        }
        let m = basis.len();
        let small = h.slice(ndarray::s![..m, ..m]).to_owned();
        let ritz = hermitian_eigh(&small)?;
        let lead = ritz.values[0].abs().max(T::min_positive_value());
        let converged =
            (0..k.min(m)).all(|i| residual_norm * ritz.vectors[[m - 1, i]].norm() <= tol * lead);
        let exhausted = m < m_max;
        if (converged && m >= k) || exhausted {
            if m < k {
                return Err(Error::Numerical(format!(
                    "Krylov space of dimension {m} cannot supply {k} eigenpairs"
                )));
            }
            return Ok(ritz_vectors(&basis, &ritz, k));
        }

        // thick restart: keep the leading Ritz vectors plus the residual direction
        let kept = keep.min(m);
        let ritz_basis = ritz_vectors(&basis, &ritz, kept);
        let next: Vec<Cplx<T>> = w.iter().map(|x| *x / residual_norm).collect();
        basis.clear();
        for i in 0..kept {
            basis.push(ritz_basis.vectors.column(i).to_vec());
        }
        h.fill(Cplx::<T>::zero());
        for i in 0..kept {
            h[[i, i]] = Cplx::new(ritz.values[i], T::zero());
        }
        basis.push(next);
    }
    Err(Error::Numerical(format!(
        "Krylov eigensolver did not converge within {} restarts",
        opts.max_restarts
    )))
}

fn ritz_vectors<T: Real>(basis: &[Vec<Cplx<T>>], ritz: &Eigenpairs<T>, k: usize) -> Eigenpairs<T> {
    let n = basis[0].len();
    let m = basis.len();
    let mut vectors = Array2::<Cplx<T>>::zeros((n, k));
    for i in 0..k {
        let mut y = vec![Cplx::<T>::zero(); n];
        for l in 0..m {
            let c = ritz.vectors[[l, i]];
            for (yi, b) in y.iter_mut().zip(&basis[l]) {
                *yi += *b * c;
            }
        }
        let nrm = cnorm(&y);
        for (r, yi) in y.iter().enumerate() {
            vectors[[r, i]] = *yi / nrm;
        }
    }
    Eigenpairs {
        values: ritz.values[..k].to_vec(),
        vectors,
    }
}

/// Rotates every eigenvector by a global phase so that its largest-modulus
/// entry is real and positive.
pub fn fix_phases<T: Real>(vectors: &mut Array2<Cplx<T>>) {
    for mut col in vectors.columns_mut() {
        let mut best = Cplx::<T>::zero();
        for z in col.iter() {
            if z.norm() > best.norm() {
                best = *z;
            }
        }
        let bn = best.norm();
        if bn > T::zero() {
            let rot = best.conj() / bn;
            col.mapv_inplace(|z| z * rot);
        }
    }
}

/// `||A v - lambda v||` for each column.
pub fn residuals<T: Real, A: HermitianOperator<T> + ?Sized>(
    op: &A,
    pairs: &Eigenpairs<T>,
) -> Vec<T> {
    let n = op.dim();
    let mut out = vec![Cplx::<T>::zero(); n];
    (0..pairs.values.len())
        .map(|i| {
            let v = pairs.vector(i);
            op.apply(&v, &mut out);
            out.iter()
                .zip(&v)
                .map(|(a, b)| (*a - *b * pairs.values[i]).norm_sqr())
                .sum::<T>()
                .sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> Array2<Cplx<f64>> {
        let v = start_vector::<f64>(2 * n * n, seed);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let re = v[2 * (i * n + j)].re;
                let im = if i == j {
                    0.0
                } else {
                    v[2 * (i * n + j) + 1].re
                };
                a[[i, j]] = c(re, im);
                a[[j, i]] = c(re, -im);
            }
        }
        a
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let a = Array2::<Cplx<f64>>::eye(3);
        let e = hermitian_eigh(&a).unwrap();
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = ndarray::arr2(&[[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(2.0, 0.0)]]);
        let e = hermitian_eigh(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        let r = residuals(&a, &e);
        assert!(r.iter().all(|x| *x < 1e-12));
    }

    #[test]
    fn dense_residuals_and_orthonormality() {
        let a = random_hermitian(20, 7);
        let e = hermitian_eigh(&a).unwrap();
        let norm = e.values[0].abs().max(e.values[19].abs());
        for r in residuals(&a, &e) {
            assert!(r <= 1e-10 * norm);
        }
        for i in 0..20 {
            for j in 0..20 {
                let d = cdot(&e.vector(i), &e.vector(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - c(expect, 0.0)).norm() < 1e-10);
            }
        }
        let trace: f64 = (0..20).map(|i| a[[i, i]].re).sum();
        let sum: f64 = e.values.iter().sum();
        assert!((trace - sum).abs() < 1e-10 * trace.abs().max(1.0));
    }

    #[test]
    fn krylov_matches_dense_on_low_rank_plus_noise() {
        let n = 300;
        let mut a = random_hermitian(n, 3);
        a.mapv_inplace(|z| z * 0.01);
        let u = start_vector::<f64>(n, 11);
        let w = start_vector::<f64>(n, 12);
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] += u[i] * u[j].conj() * 5.0 + w[i] * w[j].conj() * 3.0;
            }
        }
        let opts = KrylovOptions {
            dense_cutoff: 10,
            ..Default::default()
        };
        let kr = top_eigenpairs(&a, 4, &opts).unwrap();
        let dense = hermitian_eigh(&a).unwrap();
        for i in 0..4 {
            assert!((kr.values[i] - dense.values[i]).abs() < 1e-9, "{i}");
        }
        for r in residuals(&a, &kr) {
            assert!(r < 1e-8 * dense.values[0]);
        }
    }

    #[test]
    fn f32_path_works() {
        let a = ndarray::arr2(&[
            [Cplx::new(2.0f32, 0.0), Cplx::new(0.0, 1.0)],
            [Cplx::new(0.0, -1.0), Cplx::new(2.0, 0.0)],
        ]);
        let e = hermitian_eigh(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-5);
    }
}
