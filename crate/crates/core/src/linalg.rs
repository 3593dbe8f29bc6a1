//! Numerical kernels shared by the physics modules: dense matrix
//! exponential, Hermitian eigendecomposition, sparse products and a
//! restarted GMRES solver.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use ndarray::Array2;
use num_complex::Complex64;
use sprs::CsMat;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Sparse complex matrix (CSR for operators, CSC for superoperators).
pub type SpMat = CsMat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const IM: C64 = C64::new(0.0, 1.0);

pub(crate) fn to_faer(a: &Array2<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_faer(m: faer::MatRef<'_, C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn one_norm(a: &Array2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn conj_transpose(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Solve `A X = B` with partial-pivoting LU.
pub fn solve_dense(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let lu = to_faer(a).partial_piv_lu();
    let x = lu.solve(to_faer(b));
    from_faer(x.as_ref())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|z| z / 2f64.powi(s));
    let eye = Array2::<C64>::eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let inner_u = a6.dot(&(&a6 * b(13) + &a4 * b(11) + &a2 * b(9)));
    let u = a.dot(&(inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &eye * b(1)));
    let inner_v = a6.dot(&(&a6 * b(12) + &a4 * b(10) + &a2 * b(8)));
    let v = inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &eye * b(0);

    let mut r = solve_dense(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascend; the
/// eigenvectors are the columns of the returned matrix.
pub fn eigh(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let m = to_faer(a);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::InvalidArgument(format!("eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, from_faer(eig.U())))
}

pub fn eigvalsh(a: &Array2<C64>) -> Result<Vec<f64>> {
    eigh(a).map(|(v, _)| v)
}

/// `y = A x` for either storage order.
pub fn spmv(a: &SpMat, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(a.cols(), x.len());
    debug_assert_eq!(a.rows(), y.len());
    if a.is_csr() {
        for (i, row) in a.outer_iterator().enumerate() {
            let mut acc = ZERO;
            for (j, v) in row.iter() {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    } else {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (j, col) in a.outer_iterator().enumerate() {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            for (i, v) in col.iter() {
                y[i] += v * xj;
            }
        }
    }
}

/// Sparse LU factorization of a square matrix given as triplets
/// (duplicates are summed).
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
    n: usize,
}

impl SparseLu {
    pub fn new(n: usize, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let trip: Vec<_> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::InvalidArgument(format!("sparse assembly failed: {e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::NoUniqueSteadyState(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.n;
        self.lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(x, n, 1));
    }
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// `apply` computes `y = A x`; `precond` computes `y ≈ A⁻¹ x`.
pub fn gmres<A, P>(
    apply: A,
    precond: P,
    b: &[C64],
    x0: Option<&[C64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<C64>, GmresReport)>
where
    A: Fn(&[C64], &mut [C64]),
    P: Fn(&[C64], &mut [C64]),
{
    let n = b.len();
    let b_norm = vec_norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![ZERO; n]);
    if b_norm == 0.0 {
        return Ok((vec![ZERO; n], GmresReport { iterations: 0, relative_residual: 0.0 }));
    }
    let m = restart.max(1);
    let mut r = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    let mut total = 0usize;

    let residual = |x: &[C64], r: &mut [C64], tmp: &mut [C64]| {
        apply(x, tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        vec_norm(r)
    };

    let mut beta = residual(&x, &mut r, &mut tmp);
    loop {
        if beta / b_norm < tol {
            return Ok((x, GmresReport { iterations: total, relative_residual: beta / b_norm }));
        }
        if total >= max_iter {
            return Err(Error::NoUniqueSteadyState(format!(
                "GMRES did not converge in {max_iter} iterations (relative residual {:.3e})",
                beta / b_norm
            )));
        }
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;

        for j in 0..m {
            precond(&basis[j], &mut z);
            let mut w = vec![ZERO; n];
            apply(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dotc(v, &w);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let hn = vec_norm(&w);
            h[j + 1][j] = C64::new(hn, 0.0);
            for i in 0..j {
                let t1 = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                let t2 = -sn[i].conj() * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t1;
                h[i + 1][j] = t2;
            }
            let a = h[j][j];
            let bb = h[j + 1][j];
            let rr = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if rr == 0.0 {
                cs[j] = 1.0;
                sn[j] = ZERO;
            } else if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = bb.conj() / rr;
            } else {
                cs[j] = a.norm() / rr;
                sn[j] = (a / a.norm()) * bb.conj() / rr;
            }
            h[j][j] = cs[j] * a + sn[j] * bb;
            h[j + 1][j] = ZERO;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] = cs[j] * g[j];
            total += 1;
            k_used = j + 1;
            if g[j + 1].norm() / b_norm < tol || hn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }

        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for l in (i + 1)..k_used {
                acc -= h[i][l] * y[l];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![ZERO; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        precond(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        beta = residual(&x, &mut r, &mut tmp);
    }
}
