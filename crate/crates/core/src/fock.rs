//! Truncated Fock-space algebra for one or two bosonic modes.
//!
//! Two-mode index convention: `i = m * n_b + j` for `|m⟩_a |j⟩_b`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sprs::TriMat;

use crate::error::{Error, Result};
use crate::linalg::{self, SpMat, C64, ONE, ZERO};

/// Level above which a populated top edge triggers a warning.
pub const LEAKAGE_WARN: f64 = 1e-6;
/// Level above which scenario rows are flagged.
pub const LEAKAGE_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeDims {
    pub n_a: usize,
    pub n_b: usize,
}

impl ModeDims {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::InvalidDimension(format!(
                "mode truncations must be positive, got ({n_a}, {n_b})"
            )));
        }
        Ok(Self { n_a, n_b })
    }

    pub fn total(&self) -> usize {
        self.n_a * self.n_b
    }

    pub fn index(&self, m: usize, j: usize) -> usize {
        m * self.n_b + j
    }

    pub fn of(&self, mode: Mode) -> usize {
        match mode {
            Mode::A => self.n_a,
            Mode::B => self.n_b,
        }
    }
}

/// Hilbert-space layout of an operator or state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dims {
    Single(usize),
    Two(ModeDims),
}

impl Dims {
    pub fn size(&self) -> usize {
        match self {
            Dims::Single(d) => *d,
            Dims::Two(md) => md.total(),
        }
    }

    pub fn two(&self) -> Result<ModeDims> {
        match self {
            Dims::Two(md) => Ok(*md),
            Dims::Single(d) => Err(Error::Shape(format!(
                "expected a two-mode space, got a single mode of dimension {d}"
            ))),
        }
    }
}

impl From<ModeDims> for Dims {
    fn from(md: ModeDims) -> Self {
        Dims::Two(md)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidDimension("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_finite(z: C64, what: &str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be finite, got {z}")))
    }
}

/// A linear operator on a truncated Fock space, stored as CSR.
#[derive(Debug, Clone)]
pub struct QOperator {
    dims: Dims,
    matrix: SpMat,
}

impl QOperator {
    pub fn from_sparse(dims: Dims, matrix: SpMat) -> Result<Self> {
        let n = dims.size();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::Shape(format!(
                "operator is {}x{}, dims need {n}x{n}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let matrix = if matrix.is_csr() { matrix } else { matrix.to_csr() };
        Ok(Self { dims, matrix })
    }

    pub fn from_dense(dims: Dims, m: &Array2<C64>) -> Result<Self> {
        let mut tri = TriMat::new((m.nrows(), m.ncols()));
        for ((i, j), v) in m.indexed_iter() {
            if *v != ZERO {
                tri.add_triplet(i, j, *v);
            }
        }
        Self::from_sparse(dims, tri.to_csr())
    }

    pub(crate) fn from_triplets(dims: Dims, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let n = dims.size();
        let mut tri = TriMat::new((n, n));
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("entry ({i},{j}) outside dimension {n}")));
            }
            tri.add_triplet(i, j, v);
        }
        Self::from_sparse(dims, tri.to_csr())
    }

    pub fn identity(dims: Dims) -> Self {
        Self { dims, matrix: SpMat::eye(dims.size()) }
    }

    pub fn zeros(dims: Dims) -> Self {
        let n = dims.size();
        Self { dims, matrix: SpMat::zero((n, n)) }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.size()
    }

    pub fn matrix(&self) -> &SpMat {
        &self.matrix
    }

    pub fn to_dense(&self) -> Array2<C64> {
        self.matrix.to_dense()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix.get(i, j).copied().unwrap_or(ZERO)
    }

    pub fn adjoint(&self) -> Self {
        let t = self.matrix.transpose_view().to_csr();
        Self { dims: self.dims, matrix: t.map(|v| v.conj()) }
    }

    pub fn transpose(&self) -> Self {
        Self { dims: self.dims, matrix: self.matrix.transpose_view().to_csr() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dims: self.dims, matrix: self.matrix.map(|v| v * s) }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Self { dims: self.dims, matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Self { dims: self.dims, matrix: &self.matrix - &other.matrix })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Self { dims: self.dims, matrix: &self.matrix * &other.matrix })
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn apply(&self, v: &Array1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} against operator of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut out = Array1::zeros(v.len());
        linalg::spmv(
            &self.matrix,
            v.as_slice().expect("contiguous"),
            out.as_slice_mut().expect("contiguous"),
        );
        Ok(out)
    }

    /// `max |M - M†|` over all entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let diff = &self.matrix - &self.adjoint().matrix;
        diff.data().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }
}

/// Lowering operator on a single mode of dimension `dim`.
pub fn annihilator(dim: usize) -> Result<QOperator> {
    check_dim(dim)?;
    let entries: Vec<_> = (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))).collect();
    QOperator::from_triplets(Dims::Single(dim), &entries)
}

pub fn creator(dim: usize) -> Result<QOperator> {
    Ok(annihilator(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<QOperator> {
    check_dim(dim)?;
    let entries: Vec<_> = (0..dim).map(|n| (n, n, C64::new(n as f64, 0.0))).collect();
    QOperator::from_triplets(Dims::Single(dim), &entries)
}

pub fn identity(dim: usize) -> Result<QOperator> {
    check_dim(dim)?;
    Ok(QOperator::identity(Dims::Single(dim)))
}

/// Kronecker product `A ⊗ B` of two single-mode operators.
pub fn tensor(a: &QOperator, b: &QOperator) -> Result<QOperator> {
    let (Dims::Single(na), Dims::Single(nb)) = (a.dims, b.dims) else {
        return Err(Error::Shape("tensor expects two single-mode operators".into()));
    };
    let k: SpMat = sprs::kronecker_product(a.matrix.view(), b.matrix.view());
    QOperator::from_sparse(Dims::Two(ModeDims::new(na, nb)?), k)
}

/// Lift a single-mode operator to the two-mode space.
pub fn embed(op: &QOperator, mode: Mode, dims: ModeDims) -> Result<QOperator> {
    let d = dims.of(mode);
    if op.dims != Dims::Single(d) {
        return Err(Error::Shape(format!(
            "operator {:?} does not fit mode {mode:?} of {dims:?}",
            op.dims
        )));
    }
    match mode {
        Mode::A => tensor(op, &identity(dims.n_b)?),
        Mode::B => tensor(&identity(dims.n_a)?, op),
    }
}

/// Ladder and number operators of both modes on the composite space.
#[derive(Debug, Clone)]
pub struct TwoModeOps {
    pub a: QOperator,
    pub b: QOperator,
    pub n_a: QOperator,
    pub n_b: QOperator,
    pub n_a_n_b: QOperator,
}

impl TwoModeOps {
    pub fn new(dims: ModeDims) -> Result<Self> {
        let a = embed(&annihilator(dims.n_a)?, Mode::A, dims)?;
        let b = embed(&annihilator(dims.n_b)?, Mode::B, dims)?;
        let n_a = embed(&number(dims.n_a)?, Mode::A, dims)?;
        let n_b = embed(&number(dims.n_b)?, Mode::B, dims)?;
        let n_a_n_b = tensor(&number(dims.n_a)?, &number(dims.n_b)?)?;
        Ok(Self { a, b, n_a, n_b, n_a_n_b })
    }
}

/// Dense `⟨m|D(β)|n⟩` built from scaled associated Laguerre recurrences.
pub fn displacement_dense(dim: usize, beta: C64) -> Result<Array2<C64>> {
    check_dim(dim)?;
    check_finite(beta, "displacement amplitude")?;
    let mut d = Array2::<C64>::zeros((dim, dim));
    let r = beta.norm();
    if r == 0.0 {
        d.diag_mut().fill(ONE);
        return Ok(d);
    }
    let x = r * r;
    let ph_lower = beta / r;
    let ph_upper = -beta.conj() / r;
    let ln_r = r.ln();
    let mut ln_h0 = -0.5 * x;
    let mut h = vec![0.0f64; dim];
    for k in 0..dim {
        if k > 0 {
            ln_h0 += ln_r - 0.5 * (k as f64).ln();
        }
        let len = dim - k;
        h[0] = ln_h0.exp();
        if len > 1 {
            h[1] = h[0] * (1.0 + k as f64 - x) / ((k + 1) as f64).sqrt();
        }
        for n in 1..len.saturating_sub(1) {
            let nf = n as f64;
            let kf = k as f64;
            h[n + 1] = ((2.0 * nf + 1.0 + kf - x) * h[n] - (nf * (nf + kf)).sqrt() * h[n - 1])
                / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
        }
        let pl = ph_lower.powu(k as u32);
        let pu = ph_upper.powu(k as u32);
        for n in 0..len {
            d[[n + k, n]] = pl * h[n];
            if k > 0 {
                d[[n, n + k]] = pu * h[n];
            }
        }
    }
    Ok(d)
}

/// Displacement operator `D(β)` in a `dim`-level truncation.
pub fn displacement_matrix(dim: usize, beta: C64) -> Result<QOperator> {
    QOperator::from_dense(Dims::Single(dim), &displacement_dense(dim, beta)?)
}

/// Block-diagonal operator whose mode-b block for `m` photons in mode a is
/// `D(m * amp)`.
pub fn conditional_displacement(dims: ModeDims, amp: C64) -> Result<QOperator> {
    check_finite(amp, "displacement amplitude")?;
    let mut entries = Vec::new();
    for m in 0..dims.n_a {
        let block = displacement_dense(dims.n_b, amp * m as f64)?;
        let off = m * dims.n_b;
        for ((i, j), v) in block.indexed_iter() {
            if *v != ZERO {
                entries.push((off + i, off + j, *v));
            }
        }
    }
    QOperator::from_triplets(Dims::Two(dims), &entries)
}

/// A state vector with explicit layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Dims,
    amps: Array1<C64>,
}

impl PureState {
    pub fn new(dims: Dims, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != dims.size() {
            return Err(Error::Shape(format!(
                "{} amplitudes for dimension {}",
                amps.len(),
                dims.size()
            )));
        }
        Ok(Self { dims, amps })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Array1<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(self.amps.as_slice().expect("contiguous"))
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() < tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a null vector".into()));
        }
        Ok(Self { dims: self.dims, amps: self.amps.mapv(|z| z / n) })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn to_density(&self) -> DensityMatrix {
        let n = self.amps.len();
        let m = Array2::from_shape_fn((n, n), |(i, j)| self.amps[i] * self.amps[j].conj());
        DensityMatrix { dims: self.dims, matrix: m }
    }

    /// Amplitudes reshaped to an `n_a × n_b` matrix.
    pub fn as_matrix(&self) -> Result<Array2<C64>> {
        let md = self.dims.two()?;
        Ok(self.amps.clone().into_shape_with_order((md.n_a, md.n_b)).expect("size checked"))
    }
}

pub fn fock(dim: usize, n: usize) -> Result<PureState> {
    check_dim(dim)?;
    if n >= dim {
        return Err(Error::InvalidArgument(format!("level {n} outside dimension {dim}")));
    }
    let mut v = Array1::zeros(dim);
    v[n] = ONE;
    PureState::new(Dims::Single(dim), v)
}

/// `|m⟩_a |j⟩_b`
pub fn fock_state(dims: ModeDims, m: usize, j: usize) -> Result<PureState> {
    if m >= dims.n_a || j >= dims.n_b {
        return Err(Error::InvalidArgument(format!("|{m},{j}⟩ outside {dims:?}")));
    }
    let mut v = Array1::zeros(dims.total());
    v[dims.index(m, j)] = ONE;
    PureState::new(Dims::Two(dims), v)
}

/// Coherent state, renormalized after truncation.
pub fn coherent_state(dim: usize, alpha: C64) -> Result<PureState> {
    check_dim(dim)?;
    check_finite(alpha, "coherent amplitude")?;
    let mut v = Array1::<C64>::zeros(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        v[n] = c;
    }
    PureState::new(Dims::Single(dim), v)?.normalized()
}

/// `ψ_a ⊗ ψ_b`
pub fn product_state(a: &PureState, b: &PureState) -> Result<PureState> {
    let (Dims::Single(na), Dims::Single(nb)) = (a.dims, b.dims) else {
        return Err(Error::Shape("product_state expects single-mode factors".into()));
    };
    let md = ModeDims::new(na, nb)?;
    let v = Array1::from_shape_fn(md.total(), |i| a.amps[i / nb] * b.amps[i % nb]);
    PureState::new(Dims::Two(md), v)
}

/// A density matrix with explicit layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Dims,
    matrix: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(dims: Dims, matrix: Array2<C64>) -> Result<Self> {
        let n = dims.size();
        if matrix.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "density matrix {:?} for dimension {n}",
                matrix.dim()
            )));
        }
        Ok(Self { dims, matrix })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::max_abs_diff(&self.matrix, &linalg::conj_transpose(&self.matrix))
    }

    /// `(ρ + ρ†)/2`
    pub fn symmetrized(&self) -> Self {
        let h = (&self.matrix + &linalg::conj_transpose(&self.matrix)).mapv(|z| z * 0.5);
        Self { dims: self.dims, matrix: h }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let vals = linalg::eigvalsh(&self.symmetrized().matrix)?;
        Ok(vals.first().copied().unwrap_or(0.0))
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Check Hermiticity, unit trace and positivity against the given tolerances.
    pub fn validate(&self, herm_tol: f64, trace_tol: f64, pos_tol: f64) -> Result<()> {
        let h = self.hermiticity_residual();
        if h > herm_tol {
            return Err(Error::InvalidState(format!("Hermiticity residual {h:.3e}")));
        }
        let t = self.trace();
        if (t - ONE).norm() > trace_tol {
            return Err(Error::InvalidState(format!("trace {t}")));
        }
        let lo = self.min_eigenvalue()?;
        if lo < -pos_tol {
            return Err(Error::InvalidState(format!("minimum eigenvalue {lo:.3e}")));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate(1e-10, 1e-8, 1e-8).is_ok()
    }
}

/// Reduced state of one mode.
pub fn partial_trace(rho: &DensityMatrix, keep: Mode) -> Result<DensityMatrix> {
    let md = rho.dims.two()?;
    let (na, nb) = (md.n_a, md.n_b);
    let r = &rho.matrix;
    let out = match keep {
        Mode::A => Array2::from_shape_fn((na, na), |(m, n)| {
            (0..nb).map(|j| r[[m * nb + j, n * nb + j]]).sum()
        }),
        Mode::B => Array2::from_shape_fn((nb, nb), |(j, k)| {
            (0..na).map(|m| r[[m * nb + j, m * nb + k]]).sum()
        }),
    };
    DensityMatrix::new(Dims::Single(md.of(keep)), out)
}

/// Reduced state of one mode from a pure two-mode state.
pub fn partial_trace_pure(psi: &PureState, keep: Mode) -> Result<DensityMatrix> {
    let md = psi.dims.two()?;
    let m = psi.as_matrix()?;
    let out = match keep {
        Mode::A => m.dot(&linalg::conj_transpose(&m)),
        Mode::B => m.t().dot(&m.mapv(|z| z.conj())),
    };
    DensityMatrix::new(Dims::Single(md.of(keep)), out)
}

/// Anything with per-level populations.
pub trait Populations {
    fn dims(&self) -> Dims;
    /// Occupation probabilities of `mode` (ignored for single-mode states).
    fn populations(&self, mode: Mode) -> Vec<f64>;
}

impl Populations for PureState {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn populations(&self, mode: Mode) -> Vec<f64> {
        match self.dims {
            Dims::Single(_) => self.amps.iter().map(|z| z.norm_sqr()).collect(),
            Dims::Two(md) => {
                let mut p = vec![0.0; md.of(mode)];
                for (i, z) in self.amps.iter().enumerate() {
                    let k = match mode {
                        Mode::A => i / md.n_b,
                        Mode::B => i % md.n_b,
                    };
                    p[k] += z.norm_sqr();
                }
                p
            }
        }
    }
}

impl Populations for DensityMatrix {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn populations(&self, mode: Mode) -> Vec<f64> {
        let diag = self.matrix.diag();
        match self.dims {
            Dims::Single(_) => diag.iter().map(|z| z.re).collect(),
            Dims::Two(md) => {
                let mut p = vec![0.0; md.of(mode)];
                for (i, z) in diag.iter().enumerate() {
                    let k = match mode {
                        Mode::A => i / md.n_b,
                        Mode::B => i % md.n_b,
                    };
                    p[k] += z.re;
                }
                p
            }
        }
    }
}

fn top_two(p: &[f64]) -> f64 {
    p.iter().rev().take(2).sum()
}

/// Population in the two highest levels of one mode.
pub fn truncation_leakage_in<S: Populations>(state: &S, mode: Mode) -> f64 {
    top_two(&state.populations(mode))
}

/// Population in the two highest levels, summed over every mode.
pub fn truncation_leakage<S: Populations>(state: &S) -> f64 {
    match state.dims() {
        Dims::Single(_) => top_two(&state.populations(Mode::A)),
        Dims::Two(_) => {
            truncation_leakage_in(state, Mode::A) + truncation_leakage_in(state, Mode::B)
        }
    }
}
