//! Parameters, Hamiltonians in each frame, and the Lindblad generator.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Dims, ModeDims, QOperator, TwoModeOps};
use crate::linalg::{self, SpMat, C64, IM, ZERO};
use crate::ode::{self, OdeOptions};

/// Complex numbers in configs may be written as `1.5`, `[1.5, 0.2]` or
/// `{"re": 1.5, "im": 0.2}`.
pub mod complex_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
        Named { re: f64, #[serde(default)] im: f64 },
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(re) => Complex64::new(re, 0.0),
            Repr::Pair([re, im]) => Complex64::new(re, im),
            Repr::Named { re, im } => Complex64::new(re, im),
        })
    }
}

/// Physical parameters of the driven two-mode system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub omega_a: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub chi: f64,
    #[serde(with = "complex_serde")]
    pub omega_drive_a: C64,
    #[serde(with = "complex_serde")]
    pub omega_drive_b: C64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub nbar_a: f64,
    pub nbar_b: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_a: 0.0,
            delta_a: 0.0,
            delta_b: 1.0,
            chi: 0.0,
            omega_drive_a: ZERO,
            omega_drive_b: ZERO,
            gamma_a: 0.0,
            gamma_b: 0.0,
            nbar_a: 0.0,
            nbar_b: 0.0,
        }
    }
}

impl SystemParams {
    pub fn check_rates(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("nbar_a", self.nbar_a),
            ("nbar_b", self.nbar_b),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_dissipative(&self) -> bool {
        self.gamma_a > 0.0 || self.gamma_b > 0.0
    }
}

/// Quantities of the displaced frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    #[serde(with = "complex_serde")]
    pub beta_ss: C64,
    pub theta: f64,
    pub g0: f64,
    pub omega_a_prime: f64,
    pub delta_a_prime: f64,
}

impl DerivedParams {
    /// Frame quantities for an externally fixed displacement `beta`.
    pub fn from_beta(params: &SystemParams, beta: C64) -> Self {
        let mag2 = beta.norm_sqr();
        Self {
            beta_ss: beta,
            theta: if beta == ZERO { 0.0 } else { beta.arg() },
            g0: params.chi * beta.norm(),
            omega_a_prime: params.omega_a + params.chi * mag2,
            delta_a_prime: params.delta_a + params.chi * mag2,
        }
    }

    /// Same frame with the quadrature phase replaced.
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

/// Steady-state displacement and the couplings it induces.
pub fn derive(params: &SystemParams) -> Result<DerivedParams> {
    let denom = C64::new(params.delta_b, -params.gamma_b / 2.0);
    if denom == ZERO {
        return Err(Error::DegenerateParameters(
            "delta_b and gamma_b both vanish; the drive has no steady state".into(),
        ));
    }
    Ok(DerivedParams::from_beta(params, params.omega_drive_b / denom))
}

/// Right-hand side of the classical displacement equation.
pub fn displacement_rate(params: &SystemParams, beta: C64, omega_b: C64) -> C64 {
    -C64::new(params.gamma_b / 2.0, params.delta_b) * beta + IM * omega_b
}

/// Integrate `dβ/dt = -(iΔ_b + γ_b/2)β + iΩ_b(t)` on `t_grid`.
pub fn solve_displacement_ode<S>(
    params: &SystemParams,
    omega_b_schedule: S,
    t_grid: &[f64],
    beta0: C64,
) -> Result<Vec<C64>>
where
    S: Fn(f64) -> C64,
{
    if t_grid.is_empty() {
        return Ok(vec![]);
    }
    for &t in t_grid {
        let w = omega_b_schedule(t);
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("drive schedule is {w} at t={t}")));
        }
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut bad = None;
    ode::integrate(
        |t, y, dy| {
            let w = omega_b_schedule(t);
            if !(w.re.is_finite() && w.im.is_finite()) {
                bad = Some(t);
            }
            dy[0] = displacement_rate(params, y[0], w);
        },
        t_grid,
        &[beta0],
        &OdeOptions { rtol: 1e-12, atol: 1e-14, h_init: None, max_steps: 10_000_000 },
        |_, _, y| {
            out.push(y[0]);
            Ok(())
        },
    )?;
    if let Some(t) = bad {
        return Err(Error::InvalidArgument(format!("drive schedule is not finite at t={t}")));
    }
    Ok(out)
}

fn sum_terms(dims: ModeDims, terms: &[(C64, &QOperator)]) -> Result<QOperator> {
    let mut h = QOperator::zeros(Dims::Two(dims));
    for (c, op) in terms {
        if *c != ZERO {
            h = h.add(&op.scale(*c))?;
        }
    }
    Ok(h)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `ω_a a†a + Δ_b b†b + χ a†a b†b + Ω_b b† + Ω_b* b`
pub fn build_h_lab(params: &SystemParams, dims: ModeDims) -> Result<QOperator> {
    let ops = TwoModeOps::new(dims)?;
    let bd = ops.b.adjoint();
    sum_terms(
        dims,
        &[
            (re(params.omega_a), &ops.n_a),
            (re(params.delta_b), &ops.n_b),
            (re(params.chi), &ops.n_a_n_b),
            (params.omega_drive_b, &bd),
            (params.omega_drive_b.conj(), &ops.b),
        ],
    )
}

/// Displaced-frame Hamiltonian
/// `ω'_a a†a + Δ_b b†b − g0 a†a(b†e^{iθ} + b e^{−iθ}) [+ χ a†a b†b]`.
pub fn build_h_tra(
    params: &SystemParams,
    derived: &DerivedParams,
    dims: ModeDims,
    drop_cross_kerr: bool,
) -> Result<QOperator> {
    let ops = TwoModeOps::new(dims)?;
    let coupling = coupling_term(&ops, derived.theta)?;
    let chi = if drop_cross_kerr { 0.0 } else { params.chi };
    sum_terms(
        dims,
        &[
            (re(derived.omega_a_prime), &ops.n_a),
            (re(params.delta_b), &ops.n_b),
            (re(-derived.g0), &coupling),
            (re(chi), &ops.n_a_n_b),
        ],
    )
}

/// `a†a (b† e^{iθ} + b e^{−iθ})`
fn coupling_term(ops: &TwoModeOps, theta: f64) -> Result<QOperator> {
    let ph = C64::from_polar(1.0, theta);
    let quad = ops.b.adjoint().scale(ph).add(&ops.b.scale(ph.conj()))?;
    ops.n_a.matmul(&quad)
}

/// Weakly driven Hamiltonian in the frame of the mode-a drive, with θ = 0:
/// `Δ'_a a†a + Δ_b b†b − g0 a†a(b† + b) [+ χ a†a b†b] + Ω_a a† + Ω_a* a`.
pub fn build_h_blockade(
    params: &SystemParams,
    derived: &DerivedParams,
    dims: ModeDims,
    drop_cross_kerr: bool,
) -> Result<QOperator> {
    let ops = TwoModeOps::new(dims)?;
    let coupling = coupling_term(&ops, 0.0)?;
    let ad = ops.a.adjoint();
    let chi = if drop_cross_kerr { 0.0 } else { params.chi };
    sum_terms(
        dims,
        &[
            (re(derived.delta_a_prime), &ops.n_a),
            (re(params.delta_b), &ops.n_b),
            (re(-derived.g0), &coupling),
            (re(chi), &ops.n_a_n_b),
            (params.omega_drive_a, &ad),
            (params.omega_drive_a.conj(), &ops.a),
        ],
    )
}

/// Closed-form energy of the undriven blockade Hamiltonian for `m` photons
/// in mode a and `j` quanta in the displaced mode b.
pub fn eigen_energy(m: usize, j: usize, params: &SystemParams, derived: &DerivedParams) -> Result<f64> {
    let mf = m as f64;
    let w = params.delta_b + mf * params.chi;
    if w == 0.0 {
        return Err(Error::DegenerateParameters(format!("delta_b + {m} chi vanishes")));
    }
    Ok(derived.delta_a_prime * mf + w * j as f64 - derived.g0 * derived.g0 * mf * mf / w)
}

/// Lindblad generator acting on column-stacked density matrices (CSC).
#[derive(Debug, Clone)]
pub struct Superoperator {
    dims: Dims,
    matrix: SpMat,
}

impl Superoperator {
    pub fn from_sparse(dims: Dims, matrix: SpMat) -> Result<Self> {
        let n = dims.size() * dims.size();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::Shape(format!(
                "superoperator {}x{} for Hilbert dimension {}",
                matrix.rows(),
                matrix.cols(),
                dims.size()
            )));
        }
        let matrix = if matrix.is_csc() { matrix } else { matrix.to_csc() };
        Ok(Self { dims, matrix })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Hilbert-space dimension `D`; the generator acts on `D²` entries.
    pub fn hilbert_dim(&self) -> usize {
        self.dims.size()
    }

    pub fn matrix(&self) -> &SpMat {
        &self.matrix
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        linalg::spmv(&self.matrix, x, y);
    }

    /// Frobenius norm of the generator matrix.
    pub fn norm(&self) -> f64 {
        self.matrix.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `vec(L(ρ))` for a dense ρ, returned as a matrix.
    pub fn apply_to(&self, rho: &ndarray::Array2<C64>) -> Result<ndarray::Array2<C64>> {
        let d = self.hilbert_dim();
        if rho.dim() != (d, d) {
            return Err(Error::Shape(format!("{:?} against dimension {d}", rho.dim())));
        }
        let x = vectorize(rho);
        let mut y = Array1::zeros(d * d);
        self.apply(x.as_slice().expect("contiguous"), y.as_slice_mut().expect("contiguous"));
        Ok(unvectorize(&y, d))
    }
}

/// Column-stacking: entry `(r, c)` sits at `r + c·D`.
pub fn vectorize(rho: &ndarray::Array2<C64>) -> Array1<C64> {
    let d = rho.nrows();
    Array1::from_shape_fn(d * d, |k| rho[[k % d, k / d]])
}

pub fn unvectorize(v: &Array1<C64>, d: usize) -> ndarray::Array2<C64> {
    ndarray::Array2::from_shape_fn((d, d), |(r, c)| v[r + c * d])
}

fn kron(a: &SpMat, b: &SpMat) -> SpMat {
    let a = a.to_csr();
    let b = b.to_csr();
    sprs::kronecker_product(a.view(), b.view())
}

/// Generator from a Hamiltonian and weighted collapse operators.
pub fn liouvillian_from_collapse(h: &QOperator, collapse: &[(f64, QOperator)]) -> Result<Superoperator> {
    let dims = h.dims();
    let d = dims.size();
    let eye = SpMat::eye(d);
    let hm = h.matrix();
    let ht = h.transpose();
    let mut l: SpMat = (&kron(&eye, hm) - &kron(ht.matrix(), &eye)).map(|v| v * -IM);
    for (rate, c) in collapse {
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!("collapse rate must be >= 0, got {rate}")));
        }
        if *rate == 0.0 {
            continue;
        }
        if c.dims() != dims {
            return Err(Error::Shape("collapse operator does not match the Hamiltonian".into()));
        }
        let cd = c.adjoint();
        let cdc = cd.matmul(c)?;
        let cbar = c.matrix().map(|v| v.conj());
        let jump = kron(&cbar, c.matrix());
        let left = kron(&eye, cdc.matrix());
        let right = kron(cdc.transpose().matrix(), &eye);
        let half = C64::new(0.5, 0.0);
        let term = &(&jump - &left.map(|v| v * half)) - &right.map(|v| v * half);
        l = &l + &term.map(|v| v * *rate);
    }
    Superoperator::from_sparse(dims, l)
}

/// Standard Lindblad generator `−i[H,ρ] + Σ_k r_k D[c_k]ρ` with damping and
/// thermal excitation of both modes.
///
/// On a single-mode space the one mode carries both rate pairs.
pub fn build_liouvillian(h: &QOperator, params: &SystemParams, dims: Dims) -> Result<Superoperator> {
    params.check_rates()?;
    if h.dims() != dims {
        return Err(Error::Shape(format!("H has {:?}, expected {dims:?}", h.dims())));
    }
    let mut collapse = Vec::new();
    let (a, b) = match dims {
        Dims::Single(d) => (fock::annihilator(d)?, fock::annihilator(d)?),
        Dims::Two(md) => {
            let ops = TwoModeOps::new(md)?;
            (ops.a, ops.b)
        }
    };
    collapse.push((params.gamma_a * (params.nbar_a + 1.0), a.clone()));
    collapse.push((params.gamma_a * params.nbar_a, a.adjoint()));
    collapse.push((params.gamma_b * (params.nbar_b + 1.0), b.clone()));
    collapse.push((params.gamma_b * params.nbar_b, b.adjoint()));
    liouvillian_from_collapse(h, &collapse)
}

/// Coupling-regime indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub single_photon_strong: bool,
    pub strong_dispersive: bool,
    pub deep_strong: bool,
    pub resolved_sideband: bool,
}

pub fn classify_regime(g0: f64, omega_b: f64, gamma_a: f64) -> RegimeFlags {
    RegimeFlags {
        single_photon_strong: g0 > gamma_a,
        strong_dispersive: omega_b > 0.0 && g0 * g0 / omega_b > gamma_a,
        deep_strong: g0 > omega_b,
        resolved_sideband: omega_b > gamma_a,
    }
}

/// `Δ'_a` that puts the one-photon state on resonance with the drive.
pub fn single_photon_resonance(params: &SystemParams, g0: f64) -> Result<f64> {
    let w = params.delta_b + params.chi;
    if w == 0.0 {
        return Err(Error::DegenerateParameters("delta_b + chi vanishes".into()));
    }
    Ok(g0 * g0 / w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn params() -> SystemParams {
        SystemParams {
            omega_a: 0.3,
            delta_a: -0.2,
            delta_b: 1.0,
            chi: 0.05,
            omega_drive_a: C64::new(0.02, 0.01),
            omega_drive_b: C64::new(2.0, 0.5),
            gamma_a: 0.01,
            gamma_b: 0.02,
            nbar_a: 0.1,
            nbar_b: 0.3,
        }
    }

    #[test]
    fn derive_cases() {
        let p = SystemParams { omega_drive_b: ZERO, ..params() };
        let d = derive(&p).unwrap();
        assert_eq!((d.beta_ss, d.g0), (ZERO, 0.0));
        let p = SystemParams { omega_drive_b: ONE, delta_b: 1.0, gamma_b: 0.0, ..params() };
        let d = derive(&p).unwrap();
        assert_eq!((d.beta_ss, d.theta), (ONE, 0.0));
        let p = SystemParams { delta_b: 0.0, gamma_b: 0.0, ..params() };
        assert!(matches!(derive(&p), Err(Error::DegenerateParameters(_))));
        let p = SystemParams { chi: 0.005, omega_drive_b: re(100.0), gamma_b: 0.0, ..params() };
        assert!((derive(&p).unwrap().g0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lab_hamiltonian_elements() {
        let dims = ModeDims::new(3, 4).unwrap();
        let zero = SystemParams {
            delta_b: 0.0,
            ..SystemParams::default()
        };
        assert_eq!(build_h_lab(&zero, dims).unwrap().matrix().nnz(), 0);
        let p = params();
        let h = build_h_lab(&p, dims).unwrap();
        let i = dims.index(1, 1);
        assert!((h.get(i, i) - re(p.omega_a + p.delta_b + p.chi)).norm() < 1e-15);
        assert!(h.hermiticity_residual() < 1e-14);
    }

    #[test]
    fn displaced_frame_elements() {
        let dims = ModeDims::new(3, 5).unwrap();
        let p = params();
        let d = derive(&p).unwrap();
        let h_tra = build_h_tra(&p, &d, dims, false).unwrap();
        let h_app = build_h_tra(&p, &d, dims, true).unwrap();
        for m in 0..3 {
            for j in 0..5 {
                let i = dims.index(m, j);
                let expect = d.omega_a_prime * m as f64 + p.delta_b * j as f64 + p.chi * (m * j) as f64;
                assert!((h_tra.get(i, i).re - expect).abs() < 1e-12);
            }
        }
        let off = h_app.get(dims.index(1, 1), dims.index(1, 0));
        assert!((off - C64::from_polar(-d.g0, d.theta)).norm() < 1e-14);
        let ops = TwoModeOps::new(dims).unwrap();
        let rebuilt = h_app.add(&ops.n_a_n_b.scale_re(p.chi)).unwrap();
        assert!(linalg::max_abs_diff(&rebuilt.to_dense(), &h_tra.to_dense()) < 1e-15);
        let comm = ops.n_a.commutator(&h_app).unwrap();
        assert!(comm.to_dense().iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn blockade_spectrum_matches_closed_form() {
        let p = SystemParams { omega_drive_a: ZERO, chi: 0.05, ..params() };
        let mut d = derive(&p).unwrap();
        d.g0 = 0.6;
        d.delta_a_prime = single_photon_resonance(&p, d.g0).unwrap();
        assert!(eigen_energy(1, 0, &p, &d).unwrap().abs() < 1e-15);
        assert_eq!(eigen_energy(0, 3, &p, &d).unwrap(), 3.0 * p.delta_b);

        let dims = ModeDims::new(3, 60).unwrap();
        let h = build_h_blockade(&p, &d, dims, false).unwrap();
        let (vals, vecs) = linalg::eigh(&h.to_dense()).unwrap();
        // identify each closed-form level by its mode-a block
        for m in 0..3 {
            for j in 0..4 {
                let e = eigen_energy(m, j, &p, &d).unwrap();
                let hit = vals.iter().enumerate().any(|(k, v)| {
                    let weight: f64 = (0..60).map(|jj| vecs[[dims.index(m, jj), k]].norm_sqr()).sum();
                    (v - e).abs() < 1e-8 && weight > 0.5
                });
                assert!(hit, "no eigenvalue near E({m},{j}) = {e}");
            }
        }
    }

    #[test]
    fn blockade_drive_element() {
        let dims = ModeDims::new(3, 4).unwrap();
        let p = params();
        let d = derive(&p).unwrap();
        let h = build_h_blockade(&p, &d, dims, false).unwrap();
        assert_eq!(h.get(dims.index(1, 0), dims.index(0, 0)), p.omega_drive_a);
        assert!(h.hermiticity_residual() < 1e-14);
    }

    #[test]
    fn liouvillian_conserves_trace_and_reduces_to_commutator() {
        let dims = ModeDims::new(3, 4).unwrap();
        let p = params();
        let h = build_h_lab(&p, dims).unwrap();
        let l = build_liouvillian(&h, &p, Dims::Two(dims)).unwrap();
        let d = dims.total();
        let rho = ndarray::Array2::from_shape_fn((d, d), |(i, j)| {
            C64::new(((i * 7 + j * 3) % 5) as f64, (i as f64 - j as f64) * 0.1)
        });
        let rho = (&rho + &linalg::conj_transpose(&rho)).mapv(|z| z * 0.5);
        let out = l.apply_to(&rho).unwrap();
        assert!(out.diag().sum().norm() < 1e-10);

        let closed = SystemParams { gamma_a: 0.0, gamma_b: 0.0, ..p };
        let l0 = build_liouvillian(&h, &closed, Dims::Two(dims)).unwrap();
        let hd = h.to_dense();
        let expect = (hd.dot(&rho) - rho.dot(&hd)).mapv(|z| z * -IM);
        assert!(linalg::max_abs_diff(&l0.apply_to(&rho).unwrap(), &expect) < 1e-12);

        let neg = SystemParams { gamma_a: -1.0, ..p };
        assert!(build_liouvillian(&h, &neg, Dims::Two(dims)).is_err());
    }

    #[test]
    fn regime_flags() {
        let f = classify_regime(0.0, 1.0, 0.1);
        assert!(!f.single_photon_strong && !f.strong_dispersive && !f.deep_strong);
        let f = classify_regime(2.0, 1.0, 0.1);
        assert!(f.single_photon_strong && f.strong_dispersive && f.deep_strong && f.resolved_sideband);
        let f = classify_regime(0.5, 1.0, 0.1);
        assert!(f.strong_dispersive && !f.deep_strong);
    }

    #[test]
    fn displacement_ode() {
        let p = SystemParams { delta_b: 1.0, gamma_b: 0.5, omega_drive_b: re(0.7), ..params() };
        let d = derive(&p).unwrap();
        assert!(displacement_rate(&p, d.beta_ss, p.omega_drive_b).norm() < 1e-12);
        let grid = ode::linspace(0.0, 100.0, 11);
        let beta = solve_displacement_ode(&p, |_| p.omega_drive_b, &grid, ZERO).unwrap();
        assert!((beta.last().unwrap() - d.beta_ss).norm() < 1e-8);

        let free = SystemParams { gamma_b: 0.0, ..p };
        let beta = solve_displacement_ode(&free, |_| ZERO, &grid, ONE).unwrap();
        assert!(beta.iter().all(|b| (b.norm() - 1.0).abs() < 1e-9));
        assert!(solve_displacement_ode(&p, |_| C64::new(f64::NAN, 0.0), &grid, ZERO).is_err());
    }
}
