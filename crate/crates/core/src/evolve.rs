//! Time propagation of pure states and density matrices, Liouvillian steady
//! states, and the four-step geometric gate.

use std::f64::consts::PI;

use log::debug;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Dims, DensityMatrix, Mode, ModeDims, Populations, PureState, QOperator};
use crate::linalg::{self, SparseLu, C64, IM, ONE, ZERO};
use crate::model::{self, DerivedParams, Superoperator, SystemParams};
use crate::ode::{self, OdeOptions, OdeStats};

pub const PURE_RTOL: f64 = 1e-9;
pub const MIXED_RTOL: f64 = 1e-8;

/// Sample times for an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
    /// Relative integrator tolerance; the state-type default when absent.
    #[serde(default)]
    pub rtol: Option<f64>,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        let g = Self { t_start, t_end, n_samples, rtol: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = Some(rtol);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time grid needs t_end > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidArgument("time grid needs at least 2 samples".into()));
        }
        if let Some(r) = self.rtol {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidArgument(format!("rtol {r} out of range")));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        ode::linspace(self.t_start, self.t_end, self.n_samples)
    }
}

/// Sampled trajectory with its bookkeeping.
#[derive(Debug, Clone)]
pub struct EvolveResult<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Vector norm (pure states) or trace (density matrices) before any
    /// renormalization.
    pub norms: Vec<f64>,
    /// Top-two-level populations of modes a and b at each sample.
    pub leakage: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
    pub stats: OdeStats,
}

impl<S> EvolveResult<S> {
    pub fn final_state(&self) -> &S {
        self.states.last().expect("at least one sample")
    }

    pub fn max_leakage(&self, mode: Mode) -> f64 {
        let i = match mode {
            Mode::A => 0,
            Mode::B => 1,
        };
        self.leakage.iter().map(|l| l[i]).fold(0.0, f64::max)
    }
}

fn leakage_pair<S: Populations>(s: &S) -> [f64; 2] {
    match s.dims() {
        Dims::Single(_) => [fock::truncation_leakage(s), 0.0],
        Dims::Two(_) => [
            fock::truncation_leakage_in(s, Mode::A),
            fock::truncation_leakage_in(s, Mode::B),
        ],
    }
}

fn propagate_pure(
    h: &QOperator,
    psi0: &PureState,
    grid: &TimeGrid,
    renormalize: bool,
    expect_unitary: bool,
) -> Result<EvolveResult<PureState>> {
    grid.validate()?;
    if psi0.dims() != h.dims() {
        return Err(Error::Shape(format!("state {:?} vs operator {:?}", psi0.dims(), h.dims())));
    }
    let rtol = grid.rtol.unwrap_or(PURE_RTOL);
    let times = grid.times();
    let dims = psi0.dims();
    let mut out = EvolveResult {
        times: times.clone(),
        states: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        leakage: Vec::with_capacity(times.len()),
        warnings: Vec::new(),
        stats: OdeStats::default(),
    };
    let m = h.matrix();
    let y0 = psi0.amplitudes().to_vec();
    let stats = ode::integrate(
        |_, y, dy| {
            linalg::spmv(m, y, dy);
            for v in dy.iter_mut() {
                *v *= -IM;
            }
        },
        &times,
        &y0,
        &OdeOptions::with_rtol(rtol),
        |_, t, y| {
            let raw = PureState::new(dims, Array1::from(y.to_vec()))?;
            let norm = raw.norm();
            if expect_unitary && (norm - 1.0).abs() > 10.0 * rtol {
                out.warnings.push(format!("norm drift {:.3e} at t={t}", norm - 1.0));
            }
            if let Some(prev) = out.norms.last() {
                if !expect_unitary && norm > prev * (1.0 + 10.0 * rtol) {
                    out.warnings.push(format!("norm increased from {prev} to {norm} at t={t}"));
                }
            }
            let state = if renormalize && norm > 0.0 { raw.normalized()? } else { raw };
            out.leakage.push(leakage_pair(&state));
            out.norms.push(norm);
            out.states.push(state);
            Ok(())
        },
    )?;
    out.stats = stats;
    for w in &out.warnings {
        debug!("{w}");
    }
    Ok(out)
}

/// Propagate `iψ' = Hψ` and sample on the grid.
pub fn schrodinger_evolve(h: &QOperator, psi0: &PureState, grid: &TimeGrid) -> Result<EvolveResult<PureState>> {
    let herm = h.hermiticity_residual();
    if herm > 1e-12 {
        return Err(Error::InvalidArgument(format!("H is not Hermitian (residual {herm:.3e})")));
    }
    if !psi0.is_normalized(1e-10) {
        return Err(Error::InvalidState(format!("initial norm {}", psi0.norm())));
    }
    propagate_pure(h, psi0, grid, false, true)
}

/// `H − i(γ_a/2) a†a − i(γ_b/2) b†b`; on a single mode both rates act on it.
pub fn effective_hamiltonian(h: &QOperator, gamma_a: f64, gamma_b: f64) -> Result<QOperator> {
    if !(gamma_a >= 0.0 && gamma_b >= 0.0) {
        return Err(Error::InvalidArgument("decay rates must be >= 0".into()));
    }
    let mut heff = h.clone();
    match h.dims() {
        Dims::Single(d) => {
            let g = gamma_a + gamma_b;
            if g > 0.0 {
                heff = heff.add(&fock::number(d)?.scale(C64::new(0.0, -g / 2.0)))?;
            }
        }
        Dims::Two(md) => {
            for (g, mode) in [(gamma_a, Mode::A), (gamma_b, Mode::B)] {
                if g > 0.0 {
                    let n = fock::embed(&fock::number(md.of(mode))?, mode, md)?;
                    heff = heff.add(&n.scale(C64::new(0.0, -g / 2.0)))?;
                }
            }
        }
    }
    Ok(heff)
}

/// Deterministic no-jump evolution under the non-Hermitian effective
/// Hamiltonian. Raw norms are always recorded; with `renormalize` the
/// sampled states are rescaled to unit norm.
pub fn nonhermitian_evolve(
    h: &QOperator,
    decay: (f64, f64),
    psi0: &PureState,
    grid: &TimeGrid,
    renormalize: bool,
) -> Result<EvolveResult<PureState>> {
    let heff = effective_hamiltonian(h, decay.0, decay.1)?;
    let unitary = decay.0 == 0.0 && decay.1 == 0.0;
    propagate_pure(&heff, psi0, grid, renormalize, unitary)
}

/// Integrate the master equation and sample Hermitian-symmetrized states.
pub fn lindblad_evolve(
    l: &Superoperator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<EvolveResult<DensityMatrix>> {
    grid.validate()?;
    if rho0.dims() != l.dims() {
        return Err(Error::Shape(format!("state {:?} vs generator {:?}", rho0.dims(), l.dims())));
    }
    rho0.validate(1e-10, 1e-8, 1e-8)?;
    let rtol = grid.rtol.unwrap_or(MIXED_RTOL);
    let times = grid.times();
    let dims = rho0.dims();
    let d = dims.size();
    let mut out = EvolveResult {
        times: times.clone(),
        states: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        leakage: Vec::with_capacity(times.len()),
        warnings: Vec::new(),
        stats: OdeStats::default(),
    };
    let y0 = model::vectorize(rho0.matrix()).to_vec();
    let stats = ode::integrate(
        |_, y, dy| l.apply(y, dy),
        &times,
        &y0,
        &OdeOptions::with_rtol(rtol),
        |_, t, y| {
            let m = model::unvectorize(&Array1::from(y.to_vec()), d);
            let rho = DensityMatrix::new(dims, m)?.symmetrized();
            let tr = rho.trace();
            if (tr - ONE).norm() > 1e-8 {
                out.warnings.push(format!("trace drift {:.3e} at t={t}", (tr - ONE).norm()));
            }
            let lo = rho.min_eigenvalue()?;
            if lo < -1e-6 {
                out.warnings.push(format!("negative eigenvalue {lo:.3e} at t={t}"));
            }
            out.leakage.push(leakage_pair(&rho));
            out.norms.push(tr.re);
            out.states.push(rho);
            Ok(())
        },
    )?;
    out.stats = stats;
    for w in &out.warnings {
        debug!("{w}");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteadyStateMethod {
    /// Direct below `direct_limit` unknowns, iterative above.
    Auto,
    /// Sparse LU of the full trace-constrained generator.
    Direct,
    /// GMRES preconditioned by the photon-number block structure of mode a.
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    pub method: SteadyStateMethod,
    pub direct_limit: usize,
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { method: SteadyStateMethod::Auto, direct_limit: 4_000, tol: 1e-13, restart: 80, max_iter: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub rho: DensityMatrix,
    /// `‖L·vec(ρ)‖₂`
    pub residual: f64,
    /// Residual divided by the Frobenius norm of `L`.
    pub relative_residual: f64,
    pub method: SteadyStateMethod,
    pub iterations: usize,
}

/// Stationary state of `L` (trace-row replacement + sparse solve).
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    steady_state_with(l, &SteadyStateOptions::default()).map(|r| r.rho)
}

pub fn steady_state_with(l: &Superoperator, opts: &SteadyStateOptions) -> Result<SteadyStateReport> {
    let d = l.hilbert_dim();
    let n = d * d;
    let method = match (opts.method, l.dims()) {
        (SteadyStateMethod::Auto, Dims::Two(md)) if n > opts.direct_limit && md.n_a > 1 => {
            SteadyStateMethod::Iterative
        }
        (SteadyStateMethod::Auto, _) => SteadyStateMethod::Direct,
        (SteadyStateMethod::Iterative, Dims::Single(_)) => SteadyStateMethod::Direct,
        (m, _) => m,
    };
    let (x, iterations) = match method {
        SteadyStateMethod::Iterative => solve_iterative(l, l.dims().two()?, opts)?,
        _ => (solve_direct(l)?, 0),
    };
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NoUniqueSteadyState("solution is not finite".into()));
    }
    let m = model::unvectorize(&Array1::from(x), d);
    let rho = DensityMatrix::new(l.dims(), m)?.symmetrized();
    let tr = rho.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::NoUniqueSteadyState("solution has zero trace".into()));
    }
    let rho = DensityMatrix::new(l.dims(), rho.into_matrix().mapv(|z| z / tr))?;
    let v = model::vectorize(rho.matrix());
    let mut lv = vec![ZERO; n];
    l.apply(v.as_slice().expect("contiguous"), &mut lv);
    let residual = linalg::vec_norm(&lv);
    let relative_residual = residual / l.norm().max(f64::MIN_POSITIVE);
    debug!("steady state via {method:?}: residual {residual:.3e} ({iterations} iterations)");
    if relative_residual > 1e-8 {
        return Err(Error::NoUniqueSteadyState(format!(
            "residual {residual:.3e} is too large; the generator is likely singular or ill-conditioned"
        )));
    }
    Ok(SteadyStateReport { rho, residual, relative_residual, method, iterations })
}

fn trace_constrained_triplets(l: &Superoperator) -> Vec<(usize, usize, C64)> {
    let d = l.hilbert_dim();
    let mut entries = Vec::with_capacity(l.matrix().nnz() + d);
    for (col, vec) in l.matrix().outer_iterator().enumerate() {
        for (row, v) in vec.iter() {
            if row != 0 {
                entries.push((row, col, *v));
            }
        }
    }
    for i in 0..d {
        entries.push((0, i + i * d, ONE));
    }
    entries
}

fn solve_direct(l: &Superoperator) -> Result<Vec<C64>> {
    let d = l.hilbert_dim();
    let lu = SparseLu::new(d * d, &trace_constrained_triplets(l))?;
    let mut x = vec![ZERO; d * d];
    x[0] = ONE;
    lu.solve_in_place(&mut x);
    Ok(x)
}

/// Block structure of `L` over mode-a coherences `(m, n)`.
struct BlockPreconditioner {
    md: ModeDims,
    /// LU of each diagonal block, indexed `m * n_a + n`.
    lus: Vec<SparseLu>,
    /// Couplings from block `(m+1, n+1)` into block `(m, n)`, local indices.
    down: Vec<Vec<(usize, usize, C64)>>,
}

impl BlockPreconditioner {
    fn new(l: &Superoperator, md: ModeDims) -> Result<Self> {
        let (na, nb) = (md.n_a, md.n_b);
        let d = md.total();
        let split = |g: usize| {
            let (r, c) = (g % d, g / d);
            ((r / nb, c / nb), (r % nb) + (c % nb) * nb)
        };
        let mut diag: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); na * na];
        let mut down: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); na * na];
        for (col, vec) in l.matrix().outer_iterator().enumerate() {
            let ((cm, cn), cl) = split(col);
            for (row, v) in vec.iter() {
                if row == 0 {
                    continue;
                }
                let ((rm, rn), rl) = split(row);
                if (cm, cn) == (rm, rn) {
                    diag[rm * na + rn].push((rl, cl, *v));
                } else if (cm, cn) == (rm + 1, rn + 1) {
                    down[rm * na + rn].push((rl, cl, *v));
                }
            }
        }
        for j in 0..nb {
            diag[0].push((0, j + j * nb, ONE));
        }
        let lus = diag
            .iter()
            .map(|e| SparseLu::new(nb * nb, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { md, lus, down })
    }

    fn apply(&self, y: &[C64], x: &mut [C64]) {
        let (na, nb) = (self.md.n_a, self.md.n_b);
        let d = self.md.total();
        let bs = nb * nb;
        let global = |m: usize, n: usize, loc: usize| (m * nb + loc % nb) + (n * nb + loc / nb) * d;
        let mut local = vec![ZERO; bs];
        for s in (0..na).rev() {
            let mut blocks: Vec<(usize, usize)> = (s..na).map(|n| (s, n)).collect();
            blocks.extend((s + 1..na).map(|m| (m, s)));
            for (m, n) in blocks {
                for (loc, v) in local.iter_mut().enumerate() {
                    *v = y[global(m, n, loc)];
                }
                if m + 1 < na && n + 1 < na {
                    for &(rl, cl, v) in &self.down[m * na + n] {
                        local[rl] -= v * x[global(m + 1, n + 1, cl)];
                    }
                }
                if (m, n) == (0, 0) {
                    let mut tr = ZERO;
                    for k in 1..na {
                        for j in 0..nb {
                            tr += x[global(k, k, j + j * nb)];
                        }
                    }
                    local[0] -= tr;
                }
                self.lus[m * na + n].solve_in_place(&mut local);
                for (loc, v) in local.iter().enumerate() {
                    x[global(m, n, loc)] = *v;
                }
            }
        }
    }
}

fn solve_iterative(l: &Superoperator, md: ModeDims, opts: &SteadyStateOptions) -> Result<(Vec<C64>, usize)> {
    let d = md.total();
    let n = d * d;
    let pre = BlockPreconditioner::new(l, md)?;
    let apply = |x: &[C64], y: &mut [C64]| {
        l.apply(x, y);
        y[0] = (0..d).map(|i| x[i + i * d]).sum();
    };
    let mut b = vec![ZERO; n];
    b[0] = ONE;
    let (x, rep) = linalg::gmres(apply, |y, x| pre.apply(y, x), &b, None, opts.tol, opts.restart, opts.max_iter)?;
    Ok((x, rep.iterations))
}

/// Quadrature phases of the four gate steps, in application order.
pub const GEOMETRIC_PHASES: [f64; 4] = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];

#[derive(Debug, Clone, Copy)]
pub struct GeometricOptions {
    /// Apply `γ_a`, `γ_b` from the parameters through the effective
    /// non-Hermitian Hamiltonian.
    pub open_system: bool,
    /// Rescale to unit norm between steps (open runs with nonzero decay).
    pub renormalize: bool,
    pub rtol: f64,
    pub samples_per_step: usize,
}

impl Default for GeometricOptions {
    fn default() -> Self {
        Self { open_system: false, renormalize: true, rtol: PURE_RTOL, samples_per_step: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct GeometricResult {
    pub state: PureState,
    pub steps: Vec<EvolveResult<PureState>>,
    /// Norm at the end of each step before any rescaling.
    pub step_norms: Vec<f64>,
    pub reduced_a: DensityMatrix,
    pub reduced_b: DensityMatrix,
    /// Largest top-two populations of modes a and b over all samples.
    pub max_leakage: [f64; 2],
}

/// The four-step conditional-displacement sequence at `Δ_b = 0`.
pub fn geometric_sequence(
    params: &SystemParams,
    derived: &DerivedParams,
    t_step: f64,
    psi0: &PureState,
    opts: &GeometricOptions,
) -> Result<GeometricResult> {
    if params.delta_b != 0.0 {
        return Err(Error::InvalidScenario(format!(
            "the geometric gate needs delta_b = 0, got {}",
            params.delta_b
        )));
    }
    if !(t_step > 0.0) {
        return Err(Error::InvalidArgument(format!("step duration must be positive, got {t_step}")));
    }
    let md = psi0.dims().two()?;
    let grid = TimeGrid::new(0.0, t_step, opts.samples_per_step.max(2))?.with_rtol(opts.rtol);
    let decay = if opts.open_system { (params.gamma_a, params.gamma_b) } else { (0.0, 0.0) };
    let lossy = decay.0 > 0.0 || decay.1 > 0.0;

    let mut psi = psi0.clone();
    let mut steps = Vec::with_capacity(4);
    let mut step_norms = Vec::with_capacity(4);
    let mut max_leakage = [0.0f64; 2];
    for &theta in &GEOMETRIC_PHASES {
        let h = model::build_h_tra(params, &derived.with_theta(theta), md, true)?;
        let res = if lossy {
            nonhermitian_evolve(&h, decay, &psi, &grid, false)?
        } else {
            schrodinger_evolve(&h, &psi, &grid)?
        };
        let last = res.final_state().clone();
        step_norms.push(last.norm());
        for l in &res.leakage {
            max_leakage[0] = max_leakage[0].max(l[0]);
            max_leakage[1] = max_leakage[1].max(l[1]);
        }
        psi = if lossy && opts.renormalize { last.normalized()? } else { last };
        steps.push(res);
    }
    let reduced_a = fock::partial_trace_pure(&psi, Mode::A)?;
    let reduced_b = fock::partial_trace_pure(&psi, Mode::B)?;
    Ok(GeometricResult { state: psi, steps, step_norms, reduced_a, reduced_b, max_leakage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, fock_state};

    fn dims() -> ModeDims {
        ModeDims::new(3, 4).unwrap()
    }

    #[test]
    fn diagonal_hamiltonian_phases() {
        let md = dims();
        let p = SystemParams { omega_a: 0.7, delta_b: 1.3, chi: 0.2, ..Default::default() };
        let h = model::build_h_lab(&p, md).unwrap();
        let psi0 = fock_state(md, 1, 2).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 6).unwrap();
        let res = schrodinger_evolve(&h, &psi0, &grid).unwrap();
        let e = 0.7 + 2.0 * 1.3 + 2.0 * 0.2;
        for (t, s) in res.times.iter().zip(&res.states) {
            let z = s.amplitudes()[md.index(1, 2)];
            assert!((z - (-IM * e * t).exp()).norm() < 1e-8);
        }
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn nonhermitian_decay_and_dark_vacuum() {
        let md = dims();
        let h = QOperator::zeros(Dims::Two(md));
        let grid = TimeGrid::new(0.0, 3.0, 7).unwrap();
        let res = nonhermitian_evolve(&h, (1.0, 0.0), &fock_state(md, 1, 0).unwrap(), &grid, false).unwrap();
        for (t, n) in res.times.iter().zip(&res.norms) {
            assert!((n * n - (-t).exp()).abs() < 1e-8);
        }
        let vac = fock_state(md, 0, 0).unwrap();
        let res = nonhermitian_evolve(&h, (0.5, 0.7), &vac, &grid, false).unwrap();
        assert_eq!(res.final_state(), &vac);
    }

    #[test]
    fn zero_decay_matches_schrodinger() {
        let md = dims();
        let p = SystemParams { omega_drive_b: C64::new(0.3, 0.0), chi: 0.1, ..Default::default() };
        let h = model::build_h_lab(&p, md).unwrap();
        let psi0 = fock_state(md, 1, 0).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 5).unwrap();
        let a = schrodinger_evolve(&h, &psi0, &grid).unwrap();
        let b = nonhermitian_evolve(&h, (0.0, 0.0), &psi0, &grid, false).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn single_mode_decay_steady_state() {
        let p = SystemParams { gamma_a: 1.0, ..Default::default() };
        let h = QOperator::zeros(Dims::Single(2));
        let l = model::build_liouvillian(&h, &p, Dims::Single(2)).unwrap();
        let rho = steady_state(&l).unwrap();
        assert!((rho.matrix()[[0, 0]] - ONE).norm() < 1e-12);
        assert!(rho.matrix()[[1, 1]].norm() < 1e-12);
    }

    #[test]
    fn thermal_steady_state() {
        let p = SystemParams { gamma_b: 1.0, nbar_b: 2.0, ..Default::default() };
        let d = 30;
        let h = QOperator::zeros(Dims::Single(d));
        let l = model::build_liouvillian(&h, &p, Dims::Single(d)).unwrap();
        let rho = steady_state(&l).unwrap();
        let mean: f64 = (0..d).map(|n| n as f64 * rho.matrix()[[n, n]].re).sum();
        // truncated Bose–Einstein distribution
        let q: f64 = 2.0 / 3.0;
        let z: f64 = (0..d).map(|n| q.powi(n as i32)).sum();
        let expect: f64 = (0..d).map(|n| n as f64 * q.powi(n as i32)).sum::<f64>() / z;
        assert!((mean - expect).abs() < 1e-8);
        assert!((mean - 2.0).abs() < 1e-3);
    }

    #[test]
    fn lindblad_single_decay() {
        let p = SystemParams { gamma_a: 0.4, ..Default::default() };
        let h = QOperator::zeros(Dims::Single(3));
        let l = model::build_liouvillian(&h, &p, Dims::Single(3)).unwrap();
        let rho0 = fock::fock(3, 1).unwrap().to_density();
        let res = lindblad_evolve(&l, &rho0, &TimeGrid::new(0.0, 4.0, 5).unwrap()).unwrap();
        for (t, r) in res.times.iter().zip(&res.states) {
            assert!((r.matrix()[[1, 1]].re - (-0.4 * t).exp()).abs() < 1e-7);
        }
        let still = model::build_liouvillian(&h, &SystemParams::default(), Dims::Single(3)).unwrap();
        let res = lindblad_evolve(&still, &rho0, &TimeGrid::new(0.0, 4.0, 3).unwrap()).unwrap();
        assert_eq!(res.final_state(), &rho0);
    }

    #[test]
    fn iterative_matches_direct() {
        let md = ModeDims::new(3, 8).unwrap();
        let p = SystemParams {
            chi: 0.05,
            omega_drive_a: C64::new(0.02, 0.0),
            omega_drive_b: C64::new(6.0, 0.0),
            gamma_a: 0.1,
            gamma_b: 0.05,
            nbar_b: 0.5,
            ..Default::default()
        };
        let mut d = model::derive(&p).unwrap();
        d.delta_a_prime = model::single_photon_resonance(&p, d.g0).unwrap();
        let h = model::build_h_blockade(&p, &d, md, false).unwrap();
        let l = model::build_liouvillian(&h, &p, Dims::Two(md)).unwrap();
        let direct = steady_state_with(&l, &SteadyStateOptions { method: SteadyStateMethod::Direct, ..Default::default() }).unwrap();
        let iter = steady_state_with(&l, &SteadyStateOptions { method: SteadyStateMethod::Iterative, ..Default::default() }).unwrap();
        assert!(linalg::max_abs_diff(direct.rho.matrix(), iter.rho.matrix()) < 1e-10);
        assert!(iter.residual < 1e-9 && direct.residual < 1e-9);
    }

    #[test]
    fn geometric_rejects_detuning_and_free_limit() {
        let md = ModeDims::new(4, 6).unwrap();
        let psi0 = fock::product_state(&coherent_state(4, C64::new(0.5, 0.0)).unwrap(), &fock::fock(6, 0).unwrap()).unwrap();
        let p = SystemParams { delta_b: 0.5, ..Default::default() };
        let d = DerivedParams::from_beta(&p, ZERO);
        assert!(matches!(
            geometric_sequence(&p, &d, 1.0, &psi0, &GeometricOptions::default()),
            Err(Error::InvalidScenario(_))
        ));
        let p = SystemParams { delta_b: 0.0, omega_a: 0.3, ..Default::default() };
        let d = DerivedParams::from_beta(&p, ZERO);
        let res = geometric_sequence(&p, &d, 0.5, &psi0, &GeometricOptions::default()).unwrap();
        for m in 0..4 {
            let z = res.state.amplitudes()[md.index(m, 0)];
            let expect = psi0.amplitudes()[md.index(m, 0)] * (-IM * 0.3 * 2.0 * m as f64).exp();
            assert!((z - expect).norm() < 1e-8);
        }
    }
}
