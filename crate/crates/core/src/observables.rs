//! Expectation values, photon statistics, Wigner functions, fidelities and
//! the `|±⟩_a` measurement.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Dims, DensityMatrix, Mode, Populations, PureState, QOperator};
use crate::linalg::{self, C64, ZERO};

/// Borrowed pure or mixed state.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(s: &'a PureState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    pub fn dims(&self) -> Dims {
        match self {
            StateRef::Pure(p) => p.dims(),
            StateRef::Mixed(r) => r.dims(),
        }
    }

    fn populations(&self, mode: Mode) -> Vec<f64> {
        match self {
            StateRef::Pure(p) => p.populations(mode),
            StateRef::Mixed(r) => r.populations(mode),
        }
    }
}

/// `⟨ψ|O|ψ⟩` or `Tr(O ρ)`.
pub fn expectation<'a>(op: &QOperator, state: impl Into<StateRef<'a>>) -> Result<C64> {
    let state = state.into();
    if op.dims() != state.dims() {
        return Err(Error::Shape(format!("operator {:?} vs state {:?}", op.dims(), state.dims())));
    }
    Ok(match state {
        StateRef::Pure(p) => {
            let v = op.apply(p.amplitudes())?;
            p.amplitudes().iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
        }
        StateRef::Mixed(r) => {
            let rho = r.matrix();
            let mut acc = ZERO;
            for (i, row) in op.matrix().outer_iterator().enumerate() {
                for (j, v) in row.iter() {
                    acc += v * rho[[j, i]];
                }
            }
            acc
        }
    })
}

/// `⟨n⟩` of one mode (the mode label is ignored for single-mode states).
pub fn mean_excitation<'a>(mode: Mode, state: impl Into<StateRef<'a>>) -> f64 {
    state.into().populations(mode).iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// `⟨a†a†aa⟩ / ⟨a†a⟩²` of the chosen mode.
pub fn g2_zero(rho: &DensityMatrix, mode: Mode) -> Result<f64> {
    let p = rho.populations(mode);
    let n1: f64 = p.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let n2: f64 = p.iter().enumerate().map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p).sum();
    if !(n1.abs() > 1e-300) {
        return Err(Error::UndefinedStatistic("mean occupation vanishes".into()));
    }
    Ok(n2 / (n1 * n1))
}

/// Rectangular sampling of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl PhaseGrid {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self { re_min: -half_width, re_max: half_width, im_min: -half_width, im_max: half_width, n_re: n, n_im: n }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite());
        if !finite || self.re_max < self.re_min || self.im_max < self.im_min || self.n_re == 0 || self.n_im == 0 {
            return Err(Error::InvalidArgument(format!("bad phase-space grid {self:?}")));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            vec![lo]
        } else {
            crate::ode::linspace(lo, hi, n)
        }
    }

    pub fn re_axis(&self) -> Vec<f64> {
        Self::axis(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_axis(&self) -> Vec<f64> {
        Self::axis(self.im_min, self.im_max, self.n_im)
    }

    pub fn spacing(&self) -> (f64, f64) {
        let d = |lo: f64, hi: f64, n: usize| if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
        (d(self.re_min, self.re_max, self.n_re), d(self.im_min, self.im_max, self.n_im))
    }

    /// Evaluate `f` at every grid point; rows follow the imaginary axis.
    pub fn evaluate<F>(&self, f: F) -> Result<Array2<f64>>
    where
        F: Fn(C64) -> Result<f64> + Sync,
    {
        self.validate()?;
        let re = self.re_axis();
        let im = self.im_axis();
        let vals: Vec<f64> = (0..self.n_im * self.n_re)
            .into_par_iter()
            .map(|k| f(C64::new(re[k % self.n_re], im[k / self.n_re])))
            .collect::<Result<_>>()?;
        Ok(Array2::from_shape_vec((self.n_im, self.n_re), vals).expect("size matches"))
    }
}

/// Real field over a [`PhaseGrid`]; `values[[i_im, i_re]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub grid: PhaseGrid,
    pub values: Array2<f64>,
    /// Set when the source state populates its top Fock levels.
    pub truncation_warning: Option<String>,
}

impl WignerGrid {
    /// Riemann-sum integral.
    pub fn integral(&self) -> f64 {
        let (dx, dy) = self.grid.spacing();
        self.values.sum() * dx * dy
    }

    pub fn max_abs_diff(&self, other: &WignerGrid) -> Result<f64> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::Shape("Wigner grids differ in size".into()));
        }
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Grid points of the strict local maxima above `threshold`.
    pub fn peaks(&self, threshold: f64) -> Vec<C64> {
        let (ni, nr) = self.values.dim();
        let re = self.grid.re_axis();
        let im = self.grid.im_axis();
        let mut out = Vec::new();
        for i in 0..ni {
            for j in 0..nr {
                let v = self.values[[i, j]];
                if v <= threshold {
                    continue;
                }
                let mut is_max = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if a >= 0 && b >= 0 && (a as usize) < ni && (b as usize) < nr && self.values[[a as usize, b as usize]] >= v {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    out.push(C64::new(re[j], im[i]));
                }
            }
        }
        out
    }
}

/// `W(ξ) = (2/π) Tr[ρ D(2ξ) (−1)^n]` of a single-mode state.
pub fn wigner_point(rho: &DensityMatrix, xi: C64) -> Result<f64> {
    let Dims::Single(d) = rho.dims() else {
        return Err(Error::Shape("Wigner function needs a single-mode state".into()));
    };
    let disp = fock::displacement_dense(d, xi * 2.0)?;
    let r = rho.matrix();
    let mut acc = ZERO;
    for kp in 0..d {
        let sign = if kp % 2 == 0 { 1.0 } else { -1.0 };
        let mut col = ZERO;
        for k in 0..d {
            col += r[[kp, k]] * disp[[k, kp]];
        }
        acc += col * sign;
    }
    let w = acc * (2.0 / PI);
    if w.im.abs() > 1e-10 {
        return Err(Error::InvalidState(format!("Wigner value has imaginary part {:.3e}", w.im)));
    }
    Ok(w.re)
}

pub fn wigner(rho: &DensityMatrix, grid: &PhaseGrid) -> Result<WignerGrid> {
    let values = grid.evaluate(|xi| wigner_point(rho, xi))?;
    let leak = fock::truncation_leakage(rho);
    let truncation_warning = (leak > fock::LEAKAGE_WARN)
        .then(|| format!("state populates the truncation edge ({leak:.3e})"));
    Ok(WignerGrid { grid: *grid, values, truncation_warning })
}

/// `|⟨ψ1|ψ2⟩|`
pub fn overlap_fidelity(psi1: &PureState, psi2: &PureState) -> Result<f64> {
    Ok(psi1.inner(psi2)?.norm())
}

fn psd_sqrt(m: &Array2<C64>) -> Result<Array2<C64>> {
    let (vals, vecs) = linalg::eigh(m)?;
    let s: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let scaled = Array2::from_shape_fn(vecs.dim(), |(i, j)| vecs[[i, j]] * s[j]);
    Ok(scaled.dot(&linalg::conj_transpose(&vecs)))
}

/// `Tr √(√ρ1 ρ2 √ρ1)`
pub fn uhlmann_fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dims() != rho2.dims() {
        return Err(Error::Shape(format!("{:?} vs {:?}", rho1.dims(), rho2.dims())));
    }
    for r in [rho1, rho2] {
        let lo = r.min_eigenvalue()?;
        if lo < -1e-8 {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {lo:.3e}")));
        }
    }
    let s = psd_sqrt(&rho1.symmetrized().into_matrix())?;
    let m = s.dot(rho2.matrix()).dot(&s);
    let m = (&m + &linalg::conj_transpose(&m)).mapv(|z| z * 0.5);
    let vals = linalg::eigvalsh(&m)?;
    Ok(vals.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// Outcome of projecting mode a onto `|±⟩ = (|0⟩ ± |1⟩)/√2`.
#[derive(Debug, Clone)]
pub struct PlusMinusOutcome {
    pub p_plus: f64,
    pub p_minus: f64,
    /// Population of mode a outside `{|0⟩, |1⟩}`.
    pub p_outside: f64,
    /// Normalized conditional states of mode b; `None` when the branch
    /// probability is below 1e-12.
    pub rho_b_plus: Option<DensityMatrix>,
    pub rho_b_minus: Option<DensityMatrix>,
}

pub const BRANCH_FLOOR: f64 = 1e-12;

/// Project mode a of a two-mode state onto `|±⟩_a`.
pub fn measure_plus_minus<'a>(state: impl Into<StateRef<'a>>) -> Result<PlusMinusOutcome> {
    let state = state.into();
    let md = state.dims().two()?;
    if md.n_a < 2 {
        return Err(Error::Shape("mode a needs at least two levels".into()));
    }
    let nb = md.n_b;
    let pops = state.populations(Mode::A);
    let p_outside: f64 = pops[2..].iter().sum();
    let branch = |sign: f64| -> Array2<C64> {
        match state {
            StateRef::Pure(p) => {
                let a = p.amplitudes();
                let phi: Array1<C64> =
                    Array1::from_shape_fn(nb, |j| (a[j] + a[nb + j] * sign) / 2f64.sqrt());
                Array2::from_shape_fn((nb, nb), |(j, k)| phi[j] * phi[k].conj())
            }
            StateRef::Mixed(r) => {
                let r = r.matrix();
                Array2::from_shape_fn((nb, nb), |(j, k)| {
                    (r[[j, k]] + (r[[j, nb + k]] + r[[nb + j, k]]) * sign + r[[nb + j, nb + k]]) * 0.5
                })
            }
        }
    };
    let finish = |m: Array2<C64>| -> Result<(f64, Option<DensityMatrix>)> {
        let p = m.diag().iter().map(|z| z.re).sum::<f64>();
        if p < BRANCH_FLOOR {
            return Ok((p.max(0.0), None));
        }
        let rho = DensityMatrix::new(Dims::Single(nb), m.mapv(|z| z / p))?.symmetrized();
        Ok((p, Some(rho)))
    };
    let (p_plus, rho_b_plus) = finish(branch(1.0))?;
    let (p_minus, rho_b_minus) = finish(branch(-1.0))?;
    Ok(PlusMinusOutcome { p_plus, p_minus, p_outside, rho_b_plus, rho_b_minus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, fock, fock_state, number, product_state, ModeDims};
    use crate::linalg::ONE;

    #[test]
    fn expectation_examples() {
        let n = number(5).unwrap();
        assert_eq!(expectation(&n, &fock(5, 0).unwrap()).unwrap(), ZERO);
        let eta = C64::new(0.6, -0.8);
        let s = product_state(&fock(2, 1).unwrap(), &coherent_state(40, eta).unwrap()).unwrap();
        assert!((mean_excitation(Mode::B, &s) - eta.norm_sqr()).abs() < 1e-12);
        let nb = fock::embed(&number(40).unwrap(), Mode::B, ModeDims::new(2, 40).unwrap()).unwrap();
        let rho = s.to_density();
        assert!((expectation(&nb, &rho).unwrap().re - eta.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn g2_examples() {
        let coh = coherent_state(60, C64::new(1.3, 0.4)).unwrap().to_density();
        assert!((g2_zero(&coh, Mode::A).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(g2_zero(&fock(4, 1).unwrap().to_density(), Mode::A).unwrap(), 0.0);
        assert_eq!(g2_zero(&fock(4, 2).unwrap().to_density(), Mode::A).unwrap(), 0.5);
        assert!(matches!(g2_zero(&fock(4, 0).unwrap().to_density(), Mode::A), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn wigner_points() {
        let vac = fock(20, 0).unwrap().to_density();
        assert!((wigner_point(&vac, ZERO).unwrap() - 2.0 / PI).abs() < 1e-15);
        let alpha = C64::new(1.1, -0.7);
        let coh = coherent_state(50, alpha).unwrap().to_density();
        assert!((wigner_point(&coh, alpha).unwrap() - 2.0 / PI).abs() < 1e-12);
        assert!(wigner_point(&fock_state(ModeDims::new(2, 2).unwrap(), 0, 0).unwrap().to_density(), ZERO).is_err());
    }

    #[test]
    fn fidelities() {
        let a = coherent_state(30, C64::new(0.5, 0.2)).unwrap();
        assert!((overlap_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(overlap_fidelity(&fock(3, 0).unwrap(), &fock(3, 1).unwrap()).unwrap(), 0.0);
        let b = coherent_state(30, C64::new(-0.3, 0.9)).unwrap();
        let u = uhlmann_fidelity(&a.to_density(), &b.to_density()).unwrap();
        assert!((u - overlap_fidelity(&a, &b).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn measurement_examples() {
        let md = ModeDims::new(3, 10).unwrap();
        let phi = coherent_state(10, C64::new(0.4, 0.1)).unwrap();
        let plus = PureState::new(
            Dims::Single(3),
            ndarray::array![C64::new(0.5f64.sqrt(), 0.0), C64::new(0.5f64.sqrt(), 0.0), ZERO],
        )
        .unwrap();
        let s = product_state(&plus, &phi).unwrap();
        let out = measure_plus_minus(&s).unwrap();
        assert!((out.p_plus - 1.0).abs() < 1e-14 && out.p_minus < 1e-14);
        assert!(out.rho_b_minus.is_none());
        let rb = out.rho_b_plus.unwrap();
        assert!(linalg::max_abs_diff(rb.matrix(), phi.to_density().matrix()) < 1e-14);

        let vac = fock_state(md, 0, 0).unwrap();
        for st in [measure_plus_minus(&vac).unwrap(), measure_plus_minus(&vac.to_density()).unwrap()] {
            assert!((st.p_plus - 0.5).abs() < 1e-15 && (st.p_minus - 0.5).abs() < 1e-15);
            let rb = st.rho_b_minus.unwrap();
            assert!((rb.matrix()[[0, 0]] - ONE).norm() < 1e-14);
        }
    }
}
