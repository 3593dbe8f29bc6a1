//! Closed-form results used as oracles and for curves that need no
//! simulation. Nothing here touches matrices.

use std::f64::consts::PI;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Dims, ModeDims, PureState};
use crate::linalg::{C64, IM, ZERO};
use crate::model::{DerivedParams, SystemParams};
use crate::observables::{PhaseGrid, WignerGrid};

/// `⟨α|β⟩ = exp(−|α|²/2 + βα* − |β|²/2)`
pub fn coherent_overlap(alpha: C64, beta: C64) -> C64 {
    (-0.5 * alpha.norm_sqr() + beta * alpha.conj() - 0.5 * beta.norm_sqr()).exp()
}

fn nonzero(v: f64, what: &str) -> Result<()> {
    if v == 0.0 || !v.is_finite() {
        Err(Error::DegenerateParameters(format!("{what} must be finite and nonzero")))
    } else {
        Ok(())
    }
}

/// `1 − e^{−iωt}`
fn ring(omega: f64, t: f64) -> C64 {
    C64::new(1.0, 0.0) - (-IM * omega * t).exp()
}

/// `|⟨ψ_ext(t)|ψ_app(t)⟩|` for an initial `|m⟩_a|0⟩_b`.
pub fn fidelity_closed_form(m: u32, chi: f64, beta_ss_mag: f64, delta_b: f64, t: f64) -> Result<f64> {
    let mf = m as f64;
    nonzero(delta_b, "delta_b")?;
    nonzero(delta_b + mf * chi, "delta_b + m chi")?;
    let k = mf * chi * beta_ss_mag;
    let d = ring(delta_b, t) * (k / delta_b) - ring(delta_b + mf * chi, t) * (k / (delta_b + mf * chi));
    Ok((-0.5 * d.norm_sqr()).exp())
}

/// Quantities of the conditional-displacement protocol at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatProtocolValues {
    /// Conditional displacement without the cross-Kerr term.
    #[serde(with = "crate::model::complex_serde")]
    pub eta: C64,
    /// `ϑ = λ − ω'_a t`
    pub theta_phase: f64,
    /// `λ = (g0/Δ_b)² (Δ_b t − sin Δ_b t)`
    pub lambda_kerr: f64,
    /// One-photon phase with the cross-Kerr term kept.
    pub zeta: f64,
    /// One-photon displacement with the cross-Kerr term kept.
    #[serde(with = "crate::model::complex_serde")]
    pub eta_exact: C64,
    pub p_plus: f64,
    pub p_minus: f64,
}

/// `P± = ½[1 ± e^{−|η|²/2} cos ϑ]`
pub fn plus_minus_probabilities(eta: C64, vartheta: f64) -> (f64, f64) {
    let p = 0.5 * (1.0 + (-0.5 * eta.norm_sqr()).exp() * vartheta.cos());
    (p, 1.0 - p)
}

pub fn cat_protocol(g0: f64, chi: f64, delta_b: f64, omega_a_prime: f64, theta: f64, t: f64) -> Result<CatProtocolValues> {
    nonzero(delta_b, "delta_b")?;
    let ph = C64::from_polar(1.0, theta);
    let eta = ring(delta_b, t) * ph * (g0 / delta_b);
    let lambda_kerr = (g0 / delta_b).powi(2) * (delta_b * t - (delta_b * t).sin());
    let theta_phase = lambda_kerr - omega_a_prime * t;
    let (zeta, eta_exact) = exact_phase_displacement(1, g0, chi, delta_b, theta, t)?;
    let (p_plus, p_minus) = plus_minus_probabilities(eta, theta_phase);
    Ok(CatProtocolValues { eta, theta_phase, lambda_kerr, zeta, eta_exact, p_plus, p_minus })
}

/// `(ζ, η)` of the exact `m`-photon state with `w = Δ_b + mχ`:
/// `ζ = (m g0 / w)² (w t − sin w t)`, `η = (m g0 e^{iθ}/w)(1 − e^{−iwt})`.
pub fn exact_phase_displacement(m: u32, g0: f64, chi: f64, delta_b: f64, theta: f64, t: f64) -> Result<(f64, C64)> {
    let mf = m as f64;
    let w = delta_b + mf * chi;
    if m == 0 {
        return Ok((0.0, ZERO));
    }
    nonzero(w, "delta_b + m chi")?;
    let zeta = (mf * g0 / w).powi(2) * (w * t - (w * t).sin());
    let eta = ring(w, t) * C64::from_polar(mf * g0 / w, theta);
    Ok((zeta, eta))
}

/// Closed-form state `e^{iφ}|m⟩_a|η⟩_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedState {
    pub m: u32,
    pub phase: f64,
    #[serde(with = "crate::model::complex_serde")]
    pub displacement: C64,
}

impl ClosedState {
    /// Amplitudes in a truncated basis (mode-b coherent state renormalized).
    pub fn materialize(&self, dims: ModeDims) -> Result<PureState> {
        let m = self.m as usize;
        if m >= dims.n_a {
            return Err(Error::InvalidArgument(format!("|{m}⟩ outside n_a = {}", dims.n_a)));
        }
        let coh = fock::coherent_state(dims.n_b, self.displacement)?;
        let ph = C64::from_polar(1.0, self.phase);
        let mut v = Array1::zeros(dims.total());
        for j in 0..dims.n_b {
            v[dims.index(m, j)] = coh.amplitudes()[j] * ph;
        }
        PureState::new(Dims::Two(dims), v)
    }
}

/// State at `t` under the full displaced-frame Hamiltonian from `|m⟩_a|0⟩_b`.
pub fn u_exact_state(m: u32, params: &SystemParams, derived: &DerivedParams, t: f64) -> Result<ClosedState> {
    let (zeta, eta) = exact_phase_displacement(m, derived.g0, params.chi, params.delta_b, derived.theta, t)?;
    Ok(ClosedState { m, phase: zeta - m as f64 * derived.omega_a_prime * t, displacement: eta })
}

/// Same without the cross-Kerr term.
pub fn u_app_state(m: u32, params: &SystemParams, derived: &DerivedParams, t: f64) -> Result<ClosedState> {
    let (zeta, eta) = exact_phase_displacement(m, derived.g0, 0.0, params.delta_b, derived.theta, t)?;
    Ok(ClosedState { m, phase: zeta - m as f64 * derived.omega_a_prime * t, displacement: eta })
}

/// `Σ_k c_k |α e^{iφ_k}⟩` representation of `e^{i(τ/2)n(n−1)}|α⟩` at
/// `τ = 2πM/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KittenDecomposition {
    pub n: u32,
    pub m: u32,
    pub phases: Vec<f64>,
    pub coefficients: Vec<(f64, f64)>,
}

impl KittenDecomposition {
    pub fn n_components(&self) -> usize {
        self.phases.len()
    }

    pub fn coefficient(&self, k: usize) -> C64 {
        let (re, im) = self.coefficients[k];
        C64::new(re, im)
    }

    pub fn tau(&self) -> f64 {
        2.0 * PI * self.m as f64 / self.n as f64
    }

    pub fn components(&self, alpha: C64) -> Vec<(C64, C64)> {
        (0..self.n_components())
            .map(|k| (self.coefficient(k), alpha * C64::from_polar(1.0, self.phases[k])))
            .collect()
    }

    /// `‖Σ c_k |α_k⟩‖²` including the coherent-state overlaps.
    pub fn norm_sqr(&self, alpha: C64) -> f64 {
        let comps = self.components(alpha);
        let mut acc = ZERO;
        for (ck, ak) in &comps {
            for (cl, al) in &comps {
                acc += ck.conj() * cl * coherent_overlap(*ak, *al);
            }
        }
        acc.re
    }

    /// Untruncated coherent amplitudes summed in a `dim`-level basis.
    pub fn superposition(&self, alpha: C64, dim: usize) -> Result<PureState> {
        let comps = self.components(alpha);
        let mut v = Array1::<C64>::zeros(dim);
        for (c, a) in comps {
            let mut amp = C64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
            for n in 0..dim {
                if n > 0 {
                    amp = amp * a / (n as f64).sqrt();
                }
                v[n] += c * amp;
            }
        }
        PureState::new(Dims::Single(dim), v)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `c_k = (1/2N) Σ_{n<2N} exp{−i(π/N)[kn − Mn(n−1)]}`, `φ_k = kπ/N`.
pub fn kitten_coefficients(n: u32, m: u32) -> Result<KittenDecomposition> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("N and M must be positive".into()));
    }
    if gcd(n, m) != 1 {
        return Err(Error::InvalidArgument(format!("N={n} and M={m} are not coprime")));
    }
    let nf = n as f64;
    let two_n = 2 * n as u64;
    let mut phases = Vec::with_capacity(two_n as usize);
    let mut coefficients = Vec::with_capacity(two_n as usize);
    for k in 0..two_n {
        let mut c = ZERO;
        for j in 0..two_n {
            // reduce the exponent mod 2N before scaling to keep it exact
            let e = (k * j + two_n * two_n - (m as u64 * j * j.saturating_sub(1)) % two_n) % two_n;
            c += (-IM * PI * e as f64 / nf).exp();
        }
        let c = c / (2.0 * nf);
        phases.push(PI * k as f64 / nf);
        coefficients.push((c.re, c.im));
    }
    Ok(KittenDecomposition { n, m, phases, coefficients })
}

/// `e^{i(τ/2)n(n−1)}|α⟩` in a `dim`-level basis (coherent amplitudes
/// renormalized after truncation).
pub fn kerr_state(alpha: C64, tau: f64, dim: usize) -> Result<PureState> {
    let coh = fock::coherent_state(dim, alpha)?;
    let v = Array1::from_shape_fn(dim, |n| {
        let nn = (n * n.saturating_sub(1)) as f64;
        coh.amplitudes()[n] * C64::from_polar(1.0, 0.5 * tau * nn)
    });
    PureState::new(Dims::Single(dim), v)
}

/// `τ = 4 g0² t²` after the four-step sequence with step `t`.
pub fn geometric_tau(g0: f64, t_step: f64) -> f64 {
    4.0 * g0 * g0 * t_step * t_step
}

/// Step duration reaching a given `τ`.
pub fn geometric_step_for_tau(g0: f64, tau: f64) -> Result<f64> {
    nonzero(g0, "g0")?;
    Ok((tau.max(0.0)).sqrt() / (2.0 * g0.abs()))
}

/// Linear phase `4ω'_a t − 2g0²t²` multiplying `n` after the sequence.
pub fn geometric_free_phase(omega_a_prime: f64, g0: f64, t_step: f64) -> f64 {
    4.0 * omega_a_prime * t_step - 2.0 * g0 * g0 * t_step * t_step
}

/// Wigner function of `Σ c_k |α_k⟩` at `ξ`.
pub fn wigner_superposition_point(components: &[(C64, C64)], xi: C64) -> f64 {
    let mut acc = ZERO;
    for (ck, ak) in components {
        let ph = (-IM * 2.0 * (xi * ak.conj()).im).exp();
        for (cl, al) in components {
            acc += cl.conj() * ck * ph * coherent_overlap(*al, xi * 2.0 - ak);
        }
    }
    2.0 / PI * acc.re
}

/// Cat-state Wigner function
/// `(1/π)[e^{−2|ξ−iα|²} + e^{−2|ξ+iα|²} + 2e^{−2|ξ|²} sin(4 Re(αξ*))]`.
pub fn wigner_cat_point(alpha: C64, xi: C64) -> f64 {
    let g = |z: C64| (-2.0 * z.norm_sqr()).exp();
    (g(xi - IM * alpha) + g(xi + IM * alpha) + 2.0 * g(xi) * (4.0 * (alpha * xi.conj()).re).sin()) / PI
}

/// Three-component kitten Wigner function at `τ = 2π/3`.
pub fn wigner_kitten_point(alpha: C64, xi: C64) -> f64 {
    let w1 = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let w2 = C64::from_polar(1.0, 4.0 * PI / 3.0);
    let g = |z: C64| (-2.0 * (xi - z).norm_sqr()).exp();
    let ac = alpha.conj();
    let eim = |x: f64| (IM * x).exp();
    let t1 = -IM
        * eim((xi * ac - xi * ac * w1.conj()).im)
        * C64::from_polar(1.0, -PI / 6.0)
        * coherent_overlap(xi - alpha, -xi + alpha * w1);
    let t2 = eim((xi * ac - xi * ac * w2.conj()).im) * coherent_overlap(xi - alpha, -xi + alpha * w2);
    let t3 = IM
        * eim((xi * ac * w1.conj() - xi * ac * w2.conj()).im)
        * C64::from_polar(1.0, PI / 6.0)
        * coherent_overlap(xi - alpha * w1, -xi + alpha * w2);
    2.0 / (3.0 * PI) * (g(alpha) + g(alpha * w1) + g(alpha * w2) + 2.0 * (t1 + t2 + t3).re)
}

pub fn wigner_cat_closed(alpha: C64, grid: &PhaseGrid) -> Result<WignerGrid> {
    let values = grid.evaluate(|xi| Ok(wigner_cat_point(alpha, xi)))?;
    Ok(WignerGrid { grid: *grid, values, truncation_warning: None })
}

pub fn wigner_kitten_closed(alpha: C64, grid: &PhaseGrid) -> Result<WignerGrid> {
    let values = grid.evaluate(|xi| Ok(wigner_kitten_point(alpha, xi)))?;
    Ok(WignerGrid { grid: *grid, values, truncation_warning: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fidelity_limits() {
        assert_eq!(fidelity_closed_form(1, 0.005, 100.0, 1.0, 0.0).unwrap(), 1.0);
        for t in [0.3, 2.0, 17.0] {
            assert!((fidelity_closed_form(1, 0.0, 100.0, 1.0, t).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(fidelity_closed_form(1, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(fidelity_closed_form(1, 0.1, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cat_protocol_checkpoints() {
        let g0 = 0.7;
        let v = cat_protocol(g0, 0.001, 1.0, 0.3, 0.2, 0.0).unwrap();
        assert_eq!((v.eta, v.p_plus), (ZERO, 1.0));
        let v = cat_protocol(g0, 0.001, 1.0, 0.3, 0.2, PI).unwrap();
        assert!((v.eta.norm() - 2.0 * g0).abs() < 1e-14);
        let v = cat_protocol(g0, 0.001, 1.0, 0.3, 0.2, 2.0 * PI).unwrap();
        assert!(v.eta.norm() < 1e-14);
        assert!((v.theta_phase - (2.0 * PI * g0 * g0 - 2.0 * PI * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn exact_state_extremum() {
        let (chi, beta, db) = (0.005, 100.0, 1.0);
        let p = SystemParams { chi, delta_b: db, omega_drive_b: c(beta, 0.0), ..Default::default() };
        let d = crate::model::derive(&p).unwrap();
        let s0 = u_exact_state(0, &p, &d, 3.0).unwrap();
        assert_eq!((s0.displacement, s0.phase), (ZERO, 0.0));
        let s = u_exact_state(1, &p, &d, PI / (db + chi)).unwrap();
        assert!((s.displacement.norm() - 2.0 * chi * beta / (db + chi)).abs() < 1e-13);
    }

    #[test]
    fn kitten_cases() {
        let k = kitten_coefficients(2, 1).unwrap();
        assert_eq!(k.n_components(), 4);
        let s = 0.5f64.sqrt();
        assert!((k.coefficient(1) - C64::from_polar(s, -PI / 4.0)).norm() < 1e-14);
        assert!((k.coefficient(3) - C64::from_polar(s, PI / 4.0)).norm() < 1e-14);
        assert!(k.coefficient(0).norm() < 1e-14 && k.coefficient(2).norm() < 1e-14);

        let k = kitten_coefficients(3, 1).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((k.coefficient(0) - C64::from_polar(r, PI / 6.0)).norm() < 1e-14);
        assert!((k.coefficient(2) - c(0.0, -r)).norm() < 1e-14);
        assert!((k.coefficient(4) - C64::from_polar(r, PI / 6.0)).norm() < 1e-14);
        for j in [1, 3, 5] {
            assert!(k.coefficient(j).norm() < 1e-14);
        }
        assert!(kitten_coefficients(4, 2).is_err());
    }

    #[test]
    fn cat_wigner_values() {
        let w0 = wigner_cat_point(c(2.0, 0.0), ZERO);
        assert!((w0 - 2.0 / PI * (-8f64).exp()).abs() < 1e-16);
        let xi = c(0.4, -0.9);
        assert!((wigner_cat_point(ZERO, xi) - 2.0 / PI * (-2.0 * xi.norm_sqr()).exp()).abs() < 1e-16);
    }

    #[test]
    fn closed_forms_match_general_superposition() {
        let alpha = c(2.0, 0.0);
        let cat = kitten_coefficients(2, 1).unwrap().components(alpha);
        let kit = kitten_coefficients(3, 1).unwrap().components(alpha);
        for xi in [c(0.3, 0.2), c(-1.0, 1.1), c(1.5, -0.4), ZERO, c(-0.7, -1.3)] {
            assert!((wigner_cat_point(alpha, xi) - wigner_superposition_point(&cat, xi)).abs() < 1e-13);
            assert!((wigner_kitten_point(alpha, xi) - wigner_superposition_point(&kit, xi)).abs() < 1e-13);
        }
    }
}
