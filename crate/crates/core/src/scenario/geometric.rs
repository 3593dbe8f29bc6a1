//! Four-step geometric gate acting as a self-Kerr evolution on mode a,
//! compared against the cat and kitten states it should produce.

use ndarray::Array2;
use serde_json::json;

use super::{apply_point, NamedWigner, Point, PointOutput, ScenarioConfig, Table};
use crate::analytic;
use crate::error::{Error, Result};
use crate::evolve::{geometric_sequence, GeometricOptions};
use crate::fock::{self, DensityMatrix, ModeDims};
use crate::linalg::C64;
use crate::model::{DerivedParams, SystemParams};
use crate::observables::{uhlmann_fidelity, wigner, PhaseGrid, WignerGrid};
use crate::scenario::Knobs;

/// Tighter than the pure-state default so the Wigner comparison reaches 1e-6.
pub const GEOMETRIC_RTOL: f64 = 1e-10;

const COLUMNS: [&str; 24] = [
    "point",
    "n",
    "m",
    "tau",
    "alpha_re",
    "alpha_im",
    "g0",
    "gamma_a",
    "gamma_b",
    "dim_a",
    "dim_b",
    "t_step",
    "free_phase",
    "fidelity_closed",
    "purity_a",
    "wigner_max_abs_diff",
    "wigner_integral",
    "step_norm_1",
    "step_norm_2",
    "step_norm_3",
    "step_norm_4",
    "trace_a",
    "leakage_a",
    "leakage_b",
];

pub(super) fn tables() -> Vec<Table> {
    vec![Table::new("geometric", &COLUMNS)]
}

/// One point per (axis point, target state).
pub(super) fn expand_targets(cfg: &ScenarioConfig, points: Vec<Point>) -> Result<Vec<Point>> {
    if cfg.knobs.targets.is_empty() {
        return Err(Error::Config("the geometric scenario needs at least one target".into()));
    }
    let mut out = Vec::new();
    for p in points {
        for t in &cfg.knobs.targets {
            let mut assign = p.assign.clone();
            assign.push(("target_n".into(), t.n as f64));
            assign.push(("target_m".into(), t.m as f64));
            out.push(Point { index: out.len(), assign });
        }
    }
    Ok(out)
}

/// Smallest `n ≥ |α|²` where the coherent amplitude `|⟨n|α⟩|` drops below `tol`.
fn coherent_edge(a: f64, tol: f64) -> usize {
    let mut ln_amp = -0.5 * a * a;
    let mut n = 0usize;
    loop {
        if n as f64 >= a * a && ln_amp < tol.ln() {
            return n;
        }
        n += 1;
        ln_amp += a.ln() - 0.5 * (n as f64).ln();
    }
}

/// Default truncation: mode a holds the coherent state down to amplitude
/// 1e-9. Mode b covers the largest displacement `√2 g0 t n` of every sector
/// with amplitude above 1e-6; the Wigner function is linear in those
/// amplitudes, so a probability criterion would be far too loose.
pub fn default_dims(alpha: C64, g0: f64, t_step: f64) -> Result<ModeDims> {
    let a = alpha.norm();
    let n_a = coherent_edge(a, 1e-9) + 1;
    let r = 2f64.sqrt() * g0.abs() * t_step * coherent_edge(a, 1e-6) as f64;
    ModeDims::new(n_a, (r * r + 2.0 * r + 20.0).ceil() as usize)
}

struct Setup {
    params: SystemParams,
    knobs: Knobs,
    n: u32,
    m: u32,
    tau: f64,
    t_step: f64,
    dims: ModeDims,
    prefix: Vec<f64>,
}

fn setup(cfg: &ScenarioConfig, p: &Point) -> Result<Setup> {
    let (params, knobs) = apply_point(cfg, p)?;
    let n = p.get("target_n").unwrap_or(2.0) as u32;
    let m = p.get("target_m").unwrap_or(1.0) as u32;
    let kit = analytic::kitten_coefficients(n, m)?;
    let tau = kit.tau();
    let t_step = analytic::geometric_step_for_tau(knobs.g0, tau)?;
    let dims = match cfg.dims {
        Some(s) => ModeDims::new(s.n_a, s.n_b)?,
        None => default_dims(knobs.alpha, knobs.g0, t_step)?,
    };
    let prefix = vec![
        p.index as f64,
        n as f64,
        m as f64,
        tau,
        knobs.alpha.re,
        knobs.alpha.im,
        knobs.g0,
        params.gamma_a,
        params.gamma_b,
        dims.n_a as f64,
        dims.n_b as f64,
        t_step,
    ];
    Ok(Setup { params, knobs, n, m, tau, t_step, dims, prefix })
}

pub(super) fn prefix(cfg: &ScenarioConfig, p: &Point) -> Result<Vec<f64>> {
    Ok(setup(cfg, p)?.prefix)
}

/// `e^{iφn} ρ e^{−iφn}`: strips the linear phase left by the gate.
fn remove_free_phase(rho: &DensityMatrix, phi: f64) -> Result<DensityMatrix> {
    let m = rho.matrix();
    let out = Array2::from_shape_fn(m.dim(), |(j, k)| m[[j, k]] * C64::from_polar(1.0, phi * (j as f64 - k as f64)));
    DensityMatrix::new(rho.dims(), out)
}

/// Closed-form Wigner field of the target: the printed cat and kitten
/// expressions when they apply, the coherent superposition otherwise.
pub fn closed_wigner(n: u32, m: u32, alpha: C64, grid: &PhaseGrid) -> Result<WignerGrid> {
    match (n, m) {
        (2, 1) => analytic::wigner_cat_closed(alpha, grid),
        (3, 1) => analytic::wigner_kitten_closed(alpha, grid),
        _ => {
            let comps = analytic::kitten_coefficients(n, m)?.components(alpha);
            let values = grid.evaluate(|xi| Ok(analytic::wigner_superposition_point(&comps, xi)))?;
            Ok(WignerGrid { grid: *grid, values, truncation_warning: None })
        }
    }
}

pub(super) fn run_point(cfg: &ScenarioConfig, p: &Point) -> Result<PointOutput> {
    let s = setup(cfg, p)?;
    let g0 = s.knobs.g0;
    // ω'_a only adds a linear phase that is removed below; ω_a stands in
    // for it unless given explicitly
    let omega_a_prime = s.knobs.omega_a_prime.unwrap_or(s.params.omega_a);
    let derived = DerivedParams {
        beta_ss: C64::new(if s.params.chi != 0.0 { g0 / s.params.chi } else { 0.0 }, 0.0),
        theta: 0.0,
        g0,
        omega_a_prime,
        delta_a_prime: s.params.delta_a,
    };
    let psi0 = fock::product_state(
        &fock::coherent_state(s.dims.n_a, s.knobs.alpha)?,
        &fock::fock(s.dims.n_b, 0)?,
    )?;
    let opts = GeometricOptions {
        open_system: s.params.is_dissipative(),
        renormalize: s.knobs.renormalize,
        rtol: cfg.time.and_then(|t| t.rtol).unwrap_or(GEOMETRIC_RTOL),
        ..Default::default()
    };
    let res = geometric_sequence(&s.params, &derived, s.t_step, &psi0, &opts)?;

    let mut out = PointOutput::default();
    out.note_leakage(res.max_leakage);
    for st in &res.steps {
        out.warnings.extend(st.warnings.iter().cloned());
    }
    let flag = out.leakage_flag(p.index);

    let trace_a = res.reduced_a.trace().re;
    let rho_a = DensityMatrix::new(res.reduced_a.dims(), res.reduced_a.matrix().mapv(|z| z / trace_a))?;
    let phi = analytic::geometric_free_phase(omega_a_prime, g0, s.t_step);
    let rho_a = remove_free_phase(&rho_a, phi)?;
    let target = analytic::kerr_state(s.knobs.alpha, s.tau, s.dims.n_a)?;
    let fidelity = uhlmann_fidelity(&rho_a, &target.to_density())?;

    let grid = s.knobs.wigner.unwrap_or(PhaseGrid::square(s.knobs.alpha.norm() + 1.5, 61));
    let mut numeric = wigner(&rho_a, &grid)?;
    let l = fock::truncation_leakage(&rho_a);
    if l > fock::LEAKAGE_WARN {
        numeric.truncation_warning = Some(format!("top-level population {l:.3e}"));
    }
    let closed = closed_wigner(s.n, s.m, s.knobs.alpha, &grid)?;
    let diff = numeric.max_abs_diff(&closed)?;
    let integral = numeric.integral();
    let label = json!({ "n": s.n, "m": s.m, "tau": s.tau, "gamma_a": s.params.gamma_a, "gamma_b": s.params.gamma_b });
    for (tag, field) in [("numeric", numeric), ("closed", closed)] {
        out.wigners.push(NamedWigner {
            name: format!("geometric_wigner_p{}_{tag}", p.index),
            point: p.index,
            label: label.clone(),
            field,
        });
    }

    let mut row = s.prefix;
    row.extend([phi, fidelity, rho_a.purity(), diff, integral]);
    row.extend(res.step_norms.iter().copied());
    row.extend([trace_a, out.leakage[0], out.leakage[1]]);
    out.rows.push((0, row, flag));
    Ok(out)
}
