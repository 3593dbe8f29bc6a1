//! Steady-state `g²(0)` of the weakly driven mode a.

use super::{apply_point, displaced_cutoff, frame, thermal_margin, Point, PointOutput, ScenarioConfig, Table, THERMAL_EPS};
use crate::error::{Error, Result};
use crate::evolve::{steady_state_with, SteadyStateOptions};
use crate::fock::{self, Dims, Mode, ModeDims};
use crate::linalg::C64;
use crate::model::{build_h_blockade, build_liouvillian, single_photon_resonance, DerivedParams, SystemParams};
use crate::observables::{g2_zero, mean_excitation};
use crate::scenario::HamiltonianChoice;

/// Largest `|Ω_a|/γ_a` still treated as a weak probe without a warning.
pub const WEAK_DRIVE_LIMIT: f64 = 0.5;

const COLUMNS: [&str; 19] = [
    "point",
    "beta_ss_mag",
    "chi",
    "g0",
    "gamma_a",
    "gamma_b",
    "nbar_a",
    "nbar_b",
    "drive_abs",
    "delta_a_prime",
    "dim_a",
    "dim_b",
    "g2_zero",
    "mean_n_a",
    "residual",
    "relative_residual",
    "gmres_iterations",
    "leakage_a",
    "leakage_b",
];

pub(super) fn tables() -> Vec<Table> {
    vec![Table::new("blockade_scan", &COLUMNS)]
}

struct Setup {
    params: SystemParams,
    derived: DerivedParams,
    dims: ModeDims,
    prefix: Vec<f64>,
}

/// Default truncation: `(6, 24)` at zero temperature, grown for strong
/// coupling (two-photon displacement) and for a thermal mode b.
pub fn default_dims(params: &SystemParams, g0: f64) -> Result<ModeDims> {
    let w = params.delta_b.min(params.delta_b + params.chi);
    if !(w > 0.0) {
        return Err(Error::DegenerateParameters("delta_b + chi must be positive".into()));
    }
    let thermal = params.nbar_b > 0.0;
    let n_a = if thermal { 4 } else { 6 } + thermal_margin(params.nbar_a, THERMAL_EPS);
    let n_b = 24.max(displaced_cutoff(4.0 * g0 / w)) + thermal_margin(params.nbar_b, THERMAL_EPS);
    ModeDims::new(n_a, n_b)
}

fn setup(cfg: &ScenarioConfig, p: &Point) -> Result<Setup> {
    let (mut params, knobs) = apply_point(cfg, p)?;
    if !(params.delta_b > 0.0) {
        return Err(Error::InvalidScenario("the blockade scan needs delta_b > 0".into()));
    }
    if let Some(r) = knobs.drive_ratio {
        params.omega_drive_a = C64::new(r * params.gamma_a, 0.0);
    }
    let mut derived = frame(&params, &knobs)?;
    // the mode-b phase is a gauge choice here; the Hamiltonian uses θ = 0
    derived.theta = 0.0;
    if knobs.delta_a_prime.is_none() {
        derived.delta_a_prime = single_photon_resonance(&params, derived.g0)?;
    }
    let dims = match cfg.dims {
        Some(s) => ModeDims::new(s.n_a, s.n_b)?,
        None => default_dims(&params, derived.g0)?,
    };
    let prefix = vec![
        p.index as f64,
        derived.beta_ss.norm(),
        params.chi,
        derived.g0,
        params.gamma_a,
        params.gamma_b,
        params.nbar_a,
        params.nbar_b,
        params.omega_drive_a.norm(),
        derived.delta_a_prime,
        dims.n_a as f64,
        dims.n_b as f64,
    ];
    Ok(Setup { params, derived, dims, prefix })
}

pub(super) fn prefix(cfg: &ScenarioConfig, p: &Point) -> Result<Vec<f64>> {
    Ok(setup(cfg, p)?.prefix)
}

pub(super) fn run_point(cfg: &ScenarioConfig, p: &Point) -> Result<PointOutput> {
    let s = setup(cfg, p)?;
    let mut out = PointOutput::default();
    if s.params.gamma_a > 0.0 && s.params.omega_drive_a.norm() / s.params.gamma_a > WEAK_DRIVE_LIMIT {
        out.warnings.push(format!(
            "point {}: drive ratio {:.3} is not weak",
            p.index,
            s.params.omega_drive_a.norm() / s.params.gamma_a
        ));
    }
    let drop_chi = cfg.knobs.hamiltonian.unwrap_or(HamiltonianChoice::App) == HamiltonianChoice::App;
    let h = build_h_blockade(&s.params, &s.derived, s.dims, drop_chi)?;
    let l = build_liouvillian(&h, &s.params, Dims::Two(s.dims))?;
    let opts = SteadyStateOptions { method: cfg.knobs.steady_state, ..Default::default() };
    let rep = steady_state_with(&l, &opts)?;
    out.note_leakage([
        fock::truncation_leakage_in(&rep.rho, Mode::A),
        fock::truncation_leakage_in(&rep.rho, Mode::B),
    ]);
    let flag = out.leakage_flag(p.index);
    let g2 = g2_zero(&rep.rho, Mode::A)?;
    let mut row = s.prefix;
    row.extend([
        g2,
        mean_excitation(Mode::A, &rep.rho),
        rep.residual,
        rep.relative_residual,
        rep.iterations as f64,
        out.leakage[0],
        out.leakage[1],
    ]);
    out.rows.push((0, row, flag));
    Ok(out)
}
