//! Conditional displacement of mode b and the `|±⟩_a` measurement that
//! leaves it in a cat state.

use ndarray::{Array1, Array2};
use serde_json::json;

use super::{
    apply_point, displaced_cutoff, frame, thermal_margin, NamedWigner, Point, PointOutput, ScenarioConfig, Table,
    THERMAL_EPS,
};
use crate::analytic;
use crate::error::{Error, Result};
use crate::evolve::{lindblad_evolve, schrodinger_evolve, TimeGrid};
use crate::fock::{self, Dims, DensityMatrix, Mode, ModeDims, PureState};
use crate::linalg::{C64, ONE};
use crate::model::{build_h_tra, build_liouvillian, DerivedParams, SystemParams};
use crate::observables::{measure_plus_minus, mean_excitation, uhlmann_fidelity, wigner, PhaseGrid};
use crate::scenario::{HamiltonianChoice, SeriesInitial};

/// Closed-system tolerance; the branch probabilities are compared at 1e-8.
pub const CAT_PURE_RTOL: f64 = 1e-11;

const SERIES: [&str; 14] = [
    "point",
    "beta_ss_mag",
    "chi",
    "g0",
    "gamma_a",
    "gamma_b",
    "nbar_b",
    "dim_a",
    "dim_b",
    "t",
    "n_b_closed",
    "n_b_numeric",
    "trace",
    "leakage_b",
];

const MEASUREMENT: [&str; 21] = [
    "point",
    "beta_ss_mag",
    "chi",
    "g0",
    "gamma_a",
    "gamma_b",
    "nbar_b",
    "dim_a",
    "dim_b",
    "t_s",
    "p_plus",
    "p_minus",
    "p_outside",
    "p_plus_closed",
    "p_minus_closed",
    "p_abs_diff",
    "fidelity_plus",
    "fidelity_minus",
    "eta_abs",
    "leakage_a",
    "leakage_b",
];

pub(super) fn tables() -> Vec<Table> {
    vec![Table::new("cat_mode_b_series", &SERIES), Table::new("cat_mode_b_measurement", &MEASUREMENT)]
}

struct Setup {
    params: SystemParams,
    derived: DerivedParams,
    dims: ModeDims,
    hamiltonian: HamiltonianChoice,
    prefix: Vec<f64>,
}

pub fn default_dims(params: &SystemParams, g0: f64) -> Result<ModeDims> {
    let w = params.delta_b.min(params.delta_b + params.chi);
    if !(w > 0.0) {
        return Err(Error::DegenerateParameters("delta_b + chi must be positive".into()));
    }
    ModeDims::new(
        3 + thermal_margin(params.nbar_a, THERMAL_EPS),
        displaced_cutoff(2.0 * g0 / w) + thermal_margin(params.nbar_b, THERMAL_EPS),
    )
}

fn setup(cfg: &ScenarioConfig, p: &Point) -> Result<Setup> {
    let (params, knobs) = apply_point(cfg, p)?;
    if !(params.delta_b > 0.0) {
        return Err(Error::InvalidScenario("the cat protocol needs delta_b > 0".into()));
    }
    let derived = frame(&params, &knobs)?;
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
        params.nbar_b,
        dims.n_a as f64,
        dims.n_b as f64,
    ];
    let hamiltonian = knobs.hamiltonian.unwrap_or(HamiltonianChoice::Tra);
    Ok(Setup { params, derived, dims, hamiltonian, prefix })
}

pub(super) fn prefix(cfg: &ScenarioConfig, p: &Point) -> Result<Vec<f64>> {
    Ok(setup(cfg, p)?.prefix)
}

/// `(ϑ, η)` of the one-photon branch under the chosen Hamiltonian.
fn closed_branch(s: &Setup, t: f64) -> Result<(f64, C64)> {
    let chi = match s.hamiltonian {
        HamiltonianChoice::Tra => s.params.chi,
        HamiltonianChoice::App => 0.0,
    };
    let (zeta, eta) =
        analytic::exact_phase_displacement(1, s.derived.g0, chi, s.params.delta_b, s.derived.theta, t)?;
    Ok((zeta - s.derived.omega_a_prime * t, eta))
}

enum Trajectory {
    Pure(Vec<PureState>),
    Mixed(Vec<DensityMatrix>),
}

/// Evolve `psi0`: Schrödinger when closed, master equation otherwise.
/// The `ω'_a n_a` term commutes with everything else, so it is left out of
/// the integration (see [`rotate_a`]).
fn evolve(s: &Setup, psi0: &PureState, grid: &TimeGrid) -> Result<(Trajectory, Vec<f64>, [f64; 2], Vec<String>)> {
    let slow = DerivedParams { omega_a_prime: 0.0, ..s.derived };
    let h = build_h_tra(&s.params, &slow, s.dims, s.hamiltonian == HamiltonianChoice::App)?;
    if s.params.is_dissipative() {
        let l = build_liouvillian(&h, &s.params, Dims::Two(s.dims))?;
        let r = lindblad_evolve(&l, &psi0.to_density(), grid)?;
        let leak = [r.max_leakage(Mode::A), r.max_leakage(Mode::B)];
        Ok((Trajectory::Mixed(r.states), r.norms, leak, r.warnings))
    } else {
        let grid = TimeGrid { rtol: Some(grid.rtol.unwrap_or(CAT_PURE_RTOL)), ..*grid };
        let r = schrodinger_evolve(&h, psi0, &grid)?;
        let leak = [r.max_leakage(Mode::A), r.max_leakage(Mode::B)];
        Ok((Trajectory::Pure(r.states), r.norms.iter().map(|n| n * n).collect(), leak, r.warnings))
    }
}

/// Applies `e^{−iφ n_a}` to a two-mode state.
fn rotate_a(dims: ModeDims, traj: &Trajectory, phi: f64) -> Result<Trajectory> {
    let ph = |i: usize| C64::from_polar(1.0, -phi * (i / dims.n_b) as f64);
    Ok(match traj {
        Trajectory::Pure(v) => Trajectory::Pure(
            v.iter()
                .map(|x| {
                    let amps = Array1::from_shape_fn(x.amplitudes().len(), |i| x.amplitudes()[i] * ph(i));
                    PureState::new(x.dims(), amps)
                })
                .collect::<Result<_>>()?,
        ),
        Trajectory::Mixed(v) => Trajectory::Mixed(
            v.iter()
                .map(|x| {
                    let m = x.matrix();
                    DensityMatrix::new(x.dims(), Array2::from_shape_fn(m.dim(), |(i, k)| m[[i, k]] * ph(i) * ph(k).conj()))
                })
                .collect::<Result<_>>()?,
        ),
    })
}

fn initial(dims: ModeDims, which: SeriesInitial) -> Result<PureState> {
    match which {
        SeriesInitial::One => fock::fock_state(dims, 1, 0),
        SeriesInitial::Plus => {
            let mut v = Array1::zeros(dims.total());
            v[dims.index(0, 0)] = ONE / 2f64.sqrt();
            v[dims.index(1, 0)] = ONE / 2f64.sqrt();
            PureState::new(Dims::Two(dims), v)
        }
    }
}

/// `(|0⟩ + sign·e^{iϑ}|η⟩)` normalized in `dim` levels.
fn branch_state(dim: usize, vartheta: f64, eta: C64, sign: f64) -> Result<PureState> {
    let coh = fock::coherent_state(dim, eta)?;
    let ph = C64::from_polar(sign, vartheta);
    let mut v = coh.amplitudes().mapv(|z| z * ph);
    v[0] += ONE;
    PureState::new(Dims::Single(dim), v)?.normalized()
}

pub(super) fn run_point(cfg: &ScenarioConfig, p: &Point) -> Result<PointOutput> {
    let s = setup(cfg, p)?;
    let mut out = PointOutput::default();
    // mode a only loses photons here, so its top levels stay empty unless heated
    let track_a = s.params.nbar_a > 0.0;
    let db = s.params.delta_b;

    let which = cfg.knobs.series_initial.unwrap_or(SeriesInitial::One);
    let weight = if which == SeriesInitial::One { 1.0 } else { 0.5 };
    let grid = cfg.time.unwrap_or(TimeGrid::new(0.0, 4.0 * std::f64::consts::PI / db, 161)?);
    let (traj, norms, leak, warns) = evolve(&s, &initial(s.dims, which)?, &grid)?;
    out.note_leakage([if track_a { leak[0] } else { 0.0 }, leak[1]]);
    out.warnings.extend(warns);
    let n_b: Vec<f64> = match &traj {
        Trajectory::Pure(v) => v.iter().map(|x| mean_excitation(Mode::B, x)).collect(),
        Trajectory::Mixed(v) => v.iter().map(|x| mean_excitation(Mode::B, x)).collect(),
    };
    let mut series_rows = Vec::new();
    for (k, t) in grid.times().into_iter().enumerate() {
        let (_, eta) = closed_branch(&s, t)?;
        let mut row = s.prefix.clone();
        row.extend([t, weight * eta.norm_sqr(), n_b[k], norms[k], leak[1]]);
        series_rows.push(row);
    }

    // measurement at the first maximum of the one-photon displacement
    let t_s = std::f64::consts::PI / (db + s.params.chi);
    let mgrid = TimeGrid { rtol: grid.rtol, ..TimeGrid::new(0.0, t_s, 2)? };
    let (traj, _, leak, warns) = evolve(&s, &initial(s.dims, SeriesInitial::Plus)?, &mgrid)?;
    let traj = rotate_a(s.dims, &traj, s.derived.omega_a_prime * t_s)?;
    out.note_leakage([if track_a { leak[0] } else { 0.0 }, leak[1]]);
    out.warnings.extend(warns);
    let outcome = match &traj {
        Trajectory::Pure(v) => measure_plus_minus(v.last().expect("two samples"))?,
        Trajectory::Mixed(v) => measure_plus_minus(v.last().expect("two samples"))?,
    };
    let (vartheta, eta) = closed_branch(&s, t_s)?;
    let (pp, pm) = analytic::plus_minus_probabilities(eta, vartheta);
    let nb = s.dims.n_b;
    let fid = |rho: &Option<DensityMatrix>, sign: f64| -> Result<f64> {
        match rho {
            Some(r) => uhlmann_fidelity(r, &branch_state(nb, vartheta, eta, sign)?.to_density()),
            None => Ok(f64::NAN),
        }
    };
    let f_plus = fid(&outcome.rho_b_plus, 1.0)?;
    let f_minus = fid(&outcome.rho_b_minus, -1.0)?;

    let grid_w = cfg.knobs.wigner.unwrap_or(PhaseGrid::square(eta.norm().ceil() + 3.0, 61));
    for (tag, rho) in [("plus", &outcome.rho_b_plus), ("minus", &outcome.rho_b_minus)] {
        if let Some(r) = rho {
            let mut field = wigner(r, &grid_w)?;
            let l = fock::truncation_leakage(r);
            if l > fock::LEAKAGE_WARN {
                field.truncation_warning = Some(format!("top-level population {l:.3e}"));
            }
            out.wigners.push(NamedWigner {
                name: format!("cat_mode_b_wigner_p{}_{tag}", p.index),
                point: p.index,
                label: json!({ "branch": tag, "beta_ss_mag": s.prefix[1], "gamma_a": s.params.gamma_a,
                               "gamma_b": s.params.gamma_b, "t_s": t_s }),
                field,
            });
        }
    }

    let mut flag = out.leakage_flag(p.index);
    if f_plus.is_nan() || f_minus.is_nan() {
        flag.get_or_insert_with(|| "a measurement branch has vanishing probability".into());
    }
    for row in series_rows {
        out.rows.push((0, row, flag.clone()));
    }
    let mut row = s.prefix.clone();
    row.extend([
        t_s,
        outcome.p_plus,
        outcome.p_minus,
        outcome.p_outside,
        pp,
        pm,
        (outcome.p_plus - pp).abs().max((outcome.p_minus - pm).abs()),
        f_plus,
        f_minus,
        eta.norm(),
        out.leakage[0],
        out.leakage[1],
    ]);
    out.rows.push((1, row, flag));
    Ok(out)
}
