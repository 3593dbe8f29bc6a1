//! Overlap of the full and the approximate displaced-frame evolutions from
//! `|m⟩_a|0⟩_b`, against its closed form.

use std::f64::consts::PI;

use super::{apply_point, displaced_cutoff, frame, Point, PointOutput, ScenarioConfig, Table};
use crate::analytic;
use crate::error::{Error, Result};
use crate::evolve::{schrodinger_evolve, TimeGrid};
use crate::fock::{fock_state, Mode, ModeDims};
use crate::model::build_h_tra;

/// Default integrator tolerance; the overlap phase grows like `g0² t`.
pub const FIDELITY_RTOL: f64 = 1e-10;

const COLUMNS: [&str; 13] = [
    "point",
    "beta_ss_mag",
    "chi",
    "delta_b",
    "g0_over_delta_b",
    "dim_a",
    "dim_b",
    "t",
    "delta_b_t",
    "F_closed_form",
    "F_numeric",
    "abs_diff",
    "leakage_b",
];

pub(super) fn tables() -> Vec<Table> {
    vec![Table::new("fidelity_scan", &COLUMNS)]
}

struct Setup {
    m: u32,
    beta: f64,
    dims: ModeDims,
    prefix: Vec<f64>,
}

fn setup(cfg: &ScenarioConfig, p: &Point) -> Result<(Setup, crate::model::SystemParams, crate::model::DerivedParams)> {
    let (params, mut knobs) = apply_point(cfg, p)?;
    if !(params.delta_b > 0.0) {
        return Err(Error::InvalidScenario("the fidelity scan needs delta_b > 0".into()));
    }
    // the overlap does not depend on ω'_a, so skip its fast rotation
    knobs.omega_a_prime.get_or_insert(0.0);
    let d = frame(&params, &knobs)?;
    let m = knobs.m;
    let beta = d.beta_ss.norm();
    let dims = match cfg.dims {
        Some(s) => ModeDims::new(s.n_a, s.n_b)?,
        None => {
            let w = params.delta_b.min(params.delta_b + m as f64 * params.chi);
            if !(w > 0.0) {
                return Err(Error::DegenerateParameters("delta_b + m chi must be positive".into()));
            }
            ModeDims::new(m as usize + 2, displaced_cutoff(2.0 * m as f64 * d.g0 / w))?
        }
    };
    let prefix = vec![
        p.index as f64,
        beta,
        params.chi,
        params.delta_b,
        d.g0 / params.delta_b,
        dims.n_a as f64,
        dims.n_b as f64,
    ];
    Ok((Setup { m, beta, dims, prefix }, params, d))
}

pub(super) fn prefix(cfg: &ScenarioConfig, p: &Point) -> Result<Vec<f64>> {
    Ok(setup(cfg, p)?.0.prefix)
}

pub(super) fn run_point(cfg: &ScenarioConfig, p: &Point) -> Result<PointOutput> {
    let (s, params, d) = setup(cfg, p)?;
    let db = params.delta_b;
    let grid = if cfg.knobs.checkpoint_only {
        TimeGrid::new(0.0, PI / db, 2)?
    } else {
        cfg.time.unwrap_or(TimeGrid::new(0.0, 10.0 * PI / db, 50)?)
    };
    let grid = TimeGrid { rtol: Some(grid.rtol.unwrap_or(FIDELITY_RTOL)), ..grid };
    if s.m as usize >= s.dims.n_a {
        return Err(Error::InvalidArgument(format!("m = {} needs n_a > m", s.m)));
    }
    let psi0 = fock_state(s.dims, s.m as usize, 0)?;
    let exact = schrodinger_evolve(&build_h_tra(&params, &d, s.dims, false)?, &psi0, &grid)?;
    let approx = schrodinger_evolve(&build_h_tra(&params, &d, s.dims, true)?, &psi0, &grid)?;

    let mut out = PointOutput::default();
    // mode a is number conserving here; only the mode-b tail is a truncation error
    out.note_leakage([0.0, exact.max_leakage(Mode::B).max(approx.max_leakage(Mode::B))]);
    out.warnings.extend(exact.warnings.iter().chain(&approx.warnings).cloned());
    let flag = out.leakage_flag(p.index);
    let skip = usize::from(cfg.knobs.checkpoint_only);
    for (k, t) in exact.times.iter().enumerate().skip(skip) {
        let f_num = exact.states[k].inner(&approx.states[k])?.norm();
        let f_closed = analytic::fidelity_closed_form(s.m, params.chi, s.beta, db, *t)?;
        let mut row = s.prefix.clone();
        row.extend([*t, db * t, f_closed, f_num, (f_closed - f_num).abs(), out.leakage[1]]);
        out.rows.push((0, row, flag.clone()));
    }
    Ok(out)
}
