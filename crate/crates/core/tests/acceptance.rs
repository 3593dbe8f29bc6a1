//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any of them fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use crosskerr::analytic;
use crosskerr::evolve::{lindblad_evolve, nonhermitian_evolve, schrodinger_evolve, TimeGrid, GEOMETRIC_PHASES, PURE_RTOL};
use crosskerr::fock::{self, Dims, ModeDims, PureState};
use crosskerr::linalg::{self, IM};
use crosskerr::model::{build_h_blockade, build_h_tra, build_liouvillian, DerivedParams, SystemParams};
use crosskerr::observables::{wigner, PhaseGrid};
use crosskerr::scenario::{run, RunOptions, RunOutput, ScenarioConfig, Table};
use crosskerr::C64;
use ndarray::Array2;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(doc: Value) -> Result<RunOutput, String> {
    let cfg = ScenarioConfig::from_value(doc, &[]).map_err(|e| e.to_string())?;
    run(&cfg, &RunOptions::default()).map_err(|e| e.to_string())
}

fn table<'a>(out: &'a RunOutput, name: &str) -> Result<&'a Table, String> {
    let t = out.table(name).ok_or_else(|| format!("no table {name}"))?;
    ensure(t.flagged_rows() == 0, || format!("{name}: {} flagged row(s), first: {}", t.flagged_rows(), t.flags.iter().find(|f| !f.is_empty()).unwrap()))?;
    Ok(t)
}

fn col(t: &Table, name: &str) -> Result<Vec<f64>, String> {
    t.column(name).ok_or_else(|| format!("{}: no column {name}", t.name))
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn fidelity_oracle() -> Outcome {
    let out = scenario(json!({
        "scenario": "fidelity-scan",
        "params": {"delta_b": 1.0},
        "time": {"t_start": 0.0, "t_end": 10.0 * PI, "n_samples": 50},
        "axes": [
            {"name": "chi", "values": [0.001, 0.005, 0.01]},
            {"name": "beta_ss_mag", "values": [100, 500, 1000]}
        ]
    }))?;
    let t = table(&out, "fidelity_scan")?;
    ensure(t.rows.len() == 9 * 50, || format!("{} rows", t.rows.len()))?;
    let worst = max(&col(t, "abs_diff")?);
    ensure(worst < 1e-5, || format!("max |F_numeric - F_closed_form| = {worst:.3e}"))?;
    Ok(format!("max |ΔF| = {worst:.2e} over {} rows", t.rows.len()))
}

fn fidelity_checkpoint() -> Outcome {
    let mut lowest = f64::INFINITY;
    for chi in [0.0005, 0.001, 0.0025, 0.005] {
        let beta = 1.0 / chi;
        let closed = analytic::fidelity_closed_form(1, chi, beta, 1.0, PI).map_err(|e| e.to_string())?;
        ensure(closed > 0.99, || format!("χ={chi}: closed-form F(π) = {closed}"))?;
        let out = scenario(json!({
            "scenario": "fidelity-scan",
            "params": {"delta_b": 1.0, "chi": chi},
            "knobs": {"beta_ss_mag": beta, "checkpoint_only": true}
        }))?;
        let t = table(&out, "fidelity_scan")?;
        let f = col(t, "F_numeric")?[0];
        ensure(f > 0.99, || format!("χ={chi}: numeric F(π) = {f}"))?;
        lowest = lowest.min(closed.min(f));
    }
    Ok(format!("min F(π/Δ_b) = {lowest:.5}"))
}

/// Rows of a time series table sampled at the final time of each point.
fn final_rows(t: &Table, time: &str) -> Result<Vec<usize>, String> {
    let ts = col(t, time)?;
    let end = max(&ts);
    Ok((0..ts.len()).filter(|&i| ts[i] == end).collect())
}

fn conditional_displacement() -> Outcome {
    let out = scenario(json!({
        "scenario": "cat-mode-b",
        "params": {"delta_b": 1.0, "chi": 0.001, "gamma_a": 0, "gamma_b": 0},
        "knobs": {"hamiltonian": "app"},
        "time": {"t_start": 0, "t_end": PI, "n_samples": 2},
        "axes": [{"name": "beta_ss_mag", "values": [500, 1000, 2000]}]
    }))?;
    let t = table(&out, "cat_mode_b_series")?;
    let (g0, nb) = (col(t, "g0")?, col(t, "n_b_numeric")?);
    let rows = final_rows(t, "t")?;
    ensure(rows.len() == 3, || format!("{} final rows", rows.len()))?;
    let mut worst = 0.0f64;
    for i in rows {
        let want = (2.0 * g0[i]).powi(2);
        let err = (nb[i] - want).abs();
        ensure(err < 1e-4, || format!("g0={}: ⟨n_b⟩ = {} vs {want}", g0[i], nb[i]))?;
        worst = worst.max(err);
    }
    Ok(format!("max |⟨n_b(π)⟩ - (2g0)²| = {worst:.2e} for g0 ∈ {{0.5, 1, 2}}"))
}

fn blockade_orderings() -> Outcome {
    let base = |chi: f64, gammas: &[f64]| {
        json!({
            "scenario": "blockade-scan",
            "params": {"delta_b": 1.0, "chi": chi, "nbar_a": 0, "nbar_b": 0},
            "knobs": {"beta_ss_mag": 500, "drive_ratio": 0.1},
            "axes": [{"name": "gamma", "values": gammas}]
        })
    };
    let out = scenario(base(0.001, &[0.01, 0.05, 0.1]))?;
    let t = table(&out, "blockade_scan")?;
    let (g0, g2, res) = (col(t, "g0")?, col(t, "g2_zero")?, col(t, "residual")?);
    ensure(g0.iter().all(|g| (g - 0.5).abs() < 1e-12), || format!("g0 = {g0:?}"))?;
    ensure(g2[0] < 0.1, || format!("g2(0) = {} at γ = 0.01", g2[0]))?;
    ensure(g2.windows(2).all(|w| w[1] > w[0]), || format!("not increasing: {g2:?}"))?;

    let free = scenario(base(0.0, &[0.01, 0.05]))?;
    let tf = table(&free, "blockade_scan")?;
    let g2f = col(tf, "g2_zero")?;
    ensure(g2f.iter().all(|g| (g - 1.0).abs() < 1e-3), || format!("χ = 0 gives {g2f:?}"))?;

    let worst = max(&res).max(max(&col(tf, "residual")?));
    ensure(worst < 1e-9, || format!("steady-state residual {worst:.3e}"))?;
    Ok(format!(
        "g2(0) = {:.4}/{:.4}/{:.4}, χ=0: {:.6}, residual {worst:.1e}",
        g2[0], g2[1], g2[2], g2f[0]
    ))
}

fn thermal_degradation() -> Outcome {
    let nbars = [0.0, 5.0, 8.0, 12.0];
    let out = scenario(json!({
        "scenario": "blockade-scan",
        "params": {"delta_b": 1.0, "chi": 0.001, "gamma_a": 0.05, "gamma_b": 0.01},
        "axes": [
            {"name": "nbar_b", "values": nbars},
            {"name": "beta_ss_mag", "values": [200, 400, 600, 800, 1000]}
        ]
    }))?;
    let t = table(&out, "blockade_scan")?;
    let (nb, g2) = (col(t, "nbar_b")?, col(t, "g2_zero")?);
    let minima: Vec<f64> = nbars
        .iter()
        .map(|n| nb.iter().zip(&g2).filter(|(x, _)| *x == n).map(|(_, g)| *g).fold(f64::INFINITY, f64::min))
        .collect();
    ensure(minima.windows(2).all(|w| w[1] > w[0]), || format!("minima {minima:?}"))?;
    Ok(format!("min g2(0) per n̄_b: {}", minima.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(" < ")))
}

fn cat_wigner() -> Outcome {
    let out = scenario(json!({
        "scenario": "geometric",
        "knobs": {"alpha": [2.0, 0.0], "targets": [{"n": 2, "m": 1}, {"n": 3, "m": 1}]}
    }))?;
    let t = table(&out, "geometric")?;
    let (tau, diff) = (col(t, "tau")?, col(t, "wigner_max_abs_diff")?);
    ensure((tau[0] - PI).abs() < 1e-12 && (tau[1] - 2.0 * PI / 3.0).abs() < 1e-12, || format!("τ = {tau:?}"))?;
    for p in 0..2 {
        let w = out.wigner(&format!("geometric_wigner_p{p}_numeric")).ok_or("missing Wigner grid")?;
        ensure(w.field.grid == PhaseGrid::square(3.5, 61), || format!("grid {:?}", w.field.grid))?;
    }
    ensure(diff.iter().all(|d| *d < 1e-6), || format!("max-abs errors {diff:?}"))?;
    Ok(format!("cat {:.2e}, kitten {:.2e}", diff[0], diff[1]))
}

fn geometric_identity() -> Outcome {
    let md = ModeDims::new(8, 40).map_err(|e| e.to_string())?;
    let params = SystemParams { delta_b: 0.0, ..Default::default() };
    let (g0, w) = (1.0, 0.3);
    let base = DerivedParams { beta_ss: C64::new(100.0, 0.0), theta: 0.0, g0, omega_a_prime: w, delta_a_prime: 0.0 };
    let mut worst = 0.0f64;
    for t in [0.05, 0.12, 0.2] {
        let mut u = Array2::eye(md.total()).mapv(|x: f64| C64::new(x, 0.0));
        for theta in GEOMETRIC_PHASES {
            let h = build_h_tra(&params, &base.with_theta(theta), md, true).map_err(|e| e.to_string())?.to_dense();
            u = linalg::expm(&h.mapv(|z| -IM * t * z)).dot(&u);
        }
        for m in 0..md.n_a {
            let n = m as f64;
            let phase = (-IM * 4.0 * w * t * n).exp() * (IM * 2.0 * g0 * g0 * t * t * n * n).exp();
            let col = md.index(m, 0);
            for row in 0..md.total() {
                let want = if row == col { phase } else { C64::new(0.0, 0.0) };
                worst = worst.max((u[[row, col]] - want).norm());
            }
        }
    }
    ensure(worst < 1e-8, || format!("max-norm deviation {worst:.3e}"))?;
    Ok(format!("max-norm deviation {worst:.2e} at t ∈ {{0.05, 0.12, 0.2}}"))
}

fn measurement_bookkeeping() -> Outcome {
    let out = scenario(json!({
        "scenario": "cat-mode-b",
        "params": {"delta_b": 1.0, "chi": 0.001, "gamma_a": 0, "gamma_b": 0},
        "axes": [{"name": "beta_ss_mag", "values": [100, 500, 1000]}]
    }))?;
    let t = table(&out, "cat_mode_b_measurement")?;
    let dp = max(&col(t, "p_abs_diff")?);
    ensure(dp < 1e-8, || format!("max |ΔP±| = {dp:.3e}"))?;
    let f: Vec<f64> = col(t, "fidelity_plus")?.into_iter().chain(col(t, "fidelity_minus")?).collect();
    let fmin = f.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(fmin > 1.0 - 1e-6, || format!("min branch fidelity {fmin}"))?;
    Ok(format!("max |ΔP±| = {dp:.1e}, min branch fidelity 1 - {:.1e}", (1.0 - fmin).max(0.0)))
}

fn invariants() -> Outcome {
    let e = |e: crosskerr::Error| e.to_string();
    let md = ModeDims::new(3, 8).map_err(e)?;
    let p = SystemParams { delta_b: 1.0, chi: 0.01, gamma_a: 0.1, gamma_b: 0.2, nbar_b: 0.5, omega_drive_a: C64::new(0.2, 0.0), ..Default::default() };
    let d = DerivedParams { beta_ss: C64::from_polar(50.0, 0.7), theta: 0.7, g0: 0.5, omega_a_prime: 0.3, delta_a_prime: 0.2 };
    let grid = TimeGrid::new(0.0, 6.0, 13).map_err(e)?;
    let psi = PureState::new(
        Dims::Two(md),
        ndarray::Array1::from_shape_fn(md.total(), |i| C64::new((i as f64).sin(), (2.0 * i as f64).cos())),
    )
    .map_err(e)?
    .normalized()
    .map_err(e)?;

    let l = build_liouvillian(&build_h_blockade(&p, &d, md, false).map_err(e)?, &p, Dims::Two(md)).map_err(e)?;
    for rho in &lindblad_evolve(&l, &psi.to_density(), &grid).map_err(e)?.states {
        ensure((rho.trace().re - 1.0).abs() < 1e-8, || format!("trace {}", rho.trace()))?;
        ensure(rho.hermiticity_residual() < 1e-12, || "Hermiticity".into())?;
        ensure(rho.min_eigenvalue().map_err(e)? > -1e-8, || "positivity".into())?;
    }

    let h = build_h_tra(&p, &d, md, false).map_err(e)?;
    let norms = schrodinger_evolve(&h, &psi, &grid).map_err(e)?.norms;
    ensure(norms.iter().all(|n| (n - 1.0).abs() < 10.0 * PURE_RTOL), || format!("Schrödinger norms {norms:?}"))?;
    let nh = nonhermitian_evolve(&h, (0.1, 0.2), &psi, &grid, false).map_err(e)?.norms;
    ensure(nh.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8)), || format!("non-Hermitian norms {nh:?}"))?;

    let cat = analytic::kitten_coefficients(2, 1).map_err(e)?.superposition(C64::new(1.5, 0.5), 40).map_err(e)?;
    let integral = wigner(&cat.to_density(), &PhaseGrid::square(5.0, 101)).map_err(e)?.integral();
    ensure((integral - 1.0).abs() < 2e-3, || format!("Wigner integral {integral}"))?;

    for (dim, beta) in [(20, C64::new(1.0, -0.5)), (40, C64::new(-3.0, 2.0))] {
        let dev = fock::displacement_dense(dim, beta).map_err(e)?.dot(&fock::displacement_dense(dim, -beta).map_err(e)?)
            - Array2::<C64>::eye(dim);
        let leak = fock::truncation_leakage(&fock::coherent_state(dim, beta).map_err(e)?);
        let colmax = dev.column(0).iter().map(|z| z.norm()).fold(0.0, f64::max);
        ensure(dev[[0, 0]].norm() <= 10.0 * leak + 1e-14 && colmax <= leak.sqrt() + 1e-14, || {
            format!("D D† defect at dim {dim} exceeds leakage {leak:e}")
        })?;
    }

    let a = fock::annihilator(60).map_err(e)?;
    let c = a.commutator(&a.adjoint()).map_err(e)?.to_dense();
    let comm = (0..59).map(|n| (c[[n, n]] - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
    ensure(comm < 1e-13, || format!("[a, a†] defect {comm:e}"))?;
    Ok(format!("Lindblad/Schrödinger/non-Hermitian/Wigner ({integral:.5})/displacement/commutator"))
}

fn open_peak() -> Outcome {
    let out = scenario(json!({
        "scenario": "cat-mode-b",
        "params": {"delta_b": 1.0, "chi": 0.001, "gamma_a": 0.05, "gamma_b": 0.05},
        "time": {"t_start": 0, "t_end": PI, "n_samples": 2},
        "axes": [{"name": "beta_ss_mag", "values": [100, 500, 1000]}]
    }))?;
    let t = table(&out, "cat_mode_b_series")?;
    let (closed, numeric) = (col(t, "n_b_closed")?, col(t, "n_b_numeric")?);
    let rows = final_rows(t, "t")?;
    ensure(rows.len() == 3, || format!("{} final rows", rows.len()))?;
    let mut parts = Vec::new();
    for i in rows {
        ensure(numeric[i] < closed[i], || format!("row {i}: {} vs closed {}", numeric[i], closed[i]))?;
        parts.push(format!("{:.4}<{:.4}", numeric[i], closed[i]));
    }
    Ok(format!("⟨n_b(t_s)⟩ open<closed: {}", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Outcome); 10] = [
        ("fidelity oracle equivalence", 120.0, fidelity_oracle),
        ("fidelity checkpoint", 60.0, fidelity_checkpoint),
        ("conditional displacement", 60.0, conditional_displacement),
        ("photon blockade orderings", 300.0, blockade_orderings),
        ("thermal degradation", 600.0, thermal_degradation),
        ("cat-state Wigner oracle", 180.0, cat_wigner),
        ("geometric identity", 60.0, geometric_identity),
        ("measurement bookkeeping", 60.0, measurement_bookkeeping),
        ("invariant suite", 60.0, invariants),
        ("open-system peak decrease", 60.0, open_peak),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.and_then(|msg| {
            if secs < budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {secs:.1}s, budget {budget}s"))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS  {name:<28} {secs:>7.1}s  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<28} {secs:>7.1}s  {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
