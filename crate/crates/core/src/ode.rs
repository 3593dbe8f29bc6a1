//! Adaptive Dormand–Prince 5(4) integrator for complex linear systems.

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-3, h_init: None, max_steps: 50_000_000 }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self::with_rtol(1e-9)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy_into(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = ZERO;
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrate `dy/dt = f(t, y)` and report the state at every grid time.
///
/// Steps are clipped so that each grid point is reached exactly; the
/// observer is called at every grid time including the first.
pub fn integrate<F, O>(
    mut f: F,
    grid: &[f64],
    y0: &[C64],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if grid.is_empty() {
        return Ok(OdeStats::default());
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();
    observe(0, grid[0], &y)?;
    if grid.len() == 1 {
        return Ok(stats);
    }

    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![ZERO; n]).collect();
    let mut tmp = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let mut t = grid[0];
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;

    let scale = |a: &[C64], b: &[C64], i: usize| opts.atol + opts.rtol * a[i].norm().max(b[i].norm());
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            // Hairer's starting-step heuristic
            let d0 = (0..n).map(|i| y[i].norm() / scale(&y, &y, i)).fold(0.0, f64::max);
            let d1 = (0..n).map(|i| k[0][i].norm() / scale(&y, &y, i)).fold(0.0, f64::max);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(grid[1] - grid[0])
        }
    };
    let mut h_min_hit = false;

    for (gi, &t_target) in grid.iter().enumerate().skip(1) {
        while t < t_target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::IntegrationFailure(format!(
                    "step budget of {} exhausted at t={t}",
                    opts.max_steps
                )));
            }
            let remaining = t_target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let h_step = if last { remaining } else { h };
            if h_step <= 1e-14 * t.abs().max(1.0) {
                if h_min_hit {
                    return Err(Error::IntegrationFailure(format!("step size underflow at t={t}")));
                }
                h_min_hit = true;
            }

            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            {
                let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
                axpy_into(&mut tmp, &y, h_step, &[(A21, k1)]);
                f(t + C2 * h_step, &tmp, k2);
                axpy_into(&mut tmp, &y, h_step, &[(A31, k1), (A32, k2)]);
                f(t + C3 * h_step, &tmp, k3);
                axpy_into(&mut tmp, &y, h_step, &[(A41, k1), (A42, k2), (A43, k3)]);
                f(t + C4 * h_step, &tmp, k4);
                axpy_into(&mut tmp, &y, h_step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
                f(t + C5 * h_step, &tmp, k5);
                axpy_into(
                    &mut tmp,
                    &y,
                    h_step,
                    &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
                );
                f(t + h_step, &tmp, k6);
                axpy_into(
                    &mut y_new,
                    &y,
                    h_step,
                    &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
                );
                f(t + h_step, &y_new, k7);
                stats.evaluations += 6;

                let mut err: f64 = 0.0;
                for i in 0..n {
                    let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                        * h_step;
                    err = err.max(e.norm() / scale(&y, &y_new, i));
                }
                if !err.is_finite() {
                    return Err(Error::IntegrationFailure(format!("non-finite state at t={t}")));
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if err <= 1.0 {
                    stats.accepted += 1;
                    t = if last { t_target } else { t + h_step };
                    std::mem::swap(&mut y, &mut y_new);
                    h_min_hit = false;
                    // grow from the nominal step, not the clipped one
                    h = if last { h.max(h_step) } else { h_step * factor };
                } else {
                    stats.rejected += 1;
                    h = h_step * factor.min(1.0);
                    continue;
                }
            }
            // first-same-as-last
            let (head, tail) = k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]);
        }
        observe(gi, t_target, &y)?;
    }
    Ok(stats)
}

/// Evenly spaced samples including both ends.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    end
                } else {
                    start + (end - start) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
