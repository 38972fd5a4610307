//! Explicit Runge–Kutta 8(5,3) pair (Dormand–Prince) with PI step control.

use crate::dop853_tableau::{A, B, C, E3, E5, STAGES};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Dop853Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// PI stabilisation exponent (0 gives the classical controller).
    pub beta: f64,
    pub safety: f64,
}

impl Dop853Options {
    pub fn with_tol(tol: f64) -> Self {
        Dop853Options { rtol: tol, atol: tol, ..Default::default() }
    }
}

impl Default for Dop853Options {
    fn default() -> Self {
        Dop853Options {
            rtol: 1e-10,
            atol: 1e-10,
            h0: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
            beta: 0.04,
            safety: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (forward or backward).
///
/// With `t_eval` empty, `observe` is called after every accepted step;
/// otherwise steps are shortened to land exactly on each listed time and
/// `observe` sees only those. `post_step` may modify the state after each
/// accepted step (used for projections); the stage derivative is then
/// recomputed.
pub fn solve<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    t_eval: &[f64],
    opts: &Dop853Options,
    post_step: Option<&dyn Fn(&mut [f64; N])>,
    mut observe: O,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]),
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    let mut f0 = f(t, &y);
    stats.evaluations += 1;
    if t_end == t0 {
        return Ok(stats);
    }
    let mut h = match opts.h0 {
        Some(h) => h.abs().min(opts.h_max),
        None => initial_step(&mut f, t, &y, &f0, dir, opts, &mut stats),
    };
    let mut facold = 1e-4f64;
    let mut stops = t_eval.iter().copied().filter(|s| dir * (s - t0) >= 0.0 && dir * (t_end - s) >= 0.0);
    let mut next_stop = stops.next();
    if next_stop == Some(t0) {
        observe(t0, &y);
        next_stop = stops.next();
    }
    let mut k = [[0.0; N]; STAGES + 1];

    while dir * (t_end - t) > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepFailure { t, h });
        }
        let target = next_stop.unwrap_or(t_end);
        let mut landing = false;
        if h >= dir * (target - t) {
            h = dir * (target - t);
            landing = true;
        }
        let min_h = 10.0 * f64::EPSILON * t.abs().max(1.0);
        if !(h > min_h) && !landing {
            return Err(Error::StepFailure { t, h });
        }
        let hs = dir * h;

        k[0] = f0;
        for s in 1..STAGES {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += hs * a * kj[i];
                    }
                }
            }
            k[s] = f(t + C[s] * hs, &ys);
        }
        let mut y_new = y;
        for (s, ks) in k.iter().enumerate().take(STAGES) {
            if B[s] != 0.0 {
                for i in 0..N {
                    y_new[i] += hs * B[s] * ks[i];
                }
            }
        }
        let t_new = if landing { target } else { t + hs };
        k[STAGES] = f(t_new, &y_new);
        stats.evaluations += STAGES;

        let err = error_norm(&k, &y, &y_new, h, opts);
        let expo = 0.125 - 0.2 * opts.beta;
        if err.is_finite() && err <= 1.0 {
            stats.accepted += 1;
            let fac11 = err.max(1e-300).powf(expo);
            let fac = (fac11 / facold.powf(opts.beta) / opts.safety).clamp(1.0 / 6.0, 3.0);
            facold = err.max(1e-4);
            t = t_new;
            y = y_new;
            f0 = k[STAGES];
            if let Some(p) = post_step {
                p(&mut y);
                f0 = f(t, &y);
                stats.evaluations += 1;
            }
            if next_stop.is_some() && landing {
                observe(t, &y);
                next_stop = stops.next();
            } else if t_eval.is_empty() {
                observe(t, &y);
            }
            let h_next = (h / fac).min(opts.h_max);
            // keep the natural step size after a clamped landing
            h = if landing { h_next.max(h) } else { h_next };
        } else {
            stats.rejected += 1;
            if !err.is_finite() {
                h *= 0.2;
            } else {
                let fac11 = err.powf(expo);
                h /= (fac11 / opts.safety).min(3.0);
            }
        }
    }
    Ok(stats)
}

fn error_norm<const N: usize>(
    k: &[[f64; N]; STAGES + 1],
    y: &[f64; N],
    y_new: &[f64; N],
    h: f64,
    opts: &Dop853Options,
) -> f64 {
    let (mut e5, mut e3) = (0.0, 0.0);
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        let (mut d5, mut d3) = (0.0, 0.0);
        for s in 0..=STAGES {
            d5 += E5[s] * k[s][i];
            d3 += E3[s] * k[s][i];
        }
        e5 += (d5 / sc).powi(2);
        e3 += (d3 / sc).powi(2);
    }
    if e5 == 0.0 && e3 == 0.0 {
        return 0.0;
    }
    let denom = e5 + 0.01 * e3;
    h.abs() * e5 / (denom * N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    opts: &Dop853Options,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let rms = |v: &dyn Fn(usize) -> f64| ((0..N).map(|i| v(i).powi(2)).sum::<f64>() / N as f64).sqrt();
    let scale = |i: usize| opts.atol + opts.rtol * y0[i].abs();
    let d0 = rms(&|i| y0[i] / scale(i));
    let d1 = rms(&|i| f0[i] / scale(i));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += dir * h0 * f0[i];
    }
    let f1 = f(t0 + dir * h0, &y1);
    stats.evaluations += 1;
    let d2 = rms(&|i| (f1[i] - f0[i]) / scale(i)) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_is_consistent() {
        // row sums equal nodes, weights sum to one, error weights sum to zero
        for s in 0..STAGES {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-13, "stage {s}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(E5.iter().sum::<f64>().abs() < 1e-13);
        assert!(E3.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn exponential_decay_to_high_accuracy() {
        let mut last = (0.0, [0.0]);
        let stats = solve(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            5.0,
            &[],
            &Dop853Options::with_tol(1e-12),
            None,
            |t, y| last = (t, *y),
        )
        .unwrap();
        assert_eq!(last.0, 5.0);
        assert!((last.1[0] - (-5.0f64).exp()).abs() < 1e-12);
        assert!(stats.accepted > 5);
    }

    #[test]
    fn harmonic_oscillator_lands_on_requested_times() {
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let mut seen = Vec::new();
        solve(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            &times,
            &Dop853Options::with_tol(1e-12),
            None,
            |t, y| seen.push((t, *y)),
        )
        .unwrap();
        assert_eq!(seen.len(), times.len());
        for ((t, y), te) in seen.iter().zip(&times) {
            assert_eq!(t, te);
            assert!((y[0] - t.cos()).abs() < 1e-10);
            assert!((y[1] + t.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_integration() {
        let mut last = [0.0];
        solve(|t, _: &[f64; 1]| [t.cos()], 2.0, [2f64.sin()], 0.0, &[], &Dop853Options::with_tol(1e-12), None, |_, y| last = *y)
            .unwrap();
        assert!(last[0].abs() < 1e-11);
    }

    #[test]
    fn order_eight_convergence_with_fixed_steps() {
        // effectively fixed steps: loose tolerance cap via h_max and tiny tol
        let run = |h: f64| {
            let opts = Dop853Options { h0: Some(h), h_max: h, rtol: 1.0, atol: 1.0, ..Default::default() };
            let mut last = [0.0, 0.0];
            solve(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 4.0, &[], &opts, None, |_, y| last = *y).unwrap();
            (last[0] - 4f64.cos()).abs()
        };
        let (e1, e2) = (run(0.4), run(0.2));
        let order = (e1 / e2).log2();
        assert!(order > 7.0, "observed order {order}");
    }

    #[test]
    fn blow_up_reports_step_failure() {
        let r = solve(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0, &[], &Dop853Options::with_tol(1e-10), None, |_, _| {});
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }
}
