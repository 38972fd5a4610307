//! The acceptance suite: ten numerical criteria, each reduced to one metric
//! compared against a threshold, with per-sample values kept for the report.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bifurcation::{gamma1, gamma2, gamma_lines, SGrid};
use crate::critical::{
    bracket_f_closed, bracket_u_closed, f_pair, momentum_rank, residual_n, residual_o, s_n, s_o, seed_point,
    u1, u2, SeedOptions, Stratum, SVD_TOL,
};
use crate::dynamics::{bracket_oracle_complex, integrate, integrate_with, IntegrateOptions, FD_STEP};
use crate::error::Result;
use crate::export::fmt_f64;
use crate::lax::{lax_eigenvalues, lax_residual, sample_kappa, spectral_check_detail, spectrum_distance};
use crate::phase::{complexify, integrals_of_complex, integrals_real, realify, Params, PhaseState};
use crate::scalar::Complex64;
use crate::special::{equilibria, pendulum_state, rank1_admissible, rank1_dwdt_residual, rank1_point, PendulumFamily, Rank1Data};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub params: Params,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 2026, params: Params::new(1.3, 0.7, 0.45).expect("valid defaults") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the metric.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub criterion: u8,
    pub label: String,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub criteria: Vec<Criterion>,
    pub samples: Vec<SampleRow>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("id,name,passed,metric,threshold,detail\n");
        for c in &self.criteria {
            out.push_str(&format!(
                "{},{},{},{},{},\"{}\"\n",
                c.id,
                c.name,
                c.passed,
                fmt_f64(c.metric),
                fmt_f64(c.threshold),
                c.detail.replace('"', "'")
            ));
        }
        out
    }

    pub fn samples_csv(&self) -> String {
        let mut out = String::from("criterion,label,index,value\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{}\n", s.criterion, s.label, s.index, fmt_f64(s.value)));
        }
        out
    }

    /// Writes `acceptance.csv` and `samples.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let a = dir.join("acceptance.csv");
        let b = dir.join("samples.csv");
        std::fs::write(&a, self.summary_csv())?;
        std::fs::write(&b, self.samples_csv())?;
        Ok(vec![a, b])
    }

    /// One line per criterion.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out.push_str(&format!(
                "[{}] {:>2} {:<28} metric {:.3e} (threshold {:.1e}) {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                c.metric,
                c.threshold,
                c.detail
            ));
        }
        out
    }
}

/// Independent generator for sample `stream` of a run.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

struct Acc {
    id: u8,
    rows: Vec<SampleRow>,
}

impl Acc {
    fn new(id: u8) -> Self {
        Acc { id, rows: Vec::new() }
    }

    fn push(&mut self, label: &str, index: usize, value: f64) {
        self.rows.push(SampleRow { criterion: self.id, label: label.to_string(), index, value });
    }

    fn max(&self, label: &str) -> f64 {
        self.rows.iter().filter(|r| r.label == label).map(|r| r.value).fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
    }

    /// Worst ratio `value / threshold` over the listed labels.
    fn finish(self, name: &'static str, checks: &[(&str, f64)], failures: Vec<String>, report: &mut Report) {
        let mut worst: (f64, f64, &str) = (0.0, checks[0].1, checks[0].0);
        let mut ok = failures.is_empty();
        let mut parts = Vec::new();
        for &(label, thr) in checks {
            let m = self.max(label);
            let count = self.rows.iter().filter(|r| r.label == label).count();
            ok &= m < thr && count > 0;
            parts.push(format!("{label} max {m:.3e} over {count}"));
            let ratio = m / thr;
            if !(ratio <= worst.0 / worst.1) {
                worst = (m, thr, label);
            }
        }
        parts.extend(failures);
        report.criteria.push(Criterion {
            id: self.id,
            name,
            passed: ok,
            metric: worst.0,
            threshold: worst.1,
            detail: parts.join("; "),
        });
        report.samples.extend(self.rows);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

fn conservation(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let tol = 1e-12;
    let runs: Vec<Result<(f64, f64)>> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let s0 = PhaseState::random_on_orbit(&mut rng_for(cfg.seed, 100 + i), &p, 1.0);
            let tr = integrate(&s0, &p, 100.0, tol)?;
            Ok((tr.max_drift(), tr.max_casimir()))
        })
        .collect();
    let mut acc = Acc::new(1);
    let mut failures = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok((d, c)) => {
                acc.push("drift", i, d);
                acc.push("casimir", i, c);
                // the integrator's own target, reported but not part of the criterion
                acc.push("casimir_over_tol", i, c / tol);
            }
            Err(e) => failures.push(format!("run {i}: {e}")),
        }
    }
    acc.finish("conservation", &[("drift", 1e-9), ("casimir", 1e-9)], failures, report);
}

fn dual_form(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut rng = rng_for(cfg.seed, 200);
    let mut acc = Acc::new(2);
    for i in 0..1000 {
        let s = PhaseState::random_on_orbit(&mut rng, &p, 1.5);
        let a = integrals_real(&s, &p);
        let b = integrals_of_complex(&complexify(&s), &p);
        acc.push("relative", i, rel(a.g, b.g).max(rel(a.k, b.k)).max(rel(a.h, b.h)));
    }
    acc.finish("dual-form integrals", &[("relative", 1e-11)], Vec::new(), report);
}

fn lax_samples(cfg: &VerifyConfig) -> Vec<(PhaseState, Complex64)> {
    let mut rng = rng_for(cfg.seed, 300);
    (0..100)
        .map(|_| {
            let s = PhaseState::random_on_orbit(&mut rng, &cfg.params, 1.0);
            (s, sample_kappa(&mut rng))
        })
        .collect()
}

fn lax_exactness(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut acc = Acc::new(3);
    let mut failures = Vec::new();
    for (i, (s, k)) in lax_samples(cfg).iter().enumerate() {
        match lax_residual(&complexify(s), *k, &p) {
            Ok(r) => acc.push("lax_residual", i, r),
            Err(e) => failures.push(format!("sample {i}: {e}")),
        }
    }
    let drifts: Vec<Result<f64>> = (0..5u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, 310 + i);
            let s0 = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
            let kappa = sample_kappa(&mut rng);
            let e0 = lax_eigenvalues(&complexify(&s0), kappa, &p)?;
            let opts = IntegrateOptions { t_eval: (1..=20).map(|j| j as f64).collect(), ..IntegrateOptions::new(1e-12) };
            let tr = integrate_with(&s0, &p, 20.0, &opts)?;
            let mut worst: f64 = 0.0;
            for st in &tr.states {
                worst = worst.max(spectrum_distance(&e0, &lax_eigenvalues(&complexify(st), kappa, &p)?));
            }
            Ok(worst)
        })
        .collect();
    for (i, d) in drifts.into_iter().enumerate() {
        match d {
            Ok(v) => acc.push("eigenvalue_drift", i, v),
            Err(e) => failures.push(format!("trajectory {i}: {e}")),
        }
    }
    acc.finish("lax exactness", &[("lax_residual", 1e-10), ("eigenvalue_drift", 1e-8)], failures, report);
}

fn spectral_identity(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut acc = Acc::new(4);
    let mut failures = Vec::new();
    for (i, (s, k)) in lax_samples(cfg).iter().enumerate() {
        match spectral_check_detail(&complexify(s), *k, &p) {
            Ok(d) => {
                acc.push("even_relative", i, d.even_relative);
                acc.push("odd_relative", i, d.odd_relative);
                acc.push("even_absolute", i, d.even);
                acc.push("odd_absolute", i, d.odd);
            }
            Err(e) => failures.push(format!("sample {i}: {e}")),
        }
    }
    acc.finish("spectral identity", &[("even_absolute", 1e-9), ("odd_absolute", 1e-11)], failures, report);
}

fn closed_points(cfg: &VerifyConfig, which: Stratum, n: u64, stream: u64) -> Vec<Result<crate::critical::ClosedPoint>> {
    (0..n)
        .into_par_iter()
        .map(|i| seed_point(which, &cfg.params, &mut rng_for(cfg.seed, stream + i), &SeedOptions::default()))
        .collect()
}

fn rank1_states(p: &Params) -> Vec<(f64, f64, (f64, f64), crate::phase::ComplexState)> {
    let sig: Vec<f64> = (-40..=40).filter(|i| *i != 0).map(|i| i as f64 * 0.1).collect();
    rank1_admissible(&sig, p)
        .into_iter()
        .filter_map(|m| {
            let w = 0.5 * (m.window.0 + m.window.1);
            let c = Rank1Data::new(m.sigma, m.u, w, p).and_then(|d| rank1_point(&d, p)).ok()?;
            Some((m.sigma, m.u, m.window, c))
        })
        .take(10)
        .collect()
}

fn l_points(cfg: &VerifyConfig) -> Vec<PhaseState> {
    let p = cfg.params;
    let mut rng = rng_for(cfg.seed, 500);
    let mut out: Vec<PhaseState> = equilibria(&p).to_vec();
    while out.len() < 20 {
        let phi = rng.random_range(-3.0..3.0);
        let dphi = rng.random_range(-2.0..2.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        if let Ok(s) = pendulum_state(PendulumFamily::P3, phi, dphi, sign, &p) {
            out.push(s);
        }
    }
    out
}

fn stratum_ranks(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut acc = Acc::new(5);
    let mut failures = Vec::new();
    let check = |label: &str, idx: usize, c: &crate::phase::ComplexState, want: usize, acc: &mut Acc| {
        let r = momentum_rank(c, &p, SVD_TOL);
        acc.push(label, idx, if r == want { 0.0 } else { 1.0 });
    };
    for (i, s) in equilibria(&p).iter().enumerate() {
        check("equilibrium_rank0", i, &complexify(s), 0, &mut acc);
    }
    for (i, s) in l_points(cfg).iter().skip(4).enumerate() {
        check("pendulum_rank1", i, &complexify(s), 1, &mut acc);
    }
    for (i, (_, _, _, c)) in rank1_states(&p).iter().enumerate() {
        check("rank1_family_rank1", i, c, 1, &mut acc);
    }
    for (which, label, stream) in [(Stratum::N, "close_n_rank2", 600), (Stratum::O, "close_o_rank2", 700)] {
        for (i, r) in closed_points(cfg, which, 20, stream).into_iter().enumerate() {
            match r {
                Ok(cp) => check(label, i, &cp.state, 2, &mut acc),
                Err(e) => failures.push(format!("{label} {i}: {e}")),
            }
        }
    }
    let mut rng = rng_for(cfg.seed, 800);
    for i in 0..20 {
        let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
        check("random_rank3", i, &complexify(&s), 3, &mut acc);
    }
    let labels = ["equilibrium_rank0", "pendulum_rank1", "rank1_family_rank1", "close_n_rank2", "close_o_rank2", "random_rank3"];
    let checks: Vec<(&str, f64)> = labels.iter().map(|l| (*l, 0.5)).collect();
    acc.finish("stratum ranks", &checks, failures, report);
}

fn inclusion(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut acc = Acc::new(6);
    let mut failures = Vec::new();
    for (i, s) in l_points(cfg).iter().enumerate() {
        let t = integrals_real(s, &p);
        let d = gamma_lines(t.h, &p)
            .iter()
            .map(|c| (c.g - t.g).abs().max((c.k - t.k).abs()))
            .fold(f64::INFINITY, f64::min);
        acc.push("l_on_lines", i, d);
    }
    for (which, label, stream) in [(Stratum::N, "n_on_gamma1", 600), (Stratum::O, "o_on_gamma2", 700)] {
        for (i, r) in closed_points(cfg, which, 20, stream).into_iter().enumerate() {
            let res = r.and_then(|cp| {
                let t = integrals_of_complex(&cp.state, &p);
                let c = match which {
                    Stratum::N => gamma1(s_n(&cp.state, &p)?.re, t.h, &p)?,
                    _ => gamma2(s_o(&cp.state, &p)?.re, t.h, &p)?,
                };
                Ok((c.g - t.g).abs().max((c.k - t.k).abs()))
            });
            match res {
                Ok(v) => acc.push(label, i, v),
                Err(e) => failures.push(format!("{label} {i}: {e}")),
            }
        }
    }
    acc.finish("surface inclusion", &[("l_on_lines", 1e-10), ("n_on_gamma1", 1e-8), ("o_on_gamma2", 1e-8)], failures, report);
}

fn brackets(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut acc = Acc::new(7);
    let mut failures = Vec::new();
    for (which, label, stream) in [(Stratum::O, "u_bracket", 900), (Stratum::N, "f_bracket_squared", 1000)] {
        for (i, r) in closed_points(cfg, which, 20, stream).into_iter().enumerate() {
            let res = r.and_then(|cp| {
                let s = realify(&cp.state)?;
                Ok(match which {
                    Stratum::O => {
                        let f = |x: &PhaseState| u1(&complexify(x), &p);
                        let g = |x: &PhaseState| u2(&complexify(x), &p);
                        let oracle = bracket_oracle_complex(&f, &g, &s, &p, FD_STEP) * Complex64::i();
                        let closed = bracket_u_closed(&cp.state, &p)?;
                        (oracle - closed).norm() / closed.norm()
                    }
                    _ => {
                        let f = |x: &PhaseState| f_pair(&complexify(x), &p)[0];
                        let g = |x: &PhaseState| f_pair(&complexify(x), &p)[1];
                        let oracle = bracket_oracle_complex(&f, &g, &s, &p, FD_STEP) * Complex64::i();
                        let closed = bracket_f_closed(&cp.state, &p)?;
                        let (o2, c2) = (oracle * oracle, closed * closed);
                        (o2 - c2).norm() / c2.norm()
                    }
                })
            });
            match res {
                Ok(v) => acc.push(label, i, v),
                Err(e) => failures.push(format!("{label} {i}: {e}")),
            }
        }
    }
    acc.finish("bracket closed forms", &[("u_bracket", 1e-6), ("f_bracket_squared", 1e-6)], failures, report);
}

fn rank1_family(cfg: &VerifyConfig, report: &mut Report) {
    let p = cfg.params;
    let mut acc = Acc::new(8);
    let mut failures = Vec::new();
    let states = rank1_states(&p);
    if states.len() < 10 {
        failures.push(format!("only {} admissible pairs", states.len()));
    }
    let runs: Vec<Result<f64>> = states
        .par_iter()
        .map(|(sigma, u, _, c)| {
            let s = realify(c)?;
            let tr = integrate(&s, &p, 5.0, 1e-12)?;
            Ok(tr.states.iter().map(|x| rank1_dwdt_residual(*sigma, *u, x, &p).abs()).fold(0.0, f64::max))
        })
        .collect();
    for (i, ((_, _, _, c), run)) in states.iter().zip(runs).enumerate() {
        acc.push("n_residual", i, residual_n(c, &p).into_iter().fold(0.0, f64::max));
        acc.push("o_residual", i, residual_o(c, &p).into_iter().fold(0.0, f64::max));
        match run {
            Ok(v) => acc.push("dwdt_residual", i, v),
            Err(e) => failures.push(format!("pair {i}: {e}")),
        }
    }
    acc.finish("rank-one family", &[("n_residual", 1e-8), ("o_residual", 1e-8), ("dwdt_residual", 1e-7)], failures, report);
}

fn degeneration(cfg: &VerifyConfig, report: &mut Report) {
    let mut acc = Acc::new(9);
    let p0 = cfg.params.with_lambda(0.0).expect("valid");
    let r4 = p0.r2() * p0.r2();
    let mut i = 0;
    for h in [-1.0, 0.5, 2.0] {
        for s in (SGrid { per_sign: 200, s_min: 1e-2, s_max: 20.0 }).values() {
            let c = gamma1(s, h, &p0).expect("nonzero s");
            let lhs = (p0.p2() * h - 2.0 * c.g).powi(2);
            acc.push("parabolic_cylinder", i, (lhs - r4 * c.k).abs() / lhs.max(1.0));
            i += 1;
        }
    }
    let mut rng = rng_for(cfg.seed, 1100);
    for j in 0..200 {
        let s = rng.random_range(0.05..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let h = rng.random_range(-2.0..2.0);
        let lam = rng.random_range(0.0..1.5);
        let delta = rng.random_range(0.0..2.0);
        let pa = cfg.params.with_lambda(lam).expect("valid");
        let pb = cfg.params.with_lambda((lam * lam + 2.0 * delta).sqrt()).expect("valid");
        let (a, b) = (gamma2(s, h, &pa).expect("s"), gamma2(s, h + delta, &pb).expect("s"));
        acc.push("gamma2_shift", j, rel(a.g, b.g).max(rel(a.k, b.k)));
        let (la, lb) = (gamma_lines(h, &pa), gamma_lines(h + delta, &pb));
        let d = (0..2).map(|q| rel(la[q].g, lb[q].g).max(rel(la[q].k, lb[q].k))).fold(0.0, f64::max);
        acc.push("lines_shift", j, d);
    }
    acc.finish(
        "degeneration at zero lambda",
        &[("parabolic_cylinder", 1e-10), ("gamma2_shift", 1e-12), ("lines_shift", 1e-12)],
        Vec::new(),
        report,
    );
}

/// Criteria 1 to 9.
pub fn run_criteria(cfg: &VerifyConfig) -> Report {
    let mut report = Report::default();
    conservation(cfg, &mut report);
    dual_form(cfg, &mut report);
    lax_exactness(cfg, &mut report);
    spectral_identity(cfg, &mut report);
    stratum_ranks(cfg, &mut report);
    inclusion(cfg, &mut report);
    brackets(cfg, &mut report);
    rank1_family(cfg, &mut report);
    degeneration(cfg, &mut report);
    report
}

/// All ten criteria; the last one reruns 1 to 9 and compares the CSV bytes.
pub fn verify_all(cfg: &VerifyConfig) -> Report {
    let mut report = run_criteria(cfg);
    let again = run_criteria(cfg);
    let same_summary = report.summary_csv() == again.summary_csv();
    let same_samples = report.samples_csv() == again.samples_csv();
    let ok = same_summary && same_samples;
    report.criteria.push(Criterion {
        id: 10,
        name: "determinism",
        passed: ok,
        metric: if ok { 0.0 } else { 1.0 },
        threshold: 0.5,
        detail: format!("summary identical: {same_summary}; samples identical: {same_samples}"),
    });
    report
}
