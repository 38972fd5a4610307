//! Command-line front end. Exit codes: 0 success, 1 invalid input, 2
//! numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::bifurcation::{sigma_h, SGrid, SingularKind};
use crate::canonical::{canonicalize, DGParams};
use crate::critical::{momentum_rank_info, seed_point, stratum_residual, SeedOptions, Stratum, SVD_TOL};
use crate::dynamics::{integrate_with, IntegrateOptions};
use crate::error::{Error, Result};
use crate::export::{export_diagram, write_trajectory_csv, Format};
use crate::lax::{lax_residual, sample_kappa, spectral_check_detail};
use crate::phase::{complexify, integrals_of_complex, integrals_real, realify, IntegralTriple, Params, PhaseState};
use crate::special::{equilibria, pendulum_state, rank1_admissible, rank1_point, PendulumFamily, Rank1Data};
use crate::verify::{rng_for, verify_all, VerifyConfig};

#[derive(Parser, Debug)]
#[command(name = "gyrostat", version, about = "Kowalevski gyrostat in two constant fields")]
struct Cli {
    /// Machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the equations of motion and write the trajectory as CSV.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
        /// Sample at this spacing instead of storing every step.
        #[arg(long)]
        dt: Option<f64>,
        /// Re-normalize onto the orbit after every step.
        #[arg(long)]
        project: bool,
    },
    /// Reduce general force parameters to the canonical form.
    Canonicalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Special solutions with their integral values.
    Special {
        #[arg(long, value_enum)]
        kind: SpecialKind,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "P3")]
        family: String,
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[arg(long, default_value_t = 1.0)]
        dphi: f64,
        #[arg(long, default_value_t = 1.0)]
        sign: f64,
        /// Comma-separated multipliers for the rank-one family.
        #[arg(long, value_delimiter = ',')]
        sigma: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Real points of a critical family with residuals, partial integral and rank.
    CriticalScan {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, value_parser = parse_stratum)]
        stratum: Stratum,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2026)]
        seed: u64,
    },
    /// Statistics of the Lax identity and the spectral curve on random samples.
    LaxVerify {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 2026)]
        seed: u64,
    },
    /// Slice of the bifurcation surfaces at fixed energy.
    Diagram {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,svg")]
        format: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        per_sign: usize,
        #[arg(long, default_value_t = 1e-3)]
        s_min: f64,
        #[arg(long, default_value_t = 50.0)]
        s_max: f64,
    },
    /// Run the acceptance suite and write the CSV reports.
    VerifyAll {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 2026)]
        seed: u64,
        #[arg(long, default_value = "verify_report")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpecialKind {
    Equilibria,
    Pendulum,
    Rank1,
}

fn parse_stratum(s: &str) -> std::result::Result<Stratum, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))
}

fn emit(value: &impl Serialize, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(stdout, "{text}")?,
    }
    Ok(())
}

/// Runs the command line `args` (program name first).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

/// Process entry point.
pub fn dispatch() -> i32 {
    let out = std::io::stdout();
    let err = std::io::stderr();
    run(std::env::args_os(), &mut out.lock(), &mut err.lock())
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Simulate { params, state, t_end, tol, out, dt, project } => {
            let p: Params = read_json(params)?;
            let s0: PhaseState = read_json(state)?;
            let mut opts = IntegrateOptions::new(*tol);
            opts.project = *project;
            if let Some(dt) = dt {
                if !(*dt > 0.0) {
                    return Err(Error::InvalidParams("dt must be positive".into()));
                }
                let n = (t_end.abs() / dt).floor() as usize;
                opts.t_eval = (0..=n).map(|i| i as f64 * dt * t_end.signum()).collect();
            }
            let tr = integrate_with(&s0, &p, *t_end, &opts)?;
            write_trajectory_csv(&tr, std::fs::File::create(out)?)?;
            let summary = json!({
                "points": tr.times.len(),
                "max_drift": tr.max_drift(),
                "max_casimir": tr.max_casimir(),
                "out": out.display().to_string(),
            });
            if cli.json {
                writeln!(stdout, "{summary}")?;
            } else {
                writeln!(
                    stdout,
                    "{} states written to {}; max drift {:.3e}; max Casimir residual {:.3e}",
                    tr.times.len(),
                    out.display(),
                    tr.max_drift(),
                    tr.max_casimir()
                )?;
            }
            Ok(0)
        }
        Command::Canonicalize { input, out } => {
            let dg: DGParams = read_json(input)?;
            let c = canonicalize(&dg)?;
            let params = c.params().ok();
            let value = json!({
                "group": c.group,
                "problem": c.problem,
                "a": c.a,
                "b": c.b,
                "lambda": c.lambda,
                "reducible": c.reducible,
                "params": params,
            });
            emit(&value, out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::Special { kind, params, family, phi, dphi, sign, sigma, out } => {
            let p: Params = read_json(params)?;
            let with_integrals = |s: &PhaseState| json!({"state": s, "integrals": integrals_real(s, &p)});
            let value = match kind {
                SpecialKind::Equilibria => json!(equilibria(&p).iter().map(with_integrals).collect::<Vec<_>>()),
                SpecialKind::Pendulum => {
                    let fam: PendulumFamily = family.parse()?;
                    with_integrals(&pendulum_state(fam, *phi, *dphi, *sign, &p)?)
                }
                SpecialKind::Rank1 => {
                    let sigmas: Vec<f64> = if sigma.is_empty() {
                        (-40..=40).filter(|i| *i != 0).map(|i| i as f64 * 0.1).collect()
                    } else {
                        sigma.clone()
                    };
                    let mut rows = Vec::new();
                    for m in rank1_admissible(&sigmas, &p) {
                        let w = 0.5 * (m.window.0 + m.window.1);
                        let c = rank1_point(&Rank1Data::new(m.sigma, m.u, w, &p)?, &p)?;
                        let s = realify(&c)?;
                        rows.push(json!({
                            "sigma": m.sigma, "u": m.u, "window": [m.window.0, m.window.1], "w": w,
                            "state": s, "integrals": integrals_real(&s, &p),
                        }));
                    }
                    json!(rows)
                }
            };
            emit(&value, out.as_deref(), stdout)?;
            Ok(0)
        }
        Command::CriticalScan { params, stratum, count, out, seed } => {
            let p: Params = read_json(params)?;
            let mut rows = Vec::with_capacity(*count);
            for i in 0..*count {
                let mut rng = rng_for(*seed, i as u64);
                let (state, c, attempts) = match stratum {
                    Stratum::L => {
                        let s = pendulum_state(
                            PendulumFamily::P3,
                            rng.random_range(-3.0..3.0),
                            rng.random_range(-2.0..2.0),
                            if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                            &p,
                        )?;
                        (s, complexify(&s), 1)
                    }
                    _ => {
                        let cp = seed_point(*stratum, &p, &mut rng, &SeedOptions::default())?;
                        (realify(&cp.state)?, cp.state, cp.attempts)
                    }
                };
                let res = stratum_residual(*stratum, &c, &p);
                let rank = momentum_rank_info(&c, &p, SVD_TOL);
                let integrals: IntegralTriple = integrals_of_complex(&c, &p);
                rows.push(json!({
                    "state": state,
                    "residuals": res.values,
                    "s": res.s_value,
                    "rank": rank.rank,
                    "singular_values": rank.singular_values,
                    "integrals": integrals,
                    "attempts": attempts,
                }));
            }
            emit(&rows, Some(out), stdout)?;
            let worst = rows
                .iter()
                .flat_map(|r| r["residuals"].as_array().cloned().unwrap_or_default())
                .filter_map(|v| v.as_f64())
                .fold(0.0, f64::max);
            if cli.json {
                writeln!(stdout, "{}", json!({"points": rows.len(), "max_residual": worst, "out": out.display().to_string()}))?;
            } else {
                writeln!(stdout, "{} points of {:?} written to {}; max residual {:.3e}", rows.len(), stratum, out.display(), worst)?;
            }
            Ok(0)
        }
        Command::LaxVerify { params, samples, seed } => {
            let p: Params = read_json(params)?;
            let mut rng = rng_for(*seed, 0);
            let (mut lax, mut even, mut odd) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..*samples {
                let s = PhaseState::random_on_orbit(&mut rng, &p, 1.0);
                let k = sample_kappa(&mut rng);
                let c = complexify(&s);
                lax.push(lax_residual(&c, k, &p)?);
                let d = spectral_check_detail(&c, k, &p)?;
                even.push(d.even);
                odd.push(d.odd);
            }
            let stats = |v: &mut Vec<f64>| {
                v.sort_by(|a, b| a.total_cmp(b));
                let n = v.len().max(1);
                json!({
                    "max": v.last().copied().unwrap_or(0.0),
                    "median": v.get(v.len() / 2).copied().unwrap_or(0.0),
                    "mean": v.iter().sum::<f64>() / n as f64,
                })
            };
            let value = json!({
                "samples": samples,
                "lax_residual": stats(&mut lax),
                "spectral_even": stats(&mut even),
                "spectral_odd": stats(&mut odd),
            });
            if cli.json {
                writeln!(stdout, "{value}")?;
            } else {
                writeln!(stdout, "{:<16} {:>12} {:>12} {:>12}", "quantity", "max", "median", "mean")?;
                for key in ["lax_residual", "spectral_even", "spectral_odd"] {
                    let v = &value[key];
                    writeln!(
                        stdout,
                        "{key:<16} {:>12.3e} {:>12.3e} {:>12.3e}",
                        v["max"].as_f64().unwrap_or(0.0),
                        v["median"].as_f64().unwrap_or(0.0),
                        v["mean"].as_f64().unwrap_or(0.0)
                    )?;
                }
            }
            Ok(0)
        }
        Command::Diagram { params, h, out, format, per_sign, s_min, s_max } => {
            let p: Params = read_json(params)?;
            let formats: Vec<Format> = format.iter().map(|f| f.parse()).collect::<Result<_>>()?;
            let grid = SGrid { per_sign: *per_sign, s_min: *s_min, s_max: *s_max };
            let d = sigma_h(*h, &p, &grid)?;
            let files = export_diagram(&d, out, &formats)?;
            let counts = json!({
                "cusp": d.count(SingularKind::Cusp),
                "double_point": d.count(SingularKind::DoublePoint),
                "intersection": d.count(SingularKind::Intersection),
                "s_zero_asymptote": d.count(SingularKind::SZeroAsymptote),
                "rank1_images": d.rank1.len(),
            });
            if cli.json {
                let names: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
                writeln!(stdout, "{}", json!({"h": h, "singular": counts, "files": names}))?;
            } else {
                writeln!(stdout, "slice h = {h}: {} samples, singular points {counts}", d.samples.len())?;
                for f in files {
                    writeln!(stdout, "  {}", f.display())?;
                }
            }
            Ok(0)
        }
        Command::VerifyAll { params, seed, out } => {
            let mut cfg = VerifyConfig { seed: *seed, ..VerifyConfig::default() };
            if let Some(path) = params {
                cfg.params = read_json(path)?;
            }
            let report = verify_all(&cfg);
            report.write(out)?;
            if cli.json {
                writeln!(stdout, "{}", serde_json::to_string(&report.criteria)?)?;
            } else {
                write!(stdout, "{}", report.table())?;
                writeln!(stdout, "reports written to {}", out.display())?;
            }
            Ok(if report.all_passed() { 0 } else { 2 })
        }
    }
}
