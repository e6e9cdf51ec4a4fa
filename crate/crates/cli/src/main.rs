//! `eap` — solve, verify and explore equilibrium arrival profiles of
//! two-queue fluid networks.
//!
//! Exit codes: 0 success (or verification pass), 1 usage/config error,
//! 2 verification failure.

mod config;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{RunConfig, SweepSpec};
use eap_core::network::{compose, Class};
use eap_core::oracle::{profile_distance, solve_fixed_point, OracleConfig};
use eap_core::profile::Curve;
use eap_core::solver::{classify, solve, EapSolution, JointProfile, SupportBoundaries};
use eap_core::verifier::{audit_structure, check_equilibrium, VerificationReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "eap", version, about = "Equilibrium arrival profiles for two-queue fluid networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file (defaults to standard output).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Equilibrium tolerance override.
    #[arg(long)]
    eps: Option<f64>,
    /// Oracle grid spacing override.
    #[arg(long)]
    dt: Option<f64>,
    /// Seed override for randomized commands.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace row-count override.
    #[arg(long)]
    rows: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the parameter regime and emit the closed-form solution.
    Solve(CommonArgs),
    /// Check whether a profile pair is an eps-equilibrium.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Class-1 cumulative profile (curve JSON).
        #[arg(long, value_name = "PATH", requires = "f2", conflicts_with = "solution")]
        f1: Option<PathBuf>,
        /// Class-2 cumulative profile (curve JSON).
        #[arg(long, value_name = "PATH", requires = "f1")]
        f2: Option<PathBuf>,
        /// A solution file produced by `solve` (verifies its profiles).
        #[arg(long, value_name = "PATH")]
        solution: Option<PathBuf>,
    },
    /// Run the discretized best-response oracle.
    Oracle(CommonArgs),
    /// Sweep one or two parameters and tabulate regime and social cost.
    Sweep(CommonArgs),
    /// Emit the network trace (queue lengths, waits, departures, costs).
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "PATH", requires = "f2")]
        f1: Option<PathBuf>,
        #[arg(long, value_name = "PATH", requires = "f1")]
        f2: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's help/version on stdout with success, everything
            // else is a usage error (exit 1)
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(common) => cmd_solve(&common),
        Command::Verify { common, f1, f2, solution } => cmd_verify(&common, f1, f2, solution),
        Command::Oracle(common) => cmd_oracle(&common),
        Command::Sweep(common) => cmd_sweep(&common),
        Command::Trace { common, f1, f2 } => cmd_trace(&common, f1, f2),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(eps) = common.eps {
        cfg.eps = eps;
    }
    if let Some(dt) = common.dt {
        cfg.dt = dt;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(rows) = common.rows {
        cfg.rows = rows;
    }
    Ok(cfg)
}

/// Writes `text` to `--out` if given (summary then goes to stdout),
/// otherwise to stdout.
fn emit(out: &Option<PathBuf>, text: &str, summary: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("{summary}");
        }
        None => {
            println!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn boundary_summary(b: &SupportBoundaries) -> String {
    let mut s = format!(
        "T1a={:.6} T1f={:.6} T2a={:.6} T2f={:.6}",
        b.t1a, b.t1f, b.t2a, b.t2f
    );
    if let (Some(ta), Some(tf)) = (b.ta, b.tf) {
        s.push_str(&format!(" Ta={ta:.6} Tf={tf:.6}"));
    }
    if let Some(t) = b.t_empty {
        s.push_str(&format!(" T={t:.6}"));
    }
    s
}

fn cmd_solve(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let p = cfg.params()?;
    let sol = solve(&p)?;
    let json = serde_json::to_string_pretty(&sol)?;
    let summary = format!("{} {}", sol.tag, boundary_summary(&sol.boundaries));
    emit(&common.out, &json, &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn load_curve(path: &Path) -> Result<Curve> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read curve {}", path.display()))?;
    let curve: Curve = serde_json::from_str(&text)
        .with_context(|| format!("malformed curve {}", path.display()))?;
    Ok(curve)
}

/// Boundaries read off a concrete profile pair.
fn boundaries_of(profile: &JointProfile) -> SupportBoundaries {
    let span = |c: &Curve| c.support().span().unwrap_or((0.0, 0.0));
    let (t1a, t1f) = span(&profile.f1);
    let (t2a, t2f) = span(&profile.f2);
    SupportBoundaries { t1a, t1f, t2a, t2f, ta: None, tf: None, t_empty: None }
}

fn cmd_verify(
    common: &CommonArgs,
    f1: Option<PathBuf>,
    f2: Option<PathBuf>,
    solution: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let p = cfg.params()?;
    let sol: EapSolution = match (&f1, &f2, &solution) {
        (Some(f1), Some(f2), None) => {
            let profile = JointProfile::new(load_curve(f1)?, load_curve(f2)?);
            let boundaries = boundaries_of(&profile);
            EapSolution {
                tag: classify(&p)?,
                boundaries,
                kind: eap_core::solver::EapKind::Unique(profile),
            }
        }
        (None, None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read solution {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("malformed solution {}", path.display()))?
        }
        _ => bail!("verify needs either --f1/--f2 or --solution"),
    };

    let mut report: Option<VerificationReport> = None;
    for profile in sol.verification_profiles() {
        let r = check_equilibrium(&profile.f1, &profile.f2, &p, cfg.eps)?;
        report = Some(match report {
            None => r,
            Some(mut acc) => {
                acc.passed &= r.passed;
                for i in 0..2 {
                    acc.iso_cost_deviation[i] = acc.iso_cost_deviation[i].max(r.iso_cost_deviation[i]);
                    acc.deviation_gain[i] = acc.deviation_gain[i].max(r.deviation_gain[i]);
                    acc.mass_error[i] = acc.mass_error[i].max(r.mass_error[i]);
                }
                acc
            }
        });
    }
    let mut report = report.expect("at least one profile");
    let audit = audit_structure(&sol, &p)?;
    report.invariants = audit.invariants;
    report.passed &= audit.passed;

    let json = serde_json::to_string_pretty(&report)?;
    let verdict = if report.passed { "pass" } else { "fail" };
    emit(
        &common.out,
        &json,
        &format!(
            "{verdict}: iso=({:.3e}, {:.3e}) gain=({:.3e}, {:.3e}) at eps={:.1e}",
            report.iso_cost_deviation[0],
            report.iso_cost_deviation[1],
            report.deviation_gain[0],
            report.deviation_gain[1],
            report.eps
        ),
    )?;
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[derive(serde::Serialize)]
struct OracleOutput {
    diagnostics: eap_core::oracle::OracleDiagnostics,
    f1: Curve,
    f2: Curve,
}

fn cmd_oracle(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let p = cfg.params()?;
    let mut ocfg = OracleConfig::auto(&p, cfg.dt);
    if let Some(m) = cfg.max_iters {
        ocfg.max_iters = m;
    }
    if let Some(s) = cfg.stop_tol {
        ocfg.stop_tol = s;
    }
    let mut result = solve_fixed_point(&p, &ocfg)?;

    // report the distance to the closed form whenever it is unique
    let sol = solve(&p)?;
    if let Some(reference) = sol.unique_profile() {
        let d1 = profile_distance(&result.profile, Class::One, &reference.f1)?;
        let d2 = profile_distance(&result.profile, Class::Two, &reference.f2)?;
        result.diagnostics.distance_to_reference = Some([d1, d2]);
    }

    let output = OracleOutput {
        diagnostics: result.diagnostics.clone(),
        f1: result.profile.to_curve(Class::One),
        f2: result.profile.to_curve(Class::Two),
    };
    let json = serde_json::to_string_pretty(&output)?;
    let summary = format!(
        "oracle: iters={} final_change={:.3e} converged={} distance={:?}",
        output.diagnostics.iters,
        output.diagnostics.final_change,
        output.diagnostics.converged,
        output.diagnostics.distance_to_reference
    );
    emit(&common.out, &json, &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn cmd_sweep(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let base = cfg.params()?;
    let spec: &SweepSpec = cfg.sweep.as_ref().context("config has no sweep section")?;
    let outer_values = spec.values()?;
    let inner: Option<(&SweepSpec, Vec<f64>)> = match &spec.axis2 {
        Some(s2) => Some((s2, s2.values()?)),
        None => None,
    };

    let mut csv = String::new();
    let inner_name = inner.as_ref().map(|(s2, _)| s2.axis.name()).unwrap_or("axis2");
    csv.push_str(&format!(
        "{},{},tag,t1a,t1f,t2a,t2f,ta,tf,t_empty,social_cost\n",
        spec.axis.name(),
        inner_name
    ));
    for &v in &outer_values {
        let inner_values: Vec<Option<f64>> = match &inner {
            Some((_, vals)) => vals.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        for iv in inner_values {
            let mut p = base;
            spec.axis.apply(&mut p, v);
            if let (Some((s2, _)), Some(value)) = (&inner, iv) {
                s2.axis.apply(&mut p, value);
            }
            p.validate().map_err(|e| anyhow::anyhow!("sweep point invalid: {e}"))?;
            let sol = solve(&p)?;
            let profile = &sol.verification_profiles()[0];
            let social = eap_core::verifier::social_cost(&profile.f1, &profile.f2, &p)?;
            let b = sol.boundaries;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                v,
                fmt_opt(iv),
                sol.tag,
                b.t1a,
                b.t1f,
                b.t2a,
                b.t2f,
                fmt_opt(b.ta),
                fmt_opt(b.tf),
                fmt_opt(b.t_empty),
                social
            ));
        }
    }
    emit(
        &common.out,
        csv.trim_end(),
        &format!("sweep: {} rows", outer_values.len()),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(common: &CommonArgs, f1: Option<PathBuf>, f2: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let p = cfg.params()?;
    let profile = match (&f1, &f2) {
        (Some(f1), Some(f2)) => JointProfile::new(load_curve(f1)?, load_curve(f2)?),
        _ => {
            let sol = solve(&p)?;
            sol.verification_profiles()[0].clone()
        }
    };
    let trace = compose(&profile.f1, &profile.f2, &p)?;

    let mut times = trace.critical_times();
    let (lo, hi) = match (times.first(), times.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        _ => (-1.0, 1.0),
    };
    let rows = cfg.rows.max(2);
    for i in 0..rows {
        times.push(lo + (hi - lo) * i as f64 / (rows - 1) as f64);
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let mut csv = String::from("t,Q1,Q2,W1,W2,tau1,tau2,C1,C2\n");
    for &t in &times {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            t,
            trace.queue1.q.eval(t),
            trace.queue2.q.eval(t),
            trace.queue1.wait(t),
            trace.queue2.wait(t),
            trace.queue1.tau.eval(t),
            trace.queue2.tau.eval(t),
            trace.class_cost(Class::One, t),
            trace.class_cost(Class::Two, t),
        ));
    }
    emit(&common.out, csv.trim_end(), &format!("trace: {} rows", times.len()))?;
    Ok(ExitCode::SUCCESS)
}
