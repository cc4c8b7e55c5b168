use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use entangled_lqg::filter::{stationary_covariance, unconditional_covariance, StationaryFilter};
use entangled_lqg::gaussian::{validate_system, SystemModel};
use entangled_lqg::linalg::spectral_abscissa;
use entangled_lqg::lqg::{e_min, oscillator_weight, solve_lqg, CostWeights};
use entangled_lqg::mc::{monte_carlo_check, EntryCheck, McConfig};
use entangled_lqg::network::NetworkConfig;
use entangled_lqg::oscillator::{build_model, default_actuation};
use entangled_lqg::riccati::SolverOptions;
use entangled_lqg::sweep::{optimize_phases, run_sweep_with_progress, write_csv, SweepConfig};

/// Stationary filtering and cooling bounds for an oscillator probed through
/// an entangled optical network.
#[derive(Debug, Parser)]
#[command(name = "entangled-lqg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the BS1 reflectivity with optimised phases and write CSV.
    Sweep(Common),
    /// Solve one configuration and print the bound with solver diagnostics.
    Point(Common),
    /// Check the structural invariants of one configuration.
    Validate(Common),
    /// Compare the Monte Carlo error covariance with the Riccati solution.
    McCheck(McArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (`-` or absent for stdout, unless the config sets one).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2000)]
    trajectories: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit status when a computation ran but a row or check failed.
const FAILED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let common = match &cli.command {
        Command::Sweep(c) | Command::Point(c) | Command::Validate(c) => c,
        Command::McCheck(m) => &m.common,
    };
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(common.config.as_deref())?;
    let mut out = open_output(common.output.as_deref().or(cfg.output.as_deref().map(Path::new)))?;
    let ok = match &cli.command {
        Command::Sweep(_) => sweep(&cfg, &mut out)?,
        Command::Point(_) => point(&cfg, &mut out)?,
        Command::Validate(_) => validate(&cfg, &mut out)?,
        Command::McCheck(m) => mc_check(&cfg, m.trajectories, m.seed, &mut out)?,
    };
    out.flush()?;
    Ok(ok)
}

fn load_config(path: Option<&Path>) -> Result<SweepConfig> {
    match path {
        Some(p) => SweepConfig::from_path(p).map_err(|e| anyhow!("{}: {e}", p.display())),
        None => Ok(SweepConfig::default()),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

fn sweep(cfg: &SweepConfig, out: &mut dyn Write) -> Result<bool> {
    let spec = cfg.sweep_spec()?;
    let total = spec.beta1_sq_grid.len();
    let done = AtomicUsize::new(0);
    let start = Instant::now();
    eprintln!(
        "sweeping {total} points of beta1_sq on {} threads",
        rayon::current_num_threads()
    );
    let result = run_sweep_with_progress(&spec, |_, row| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        let status = if row.converged { "ok" } else { "FAILED" };
        eprintln!(
            "[{n}/{total}] beta1_sq={:.4} e_min={:.6} {status}",
            row.beta1_sq, row.e_min
        );
    });
    write_csv(&result, &mut *out)?;
    let failed = result.rows.iter().filter(|r| !r.converged).count();
    match result.argmin() {
        Some(best) => eprintln!(
            "done in {:.2?}; minimum e_min={:.6} at beta1_sq={:.4}; {failed} failed rows",
            start.elapsed(),
            best.e_min,
            best.beta1_sq
        ),
        None => eprintln!("done in {:.2?}; no row converged", start.elapsed()),
    }
    Ok(failed == 0)
}

/// Network and filter for the single-point commands. Phases not fixed by the
/// config are optimised.
fn resolve_point(cfg: &SweepConfig) -> Result<(NetworkConfig, SystemModel, StationaryFilter)> {
    let f = default_actuation();
    let mut net = cfg.point_network();
    if cfg.theta1.is_none() || cfg.theta2.is_none() {
        let opt = optimize_phases(&cfg.model, &net, &f, cfg.phase_grid, cfg.refine_iters)
            .ok_or_else(|| anyhow!("no phase setting converged"))?;
        net.theta1 = cfg.theta1.unwrap_or(opt.theta1);
        net.theta2 = cfg.theta2.unwrap_or(opt.theta2);
    }
    let sys = build_model(&cfg.model, &net, &f)?;
    let filter = stationary_covariance(&sys, &SolverOptions::default())?;
    Ok((net, sys, filter))
}

fn write_network(out: &mut dyn Write, net: &NetworkConfig) -> io::Result<()> {
    writeln!(out, "beta1_sq = {}", net.beta1_sq)?;
    writeln!(out, "beta2_sq = {}", net.beta2_sq)?;
    writeln!(out, "delta_loss_sq = {}", net.delta_sq)?;
    writeln!(out, "r = {}", net.r)?;
    writeln!(out, "theta1 = {:.10}", net.theta1)?;
    writeln!(out, "theta2 = {:.10}", net.theta2)
}

fn point(cfg: &SweepConfig, out: &mut dyn Write) -> Result<bool> {
    let (net, sys, filter) = resolve_point(cfg)?;
    let weights = CostWeights::scaled_identity(oscillator_weight(sys.state_dim()), cfg.rho, sys.f.ncols())?;
    let control = solve_lqg(&sys, &weights, &filter, &SolverOptions::default())?;
    let d = &filter.solution.diagnostics;
    write_network(out, &net)?;
    writeln!(out, "e_min = {:.12}", e_min(&filter.covariance))?;
    writeln!(out, "j_cheap = {:.12}", control.j_cheap)?;
    writeln!(out, "j_min = {:.12}  (rho = {})", control.j_min, cfg.rho)?;
    writeln!(out, "filter_residual = {:.3e}", d.residual)?;
    writeln!(out, "control_residual = {:.3e}", control.residual)?;
    writeln!(
        out,
        "steps = {} accepted, {} rejected, {} newton",
        d.accepted_steps, d.rejected_steps, d.newton_iters
    )?;
    writeln!(out, "drift_abscissa = {:.6e}", spectral_abscissa(&sys.drift()))?;
    writeln!(out, "error_abscissa = {:.6e}", d.closed_loop_abscissa)?;
    writeln!(out, "uncertainty_margin = {:.6e}", filter.covariance.uncertainty_margin())?;
    writeln!(out, "V =")?;
    let v = filter.covariance.matrix();
    for i in 0..v.nrows() {
        let row: Vec<String> = v.row(i).iter().map(|x| format!("{x:>14.6e}")).collect();
        writeln!(out, "  {}", row.join(" "))?;
    }
    Ok(filter.residual() <= SolverOptions::default().residual_tol)
}

fn check_line(out: &mut dyn Write, name: &str, ok: bool, detail: &str) -> io::Result<bool> {
    writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })?;
    Ok(ok)
}

fn validate(cfg: &SweepConfig, out: &mut dyn Write) -> Result<bool> {
    let net = cfg.point_network();
    let sys = build_model(&cfg.model, &net, &default_actuation())?;
    write_network(out, &net)?;
    let mut ok = true;
    let violations = validate_system(&sys);
    ok &= check_line(out, "structure", violations.is_empty(), &format!("{} violations", violations.len()))?;
    for v in &violations {
        writeln!(out, "  {v:?}")?;
    }
    let abscissa = spectral_abscissa(&sys.drift());
    ok &= check_line(out, "drift Hurwitz", abscissa < 0.0, &format!("abscissa {abscissa:.6e}"))?;
    match stationary_covariance(&sys, &SolverOptions::default()) {
        Ok(filter) => {
            let tol = SolverOptions::default().residual_tol;
            let res = filter.residual();
            ok &= check_line(out, "riccati residual", res <= tol, &format!("{res:.3e}"))?;
            let margin = filter.covariance.uncertainty_margin();
            ok &= check_line(out, "uncertainty relation", margin > -1e-9, &format!("margin {margin:.3e}"))?;
            let closed = filter.solution.diagnostics.closed_loop_abscissa;
            ok &= check_line(out, "error dynamics stable", closed < 0.0, &format!("abscissa {closed:.6e}"))?;
            if let Ok(u) = unconditional_covariance(&sys) {
                let gap = (u.matrix() - filter.covariance.matrix()).symmetric_eigenvalues().min();
                ok &= check_line(out, "filtering reduces covariance", gap > -1e-9, &format!("min eig {gap:.3e}"))?;
            }
        }
        Err(e) => {
            ok &= check_line(out, "riccati solve", false, &e.to_string())?;
        }
    }
    Ok(ok)
}

fn report_checks(out: &mut dyn Write, label: &str, checks: &[EntryCheck]) -> io::Result<()> {
    for c in checks {
        writeln!(
            out,
            "{} {label}[{},{}] empirical={:.6e} expected={:.6e} se={:.3e} dev={:.2}/{}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.row,
            c.col,
            c.empirical,
            c.expected,
            c.std_err,
            c.deviation,
            c.limit
        )?;
    }
    Ok(())
}

fn mc_check(cfg: &SweepConfig, trajectories: usize, seed: u64, out: &mut dyn Write) -> Result<bool> {
    let (net, sys, filter) = resolve_point(cfg)?;
    let mc = McConfig::for_filter(&sys, &filter, trajectories, cfg.dt, seed);
    eprintln!(
        "simulating {trajectories} trajectories, dt={}, horizon {:.1} (burn-in {:.1}), seed {seed}",
        mc.dt,
        mc.horizon(),
        mc.burn_in
    );
    let start = Instant::now();
    let report = monte_carlo_check(&sys, &filter, &mc)?;
    eprintln!("finished in {:.2?}", start.elapsed());
    write_network(out, &net)?;
    report_checks(out, "error_cov", &report.covariance_checks)?;
    report_checks(out, "innovation_cov", &report.innovation_checks)?;
    report_checks(out, "innovation_lag1", &report.whiteness_checks)?;
    let worst = |checks: &[EntryCheck]| checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
    writeln!(
        out,
        "max deviation (SE): error_cov {:.2}, innovation_cov {:.2}, innovation_lag1 {:.2}",
        worst(&report.covariance_checks),
        worst(&report.innovation_checks),
        worst(&report.whiteness_checks)
    )?;
    let ok = report.passed();
    writeln!(out, "{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(ok)
}
