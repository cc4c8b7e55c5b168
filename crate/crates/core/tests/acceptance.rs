//! End-to-end acceptance checks on the optomechanical cooling model. Each
//! criterion prints one PASS/FAIL line; the process exits non-zero if any
//! criterion fails.

use std::time::{Duration, Instant};

use entangled_lqg::filter::{unconditional_covariance, StationaryFilter};
use entangled_lqg::gaussian::SystemModel;
use entangled_lqg::lqg::{control_residual, oscillator_weight, solve_lqg, CostWeights};
use entangled_lqg::mc::{monte_carlo_check, step_size_audit, McConfig};
use entangled_lqg::network::NetworkConfig;
use entangled_lqg::oscillator::{build_model, default_actuation, OscillatorParams};
use entangled_lqg::riccati::SolverOptions;
use entangled_lqg::sweep::{optimize_phases, run_sweep, sweep_point, to_csv, uniform_grid, SweepResult, SweepSpec};

const PHASE_GRID: usize = 24;
const REFINE: usize = 30;
const RESIDUAL_TOL: f64 = 1e-10;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn spec(delta_sq: f64, beta2_sq: f64) -> SweepSpec {
    SweepSpec {
        beta1_sq_grid: uniform_grid(0.0, 1.0, 101),
        beta2_sq,
        delta_sq,
        phase_grid_points: PHASE_GRID,
        refine_iters: REFINE,
        model: OscillatorParams::default(),
        r: 2.3,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

/// Model and stationary filter at phase-optimised settings.
fn optimised(spec: &SweepSpec, beta1_sq: f64) -> (NetworkConfig, SystemModel, StationaryFilter) {
    let f = default_actuation();
    let opt = optimize_phases(&spec.model, &spec.network(beta1_sq), &f, PHASE_GRID, REFINE)
        .expect("phase search converged");
    let net = spec.network(beta1_sq).with_phases(opt.theta1, opt.theta2);
    let sys = build_model(&spec.model, &net, &f).expect("valid model");
    (net, sys, opt.filter)
}

fn row_at(result: &SweepResult, beta1_sq: f64) -> f64 {
    result
        .rows
        .iter()
        .find(|r| (r.beta1_sq - beta1_sq).abs() < 1e-12)
        .map(|r| r.e_min)
        .expect("grid point present")
}

struct Sweeps {
    lossy_local: SweepResult,
    lossy_global: SweepResult,
    low_loss: SweepResult,
    lossy_time: Duration,
}

fn sql(out: &mut Vec<Outcome>) {
    let s = spec(0.9, 0.0);
    let ((row, _), elapsed) = timed(|| sweep_point(&s, 1.0));
    let ok = row.converged && (row.e_min - 0.72).abs() <= 0.05 && elapsed < Duration::from_secs(10);
    out.push(Outcome {
        id: 1,
        name: "SQL at δ²=0.9 is 0.72 ± 0.05",
        passed: ok,
        detail: format!("E_min = {:.6} in {:.2?}", row.e_min, elapsed),
    });
}

fn entanglement_advantage(out: &mut Vec<Outcome>, sw: &Sweeps) {
    let r = &sw.lossy_local;
    let at_one = row_at(r, 1.0);
    let best = r.argmin().expect("converged rows");
    let ok = r.all_converged()
        && best.e_min < at_one
        && (0.5..=0.8).contains(&best.beta1_sq)
        && sw.lossy_time < Duration::from_secs(300);
    out.push(Outcome {
        id: 2,
        name: "entangled minimum below SQL with argmin in [0.5, 0.8]",
        passed: ok,
        detail: format!(
            "min E_min = {:.6} at β₁² = {:.2}, SQL {:.6}, sweep {:.2?}",
            best.e_min, best.beta1_sq, at_one, sw.lossy_time
        ),
    });
}

fn local_beats_global(out: &mut Vec<Outcome>, sw: &Sweeps) {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = f64::NAN;
    for (l, g) in sw.lossy_local.rows.iter().zip(&sw.lossy_global.rows) {
        let gap = l.e_min - g.e_min;
        if gap > worst {
            worst = gap;
            worst_at = l.beta1_sq;
        }
    }
    let ok = sw.lossy_global.all_converged() && worst <= 1e-6;
    out.push(Outcome {
        id: 3,
        name: "local (β₂=0) never worse than global (β₂²=0.2)",
        passed: ok,
        detail: format!("max E_min(local) − E_min(global) = {worst:.3e} at β₁² = {worst_at:.2}"),
    });
}

fn worst_case(out: &mut Vec<Outcome>, sw: &Sweeps) {
    let worst = sw.lossy_local.argmax().expect("converged rows");
    out.push(Outcome {
        id: 4,
        name: "β₁=0 is the worst case",
        passed: worst.beta1_sq == 0.0,
        detail: format!("max E_min = {:.6} at β₁² = {:.2}", worst.e_min, worst.beta1_sq),
    });
}

fn low_loss(out: &mut Vec<Outcome>, sw: &Sweeps) {
    let r = &sw.low_loss;
    let at_one = row_at(r, 1.0);
    let best = r.argmin().expect("converged rows");
    let ok = r.all_converged() && (at_one - 0.1).abs() <= 0.03 && at_one - best.e_min <= 0.01;
    out.push(Outcome {
        id: 5,
        name: "δ²=0.1: SQL 0.1 ± 0.03 and nearly optimal",
        passed: ok,
        detail: format!(
            "SQL {:.6}, min {:.6} at β₁² = {:.2} (gap {:.2e})",
            at_one,
            best.e_min,
            best.beta1_sq,
            at_one - best.e_min
        ),
    });
}

fn residuals(out: &mut Vec<Outcome>, sw: &Sweeps, control: &[f64]) {
    let rows = sw
        .lossy_local
        .rows
        .iter()
        .chain(&sw.lossy_global.rows)
        .chain(&sw.low_loss.rows);
    let v_max = rows.map(|r| r.residual).fold(0.0, f64::max);
    let p_max = control.iter().copied().fold(0.0, f64::max);
    out.push(Outcome {
        id: 6,
        name: "filter and control Riccati residuals ≤ 1e-10",
        passed: v_max <= RESIDUAL_TOL && p_max <= RESIDUAL_TOL,
        detail: format!("max ‖rhs(V∞)‖ = {v_max:.2e} over 303 rows, max ‖rhs(P∞)‖ = {p_max:.2e}"),
    });
}

fn physicality(out: &mut Vec<Outcome>) {
    let s = spec(0.9, 0.0);
    let f = default_actuation();
    let mut min_margin = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    for &b in &s.beta1_sq_grid {
        let (row, v) = sweep_point(&s, b);
        let v = v.expect("converged");
        let sys = build_model(&s.model, &s.network(b).with_phases(row.theta1_opt, row.theta2_opt), &f).unwrap();
        let u = unconditional_covariance(&sys).unwrap();
        min_margin = min_margin.min(v.uncertainty_margin());
        let gap = u.matrix() - v.matrix();
        min_gap = min_gap.min(gap.symmetric_eigenvalues().min());
    }
    out.push(Outcome {
        id: 7,
        name: "uncertainty relation and V_uncond ⪰ V∞ on the δ²=0.9 grid",
        passed: min_margin > -1e-9 && min_gap > -1e-9,
        detail: format!("min eig(V∞ + iΣ/2) = {min_margin:.3e}, min eig(V_uncond − V∞) = {min_gap:.3e}"),
    });
}

fn cheap_control(out: &mut Vec<Outcome>) -> Vec<f64> {
    let s = spec(0.9, 0.0);
    let (_, sys, filter) = optimised(&s, 1.0);
    let q = oscillator_weight(4);
    let mut costs = Vec::new();
    let mut residuals = Vec::new();
    for rho in [1.0, 1e-2, 1e-4, 1e-6, 1e-8] {
        let w = CostWeights::scaled_identity(q.clone(), rho, 2).unwrap();
        let sol = solve_lqg(&sys, &w, &filter, &SolverOptions::default()).expect("control Riccati converged");
        residuals.push(control_residual(&sol.p_inf, &sys, &w).unwrap());
        costs.push((rho, sol.j_min, sol.j_cheap));
    }
    let monotone = costs.windows(2).all(|w| w[1].1 < w[0].1);
    let (_, j_last, bound) = costs[costs.len() - 1];
    let rel = (j_last - bound) / bound;
    let trail: Vec<String> = costs.iter().map(|(r, j, _)| format!("{r:.0e}:{j:.7}")).collect();
    out.push(Outcome {
        id: 8,
        name: "cheap-control limit approaches Tr(QV∞)",
        passed: monotone && rel < 1e-3,
        detail: format!("j_min {}; Tr(QV∞) = {bound:.7}, relative gap {rel:.2e}", trail.join(" ")),
    });
    residuals
}

fn monte_carlo(out: &mut Vec<Outcome>, sw: &Sweeps) {
    let entangled = sw.lossy_local.argmin().unwrap().beta1_sq;
    let configs = [
        ("SQL", spec(0.9, 0.0), 1.0),
        ("entangled optimum", spec(0.9, 0.0), entangled),
        ("lossy entangled", spec(0.95, 0.0), 0.5),
    ];
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (label, s, b)) in configs.iter().enumerate() {
        let (_, sys, filter) = optimised(s, *b);
        let cfg = McConfig::for_filter(&sys, &filter, 2000, 1e-3, 1000 + i as u64);
        let report = monte_carlo_check(&sys, &filter, &cfg).expect("simulation ran");
        let worst_innov = report
            .innovation_checks
            .iter()
            .chain(&report.whiteness_checks)
            .map(|c| c.deviation / c.limit)
            .fold(0.0, f64::max);
        ok &= report.passed();
        parts.push(format!(
            "{label} (β₁²={b:.2}, δ²={}): max {:.2} SE{}, innovations {:.2} of limit",
            s.delta_sq,
            report.max_deviation(),
            if report.passed() { "" } else { " FAIL" },
            worst_innov
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    out.push(Outcome {
        id: 9,
        name: "Monte Carlo error covariance matches V∞ (2000 trajectories × 3)",
        passed: ok,
        detail: format!("{}; {:.1?}", parts.join("; "), elapsed),
    });
}

fn determinism(out: &mut Vec<Outcome>) {
    let mut s = spec(0.9, 0.0);
    s.beta1_sq_grid = uniform_grid(0.0, 1.0, 11);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| to_csv(&run_sweep(&s)))
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    out.push(Outcome {
        id: 10,
        name: "sweep CSV identical across runs and thread counts",
        passed: a == b && a == c,
        detail: format!("{} bytes, 1 vs 1 thread {}, 1 vs 4 threads {}", a.len(), a == b, a == c),
    });
}

fn step_audit() -> (bool, String) {
    let (_, sys, filter) = optimised(&spec(0.9, 0.0), 1.0);
    let cfg = McConfig::for_filter(&sys, &filter, 300, 1e-3, 77);
    let audit = step_size_audit(&sys, &filter, &cfg).expect("simulation ran");
    let worst = audit.checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
    (audit.passed(), format!("max |V(dt) − V(dt/2)| = {worst:.2} SE over 300 trajectories"))
}

fn main() {
    let mut outcomes = Vec::new();
    sql(&mut outcomes);

    let (lossy_local, lossy_time) = timed(|| run_sweep(&spec(0.9, 0.0)));
    let sweeps = Sweeps {
        lossy_local,
        lossy_global: run_sweep(&spec(0.9, 0.2)),
        low_loss: run_sweep(&spec(0.1, 0.0)),
        lossy_time,
    };
    entanglement_advantage(&mut outcomes, &sweeps);
    local_beats_global(&mut outcomes, &sweeps);
    worst_case(&mut outcomes, &sweeps);
    low_loss(&mut outcomes, &sweeps);
    let control = cheap_control(&mut outcomes);
    residuals(&mut outcomes, &sweeps, &control);
    physicality(&mut outcomes);
    monte_carlo(&mut outcomes, &sweeps);
    determinism(&mut outcomes);
    outcomes.sort_by_key(|o| o.id);

    let (audit_ok, audit_detail) = step_audit();

    println!();
    for o in &outcomes {
        println!(
            "criterion {:>2} {}: {} ({})",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    println!(
        "step-size audit {}: {}",
        if audit_ok { "PASS" } else { "FAIL" },
        audit_detail
    );
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "\nacceptance: {}/{} criteria passed{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if !failed.is_empty() || !audit_ok {
        std::process::exit(1);
    }
}
