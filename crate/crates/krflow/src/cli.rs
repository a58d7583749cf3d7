//! Command-line entry point: run orchestration, sweeps and file emission.
//!
//! Exit codes: 0 ok, 1 usage, 2 degenerate metric, 3 divergence guard,
//! 4 numerical failure.

use crate::analysis::{decay_lemma_audit, fit_exponential, integrability_check, DecayHypothesis};
use crate::config::parse_config;
use crate::flow::{self, FlowConfig, FlowTrace, Termination};
use crate::functionals;
use crate::geometry::{Background, BackgroundId, MetricState, VectorField};
use crate::io::{self, RunManifest, TraceMeta};
use crate::potentials::modified_potential;
use crate::soliton::{self, StationaryOutcome};
use crate::spectral;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "krflow",
    version,
    about = "Modified Kahler-Ricci flow laboratory on symmetry-reduced Fano geometries"
)]
struct Cli {
    /// base directory for output files
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// seed overriding the config value
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads for sweeps
    #[arg(long, global = true, default_value_t = 4)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configured flow and write trace, meta and snapshots
    Simulate(SimulateArgs),
    /// Solve the stationary soliton equation, optionally at a given c
    Soliton(SolitonArgs),
    /// Classify a finished run against the convergence conditions
    Classify(ClassifyArgs),
    /// Per-snapshot eigenvalues, projections and inequality audit
    Spectra(SpectraArgs),
    /// Diagnostics summary of a trace
    Report(ReportArgs),
    /// Audit a sampled series against the decay lemma
    DecayAudit(DecayAuditArgs),
    /// Run a parameter sweep of independent simulations
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SolitonArgs {
    #[arg(long)]
    background: String,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 129)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectraArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    snapshots: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecayAuditArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// comma-separated exponent halves nu_j/2 as rationals, e.g. 1/2,1/2,1/4
    #[arg(long)]
    nu: String,
    #[arg(long)]
    k1: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    param: String,
    /// comma-separated values of the swept parameter
    #[arg(long)]
    values: String,
}

pub fn run() {
    let code = main_impl();
    std::process::exit(code);
}

fn main_impl() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(&cli, args),
        Command::Soliton(args) => cmd_soliton(&cli, args),
        Command::Classify(args) => cmd_classify(&cli, args),
        Command::Spectra(args) => cmd_spectra(&cli, args),
        Command::Report(args) => cmd_report(&cli, args),
        Command::DecayAudit(args) => cmd_decay_audit(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            4
        }
    }
}

type CmdResult = Result<i32, String>;

fn estr(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> CmdResult {
    let mut config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(1);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let trace = flow::run(&config).map_err(estr)?;
    let dir = cli.out_dir.clone();
    let files = io::write_run_artifacts(&trace, &dir).map_err(estr)?;
    let mut manifest = RunManifest::new(format!("{config:?}"), config.grid, config.dt_init);
    manifest.runs.push(io::ManifestEntry {
        label: "run".into(),
        exit_status: trace.termination.exit_code(),
        files,
        detail: format!("{:?}", trace.termination),
    });
    io::write_manifest(&manifest, &dir.join("manifest.json")).map_err(estr)?;
    println!(
        "simulate: {:?}, horizon {:.3}, {} samples -> {}",
        trace.termination,
        trace.horizon(),
        trace.times.len(),
        dir.display()
    );
    Ok(trace.termination.exit_code())
}

fn cmd_soliton(_cli: &Cli, args: &SolitonArgs) -> CmdResult {
    let id = match BackgroundId::parse(&args.background) {
        Some(id) => id,
        None => {
            eprintln!("error: unknown background `{}`", args.background);
            return Ok(1);
        }
    };
    let bg = Background::build(id, args.grid).map_err(estr)?;
    let c = match args.c {
        Some(c) => c,
        None => soliton::find_soliton_constant(&bg).map_err(estr)?,
    };
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(estr)?;
        }
    }
    match soliton::stationary_solve(&bg, c).map_err(estr)? {
        StationaryOutcome::Soliton(sol) => {
            let bundle = modified_potential(&sol.state, &VectorField::new(c));
            let value = json!({
                "verdict": "soliton",
                "background": id.name(),
                "c": sol.c,
                "residual_c0": sol.residual,
                "newton_iterations": sol.iterations,
                "snapshot": io::Snapshot::from_state(&sol.state, &bundle),
            });
            io::write_json(&value, &args.out).map_err(estr)?;
            println!(
                "soliton: {} at c = {:.12} with residual {:.3e}",
                id.name(),
                sol.c,
                sol.residual
            );
            Ok(0)
        }
        StationaryOutcome::NoSoliton { best_residual } => {
            let value = json!({
                "verdict": "no_soliton",
                "background": id.name(),
                "c": c,
                "best_residual": best_residual,
            });
            io::write_json(&value, &args.out).map_err(estr)?;
            println!(
                "soliton: no stationary solution at c = {c} (best residual {best_residual:.3e})"
            );
            Ok(0)
        }
    }
}

/// Rebuild a trace object from the CSV and its sidecar metadata; snapshots
/// stay empty, which is enough for classification and reporting.
fn trace_from_meta(meta: TraceMeta, csv_path: &Path) -> Result<FlowTrace, String> {
    let csv = io::read_trace_csv(csv_path).map_err(estr)?;
    let mut records = io::records_from_csv(&csv);
    for (i, r) in records.iter_mut().enumerate() {
        r.mean_theta_u = meta.mean_theta_u[i];
        r.kappa_f = meta.kappa_f[i];
        r.psi_max = meta.psi_max[i];
        r.psi_min = meta.psi_min[i];
        r.u_minus_b_c0 = meta.u_minus_b_c0[i];
        r.futaki_projection = meta.futaki_projection[i];
    }
    let bg = Background::build(meta.config.background, meta.config.grid).map_err(estr)?;
    Ok(FlowTrace {
        x: VectorField::new(meta.config.c),
        config: meta.config,
        background: bg,
        times: csv.times,
        records,
        snapshots: Vec::new(),
        snapshot_times: Vec::new(),
        termination: meta.termination,
        mu0: meta.mu0,
    })
}

fn sibling_meta(trace: &Path) -> PathBuf {
    trace.with_file_name("meta.json")
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> CmdResult {
    let meta = io::read_meta(&sibling_meta(&args.trace)).map_err(estr)?;
    let trace = trace_from_meta(meta, &args.trace)?;
    let c0 = flow::compute_c0(&trace).map_err(estr)?;
    let classification = soliton::classify_run(&trace, c0.c0).map_err(estr)?;
    let value = json!({
        "classification": classification,
        "c0": c0,
    });
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.out_dir.join("classification.json"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(estr)?;
        }
    }
    io::write_json(&value, &out).map_err(estr)?;
    println!("classify: {:?} -> {}", classification.verdict, out.display());
    Ok(0)
}

fn cmd_spectra(_cli: &Cli, args: &SpectraArgs) -> CmdResult {
    let meta = io::read_meta(&sibling_meta(&args.trace)).map_err(estr)?;
    let dim = match meta.config.background {
        BackgroundId::Cp1 => 1,
        BackgroundId::F1 => 2,
    };
    let audit = spectral::theorem4_audit(
        dim,
        &meta.times,
        &meta.y_x,
        &meta.lambda_x,
        &meta.futaki_projection,
        1e-10,
    )
    .ok();
    let bg = Background::build(meta.config.background, meta.config.grid).map_err(estr)?;
    let x = VectorField::new(meta.config.c);

    let mut entries = std::fs::read_dir(&args.snapshots)
        .map_err(estr)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect::<Vec<_>>();
    entries.sort();
    let mut rows = Vec::new();
    for path in entries {
        let snap = io::read_snapshot(&path).map_err(estr)?;
        let state = MetricState::new(bg.clone(), snap.psi.clone(), snap.t).map_err(estr)?;
        let bundle = modified_potential(&state, &x);
        let report = spectral::project_holomorphic(&state, &x, &bundle).map_err(estr)?;
        let c_min = audit
            .as_ref()
            .and_then(|a| {
                a.rows
                    .iter()
                    .min_by(|p, q| {
                        (p.t - snap.t)
                            .abs()
                            .partial_cmp(&(q.t - snap.t).abs())
                            .unwrap()
                    })
                    .map(|r| r.c_min)
            })
            .unwrap_or(f64::NAN);
        rows.push((snap.t, vec![report.lambda, report.lambda_x, report.a_w, c_min]));
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(estr)?;
        }
    }
    io::write_series_csv("t,lambda,lambda_X,a_W,C_min", &rows, &args.out).map_err(estr)?;
    println!("spectra: {} snapshot rows -> {}", rows.len(), args.out.display());
    Ok(0)
}

fn cmd_report(_cli: &Cli, args: &ReportArgs) -> CmdResult {
    let csv = io::read_trace_csv(&args.trace).map_err(estr)?;
    let records = io::records_from_csv(&csv);
    let stat = |name: &str| {
        let col = csv.column(name).unwrap_or(&[]);
        let finite: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
        let max = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        json!({"min": min, "max": max})
    };
    let y: Vec<f64> = records.iter().map(|r| r.y_x).collect();
    let res: Vec<f64> = records.iter().map(|r| r.res_c0).collect();
    let fit = fit_exponential(&csv.times, &y, 0.5).ok();
    let int1 = integrability_check(&csv.times, &res, 1.0);
    let int3 = integrability_check(&csv.times, &res, 3.0);

    let mut report = json!({
        "samples": csv.times.len(),
        "horizon": csv.times.last().copied().unwrap_or(0.0),
        "monitors": {
            "Y_X": stat("Y_X"), "res_C0": stat("res_C0"), "res_L2": stat("res_L2"),
            "grad_u_C0": stat("grad_u_C0"), "lap_u_C0": stat("lap_u_C0"),
            "phidot_C0": stat("phidot_C0"), "X2_max": stat("X2_max"),
            "h_min": stat("h_min"), "h_max": stat("h_max"),
            "lambda": stat("lambda"), "lambda_X": stat("lambda_X"),
            "mu_X": stat("mu_X"), "F_X": stat("F_X"),
        },
        "fits": {
            "y_decay": fit.map(|f| json!({"kappa": f.kappa, "stderr": f.stderr, "r_squared": f.r_squared})),
            "res_integrable_p1": {"finite": int1.finite, "value": int1.value},
            "res_integrable_p3": {"finite": int3.finite, "value": int3.value},
        },
    });

    // identity residual maxima need full states
    if let Some(snapdir) = &args.snapshots {
        if let Ok(meta) = io::read_meta(&sibling_meta(&args.trace)) {
            let bg = Background::build(meta.config.background, meta.config.grid).map_err(estr)?;
            let x = VectorField::new(meta.config.c);
            let mut entries = std::fs::read_dir(snapdir)
                .map_err(estr)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect::<Vec<_>>();
            entries.sort();
            let mut boch = 0.0f64;
            let mut divgap = 0.0f64;
            let mut wdiv = 0.0f64;
            let mut l2gap = 0.0f64;
            let mut states = Vec::new();
            for path in &entries {
                let snap = io::read_snapshot(path).map_err(estr)?;
                let state =
                    MetricState::new(bg.clone(), snap.psi.clone(), snap.t).map_err(estr)?;
                let bundle = modified_potential(&state, &x);
                boch = boch.max(functionals::bochner_residual(&state, &x, &bundle));
                let d1 = crate::geometry::divergence_x(&state, &x);
                let d2 = crate::geometry::divergence_x_direct(&state, &x);
                divgap = divgap.max(
                    d1.iter()
                        .zip(&d2)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max),
                );
                let lap = crate::geometry::laplacian(&state, &bundle.u);
                let xe = crate::geometry::apply_x(&state, &bundle.u, &x);
                let sum: Vec<f64> = lap.iter().zip(&xe).map(|(a, b)| a + b).collect();
                let et = bundle.exp_theta();
                wdiv = wdiv.max(
                    crate::geometry::integrate(
                        &state,
                        &sum,
                        crate::geometry::Weight::Field(&et),
                    )
                    .abs(),
                );
                l2gap = l2gap.max(functionals::residual_l2_identity_gap(&state, &x, &bundle));
                states.push(state);
            }
            let futaki_spread = functionals::futaki_invariance_residual(&states, &x);
            report["identity_residual_maxima"] = json!({
                "bochner_kodaira": boch,
                "divergence_vs_hamiltonian": divgap,
                "weighted_divergence": wdiv,
                "res_l2_identity_gap": l2gap,
                "futaki_invariance": futaki_spread,
            });
        }
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(estr)?;
        }
    }
    io::write_json(&report, &args.out).map_err(estr)?;
    println!("report -> {}", args.out.display());
    Ok(0)
}

fn cmd_decay_audit(_cli: &Cli, args: &DecayAuditArgs) -> CmdResult {
    let (times, values) = io::read_series_csv(&args.series).map_err(estr)?;
    let mut halves = Vec::new();
    for part in args.nu.split(',') {
        let part = part.trim();
        let (p, q) = match part.split_once('/') {
            Some((a, b)) => (
                a.trim().parse::<i64>().map_err(estr)?,
                b.trim().parse::<i64>().map_err(estr)?,
            ),
            None => (part.parse::<i64>().map_err(estr)?, 1),
        };
        halves.push((p, q));
    }
    let k0 = values.iter().cloned().fold(0.0f64, f64::max);
    let n_lag = halves.len().saturating_sub(1) as f64;
    let k1 = args.k1.unwrap_or(2.0 * n_lag);
    let hyp = DecayHypothesis::new(args.lambda, halves, k0, k1).map_err(estr)?;
    let verdict = decay_lemma_audit(&times, &values, &hyp).map_err(estr)?;
    println!("decay-audit: {verdict:?}");
    Ok(0)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> CmdResult {
    let template = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(1);
        }
    };
    let values: Vec<String> = args
        .values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    let mut manifest = RunManifest::new(
        format!("{template:?} sweeping {} over {:?}", args.param, values),
        template.grid,
        template.dt_init,
    );
    if values.is_empty() {
        std::fs::create_dir_all(&cli.out_dir).map_err(estr)?;
        io::write_manifest(&manifest, &cli.out_dir.join("manifest.json")).map_err(estr)?;
        println!("sweep: empty value list, empty manifest written");
        return Ok(0);
    }

    let mut configs = Vec::new();
    for v in &values {
        let mut c = template.clone();
        match args.param.as_str() {
            "c" => c.c = v.parse().map_err(estr)?,
            "grid" => c.grid = v.parse().map_err(estr)?,
            "amplitude" => c.amplitude = v.parse().map_err(estr)?,
            "seed" => c.seed = v.parse().map_err(estr)?,
            "t_max" => c.t_max = v.parse().map_err(estr)?,
            other => {
                eprintln!("error: unsupported sweep parameter `{other}`");
                return Ok(1);
            }
        }
        if let Some(seed) = cli.seed {
            c.seed = seed;
        }
        configs.push((v.clone(), c));
    }

    let results = run_sweep(&configs, &cli.out_dir, cli.threads.max(1));
    for entry in results {
        manifest.runs.push(entry);
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(estr)?;
    io::write_manifest(&manifest, &cli.out_dir.join("manifest.json")).map_err(estr)?;
    println!(
        "sweep: {} runs -> {}",
        manifest.runs.len(),
        cli.out_dir.join("manifest.json").display()
    );
    Ok(0)
}

/// Execute sweep members concurrently; each member is internally sequential
/// and writes into its own directory, so outputs stay deterministic.
pub fn run_sweep(
    configs: &[(String, FlowConfig)],
    out_dir: &Path,
    threads: usize,
) -> Vec<io::ManifestEntry> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<io::ManifestEntry>>> =
        (0..configs.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.min(configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let (label, config) = &configs[i];
                let dir = out_dir.join(format!("run_{}_{}", sanitize(label), i));
                let entry = run_one(label, config, &dir);
                *slots[i].lock().unwrap() = Some(entry);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().unwrap())
        .collect()
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn run_one(label: &str, config: &FlowConfig, dir: &Path) -> io::ManifestEntry {
    match flow::run(config) {
        Ok(trace) => {
            let files = io::write_run_artifacts(&trace, dir).unwrap_or_default();
            let detail = match soliton::classify_run_auto(&trace) {
                Ok(cls) => format!(
                    "{:?}; verdict {:?}; final res_C0 {:.6e}",
                    trace.termination,
                    cls.verdict,
                    trace.records.last().map_or(f64::NAN, |r| r.res_c0)
                ),
                Err(_) => format!(
                    "{:?}; final res_C0 {:.6e}",
                    trace.termination,
                    trace.records.last().map_or(f64::NAN, |r| r.res_c0)
                ),
            };
            io::ManifestEntry {
                label: label.to_string(),
                exit_status: trace.termination.exit_code(),
                files,
                detail,
            }
        }
        Err(e) => io::ManifestEntry {
            label: label.to_string(),
            exit_status: 4,
            files: Vec::new(),
            detail: format!("failed: {e}"),
        },
    }
}

/// Exit code of a finished run, the mapping used by `simulate`.
pub fn exit_code_for(termination: &Termination) -> i32 {
    termination.exit_code()
}
