//! Command-line interface: benchmark registry, synthesis runs, suite
//! tables, standalone certificate checking, and trajectory simulation.
//!
//! Exit codes: 0 on success / valid certificate, 1 when synthesis or a
//! certificate check fails, 2 on usage and configuration errors.

use anyhow::{bail, Context, Result};
use certsynth_cli::{benchmarks, config, output};
use certsynth::cegis::{
    self, synthesize, CegisConfig, SuiteCase, SynthesisOutcome, SynthesisResult,
};
use certsynth::certificate::{build_conditions, CertScalars, PropertyKind, PropertyProblem};
use certsynth::simulate::{self, PropertyLevels};
use certsynth::verifier::{build_query, to_smtlib, verify_certificate, CandidateSet};
use clap::{Args, Parser, Subcommand};
use output::{CertificateDump, NetworkSidecar, RunRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "certsynth", version, about = "Neural certificate and controller synthesis with a δ-complete interval verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemSource {
    /// Benchmark id from the registry (see `certsynth registry`).
    #[arg(long, conflicts_with = "config")]
    benchmark: Option<u32>,
    /// Problem configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CEGIS loop budget.
    #[arg(long)]
    max_loops: Option<usize>,
    /// Verifier precision δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Decrease rate γ for reach-style certificates.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a certificate (and controller) for one problem.
    Synth {
        #[command(flatten)]
        source: ProblemSource,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory (default: $CERTSYNTH_OUT or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the post-success empirical simulation.
        #[arg(long)]
        skip_sim: bool,
    },
    /// Run a benchmark × seed grid and write the results table.
    Suite {
        /// Comma-separated benchmark ids (default: all non-extended).
        #[arg(long, value_delimiter = ',')]
        benchmarks: Vec<u32>,
        /// Number of seeds (0..n) or an explicit comma-separated list.
        #[arg(long, default_value = "10")]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include the extended (verifier-stress) benchmarks.
        #[arg(long)]
        include_extended: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Verify a dumped certificate against a problem, without training.
    Check {
        /// Certificate dump produced by `synth`.
        #[arg(long)]
        certificate: PathBuf,
        #[command(flatten)]
        source: ProblemSource,
        #[command(flatten)]
        overrides: Overrides,
        /// Write each verification query as SMT-LIB 2 into this directory.
        #[arg(long)]
        dump_smt: Option<PathBuf>,
    },
    /// Integrate trajectories of the (closed-loop) dynamics and check the
    /// property empirically.
    Simulate {
        #[command(flatten)]
        source: ProblemSource,
        /// Certificate dump (required for control problems; also drives the
        /// contour export).
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Number of trajectories.
        #[arg(short, long, default_value_t = 100)]
        n: usize,
        /// Time horizon.
        #[arg(short = 'T', long, default_value_t = 50.0)]
        horizon: f64,
        /// Integration step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// How many trajectories to dump as CSV.
        #[arg(long, default_value_t = 5)]
        dump_trajectories: usize,
    },
    /// Print the benchmark registry.
    Registry,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Registry => {
            print!("{}", benchmarks::format_registry());
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            source,
            overrides,
            out,
            skip_sim,
        } => cmd_synth(&source, &overrides, out, skip_sim),
        Command::Suite {
            benchmarks,
            seeds,
            out,
            include_extended,
            overrides,
        } => cmd_suite(&benchmarks, &seeds, out, include_extended, &overrides),
        Command::Check {
            certificate,
            source,
            overrides,
            dump_smt,
        } => cmd_check(&certificate, &source, &overrides, dump_smt),
        Command::Simulate {
            source,
            certificate,
            n,
            horizon,
            dt,
            seed,
            out,
            dump_trajectories,
        } => cmd_simulate(
            &source,
            certificate,
            n,
            horizon,
            dt,
            seed,
            out,
            dump_trajectories,
        ),
    }
}

struct LoadedProblem {
    problem: PropertyProblem,
    config: CegisConfig,
    name: String,
    benchmark_id: Option<u32>,
}

fn load_source(source: &ProblemSource) -> Result<LoadedProblem> {
    match (&source.benchmark, &source.config) {
        (Some(id), None) => {
            let entry = benchmarks::find(*id)?;
            let (problem, config) = entry.build()?;
            Ok(LoadedProblem {
                problem,
                config,
                name: format!("{}-{}", entry.id, entry.name),
                benchmark_id: Some(*id),
            })
        }
        (None, Some(path)) => {
            let (problem, config, name) = config::load_problem(path)?;
            Ok(LoadedProblem {
                problem,
                config,
                name,
                benchmark_id: None,
            })
        }
        _ => bail!("exactly one of --benchmark or --config is required"),
    }
}

fn apply_overrides(problem: &mut PropertyProblem, cfg: &mut CegisConfig, ov: &Overrides) {
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(max_loops) = ov.max_loops {
        cfg.max_loops = max_loops;
    }
    if let Some(delta) = ov.delta {
        cfg.verify.delta = delta;
        problem.delta = delta;
    }
    if let Some(gamma) = ov.gamma {
        problem.gamma = gamma;
    }
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag.unwrap_or_else(|| {
        std::env::var_os("CERTSYNTH_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
    });
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn sidecar(shape: &Option<cegis::NetworkShape>) -> Option<NetworkSidecar> {
    shape.as_ref().map(|s| NetworkSidecar {
        neurons: s.neurons.clone(),
        activations: s.activations.iter().map(|a| config::activation_name(*a)).collect(),
    })
}

fn cmd_synth(
    source: &ProblemSource,
    overrides: &Overrides,
    out: Option<PathBuf>,
    skip_sim: bool,
) -> Result<ExitCode> {
    let mut loaded = load_source(source)?;
    apply_overrides(&mut loaded.problem, &mut loaded.config, overrides);
    let dir = out_dir(out)?;

    println!(
        "synthesising {} ({}) with seed {}",
        loaded.name,
        loaded.problem.kind.name(),
        loaded.config.seed
    );
    let result = synthesize(&loaded.problem, &loaded.config)?;
    print_result(&result);

    let empirical = match &result.outcome {
        SynthesisOutcome::Success(cert) => {
            let dump = CertificateDump::from_certificate(
                cert,
                &loaded.name,
                loaded.config.seed,
                (
                    sidecar(&loaded.config.v_shape),
                    sidecar(&loaded.config.b_shape),
                    sidecar(&loaded.config.controller_shape),
                ),
            );
            let cert_path = dir.join(format!("{}-seed{}.cert.toml", loaded.name, loaded.config.seed));
            dump.save(&cert_path)?;
            println!("certificate written to {}", cert_path.display());

            if skip_sim {
                None
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(loaded.config.seed ^ 0x5151);
                let levels = PropertyLevels {
                    v: cert.v.clone(),
                    beta: cert.beta,
                };
                let verdict = simulate::check_property(
                    &loaded.problem,
                    &cert.f_closed,
                    &levels,
                    100,
                    1e-3,
                    50.0,
                    5.0 * loaded.problem.epsilon_origin,
                    &mut rng,
                )?;
                println!(
                    "empirical check: {}/{} arrive, {} avoid violations, {} remain violations, {} blowups",
                    verdict.n_arrive_successes,
                    verdict.n_trajectories,
                    verdict.n_avoid_violations,
                    verdict.n_remain_violations,
                    verdict.n_blowups
                );
                Some(verdict)
            }
        }
        SynthesisOutcome::Failure { .. } => None,
    };

    let record = RunRecord::from_result(
        loaded.benchmark_id,
        &loaded.name,
        loaded.config.seed,
        &result,
        empirical.as_ref(),
    );
    record.append(&dir.join("runs.jsonl"))?;

    Ok(if result.outcome.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_result(result: &SynthesisResult) {
    match &result.outcome {
        SynthesisOutcome::Success(cert) => {
            println!(
                "SUCCESS after {} loop(s)  (learn {:.2}s, verify {:.2}s, total {:.2}s)",
                result.loops,
                result.t_learn.as_secs_f64(),
                result.t_verify.as_secs_f64(),
                result.t_total.as_secs_f64()
            );
            if let Some(v) = &cert.v {
                println!("V(x) = {v}");
            }
            if let Some(b) = &cert.b {
                println!("B(x) = {b}");
            }
            for (j, u) in cert.controller.iter().enumerate() {
                println!("u{j}(x) = {u}");
            }
            if let Some(bh) = cert.beta_hat {
                println!("level estimate β̂ = {bh}");
            }
            if let Some(beta) = cert.beta {
                println!("invariance level β = {beta}");
            }
        }
        SynthesisOutcome::Failure { reason, .. } => {
            println!(
                "FAILURE after {} loop(s): {reason}  (total {:.2}s)",
                result.loops,
                result.t_total.as_secs_f64()
            );
        }
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Ok(n) = spec.parse::<u64>() {
        return Ok((0..n).collect());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed '{s}'"))
        })
        .collect()
}

fn cmd_suite(
    ids: &[u32],
    seeds_spec: &str,
    out: Option<PathBuf>,
    include_extended: bool,
    overrides: &Overrides,
) -> Result<ExitCode> {
    let seeds = parse_seeds(seeds_spec)?;
    let entries = if ids.is_empty() {
        benchmarks::registry()
            .into_iter()
            .filter(|b| include_extended || !b.extended)
            .collect::<Vec<_>>()
    } else {
        ids.iter()
            .map(|id| benchmarks::find(*id))
            .collect::<Result<Vec<_>>>()?
    };
    let dir = out_dir(out)?;

    let mut cases = Vec::new();
    for entry in &entries {
        let (mut problem, mut config) = entry.build()?;
        apply_overrides(&mut problem, &mut config, overrides);
        cases.push(SuiteCase {
            name: entry.id.to_string(),
            problem,
            config,
        });
    }
    println!(
        "running {} benchmark(s) × {} seed(s)",
        cases.len(),
        seeds.len()
    );
    let cells = cegis::run_suite(&cases, &seeds);

    let meta = |name: &str| -> (u32, String, usize, usize) {
        let id: u32 = name.parse().unwrap_or(0);
        match benchmarks::find(id) {
            Ok(b) => (id, b.property.name().to_string(), b.states, b.inputs),
            Err(_) => (id, "?".to_string(), 0, 0),
        }
    };
    let csv = output::suite_csv(&cells, &meta);
    let csv_path = dir.join("suite.csv");
    std::fs::write(&csv_path, &csv)?;

    for cell in &cells {
        let record = RunRecord {
            benchmark: cell.name.parse().ok(),
            problem: cell.name.clone(),
            seed: cell.seed,
            success: cell.success,
            loops: cell.loops,
            t_learn_s: cell.t_learn_s,
            t_verify_s: cell.t_verify_s,
            t_total_s: cell.t_total_s,
            cex_count: 0,
            failure_reason: cell.failure_reason.clone(),
            empirical: None,
        };
        record.append(&dir.join("runs.jsonl"))?;
    }

    println!("\nbenchmark  runs  success  t_min  t_mean  t_max");
    for s in cegis::summarize(&cells) {
        println!(
            "{:>9}  {:>4}  {:>6.1}%  {:>5.2}  {:>6.2}  {:>5.2}",
            s.name,
            s.runs,
            100.0 * s.successes as f64 / s.runs.max(1) as f64,
            s.t_min,
            s.t_mean,
            s.t_max
        );
    }
    println!("\ntable written to {}", csv_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(
    certificate: &Path,
    source: &ProblemSource,
    overrides: &Overrides,
    dump_smt: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut loaded = load_source(source)?;
    apply_overrides(&mut loaded.problem, &mut loaded.config, overrides);
    let dump = CertificateDump::load(certificate)?;
    let cert = dump.to_certificate(&loaded.problem)?;

    let conditions = build_conditions(&loaded.problem).map_err(|e| anyhow::anyhow!("{e}"))?;
    let candidates = CandidateSet {
        v: cert.v.clone(),
        b: cert.b.clone(),
        f_closed: cert.f_closed.clone(),
    };
    let scalars = CertScalars {
        beta_hat: cert.beta_hat,
        beta: cert.beta,
    };

    if let Some(dir) = dump_smt {
        std::fs::create_dir_all(&dir)?;
        for cond in &conditions {
            if cond.beta_dependent && scalars.beta.is_none() {
                continue;
            }
            let q = build_query(cond, &candidates, &scalars, &loaded.config.verify)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let path = dir.join(format!("{}.smt2", cond.name));
            std::fs::write(&path, to_smtlib(&q))?;
            println!("wrote {}", path.display());
        }
    }

    if loaded.problem.kind == PropertyKind::Rswa && cert.beta.is_none() {
        println!("certificate is missing the RSWA level β");
        return Ok(ExitCode::from(1));
    }
    let report = verify_certificate(
        &loaded.problem,
        &conditions,
        &candidates,
        &scalars,
        &loaded.config.verify,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    for (name, verdict) in &report.verdicts {
        match verdict {
            certsynth::VerdictOrCex::Valid => println!("{name}: valid"),
            certsynth::VerdictOrCex::Counterexample {
                point, violation, ..
            } => println!("{name}: counterexample at {point:?} (margin {violation:.3e})"),
            certsynth::VerdictOrCex::DeltaSat { point, .. } => {
                println!("{name}: δ-sat near {point:?}")
            }
            certsynth::VerdictOrCex::ResourceOut { boxes, .. } => {
                println!("{name}: resource budget exhausted ({boxes} boxes)")
            }
        }
    }
    if report.all_valid {
        println!("certificate is VALID");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("certificate is NOT valid");
        Ok(ExitCode::from(1))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    source: &ProblemSource,
    certificate: Option<PathBuf>,
    n: usize,
    horizon: f64,
    dt: f64,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dump_trajectories: usize,
) -> Result<ExitCode> {
    let loaded = load_source(source)?;
    let problem = loaded.problem;
    let dir = out_dir(out)?;

    let cert = certificate
        .map(|p| CertificateDump::load(&p).and_then(|d| d.to_certificate(&problem)))
        .transpose()?;
    let f_closed = match &cert {
        Some(c) => c.f_closed.clone(),
        None => {
            if problem.dynamics.dim_input > 0 {
                bail!("control problems need --certificate to supply the feedback law");
            }
            problem.dynamics.clone()
        }
    };
    let levels = PropertyLevels {
        v: cert.as_ref().and_then(|c| c.v.clone()),
        beta: cert.as_ref().and_then(|c| c.beta),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let verdict = simulate::check_property(
        &problem,
        &f_closed,
        &levels,
        n,
        dt,
        horizon,
        5.0 * problem.epsilon_origin,
        &mut rng,
    )?;
    println!(
        "{} trajectories: {} arrive, {} avoid violations, {} remain violations, {} blowups",
        verdict.n_trajectories,
        verdict.n_arrive_successes,
        verdict.n_avoid_violations,
        verdict.n_remain_violations,
        verdict.n_blowups
    );

    // trajectory dumps
    let init = problem.init.clone().unwrap_or_else(|| problem.domain.clone());
    let starts = certsynth::geometry::sample_interior(&init, dump_trajectories, &mut rng)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    for (i, x0) in starts.points.iter().enumerate() {
        let traj = simulate::integrate(&f_closed, x0, dt, horizon)?;
        let path = dir.join(format!("traj_{i:03}.csv"));
        std::fs::write(&path, simulate::trajectory_csv(&traj))?;
    }

    // contour export of the certificate over a 2-D domain
    if problem.dynamics.dim_state == 2 {
        if let Some(v) = &levels.v {
            let (lb, ub) = problem.domain.bounding_box();
            let grid = simulate::contour_csv(v, &[lb[0], lb[1]], &[ub[0], ub[1]], 101);
            std::fs::write(dir.join("contour_v.csv"), grid)?;
        }
        if let Some(b) = cert.as_ref().and_then(|c| c.b.clone()) {
            let (lb, ub) = problem.domain.bounding_box();
            let grid = simulate::contour_csv(&b, &[lb[0], lb[1]], &[ub[0], ub[1]], 101);
            std::fs::write(dir.join("contour_b.csv"), grid)?;
        }
    }
    println!("wrote trajectory and contour CSVs to {}", dir.display());

    let clean = verdict.clean(!matches!(problem.kind, PropertyKind::Safety));
    Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
