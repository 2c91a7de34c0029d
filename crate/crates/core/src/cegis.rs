//! The counterexample-guided synthesis loop.
//!
//! One iteration trains the candidate networks on the sampled datasets,
//! rounds the trained candidates into symbolic form, closes the loop with
//! the rounded controller, verifies every certificate condition by interval
//! branch-and-bound, and on refutation expands the witness into fresh
//! training points. Success requires the verifier to accept the *rounded*
//! candidates; the stored certificate is exactly the verified object.

use crate::certificate::{
    build_conditions, estimate_roa_level, rswa_beta_search, BetaSearch, CandidateRole,
    CertScalars, Condition, ProblemError, PropertyKind, PropertyProblem,
};
use crate::consolidator::{consolidate, ConsolidateConfig};
use crate::expr::{Expr, VectorField};
use crate::geometry;
use crate::learner::{
    train_iteration, Candidates, Dataset, OpenLoop, Optimizers, TrainConfig, TrainError,
};
use crate::network::{close_loop_symbolic, Activation, Network, NetworkError};
use crate::verifier::{
    build_query, check, verify_certificate, CandidateSet, VerdictOrCex, VerifierError,
    VerifyConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CegisError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error("property {0:?} requires a '{1}' network shape")]
    MissingShape(PropertyKind, &'static str),
}

/// Architecture of one candidate network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkShape {
    pub neurons: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl NetworkShape {
    pub fn new(neurons: Vec<usize>, activations: Vec<Activation>) -> NetworkShape {
        NetworkShape {
            neurons,
            activations,
        }
    }
}

/// Everything configurable about one synthesis run.
#[derive(Debug, Clone)]
pub struct CegisConfig {
    pub max_loops: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub verify: VerifyConfig,
    /// Coefficient rounding precision applied before verification.
    pub rounding_precision: f64,
    pub v_shape: Option<NetworkShape>,
    pub b_shape: Option<NetworkShape>,
    pub controller_shape: Option<NetworkShape>,
    /// Samples for the sound ROA level estimate.
    pub roa_level_samples: usize,
    pub roa_margin: f64,
    /// RSWA β line-search grid size and top margin.
    pub rswa_grid: usize,
    pub rswa_margin: f64,
    pub keep_trace: bool,
}

impl Default for CegisConfig {
    fn default() -> Self {
        CegisConfig {
            max_loops: 25,
            seed: 0,
            train: TrainConfig::default(),
            verify: VerifyConfig::default(),
            rounding_precision: 1e-3,
            v_shape: None,
            b_shape: None,
            controller_shape: None,
            roa_level_samples: 10_000,
            roa_margin: 0.05,
            rswa_grid: 10,
            rswa_margin: 0.05,
            keep_trace: false,
        }
    }
}

impl CegisConfig {
    /// Kind-aware defaults: two-function certificates get the longer loop
    /// budget, control reach problems enable the cosine loss.
    pub fn for_problem(p: &PropertyProblem) -> CegisConfig {
        let mut cfg = CegisConfig::default();
        if matches!(p.kind, PropertyKind::Swa | PropertyKind::Rar) {
            cfg.max_loops = 100;
        }
        if p.has_controller
            && matches!(
                p.kind,
                PropertyKind::Rwa | PropertyKind::Rswa | PropertyKind::Rar
            )
        {
            cfg.train.control_loss_weight = 1.0;
        }
        cfg
    }
}

/// The verified certificate: rounded symbolic candidates and the exact
/// closed-loop field they were verified against.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub kind: PropertyKind,
    pub v: Option<Expr>,
    pub b: Option<Expr>,
    pub controller: Vec<Expr>,
    pub f_closed: VectorField,
    pub beta_hat: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum SynthesisOutcome {
    Success(Certificate),
    Failure {
        reason: String,
        last_counterexamples: usize,
    },
}

impl SynthesisOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, SynthesisOutcome::Success(_))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            SynthesisOutcome::Success(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub outcome: SynthesisOutcome,
    pub loops: usize,
    pub t_learn: Duration,
    pub t_verify: Duration,
    pub t_total: Duration,
    pub cex_count: usize,
}

fn init_networks(
    p: &PropertyProblem,
    cfg: &CegisConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Candidates, CegisError> {
    let n = p.dynamics.dim_state;
    let roles = p.kind.candidate_roles();
    // structural positivity applies to the Lyapunov-style V of the
    // stability-flavoured kinds; reach certificates must cross zero
    let v_positive = matches!(
        p.kind,
        PropertyKind::Stability | PropertyKind::Roa | PropertyKind::Swa
    );
    let v = if roles.contains(&CandidateRole::V) {
        let shape = cfg
            .v_shape
            .as_ref()
            .ok_or(CegisError::MissingShape(p.kind, "V"))?;
        Some(Network::init(
            n,
            &shape.neurons,
            &shape.activations,
            1,
            v_positive,
            false,
            rng,
        )?)
    } else {
        None
    };
    let b = if roles.contains(&CandidateRole::B) {
        let shape = cfg
            .b_shape
            .as_ref()
            .ok_or(CegisError::MissingShape(p.kind, "B"))?;
        Some(Network::init(
            n,
            &shape.neurons,
            &shape.activations,
            1,
            false,
            false,
            rng,
        )?)
    } else {
        None
    };
    let controller = if p.has_controller {
        let shape = cfg
            .controller_shape
            .as_ref()
            .ok_or(CegisError::MissingShape(p.kind, "controller"))?;
        Some(Network::init(
            n,
            &shape.neurons,
            &shape.activations,
            p.dynamics.dim_input,
            false,
            true,
            rng,
        )?)
    } else {
        None
    };
    Ok(Candidates { v, b, controller })
}

/// Round the trained networks into the symbolic candidates the verifier
/// (and the certificate dump) will use.
fn translate(
    candidates: &Candidates,
    dynamics: &VectorField,
    precision: f64,
) -> Result<(CandidateSet, Vec<Expr>), CegisError> {
    let v = candidates
        .v
        .as_ref()
        .map(|n| n.to_symbolic_scalar().round_coefficients(precision));
    let b = candidates
        .b
        .as_ref()
        .map(|n| n.to_symbolic_scalar().round_coefficients(precision));
    let controller: Vec<Expr> = match candidates.controller.as_ref() {
        Some(ctrl) => ctrl
            .to_symbolic()
            .into_iter()
            .map(|e| e.round_coefficients(precision))
            .collect(),
        None => Vec::new(),
    };
    let f_closed = if dynamics.dim_input > 0 {
        close_loop_symbolic(dynamics, &controller)?
    } else {
        dynamics.clone()
    };
    Ok((
        CandidateSet {
            v,
            b,
            f_closed: f_closed.clone(),
        },
        controller,
    ))
}

/// Run the synthesis loop to completion.
pub fn synthesize(
    problem: &PropertyProblem,
    cfg: &CegisConfig,
) -> Result<SynthesisResult, CegisError> {
    let t_start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    problem.validate(&mut rng)?;
    let conditions = build_conditions(problem)?;
    let mut candidates = init_networks(problem, cfg, &mut rng)?;
    let open_loop = OpenLoop::new(problem.dynamics.clone());
    let mut dataset = Dataset::generate(problem, &conditions, &cfg.train, &mut rng)?;
    let mut optimizers = Optimizers::new(&candidates, cfg.train.learn_rate);

    let mut t_learn = Duration::ZERO;
    let mut t_verify = Duration::ZERO;
    let mut last_refutation = String::from("untrained candidate");
    // flipped on after a failed β line search: from then on the learner
    // also trains the β-dependent conditions against a surrogate level
    let mut train_beta = false;

    for loop_idx in 1..=cfg.max_loops {
        // (1) learner
        let t0 = Instant::now();
        train_iteration(
            &mut candidates,
            problem,
            &conditions,
            &open_loop,
            &mut dataset,
            &mut optimizers,
            &cfg.train,
            train_beta,
            &mut rng,
            cfg.keep_trace,
        )?;
        t_learn += t0.elapsed();

        // (2) translator: round, then close the loop symbolically
        let (candidate_set, controller_exprs) =
            translate(&candidates, &problem.dynamics, cfg.rounding_precision)?;

        // (3) property-specific preprocessing: fresh ROA level estimate
        let t1 = Instant::now();
        let beta_hat = if conditions_use_beta_hat(&conditions) {
            let v_net = candidates.v.as_ref().expect("ROA problems carry V");
            let init = problem.init.as_ref().expect("ROA problems carry X_I");
            Some(estimate_roa_level(
                v_net,
                init,
                cfg.roa_level_samples,
                cfg.roa_margin,
                &mut rng,
            )?)
        } else {
            None
        };
        let mut scalars = CertScalars {
            beta_hat,
            beta: None,
        };

        // (4) verifier
        let report =
            verify_certificate(problem, &conditions, &candidate_set, &scalars, &cfg.verify)?;
        t_verify += t1.elapsed();

        if report.all_valid {
            // (5) RSWA: the β-dependent conditions go through a line search
            if problem.kind == PropertyKind::Rswa {
                let t2 = Instant::now();
                let beta = search_rswa_beta(
                    problem,
                    &conditions,
                    &candidate_set,
                    &scalars,
                    cfg,
                    &mut rng,
                )?;
                t_verify += t2.elapsed();
                match beta {
                    BetaOutcome::Found(beta) => scalars.beta = Some(beta),
                    BetaOutcome::Failed { witness } => {
                        last_refutation = "no feasible RSWA level β".to_string();
                        train_beta = true;
                        if let Some((ci, point, tried_beta)) = witness {
                            let cond = &conditions[ci];
                            let candidate_expr = candidate_set
                                .role(cond.target)
                                .expect("β conditions target V")
                                .clone();
                            let trial = CertScalars {
                                beta_hat: scalars.beta_hat,
                                beta: Some(tried_beta),
                            };
                            let nets = candidates.clone();
                            let level_check =
                                move |role: CandidateRole, p: &[f64]| -> Option<f64> {
                                    nets.role(role).and_then(|n| n.forward_scalar(p).ok())
                                };
                            let ccfg = ConsolidateConfig::for_diameter(
                                cond.domain.base_region().diameter(),
                                cfg.train.band_epsilon,
                            );
                            let bundle = consolidate(
                                &point,
                                cond,
                                &candidate_expr,
                                &candidate_set.f_closed,
                                &trial,
                                &level_check,
                                &ccfg,
                                &mut rng,
                            );
                            dataset.append_cex(ci, &bundle.cloud);
                        }
                        continue; // back to training
                    }
                }
            }
            return Ok(SynthesisResult {
                outcome: SynthesisOutcome::Success(Certificate {
                    kind: problem.kind,
                    v: candidate_set.v,
                    b: candidate_set.b,
                    controller: controller_exprs,
                    f_closed: candidate_set.f_closed,
                    beta_hat: scalars.beta_hat,
                    beta: scalars.beta,
                }),
                loops: loop_idx,
                t_learn,
                t_verify,
                t_total: t_start.elapsed(),
                cex_count: dataset.cex_appended,
            });
        }

        // (6) consolidate the witness into the dataset
        if let Some((name, verdict)) = report.refutation() {
            last_refutation = format!("{name}: {}", verdict_summary(verdict));
            if let Some(witness) = verdict.witness() {
                let (ci, cond) = conditions
                    .iter()
                    .enumerate()
                    .find(|(_, c)| c.name == name)
                    .expect("refuted condition is in the list");
                let candidate_expr = candidate_set
                    .role(cond.target)
                    .expect("refuted condition has a candidate")
                    .clone();
                let nets = candidates.clone();
                let level_check = move |role: CandidateRole, p: &[f64]| -> Option<f64> {
                    nets.role(role).and_then(|n| n.forward_scalar(p).ok())
                };
                let ccfg = ConsolidateConfig::for_diameter(
                    cond.domain.base_region().diameter(),
                    cfg.train.band_epsilon,
                );
                let bundle = consolidate(
                    witness,
                    cond,
                    &candidate_expr,
                    &candidate_set.f_closed,
                    &scalars,
                    &level_check,
                    &ccfg,
                    &mut rng,
                );
                dataset.append_cex(ci, &bundle.cloud);
            } else {
                // resource exhaustion: keep training on the same data
            }
        }
    }

    Ok(SynthesisResult {
        outcome: SynthesisOutcome::Failure {
            reason: format!("out of loops ({}); last: {last_refutation}", cfg.max_loops),
            last_counterexamples: dataset.cex_appended,
        },
        loops: cfg.max_loops,
        t_learn,
        t_verify,
        t_total: t_start.elapsed(),
        cex_count: dataset.cex_appended,
    })
}

fn conditions_use_beta_hat(conditions: &[Condition]) -> bool {
    use crate::certificate::ScalarRef;
    conditions.iter().any(|c| {
        c.threshold == ScalarRef::BetaHat
            || c.domain
                .bounds
                .iter()
                .any(|b| b.threshold == ScalarRef::BetaHat)
    })
}

/// Result of [`search_rswa_beta`]: either a certified level, or failure
/// with the refutation witness of the most promising grid candidate.
enum BetaOutcome {
    Found(f64),
    Failed {
        /// (condition index, witness point, β tried) of the first
        /// refutation seen during the search.
        witness: Option<(usize, Vec<f64>, f64)>,
    },
}

/// Sample the rounded V over ∂X_F and X_F, then line-search β, certifying
/// each candidate level with the verifier.
fn search_rswa_beta(
    problem: &PropertyProblem,
    conditions: &[Condition],
    candidate_set: &CandidateSet,
    scalars: &CertScalars,
    cfg: &CegisConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BetaOutcome, CegisError> {
    let final_set = problem.final_set.as_ref().expect("RSWA carries X_F");
    let v = candidate_set.v.as_ref().expect("RSWA carries V");
    let band = 0.01 * final_set.diameter().max(1e-6);
    let boundary = geometry::sample_boundary(final_set, 2_000, band, rng)?;
    let interior = geometry::sample_interior(final_set, 2_000, rng)?;
    let eval_all = |pts: &[Vec<f64>]| -> Vec<f64> {
        pts.iter().filter_map(|p| v.eval(p).ok()).collect()
    };
    let on_boundary = eval_all(&boundary.points);
    let on_interior = eval_all(&interior.points);

    let beta_conditions: Vec<(usize, &Condition)> = conditions
        .iter()
        .enumerate()
        .filter(|(_, c)| c.beta_dependent)
        .collect();
    let range = on_boundary.iter().cloned().fold(f64::INFINITY, f64::min)
        - on_interior.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = cfg.rswa_margin * range.abs().max(1e-9);

    let mut first_witness: Option<(usize, Vec<f64>, f64)> = None;
    let found = rswa_beta_search(
        &on_boundary,
        &on_interior,
        cfg.rswa_grid,
        margin,
        |beta| -> Result<bool, CegisError> {
            let trial = CertScalars {
                beta_hat: scalars.beta_hat,
                beta: Some(beta),
            };
            for (ci, cond) in &beta_conditions {
                let query = build_query(cond, candidate_set, &trial, &cfg.verify)?;
                let verdict = check(&query);
                if !verdict.is_valid() {
                    if first_witness.is_none() {
                        if let Some(point) = verdict.witness() {
                            first_witness = Some((*ci, point.to_vec(), beta));
                        }
                    }
                    return Ok(false);
                }
            }
            Ok(true)
        },
    )?;
    Ok(match found {
        BetaSearch::Found(beta) => BetaOutcome::Found(beta),
        BetaSearch::Exhausted { .. } => BetaOutcome::Failed {
            witness: first_witness,
        },
    })
}

fn verdict_summary(v: &VerdictOrCex) -> String {
    match v {
        VerdictOrCex::Valid => "valid".to_string(),
        VerdictOrCex::Counterexample {
            point, violation, ..
        } => {
            format!("counterexample at {point:?} (margin {violation:.3e})")
        }
        VerdictOrCex::DeltaSat { point, .. } => format!("δ-sat near {point:?}"),
        VerdictOrCex::ResourceOut { boxes, elapsed, .. } => {
            format!("resource out after {boxes} boxes / {elapsed:?}")
        }
    }
}

/// Re-verify a stored certificate (the acceptance path behind `check`-style
/// CLI usage). Returns the full per-condition report.
pub fn reverify(
    problem: &PropertyProblem,
    cert: &Certificate,
    verify_cfg: &VerifyConfig,
) -> Result<bool, CegisError> {
    let conditions = build_conditions(problem)?;
    let candidate_set = CandidateSet {
        v: cert.v.clone(),
        b: cert.b.clone(),
        f_closed: cert.f_closed.clone(),
    };
    let scalars = CertScalars {
        beta_hat: cert.beta_hat,
        beta: cert.beta,
    };
    let report = verify_certificate(problem, &conditions, &candidate_set, &scalars, verify_cfg)?;
    if !report.all_valid {
        return Ok(false);
    }
    // β-dependent conditions are skipped by verify_certificate only when β
    // is absent; a stored RSWA certificate carries it, so they ran above.
    if problem.kind == PropertyKind::Rswa && cert.beta.is_none() {
        return Ok(false);
    }
    Ok(true)
}

/// One (problem, config) cell of a benchmark suite.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub name: String,
    pub problem: PropertyProblem,
    pub config: CegisConfig,
}

/// Result row of one suite cell.
#[derive(Debug, Clone)]
pub struct SuiteCell {
    pub name: String,
    pub seed: u64,
    pub success: bool,
    pub loops: usize,
    pub t_learn_s: f64,
    pub t_verify_s: f64,
    pub t_total_s: f64,
    pub failure_reason: Option<String>,
}

/// Run every (case, seed) cell, in parallel, recording failures without
/// aborting the suite.
pub fn run_suite(cases: &[SuiteCase], seeds: &[u64]) -> Vec<SuiteCell> {
    let mut cells: Vec<(usize, u64)> = Vec::new();
    for (i, _) in cases.iter().enumerate() {
        for &s in seeds {
            cells.push((i, s));
        }
    }
    cells
        .par_iter()
        .map(|&(i, seed)| {
            let case = &cases[i];
            let mut config = case.config.clone();
            config.seed = seed;
            match synthesize(&case.problem, &config) {
                Ok(result) => SuiteCell {
                    name: case.name.clone(),
                    seed,
                    success: result.outcome.is_success(),
                    loops: result.loops,
                    t_learn_s: result.t_learn.as_secs_f64(),
                    t_verify_s: result.t_verify.as_secs_f64(),
                    t_total_s: result.t_total.as_secs_f64(),
                    failure_reason: match &result.outcome {
                        SynthesisOutcome::Failure { reason, .. } => Some(reason.clone()),
                        _ => None,
                    },
                },
                Err(err) => SuiteCell {
                    name: case.name.clone(),
                    seed,
                    success: false,
                    loops: 0,
                    t_learn_s: 0.0,
                    t_verify_s: 0.0,
                    t_total_s: 0.0,
                    failure_reason: Some(err.to_string()),
                },
            }
        })
        .collect()
}

/// Success rate and wall-time statistics per suite case, over successes
/// only (failed runs have no meaningful duration).
#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub name: String,
    pub runs: usize,
    pub successes: usize,
    pub t_min: f64,
    pub t_mean: f64,
    pub t_max: f64,
}

pub fn summarize(cells: &[SuiteCell]) -> Vec<SuiteSummary> {
    let mut names: Vec<String> = Vec::new();
    for c in cells {
        if !names.contains(&c.name) {
            names.push(c.name.clone());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&SuiteCell> = cells.iter().filter(|c| c.name == name).collect();
            let times: Vec<f64> = group
                .iter()
                .filter(|c| c.success)
                .map(|c| c.t_total_s)
                .collect();
            SuiteSummary {
                name,
                runs: group.len(),
                successes: times.len(),
                t_min: times.iter().cloned().fold(f64::INFINITY, f64::min),
                t_mean: if times.is_empty() {
                    f64::NAN
                } else {
                    times.iter().sum::<f64>() / times.len() as f64
                },
                t_max: times.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}
