//! Certificate dump files, suite CSV, and append-only run records.
//!
//! A certificate dump is TOML carrying the pretty-printed (already rounded)
//! expressions the verifier accepted, the levels β̂/β when applicable, and
//! network-shape sidecars so a dump is self-describing. `check` can re-verify
//! a dump against its problem without retraining.

use anyhow::{Context, Result};
use certsynth::cegis::{Certificate, SuiteCell, SynthesisResult};
use certsynth::certificate::PropertyProblem;
use certsynth::expr::parse as parse_expr;
use certsynth::network::close_loop_symbolic;
use certsynth::simulate::EmpiricalVerdict;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSidecar {
    pub neurons: Vec<usize>,
    pub activations: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateDump {
    pub property: String,
    pub problem: String,
    pub seed: u64,
    pub v: Option<String>,
    pub b: Option<String>,
    #[serde(default)]
    pub controller: Vec<String>,
    pub beta_hat: Option<f64>,
    pub beta: Option<f64>,
    pub v_network: Option<NetworkSidecar>,
    pub b_network: Option<NetworkSidecar>,
    pub controller_network: Option<NetworkSidecar>,
}

impl CertificateDump {
    pub fn from_certificate(
        cert: &Certificate,
        problem_name: &str,
        seed: u64,
        sidecars: (Option<NetworkSidecar>, Option<NetworkSidecar>, Option<NetworkSidecar>),
    ) -> CertificateDump {
        CertificateDump {
            property: cert.kind.name().to_string(),
            problem: problem_name.to_string(),
            seed,
            v: cert.v.as_ref().map(|e| e.to_string()),
            b: cert.b.as_ref().map(|e| e.to_string()),
            controller: cert.controller.iter().map(|e| e.to_string()).collect(),
            beta_hat: cert.beta_hat,
            beta: cert.beta,
            v_network: sidecars.0,
            b_network: sidecars.1,
            controller_network: sidecars.2,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serialising certificate")?;
        std::fs::write(path, text)
            .with_context(|| format!("writing certificate to {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CertificateDump> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading certificate from {}", path.display()))?;
        toml::from_str(&text).context("certificate file parse error")
    }

    /// Rebuild the verified object for the given problem: parse the stored
    /// expressions and close the loop with the stored controller.
    pub fn to_certificate(&self, problem: &PropertyProblem) -> Result<Certificate> {
        let n = problem.dynamics.dim_state;
        let parse_one = |s: &String| {
            parse_expr(s, n, 0).map_err(|e| anyhow::anyhow!("in stored expression '{s}': {e}"))
        };
        let v = self.v.as_ref().map(parse_one).transpose()?;
        let b = self.b.as_ref().map(parse_one).transpose()?;
        let controller = self
            .controller
            .iter()
            .map(parse_one)
            .collect::<Result<Vec<_>>>()?;
        let f_closed = if problem.dynamics.dim_input > 0 {
            anyhow::ensure!(
                controller.len() == problem.dynamics.dim_input,
                "certificate has {} controller outputs, dynamics expect {}",
                controller.len(),
                problem.dynamics.dim_input
            );
            close_loop_symbolic(&problem.dynamics, &controller)
                .map_err(|e| anyhow::anyhow!("{e}"))?
        } else {
            problem.dynamics.clone()
        };
        let kind = crate::config::parse_property_kind(&self.property)?;
        anyhow::ensure!(
            kind == problem.kind,
            "certificate was synthesised for {} but the problem is {}",
            self.property,
            problem.kind.name()
        );
        Ok(Certificate {
            kind,
            v,
            b,
            controller,
            f_closed,
            beta_hat: self.beta_hat,
            beta: self.beta,
        })
    }
}

/// Suite CSV with the fixed column set.
pub fn suite_csv(cells: &[SuiteCell], meta: &dyn Fn(&str) -> (u32, String, usize, usize)) -> String {
    let mut out =
        String::from("benchmark,property,N_s,N_u,seed,outcome,loops,t_learn_s,t_verify_s,t_total_s\n");
    for c in cells {
        let (id, property, ns, nu) = meta(&c.name);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.2},{:.2},{:.2}\n",
            id,
            property,
            ns,
            nu,
            c.seed,
            if c.success { "success" } else { "failure" },
            c.loops,
            c.t_learn_s,
            c.t_verify_s,
            c.t_total_s
        ));
    }
    out
}

/// One append-only record per completed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: Option<u32>,
    pub problem: String,
    pub seed: u64,
    pub success: bool,
    pub loops: usize,
    pub t_learn_s: f64,
    pub t_verify_s: f64,
    pub t_total_s: f64,
    pub cex_count: usize,
    pub failure_reason: Option<String>,
    pub empirical: Option<EmpiricalSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub trajectories: usize,
    pub avoid_violations: usize,
    pub arrive_successes: usize,
    pub remain_violations: usize,
    pub blowups: usize,
}

impl From<&EmpiricalVerdict> for EmpiricalSummary {
    fn from(v: &EmpiricalVerdict) -> Self {
        EmpiricalSummary {
            trajectories: v.n_trajectories,
            avoid_violations: v.n_avoid_violations,
            arrive_successes: v.n_arrive_successes,
            remain_violations: v.n_remain_violations,
            blowups: v.n_blowups,
        }
    }
}

impl RunRecord {
    pub fn from_result(
        benchmark: Option<u32>,
        problem: &str,
        seed: u64,
        result: &SynthesisResult,
        empirical: Option<&EmpiricalVerdict>,
    ) -> RunRecord {
        RunRecord {
            benchmark,
            problem: problem.to_string(),
            seed,
            success: result.outcome.is_success(),
            loops: result.loops,
            t_learn_s: result.t_learn.as_secs_f64(),
            t_verify_s: result.t_verify.as_secs_f64(),
            t_total_s: result.t_total.as_secs_f64(),
            cex_count: result.cex_count,
            failure_reason: match &result.outcome {
                certsynth::cegis::SynthesisOutcome::Failure { reason, .. } => {
                    Some(reason.clone())
                }
                _ => None,
            },
            empirical: empirical.map(EmpiricalSummary::from),
        }
    }

    /// Append as one JSON line.
    pub fn append(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening run record {}", path.display()))?;
        let line = serde_json::to_string(self)?;
        writeln!(file, "{line}")?;
        Ok(())
    }
}
