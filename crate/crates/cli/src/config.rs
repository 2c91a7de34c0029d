//! Problem configuration files and the region shorthand.
//!
//! Problems are declared in TOML: dynamics as expression strings, regions in
//! the shorthand `Rectangle(lb, ub)`, `Sphere(c, r)`, `Torus(c, r_i, r_o)`,
//! with `|` for union, `\` for set difference and `Complement(...)` taken
//! relative to the declared domain's bounding box. Numeric arguments accept
//! constant expressions (`pi/2`, `8/3`).

use anyhow::{bail, Context, Result};
use certsynth::cegis::{CegisConfig, NetworkShape};
use certsynth::certificate::{PropertyKind, PropertyProblem};
use certsynth::expr::{parse as parse_expr, VectorField};
use certsynth::geometry::Region;
use certsynth::learner::LossShape;
use certsynth::Activation;
use serde::Deserialize;
use std::path::Path;
use std::time::Duration;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub property: String,
    pub name: Option<String>,
    pub dynamics: DynamicsSection,
    pub regions: RegionsSection,
    pub certificate: CertificateSection,
    #[serde(default)]
    pub hyperparameters: HyperSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub states: usize,
    #[serde(default)]
    pub inputs: usize,
    pub f: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSection {
    pub domain: String,
    pub init: Option<String>,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Option<String>,
    pub safe: Option<String>,
    pub goal: Option<String>,
    #[serde(rename = "final")]
    pub final_set: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub neurons: Vec<usize>,
    pub activations: Vec<String>,
    pub barrier_neurons: Option<Vec<usize>>,
    pub barrier_activations: Option<Vec<String>>,
    pub controller_neurons: Option<Vec<usize>>,
    pub controller_activations: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub gamma: Option<f64>,
    pub epsilon_origin: Option<f64>,
    pub delta: Option<f64>,
    pub max_loops: Option<usize>,
    pub seed: Option<u64>,
    pub learn_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub samples: Option<usize>,
    pub band_epsilon: Option<f64>,
    pub boundary_band: Option<f64>,
    pub rounding: Option<f64>,
    pub control_loss_weight: Option<f64>,
    pub loss: Option<String>,
    pub leaky_slope: Option<f64>,
    pub train_margin: Option<f64>,
    pub timeout_s: Option<f64>,
    pub max_boxes: Option<u64>,
}

pub fn parse_property_kind(s: &str) -> Result<PropertyKind> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "stability" => PropertyKind::Stability,
        "roa" => PropertyKind::Roa,
        "safety" => PropertyKind::Safety,
        "swa" => PropertyKind::Swa,
        "rwa" => PropertyKind::Rwa,
        "rswa" => PropertyKind::Rswa,
        "rar" => PropertyKind::Rar,
        other => bail!("unknown property kind '{other}' (expected Stability, ROA, Safety, SWA, RWA, RSWA or RAR)"),
    })
}

pub fn parse_activation(s: &str) -> Result<Activation> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "linear" | "poly1" => Activation::Poly(1),
        "poly2" | "square" => Activation::Poly(2),
        "poly4" => Activation::Poly(4),
        "tanh" => Activation::Tanh,
        "tanh2" | "tanhsquared" => Activation::TanhSquared,
        "sigmoid" => Activation::Sigmoid,
        "softplus" => Activation::Softplus,
        other => bail!("unknown activation '{other}'"),
    })
}

pub fn activation_name(a: Activation) -> String {
    match a {
        Activation::Poly(1) => "linear".into(),
        Activation::Poly(j) => format!("poly{j}"),
        Activation::Tanh => "tanh".into(),
        Activation::TanhSquared => "tanh2".into(),
        Activation::Sigmoid => "sigmoid".into(),
        Activation::Softplus => "softplus".into(),
    }
}

fn parse_shape(neurons: &[usize], activations: &[String]) -> Result<NetworkShape> {
    if neurons.len() != activations.len() {
        bail!(
            "network shape mismatch: {} layer sizes but {} activations",
            neurons.len(),
            activations.len()
        );
    }
    let acts = activations
        .iter()
        .map(|s| parse_activation(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkShape::new(neurons.to_vec(), acts))
}

/// Load a problem + run configuration from a TOML file.
pub fn load_problem(path: &Path) -> Result<(PropertyProblem, CegisConfig, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let file: ProblemFile = toml::from_str(&text)
        .with_context(|| format!("config parse error in {}", path.display()))?;
    build_problem(&file)
}

pub fn build_problem(file: &ProblemFile) -> Result<(PropertyProblem, CegisConfig, String)> {
    let kind = parse_property_kind(&file.property)?;
    let n = file.dynamics.states;
    let m = file.dynamics.inputs;
    if file.dynamics.f.len() != n {
        bail!(
            "dynamics declare {} states but {} components",
            n,
            file.dynamics.f.len()
        );
    }
    let components = file
        .dynamics
        .f
        .iter()
        .map(|s| parse_expr(s, n, m).map_err(|e| anyhow::anyhow!("in dynamics '{s}': {e}")))
        .collect::<Result<Vec<_>>>()?;
    let dynamics = VectorField::new(n, m, components).map_err(|e| anyhow::anyhow!("{e}"))?;

    let domain = parse_region(&file.regions.domain, n, None)
        .with_context(|| format!("in region 'domain' = {}", file.regions.domain))?;
    let parse_opt = |name: &str, text: &Option<String>| -> Result<Option<Region>> {
        text.as_ref()
            .map(|t| {
                parse_region(t, n, Some(&domain))
                    .with_context(|| format!("in region '{name}' = {t}"))
            })
            .transpose()
    };
    let problem = PropertyProblem {
        kind,
        dynamics,
        domain: domain.clone(),
        init: parse_opt("init", &file.regions.init)?,
        unsafe_set: parse_opt("unsafe", &file.regions.unsafe_set)?,
        safe_set: parse_opt("safe", &file.regions.safe)?,
        goal: parse_opt("goal", &file.regions.goal)?,
        final_set: parse_opt("final", &file.regions.final_set)?,
        gamma: file.hyperparameters.gamma.unwrap_or(0.1),
        epsilon_origin: file.hyperparameters.epsilon_origin.unwrap_or(0.01),
        delta: file.hyperparameters.delta.unwrap_or(1e-4),
        has_controller: m > 0,
    };

    let mut cfg = CegisConfig::for_problem(&problem);
    let roles = kind.candidate_roles();
    let primary = parse_shape(&file.certificate.neurons, &file.certificate.activations)?;
    if roles.contains(&certsynth::certificate::CandidateRole::V) {
        cfg.v_shape = Some(primary.clone());
    } else {
        cfg.b_shape = Some(primary.clone());
    }
    if let (Some(bn), Some(ba)) = (
        &file.certificate.barrier_neurons,
        &file.certificate.barrier_activations,
    ) {
        cfg.b_shape = Some(parse_shape(bn, ba)?);
    }
    if m > 0 {
        let (cn, ca) = match (
            &file.certificate.controller_neurons,
            &file.certificate.controller_activations,
        ) {
            (Some(cn), Some(ca)) => (cn.clone(), ca.clone()),
            // default controller: linear with hidden width 8
            _ => (vec![8, m], vec!["linear".to_string()]),
        };
        // the last entry of the list is the output width
        if cn.last() != Some(&m) {
            bail!(
                "controller neurons {cn:?} must end with the input count {m}"
            );
        }
        let hidden = &cn[..cn.len() - 1];
        cfg.controller_shape = Some(parse_shape(hidden, &ca)?);
    }

    let h = &file.hyperparameters;
    if let Some(v) = h.max_loops {
        cfg.max_loops = v;
    }
    if let Some(v) = h.seed {
        cfg.seed = v;
    }
    if let Some(v) = h.learn_rate {
        cfg.train.learn_rate = v;
    }
    if let Some(v) = h.max_epochs {
        cfg.train.max_epochs_per_iter = v;
    }
    if let Some(v) = h.samples {
        cfg.train.n_region_samples = v;
        cfg.train.n_domain_samples = v;
    }
    if let Some(v) = h.band_epsilon {
        cfg.train.band_epsilon = v;
    }
    if let Some(v) = h.boundary_band {
        cfg.train.boundary_band = v;
    }
    if let Some(v) = h.rounding {
        cfg.rounding_precision = v;
    }
    if let Some(v) = h.control_loss_weight {
        cfg.train.control_loss_weight = v;
    }
    if let Some(v) = h.train_margin {
        cfg.train.train_margin = v;
    }
    match h.loss.as_deref() {
        None => {}
        Some("leaky") => {
            cfg.train.loss_shape = LossShape::Leaky {
                slope: h.leaky_slope.unwrap_or(0.01),
            }
        }
        Some("softplus") => cfg.train.loss_shape = LossShape::Softplus,
        Some(other) => bail!("unknown loss shape '{other}'"),
    }
    if let Some(v) = h.delta {
        cfg.verify.delta = v;
    }
    if let Some(v) = h.timeout_s {
        cfg.verify.timeout = Duration::from_secs_f64(v);
    }
    if let Some(v) = h.max_boxes {
        cfg.verify.max_boxes = v;
    }

    let name = file
        .name
        .clone()
        .unwrap_or_else(|| format!("{}-problem", kind.name().to_ascii_lowercase()));
    Ok((problem, cfg, name))
}

// ---------------------------------------------------------------------------
// Region shorthand parser
// ---------------------------------------------------------------------------

struct RegionParser<'a> {
    text: &'a str,
    pos: usize,
    dim: usize,
    domain: Option<&'a Region>,
}

/// Parse the Appendix-style region shorthand. `domain` supplies the bounding
/// rectangle for `Complement(...)`; the domain region itself must not use
/// complements.
pub fn parse_region(text: &str, dim: usize, domain: Option<&Region>) -> Result<Region> {
    let mut p = RegionParser {
        text,
        pos: 0,
        dim,
        domain,
    };
    p.skip_ws();
    let r = p.union()?;
    p.skip_ws();
    if p.pos != text.len() {
        bail!("trailing input at offset {}", p.pos);
    }
    if r.dim() != dim {
        bail!("region has dimension {}, expected {dim}", r.dim());
    }
    Ok(r)
}

impl<'a> RegionParser<'a> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            bail!("expected '{c}' at offset {}", self.pos)
        }
    }

    fn union(&mut self) -> Result<Region> {
        let mut parts = vec![self.difference()?];
        while self.eat('|') {
            parts.push(self.difference()?);
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Region::union(parts).map_err(|e| anyhow::anyhow!("{e}"))
        }
    }

    fn difference(&mut self) -> Result<Region> {
        let mut acc = self.primary()?;
        while self.eat('\\') {
            let rhs = self.primary()?;
            acc = Region::difference(acc, rhs).map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        Ok(acc)
    }

    fn primary(&mut self) -> Result<Region> {
        if self.eat('(') {
            let r = self.union()?;
            self.expect(')')?;
            return Ok(r);
        }
        let word = self.keyword()?;
        match word.as_str() {
            "Rectangle" => {
                self.expect('(')?;
                let lb = self.vector()?;
                self.expect(',')?;
                let ub = self.vector()?;
                self.expect(')')?;
                Region::rectangle(lb, ub).map_err(|e| anyhow::anyhow!("{e}"))
            }
            "Sphere" => {
                self.expect('(')?;
                let c = self.vector()?;
                self.expect(',')?;
                let r = self.number()?;
                self.expect(')')?;
                Region::sphere(c, r).map_err(|e| anyhow::anyhow!("{e}"))
            }
            "Torus" => {
                self.expect('(')?;
                let c = self.vector()?;
                self.expect(',')?;
                let r1 = self.number()?;
                self.expect(',')?;
                let r2 = self.number()?;
                self.expect(')')?;
                Region::torus(c, r1, r2).map_err(|e| anyhow::anyhow!("{e}"))
            }
            "Complement" => {
                self.expect('(')?;
                let inner = self.union()?;
                self.expect(')')?;
                let domain = self
                    .domain
                    .context("Complement(...) needs the domain region for its bounding box")?;
                Region::complement(inner, domain.clone()).map_err(|e| anyhow::anyhow!("{e}"))
            }
            other => bail!("unknown region constructor '{other}'"),
        }
    }

    fn keyword(&mut self) -> Result<String> {
        let start = self.pos;
        while self.text[self.pos..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic())
        {
            self.pos += 1;
        }
        if start == self.pos {
            bail!("expected a region constructor at offset {start}");
        }
        let word = self.text[start..self.pos].to_string();
        self.skip_ws();
        Ok(word)
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        self.expect('[')?;
        let mut out = vec![self.number()?];
        while self.eat(',') {
            out.push(self.number()?);
        }
        self.expect(']')?;
        if out.len() != self.dim {
            bail!("vector {out:?} has length {}, expected {}", out.len(), self.dim);
        }
        Ok(out)
    }

    /// A numeric argument: any constant expression up to the next top-level
    /// `,`, `]` or `)`.
    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let mut depth = 0usize;
        for (off, c) in self.text[start..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' if depth > 0 => depth -= 1,
                ')' | ',' | ']' if depth == 0 => {
                    self.pos = start + off;
                    break;
                }
                _ => {}
            }
        }
        if self.pos == start {
            bail!("expected a number at offset {start}");
        }
        let frag = self.text[start..self.pos].trim();
        let expr = parse_expr(frag, 0, 0)
            .map_err(|e| anyhow::anyhow!("bad numeric argument '{frag}': {e}"))?;
        let v = expr
            .eval(&[])
            .map_err(|e| anyhow::anyhow!("bad numeric argument '{frag}': {e}"))?;
        self.skip_ws();
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rectangle() {
        let r = parse_region("Rectangle([-3, -2], [2.5, 1])", 2, None).unwrap();
        assert_eq!(
            r,
            Region::rectangle(vec![-3.0, -2.0], vec![2.5, 1.0]).unwrap()
        );
    }

    #[test]
    fn parses_union_of_spheres() {
        let r = parse_region(
            "(Sphere([-1, 1], 0.1) | Sphere([1, -1], 0.2))",
            2,
            None,
        )
        .unwrap();
        assert!(matches!(r, Region::Union(ref v) if v.len() == 2));
    }

    #[test]
    fn parses_difference() {
        let r = parse_region(
            "Rectangle([-1.5, -1.5], [1.5, 1.5]) \\ Sphere([0.5, 0.5], 0.2)",
            2,
            None,
        )
        .unwrap();
        assert!(matches!(r, Region::Difference(..)));
        assert!(!r.contains(&[0.5, 0.5]).unwrap());
        assert!(r.contains(&[-1.0, -1.0]).unwrap());
    }

    #[test]
    fn torus_arguments_normalise() {
        // both argument orders appear in the wild
        let a = parse_region("Torus([0, 0], 1, 0.01)", 2, None).unwrap();
        let b = parse_region("Torus([0, 0], 0.01, 1)", 2, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn complement_needs_domain() {
        assert!(parse_region("Complement(Rectangle([-1, -1], [1, 1]))", 2, None).is_err());
        let x = Region::rectangle(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap();
        let r =
            parse_region("Complement(Rectangle([-1, -1], [1, 1]))", 2, Some(&x)).unwrap();
        assert!(r.contains(&[1.2, 1.2]).unwrap());
        assert!(!r.contains(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn pi_fractions_in_vectors() {
        let r = parse_region("Rectangle([-10, -10, -pi], [10, 10, pi])", 3, None).unwrap();
        let (lb, ub) = r.bounding_box();
        assert_eq!(lb[2], -std::f64::consts::PI);
        assert_eq!(ub[2], std::f64::consts::PI);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(parse_region("Sphere([0, 0], 1)", 3, None).is_err());
    }

    #[test]
    fn full_problem_file_round_trip() {
        let text = r#"
property = "RWA"
name = "demo"

[dynamics]
states = 2
inputs = 0
f = ["-x0^3 + x1", "-1.0*x0 - 1.73*x1"]

[regions]
domain = "Rectangle([-1.5, -1.5], [1.5, 1.5])"
init = "Rectangle([-0.5, -0.5], [0.5, 0.5])"
safe = "Rectangle([-1, -1], [1, 1])"
goal = "Rectangle([-0.05, -0.05], [0.05, 0.05])"

[certificate]
neurons = [4]
activations = ["poly2"]

[hyperparameters]
gamma = 0.2
seed = 5
"#;
        let file: ProblemFile = toml::from_str(text).unwrap();
        let (problem, cfg, name) = build_problem(&file).unwrap();
        assert_eq!(name, "demo");
        assert_eq!(problem.kind, PropertyKind::Rwa);
        assert_eq!(problem.gamma, 0.2);
        assert_eq!(cfg.seed, 5);
        assert!(cfg.v_shape.is_some());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        use rand::SeedableRng;
        problem.validate(&mut rng).unwrap();
    }

    #[test]
    fn missing_goal_region_fails_validation() {
        let text = r#"
property = "RWA"
[dynamics]
states = 2
f = ["-x0", "-x1"]
[regions]
domain = "Rectangle([-1.5, -1.5], [1.5, 1.5])"
init = "Rectangle([-0.5, -0.5], [0.5, 0.5])"
safe = "Rectangle([-1, -1], [1, 1])"
[certificate]
neurons = [4]
activations = ["poly2"]
"#;
        let file: ProblemFile = toml::from_str(text).unwrap();
        let (problem, _, _) = build_problem(&file).unwrap();
        let err = certsynth::certificate::build_conditions(&problem).unwrap_err();
        assert!(err.to_string().contains("X_G"));
    }

    #[test]
    fn inverted_rectangle_bounds_are_rejected() {
        let err = parse_region("Rectangle([1, 1], [0, 0])", 2, None).unwrap_err();
        assert!(err.to_string().contains("lb"));
    }
}
