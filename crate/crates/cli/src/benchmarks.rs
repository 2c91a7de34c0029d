//! The built-in benchmark registry.
//!
//! Twenty-six problems spanning all seven property kinds, with the network
//! shapes used in the reference experiments. Entries 8 and 9 are flagged
//! `extended`: their verification queries stress high-dimensional interval
//! splitting and they are excluded from the default acceptance runs.

use crate::config::{parse_activation, parse_region};
use anyhow::{bail, Context, Result};
use certsynth::cegis::{CegisConfig, NetworkShape};
use certsynth::certificate::{CandidateRole, PropertyKind, PropertyProblem};
use certsynth::expr::{parse as parse_expr, VectorField};

#[derive(Debug, Clone)]
pub struct BenchmarkEntry {
    pub id: u32,
    pub name: &'static str,
    pub property: PropertyKind,
    pub states: usize,
    pub inputs: usize,
    pub dynamics: Vec<&'static str>,
    /// (role, shorthand) pairs; roles: domain, init, unsafe, safe, goal, final.
    pub regions: Vec<(&'static str, &'static str)>,
    pub neurons: Vec<usize>,
    pub activations: Vec<&'static str>,
    /// Second function (the barrier of SWA/RAR pairs).
    pub alt_neurons: Option<Vec<usize>>,
    pub alt_activations: Option<Vec<&'static str>>,
    /// Controller shape; the final entry is the output width m.
    pub ctrl_neurons: Option<Vec<usize>>,
    pub ctrl_activations: Option<Vec<&'static str>>,
    /// Excluded from default suite runs (verifier scalability stress).
    pub extended: bool,
}

pub fn registry() -> Vec<BenchmarkEntry> {
    use PropertyKind::*;
    let e = |id,
             name,
             property,
             states,
             inputs,
             dynamics: Vec<&'static str>,
             regions: Vec<(&'static str, &'static str)>,
             neurons: Vec<usize>,
             activations: Vec<&'static str>| BenchmarkEntry {
        id,
        name,
        property,
        states,
        inputs,
        dynamics,
        regions,
        neurons,
        activations,
        alt_neurons: None,
        alt_activations: None,
        ctrl_neurons: None,
        ctrl_activations: None,
        extended: false,
    };

    vec![
        e(
            1,
            "NonPoly0",
            Stability,
            2,
            0,
            vec!["x0*x1 - x0", "-x1"],
            vec![("domain", "Torus([0, 0], 1, 0.01)")],
            vec![6],
            vec!["poly2"],
        ),
        e(
            2,
            "Poly1",
            Stability,
            3,
            0,
            vec![
                "-x0^3 - x0*x2^2",
                "-x0^2*x1 - x1",
                "3*x0^2*x2 - 4*x2",
            ],
            vec![("domain", "Torus([0, 0, 0], 10, 0.1)")],
            vec![8],
            vec!["poly2"],
        ),
        BenchmarkEntry {
            ctrl_neurons: Some(vec![15, 2]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                3,
                "Benchmark1",
                Stability,
                2,
                2,
                vec!["u0 + x0 + x1", "u1 - x0 - x1"],
                vec![("domain", "Torus([0, 0], 10, 0.1)")],
                vec![4],
                vec!["poly2"],
            )
        },
        BenchmarkEntry {
            ctrl_neurons: Some(vec![25, 2]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                4,
                "InvertedPendulum",
                Stability,
                2,
                2,
                vec!["u0 + x1", "u1 - 8/3*x1 + 19.62*sin(x0)"],
                vec![("domain", "Torus([0, 0], 1, 0.1)")],
                vec![5],
                vec!["poly2"],
            )
        },
        e(
            5,
            "NonPoly1",
            Roa,
            2,
            0,
            vec!["2*x0^2*x1 - x0", "-x1"],
            vec![
                ("domain", "Rectangle([-3, -3], [3, 3])"),
                ("init", "Sphere([-1, 1], 0.1) | Sphere([1, -1], 0.2)"),
            ],
            vec![5],
            vec!["tanh2"],
        ),
        BenchmarkEntry {
            ctrl_neurons: Some(vec![8, 3]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                6,
                "LorenzSystem",
                Roa,
                3,
                3,
                vec![
                    "u0 - 10.0*x0 + 10.0*x1",
                    "u1 - x0*x2 + 28.0*x0 - x1",
                    "u2 + x0*x1 - 8/3*x2",
                ],
                vec![
                    ("domain", "Rectangle([-2, -2, -2], [2, 2, 2])"),
                    ("init", "Sphere([0, 0, 0], 0.3)"),
                ],
                vec![8],
                vec!["poly2"],
            )
        },
        e(
            7,
            "Barr2",
            Safety,
            2,
            0,
            vec!["x1 - 1 + exp(-x0)", "-sin(x0)^2"],
            vec![
                ("domain", "Rectangle([-2, -2], [2, 2])"),
                ("init", "Sphere([-0.5, 0.5], 0.4)"),
                ("unsafe", "Sphere([0.7, -0.7], 0.3)"),
            ],
            vec![15],
            vec!["tanh"],
        ),
        BenchmarkEntry {
            extended: true,
            ..e(
                8,
                "ObstacleAvoidance",
                Safety,
                3,
                0,
                vec![
                    "sin(x2)",
                    "cos(x2)",
                    "(3*x0*sin(x2) + 3*x1*cos(x2))/(x0^2 + x1^2 + 0.5) - sin(x2)",
                ],
                vec![
                    ("domain", "Rectangle([-2, -2, -1.57], [2, 2, 1.57])"),
                    ("init", "Rectangle([-0.1, -2, -0.52], [0.1, -1.8, 0.52])"),
                    ("unsafe", "Sphere([0, 0, 0], 0.2)"),
                ],
                vec![25],
                vec!["poly4"],
            )
        },
        BenchmarkEntry {
            extended: true,
            ..e(
                9,
                "HighOrd8",
                Safety,
                8,
                0,
                vec![
                    "x1",
                    "x2",
                    "x3",
                    "x4",
                    "x5",
                    "x6",
                    "x7",
                    "-576*x0 - 2400*x1 - 4180*x2 - 3980*x3 - 2273*x4 - 800*x5 - 170*x6 - 20*x7",
                ],
                vec![
                    (
                        "domain",
                        "Rectangle([-2.2, -2.2, -2.2, -2.2, -2.2, -2.2, -2.2, -2.2], [2.2, 2.2, 2.2, 2.2, 2.2, 2.2, 2.2, 2.2])",
                    ),
                    (
                        "init",
                        "Rectangle([0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9], [1.1, 1.1, 1.1, 1.1, 1.1, 1.1, 1.1, 1.1])",
                    ),
                    (
                        "unsafe",
                        "Rectangle([-2.2, -2.2, -2.2, -2.2, -2.2, -2.2, -2.2, -2.2], [-1.8, -1.8, -1.8, -1.8, -1.8, -1.8, -1.8, -1.8])",
                    ),
                ],
                vec![10],
                vec!["linear"],
            )
        },
        BenchmarkEntry {
            ctrl_neurons: Some(vec![5, 1]),
            ctrl_activations: Some(vec!["tanh"]),
            ..e(
                10,
                "CtrlObstacleAvoidance",
                Safety,
                3,
                1,
                vec!["sin(x2)", "cos(x2)", "u0 - sin(x2)"],
                vec![
                    ("domain", "Rectangle([-10, -10, -pi], [10, 10, pi])"),
                    ("init", "Rectangle([4, 4, -pi/2], [6, 6, pi/2])"),
                    ("unsafe", "Rectangle([-9, -9, -pi/2], [-7, -6, pi/2])"),
                ],
                vec![15],
                vec!["tanh"],
            )
        },
        BenchmarkEntry {
            alt_neurons: Some(vec![5]),
            alt_activations: Some(vec!["tanh"]),
            ..e(
                11,
                "NonPoly3",
                Swa,
                3,
                0,
                vec!["-0.1*x0*x1^3 - 3*x0", "-x1 + x2", "-x2"],
                vec![
                    ("domain", "Torus([0, 0, 0], 3, 0.01)"),
                    ("init", "Sphere([-0.9, -0.9, -0.9], 1.0)"),
                    (
                        "unsafe",
                        "Sphere([0.4, 0.4, 0.4], 0.2) | Sphere([-0.4, 0.4, 0.4], 0.2)",
                    ),
                ],
                vec![6],
                vec!["poly2"],
            )
        },
        BenchmarkEntry {
            alt_neurons: Some(vec![5, 5]),
            alt_activations: Some(vec!["sigmoid", "poly2"]),
            ..e(
                12,
                "Barr3",
                Swa,
                2,
                0,
                vec!["x1", "x0^3/3 - x0 - x1"],
                vec![
                    ("domain", "Rectangle([-3, -2], [2.5, 1])"),
                    ("init", "Rectangle([0.4, 0.1], [0.8, 0.5])"),
                    ("unsafe", "Sphere([-1, -1], 0.4)"),
                ],
                vec![5],
                vec!["poly2"],
            )
        },
        BenchmarkEntry {
            alt_neurons: Some(vec![5]),
            alt_activations: Some(vec!["poly2"]),
            ctrl_neurons: Some(vec![8, 1]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                13,
                "SecondOrder",
                Swa,
                2,
                1,
                vec!["-x0^3 + x1", "u0"],
                vec![
                    ("domain", "Rectangle([-1.5, -1.5], [1.5, 1.5])"),
                    ("init", "Rectangle([-0.5, -0.5], [0.5, 0.5])"),
                    ("unsafe", "Complement(Rectangle([-1, -1], [1, 1]))"),
                ],
                vec![8],
                vec!["poly2"],
            )
        },
        BenchmarkEntry {
            alt_neurons: Some(vec![8]),
            alt_activations: Some(vec!["tanh"]),
            ctrl_neurons: Some(vec![8, 1]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                14,
                "ThirdOrder",
                Swa,
                3,
                1,
                vec![
                    "u0 - 10*x0 + 10*x1",
                    "-x0*x2 + 28*x0 - x1",
                    "x0*x1 - 8/3*x2",
                ],
                vec![
                    ("domain", "Rectangle([-6, -6, -6], [6, 6, 6])"),
                    ("init", "Rectangle([-1.2, -1.2, -1.2], [1.2, 1.2, 1.2])"),
                    ("unsafe", "Complement(Rectangle([-5, -5, -5], [5, 5, 5]))"),
                ],
                vec![10],
                vec!["poly2"],
            )
        },
        e(
            15,
            "SecondOrderLQR",
            Rwa,
            2,
            0,
            vec!["-x0^3 + x1", "-1.0*x0 - 1.73*x1"],
            vec![
                ("domain", "Rectangle([-1.5, -1.5], [1.5, 1.5])"),
                ("init", "Rectangle([-0.5, -0.5], [0.5, 0.5])"),
                ("safe", "Rectangle([-1, -1], [1, 1])"),
                ("goal", "Rectangle([-0.05, -0.05], [0.05, 0.05])"),
            ],
            vec![4],
            vec!["poly2"],
        ),
        e(
            16,
            "ThirdOrderLQR",
            Rwa,
            3,
            0,
            vec![
                "-33.71*x0 - 8.49*x1",
                "-x0*x2 + 28*x0 - x1",
                "x0*x1 - 8/3*x2",
            ],
            vec![
                ("domain", "Rectangle([-6, -6, -6], [6, 6, 6])"),
                ("init", "Rectangle([-1.2, -1.2, -1.2], [1.2, 1.2, 1.2])"),
                ("safe", "Rectangle([-5, -5, -5], [5, 5, 5])"),
                ("goal", "Rectangle([-0.3, -0.3, -0.3], [0.3, 0.3, 0.3])"),
            ],
            vec![16],
            vec!["poly2"],
        ),
        BenchmarkEntry {
            ctrl_neurons: Some(vec![8, 1]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                17,
                "SecondOrder",
                Rwa,
                2,
                1,
                vec!["-x0^3 + x1", "u0"],
                vec![
                    ("domain", "Rectangle([-1.5, -1.5], [1.5, 1.5])"),
                    ("init", "Rectangle([-0.5, -0.5], [-0.1, -0.1])"),
                    (
                        "safe",
                        "Rectangle([-1.5, -1.5], [1.5, 1.5]) \\ Sphere([0.5, 0.5], 0.2)",
                    ),
                    ("goal", "Rectangle([-0.05, -0.05], [0.05, 0.05])"),
                ],
                vec![4, 4],
                vec!["sigmoid", "poly2"],
            )
        },
        BenchmarkEntry {
            ctrl_neurons: Some(vec![8, 1]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                18,
                "ThirdOrder",
                Rwa,
                3,
                1,
                vec![
                    "u0 - 10*x0 + 10*x1",
                    "-x0*x2 + 28*x0 - x1",
                    "x0*x1 - 8/3*x2",
                ],
                vec![
                    ("domain", "Rectangle([-6, -6, -6], [6, 6, 6])"),
                    ("init", "Rectangle([-1.2, -1.2, -1.2], [1.2, 1.2, 1.2])"),
                    ("safe", "Rectangle([-5, -5, -5], [5, 5, 5])"),
                    ("goal", "Rectangle([-0.3, -0.3, -0.3], [0.3, 0.3, 0.3])"),
                ],
                vec![5],
                vec!["poly2"],
            )
        },
        BenchmarkEntry {
            ctrl_neurons: Some(vec![8, 2]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                19,
                "InvertedPendulum",
                Rwa,
                2,
                2,
                vec!["u0 + x1", "u1 - 8/3*x1 + 19.62*sin(x0)"],
                vec![
                    ("domain", "Rectangle([-3, -3], [3, 3])"),
                    ("init", "Rectangle([-0.6, -0.6], [0.6, 0.6])"),
                    ("safe", "Rectangle([-2.5, -2.5], [2.5, 2.5])"),
                    ("goal", "Rectangle([-0.01, -0.01], [0.01, 0.01])"),
                ],
                vec![5],
                vec!["sigmoid"],
            )
        },
        e(
            20,
            "SecondOrderLQR",
            Rswa,
            2,
            0,
            vec!["-x0^3 + x1", "-1.0*x0 - 1.73*x1"],
            vec![
                ("domain", "Rectangle([-1.5, -1.5], [1.5, 1.5])"),
                ("init", "Rectangle([-0.5, -0.5], [0.5, 0.5])"),
                ("safe", "Rectangle([-1, -1], [1, 1])"),
                ("final", "Rectangle([-0.05, -0.05], [0.05, 0.05])"),
            ],
            vec![4],
            vec!["poly2"],
        ),
        e(
            21,
            "ThirdOrderLQR",
            Rswa,
            3,
            0,
            vec![
                "-33.71*x0 - 8.49*x1",
                "-x0*x2 + 28*x0 - x1",
                "x0*x1 - 8/3*x2",
            ],
            vec![
                ("domain", "Rectangle([-6, -6, -6], [6, 6, 6])"),
                ("init", "Rectangle([-1.2, -1.2, -1.2], [1.2, 1.2, 1.2])"),
                ("safe", "Rectangle([-5, -5, -5], [5, 5, 5])"),
                ("final", "Rectangle([-0.3, -0.3, -0.3], [0.3, 0.3, 0.3])"),
            ],
            vec![16],
            vec!["poly2"],
        ),
        e(
            22,
            "InvertedPendulumLQR",
            Rswa,
            2,
            0,
            vec![
                "-7.21*x0 - 0.34*x1",
                "-1.34*x0 - 2.997*x1 + 19.62*sin(x0)",
            ],
            vec![
                ("domain", "Rectangle([-3, -3], [3, 3])"),
                ("init", "Rectangle([-0.6, -0.6], [0.6, 0.6])"),
                ("safe", "Rectangle([-2.5, -2.5], [2.5, 2.5])"),
                ("final", "Rectangle([-0.3, -0.3], [0.3, 0.3])"),
            ],
            vec![5, 5],
            vec!["sigmoid", "poly2"],
        ),
        BenchmarkEntry {
            ctrl_neurons: Some(vec![8, 1]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                23,
                "SecondOrder",
                Rswa,
                2,
                1,
                vec!["-x0^3 + x1", "u0"],
                vec![
                    ("domain", "Rectangle([-1.5, -1.5], [1.5, 1.5])"),
                    ("init", "Rectangle([-0.5, -0.5], [0.5, 0.5])"),
                    ("safe", "Rectangle([-1, -1], [1, 1])"),
                    ("final", "Rectangle([-0.05, -0.05], [0.05, 0.05])"),
                ],
                vec![8],
                vec!["poly2"],
            )
        },
        BenchmarkEntry {
            ctrl_neurons: Some(vec![8, 2]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                24,
                "InvertedPendulum",
                Rswa,
                2,
                2,
                vec!["u0 + x1", "u1 - 8/3*x1 + 19.62*sin(x0)"],
                vec![
                    ("domain", "Rectangle([-3, -3], [3, 3])"),
                    ("init", "Rectangle([-0.6, -0.6], [0.6, 0.6])"),
                    ("safe", "Rectangle([-2.5, -2.5], [2.5, 2.5])"),
                    ("final", "Rectangle([-0.3, -0.3], [0.3, 0.3])"),
                ],
                vec![5, 5],
                vec!["sigmoid", "poly2"],
            )
        },
        BenchmarkEntry {
            alt_neurons: Some(vec![6]),
            alt_activations: Some(vec!["poly2"]),
            ..e(
                25,
                "SecondOrderLQR",
                Rar,
                2,
                0,
                vec!["-x0^3 + x1", "-1.0*x0 - 1.73*x1"],
                vec![
                    ("domain", "Rectangle([-3.5, -3.5], [3.5, 3.5])"),
                    ("init", "Rectangle([-2, -2], [2, 2])"),
                    ("safe", "Rectangle([-3, -3], [3, 3])"),
                    ("goal", "Rectangle([-0.1, -0.1], [0.1, 0.1])"),
                    ("final", "Rectangle([-0.15, -0.15], [0.15, 0.15])"),
                ],
                vec![6],
                vec!["softplus"],
            )
        },
        BenchmarkEntry {
            alt_neurons: Some(vec![6, 6]),
            alt_activations: Some(vec!["sigmoid", "poly2"]),
            ctrl_neurons: Some(vec![8, 2]),
            ctrl_activations: Some(vec!["linear"]),
            ..e(
                26,
                "InvertedPendulum",
                Rar,
                2,
                2,
                vec!["u0 + x1", "u1 - 8/3*x1 + 19.62*sin(x0)"],
                vec![
                    ("domain", "Rectangle([-3.5, -3.5], [3.5, 3.5])"),
                    ("init", "Rectangle([-2, -2], [2, 2])"),
                    ("safe", "Rectangle([-3, -3], [3, 3])"),
                    ("goal", "Rectangle([-0.1, -0.1], [0.1, 0.1])"),
                    ("final", "Rectangle([-0.2, -0.2], [0.2, 0.2])"),
                ],
                vec![6, 6],
                vec!["sigmoid", "poly2"],
            )
        },
    ]
}

pub fn find(id: u32) -> Result<BenchmarkEntry> {
    registry().into_iter().find(|b| b.id == id).with_context(|| {
        let ids: Vec<String> = registry()
            .iter()
            .map(|b| format!("{} ({})", b.id, b.name))
            .collect();
        format!(
            "no benchmark with id {id}; available: {}",
            ids.join(", ")
        )
    })
}

impl BenchmarkEntry {
    /// Materialise the problem and a run configuration.
    pub fn build(&self) -> Result<(PropertyProblem, CegisConfig)> {
        let n = self.states;
        let m = self.inputs;
        let components = self
            .dynamics
            .iter()
            .map(|s| {
                parse_expr(s, n, m)
                    .map_err(|e| anyhow::anyhow!("benchmark {}: bad dynamics '{s}': {e}", self.id))
            })
            .collect::<Result<Vec<_>>>()?;
        let dynamics = VectorField::new(n, m, components).map_err(|e| anyhow::anyhow!("{e}"))?;

        let domain_text = self
            .regions
            .iter()
            .find(|(role, _)| *role == "domain")
            .map(|(_, t)| *t)
            .context("benchmark is missing its domain region")?;
        let domain = parse_region(domain_text, n, None)?;
        let mut problem = PropertyProblem {
            kind: self.property,
            dynamics,
            domain: domain.clone(),
            init: None,
            unsafe_set: None,
            safe_set: None,
            goal: None,
            final_set: None,
            gamma: 0.1,
            epsilon_origin: 0.01,
            delta: 1e-4,
            has_controller: m > 0,
        };
        for (role, text) in &self.regions {
            let region = match *role {
                "domain" => continue,
                _ => parse_region(text, n, Some(&domain))?,
            };
            match *role {
                "init" => problem.init = Some(region),
                "unsafe" => problem.unsafe_set = Some(region),
                "safe" => problem.safe_set = Some(region),
                "goal" => problem.goal = Some(region),
                "final" => problem.final_set = Some(region),
                other => bail!("benchmark {}: unknown region role '{other}'", self.id),
            }
        }

        let mut cfg = CegisConfig::for_problem(&problem);
        let shape = |sizes: &[usize], acts: &[&str]| -> Result<NetworkShape> {
            let activations = acts
                .iter()
                .map(|s| parse_activation(s))
                .collect::<Result<Vec<_>>>()?;
            Ok(NetworkShape::new(sizes.to_vec(), activations))
        };
        let primary = shape(&self.neurons, &self.activations)?;
        if self.property.candidate_roles().contains(&CandidateRole::V) {
            cfg.v_shape = Some(primary);
        } else {
            cfg.b_shape = Some(primary);
        }
        if let (Some(bn), Some(ba)) = (&self.alt_neurons, &self.alt_activations) {
            cfg.b_shape = Some(shape(bn, ba)?);
        }
        if m > 0 {
            let (cn, ca) = match (&self.ctrl_neurons, &self.ctrl_activations) {
                (Some(cn), Some(ca)) => (cn.clone(), ca.clone()),
                _ => (vec![8, m], vec!["linear"]),
            };
            if cn.last() != Some(&m) {
                bail!(
                    "benchmark {}: controller neurons {cn:?} must end with the input count {m}",
                    self.id
                );
            }
            cfg.controller_shape = Some(shape(&cn[..cn.len() - 1], &ca)?);
        }
        Ok((problem, cfg))
    }
}

/// Human-readable registry listing (also the golden-file fixture).
pub fn format_registry() -> String {
    let mut out = String::new();
    for b in registry() {
        out.push_str(&format!(
            "[{}] {} {} states={} inputs={}{}\n",
            b.id,
            b.name,
            b.property.name(),
            b.states,
            b.inputs,
            if b.extended { " (extended)" } else { "" }
        ));
        for (i, f) in b.dynamics.iter().enumerate() {
            out.push_str(&format!("  f{i} = {f}\n"));
        }
        for (role, text) in &b.regions {
            out.push_str(&format!("  {role} = {text}\n"));
        }
        out.push_str(&format!(
            "  neurons = {:?} activations = {:?}\n",
            b.neurons, b.activations
        ));
        if let (Some(n), Some(a)) = (&b.alt_neurons, &b.alt_activations) {
            out.push_str(&format!("  alt_neurons = {n:?} alt_activations = {a:?}\n"));
        }
        if let (Some(n), Some(a)) = (&b.ctrl_neurons, &b.ctrl_activations) {
            out.push_str(&format!(
                "  ctrl_neurons = {n:?} ctrl_activations = {a:?}\n"
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn registry_has_twenty_six_entries_with_unique_ids() {
        let r = registry();
        assert_eq!(r.len(), 26);
        let mut ids: Vec<u32> = r.iter().map(|b| b.id).collect();
        ids.dedup();
        assert_eq!(ids, (1..=26).collect::<Vec<_>>());
    }

    #[test]
    fn every_entry_builds_and_validates() {
        for b in registry() {
            let (problem, cfg) = b
                .build()
                .unwrap_or_else(|e| panic!("benchmark {} failed to build: {e}", b.id));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            problem
                .validate(&mut rng)
                .unwrap_or_else(|e| panic!("benchmark {} failed to validate: {e}", b.id));
            certsynth::certificate::build_conditions(&problem)
                .unwrap_or_else(|e| panic!("benchmark {} conditions: {e}", b.id));
            if problem.has_controller {
                assert!(cfg.controller_shape.is_some(), "benchmark {}", b.id);
            }
        }
    }

    #[test]
    fn property_counts_match_the_corpus() {
        use certsynth::certificate::PropertyKind::*;
        let r = registry();
        let count = |k| r.iter().filter(|b| b.property == k).count();
        assert_eq!(count(Stability), 4);
        assert_eq!(count(Roa), 2);
        assert_eq!(count(Safety), 4);
        assert_eq!(count(Swa), 4);
        assert_eq!(count(Rwa), 5);
        assert_eq!(count(Rswa), 5);
        assert_eq!(count(Rar), 2);
    }

    #[test]
    fn unknown_id_lists_the_registry() {
        let err = find(99).unwrap_err();
        assert!(err.to_string().contains("NonPoly0"));
    }
}
