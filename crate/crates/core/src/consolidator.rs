//! Counterexample expansion.
//!
//! A single verifier witness carries little training signal, so each one is
//! expanded into a cloud: random perturbations around the witness plus a
//! short gradient-ascent walk on the violation measure, all filtered through
//! the condition's domain. The symbolic (rounded) candidate the verifier
//! actually refuted is the object being climbed.

use crate::certificate::{CandidateRole, CertScalars, Condition, Quantity};
use crate::expr::{lie_derivative, Expr, VectorField};
use crate::geometry::gaussian;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ConsolidateConfig {
    /// Cloud size around the witness.
    pub n_cloud: usize,
    /// Perturbation radius as an absolute length (callers scale it to ~5%
    /// of the domain diameter).
    pub r_cloud: f64,
    /// Gradient-ascent steps on the violation measure.
    pub n_ascent: usize,
    /// Ascent step size; defaults to `r_cloud / 10`.
    pub eta: f64,
    /// Band width used when testing membership of boundary-based domains.
    pub boundary_band: f64,
}

impl ConsolidateConfig {
    pub fn for_diameter(diameter: f64, boundary_band: f64) -> ConsolidateConfig {
        let r_cloud = 0.05 * diameter;
        ConsolidateConfig {
            n_cloud: 100,
            r_cloud,
            n_ascent: 20,
            eta: r_cloud / 10.0,
            boundary_band,
        }
    }
}

/// A counterexample with its expansion cloud. Every point respects the
/// condition's domain (geometric part plus current level-set bounds).
#[derive(Debug, Clone)]
pub struct CexBundle {
    pub origin: Vec<f64>,
    pub condition: &'static str,
    pub cloud: Vec<Vec<f64>>,
}

/// Expand `cex` into a cloud of in-domain points with non-decreasing
/// violation along the ascent.
pub fn consolidate(
    cex: &[f64],
    cond: &Condition,
    candidate: &Expr,
    f_closed: &VectorField,
    scalars: &CertScalars,
    level_check: &dyn Fn(CandidateRole, &[f64]) -> Option<f64>,
    cfg: &ConsolidateConfig,
    rng: &mut ChaCha8Rng,
) -> CexBundle {
    let violation = violation_measure(cond, candidate, f_closed, scalars);
    let grads: Vec<Expr> = (0..f_closed.dim_state)
        .map(|i| violation.diff(i))
        .collect();

    let in_domain = |p: &[f64]| -> bool {
        if !cond.domain.geometric_contains(p, cfg.boundary_band) {
            return false;
        }
        // level-set bounds are re-checked against the *current* candidates
        for bound in &cond.domain.bounds {
            let Some(thr) = bound.threshold.resolve(scalars) else {
                return false;
            };
            let Some(val) = level_check(bound.target, p) else {
                return false;
            };
            if !bound.rel.satisfied(val, thr) {
                return false;
            }
        }
        if let Some(role) = cond.domain.abs_band {
            let Some(val) = level_check(role, p) else {
                return false;
            };
            if val.abs() > cfg.boundary_band {
                return false;
            }
        }
        true
    };

    let mut cloud = Vec::with_capacity(cfg.n_cloud + cfg.n_ascent);

    // (a) isotropic gaussian cloud, truncated to the domain
    for _ in 0..cfg.n_cloud {
        let p: Vec<f64> = cex
            .iter()
            .map(|x| x + cfg.r_cloud * gaussian(rng))
            .collect();
        if in_domain(&p) {
            cloud.push(p);
        }
    }

    // (b) gradient ascent on the violation measure, clamped to the domain
    // box, keeping only steps that do not decrease the violation
    let (lb, ub) = cond.domain.base_region().bounding_box();
    let mut x = cex.to_vec();
    let mut best = violation.eval(&x).ok();
    for _ in 0..cfg.n_ascent {
        let g: Option<Vec<f64>> = grads.iter().map(|gi| gi.eval(&x).ok()).collect();
        let Some(g) = g else { break };
        let mut next: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| xi + cfg.eta * gi)
            .collect();
        for i in 0..next.len() {
            next[i] = next[i].clamp(lb[i], ub[i]);
        }
        let v_next = violation.eval(&next).ok();
        match (best, v_next) {
            (Some(b), Some(v)) if v >= b => {
                best = Some(v);
                x = next;
                if in_domain(&x) {
                    cloud.push(x.clone());
                }
            }
            _ => break,
        }
    }

    cloud.push(cex.to_vec());
    CexBundle {
        origin: cex.to_vec(),
        condition: cond.name,
        cloud,
    }
}

/// Violation measure `v(x) = p (q(x) - c)`: positive where the condition is
/// violated, so ascent maximises the violation.
pub fn violation_measure(
    cond: &Condition,
    candidate: &Expr,
    f_closed: &VectorField,
    scalars: &CertScalars,
) -> Expr {
    let q = match cond.quantity {
        Quantity::Value => candidate.clone(),
        Quantity::Lie => lie_derivative(candidate, f_closed)
            .expect("closed-loop field with matching dimension"),
    };
    let c = cond
        .threshold
        .resolve(scalars)
        .expect("threshold resolved before consolidation");
    let diff = Expr::sub(q, Expr::Const(c));
    if cond.rel.sign() > 0.0 {
        diff
    } else {
        Expr::neg(diff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{CondDomain, Rel, ScalarRef};
    use crate::expr::parse;
    use crate::geometry::Region;
    use rand::SeedableRng;

    fn unit_square_condition(rel: Rel) -> Condition {
        Condition {
            name: "test_cond",
            target: CandidateRole::V,
            quantity: Quantity::Value,
            rel,
            threshold: ScalarRef::Const(0.0),
            domain: CondDomain::interior(
                Region::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ),
            trains: true,
            beta_dependent: false,
        }
    }

    fn closed_field() -> VectorField {
        VectorField::new(
            2,
            0,
            vec![parse("-x0", 2, 0).unwrap(), parse("-x1", 2, 0).unwrap()],
        )
        .unwrap()
    }

    fn no_levels(_: CandidateRole, _: &[f64]) -> Option<f64> {
        Some(0.0)
    }

    #[test]
    fn cloud_stays_inside_the_domain() {
        // candidate V = x0: condition V <= 0 violated at the centre
        let cond = unit_square_condition(Rel::Le);
        let candidate = parse("x0", 2, 0).unwrap();
        let cfg = ConsolidateConfig {
            n_cloud: 50,
            r_cloud: 0.1,
            n_ascent: 5,
            eta: 0.01,
            boundary_band: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bundle = consolidate(
            &[0.5, 0.5],
            &cond,
            &candidate,
            &closed_field(),
            &CertScalars::default(),
            &no_levels,
            &cfg,
            &mut rng,
        );
        assert!(bundle.cloud.len() >= 50, "cloud size {}", bundle.cloud.len());
        let square = Region::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        for p in &bundle.cloud {
            assert!(square.contains(p).unwrap(), "escaped the square: {p:?}");
        }
    }

    #[test]
    fn ascent_on_linear_violation_moves_uphill() {
        // violation v(x) = x0 for condition V <= 0 with V = x0
        let cond = unit_square_condition(Rel::Le);
        let candidate = parse("x0", 2, 0).unwrap();
        let cfg = ConsolidateConfig {
            n_cloud: 0,
            r_cloud: 0.1,
            n_ascent: 10,
            eta: 0.02,
            boundary_band: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bundle = consolidate(
            &[0.5, 0.5],
            &cond,
            &candidate,
            &closed_field(),
            &CertScalars::default(),
            &no_levels,
            &cfg,
            &mut rng,
        );
        for p in &bundle.cloud {
            assert!(p[0] >= 0.5 - 1e-12, "ascent moved downhill: {p:?}");
        }
    }

    #[test]
    fn ascent_converges_to_interior_maximum() {
        // v(x) = -(x0-0.7)² - (x1-0.7)² for condition -v <= 0 flipped:
        // use rel >= so violation = -(q - 0) with q the candidate
        let candidate = parse("(x0 - 0.7)^2 + (x1 - 0.7)^2", 2, 0).unwrap();
        let cond = unit_square_condition(Rel::Ge); // violation = -q
        let cfg = ConsolidateConfig {
            n_cloud: 0,
            r_cloud: 0.1,
            n_ascent: 200,
            eta: 0.05,
            boundary_band: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bundle = consolidate(
            &[0.5, 0.5],
            &cond,
            &candidate,
            &closed_field(),
            &CertScalars::default(),
            &no_levels,
            &cfg,
            &mut rng,
        );
        // iterates approach (0.7, 0.7) with monotone violation
        let violation = violation_measure(
            &cond,
            &candidate,
            &closed_field(),
            &CertScalars::default(),
        );
        let mut last = f64::NEG_INFINITY;
        for p in &bundle.cloud[..bundle.cloud.len() - 1] {
            let v = violation.eval(p).unwrap();
            assert!(v >= last - 1e-12, "violation decreased along ascent");
            last = v;
        }
        let final_pt = &bundle.cloud[bundle.cloud.len() - 2];
        let d = ((final_pt[0] - 0.7_f64).powi(2) + (final_pt[1] - 0.7_f64).powi(2)).sqrt();
        assert!(d < 0.05, "ascent endpoint {final_pt:?} far from optimum");
    }

    #[test]
    fn degenerate_cloud_still_returns_the_witness() {
        // domain so tiny that every perturbation lands outside
        let cond = Condition {
            domain: CondDomain::interior(
                Region::rectangle(vec![0.499, 0.499], vec![0.501, 0.501]).unwrap(),
            ),
            ..unit_square_condition(Rel::Le)
        };
        let candidate = parse("x0", 2, 0).unwrap();
        let cfg = ConsolidateConfig {
            n_cloud: 10,
            r_cloud: 10.0,
            n_ascent: 0,
            eta: 0.1,
            boundary_band: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bundle = consolidate(
            &[0.5, 0.5],
            &cond,
            &candidate,
            &closed_field(),
            &CertScalars::default(),
            &no_levels,
            &cfg,
            &mut rng,
        );
        assert!(!bundle.cloud.is_empty());
        assert!(bundle.cloud.contains(&vec![0.5, 0.5]));
    }
}
