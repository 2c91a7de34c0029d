//! δ-complete satisfiability of negated certificate conditions by interval
//! branch-and-bound.
//!
//! A [`Query`] asks: does any point of a compact domain satisfy the negation
//! of one certificate condition? The procedure maintains a FIFO queue of
//! boxes. A box is pruned when interval evaluation certainly refutes either
//! the domain constraints or the goal; the box midpoint is tested exactly
//! and upgrades the answer to a genuine [`VerdictOrCex::Counterexample`]
//! when it strictly violates the original condition; boxes thinner than δ
//! on every axis that still cannot be refuted yield
//! [`VerdictOrCex::DeltaSat`]. An empty queue certifies validity.
//!
//! Soundness: `Valid` is returned only when every box was refuted by a
//! sound interval enclosure, so no point of the domain can satisfy the
//! goal. The converse does not hold: `DeltaSat` witnesses may only violate
//! a δ-weakened condition.

use crate::certificate::{
    CandidateRole, CertScalars, Condition, DomainBase, PropertyProblem, Quantity, Rel,
};
use crate::expr::{lie_derivative, Expr, Interval, VectorField};
use crate::geometry::{self, Pred};
use std::collections::VecDeque;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifierError {
    #[error("condition '{0}' references an unresolved scalar (β or β̂)")]
    UnresolvedScalar(&'static str),
    #[error("candidate {0:?} missing for condition '{1}'")]
    MissingCandidate(CandidateRole, &'static str),
    #[error("query domain box is empty or non-finite")]
    BadBox,
    #[error(transparent)]
    Field(#[from] crate::expr::FieldError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// A single ∃-query over a box domain.
#[derive(Debug, Clone)]
pub struct Query {
    pub condition: &'static str,
    pub bbox: Vec<Interval>,
    /// Conjunction of domain constraints (region membership, level bounds,
    /// δ-relaxed boundary shells, exclusions).
    pub domain: Pred,
    /// The negated condition.
    pub goal: Pred,
    /// Exact violation measure `p (q - c)`: positive iff the original
    /// condition is strictly violated.
    pub violation: Expr,
    pub delta: f64,
    pub max_boxes: u64,
    pub timeout: Duration,
}

/// Verifier output for one condition.
#[derive(Debug, Clone, PartialEq)]
pub enum VerdictOrCex {
    Valid,
    /// A point that exactly satisfies the (δ-relaxed) domain and strictly
    /// violates the original condition.
    Counterexample {
        point: Vec<f64>,
        condition: String,
        violation: f64,
    },
    /// A point whose δ-box cannot be refuted: it violates the δ-weakened
    /// condition.
    DeltaSat { point: Vec<f64>, condition: String },
    /// Split or time budget exhausted before a verdict.
    ResourceOut {
        condition: String,
        boxes: u64,
        elapsed: Duration,
    },
}

impl VerdictOrCex {
    pub fn is_valid(&self) -> bool {
        matches!(self, VerdictOrCex::Valid)
    }

    /// The witness point of a counterexample or δ-sat verdict.
    pub fn witness(&self) -> Option<&[f64]> {
        match self {
            VerdictOrCex::Counterexample { point, .. } | VerdictOrCex::DeltaSat { point, .. } => {
                Some(point)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

fn atom_tri(expr: &Expr, strict: bool, box_: &[Interval]) -> Tri {
    match expr.interval_eval(box_) {
        Err(_) => Tri::Unknown, // enclosure failure: split further
        Ok(iv) => {
            if strict {
                if iv.hi() < 0.0 {
                    Tri::True
                } else if iv.lo() >= 0.0 {
                    Tri::False
                } else {
                    Tri::Unknown
                }
            } else if iv.hi() <= 0.0 {
                Tri::True
            } else if iv.lo() > 0.0 {
                Tri::False
            } else {
                Tri::Unknown
            }
        }
    }
}

fn pred_tri(pred: &Pred, box_: &[Interval]) -> Tri {
    match pred {
        Pred::Atom(a) => atom_tri(&a.expr, a.strict, box_),
        Pred::And(parts) => {
            let mut all_true = true;
            for p in parts {
                match pred_tri(p, box_) {
                    Tri::False => return Tri::False,
                    Tri::Unknown => all_true = false,
                    Tri::True => {}
                }
            }
            if all_true {
                Tri::True
            } else {
                Tri::Unknown
            }
        }
        Pred::Or(parts) => {
            let mut all_false = true;
            for p in parts {
                match pred_tri(p, box_) {
                    Tri::True => return Tri::True,
                    Tri::Unknown => all_false = false,
                    Tri::False => {}
                }
            }
            if all_false {
                Tri::False
            } else {
                Tri::Unknown
            }
        }
    }
}

/// Branch-and-bound search for a witness of `q.goal` inside `q.domain`.
pub fn check(q: &Query) -> VerdictOrCex {
    let start = Instant::now();
    let mut queue: VecDeque<Vec<Interval>> = VecDeque::new();
    queue.push_back(q.bbox.clone());
    let mut processed: u64 = 0;

    while let Some(box_) = queue.pop_front() {
        processed += 1;
        if processed > q.max_boxes || start.elapsed() > q.timeout {
            return VerdictOrCex::ResourceOut {
                condition: q.condition.to_string(),
                boxes: processed,
                elapsed: start.elapsed(),
            };
        }

        // (a) prune boxes certainly outside the domain
        if pred_tri(&q.domain, &box_) == Tri::False {
            continue;
        }
        // (b) prune boxes where the goal certainly fails
        if pred_tri(&q.goal, &box_) == Tri::False {
            continue;
        }
        // (c) exact midpoint test: upgrade to a genuine counterexample
        let mid: Vec<f64> = box_.iter().map(Interval::midpoint).collect();
        if q.domain.holds_at(&mid) {
            if let Ok(v) = q.violation.eval(&mid) {
                if v > 0.0 {
                    return VerdictOrCex::Counterexample {
                        point: mid,
                        condition: q.condition.to_string(),
                        violation: v,
                    };
                }
            }
        }
        // (d) box is δ-thin and not refutable
        let (widest_axis, widest) = box_
            .iter()
            .enumerate()
            .map(|(i, iv)| (i, iv.width()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite widths"))
            .expect("non-empty box");
        if widest < q.delta {
            return VerdictOrCex::DeltaSat {
                point: mid,
                condition: q.condition.to_string(),
            };
        }
        // (e) bisect the widest axis
        let iv = box_[widest_axis];
        let m = iv.midpoint();
        if m <= iv.lo() || m >= iv.hi() {
            // cannot split further at floating-point resolution
            return VerdictOrCex::DeltaSat {
                point: mid,
                condition: q.condition.to_string(),
            };
        }
        let mut left = box_.clone();
        left[widest_axis] = Interval::new(iv.lo(), m).expect("ordered");
        let mut right = box_;
        right[widest_axis] = Interval::new(m, iv.hi()).expect("ordered");
        queue.push_back(left);
        queue.push_back(right);
    }
    VerdictOrCex::Valid
}

/// Budget knobs for certificate verification.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub delta: f64,
    pub max_boxes: u64,
    pub timeout: Duration,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            delta: 1e-4,
            max_boxes: 2_000_000,
            timeout: Duration::from_secs(300),
        }
    }
}

/// The rounded symbolic candidates under verification.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub v: Option<Expr>,
    pub b: Option<Expr>,
    /// Closed-loop dynamics (symbolic controller already substituted).
    pub f_closed: VectorField,
}

impl CandidateSet {
    pub fn role(&self, role: CandidateRole) -> Option<&Expr> {
        match role {
            CandidateRole::V => self.v.as_ref(),
            CandidateRole::B => self.b.as_ref(),
        }
    }
}

/// Construct the verification query for one condition.
pub fn build_query(
    cond: &Condition,
    candidates: &CandidateSet,
    scalars: &CertScalars,
    cfg: &VerifyConfig,
) -> Result<Query, VerifierError> {
    let target = candidates
        .role(cond.target)
        .ok_or(VerifierError::MissingCandidate(cond.target, cond.name))?;
    let quantity = match cond.quantity {
        Quantity::Value => target.clone(),
        Quantity::Lie => lie_derivative(target, &candidates.f_closed)?,
    };
    let threshold = cond
        .threshold
        .resolve(scalars)
        .ok_or(VerifierError::UnresolvedScalar(cond.name))?;

    // negated condition as the goal atom
    let diff = Expr::sub(quantity.clone(), Expr::Const(threshold));
    let goal = match cond.rel {
        Rel::Le => Pred::lt0(Expr::neg(diff.clone())), // q > c
        Rel::Lt => Pred::le0(Expr::neg(diff.clone())), // q >= c
        Rel::Gt => Pred::le0(diff.clone()),            // q <= c
        Rel::Ge => Pred::lt0(diff.clone()),            // q < c
    };
    let violation = match cond.rel {
        Rel::Le | Rel::Lt => diff,
        Rel::Gt | Rel::Ge => Expr::neg(diff),
    };

    // domain constraints
    let mut parts = Vec::new();
    let base_region = cond.domain.base_region();
    match &cond.domain.base {
        DomainBase::Interior(r) => parts.push(geometry::to_constraints(r)),
        DomainBase::Boundary(r) => parts.push(geometry::to_boundary_constraints(r, cfg.delta)?),
    }
    for bound in &cond.domain.bounds {
        let c_expr = candidates
            .role(bound.target)
            .ok_or(VerifierError::MissingCandidate(bound.target, cond.name))?;
        let thr = bound
            .threshold
            .resolve(scalars)
            .ok_or(VerifierError::UnresolvedScalar(cond.name))?;
        let g = Expr::sub(c_expr.clone(), Expr::Const(thr));
        match bound.rel {
            Rel::Le | Rel::Lt => parts.push(Pred::le0(g)),
            Rel::Ge | Rel::Gt => parts.push(Pred::le0(Expr::neg(g))),
        }
    }
    if let Some(role) = cond.domain.abs_band {
        let c_expr = candidates
            .role(role)
            .ok_or(VerifierError::MissingCandidate(role, cond.name))?;
        // |C| ≤ δ
        parts.push(Pred::le0(Expr::sub(c_expr.clone(), Expr::Const(cfg.delta))));
        parts.push(Pred::le0(Expr::sub(
            Expr::neg(c_expr.clone()),
            Expr::Const(cfg.delta),
        )));
    }
    for excluded in &cond.domain.exclude {
        parts.push(geometry::to_constraints(excluded).negate());
    }

    // boundary shells extend δ past the region box
    let slack = match cond.domain.base {
        DomainBase::Boundary(_) => cfg.delta,
        DomainBase::Interior(_) => 0.0,
    };
    let (lb, ub) = base_region.bounding_box();
    let bbox = lb
        .iter()
        .zip(&ub)
        .map(|(l, u)| Interval::new(l - slack, u + slack).map_err(|_| VerifierError::BadBox))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Query {
        condition: cond.name,
        bbox,
        domain: Pred::And(parts),
        goal,
        violation,
        delta: cfg.delta,
        max_boxes: cfg.max_boxes,
        timeout: cfg.timeout,
    })
}

/// Per-condition verdicts, short-circuited at the first refutation.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub verdicts: Vec<(String, VerdictOrCex)>,
    pub all_valid: bool,
}

impl VerifyReport {
    /// First non-valid verdict, if any.
    pub fn refutation(&self) -> Option<&(String, VerdictOrCex)> {
        self.verdicts.iter().find(|(_, v)| !v.is_valid())
    }
}

/// Verify every condition of a problem against rounded symbolic candidates.
///
/// Runs [`check`] per condition in order, stopping at the first
/// counterexample / δ-sat / resource-out. β-dependent conditions are
/// skipped unless `scalars.beta` is set (the β line search supplies it).
pub fn verify_certificate(
    problem: &PropertyProblem,
    conditions: &[Condition],
    candidates: &CandidateSet,
    scalars: &CertScalars,
    cfg: &VerifyConfig,
) -> Result<VerifyReport, VerifierError> {
    let _ = problem;
    let mut verdicts = Vec::new();
    let mut all_valid = true;
    for cond in conditions {
        if cond.beta_dependent && scalars.beta.is_none() {
            continue;
        }
        let query = build_query(cond, candidates, scalars, cfg)?;
        let verdict = check(&query);
        let valid = verdict.is_valid();
        verdicts.push((cond.name.to_string(), verdict));
        if !valid {
            all_valid = false;
            break;
        }
    }
    Ok(VerifyReport {
        verdicts,
        all_valid,
    })
}

/// Render a query as SMT-LIB 2 text for cross-checking with external
/// solvers. Diagnostic only; nothing in the pipeline consumes it.
pub fn to_smtlib(q: &Query) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_NRA)\n");
    out.push_str(
        "(define-fun sigmoid ((z Real)) Real (/ 1.0 (+ 1.0 (exp (- z)))))\n\
         (define-fun softplus ((z Real)) Real (log (+ 1.0 (exp z))))\n",
    );
    for (i, iv) in q.bbox.iter().enumerate() {
        out.push_str(&format!("(declare-const x{i} Real)\n"));
        out.push_str(&format!(
            "(assert (and (>= x{i} {}) (<= x{i} {})))\n",
            fmt_num(iv.lo()),
            fmt_num(iv.hi())
        ));
    }
    out.push_str(&format!("(assert {})\n", pred_to_smt(&q.domain)));
    out.push_str(&format!("(assert {})\n", pred_to_smt(&q.goal)));
    out.push_str("(check-sat)\n(exit)\n");
    out
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn pred_to_smt(p: &Pred) -> String {
    match p {
        Pred::Atom(a) => format!(
            "({} {} 0.0)",
            if a.strict { "<" } else { "<=" },
            expr_to_smt(&a.expr)
        ),
        Pred::And(parts) => {
            if parts.is_empty() {
                "true".to_string()
            } else {
                format!(
                    "(and {})",
                    parts.iter().map(pred_to_smt).collect::<Vec<_>>().join(" ")
                )
            }
        }
        Pred::Or(parts) => {
            if parts.is_empty() {
                "false".to_string()
            } else {
                format!(
                    "(or {})",
                    parts.iter().map(pred_to_smt).collect::<Vec<_>>().join(" ")
                )
            }
        }
    }
}

fn expr_to_smt(e: &Expr) -> String {
    match e {
        Expr::Const(c) => {
            if *c < 0.0 {
                format!("(- {})", fmt_num(-c))
            } else {
                fmt_num(*c)
            }
        }
        Expr::Var(i) => format!("x{i}"),
        Expr::Neg(a) => format!("(- {})", expr_to_smt(a)),
        Expr::Add(a, b) => format!("(+ {} {})", expr_to_smt(a), expr_to_smt(b)),
        Expr::Sub(a, b) => format!("(- {} {})", expr_to_smt(a), expr_to_smt(b)),
        Expr::Mul(a, b) => format!("(* {} {})", expr_to_smt(a), expr_to_smt(b)),
        Expr::Div(a, b) => format!("(/ {} {})", expr_to_smt(a), expr_to_smt(b)),
        Expr::Pow(a, k) => format!("(^ {} {k})", expr_to_smt(a)),
        Expr::Sin(a) => format!("(sin {})", expr_to_smt(a)),
        Expr::Cos(a) => format!("(cos {})", expr_to_smt(a)),
        Expr::Exp(a) => format!("(exp {})", expr_to_smt(a)),
        Expr::Tanh(a) => format!("(tanh {})", expr_to_smt(a)),
        Expr::Sigmoid(a) => format!("(sigmoid {})", expr_to_smt(a)),
        Expr::Softplus(a) => format!("(softplus {})", expr_to_smt(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{build_conditions, PropertyKind};
    use crate::expr::parse;
    use crate::geometry::Region;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic_v() -> Expr {
        parse("x0^2 + x1^2", 2, 0).unwrap()
    }

    fn stability_problem(f: VectorField) -> PropertyProblem {
        PropertyProblem {
            kind: PropertyKind::Stability,
            dynamics: f,
            domain: Region::torus(vec![0.0, 0.0], 0.01, 1.0).unwrap(),
            init: None,
            unsafe_set: None,
            safe_set: None,
            goal: None,
            final_set: None,
            gamma: 0.1,
            epsilon_origin: 0.01,
            delta: 1e-4,
            has_controller: false,
        }
    }

    fn contraction() -> VectorField {
        VectorField::new(
            2,
            0,
            vec![parse("-x0", 2, 0).unwrap(), parse("-x1", 2, 0).unwrap()],
        )
        .unwrap()
    }

    fn expansion() -> VectorField {
        VectorField::new(
            2,
            0,
            vec![parse("x0", 2, 0).unwrap(), parse("x1", 2, 0).unwrap()],
        )
        .unwrap()
    }

    fn run_stability(f: VectorField) -> VerifyReport {
        let p = stability_problem(f);
        let conds = build_conditions(&p).unwrap();
        let candidates = CandidateSet {
            v: Some(quadratic_v()),
            b: None,
            f_closed: p.dynamics.clone(),
        };
        verify_certificate(
            &p,
            &conds,
            &candidates,
            &CertScalars::default(),
            &VerifyConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn valid_lyapunov_on_torus() {
        let report = run_stability(contraction());
        assert!(report.all_valid, "verdicts: {:?}", report.verdicts);
        assert_eq!(report.verdicts.len(), 2);
    }

    // Independent grid oracle for the Valid verdict above.
    #[test]
    fn valid_lyapunov_agrees_with_dense_grid() {
        let p = stability_problem(contraction());
        let v = quadratic_v();
        let vdot = lie_derivative(&v, &p.dynamics).unwrap();
        let n = 1000; // 10^6 grid points
        for i in 0..n {
            for j in 0..n {
                let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                let y = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
                let r2 = x * x + y * y;
                if !(0.01 * 0.01..=1.0).contains(&r2) {
                    continue;
                }
                assert!(v.eval(&[x, y]).unwrap() > 0.0);
                assert!(vdot.eval(&[x, y]).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn expanding_flow_yields_counterexample() {
        let report = run_stability(expansion());
        assert!(!report.all_valid);
        let (name, verdict) = report.refutation().unwrap();
        assert_eq!(name, "lyap_decrease");
        match verdict {
            VerdictOrCex::Counterexample {
                point, violation, ..
            } => {
                // V̇ = 2(x0²+x1²) > 0 everywhere off the origin
                let want = 2.0 * (point[0] * point[0] + point[1] * point[1]);
                assert!(*violation > 0.0);
                assert!((violation - want).abs() < 1e-9);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn barrier_sign_flip_is_caught_on_the_right_condition() {
        // B = x0 is positive on X_I ⊂ {x0 > 0}: the init condition must fail
        let p = PropertyProblem {
            kind: PropertyKind::Safety,
            dynamics: contraction(),
            domain: Region::rectangle(vec![-3.0, -2.0], vec![2.5, 1.0]).unwrap(),
            init: Some(Region::rectangle(vec![0.4, 0.1], vec![0.8, 0.5]).unwrap()),
            unsafe_set: Some(Region::sphere(vec![-1.0, -1.0], 0.4).unwrap()),
            safe_set: None,
            goal: None,
            final_set: None,
            gamma: 0.1,
            epsilon_origin: 0.01,
            delta: 1e-4,
            has_controller: false,
        };
        let conds = build_conditions(&p).unwrap();
        let candidates = CandidateSet {
            v: None,
            b: Some(parse("x0", 2, 0).unwrap()),
            f_closed: p.dynamics.clone(),
        };
        let report = verify_certificate(
            &p,
            &conds,
            &candidates,
            &CertScalars::default(),
            &VerifyConfig::default(),
        )
        .unwrap();
        let (name, verdict) = report.refutation().unwrap();
        assert_eq!(name, "barrier_init");
        let point = verdict.witness().unwrap();
        assert!(point[0] > 0.0, "witness {point:?} must have B > 0");
        assert!(p.init.as_ref().unwrap().contains(point).unwrap());
    }

    #[test]
    fn crafted_violations_above_ten_delta_are_never_missed() {
        // V = x0² + x1² − m for several margins m > 10δ: the positivity
        // condition fails near the origin-ball rim with margin ≈ m
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let margin = rng.gen_range(1e-2..1.0);
            let v = Expr::sub(quadratic_v(), Expr::Const(margin));
            let p = stability_problem(contraction());
            let conds = build_conditions(&p).unwrap();
            let candidates = CandidateSet {
                v: Some(v),
                b: None,
                f_closed: p.dynamics.clone(),
            };
            let report = verify_certificate(
                &p,
                &conds,
                &candidates,
                &CertScalars::default(),
                &VerifyConfig::default(),
            )
            .unwrap();
            assert!(!report.all_valid, "margin {margin} was missed");
            let (_, verdict) = report.refutation().unwrap();
            assert!(matches!(
                verdict,
                VerdictOrCex::Counterexample { .. } | VerdictOrCex::DeltaSat { .. }
            ));
        }
    }

    #[test]
    fn shrinking_delta_never_flips_refuted_to_valid() {
        let v = Expr::sub(quadratic_v(), Expr::Const(0.3));
        let p = stability_problem(contraction());
        let conds = build_conditions(&p).unwrap();
        let candidates = CandidateSet {
            v: Some(v),
            b: None,
            f_closed: p.dynamics.clone(),
        };
        for delta in [1e-2, 1e-3, 1e-4, 1e-5] {
            let cfg = VerifyConfig {
                delta,
                ..VerifyConfig::default()
            };
            let report =
                verify_certificate(&p, &conds, &candidates, &CertScalars::default(), &cfg)
                    .unwrap();
            assert!(!report.all_valid, "delta {delta} lost the refutation");
        }
    }

    #[test]
    fn resource_out_is_reported_not_mislabelled() {
        let p = stability_problem(contraction());
        let conds = build_conditions(&p).unwrap();
        let candidates = CandidateSet {
            v: Some(quadratic_v()),
            b: None,
            f_closed: p.dynamics.clone(),
        };
        let cfg = VerifyConfig {
            max_boxes: 3,
            ..VerifyConfig::default()
        };
        let report =
            verify_certificate(&p, &conds, &candidates, &CertScalars::default(), &cfg).unwrap();
        assert!(!report.all_valid);
        assert!(matches!(
            report.refutation().unwrap().1,
            VerdictOrCex::ResourceOut { .. }
        ));
    }

    #[test]
    fn counterexamples_reevaluate_to_exact_violations() {
        // fuzz: random quadratic candidates against the contraction flow;
        // whenever a counterexample is returned its violation must be exact
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = rng.gen_range(-1.0..1.0);
            let b = rng.gen_range(-1.0..1.0);
            let c = rng.gen_range(-0.5..0.5);
            let v = parse(
                &format!("{a}*x0^2 + {b}*x1^2 + {c}*x0*x1"),
                2,
                0,
            )
            .unwrap();
            let p = stability_problem(contraction());
            let conds = build_conditions(&p).unwrap();
            let candidates = CandidateSet {
                v: Some(v.clone()),
                b: None,
                f_closed: p.dynamics.clone(),
            };
            let report = verify_certificate(
                &p,
                &conds,
                &candidates,
                &CertScalars::default(),
                &VerifyConfig::default(),
            )
            .unwrap();
            for (name, verdict) in &report.verdicts {
                if let VerdictOrCex::Counterexample {
                    point, violation, ..
                } = verdict
                {
                    let quantity = if name == "lyap_positive" {
                        v.clone()
                    } else {
                        lie_derivative(&v, &p.dynamics).unwrap()
                    };
                    let q = quantity.eval(point).unwrap();
                    // both conditions are upper-violations: q <= 0 for
                    // positivity (rel >), q >= 0 for decrease (rel <)
                    let exact = if name == "lyap_positive" { -q } else { q };
                    assert!(exact > 0.0, "witness not a strict violation");
                    assert!((exact - violation).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn smtlib_dump_mentions_all_variables() {
        let p = stability_problem(contraction());
        let conds = build_conditions(&p).unwrap();
        let candidates = CandidateSet {
            v: Some(quadratic_v()),
            b: None,
            f_closed: p.dynamics.clone(),
        };
        let q = build_query(
            &conds[0],
            &candidates,
            &CertScalars::default(),
            &VerifyConfig::default(),
        )
        .unwrap();
        let text = to_smtlib(&q);
        assert!(text.contains("(declare-const x0 Real)"));
        assert!(text.contains("(declare-const x1 Real)"));
        assert!(text.contains("(check-sat)"));
    }
}
