//! Property kinds and their certificate conditions.
//!
//! Each supported property is certified by one or two scalar functions
//! subject to a fixed list of inequality [`Condition`]s. A condition reads
//! "quantity ⋈ threshold for all x in domain", where the quantity is either
//! the candidate's value or its Lie derivative along the (closed-loop)
//! dynamics. The same list serves both sides of the synthesis loop: the
//! learner penalises sampled violations of each condition, and the verifier
//! searches for a witness of the negated condition.

use crate::expr::VectorField;
use crate::geometry::{self, Region};
use crate::network::Network;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("property {0:?} requires region {1}")]
    MissingRegion(PropertyKind, &'static str),
    #[error("region {0} has dimension {1}, dynamics have dimension {2}")]
    RegionDimension(&'static str, usize, usize),
    #[error("containment violated: {0} must lie inside {1} (witness {2:?})")]
    Containment(&'static str, &'static str, Vec<f64>),
    #[error("sets {0} and {1} must be disjoint (witness {2:?})")]
    Overlap(&'static str, &'static str, Vec<f64>),
    #[error("dynamics have {0} inputs but no controller was requested")]
    UnexpectedInputs(usize),
    #[error("controller requested but dynamics have no inputs")]
    NoInputs,
    #[error("hyperparameter {0} must be positive")]
    BadHyper(&'static str),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// The seven certifiable properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyKind {
    Stability,
    Roa,
    Safety,
    Swa,
    Rwa,
    Rswa,
    Rar,
}

impl PropertyKind {
    /// SWA and RAR certify with a pair (V, B); the rest with a single
    /// function.
    pub fn needs_barrier(self) -> bool {
        matches!(self, PropertyKind::Swa | PropertyKind::Rar | PropertyKind::Safety)
    }

    /// Safety uses only B; SWA/RAR use both; everything else only V.
    pub fn candidate_roles(self) -> &'static [CandidateRole] {
        match self {
            PropertyKind::Safety => &[CandidateRole::B],
            PropertyKind::Swa | PropertyKind::Rar => &[CandidateRole::V, CandidateRole::B],
            _ => &[CandidateRole::V],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::Stability => "Stability",
            PropertyKind::Roa => "ROA",
            PropertyKind::Safety => "Safety",
            PropertyKind::Swa => "SWA",
            PropertyKind::Rwa => "RWA",
            PropertyKind::Rswa => "RSWA",
            PropertyKind::Rar => "RAR",
        }
    }
}

/// Which candidate function a condition constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateRole {
    V,
    B,
}

/// Value of the candidate, or its Lie derivative along the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Value,
    Lie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    /// Loss polarity: +1 when the condition bounds the quantity from above.
    pub fn sign(self) -> f64 {
        match self {
            Rel::Lt | Rel::Le => 1.0,
            Rel::Gt | Rel::Ge => -1.0,
        }
    }

    pub fn satisfied(self, q: f64, c: f64) -> bool {
        match self {
            Rel::Lt => q < c,
            Rel::Le => q <= c,
            Rel::Gt => q > c,
            Rel::Ge => q >= c,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }
}

/// A threshold that may be resolved late: the ROA level estimate and the
/// RSWA invariance level are only known during the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarRef {
    Const(f64),
    BetaHat,
    Beta,
}

/// Late-bound scalars for one verification round.
#[derive(Debug, Clone, Copy, Default)]
pub struct CertScalars {
    pub beta_hat: Option<f64>,
    pub beta: Option<f64>,
}

impl ScalarRef {
    pub fn resolve(self, scalars: &CertScalars) -> Option<f64> {
        match self {
            ScalarRef::Const(c) => Some(c),
            ScalarRef::BetaHat => scalars.beta_hat,
            ScalarRef::Beta => scalars.beta,
        }
    }
}

/// The condition domain is a region (or the band around its boundary),
/// optionally restricted by sub-level constraints on the candidates and by
/// geometric exclusions.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainBase {
    Interior(Region),
    Boundary(Region),
}

/// A candidate-value restriction of a domain, e.g. `{x : V(x) ≤ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBound {
    pub target: CandidateRole,
    pub rel: Rel,
    pub threshold: ScalarRef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondDomain {
    pub base: DomainBase,
    pub bounds: Vec<LevelBound>,
    /// `Some(role)` restricts to the band `|role(x)| ≤ ε` (the zero
    /// level-set relaxation); the band width is chosen by the consumer.
    pub abs_band: Option<CandidateRole>,
    pub exclude: Vec<Region>,
}

impl CondDomain {
    pub fn interior(r: Region) -> CondDomain {
        CondDomain {
            base: DomainBase::Interior(r),
            bounds: Vec::new(),
            abs_band: None,
            exclude: Vec::new(),
        }
    }

    pub fn boundary(r: Region) -> CondDomain {
        CondDomain {
            base: DomainBase::Boundary(r),
            bounds: Vec::new(),
            abs_band: None,
            exclude: Vec::new(),
        }
    }

    pub fn base_region(&self) -> &Region {
        match &self.base {
            DomainBase::Interior(r) | DomainBase::Boundary(r) => r,
        }
    }

    /// Geometric membership only (base plus exclusions); level bounds must
    /// be checked by the caller against the current candidates. Boundary
    /// bases accept points within `boundary_band` of the boundary.
    pub fn geometric_contains(&self, p: &[f64], boundary_band: f64) -> bool {
        let base_ok = match &self.base {
            DomainBase::Interior(r) => r.contains_unchecked(p),
            DomainBase::Boundary(r) => geometry::to_boundary_constraints(r, boundary_band)
                .map(|pred| pred.holds_at(p))
                .unwrap_or(false),
        };
        base_ok && !self.exclude.iter().any(|r| r.contains_unchecked(p))
    }
}

/// One certificate condition: `quantity(target) rel threshold` on `domain`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub target: CandidateRole,
    pub quantity: Quantity,
    pub rel: Rel,
    pub threshold: ScalarRef,
    pub domain: CondDomain,
    /// Whether the learner trains on this condition. β-dependent RSWA
    /// conditions and the ROA membership query are verification-only.
    pub trains: bool,
    pub beta_dependent: bool,
}

/// A property instance: kind, dynamics, named regions and hyperparameters.
#[derive(Debug, Clone)]
pub struct PropertyProblem {
    pub kind: PropertyKind,
    pub dynamics: VectorField,
    /// State-space domain X; all verification happens inside its box.
    pub domain: Region,
    pub init: Option<Region>,
    pub unsafe_set: Option<Region>,
    pub safe_set: Option<Region>,
    pub goal: Option<Region>,
    pub final_set: Option<Region>,
    /// Decrease rate γ for RWA/RSWA/RAR Lie conditions.
    pub gamma: f64,
    /// Radius of the ball around the equilibrium removed from
    /// Stability/ROA verification domains.
    pub epsilon_origin: f64,
    /// Verifier precision δ.
    pub delta: f64,
    pub has_controller: bool,
}

const MC_VALIDATION_SAMPLES: usize = 10_000;

impl PropertyProblem {
    /// Check region presence, dimensions, and the containment/disjointness
    /// preconditions (the latter by Monte-Carlo sampling).
    pub fn validate(&self, rng: &mut ChaCha8Rng) -> Result<(), ProblemError> {
        if self.gamma <= 0.0 {
            return Err(ProblemError::BadHyper("gamma"));
        }
        if self.delta <= 0.0 {
            return Err(ProblemError::BadHyper("delta"));
        }
        if self.epsilon_origin <= 0.0 {
            return Err(ProblemError::BadHyper("epsilon_origin"));
        }
        if self.has_controller && self.dynamics.dim_input == 0 {
            return Err(ProblemError::NoInputs);
        }
        if !self.has_controller && self.dynamics.dim_input > 0 {
            return Err(ProblemError::UnexpectedInputs(self.dynamics.dim_input));
        }

        let n = self.dynamics.dim_state;
        let check_dim = |name, r: &Option<Region>| -> Result<(), ProblemError> {
            if let Some(r) = r {
                if r.dim() != n {
                    return Err(ProblemError::RegionDimension(name, r.dim(), n));
                }
            }
            Ok(())
        };
        if self.domain.dim() != n {
            return Err(ProblemError::RegionDimension("X", self.domain.dim(), n));
        }
        check_dim("X_I", &self.init)?;
        check_dim("X_U", &self.unsafe_set)?;
        check_dim("X_S", &self.safe_set)?;
        check_dim("X_G", &self.goal)?;
        check_dim("X_F", &self.final_set)?;

        let require = |name: &'static str, r: &Option<Region>| -> Result<Region, ProblemError> {
            r.clone()
                .ok_or(ProblemError::MissingRegion(self.kind, name))
        };
        match self.kind {
            PropertyKind::Stability => {}
            PropertyKind::Roa => {
                require("X_I", &self.init)?;
            }
            PropertyKind::Safety | PropertyKind::Swa => {
                let init = require("X_I", &self.init)?;
                let unsafe_set = require("X_U", &self.unsafe_set)?;
                self.mc_disjoint(&init, "X_I", &unsafe_set, "X_U", rng)?;
            }
            PropertyKind::Rwa => {
                let init = require("X_I", &self.init)?;
                let safe = require("X_S", &self.safe_set)?;
                let goal = require("X_G", &self.goal)?;
                self.mc_contained(&init, "X_I", &safe, "X_S", rng)?;
                self.mc_contained(&goal, "X_G", &safe, "X_S", rng)?;
            }
            PropertyKind::Rswa => {
                let init = require("X_I", &self.init)?;
                let safe = require("X_S", &self.safe_set)?;
                let final_set = require("X_F", &self.final_set)?;
                self.mc_contained(&init, "X_I", &safe, "X_S", rng)?;
                self.mc_contained(&final_set, "X_F", &safe, "X_S", rng)?;
            }
            PropertyKind::Rar => {
                let init = require("X_I", &self.init)?;
                let safe = require("X_S", &self.safe_set)?;
                let goal = require("X_G", &self.goal)?;
                let final_set = require("X_F", &self.final_set)?;
                self.mc_contained(&init, "X_I", &safe, "X_S", rng)?;
                self.mc_contained(&final_set, "X_F", &safe, "X_S", rng)?;
                self.mc_contained(&goal, "X_G", &final_set, "X_F", rng)?;
            }
        }
        Ok(())
    }

    fn mc_contained(
        &self,
        inner: &Region,
        inner_name: &'static str,
        outer: &Region,
        outer_name: &'static str,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ProblemError> {
        let batch = geometry::sample_interior(inner, MC_VALIDATION_SAMPLES, rng)?;
        for p in batch.points {
            if !outer.contains_unchecked(&p) {
                return Err(ProblemError::Containment(inner_name, outer_name, p));
            }
        }
        Ok(())
    }

    fn mc_disjoint(
        &self,
        a: &Region,
        a_name: &'static str,
        b: &Region,
        b_name: &'static str,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ProblemError> {
        let batch = geometry::sample_interior(a, MC_VALIDATION_SAMPLES, rng)?;
        for p in batch.points {
            if b.contains_unchecked(&p) {
                return Err(ProblemError::Overlap(a_name, b_name, p));
            }
        }
        Ok(())
    }

    fn origin_ball(&self) -> Region {
        Region::Sphere {
            center: vec![0.0; self.dynamics.dim_state],
            radius: self.epsilon_origin,
        }
    }
}

/// Build the condition list for a problem. Thresholds that depend on the
/// ROA level estimate or the RSWA β stay symbolic ([`ScalarRef`]) and are
/// resolved at verification time.
pub fn build_conditions(p: &PropertyProblem) -> Result<Vec<Condition>, ProblemError> {
    let mut out = Vec::new();
    match p.kind {
        PropertyKind::Stability => lyapunov_conditions(p, false, &mut out)?,
        PropertyKind::Roa => lyapunov_conditions(p, true, &mut out)?,
        PropertyKind::Safety => barrier_conditions(
            p,
            p.init
                .clone()
                .ok_or(ProblemError::MissingRegion(p.kind, "X_I"))?,
            "barrier_init",
            None,
            &mut out,
        )?,
        PropertyKind::Swa => {
            lyapunov_conditions(p, true, &mut out)?;
            barrier_conditions(
                p,
                p.init
                    .clone()
                    .ok_or(ProblemError::MissingRegion(p.kind, "X_I"))?,
                "barrier_init",
                None,
                &mut out,
            )?;
        }
        PropertyKind::Rwa => reach_conditions(p, p.goal.clone(), &mut out)?,
        PropertyKind::Rswa => {
            let final_set = p
                .final_set
                .clone()
                .ok_or(ProblemError::MissingRegion(p.kind, "X_F"))?;
            reach_conditions(p, Some(final_set.clone()), &mut out)?;
            // V > β on ∂X_F. Verified with the line-searched β; during
            // training β is a per-epoch surrogate (min of V over the ∂X_F
            // band), so "keep training" after a failed search has teeth.
            out.push(Condition {
                name: "rswa_final_border",
                target: CandidateRole::V,
                quantity: Quantity::Value,
                rel: Rel::Gt,
                threshold: ScalarRef::Beta,
                domain: CondDomain::boundary(final_set.clone()),
                trains: true,
                beta_dependent: true,
            });
            // V̇ ≤ -γ on X_F ∖ int{V ≤ β}
            out.push(Condition {
                name: "rswa_final_decrease",
                target: CandidateRole::V,
                quantity: Quantity::Lie,
                rel: Rel::Le,
                threshold: ScalarRef::Const(-p.gamma),
                domain: CondDomain {
                    base: DomainBase::Interior(final_set),
                    bounds: vec![LevelBound {
                        target: CandidateRole::V,
                        rel: Rel::Ge,
                        threshold: ScalarRef::Beta,
                    }],
                    abs_band: None,
                    exclude: Vec::new(),
                },
                trains: true,
                beta_dependent: true,
            });
        }
        PropertyKind::Rar => {
            reach_conditions(p, p.goal.clone(), &mut out)?;
            barrier_conditions(
                p,
                p.goal
                    .clone()
                    .ok_or(ProblemError::MissingRegion(p.kind, "X_G"))?,
                "rar_goal",
                Some(
                    p.final_set
                        .clone()
                        .ok_or(ProblemError::MissingRegion(p.kind, "X_F"))?,
                ),
                &mut out,
            )?;
        }
    }
    Ok(out)
}

/// Lyapunov positivity and decrease on X minus a small origin ball; with
/// `level_restricted` the domain is additionally cut to `{V ≤ β̂}` and the
/// membership query `X_I ⊆ {V ≤ β̂}` is appended.
fn lyapunov_conditions(
    p: &PropertyProblem,
    level_restricted: bool,
    out: &mut Vec<Condition>,
) -> Result<(), ProblemError> {
    let bounds = if level_restricted {
        vec![LevelBound {
            target: CandidateRole::V,
            rel: Rel::Le,
            threshold: ScalarRef::BetaHat,
        }]
    } else {
        Vec::new()
    };
    let domain = CondDomain {
        base: DomainBase::Interior(p.domain.clone()),
        bounds,
        abs_band: None,
        exclude: vec![p.origin_ball()],
    };
    out.push(Condition {
        name: "lyap_positive",
        target: CandidateRole::V,
        quantity: Quantity::Value,
        rel: Rel::Gt,
        threshold: ScalarRef::Const(0.0),
        domain: domain.clone(),
        trains: true,
        beta_dependent: false,
    });
    out.push(Condition {
        name: "lyap_decrease",
        target: CandidateRole::V,
        quantity: Quantity::Lie,
        rel: Rel::Lt,
        threshold: ScalarRef::Const(0.0),
        domain,
        trains: true,
        beta_dependent: false,
    });
    if level_restricted {
        let init = p
            .init
            .clone()
            .ok_or(ProblemError::MissingRegion(p.kind, "X_I"))?;
        out.push(Condition {
            name: "roa_membership",
            target: CandidateRole::V,
            quantity: Quantity::Value,
            rel: Rel::Le,
            threshold: ScalarRef::BetaHat,
            domain: CondDomain::interior(init),
            trains: false,
            beta_dependent: false,
        });
    }
    Ok(())
}

/// The three barrier conditions with a configurable initial-role set and
/// (for the RAR restatement) ∂X_F as the unsafe set.
fn barrier_conditions(
    p: &PropertyProblem,
    init_like: Region,
    init_name: &'static str,
    final_as_unsafe: Option<Region>,
    out: &mut Vec<Condition>,
) -> Result<(), ProblemError> {
    out.push(Condition {
        name: init_name,
        target: CandidateRole::B,
        quantity: Quantity::Value,
        rel: Rel::Le,
        threshold: ScalarRef::Const(0.0),
        domain: CondDomain::interior(init_like),
        trains: true,
        beta_dependent: false,
    });
    match final_as_unsafe {
        Some(final_set) => out.push(Condition {
            name: "rar_final_border",
            target: CandidateRole::B,
            quantity: Quantity::Value,
            rel: Rel::Gt,
            threshold: ScalarRef::Const(0.0),
            domain: CondDomain::boundary(final_set),
            trains: true,
            beta_dependent: false,
        }),
        None => {
            let unsafe_set = p
                .unsafe_set
                .clone()
                .ok_or(ProblemError::MissingRegion(p.kind, "X_U"))?;
            out.push(Condition {
                name: "barrier_unsafe",
                target: CandidateRole::B,
                quantity: Quantity::Value,
                rel: Rel::Gt,
                threshold: ScalarRef::Const(0.0),
                domain: CondDomain::interior(unsafe_set),
                trains: true,
                beta_dependent: false,
            });
        }
    }
    // Ḃ < 0 on the zero level set, relaxed to a band
    out.push(Condition {
        name: "barrier_flow",
        target: CandidateRole::B,
        quantity: Quantity::Lie,
        rel: Rel::Lt,
        threshold: ScalarRef::Const(0.0),
        domain: CondDomain {
            base: DomainBase::Interior(p.domain.clone()),
            bounds: Vec::new(),
            abs_band: Some(CandidateRole::B),
            exclude: Vec::new(),
        },
        trains: true,
        beta_dependent: false,
    });
    Ok(())
}

/// The RWA conditions (also the β-independent core of RSWA, where the
/// derivative-domain exclusion is X_F instead of X_G).
fn reach_conditions(
    p: &PropertyProblem,
    derivative_exclusion: Option<Region>,
    out: &mut Vec<Condition>,
) -> Result<(), ProblemError> {
    let init = p
        .init
        .clone()
        .ok_or(ProblemError::MissingRegion(p.kind, "X_I"))?;
    let safe = p
        .safe_set
        .clone()
        .ok_or(ProblemError::MissingRegion(p.kind, "X_S"))?;
    out.push(Condition {
        name: "reach_init",
        target: CandidateRole::V,
        quantity: Quantity::Value,
        rel: Rel::Le,
        threshold: ScalarRef::Const(0.0),
        domain: CondDomain::interior(init),
        trains: true,
        beta_dependent: false,
    });
    out.push(Condition {
        name: "reach_safe_border",
        target: CandidateRole::V,
        quantity: Quantity::Value,
        rel: Rel::Gt,
        threshold: ScalarRef::Const(0.0),
        domain: CondDomain::boundary(safe.clone()),
        trains: true,
        beta_dependent: false,
    });
    let exclusion = derivative_exclusion.ok_or(ProblemError::MissingRegion(p.kind, "X_G"))?;
    out.push(Condition {
        name: "reach_decrease",
        target: CandidateRole::V,
        quantity: Quantity::Lie,
        rel: Rel::Le,
        threshold: ScalarRef::Const(-p.gamma),
        domain: CondDomain {
            base: DomainBase::Interior(safe),
            bounds: vec![LevelBound {
                target: CandidateRole::V,
                rel: Rel::Le,
                threshold: ScalarRef::Const(0.0),
            }],
            abs_band: None,
            exclude: vec![exclusion],
        },
        trains: true,
        beta_dependent: false,
    });
    Ok(())
}

/// Estimate the smallest sub-level value β̂ with `X_I ⊆ {V ≤ β̂}` from
/// interior samples, inflated by `margin`. Verification then confirms the
/// containment soundly.
pub fn estimate_roa_level(
    v: &Network,
    x_init: &Region,
    n_samples: usize,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, ProblemError> {
    let batch = geometry::sample_interior(x_init, n_samples, rng)?;
    let mut max = f64::NEG_INFINITY;
    for p in &batch.points {
        let val = v
            .forward_scalar(p)
            .expect("sample dimension matches network input");
        max = max.max(val);
    }
    Ok(max * (1.0 + margin))
}

/// Outcome of the RSWA β line search.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSearch {
    Found(f64),
    /// No grid candidate was certified; synthesis should keep training.
    Exhausted { tried: usize },
}

/// Line search for the RSWA invariance level β.
///
/// Scans a descending grid of `grid_size` candidates starting just below the
/// minimum of V over the boundary band of ∂X_F and ending at the minimum of
/// V over interior samples of X_F; returns the first negative β for which
/// `certify` accepts both β-dependent conditions.
pub fn rswa_beta_search<E>(
    v_values_on_final_boundary: &[f64],
    v_values_on_final_interior: &[f64],
    grid_size: usize,
    margin: f64,
    mut certify: impl FnMut(f64) -> Result<bool, E>,
) -> Result<BetaSearch, E> {
    let min_boundary = v_values_on_final_boundary
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let min_interior = v_values_on_final_interior
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let top = min_boundary - margin;
    let bottom = min_interior;
    let mut tried = 0;
    for i in 0..grid_size {
        let t = i as f64 / grid_size.max(1) as f64;
        let beta = top + (bottom - top) * t;
        if beta >= 0.0 || !beta.is_finite() {
            continue;
        }
        tried += 1;
        if certify(beta)? {
            return Ok(BetaSearch::Found(beta));
        }
    }
    Ok(BetaSearch::Exhausted { tried })
}
