//! Geometric regions of the state space.
//!
//! Regions describe the sets a property talks about (domain, initial, unsafe,
//! safe, goal, final). They support exact membership tests, uniform interior
//! sampling, boundary-band sampling, and conversion to symbolic inequality
//! predicates consumable by the verifier. Complements are always taken
//! relative to an explicit bounding rectangle so every verification domain
//! stays compact.

use crate::expr::Expr;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("dimension mismatch: region is {0}-dimensional, point is {1}-dimensional")]
    DimensionMismatch(usize, usize),
    #[error("rectangle bound lb[{0}] >= ub[{0}]")]
    EmptyRectangle(usize),
    #[error("sphere radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("torus radii must satisfy 0 <= inner < outer, got ({0}, {1})")]
    BadTorusRadii(f64, f64),
    #[error("union must have at least one member")]
    EmptyUnion,
    #[error("regions in a composite have differing dimensions")]
    MixedDimensions,
    #[error("sampling failed: acceptance rate below 1e-4 after {0} draws")]
    SamplingFailure(u64),
    #[error("boundary sampling is not supported for this composite region")]
    UnsupportedBoundary,
}

/// A set in `R^n`: a primitive shape or a boolean combination.
///
/// `Complement` carries its own bounding rectangle (`within`) so that the
/// complement is compact. Fields are public to allow direct construction in
/// tests; the checked constructors validate the invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Rectangle { lb: Vec<f64>, ub: Vec<f64> },
    Sphere { center: Vec<f64>, radius: f64 },
    Torus { center: Vec<f64>, inner: f64, outer: f64 },
    Union(Vec<Region>),
    Difference(Box<Region>, Box<Region>),
    Complement { inner: Box<Region>, within: Box<Region> },
}

impl Region {
    pub fn rectangle(lb: Vec<f64>, ub: Vec<f64>) -> Result<Region, GeometryError> {
        if lb.len() != ub.len() {
            return Err(GeometryError::DimensionMismatch(lb.len(), ub.len()));
        }
        for i in 0..lb.len() {
            if lb[i] >= ub[i] {
                return Err(GeometryError::EmptyRectangle(i));
            }
        }
        Ok(Region::Rectangle { lb, ub })
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Region, GeometryError> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Region::Sphere { center, radius })
    }

    /// A sphere with a spherical hole. Arguments are normalised so the
    /// smaller radius is always the hole.
    pub fn torus(center: Vec<f64>, r_a: f64, r_b: f64) -> Result<Region, GeometryError> {
        let (inner, outer) = if r_a <= r_b { (r_a, r_b) } else { (r_b, r_a) };
        if inner < 0.0 || inner >= outer || !outer.is_finite() {
            return Err(GeometryError::BadTorusRadii(inner, outer));
        }
        Ok(Region::Torus { center, inner, outer })
    }

    pub fn union(parts: Vec<Region>) -> Result<Region, GeometryError> {
        if parts.is_empty() {
            return Err(GeometryError::EmptyUnion);
        }
        let d = parts[0].dim();
        if parts.iter().any(|r| r.dim() != d) {
            return Err(GeometryError::MixedDimensions);
        }
        Ok(Region::Union(parts))
    }

    pub fn difference(a: Region, b: Region) -> Result<Region, GeometryError> {
        if a.dim() != b.dim() {
            return Err(GeometryError::MixedDimensions);
        }
        Ok(Region::Difference(Box::new(a), Box::new(b)))
    }

    /// Complement of `inner` relative to the bounding rectangle of `within`.
    pub fn complement(inner: Region, within: Region) -> Result<Region, GeometryError> {
        if inner.dim() != within.dim() {
            return Err(GeometryError::MixedDimensions);
        }
        let (lb, ub) = within.bounding_box();
        Ok(Region::Complement {
            inner: Box::new(inner),
            within: Box::new(Region::Rectangle { lb, ub }),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Rectangle { lb, .. } => lb.len(),
            Region::Sphere { center, .. } | Region::Torus { center, .. } => center.len(),
            Region::Union(parts) => parts.first().map_or(0, Region::dim),
            Region::Difference(a, _) => a.dim(),
            Region::Complement { within, .. } => within.dim(),
        }
    }

    /// Exact membership. Primitive shapes are closed (boundaries included);
    /// `Difference(a, b)` is `a ∧ ¬b`.
    pub fn contains(&self, p: &[f64]) -> Result<bool, GeometryError> {
        if p.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch(self.dim(), p.len()));
        }
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &[f64]) -> bool {
        match self {
            Region::Rectangle { lb, ub } => {
                p.iter().zip(lb).all(|(x, l)| x >= l) && p.iter().zip(ub).all(|(x, u)| x <= u)
            }
            Region::Sphere { center, radius } => dist_sq(p, center) <= radius * radius,
            Region::Torus { center, inner, outer } => {
                let d = dist_sq(p, center);
                inner * inner <= d && d <= outer * outer
            }
            Region::Union(parts) => parts.iter().any(|r| r.contains_unchecked(p)),
            Region::Difference(a, b) => a.contains_unchecked(p) && !b.contains_unchecked(p),
            Region::Complement { inner, within } => {
                within.contains_unchecked(p) && !inner.contains_unchecked(p)
            }
        }
    }

    /// Axis-aligned bounding box `(lb, ub)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Rectangle { lb, ub } => (lb.clone(), ub.clone()),
            Region::Sphere { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::Torus { center, outer, .. } => (
                center.iter().map(|c| c - outer).collect(),
                center.iter().map(|c| c + outer).collect(),
            ),
            Region::Union(parts) => {
                let mut boxes = parts.iter().map(Region::bounding_box);
                let (mut lb, mut ub) = boxes.next().expect("union is non-empty");
                for (l, u) in boxes {
                    for i in 0..lb.len() {
                        lb[i] = lb[i].min(l[i]);
                        ub[i] = ub[i].max(u[i]);
                    }
                }
                (lb, ub)
            }
            Region::Difference(a, _) => a.bounding_box(),
            Region::Complement { within, .. } => within.bounding_box(),
        }
    }

    /// Diameter of the bounding box (Euclidean).
    pub fn diameter(&self) -> f64 {
        let (lb, ub) = self.bounding_box();
        lb.iter()
            .zip(&ub)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }
}

fn dist_sq(p: &[f64], c: &[f64]) -> f64 {
    p.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// How a batch of points relates to its source region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Interior,
    BoundaryBand,
}

/// Points drawn from one region.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub kind: SampleKind,
}

const MAX_DRAWS: u64 = 10_000_000;

/// Uniform rejection sampling from the interior of `r`. Deterministic for a
/// fixed generator state. Fails if the acceptance rate stays below `1e-4`
/// after ten million draws.
pub fn sample_interior(
    r: &Region,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampleBatch, GeometryError> {
    let (lb, ub) = r.bounding_box();
    let dim = r.dim();
    // a collapsed bounding-box axis means the region has empty interior
    if lb.iter().zip(&ub).any(|(l, u)| l >= u) {
        return Err(GeometryError::SamplingFailure(0));
    }
    let mut points = Vec::with_capacity(n);
    let mut draws: u64 = 0;
    while points.len() < n {
        if draws >= MAX_DRAWS {
            return Err(GeometryError::SamplingFailure(draws));
        }
        draws += 1;
        let p: Vec<f64> = (0..dim)
            .map(|i| {
                if lb[i] < ub[i] {
                    rng.gen_range(lb[i]..ub[i])
                } else {
                    lb[i]
                }
            })
            .collect();
        if r.contains_unchecked(&p) {
            points.push(p);
        }
        // early abort for clearly degenerate regions
        if draws == 100_000 && points.is_empty() {
            return Err(GeometryError::SamplingFailure(draws));
        }
    }
    Ok(SampleBatch {
        points,
        kind: SampleKind::Interior,
    })
}

/// Points within `band` of the boundary of `r`.
///
/// Supported for primitive shapes and for one level of `Union`/`Difference`
/// of primitives (the boundary pieces of the parts are sampled, then
/// filtered against the other parts). Rectangle faces receive an equal share
/// of the budget.
pub fn sample_boundary(
    r: &Region,
    n: usize,
    band: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SampleBatch, GeometryError> {
    let points = boundary_points(r, n, band, rng)?;
    Ok(SampleBatch {
        points,
        kind: SampleKind::BoundaryBand,
    })
}

fn boundary_points(
    r: &Region,
    n: usize,
    band: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    match r {
        Region::Rectangle { lb, ub } => {
            let dim = lb.len();
            let faces = 2 * dim;
            let mut points = Vec::with_capacity(n);
            for i in 0..n {
                let face = i % faces;
                let axis = face / 2;
                let upper = face % 2 == 1;
                let mut p: Vec<f64> = (0..dim).map(|j| rng.gen_range(lb[j]..ub[j])).collect();
                let base = if upper { ub[axis] } else { lb[axis] };
                p[axis] = base + rng.gen_range(-band..band);
                points.push(p);
            }
            Ok(points)
        }
        Region::Sphere { center, radius } => Ok(sphere_shell(center, *radius, n, band, rng)),
        Region::Torus { center, inner, outer } => {
            // the boundary is two concentric spheres
            let n_outer = n - n / 2;
            let mut points = sphere_shell(center, *outer, n_outer, band, rng);
            if *inner > 0.0 {
                points.extend(sphere_shell(center, *inner, n / 2, band, rng));
            } else {
                points.extend(sphere_shell(center, *outer, n / 2, band, rng));
            }
            Ok(points)
        }
        Region::Union(parts) => {
            let mut points = Vec::with_capacity(n);
            let share = n.div_ceil(parts.len());
            for (i, part) in parts.iter().enumerate() {
                let others: Vec<&Region> = parts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, r)| r)
                    .collect();
                for p in boundary_points(part, 2 * share, band, rng)? {
                    if points.len() >= n {
                        break;
                    }
                    // keep boundary pieces not swallowed by another member
                    if !others.iter().any(|o| o.contains_unchecked(&p)) {
                        points.push(p);
                    }
                }
            }
            if points.is_empty() {
                return Err(GeometryError::UnsupportedBoundary);
            }
            Ok(points)
        }
        Region::Difference(a, b) => {
            // ∂(a \ b) ⊆ (∂a ∖ int b) ∪ (∂b ∩ a)
            let mut points = Vec::with_capacity(n);
            for p in boundary_points(a, 2 * n, band, rng)? {
                if points.len() >= n / 2 {
                    break;
                }
                if !b.contains_unchecked(&p) {
                    points.push(p);
                }
            }
            for p in boundary_points(b, 2 * n, band, rng)? {
                if points.len() >= n {
                    break;
                }
                if a.contains_unchecked(&p) {
                    points.push(p);
                }
            }
            if points.is_empty() {
                return Err(GeometryError::UnsupportedBoundary);
            }
            Ok(points)
        }
        Region::Complement { inner, within } => {
            let as_diff = Region::Difference(within.clone(), inner.clone());
            boundary_points(&as_diff, n, band, rng)
        }
    }
}

fn sphere_shell(
    center: &[f64],
    radius: f64,
    n: usize,
    band: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let dim = center.len();
    (0..n)
        .map(|_| {
            // isotropic direction via normalised gaussians
            let mut dir: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
            let mut norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                dir = vec![0.0; dim];
                dir[0] = 1.0;
                norm = 1.0;
            }
            let rad = (radius + rng.gen_range(-band..band)).max(0.0);
            dir.iter()
                .zip(center)
                .map(|(d, c)| c + d / norm * rad)
                .collect()
        })
        .collect()
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one value per call keeps the stream simple
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// Symbolic predicates
// ---------------------------------------------------------------------------

/// An atomic constraint `expr <= 0` (or `expr < 0` when `strict`).
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub expr: Expr,
    pub strict: bool,
}

/// A quantifier-free predicate over state variables: conjunctions and
/// disjunctions of [`Atom`]s.
#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Atom(Atom),
    And(Vec<Pred>),
    Or(Vec<Pred>),
}

impl Pred {
    pub const TRUE: Pred = Pred::And(Vec::new());
    pub const FALSE: Pred = Pred::Or(Vec::new());

    pub fn atom(expr: Expr, strict: bool) -> Pred {
        Pred::Atom(Atom { expr, strict })
    }

    /// `expr <= 0`
    pub fn le0(expr: Expr) -> Pred {
        Pred::atom(expr, false)
    }

    /// `expr < 0`
    pub fn lt0(expr: Expr) -> Pred {
        Pred::atom(expr, true)
    }

    pub fn and(parts: Vec<Pred>) -> Pred {
        Pred::And(parts)
    }

    pub fn or(parts: Vec<Pred>) -> Pred {
        Pred::Or(parts)
    }

    /// Logical negation with the negation pushed down to the atoms
    /// (`¬(g ≤ 0) = -g < 0`, `¬(g < 0) = -g ≤ 0`).
    pub fn negate(&self) -> Pred {
        match self {
            Pred::Atom(a) => Pred::Atom(Atom {
                expr: Expr::neg(a.expr.clone()),
                strict: !a.strict,
            }),
            Pred::And(parts) => Pred::Or(parts.iter().map(Pred::negate).collect()),
            Pred::Or(parts) => Pred::And(parts.iter().map(Pred::negate).collect()),
        }
    }

    /// Exact evaluation at a point. Division errors inside an atom make the
    /// atom false.
    pub fn holds_at(&self, p: &[f64]) -> bool {
        match self {
            Pred::Atom(a) => match a.expr.eval(p) {
                Ok(v) => {
                    if a.strict {
                        v < 0.0
                    } else {
                        v <= 0.0
                    }
                }
                Err(_) => false,
            },
            Pred::And(parts) => parts.iter().all(|q| q.holds_at(p)),
            Pred::Or(parts) => parts.iter().any(|q| q.holds_at(p)),
        }
    }
}

/// Symbolic membership predicate for a region: true exactly on the set.
pub fn to_constraints(r: &Region) -> Pred {
    match r {
        Region::Rectangle { lb, ub } => Pred::And(
            lb.iter()
                .enumerate()
                .map(|(i, l)| Pred::le0(Expr::sub(Expr::Const(*l), Expr::var(i))))
                .chain(
                    ub.iter()
                        .enumerate()
                        .map(|(i, u)| Pred::le0(Expr::sub(Expr::var(i), Expr::Const(*u)))),
                )
                .collect(),
        ),
        Region::Sphere { center, radius } => Pred::le0(Expr::sub(
            dist_sq_expr(center),
            Expr::Const(radius * radius),
        )),
        Region::Torus { center, inner, outer } => Pred::And(vec![
            Pred::le0(Expr::sub(dist_sq_expr(center), Expr::Const(outer * outer))),
            Pred::le0(Expr::sub(Expr::Const(inner * inner), dist_sq_expr(center))),
        ]),
        Region::Union(parts) => Pred::Or(parts.iter().map(to_constraints).collect()),
        Region::Difference(a, b) => Pred::And(vec![to_constraints(a), to_constraints(b).negate()]),
        Region::Complement { inner, within } => Pred::And(vec![
            to_constraints(within),
            to_constraints(inner).negate(),
        ]),
    }
}

/// Predicate for the δ-shell around the boundary of `r`: the region's closed
/// membership constraints intersected with "within `delta` of some face /
/// shell" atoms. Equality atoms are relaxed to `|g| ≤ delta`-style bands.
pub fn to_boundary_constraints(r: &Region, delta: f64) -> Result<Pred, GeometryError> {
    match r {
        Region::Rectangle { lb, ub } => {
            // membership relaxed by delta so the shell covers both sides of
            // each face, intersected with "within delta of some face"
            let relaxed = Region::Rectangle {
                lb: lb.iter().map(|l| l - delta).collect(),
                ub: ub.iter().map(|u| u + delta).collect(),
            };
            let near_faces = Pred::Or(
                (0..lb.len())
                    .flat_map(|i| {
                        let low = abs_band(
                            Expr::sub(Expr::var(i), Expr::Const(lb[i])),
                            delta,
                        );
                        let high = abs_band(
                            Expr::sub(Expr::var(i), Expr::Const(ub[i])),
                            delta,
                        );
                        [low, high]
                    })
                    .collect(),
            );
            Ok(Pred::And(vec![to_constraints(&relaxed), near_faces]))
        }
        Region::Sphere { center, radius } => Ok(abs_band(
            Expr::sub(dist_sq_expr(center), Expr::Const(radius * radius)),
            // |d² - r²| ≤ 2rδ keeps the band width about δ in distance
            delta * 2.0 * radius.max(delta),
        )),
        Region::Torus { center, inner, outer } => {
            let outer_shell = abs_band(
                Expr::sub(dist_sq_expr(center), Expr::Const(outer * outer)),
                delta * 2.0 * outer.max(delta),
            );
            let inner_shell = abs_band(
                Expr::sub(dist_sq_expr(center), Expr::Const(inner * inner)),
                delta * 2.0 * inner.max(delta),
            );
            Ok(Pred::Or(vec![outer_shell, inner_shell]))
        }
        Region::Union(parts) => {
            let mut arms = Vec::new();
            for (i, part) in parts.iter().enumerate() {
                let own = to_boundary_constraints(part, delta)?;
                let not_others = parts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, o)| to_constraints(o).negate())
                    .collect();
                arms.push(Pred::And(vec![own, Pred::And(not_others)]));
            }
            Ok(Pred::Or(arms))
        }
        Region::Difference(a, b) => {
            let on_a = Pred::And(vec![
                to_boundary_constraints(a, delta)?,
                to_constraints(b).negate(),
            ]);
            let on_b = Pred::And(vec![to_boundary_constraints(b, delta)?, to_constraints(a)]);
            Ok(Pred::Or(vec![on_a, on_b]))
        }
        Region::Complement { inner, within } => {
            to_boundary_constraints(&Region::Difference(within.clone(), inner.clone()), delta)
        }
    }
}

fn abs_band(g: Expr, band: f64) -> Pred {
    Pred::And(vec![
        Pred::le0(Expr::sub(g.clone(), Expr::Const(band))),
        Pred::le0(Expr::sub(Expr::neg(g), Expr::Const(band))),
    ])
}

fn dist_sq_expr(center: &[f64]) -> Expr {
    let mut acc = Expr::Const(0.0);
    for (i, c) in center.iter().enumerate() {
        acc = Expr::add(acc, Expr::pow(Expr::sub(Expr::var(i), Expr::Const(*c)), 2));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn sphere_membership() {
        let s = Region::sphere(vec![0.0, 0.0], 1.0).unwrap();
        assert!(s.contains(&[0.5, 0.0]).unwrap());
        assert!(!s.contains(&[1.5, 0.0]).unwrap());
    }

    #[test]
    fn torus_excludes_inner_ball() {
        let t = Region::torus(vec![0.0, 0.0], 0.01, 1.0).unwrap();
        assert!(!t.contains(&[0.005, 0.0]).unwrap());
        assert!(t.contains(&[0.5, 0.0]).unwrap());
    }

    #[test]
    fn torus_normalises_argument_order() {
        let a = Region::torus(vec![0.0, 0.0], 1.0, 0.01).unwrap();
        let b = Region::torus(vec![0.0, 0.0], 0.01, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rectangle_boundary_is_closed() {
        let r = Region::rectangle(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(r.contains(&[1.0, 1.0]).unwrap());
    }

    #[test]
    fn rectangle_rejects_inverted_bounds() {
        assert!(matches!(
            Region::rectangle(vec![1.0], vec![1.0]),
            Err(GeometryError::EmptyRectangle(0))
        ));
    }

    #[test]
    fn interior_sampling_respects_membership() {
        let r = Region::rectangle(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let batch = sample_interior(&r, 100, &mut rng(1)).unwrap();
        assert_eq!(batch.points.len(), 100);
        assert!(batch.points.iter().all(|p| r.contains(p).unwrap()));
    }

    #[test]
    fn interior_sampling_is_deterministic() {
        let r = Region::torus(vec![0.0, 0.0], 0.1, 1.0).unwrap();
        let a = sample_interior(&r, 50, &mut rng(7)).unwrap();
        let b = sample_interior(&r, 50, &mut rng(7)).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn union_sampling_hits_both_components() {
        // disjoint spheres with volume ratio 1:4
        let u = Region::union(vec![
            Region::sphere(vec![-1.0, 1.0], 0.1).unwrap(),
            Region::sphere(vec![1.0, -1.0], 0.2).unwrap(),
        ])
        .unwrap();
        let batch = sample_interior(&u, 1000, &mut rng(3)).unwrap();
        let small = Region::sphere(vec![-1.0, 1.0], 0.1).unwrap();
        let in_small = batch
            .points
            .iter()
            .filter(|p| small.contains(p).unwrap())
            .count();
        let in_large = batch.points.len() - in_small;
        assert!(in_small > 0 && in_large > 0);
        // component mass proportional to volume (1:4), allow wide slack
        let frac = in_small as f64 / 1000.0;
        assert!((0.05..0.45).contains(&frac), "small-component share {frac}");
    }

    #[test]
    fn degenerate_sphere_fails_sampling() {
        let r = Region::Sphere {
            center: vec![0.0, 0.0],
            radius: 0.0,
        };
        assert!(matches!(
            sample_interior(&r, 10, &mut rng(1)),
            Err(GeometryError::SamplingFailure(_))
        ));
    }

    #[test]
    fn boundary_band_sphere() {
        let r = Region::sphere(vec![0.0, 0.0], 1.0).unwrap();
        let batch = sample_boundary(&r, 500, 0.01, &mut rng(5)).unwrap();
        for p in &batch.points {
            let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((n - 1.0).abs() <= 0.01 + 1e-12);
        }
    }

    #[test]
    fn boundary_band_rectangle_faces() {
        let r = Region::rectangle(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
        let batch = sample_boundary(&r, 10_000, 0.05, &mut rng(9)).unwrap();
        let mut per_face = [0usize; 4];
        for p in &batch.points {
            let d_faces = [
                (p[0] - (-1.0)).abs(),
                (p[0] - 1.0).abs(),
                (p[1] - (-2.0)).abs(),
                (p[1] - 2.0).abs(),
            ];
            let (face, d) = d_faces
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            assert!(*d <= 0.05 + 1e-12, "point {p:?} too far from any face");
            per_face[face] += 1;
        }
        // uniform-per-face allocation: every face gets at least n/(2*dim*4)
        for (i, count) in per_face.iter().enumerate() {
            assert!(
                *count >= 10_000 / (2 * 2 * 4),
                "face {i} undersampled: {count}"
            );
        }
    }

    #[test]
    fn constraints_match_membership_on_fuzzed_points() {
        let regions = vec![
            Region::rectangle(vec![-3.0, -2.0], vec![2.5, 1.0]).unwrap(),
            Region::sphere(vec![-0.5, 0.5], 0.4).unwrap(),
            Region::torus(vec![0.0, 0.0], 0.01, 1.0).unwrap(),
            Region::difference(
                Region::rectangle(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap(),
                Region::sphere(vec![0.5, 0.5], 0.2).unwrap(),
            )
            .unwrap(),
            Region::union(vec![
                Region::sphere(vec![-1.0, 1.0], 0.1).unwrap(),
                Region::sphere(vec![1.0, -1.0], 0.2).unwrap(),
            ])
            .unwrap(),
            Region::complement(
                Region::rectangle(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
                Region::rectangle(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap(),
            )
            .unwrap(),
        ];
        let mut r = rng(11);
        for region in &regions {
            let pred = to_constraints(region);
            for _ in 0..1000 {
                let p: Vec<f64> = (0..2).map(|_| r.gen_range(-4.0..4.0)).collect();
                assert_eq!(
                    region.contains(&p).unwrap(),
                    pred.holds_at(&p),
                    "mismatch at {p:?} for {region:?}"
                );
            }
        }
    }

    #[test]
    fn sphere_constraint_is_distance_atom() {
        let s = Region::sphere(vec![-0.5, 0.5], 0.4).unwrap();
        let pred = to_constraints(&s);
        // (x0+0.5)^2 + (x1-0.5)^2 - 0.16 <= 0
        assert!(pred.holds_at(&[-0.5, 0.5]));
        assert!(pred.holds_at(&[-0.1, 0.5]));
        assert!(!pred.holds_at(&[0.0, 0.5]));
    }

    #[test]
    fn rectangle_constraint_has_four_atoms() {
        let r = Region::rectangle(vec![-3.0, -2.0], vec![2.5, 1.0]).unwrap();
        let Pred::And(parts) = to_constraints(&r) else {
            panic!("expected a conjunction")
        };
        assert_eq!(parts.len(), 4);
    }

    #[test]
    fn boundary_constraints_cover_band_samples() {
        let shapes = vec![
            Region::rectangle(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            Region::sphere(vec![0.3, -0.2], 0.7).unwrap(),
            Region::torus(vec![0.0, 0.0], 0.3, 1.0).unwrap(),
        ];
        let mut r = rng(13);
        for shape in &shapes {
            let band = 1e-3;
            let pred = to_boundary_constraints(shape, 2.0 * band).unwrap();
            let batch = sample_boundary(shape, 200, band * 0.5, &mut r).unwrap();
            for p in &batch.points {
                assert!(pred.holds_at(p), "boundary sample {p:?} outside δ-shell");
            }
        }
    }
}
