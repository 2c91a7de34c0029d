//! Symbolic expressions over the state (and input) variables of a dynamical
//! model.
//!
//! Expressions are the shared substrate of the whole crate: model dynamics,
//! certificate candidates translated from networks, Lie derivatives and the
//! verifier's constraint atoms are all [`Expr`] trees. Construction goes
//! through the smart constructors ([`Expr::add`], [`Expr::mul`], ...) which
//! perform constant folding; no further algebraic simplification is applied.

mod interval;
mod parse;

pub use interval::{Interval, IntervalError};
pub use parse::{parse, ParseError};

use std::fmt;

/// Error raised by exact expression evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero while evaluating expression")]
    DivisionByZero,
    #[error("variable x{0} out of range for point of dimension {1}")]
    VarOutOfRange(usize, usize),
}

/// A symbolic expression tree.
///
/// Variables are indexed: `Var(i)` with `i < n` refers to state variable
/// `x_i`; indices `n..n+m` refer to the input variables `u_0..u_{m-1}` of a
/// control model (the owning [`VectorField`] carries the dimensions).
/// `Pow` keeps an explicit integer exponent so interval evaluation can use
/// the even-power rule instead of decomposing into products.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Tanh(Box<Expr>),
    Sigmoid(Box<Expr>),
    Softplus(Box<Expr>),
}

/// Numerically stable softplus, `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, `1 / (1 + e^-x)`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// `a + b`, folding constants and dropping zero terms.
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (Expr::Const(x), b) if x == 0.0 => b,
            (a, Expr::Const(y)) if y == 0.0 => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    /// `a - b`, folding constants and dropping zero terms.
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, Expr::Const(y)) if y == 0.0 => a,
            (Expr::Const(x), b) if x == 0.0 => Expr::neg(b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    /// `a * b` with `0·e → 0` and `1·e → e` folding.
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (Expr::Const(x), _) | (_, Expr::Const(x)) if x == 0.0 => Expr::Const(0.0),
            (Expr::Const(x), b) if x == 1.0 => b,
            (a, Expr::Const(y)) if y == 1.0 => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    /// `a / b`; constants fold only when the divisor is nonzero. `0/e` is
    /// deliberately not folded so division-by-zero errors are preserved.
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
            (a, Expr::Const(y)) if y == 1.0 => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    /// `a^k` with non-negative integer exponent.
    pub fn pow(a: Expr, k: u32) -> Expr {
        match (a, k) {
            (_, 0) => Expr::Const(1.0),
            (a, 1) => a,
            (Expr::Const(x), k) => Expr::Const(x.powi(k as i32)),
            (a, k) => Expr::Pow(Box::new(a), k),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(x.sin()),
            a => Expr::Sin(Box::new(a)),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(x.cos()),
            a => Expr::Cos(Box::new(a)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(x.exp()),
            a => Expr::Exp(Box::new(a)),
        }
    }

    pub fn tanh(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(x.tanh()),
            a => Expr::Tanh(Box::new(a)),
        }
    }

    pub fn sigmoid_of(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(sigmoid(x)),
            a => Expr::Sigmoid(Box::new(a)),
        }
    }

    pub fn softplus_of(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(softplus(x)),
            a => Expr::Softplus(Box::new(a)),
        }
    }

    /// Largest variable index occurring in the tree, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Tanh(a)
            | Expr::Sigmoid(a)
            | Expr::Softplus(a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Exact recursive evaluation at `point` with IEEE double semantics.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => point
                .get(*i)
                .copied()
                .ok_or(EvalError::VarOutOfRange(*i, point.len())),
            Expr::Neg(a) => Ok(-a.eval(point)?),
            Expr::Add(a, b) => Ok(a.eval(point)? + b.eval(point)?),
            Expr::Sub(a, b) => Ok(a.eval(point)? - b.eval(point)?),
            Expr::Mul(a, b) => Ok(a.eval(point)? * b.eval(point)?),
            Expr::Div(a, b) => {
                let d = b.eval(point)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                Ok(a.eval(point)? / d)
            }
            Expr::Pow(a, k) => Ok(a.eval(point)?.powi(*k as i32)),
            Expr::Sin(a) => Ok(a.eval(point)?.sin()),
            Expr::Cos(a) => Ok(a.eval(point)?.cos()),
            Expr::Exp(a) => Ok(a.eval(point)?.exp()),
            Expr::Tanh(a) => Ok(a.eval(point)?.tanh()),
            Expr::Sigmoid(a) => Ok(sigmoid(a.eval(point)?)),
            Expr::Softplus(a) => Ok(softplus(a.eval(point)?)),
        }
    }

    /// Symbolic partial derivative with respect to `Var(var)`.
    ///
    /// The result is simplified only by the constant folding done in the
    /// smart constructors.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.diff(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff(var)),
                ),
                Expr::pow((**b).clone(), 2),
            ),
            Expr::Pow(_, 0) => Expr::Const(0.0),
            Expr::Pow(a, k) => Expr::mul(
                Expr::mul(Expr::Const(*k as f64), Expr::pow((**a).clone(), k - 1)),
                a.diff(var),
            ),
            Expr::Sin(a) => Expr::mul(Expr::cos((**a).clone()), a.diff(var)),
            Expr::Cos(a) => Expr::neg(Expr::mul(Expr::sin((**a).clone()), a.diff(var))),
            Expr::Exp(a) => Expr::mul(Expr::exp((**a).clone()), a.diff(var)),
            // tanh' = 1 - tanh^2
            Expr::Tanh(a) => Expr::mul(
                Expr::sub(Expr::Const(1.0), Expr::pow(Expr::tanh((**a).clone()), 2)),
                a.diff(var),
            ),
            // sigmoid' = sigmoid (1 - sigmoid)
            Expr::Sigmoid(a) => {
                let s = Expr::sigmoid_of((**a).clone());
                Expr::mul(
                    Expr::mul(s.clone(), Expr::sub(Expr::Const(1.0), s)),
                    a.diff(var),
                )
            }
            // softplus' = sigmoid
            Expr::Softplus(a) => Expr::mul(Expr::sigmoid_of((**a).clone()), a.diff(var)),
        }
    }

    /// Replace every `Var(i)` by `subst(i)`, rebuilding with the folding
    /// constructors. Used to close a control loop symbolically.
    pub fn substitute(&self, subst: &dyn Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => subst(*i),
            Expr::Neg(a) => Expr::neg(a.substitute(subst)),
            Expr::Add(a, b) => Expr::add(a.substitute(subst), b.substitute(subst)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(subst), b.substitute(subst)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(subst), b.substitute(subst)),
            Expr::Div(a, b) => Expr::div(a.substitute(subst), b.substitute(subst)),
            Expr::Pow(a, k) => Expr::pow(a.substitute(subst), *k),
            Expr::Sin(a) => Expr::sin(a.substitute(subst)),
            Expr::Cos(a) => Expr::cos(a.substitute(subst)),
            Expr::Exp(a) => Expr::exp(a.substitute(subst)),
            Expr::Tanh(a) => Expr::tanh(a.substitute(subst)),
            Expr::Sigmoid(a) => Expr::sigmoid_of(a.substitute(subst)),
            Expr::Softplus(a) => Expr::softplus_of(a.substitute(subst)),
        }
    }

    /// Round every constant to the nearest multiple of `precision` and
    /// re-fold the tree, so coefficients that round to zero drop their terms.
    pub fn round_coefficients(&self, precision: f64) -> Expr {
        assert!(precision > 0.0, "rounding precision must be positive");
        // dividing by an exact reciprocal (e.g. 1000 for 1e-3) keeps the
        // rounded constants printable without float noise
        let recip = 1.0 / precision;
        let round = move |c: f64| {
            let k = (c / precision).round();
            if recip.fract() == 0.0 {
                k / recip
            } else {
                k * precision
            }
        };
        match self {
            Expr::Const(c) => Expr::Const(round(*c)),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Neg(a) => Expr::neg(a.round_coefficients(precision)),
            Expr::Add(a, b) => Expr::add(
                a.round_coefficients(precision),
                b.round_coefficients(precision),
            ),
            Expr::Sub(a, b) => Expr::sub(
                a.round_coefficients(precision),
                b.round_coefficients(precision),
            ),
            Expr::Mul(a, b) => Expr::mul(
                a.round_coefficients(precision),
                b.round_coefficients(precision),
            ),
            Expr::Div(a, b) => Expr::div(
                a.round_coefficients(precision),
                b.round_coefficients(precision),
            ),
            Expr::Pow(a, k) => Expr::pow(a.round_coefficients(precision), *k),
            Expr::Sin(a) => Expr::sin(a.round_coefficients(precision)),
            Expr::Cos(a) => Expr::cos(a.round_coefficients(precision)),
            Expr::Exp(a) => Expr::exp(a.round_coefficients(precision)),
            Expr::Tanh(a) => Expr::tanh(a.round_coefficients(precision)),
            Expr::Sigmoid(a) => Expr::sigmoid_of(a.round_coefficients(precision)),
            Expr::Softplus(a) => Expr::softplus_of(a.round_coefficients(precision)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, state_dim: usize) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    // keep negative constants parseable inside products
                    if !parens && parent > 1 {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                } else {
                    write!(f, "{c}")?;
                }
            }
            Expr::Var(i) => {
                if *i < state_dim {
                    write!(f, "x{i}")?;
                } else {
                    write!(f, "u{}", i - state_dim)?;
                }
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 4, state_dim)?;
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1, state_dim)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2, state_dim)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1, state_dim)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2, state_dim)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2, state_dim)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3, state_dim)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2, state_dim)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3, state_dim)?;
            }
            Expr::Pow(a, k) => {
                a.fmt_prec(f, 5, state_dim)?;
                write!(f, "^{k}")?;
            }
            Expr::Sin(a) => {
                write!(f, "sin(")?;
                a.fmt_prec(f, 0, state_dim)?;
                write!(f, ")")?;
            }
            Expr::Cos(a) => {
                write!(f, "cos(")?;
                a.fmt_prec(f, 0, state_dim)?;
                write!(f, ")")?;
            }
            Expr::Exp(a) => {
                write!(f, "exp(")?;
                a.fmt_prec(f, 0, state_dim)?;
                write!(f, ")")?;
            }
            Expr::Tanh(a) => {
                write!(f, "tanh(")?;
                a.fmt_prec(f, 0, state_dim)?;
                write!(f, ")")?;
            }
            Expr::Sigmoid(a) => {
                write!(f, "sigmoid(")?;
                a.fmt_prec(f, 0, state_dim)?;
                write!(f, ")")?;
            }
            Expr::Softplus(a) => {
                write!(f, "softplus(")?;
                a.fmt_prec(f, 0, state_dim)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }

    /// Pretty-printer that names indices past `state_dim` as input symbols
    /// (`u0, u1, ...`), for open-loop fields.
    pub fn display_open_loop(&self, state_dim: usize) -> impl fmt::Display + '_ {
        struct OpenLoopDisplay<'a>(&'a Expr, usize);
        impl fmt::Display for OpenLoopDisplay<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_prec(f, 0, self.1)
            }
        }
        OpenLoopDisplay(self, state_dim)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, usize::MAX)
    }
}

/// Error constructing or combining vector fields.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("component {component} references variable index {index}, beyond state+input dimension {max}")]
    IndexOutOfRange {
        component: usize,
        index: usize,
        max: usize,
    },
    #[error("vector field still has {0} open inputs")]
    OpenInputs(usize),
}

/// Right-hand side of `ẋ = f(x, u)`.
///
/// Components are expressions over `Var(0..dim_state)` for the state and
/// `Var(dim_state..dim_state+dim_input)` for the inputs. A closed-loop model
/// has `dim_input == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub dim_state: usize,
    pub dim_input: usize,
    pub components: Vec<Expr>,
}

impl VectorField {
    pub fn new(
        dim_state: usize,
        dim_input: usize,
        components: Vec<Expr>,
    ) -> Result<VectorField, FieldError> {
        if components.len() != dim_state {
            return Err(FieldError::ComponentCount {
                expected: dim_state,
                got: components.len(),
            });
        }
        let max = dim_state + dim_input;
        for (ci, c) in components.iter().enumerate() {
            if let Some(v) = c.max_var() {
                if v >= max {
                    return Err(FieldError::IndexOutOfRange {
                        component: ci,
                        index: v,
                        max,
                    });
                }
            }
        }
        Ok(VectorField {
            dim_state,
            dim_input,
            components,
        })
    }

    /// Evaluate all components at a point of length `dim_state + dim_input`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }
}

/// Lie derivative `⟨∇c, f⟩` of a scalar field along a closed-loop vector
/// field, as a single expression.
pub fn lie_derivative(c: &Expr, f: &VectorField) -> Result<Expr, FieldError> {
    if f.dim_input != 0 {
        return Err(FieldError::OpenInputs(f.dim_input));
    }
    if let Some(v) = c.max_var() {
        if v >= f.dim_state {
            return Err(FieldError::IndexOutOfRange {
                component: 0,
                index: v,
                max: f.dim_state,
            });
        }
    }
    let mut acc = Expr::Const(0.0);
    for (i, fi) in f.components.iter().enumerate() {
        acc = Expr::add(acc, Expr::mul(c.diff(i), fi.clone()));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn eval_sum_of_squares() {
        let e = Expr::add(Expr::pow(x(0), 2), Expr::pow(x(1), 2));
        assert_eq!(e.eval(&[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn eval_benchmark_dynamics_at_fixed_point() {
        // x0*x1 - x0 at (1, 1)
        let e = Expr::sub(Expr::mul(x(0), x(1)), x(0));
        assert_eq!(e.eval(&[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_tanh_is_odd_at_zero() {
        let e = Expr::tanh(x(0));
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_division_by_zero_is_an_error() {
        let e = Expr::Div(Box::new(x(0)), Box::new(x(1)));
        assert_eq!(e.eval(&[1.0, 0.0]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn diff_cube() {
        let e = Expr::pow(x(0), 3);
        let d = e.diff(0);
        assert_eq!(d, Expr::mul(Expr::Const(3.0), Expr::pow(x(0), 2)));
    }

    #[test]
    fn diff_tanh_identity() {
        let d = Expr::tanh(x(0)).diff(0);
        assert_eq!(
            d,
            Expr::sub(Expr::Const(1.0), Expr::pow(Expr::tanh(x(0)), 2))
        );
    }

    #[test]
    fn diff_product_other_var() {
        let e = Expr::mul(x(0), x(1));
        assert_eq!(e.diff(1), x(0));
    }

    #[test]
    fn lie_derivative_linear_contraction() {
        // c = x0^2 + x1^2, f = (-x0, -x1) => -2x0^2 - 2x1^2
        let c = Expr::add(Expr::pow(x(0), 2), Expr::pow(x(1), 2));
        let f = VectorField::new(2, 0, vec![Expr::neg(x(0)), Expr::neg(x(1))]).unwrap();
        let lie = lie_derivative(&c, &f).unwrap();
        for p in [[0.3, -0.7], [1.0, 2.0], [-0.5, 0.1]] {
            let want = -2.0 * (p[0] * p[0] + p[1] * p[1]);
            assert!((lie.eval(&p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn lie_derivative_rotation() {
        // c = x0, f = (x1, -x0) => x1
        let f = VectorField::new(2, 0, vec![x(1), Expr::neg(x(0))]).unwrap();
        assert_eq!(lie_derivative(&x(0), &f).unwrap(), x(1));
    }

    #[test]
    fn lie_derivative_rejects_open_loop() {
        let f = VectorField::new(1, 1, vec![x(1)]).unwrap();
        assert!(matches!(
            lie_derivative(&x(0), &f),
            Err(FieldError::OpenInputs(1))
        ));
    }

    #[test]
    fn round_snaps_near_one() {
        let e = Expr::mul(Expr::Const(0.9999999), Expr::pow(x(0), 2));
        assert_eq!(e.round_coefficients(1e-3), Expr::pow(x(0), 2));
    }

    #[test]
    fn round_truncates_pi() {
        let e = Expr::mul(Expr::Const(3.14159), x(0));
        assert_eq!(
            e.round_coefficients(1e-2),
            Expr::mul(Expr::Const(3.14), x(0))
        );
    }

    #[test]
    fn round_folds_tiny_terms_away() {
        // 4.9e-9 * x0 + x1 -> x1
        let e = Expr::add(Expr::mul(Expr::Const(4.9e-9), x(0)), x(1));
        assert_eq!(e.round_coefficients(1e-3), x(1));
    }

    #[test]
    fn round_is_idempotent() {
        let e = Expr::add(
            Expr::mul(Expr::Const(0.12345), Expr::pow(x(0), 2)),
            Expr::mul(Expr::Const(-7.77777), Expr::sin(x(1))),
        );
        let once = e.round_coefficients(1e-3);
        assert_eq!(once.round_coefficients(1e-3), once);
    }

    #[test]
    fn substitute_closes_an_input() {
        // f0 = x1 + u0 with u0 := -x0 - x1 (u0 is Var(2) for n=2)
        let f0 = Expr::add(x(1), x(2));
        let closed = f0.substitute(&|i| {
            if i == 2 {
                Expr::sub(Expr::neg(x(0)), x(1))
            } else {
                Expr::var(i)
            }
        });
        assert_eq!(closed.eval(&[1.0, 2.0]).unwrap(), 2.0 + (-1.0 - 2.0));
    }

    // Central finite differences as an independent oracle for diff.
    fn central_diff(e: &Expr, var: usize, p: &[f64], h: f64) -> f64 {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[var] += h;
        lo[var] -= h;
        (e.eval(&hi).unwrap() - e.eval(&lo).unwrap()) / (2.0 * h)
    }

    #[test]
    fn diff_matches_finite_differences_on_random_trees() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);

        fn random_expr(rng: &mut rand_chacha::ChaCha8Rng, depth: usize, dim: usize) -> Expr {
            if depth == 0 || rng.gen_bool(0.3) {
                return if rng.gen_bool(0.5) {
                    Expr::var(rng.gen_range(0..dim))
                } else {
                    Expr::Const(rng.gen_range(-2.0..2.0))
                };
            }
            let a = random_expr(rng, depth - 1, dim);
            let b = random_expr(rng, depth - 1, dim);
            match rng.gen_range(0..9) {
                0 => Expr::add(a, b),
                1 => Expr::sub(a, b),
                2 => Expr::mul(a, b),
                3 => Expr::pow(a, rng.gen_range(2..=4)),
                4 => Expr::sin(a),
                5 => Expr::cos(a),
                6 => Expr::tanh(a),
                7 => Expr::sigmoid_of(a),
                _ => Expr::softplus_of(a),
            }
        }

        for _ in 0..100 {
            let dim = rng.gen_range(1..=3);
            let e = random_expr(&mut rng, 4, dim);
            let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            for v in 0..dim {
                let sym = e.diff(v).eval(&p).unwrap();
                let fd = central_diff(&e, v, &p, 1e-5);
                assert!(
                    (sym - fd).abs() <= 1e-4 * (1.0 + sym.abs()),
                    "diff mismatch: sym={sym} fd={fd} expr={e}"
                );
            }
        }
    }
}
