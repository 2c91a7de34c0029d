//! Feed-forward neural templates for certificates and controllers.
//!
//! A [`Network`] is a stack of hidden layers `z_i = σ_i(W_i z_{i-1} + b_i)`
//! followed by an affine output layer. Besides plain forward evaluation it
//! provides the two derivative computations the learner needs:
//!
//! * parameter gradients of the scalar output, and
//! * parameter gradients of the directional derivative `⟨∇_x N(x), dir⟩`
//!   (the Lie derivative when `dir = f(x)`), which is a second-order
//!   quantity obtained by back-propagating through a forward-tangent pass.
//!
//! Two structural flags implement certificate-specific constraints:
//! `positive_output` stores the output weights in raw form and applies a
//! softplus transform, so gradient steps can never make them non-positive
//! (Lyapunov positivity by construction; biases are frozen at zero so the
//! candidate vanishes at the origin). `zero_at_origin` makes the network
//! compute `N(x) - N(0)`, pinning controllers to `k(0) = 0` regardless of
//! activation choice.

use crate::expr::{sigmoid, softplus, Expr};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("input has dimension {got}, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("layer sizes and activations differ in length")]
    ShapeMismatch,
}

/// Element-wise activation of a hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// x^j; `Poly(1)` is the identity, `Poly(2)` a quadratic layer.
    Poly(u32),
    Tanh,
    TanhSquared,
    Sigmoid,
    Softplus,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Poly(j) => x.powi(j as i32),
            Activation::Tanh => x.tanh(),
            Activation::TanhSquared => {
                let t = x.tanh();
                t * t
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Softplus => softplus(x),
        }
    }

    /// First derivative.
    pub fn d1(self, x: f64) -> f64 {
        match self {
            Activation::Poly(0) => 0.0,
            Activation::Poly(j) => j as f64 * x.powi(j as i32 - 1),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::TanhSquared => {
                let t = x.tanh();
                2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(x),
        }
    }

    /// Second derivative.
    pub fn d2(self, x: f64) -> f64 {
        match self {
            Activation::Poly(0) | Activation::Poly(1) => 0.0,
            Activation::Poly(j) => (j * (j - 1)) as f64 * x.powi(j as i32 - 2),
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::TanhSquared => {
                let t = x.tanh();
                2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }

    pub fn to_symbolic(self, a: Expr) -> Expr {
        match self {
            Activation::Poly(j) => Expr::pow(a, j),
            Activation::Tanh => Expr::tanh(a),
            Activation::TanhSquared => Expr::pow(Expr::tanh(a), 2),
            Activation::Sigmoid => Expr::sigmoid_of(a),
            Activation::Softplus => Expr::softplus_of(a),
        }
    }

    /// True when σ is even with σ(0) = 0 (suitable for structurally
    /// positive Lyapunov candidates).
    pub fn even_and_zero_at_origin(self) -> bool {
        matches!(self, Activation::Poly(j) if j % 2 == 0 && j > 0)
            || matches!(self, Activation::TanhSquared)
    }
}

/// One hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `h_i × h_{i-1}` weight matrix, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// A feed-forward candidate network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<Layer>,
    /// Raw output weights (`output_dim × h_k`). With `positive_output` the
    /// effective weights are `softplus(raw)`.
    pub out_weights: Vec<Vec<f64>>,
    pub out_bias: Vec<f64>,
    pub positive_output: bool,
    pub zero_at_origin: bool,
}

/// Parameter-shaped container: gradients, and the optimiser's moment
/// estimates, share this layout.
#[derive(Debug, Clone)]
pub struct NetGrad {
    pub hidden: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
    pub out_w: Vec<Vec<f64>>,
    pub out_b: Vec<f64>,
}

impl NetGrad {
    pub fn zeros_like(net: &Network) -> NetGrad {
        NetGrad {
            hidden: net
                .hidden
                .iter()
                .map(|l| {
                    (
                        vec![vec![0.0; l.weights[0].len()]; l.weights.len()],
                        vec![0.0; l.bias.len()],
                    )
                })
                .collect(),
            out_w: net
                .out_weights
                .iter()
                .map(|row| vec![0.0; row.len()])
                .collect(),
            out_b: vec![0.0; net.out_bias.len()],
        }
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &NetGrad) {
        for (dst, src) in self.values_mut_vec().into_iter().zip(other.values_vec()) {
            *dst += scale * src;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.values_mut_vec() {
            *v *= s;
        }
    }

    pub fn values_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.hidden {
            out.extend(w.iter().flatten().copied());
            out.extend(b.iter().copied());
        }
        out.extend(self.out_w.iter().flatten().copied());
        out.extend(self.out_b.iter().copied());
        out
    }

    pub fn values_mut_vec(&mut self) -> Vec<&mut f64> {
        let mut out = Vec::new();
        for (w, b) in &mut self.hidden {
            out.extend(w.iter_mut().flatten());
            out.extend(b.iter_mut());
        }
        out.extend(self.out_w.iter_mut().flatten());
        out.extend(self.out_b.iter_mut());
        out
    }
}

/// Everything the learner needs about one scalar-network evaluation.
#[derive(Debug, Clone)]
pub struct EvalGrads {
    pub value: f64,
    /// ∂value/∂θ in raw parameter space.
    pub grad_params: NetGrad,
    /// ∇_x value.
    pub grad_input: Vec<f64>,
    /// `⟨∇_x value, dir⟩` when a direction was supplied.
    pub lie: Option<f64>,
    /// ∂lie/∂θ in raw parameter space.
    pub lie_grad_params: Option<NetGrad>,
}

struct Trace {
    /// z_0 = x, then activations z_1..z_k
    zs: Vec<Vec<f64>>,
    /// pre-activations a_1..a_k
    pre: Vec<Vec<f64>>,
    /// tangents ż_0..ż_k (present when a direction was pushed through)
    dzs: Option<Vec<Vec<f64>>>,
    /// tangent pre-activations ȧ_1..ȧ_k
    dpre: Option<Vec<Vec<f64>>>,
    out: Vec<f64>,
    dout: Option<Vec<f64>>,
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn mat_t_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let cols = m[0].len();
    let mut out = vec![0.0; cols];
    for (row, vi) in m.iter().zip(v) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * vi;
        }
    }
    out
}

impl Network {
    /// Fresh network with uniform `[-1/√fan_in, 1/√fan_in]` weights and zero
    /// biases.
    pub fn init(
        input_dim: usize,
        hidden_sizes: &[usize],
        activations: &[Activation],
        output_dim: usize,
        positive_output: bool,
        zero_at_origin: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Network, NetworkError> {
        if hidden_sizes.len() != activations.len() {
            return Err(NetworkError::ShapeMismatch);
        }
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut fan_in = input_dim;
        for (&h, &act) in hidden_sizes.iter().zip(activations) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..h)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-bound..bound)).collect())
                .collect();
            hidden.push(Layer {
                weights,
                bias: vec![0.0; h],
                activation: act,
            });
            fan_in = h;
        }
        let out_weights = (0..output_dim)
            .map(|_| {
                (0..fan_in)
                    .map(|_| {
                        if positive_output {
                            // softplus of this raw range is ~[0.3, 1.3]
                            rng.gen_range(-1.0..1.0)
                        } else {
                            let bound = 1.0 / (fan_in as f64).sqrt();
                            rng.gen_range(-bound..bound)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Network {
            input_dim,
            output_dim,
            hidden,
            out_weights,
            out_bias: vec![0.0; output_dim],
            positive_output,
            zero_at_origin,
        })
    }

    /// Effective output weight matrix (softplus-transformed under
    /// `positive_output`).
    pub fn effective_out_weights(&self) -> Vec<Vec<f64>> {
        if self.positive_output {
            self.out_weights
                .iter()
                .map(|row| row.iter().map(|&w| softplus(w)).collect())
                .collect()
        } else {
            self.out_weights.clone()
        }
    }

    /// Biases are frozen at zero for structurally positive candidates.
    pub fn biases_frozen(&self) -> bool {
        self.positive_output
    }

    fn trace(&self, x: &[f64], dir: Option<&[f64]>) -> Result<Trace, NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::InputDim {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut zs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut dzs = dir.map(|d| vec![d.to_vec()]);
        let mut dpre = dir.map(|_| Vec::with_capacity(self.hidden.len()));
        for layer in &self.hidden {
            let z_prev = zs.last().unwrap();
            let mut a = mat_vec(&layer.weights, z_prev);
            for (ai, bi) in a.iter_mut().zip(&layer.bias) {
                *ai += bi;
            }
            let z: Vec<f64> = a.iter().map(|&ai| layer.activation.apply(ai)).collect();
            if let (Some(dzs), Some(dpre)) = (dzs.as_mut(), dpre.as_mut()) {
                let da = mat_vec(&layer.weights, dzs.last().unwrap());
                let dz: Vec<f64> = a
                    .iter()
                    .zip(&da)
                    .map(|(&ai, &dai)| layer.activation.d1(ai) * dai)
                    .collect();
                dpre.push(da);
                dzs.push(dz);
            }
            pre.push(a);
            zs.push(z);
        }
        let w_out = self.effective_out_weights();
        let mut out = mat_vec(&w_out, zs.last().unwrap());
        for (oi, bi) in out.iter_mut().zip(&self.out_bias) {
            *oi += bi;
        }
        let dout = dzs
            .as_ref()
            .map(|dzs| mat_vec(&w_out, dzs.last().unwrap()));
        Ok(Trace {
            zs,
            pre,
            dzs,
            dpre,
            out,
            dout,
        })
    }

    /// Plain forward pass (`N(x) - N(0)` under `zero_at_origin`).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let mut out = self.trace(x, None)?.out;
        if self.zero_at_origin {
            let at0 = self.trace(&vec![0.0; self.input_dim], None)?.out;
            for (o, z) in out.iter_mut().zip(at0) {
                *o -= z;
            }
        }
        Ok(out)
    }

    /// Scalar forward for certificate networks.
    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64, NetworkError> {
        Ok(self.forward(x)?[0])
    }

    /// Jacobian rows `∂output_j/∂x` (for scalar nets, the single gradient).
    pub fn grad_input(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, NetworkError> {
        let trace = self.trace(x, None)?;
        let w_out = self.effective_out_weights();
        let mut rows = Vec::with_capacity(self.output_dim);
        for j in 0..self.output_dim {
            let mut q: Vec<f64> = w_out[j].clone();
            for i in (0..self.hidden.len()).rev() {
                let layer = &self.hidden[i];
                for (qi, ai) in q.iter_mut().zip(&trace.pre[i]) {
                    *qi *= layer.activation.d1(*ai);
                }
                q = mat_t_vec(&layer.weights, &q);
            }
            rows.push(q);
        }
        Ok(rows)
    }

    /// Parameter gradient of output component `j` in raw parameter space
    /// (accounting for the softplus output transform and the origin shift).
    pub fn grad_params_output(&self, x: &[f64], j: usize) -> Result<NetGrad, NetworkError> {
        let mut g = self.grad_params_raw(x, j)?;
        if self.zero_at_origin {
            let g0 = self.grad_params_raw(&vec![0.0; self.input_dim], j)?;
            g.axpy(-1.0, &g0);
        }
        Ok(g)
    }

    fn grad_params_raw(&self, x: &[f64], j: usize) -> Result<NetGrad, NetworkError> {
        let trace = self.trace(x, None)?;
        let mut grad = NetGrad::zeros_like(self);
        let w_out = self.effective_out_weights();
        // output layer
        for (gw, zk) in grad.out_w[j].iter_mut().zip(trace.zs.last().unwrap()) {
            *gw = *zk;
        }
        grad.out_b[j] = 1.0;
        // hidden layers
        let mut q: Vec<f64> = w_out[j].clone();
        for i in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[i];
            for (qi, ai) in q.iter_mut().zip(&trace.pre[i]) {
                *qi *= layer.activation.d1(*ai);
            }
            let (gw, gb) = &mut grad.hidden[i];
            for (r, qr) in q.iter().enumerate() {
                for (c, z) in trace.zs[i].iter().enumerate() {
                    gw[r][c] = qr * z;
                }
                gb[r] = *qr;
            }
            q = mat_t_vec(&layer.weights, &q);
        }
        self.chain_raw_space(&mut grad);
        Ok(grad)
    }

    /// Scalar evaluation with parameter gradients, input gradient, and
    /// optionally the directional derivative along `dir` together with its
    /// parameter gradients. Only meaningful for scalar networks without the
    /// origin shift (certificate candidates).
    pub fn eval_full(&self, x: &[f64], dir: Option<&[f64]>) -> Result<EvalGrads, NetworkError> {
        debug_assert_eq!(self.output_dim, 1);
        debug_assert!(!self.zero_at_origin);
        let trace = self.trace(x, dir)?;
        let w_out = self.effective_out_weights();
        let k = self.hidden.len();

        // first-order backward for the value
        let mut grad = NetGrad::zeros_like(self);
        for (gw, zk) in grad.out_w[0].iter_mut().zip(trace.zs.last().unwrap()) {
            *gw = *zk;
        }
        grad.out_b[0] = 1.0;
        let mut q: Vec<f64> = w_out[0].clone();
        for i in (0..k).rev() {
            let layer = &self.hidden[i];
            for (qi, ai) in q.iter_mut().zip(&trace.pre[i]) {
                *qi *= layer.activation.d1(*ai);
            }
            let (gw, gb) = &mut grad.hidden[i];
            for (r, qr) in q.iter().enumerate() {
                for (c, z) in trace.zs[i].iter().enumerate() {
                    gw[r][c] = qr * z;
                }
                gb[r] = *qr;
            }
            q = mat_t_vec(&layer.weights, &q);
        }
        let grad_input = q;
        self.chain_raw_space(&mut grad);

        // second-order backward for the directional derivative
        let (lie, lie_grad) = if let (Some(dzs), Some(dpre), Some(dout)) =
            (&trace.dzs, &trace.dpre, &trace.dout)
        {
            let mut lg = NetGrad::zeros_like(self);
            for (gw, dzk) in lg.out_w[0].iter_mut().zip(dzs.last().unwrap()) {
                *gw = *dzk;
            }
            // two adjoint streams: r for tangents ż, s for primals z
            let mut r: Vec<f64> = w_out[0].clone();
            let mut s: Vec<f64> = vec![0.0; r.len()];
            for i in (0..k).rev() {
                let layer = &self.hidden[i];
                let a = &trace.pre[i];
                let da = &dpre[i];
                let mut p = vec![0.0; r.len()];
                let mut qq = vec![0.0; r.len()];
                for idx in 0..r.len() {
                    let d1 = layer.activation.d1(a[idx]);
                    let d2 = layer.activation.d2(a[idx]);
                    p[idx] = r[idx] * d1;
                    qq[idx] = r[idx] * d2 * da[idx] + s[idx] * d1;
                }
                let (gw, gb) = &mut lg.hidden[i];
                for (row, (pr, qr)) in p.iter().zip(&qq).enumerate() {
                    for c in 0..gw[row].len() {
                        gw[row][c] = qr * trace.zs[i][c] + pr * dzs[i][c];
                    }
                    gb[row] = *qr;
                }
                s = mat_t_vec(&layer.weights, &qq);
                r = mat_t_vec(&layer.weights, &p);
            }
            self.chain_raw_space(&mut lg);
            (Some(dout[0]), Some(lg))
        } else {
            (None, None)
        };

        Ok(EvalGrads {
            value: trace.out[0],
            grad_params: grad,
            grad_input,
            lie,
            lie_grad_params: lie_grad,
        })
    }

    /// Map gradients from effective to raw output-weight space, and zero
    /// frozen bias gradients.
    fn chain_raw_space(&self, grad: &mut NetGrad) {
        if self.positive_output {
            for (grow, rrow) in grad.out_w.iter_mut().zip(&self.out_weights) {
                for (g, raw) in grow.iter_mut().zip(rrow) {
                    *g *= sigmoid(*raw);
                }
            }
        }
        if self.biases_frozen() {
            for (_, gb) in &mut grad.hidden {
                gb.iter_mut().for_each(|g| *g = 0.0);
            }
            grad.out_b.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Exact symbolic form of each output component over `Var(0..input_dim)`.
    pub fn to_symbolic(&self) -> Vec<Expr> {
        let mut zs: Vec<Expr> = (0..self.input_dim).map(Expr::var).collect();
        for layer in &self.hidden {
            let mut next = Vec::with_capacity(layer.weights.len());
            for (row, b) in layer.weights.iter().zip(&layer.bias) {
                let mut a = Expr::Const(*b);
                for (w, z) in row.iter().zip(&zs) {
                    a = Expr::add(a, Expr::mul(Expr::Const(*w), z.clone()));
                }
                next.push(layer.activation.to_symbolic(a));
            }
            zs = next;
        }
        let w_out = self.effective_out_weights();
        let shift: Vec<f64> = if self.zero_at_origin {
            self.trace(&vec![0.0; self.input_dim], None)
                .expect("zero point has the right dimension")
                .out
        } else {
            vec![0.0; self.output_dim]
        };
        w_out
            .iter()
            .zip(&self.out_bias)
            .zip(&shift)
            .map(|((row, b), s)| {
                let mut y = Expr::Const(*b - *s);
                for (w, z) in row.iter().zip(&zs) {
                    y = Expr::add(y, Expr::mul(Expr::Const(*w), z.clone()));
                }
                y
            })
            .collect()
    }

    /// Scalar symbolic form, for certificate networks.
    pub fn to_symbolic_scalar(&self) -> Expr {
        self.to_symbolic().remove(0)
    }
}

/// Substitute a controller into an open-loop field: every input symbol
/// `u_j = Var(n + j)` is replaced by the controller's j-th output expression.
pub fn close_loop(
    f: &crate::expr::VectorField,
    controller: &Network,
) -> Result<crate::expr::VectorField, NetworkError> {
    if controller.input_dim != f.dim_state || controller.output_dim != f.dim_input {
        return Err(NetworkError::InputDim {
            expected: f.dim_state,
            got: controller.input_dim,
        });
    }
    let u_exprs = controller.to_symbolic();
    close_loop_symbolic(f, &u_exprs)
}

/// Close the loop with already-symbolic controller outputs (used after
/// coefficient rounding so the verified object matches the dumped one).
pub fn close_loop_symbolic(
    f: &crate::expr::VectorField,
    u_exprs: &[Expr],
) -> Result<crate::expr::VectorField, NetworkError> {
    let n = f.dim_state;
    let components = f
        .components
        .iter()
        .map(|c| {
            c.substitute(&|i| {
                if i < n {
                    Expr::var(i)
                } else {
                    u_exprs[i - n].clone()
                }
            })
        })
        .collect();
    Ok(crate::expr::VectorField {
        dim_state: n,
        dim_input: 0,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// W1 = I, σ = x², W2 = [1, 1]: computes x0² + x1².
    fn quadratic_net() -> Network {
        Network {
            input_dim: 2,
            output_dim: 1,
            hidden: vec![Layer {
                weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                bias: vec![0.0, 0.0],
                activation: Activation::Poly(2),
            }],
            out_weights: vec![vec![1.0, 1.0]],
            out_bias: vec![0.0],
            positive_output: false,
            zero_at_origin: false,
        }
    }

    #[test]
    fn forward_quadratic() {
        let net = quadratic_net();
        assert_eq!(net.forward(&[3.0, 4.0]).unwrap(), vec![25.0]);
    }

    #[test]
    fn grad_input_quadratic() {
        let net = quadratic_net();
        assert_eq!(net.grad_input(&[3.0, 4.0]).unwrap()[0], vec![6.0, 8.0]);
    }

    #[test]
    fn zero_at_origin_networks_vanish_at_zero() {
        let mut r = rng(3);
        let net = Network::init(
            2,
            &[5],
            &[Activation::Tanh],
            2,
            false,
            true,
            &mut r,
        )
        .unwrap();
        let at0 = net.forward(&[0.0, 0.0]).unwrap();
        assert!(at0.iter().all(|v| v.abs() == 0.0));
    }

    #[test]
    fn linear_neuron_parameter_gradient() {
        // y = w*x with w = 3: dy/dw at x = 2 is 2; for loss y²/2 the chain
        // gives y·x = 12
        let net = Network {
            input_dim: 1,
            output_dim: 1,
            hidden: vec![],
            out_weights: vec![vec![3.0]],
            out_bias: vec![0.0],
            positive_output: false,
            zero_at_origin: false,
        };
        let g = net.grad_params_output(&[2.0], 0).unwrap();
        let y = net.forward(&[2.0]).unwrap()[0];
        assert_eq!(g.out_w[0][0], 2.0);
        assert_eq!(y * g.out_w[0][0], 12.0);
    }

    #[test]
    fn forward_matches_symbolic_on_random_tanh_net() {
        let mut r = rng(11);
        let net = Network::init(
            2,
            &[4, 3],
            &[Activation::Tanh, Activation::Sigmoid],
            1,
            false,
            false,
            &mut r,
        )
        .unwrap();
        let sym = net.to_symbolic_scalar();
        for _ in 0..100 {
            let p = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
            let nn = net.forward_scalar(&p).unwrap();
            let sv = sym.eval(&p).unwrap();
            assert!((nn - sv).abs() <= 1e-9, "net {nn} vs symbolic {sv}");
        }
    }

    #[test]
    fn grad_input_matches_symbolic_derivative() {
        let mut r = rng(12);
        let net = Network::init(
            2,
            &[5],
            &[Activation::TanhSquared],
            1,
            true,
            false,
            &mut r,
        )
        .unwrap();
        let sym = net.to_symbolic_scalar();
        let dx0 = sym.diff(0);
        let dx1 = sym.diff(1);
        for _ in 0..100 {
            let p = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
            let g = net.grad_input(&p).unwrap();
            assert!((g[0][0] - dx0.eval(&p).unwrap()).abs() < 1e-8);
            assert!((g[0][1] - dx1.eval(&p).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn controller_symbolic_linear_form() {
        // single linear output layer: W = [[-1.0, -1.73]]
        let net = Network {
            input_dim: 2,
            output_dim: 1,
            hidden: vec![],
            out_weights: vec![vec![-1.0, -1.73]],
            out_bias: vec![0.0],
            positive_output: false,
            zero_at_origin: true,
        };
        let sym = &net.to_symbolic()[0];
        for p in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.4]] {
            let want = -1.0 * p[0] - 1.73 * p[1];
            assert!((sym.eval(&p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn close_loop_substitutes_inputs() {
        use crate::expr::{parse, VectorField};
        let f = VectorField::new(
            2,
            1,
            vec![parse("x1", 2, 1).unwrap(), parse("u0", 2, 1).unwrap()],
        )
        .unwrap();
        let controller = Network {
            input_dim: 2,
            output_dim: 1,
            hidden: vec![],
            out_weights: vec![vec![-1.0, -1.0]],
            out_bias: vec![0.0],
            positive_output: false,
            zero_at_origin: true,
        };
        let closed = close_loop(&f, &controller).unwrap();
        assert_eq!(closed.dim_input, 0);
        let v = closed.eval(&[2.0, 3.0]).unwrap();
        assert_eq!(v, vec![3.0, -5.0]);
    }

    #[test]
    fn positive_output_weights_stay_positive() {
        let mut r = rng(4);
        let mut net =
            Network::init(2, &[6], &[Activation::Poly(2)], 1, true, false, &mut r).unwrap();
        // simulate aggressive raw-space updates
        for step in 0..100 {
            for row in &mut net.out_weights {
                for w in row.iter_mut() {
                    *w += if step % 2 == 0 { -1.0 } else { 0.7 };
                }
            }
            let eff = net.effective_out_weights();
            assert!(eff.iter().flatten().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn lyapunov_flagged_net_is_nonnegative_and_zero_at_origin() {
        let mut r = rng(5);
        let net =
            Network::init(3, &[6], &[Activation::Poly(2)], 1, true, false, &mut r).unwrap();
        assert_eq!(net.forward_scalar(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        for _ in 0..200 {
            let p = [
                r.gen_range(-3.0..3.0),
                r.gen_range(-3.0..3.0),
                r.gen_range(-3.0..3.0),
            ];
            assert!(net.forward_scalar(&p).unwrap() >= 0.0);
        }
    }

    fn param_fd_check(net: &Network, x: &[f64], dir: Option<&[f64]>) {
        let h = 1e-5;
        let eval = |n: &Network| -> f64 {
            match dir {
                None => n.forward_scalar(x).unwrap(),
                Some(d) => {
                    let g = n.grad_input(x).unwrap();
                    g[0].iter().zip(d).map(|(a, b)| a * b).sum()
                }
            }
        };
        let full = net.eval_full(x, dir).unwrap();
        let analytic = match dir {
            None => full.grad_params,
            Some(_) => full.lie_grad_params.unwrap(),
        };
        let analytic_flat = analytic.values_vec();

        // finite differences on every raw parameter
        let mut idx = 0;
        let mut max_rel: f64 = 0.0;
        let mut perturbed = net.clone();
        let n_params = analytic_flat.len();
        for i in 0..n_params {
            perturbed.clone_from(net);
            {
                let mut vals = params_mut(&mut perturbed);
                *vals[i] += h;
            }
            let up = eval(&perturbed);
            perturbed.clone_from(net);
            {
                let mut vals = params_mut(&mut perturbed);
                *vals[i] -= h;
            }
            let down = eval(&perturbed);
            let fd = (up - down) / (2.0 * h);
            let a = analytic_flat[i];
            // frozen bias slots legitimately report zero
            if net.biases_frozen() && is_bias_slot(net, i) {
                assert_eq!(a, 0.0);
                idx += 1;
                continue;
            }
            let rel = (a - fd).abs() / (1.0 + a.abs().max(fd.abs()));
            max_rel = max_rel.max(rel);
            idx += 1;
        }
        assert_eq!(idx, n_params);
        assert!(max_rel <= 1e-4, "max relative gradient error {max_rel}");
    }

    fn params_mut(net: &mut Network) -> Vec<&mut f64> {
        let mut out = Vec::new();
        for l in &mut net.hidden {
            out.extend(l.weights.iter_mut().flatten());
            out.extend(l.bias.iter_mut());
        }
        out.extend(net.out_weights.iter_mut().flatten());
        out.extend(net.out_bias.iter_mut());
        out
    }

    fn is_bias_slot(net: &Network, flat_idx: usize) -> bool {
        let mut i = 0;
        for l in &net.hidden {
            i += l.weights.len() * l.weights[0].len();
            if flat_idx < i + l.bias.len() && flat_idx >= i {
                return true;
            }
            i += l.bias.len();
        }
        i += net.out_weights.len() * net.out_weights[0].len();
        flat_idx >= i
    }

    #[test]
    fn value_gradients_match_finite_differences() {
        let mut r = rng(21);
        let net = Network::init(
            2,
            &[4, 3],
            &[Activation::Tanh, Activation::Tanh],
            1,
            false,
            false,
            &mut r,
        )
        .unwrap();
        param_fd_check(&net, &[0.4, -0.9], None);
    }

    #[test]
    fn lie_gradients_match_finite_differences_tanh() {
        let mut r = rng(22);
        let net = Network::init(
            2,
            &[4, 3],
            &[Activation::Tanh, Activation::Tanh],
            1,
            false,
            false,
            &mut r,
        )
        .unwrap();
        param_fd_check(&net, &[0.4, -0.9], Some(&[0.7, 1.3]));
    }

    #[test]
    fn lie_gradients_match_finite_differences_mixed_activations() {
        let mut r = rng(23);
        for acts in [
            vec![Activation::Poly(2)],
            vec![Activation::TanhSquared],
            vec![Activation::Sigmoid, Activation::Poly(2)],
            vec![Activation::Softplus, Activation::Tanh],
        ] {
            let sizes: Vec<usize> = acts.iter().map(|_| 4).collect();
            let net = Network::init(2, &sizes, &acts, 1, false, false, &mut r).unwrap();
            param_fd_check(&net, &[0.3, 0.8], Some(&[-0.5, 0.2]));
        }
    }

    #[test]
    fn lie_gradients_respect_positive_output_reparam() {
        let mut r = rng(24);
        let net =
            Network::init(2, &[5], &[Activation::Poly(2)], 1, true, false, &mut r).unwrap();
        param_fd_check(&net, &[0.6, -0.2], Some(&[1.0, -1.0]));
        param_fd_check(&net, &[0.6, -0.2], None);
    }

    #[test]
    fn grad_input_at_origin_is_weight_chain_for_odd_activations() {
        // tanh'(0) = 1, so ∇N(0) = W2 · W1 for a zero-bias tanh net
        let net = Network {
            input_dim: 2,
            output_dim: 1,
            hidden: vec![Layer {
                weights: vec![vec![0.5, -0.25], vec![1.5, 2.0]],
                bias: vec![0.0, 0.0],
                activation: Activation::Tanh,
            }],
            out_weights: vec![vec![2.0, -1.0]],
            out_bias: vec![0.0],
            positive_output: false,
            zero_at_origin: false,
        };
        let g = net.grad_input(&[0.0, 0.0]).unwrap();
        // W2·W1 = [2*0.5 - 1*1.5, 2*(-0.25) - 1*2.0]
        assert!((g[0][0] - (-0.5)).abs() < 1e-12);
        assert!((g[0][1] - (-2.5)).abs() < 1e-12);
    }
}
