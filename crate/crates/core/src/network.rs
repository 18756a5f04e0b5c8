//! Small dense MLPs with analytic derivatives.
//!
//! Besides plain forward/backward, this module exposes exact input
//! Jacobians, Jacobian-vector products computed by tangent propagation,
//! and the gradient of a squared JVP norm with respect to both the
//! parameters and the input. The latter backpropagates through the
//! augmented (value, tangent) computation and therefore needs second
//! derivatives of the activations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Supported scalar activations. Each provides value, first and second
/// derivative in closed form; the second derivative of the
/// piecewise-linear activations is zero almost everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    Tanh,
    Sigmoid,
    Elu,
    Relu,
    LeakyRelu,
}

pub const LEAKY_SLOPE: f64 = 0.2;

impl ActivationKind {
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Tanh => x.tanh(),
            Self::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Self::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Self::Relu => x.max(0.0),
            Self::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
        }
    }

    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::Sigmoid => {
                let s = self.value(x);
                s * (1.0 - s)
            }
            Self::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }

    #[inline]
    pub fn second_deriv(self, x: f64) -> f64 {
        match self {
            Self::Identity | Self::Relu | Self::LeakyRelu => 0.0,
            Self::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Self::Sigmoid => {
                let s = self.value(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Self::Elu => {
                if x > 0.0 {
                    0.0
                } else {
                    x.exp()
                }
            }
        }
    }

    /// True for activations whose derivative jumps at zero.
    pub fn has_kink(self) -> bool {
        matches!(self, Self::Relu | Self::LeakyRelu)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "tanh" => Ok(Self::Tanh),
            "sigmoid" => Ok(Self::Sigmoid),
            "elu" => Ok(Self::Elu),
            "relu" => Ok(Self::Relu),
            "leaky_relu" => Ok(Self::LeakyRelu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Tanh => "tanh",
            Self::Sigmoid => "sigmoid",
            Self::Elu => "elu",
            Self::Relu => "relu",
            Self::LeakyRelu => "leaky_relu",
        }
    }
}

/// One dense layer: `a = act(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vector,
    pub activation: ActivationKind,
}

/// A dense MLP: an ordered stack of [`Layer`]s with chained dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
}

/// Per-layer pre-activations and activations cached by [`MlpNetwork::forward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vector,
    pub pre: Vec<Vector>,
    pub post: Vec<Vector>,
}

/// Cached intermediates of the augmented (value, tangent) forward pass.
#[derive(Debug, Clone)]
pub struct JvpTrace {
    pub input: Vector,
    pub input_tangent: Vector,
    pub pre: Vec<Vector>,
    pub post: Vec<Vector>,
    pub tangent_pre: Vec<Vector>,
    pub tangent_post: Vec<Vector>,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone)]
pub struct ParamGradients {
    pub layers: Vec<(Matrix, Vector)>,
}

impl ParamGradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.w.rows(), l.w.cols()), Vector::zeros(l.b.dim())))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &ParamGradients, s: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (a, o) in w.data_mut().iter_mut().zip(ow.data()) {
                *a += s * o;
            }
            b.axpy(s, ob);
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for (w, b) in &self.layers {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b.as_slice());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.data().iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()))
    }
}

impl MlpNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::DimensionMismatch("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].w.rows() != pair[1].w.cols() {
                return Err(Error::DimensionMismatch("layer dimensions do not chain".into()));
            }
        }
        for l in &layers {
            if l.w.rows() != l.b.dim() {
                return Err(Error::DimensionMismatch("bias length must match layer rows".into()));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-style uniform init in `±sqrt(6/(fan_in+fan_out))`.
    pub fn init<R: Rng>(dims: &[usize], activations: &[ActivationKind], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::Config("init needs dims.len()-1 activations".into()));
        }
        let mut layers = Vec::new();
        for (k, act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Matrix::zeros(fan_out, fan_in);
            for v in w.data_mut() {
                *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
            }
            layers.push(Layer { w, b: Vector::zeros(fan_out), activation: *act });
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.rows() * l.w.cols() + l.b.dim()).sum()
    }

    pub fn flatten_params_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(l.b.as_slice());
        }
    }

    /// Loads parameters from a flat slice; returns how many were consumed.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<usize> {
        let need = self.param_count();
        if flat.len() < need {
            return Err(Error::LengthMismatch { expected: need, got: flat.len() });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let wn = l.w.rows() * l.w.cols();
            l.w.data_mut().copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = l.b.dim();
            l.b.as_mut_slice().copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(off)
    }

    pub fn forward(&self, z: &Vector) -> Result<(Vector, ForwardTrace)> {
        if z.dim() != self.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "forward input {} vs in_dim {}",
                z.dim(),
                self.in_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut a = z.clone();
        for l in &self.layers {
            let mut p = l.w.matvec(&a)?;
            for (pi, bi) in p.as_mut_slice().iter_mut().zip(l.b.iter()) {
                *pi += bi;
            }
            a = Vector::from_fn(p.dim(), |i| l.activation.value(p[i]));
            pre.push(p);
            post.push(a.clone());
        }
        Ok((a, ForwardTrace { input: z.clone(), pre, post }))
    }

    /// Gradients of `upstreamᵀ output` with respect to parameters and input.
    pub fn backward(&self, trace: &ForwardTrace, upstream: &Vector) -> Result<(ParamGradients, Vector)> {
        if upstream.dim() != self.out_dim() {
            return Err(Error::DimensionMismatch("upstream length must match out_dim".into()));
        }
        if trace.pre.len() != self.layers.len() {
            return Err(Error::DimensionMismatch("trace does not match network".into()));
        }
        let mut grads = ParamGradients::zeros_like(self);
        let mut delta = upstream.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let pre = &trace.pre[l];
            let dpre = Vector::from_fn(delta.dim(), |i| delta[i] * layer.activation.deriv(pre[i]));
            let below = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let (gw, gb) = &mut grads.layers[l];
            for i in 0..gw.rows() {
                for j in 0..gw.cols() {
                    gw.set(i, j, dpre[i] * below[j]);
                }
            }
            *gb = dpre.clone();
            delta = matvec_transposed(&layer.w, &dpre);
        }
        Ok((grads, delta))
    }

    /// Exact Jacobian of the network output with respect to its input.
    pub fn input_jacobian(&self, z: &Vector) -> Result<Matrix> {
        let (_, trace) = self.forward(z)?;
        let mut jac = Matrix::identity(self.in_dim());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = layer.w.matmul(&jac)?;
            let pre = &trace.pre[l];
            for i in 0..next.rows() {
                let d = layer.activation.deriv(pre[i]);
                for j in 0..next.cols() {
                    next.set(i, j, next.get(i, j) * d);
                }
            }
            jac = next;
        }
        Ok(jac)
    }

    /// Jacobian-vector product `J(z) t` by tangent propagation; no full
    /// Jacobian is materialized.
    pub fn jvp(&self, z: &Vector, t: &Vector) -> Result<(Vector, JvpTrace)> {
        if z.dim() != self.in_dim() || t.dim() != self.in_dim() {
            return Err(Error::DimensionMismatch("jvp input/tangent must match in_dim".into()));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut tangent_pre = Vec::with_capacity(self.layers.len());
        let mut tangent_post = Vec::with_capacity(self.layers.len());
        let mut a = z.clone();
        let mut u = t.clone();
        for l in &self.layers {
            let mut p = l.w.matvec(&a)?;
            for (pi, bi) in p.as_mut_slice().iter_mut().zip(l.b.iter()) {
                *pi += bi;
            }
            let s = l.w.matvec(&u)?;
            a = Vector::from_fn(p.dim(), |i| l.activation.value(p[i]));
            u = Vector::from_fn(p.dim(), |i| l.activation.deriv(p[i]) * s[i]);
            pre.push(p);
            tangent_pre.push(s);
            post.push(a.clone());
            tangent_post.push(u.clone());
        }
        Ok((
            u.clone(),
            JvpTrace {
                input: z.clone(),
                input_tangent: t.clone(),
                pre,
                post,
                tangent_pre,
                tangent_post,
            },
        ))
    }

    /// Gradient of `‖J(z) t‖²` with respect to parameters and `z`.
    ///
    /// Backpropagates through the augmented (value, tangent) forward pass;
    /// the tangent recurrence `u_l = act'(p_l) ⊙ (W_l u_{l-1})` makes the
    /// activation second derivative appear in the adjoint of `p_l`.
    pub fn grad_jvp_sqnorm(&self, z: &Vector, t: &Vector) -> Result<(ParamGradients, Vector)> {
        let (out, trace) = self.jvp(z, t)?;
        let n_layers = self.layers.len();
        let mut grads = ParamGradients::zeros_like(self);

        let mut u_bar = out.scale(2.0);
        let mut a_bar = Vector::zeros(out.dim());
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let pre = &trace.pre[l];
            let s = &trace.tangent_pre[l];
            let d1 = Vector::from_fn(pre.dim(), |i| layer.activation.deriv(pre[i]));
            let d2 = Vector::from_fn(pre.dim(), |i| layer.activation.second_deriv(pre[i]));
            let s_bar = u_bar.hadamard(&d1);
            let p_bar = Vector::from_fn(pre.dim(), |i| {
                a_bar[i] * d1[i] + u_bar[i] * s[i] * d2[i]
            });
            let below_a = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let below_u = if l == 0 { &trace.input_tangent } else { &trace.tangent_post[l - 1] };
            let (gw, gb) = &mut grads.layers[l];
            for i in 0..gw.rows() {
                for j in 0..gw.cols() {
                    gw.set(i, j, p_bar[i] * below_a[j] + s_bar[i] * below_u[j]);
                }
            }
            *gb = p_bar.clone();
            a_bar = matvec_transposed(&layer.w, &p_bar);
            u_bar = matvec_transposed(&layer.w, &s_bar);
        }
        Ok((grads, a_bar))
    }
}

/// `Wᵀ v` without materializing the transpose.
fn matvec_transposed(w: &Matrix, v: &Vector) -> Vector {
    let mut out = Vector::zeros(w.cols());
    for i in 0..w.rows() {
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        for j in 0..w.cols() {
            out[j] += w.get(i, j) * vi;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ALL_ACTS: [ActivationKind; 6] = [
        ActivationKind::Identity,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
        ActivationKind::Elu,
        ActivationKind::Relu,
        ActivationKind::LeakyRelu,
    ];

    fn random_net(act: ActivationKind, rng: &mut ChaCha8Rng) -> MlpNetwork {
        let n_layers = rng.random_range(1..=3usize);
        let mut dims = vec![rng.random_range(2..=5usize)];
        for _ in 0..n_layers {
            dims.push(rng.random_range(2..=5usize));
        }
        let acts = vec![act; n_layers];
        MlpNetwork::init(&dims, &acts, rng).unwrap()
    }

    /// Resamples inputs so kinked activations stay away from breakpoints.
    fn safe_point(net: &MlpNetwork, rng: &mut ChaCha8Rng) -> Vector {
        'outer: for _ in 0..200 {
            let z = Vector::from_fn(net.in_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);
            let (_, trace) = net.forward(&z).unwrap();
            for (l, layer) in net.layers().iter().enumerate() {
                if layer.activation.has_kink()
                    && trace.pre[l].iter().any(|p| p.abs() < 1e-3)
                {
                    continue 'outer;
                }
            }
            return z;
        }
        panic!("could not sample a kink-free point");
    }

    fn flatten(net: &MlpNetwork) -> Vec<f64> {
        let mut v = Vec::new();
        net.flatten_params_into(&mut v);
        v
    }

    fn with_params(net: &MlpNetwork, p: &[f64]) -> MlpNetwork {
        let mut n = net.clone();
        n.load_flat(p).unwrap();
        n
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn forward_identity_and_linear() {
        let w = Matrix::identity(3);
        let net = MlpNetwork::new(vec![Layer {
            w,
            b: Vector::zeros(3),
            activation: ActivationKind::Identity,
        }])
        .unwrap();
        let z = Vector::from_slice(&[1.0, -2.0, 0.5]);
        let (out, _) = net.forward(&z).unwrap();
        assert_eq!(out, z);

        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let b = Vector::from_slice(&[0.1, -0.2]);
        let net = MlpNetwork::new(vec![Layer { w: w.clone(), b: b.clone(), activation: ActivationKind::Identity }])
            .unwrap();
        let z = Vector::from_slice(&[0.3, -0.7]);
        let (out, _) = net.forward(&z).unwrap();
        let expect = w.matvec(&z).unwrap().add(&b);
        assert!(out.sub(&expect).norm() < 1e-15);
    }

    #[test]
    fn forward_matches_straight_line_reevaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = MlpNetwork::init(&[3, 4, 2], &[ActivationKind::Tanh; 2], &mut rng).unwrap();
        let z = Vector::from_slice(&[0.2, -0.4, 0.9]);
        let (out, _) = net.forward(&z).unwrap();
        // Independent re-evaluation without the trace machinery.
        let mut a: Vec<f64> = z.as_slice().to_vec();
        for l in net.layers() {
            let mut next = vec![0.0; l.w.rows()];
            for (i, n) in next.iter_mut().enumerate() {
                let mut s = l.b[i];
                for (j, aj) in a.iter().enumerate() {
                    s += l.w.get(i, j) * aj;
                }
                *n = s.tanh();
            }
            a = next;
        }
        for (o, e) in out.iter().zip(&a) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_zero_upstream_and_linear_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = random_net(ActivationKind::Tanh, &mut rng);
        let z = Vector::from_fn(net.in_dim(), |_| 0.3);
        let (_, trace) = net.forward(&z).unwrap();
        let (grads, ig) = net.backward(&trace, &Vector::zeros(net.out_dim())).unwrap();
        assert!(grads.layers.iter().all(|(w, b)| w.frobenius_norm() == 0.0 && b.norm() == 0.0));
        assert!(ig.norm() == 0.0);

        let w = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]).unwrap();
        let net = MlpNetwork::new(vec![Layer { w, b: Vector::zeros(2), activation: ActivationKind::Identity }])
            .unwrap();
        let z = Vector::from_slice(&[0.7, -0.1]);
        let u = Vector::from_slice(&[2.0, -1.0]);
        let (_, trace) = net.forward(&z).unwrap();
        let (grads, _) = net.backward(&trace, &u).unwrap();
        let (gw, gb) = &grads.layers[0];
        for i in 0..2 {
            for j in 0..2 {
                assert!((gw.get(i, j) - u[i] * z[j]).abs() < 1e-15);
            }
            assert!((gb[i] - u[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_checks_against_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let h = 1e-5;
        for act in ALL_ACTS {
            for _ in 0..4 {
                let net = random_net(act, &mut rng);
                let z = safe_point(&net, &mut rng);
                let upstream = Vector::from_fn(net.out_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);

                // backward vs FD on parameters and input
                let (_, trace) = net.forward(&z).unwrap();
                let (grads, input_grad) = net.backward(&trace, &upstream).unwrap();
                let mut flat_g = Vec::new();
                grads.flatten_into(&mut flat_g);
                let params = flatten(&net);
                let loss = |n: &MlpNetwork, zz: &Vector| {
                    let (o, _) = n.forward(zz).unwrap();
                    o.dot(&upstream)
                };
                for idx in 0..params.len() {
                    let mut p_hi = params.clone();
                    p_hi[idx] += h;
                    let mut p_lo = params.clone();
                    p_lo[idx] -= h;
                    let fd = (loss(&with_params(&net, &p_hi), &z) - loss(&with_params(&net, &p_lo), &z))
                        / (2.0 * h);
                    assert!(rel_err(flat_g[idx], fd) < 1e-5, "{act:?} param {idx}");
                }
                for i in 0..z.dim() {
                    let mut z_hi = z.clone();
                    z_hi[i] += h;
                    let mut z_lo = z.clone();
                    z_lo[i] -= h;
                    let fd = (loss(&net, &z_hi) - loss(&net, &z_lo)) / (2.0 * h);
                    assert!(rel_err(input_grad[i], fd) < 1e-5, "{act:?} input {i}");
                }

                // input_jacobian vs FD
                let jac = net.input_jacobian(&z).unwrap();
                for j in 0..z.dim() {
                    let mut z_hi = z.clone();
                    z_hi[j] += h;
                    let mut z_lo = z.clone();
                    z_lo[j] -= h;
                    let (o_hi, _) = net.forward(&z_hi).unwrap();
                    let (o_lo, _) = net.forward(&z_lo).unwrap();
                    for i in 0..net.out_dim() {
                        let fd = (o_hi[i] - o_lo[i]) / (2.0 * h);
                        assert!(rel_err(jac.get(i, j), fd) < 1e-5, "{act:?} jac {i},{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn jvp_matches_jacobian_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for act in ALL_ACTS {
            let net = random_net(act, &mut rng);
            let z = safe_point(&net, &mut rng);
            let jac = net.input_jacobian(&z).unwrap();
            let (zero, _) = net.jvp(&z, &Vector::zeros(net.in_dim())).unwrap();
            assert!(zero.norm() == 0.0);
            for c in 0..net.in_dim() {
                let (col, _) = net.jvp(&z, &Vector::basis(net.in_dim(), c)).unwrap();
                for i in 0..net.out_dim() {
                    assert!((col[i] - jac.get(i, c)).abs() < 1e-12);
                }
            }
            let t = Vector::from_fn(net.in_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);
            let (jt, _) = net.jvp(&z, &t).unwrap();
            let direct = jac.matvec(&t).unwrap();
            assert!(jt.sub(&direct).norm() < 1e-12);
        }
    }

    #[test]
    fn grad_jvp_sqnorm_linear_net_closed_form() {
        // g(z) = W z, t = e_c: gradient of ‖W e_c‖² has entries 2 W_ic in
        // column c and zero elsewhere.
        let w = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![-1.5, 0.25]]).unwrap();
        let net = MlpNetwork::new(vec![Layer {
            w: w.clone(),
            b: Vector::zeros(3),
            activation: ActivationKind::Identity,
        }])
        .unwrap();
        let z = Vector::from_slice(&[0.3, -0.9]);
        for c in 0..2 {
            let (grads, input_grad) = net.grad_jvp_sqnorm(&z, &Vector::basis(2, c)).unwrap();
            let (gw, gb) = &grads.layers[0];
            for i in 0..3 {
                for j in 0..2 {
                    let expect = if j == c { 2.0 * w.get(i, c) } else { 0.0 };
                    assert!((gw.get(i, j) - expect).abs() < 1e-14);
                }
            }
            assert!(gb.norm() == 0.0);
            assert!(input_grad.norm() == 0.0);
        }
    }

    #[test]
    fn grad_jvp_sqnorm_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for act in [ActivationKind::Elu, ActivationKind::Relu, ActivationKind::Tanh] {
            for _ in 0..3 {
                let net = random_net(act, &mut rng);
                let z = safe_point(&net, &mut rng);
                let t = Vector::from_fn(net.in_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);
                let (grads, input_grad) = net.grad_jvp_sqnorm(&z, &t).unwrap();
                let mut flat_g = Vec::new();
                grads.flatten_into(&mut flat_g);
                let params = flatten(&net);
                let sqn = |n: &MlpNetwork, zz: &Vector| {
                    let (o, _) = n.jvp(zz, &t).unwrap();
                    o.sq_norm()
                };
                for idx in 0..params.len() {
                    let mut p_hi = params.clone();
                    p_hi[idx] += h;
                    let mut p_lo = params.clone();
                    p_lo[idx] -= h;
                    let fd =
                        (sqn(&with_params(&net, &p_hi), &z) - sqn(&with_params(&net, &p_lo), &z)) / (2.0 * h);
                    assert!(rel_err(flat_g[idx], fd) < 1e-5, "{act:?} param {idx}");
                }
                for i in 0..z.dim() {
                    let mut z_hi = z.clone();
                    z_hi[i] += h;
                    let mut z_lo = z.clone();
                    z_lo[i] -= h;
                    let fd = (sqn(&net, &z_hi) - sqn(&net, &z_lo)) / (2.0 * h);
                    assert!(rel_err(input_grad[i], fd) < 1e-5, "{act:?} input {i}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn jvp_is_linear_in_tangent(seed in 0u64..200, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_net(ALL_ACTS[(seed % 6) as usize], &mut rng);
            let z = Vector::from_fn(net.in_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);
            let t1 = Vector::from_fn(net.in_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);
            let t2 = Vector::from_fn(net.in_dim(), |_| rng.random::<f64>() * 2.0 - 1.0);
            let combo = t1.scale(a).add(&t2.scale(b));
            let (lhs, _) = net.jvp(&z, &combo).unwrap();
            let (j1, _) = net.jvp(&z, &t1).unwrap();
            let (j2, _) = net.jvp(&z, &t2).unwrap();
            let rhs = j1.scale(a).add(&j2.scale(b));
            prop_assert!(lhs.sub(&rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
