use super::params::{ParamId, ParamStore};
use crate::error::{invalid, Error, Result};
use crate::tensor::kernels::{self, ConvGeometry};
use crate::tensor::{Scalar, Tensor};

/// Probabilities entering the binary cross-entropy are clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub const BCE_EPS: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(ParamId),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeometry,
    },
    ConvTranspose2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
    },
    MaxPool2 {
        input: Var,
        argmax: Vec<usize>,
    },
    Relu(Var),
    Sigmoid(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Var, Var),
    Sum(Var),
    Bce {
        pred: Var,
        target: Tensor<T>,
    },
    Mse {
        pred: Var,
        target: Tensor<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardReport {
    /// The loss did not depend on any parameter; all gradients are zero.
    pub detached: bool,
    pub params_reached: usize,
}

/// Append-only record of differentiable operations. Values are immutable
/// once recorded; `backward` replays the record in reverse.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool, name: &'static str) -> Result<Var> {
        value.ensure_finite(name)?;
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(value, Op::Constant, false, "constant")
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Result<Var> {
        self.push(store.value(id).clone(), Op::Param(id), true, "param")
    }

    /// Leaf handles for every parameter, indexed by `ParamId::index`.
    pub fn bind(&mut self, store: &ParamStore<T>) -> Result<Vec<Var>> {
        store.iter().map(|(id, _)| self.param(store, id)).collect()
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        let geom = ConvGeometry::new(stride, padding)?;
        let out = kernels::conv2d(self.value(input), self.value(weight), bias.map(|b| self.value(b)), geom)?;
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.rg(&deps);
        self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
            rg,
            "conv2d",
        )
    }

    pub fn conv2d_transpose(&mut self, input: Var, weight: Var, bias: Option<Var>, stride: usize) -> Result<Var> {
        let out = kernels::conv2d_transpose(self.value(input), self.value(weight), bias.map(|b| self.value(b)), stride)?;
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.rg(&deps);
        self.push(
            out,
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                stride,
            },
            rg,
            "conv2d_transpose",
        )
    }

    pub fn maxpool2(&mut self, input: Var) -> Result<Var> {
        let (out, argmax) = kernels::maxpool2(self.value(input))?;
        let rg = self.rg(&[input]);
        self.push(out, Op::MaxPool2 { input, argmax }, rg, "maxpool2")
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let out = self.value(input).map(|v| if v > T::zero() { v } else { T::zero() });
        let rg = self.rg(&[input]);
        self.push(out, Op::Relu(input), rg, "relu")
    }

    pub fn sigmoid(&mut self, input: Var) -> Result<Var> {
        let out = self.value(input).map(sigmoid);
        let rg = self.rg(&[input]);
        self.push(out, Op::Sigmoid(input), rg, "sigmoid")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Add(a, b), rg, "add")
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Mul(a, b), rg, "mul")
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).concat_channels(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Concat(a, b), rg, "concat_channels")
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(input).sum());
        let rg = self.rg(&[input]);
        self.push(out, Op::Sum(input), rg, "sum")
    }

    /// Mean binary cross-entropy of probabilities `pred` against a `{0,1}` target.
    pub fn bce_loss(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        let p = self.value(pred);
        p.expect_same_shape(target, "bce_loss")?;
        check_binary(target, "bce_loss")?;
        let loss = T::from_f64(crate::train::loss::bce(p.data(), target.data()));
        let rg = self.rg(&[pred]);
        self.push(
            Tensor::scalar(loss),
            Op::Bce {
                pred,
                target: target.clone(),
            },
            rg,
            "bce_loss",
        )
    }

    pub fn mse(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        let p = self.value(pred);
        p.expect_same_shape(target, "mse")?;
        let loss = T::from_f64(crate::train::loss::mse(p.data(), target.data()));
        let rg = self.rg(&[pred]);
        self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.clone(),
            },
            rg,
            "mse",
        )
    }

    /// Reverse-mode sweep from a scalar `loss`, accumulating into the
    /// gradient slots of `store`. Calling twice without
    /// [`ParamStore::zero_grad`] adds the gradients twice.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<BackwardReport> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar {
                shape: lv.shape().to_vec(),
            });
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(BackwardReport {
                detached: true,
                params_reached: 0,
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape().to_vec(), T::one()));
        let mut reached = 0;

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, t: Tensor<T>| -> Result<()> {
                if !self.nodes[v.0].requires_grad {
                    return Ok(());
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot @ None => {
                        *slot = Some(t);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    g.ensure_finite("backward")?;
                    store.accumulate_grad(*id, &g)?;
                    reached += 1;
                }
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    geom,
                } => {
                    let cg = kernels::conv2d_backward(self.value(*input), self.value(*weight), &g, *geom)?;
                    send(*input, cg.input)?;
                    send(*weight, cg.weight)?;
                    if let Some(b) = bias {
                        send(*b, cg.bias)?;
                    }
                }
                Op::ConvTranspose2d {
                    input,
                    weight,
                    bias,
                    stride,
                } => {
                    let cg = kernels::conv2d_transpose_backward(self.value(*input), self.value(*weight), &g, *stride)?;
                    send(*input, cg.input)?;
                    send(*weight, cg.weight)?;
                    if let Some(b) = bias {
                        send(*b, cg.bias)?;
                    }
                }
                Op::MaxPool2 { input, argmax } => {
                    let gx = kernels::maxpool2_backward(self.value(*input).shape(), argmax, &g);
                    send(*input, gx)?;
                }
                Op::Relu(input) => {
                    let gx = self.value(*input).zip_map(&g, "relu", |x, gy| if x > T::zero() { gy } else { T::zero() })?;
                    send(*input, gx)?;
                }
                Op::Sigmoid(input) => {
                    let gx = node.value.zip_map(&g, "sigmoid", |y, gy| gy * y * (T::one() - y))?;
                    send(*input, gx)?;
                }
                Op::Add(a, b) => {
                    send(*a, g.clone())?;
                    send(*b, g)?;
                }
                Op::Mul(a, b) => {
                    send(*a, g.zip_map(self.value(*b), "mul", |gy, y| gy * y)?)?;
                    send(*b, g.zip_map(self.value(*a), "mul", |gy, x| gy * x)?)?;
                }
                Op::Concat(a, b) => {
                    let ca = self.value(*a).shape()[1];
                    let cb = self.value(*b).shape()[1];
                    send(*a, g.slice_channels(0, ca)?)?;
                    send(*b, g.slice_channels(ca, ca + cb)?)?;
                }
                Op::Sum(input) => {
                    let shape = self.value(*input).shape().to_vec();
                    send(*input, Tensor::full(shape, g.data()[0]))?;
                }
                Op::Bce { pred, target } => {
                    let scale = g.data()[0];
                    let p = self.value(*pred);
                    let n = T::from_f64(p.len() as f64);
                    let (lo, hi) = (T::from_f64(BCE_EPS), T::one() - T::from_f64(BCE_EPS));
                    // The clamp is passed straight through so saturated
                    // predictions still receive a gradient.
                    let gx = p.zip_map(target, "bce_loss", |pv, y| {
                        let pc = pv.max(lo).min(hi);
                        scale * (pc - y) / (pc * (T::one() - pc)) / n
                    })?;
                    send(*pred, gx)?;
                }
                Op::Mse { pred, target } => {
                    let scale = g.data()[0];
                    let p = self.value(*pred);
                    let two_over_n = T::from_f64(2.0 / p.len() as f64);
                    let gx = p.zip_map(target, "mse", |pv, y| scale * two_over_n * (pv - y))?;
                    send(*pred, gx)?;
                }
            }
        }
        Ok(BackwardReport {
            detached: reached == 0,
            params_reached: reached,
        })
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn check_binary<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<()> {
    if t.data().iter().all(|&v| v == T::zero() || v == T::one()) {
        Ok(())
    } else {
        Err(invalid(format!("{op}: target values must be 0 or 1")))
    }
}
