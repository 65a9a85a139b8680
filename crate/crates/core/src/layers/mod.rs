//! Layer semantics with forward passes and gradients.
//!
//! Gradients of complex activations are carried as complex vectors whose real
//! part is `dL/d(re)` and imaginary part `dL/d(im)`; real and imaginary
//! components are independent real parameters throughout.

pub mod conv;
pub mod linear;
pub mod nonlinear;
pub mod pool;

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};

pub use conv::{build_conv_plan, ConvGeometry, ConvPlan};
pub use pool::PoolCache;

/// Layer kinds with their stable checkpoint ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    ComplexLinear = 0,
    Sinusoid = 1,
    ModSoftplus = 2,
    ModSquared = 3,
    LogSoftmax = 4,
    QuantumConv = 5,
    SplitMaxPool = 6,
}

impl LayerKind {
    pub const ALL: [LayerKind; 7] = [
        LayerKind::ComplexLinear,
        LayerKind::Sinusoid,
        LayerKind::ModSoftplus,
        LayerKind::ModSquared,
        LayerKind::LogSoftmax,
        LayerKind::QuantumConv,
        LayerKind::SplitMaxPool,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown layer kind id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::ComplexLinear => "complex_linear",
            LayerKind::Sinusoid => "sinusoid",
            LayerKind::ModSoftplus => "mod_softplus",
            LayerKind::ModSquared => "mod_squared",
            LayerKind::LogSoftmax => "log_softmax",
            LayerKind::QuantumConv => "quantum_conv",
            LayerKind::SplitMaxPool => "split_max_pool",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    ComplexLinear { in_dim: usize, out_dim: usize },
    Sinusoid { dim: usize, lambda: f64 },
    ModSoftplus { dim: usize },
    ModSquared { dim: usize },
    LogSoftmax { dim: usize },
    QuantumConv { dim: usize, kernel: usize, step: usize },
    SplitMaxPool { dim: usize, window: usize, stride: usize },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::ComplexLinear { .. } => LayerKind::ComplexLinear,
            LayerSpec::Sinusoid { .. } => LayerKind::Sinusoid,
            LayerSpec::ModSoftplus { .. } => LayerKind::ModSoftplus,
            LayerSpec::ModSquared { .. } => LayerKind::ModSquared,
            LayerSpec::LogSoftmax { .. } => LayerKind::LogSoftmax,
            LayerSpec::QuantumConv { .. } => LayerKind::QuantumConv,
            LayerSpec::SplitMaxPool { .. } => LayerKind::SplitMaxPool,
        }
    }

    pub fn in_dim(&self) -> usize {
        match *self {
            LayerSpec::ComplexLinear { in_dim, .. } => in_dim,
            LayerSpec::Sinusoid { dim, .. }
            | LayerSpec::ModSoftplus { dim }
            | LayerSpec::ModSquared { dim }
            | LayerSpec::LogSoftmax { dim }
            | LayerSpec::QuantumConv { dim, .. }
            | LayerSpec::SplitMaxPool { dim, .. } => dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match *self {
            LayerSpec::ComplexLinear { out_dim, .. } => out_dim,
            LayerSpec::SplitMaxPool { dim, window, stride } => {
                pool::pooled_len(dim, window, stride).unwrap_or(0)
            }
            _ => self.in_dim(),
        }
    }

    /// Whether the layer consumes a complex (as opposed to real) activation.
    pub fn complex_input(&self) -> bool {
        !matches!(self, LayerSpec::LogSoftmax { .. })
    }

    pub fn complex_output(&self) -> bool {
        !matches!(self, LayerSpec::ModSquared { .. } | LayerSpec::LogSoftmax { .. })
    }

    /// Shape `(rows, cols)` of the trainable complex weights, if any.
    pub fn weight_shape(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::ComplexLinear { in_dim, out_dim } => Some((in_dim, out_dim)),
            LayerSpec::QuantumConv { kernel, .. } => Some((kernel, kernel)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.in_dim() == 0 {
            return bad(format!("{} layer has zero input dimension", self.kind()));
        }
        match *self {
            LayerSpec::ComplexLinear { out_dim: 0, .. } => {
                bad("complex_linear layer has zero output dimension".into())
            }
            LayerSpec::Sinusoid { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                bad(format!("sinusoid scale must be positive, got {lambda}"))
            }
            LayerSpec::QuantumConv { dim, kernel, step } => {
                ConvGeometry::new(dim, kernel, step).map(|_| ())
            }
            LayerSpec::SplitMaxPool { dim, window, stride } => {
                pool::pooled_len(dim, window, stride).map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

/// Value flowing between layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Complex(ComplexVector),
    Real(Vec<f64>),
}

impl Activation {
    pub fn len(&self) -> usize {
        match self {
            Activation::Complex(v) => v.len(),
            Activation::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of real components (`2N` for complex activations).
    pub fn real_len(&self) -> usize {
        match self {
            Activation::Complex(v) => 2 * v.len(),
            Activation::Real(v) => v.len(),
        }
    }

    /// Real component `i` in concatenated order (`re` then `im`).
    pub fn component(&self, i: usize) -> f64 {
        match self {
            Activation::Complex(v) if i < v.len() => v.re[i],
            Activation::Complex(v) => v.im[i - v.len()],
            Activation::Real(v) => v[i],
        }
    }

    pub fn component_mut(&mut self, i: usize) -> &mut f64 {
        match self {
            Activation::Complex(v) => {
                let n = v.re.len();
                if i < n {
                    &mut v.re[i]
                } else {
                    &mut v.im[i - n]
                }
            }
            Activation::Real(v) => &mut v[i],
        }
    }

    pub fn zeros_like(&self) -> Activation {
        match self {
            Activation::Complex(v) => Activation::Complex(ComplexVector::zeros(v.len())),
            Activation::Real(v) => Activation::Real(vec![0.0; v.len()]),
        }
    }

    pub fn as_complex(&self, context: &str) -> Result<&ComplexVector> {
        match self {
            Activation::Complex(v) => Ok(v),
            Activation::Real(_) => Err(Error::InvalidArgument(format!(
                "{context} expects a complex activation, got a real one"
            ))),
        }
    }

    pub fn as_real(&self, context: &str) -> Result<&[f64]> {
        match self {
            Activation::Real(v) => Ok(v),
            Activation::Complex(_) => Err(Error::InvalidArgument(format!(
                "{context} expects a real activation, got a complex one"
            ))),
        }
    }

    pub fn into_complex(self, context: &str) -> Result<ComplexVector> {
        match self {
            Activation::Complex(v) => Ok(v),
            Activation::Real(_) => Err(Error::InvalidArgument(format!(
                "{context} expects a complex activation, got a real one"
            ))),
        }
    }

    pub fn into_real(self, context: &str) -> Result<Vec<f64>> {
        match self {
            Activation::Real(v) => Ok(v),
            Activation::Complex(_) => Err(Error::InvalidArgument(format!(
                "{context} expects a real activation, got a complex one"
            ))),
        }
    }
}

/// Forward state retained for the backward pass of one layer.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Linear { input: ComplexVector },
    Sinusoid { input: ComplexVector },
    ModSoftplus { input: ComplexVector },
    ModSquared { input: ComplexVector },
    LogSoftmax { output: Vec<f64> },
    Conv { stages: Vec<ComplexVector> },
    Pool(PoolCache),
}

impl LayerCache {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerCache::Linear { .. } => LayerKind::ComplexLinear,
            LayerCache::Sinusoid { .. } => LayerKind::Sinusoid,
            LayerCache::ModSoftplus { .. } => LayerKind::ModSoftplus,
            LayerCache::ModSquared { .. } => LayerKind::ModSquared,
            LayerCache::LogSoftmax { .. } => LayerKind::LogSoftmax,
            LayerCache::Conv { .. } => LayerKind::QuantumConv,
            LayerCache::Pool(_) => LayerKind::SplitMaxPool,
        }
    }
}

/// Cache of one layer evaluation, tagged with the layer position it came from.
#[derive(Debug, Clone)]
pub struct TapeNode {
    pub layer: usize,
    pub cache: LayerCache,
}

/// A layer specification together with its trainable weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Option<ComplexMatrix>,
}

impl Layer {
    pub fn new(spec: LayerSpec, weights: Option<ComplexMatrix>) -> Result<Self> {
        spec.validate()?;
        match (spec.weight_shape(), &weights) {
            (None, None) => {}
            (Some((r, c)), Some(w)) => {
                if (w.rows, w.cols) != (r, c) {
                    return Err(Error::shape(
                        format!("{} weights", spec.kind()),
                        r * c,
                        w.rows * w.cols,
                    ));
                }
            }
            (Some(_), None) => {
                return Err(Error::InvalidArgument(format!(
                    "{} layer requires weights",
                    spec.kind()
                )))
            }
            (None, Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "{} layer has no trainable weights",
                    spec.kind()
                )))
            }
        }
        Ok(Self { spec, weights })
    }

    /// Parameter-free layer.
    pub fn stateless(spec: LayerSpec) -> Result<Self> {
        Self::new(spec, None)
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_ref().map_or(0, |w| 2 * w.len())
    }

    fn weights(&self) -> Result<&ComplexMatrix> {
        self.weights
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} layer has no weights", self.spec.kind())))
    }

    pub fn forward(&self, x: &Activation) -> Result<(Activation, LayerCache)> {
        let ctx = self.spec.kind().name();
        if x.len() != self.spec.in_dim() {
            return Err(Error::shape(ctx, self.spec.in_dim(), x.len()));
        }
        match self.spec {
            LayerSpec::ComplexLinear { .. } => {
                let x = x.as_complex(ctx)?;
                let y = linear::forward(x, self.weights()?)?;
                Ok((Activation::Complex(y), LayerCache::Linear { input: x.clone() }))
            }
            LayerSpec::Sinusoid { lambda, .. } => {
                let x = x.as_complex(ctx)?;
                let y = nonlinear::sinusoid_forward(x, lambda);
                Ok((Activation::Complex(y), LayerCache::Sinusoid { input: x.clone() }))
            }
            LayerSpec::ModSoftplus { .. } => {
                let x = x.as_complex(ctx)?;
                let y = nonlinear::mod_softplus_forward(x);
                Ok((Activation::Complex(y), LayerCache::ModSoftplus { input: x.clone() }))
            }
            LayerSpec::ModSquared { .. } => {
                let x = x.as_complex(ctx)?;
                let y = nonlinear::mod_squared_forward(x);
                Ok((Activation::Real(y), LayerCache::ModSquared { input: x.clone() }))
            }
            LayerSpec::LogSoftmax { .. } => {
                let y = nonlinear::log_softmax(x.as_real(ctx)?);
                Ok((Activation::Real(y.clone()), LayerCache::LogSoftmax { output: y }))
            }
            LayerSpec::QuantumConv { dim, kernel, step } => {
                let x = x.as_complex(ctx)?;
                let plan = ConvPlan::new(self.weights()?.clone(), dim, kernel, step)?;
                let stages = plan.forward_stages(x)?;
                let y = stages.last().expect("at least one stage").clone();
                let mut stages = stages;
                stages.pop();
                Ok((Activation::Complex(y), LayerCache::Conv { stages }))
            }
            LayerSpec::SplitMaxPool { window, stride, .. } => {
                let x = x.as_complex(ctx)?;
                let (y, cache) = pool::forward(x, window, stride)?;
                Ok((Activation::Complex(y), LayerCache::Pool(cache)))
            }
        }
    }

    /// Returns the gradient with respect to the layer input and, for trainable
    /// layers, the weight gradient in the same complex layout as the weights.
    pub fn backward(
        &self,
        cache: &LayerCache,
        grad_out: &Activation,
    ) -> Result<(Activation, Option<ComplexMatrix>)> {
        let mut grad_w = self
            .spec
            .weight_shape()
            .map(|(r, c)| ComplexMatrix::zeros(r, c));
        let gx = self
            .backward_into(cache, grad_out, grad_w.as_mut(), true)?
            .expect("input gradient requested");
        Ok((gx, grad_w))
    }

    /// Adds this layer's weight gradient into `grad_w` (when the layer is
    /// trainable and a buffer is supplied) and returns the input gradient if
    /// `need_input` is set.
    pub fn backward_into(
        &self,
        cache: &LayerCache,
        grad_out: &Activation,
        grad_w: Option<&mut ComplexMatrix>,
        need_input: bool,
    ) -> Result<Option<Activation>> {
        let kind = self.spec.kind();
        if cache.kind() != kind {
            return Err(Error::StaleTape(format!(
                "cache from a {} layer passed to a {} layer",
                cache.kind(),
                kind
            )));
        }
        if grad_out.len() != self.spec.out_dim() {
            return Err(Error::shape(
                format!("{kind} output gradient"),
                self.spec.out_dim(),
                grad_out.len(),
            ));
        }
        let ctx = kind.name();
        let complex = |v: ComplexVector| Some(Activation::Complex(v));
        match (&self.spec, cache) {
            (LayerSpec::ComplexLinear { .. }, LayerCache::Linear { input }) => {
                let w = self.weights()?;
                let g = grad_out.as_complex(ctx)?;
                if input.len() != w.rows {
                    return Err(Error::StaleTape(format!(
                        "cached input of length {} for a {}-row weight matrix",
                        input.len(),
                        w.rows
                    )));
                }
                if let Some(acc) = grad_w {
                    linear::accumulate_outer(acc, input, g);
                }
                Ok(if need_input { complex(w.apply_adjoint(g)?) } else { None })
            }
            (LayerSpec::Sinusoid { lambda, .. }, LayerCache::Sinusoid { input }) => Ok(complex(
                nonlinear::sinusoid_backward(input, grad_out.as_complex(ctx)?, *lambda),
            )),
            (LayerSpec::ModSoftplus { .. }, LayerCache::ModSoftplus { input }) => Ok(complex(
                nonlinear::mod_softplus_backward(input, grad_out.as_complex(ctx)?),
            )),
            (LayerSpec::ModSquared { .. }, LayerCache::ModSquared { input }) => Ok(complex(
                nonlinear::mod_squared_backward(input, grad_out.as_real(ctx)?),
            )),
            (LayerSpec::LogSoftmax { .. }, LayerCache::LogSoftmax { output }) => Ok(Some(
                Activation::Real(nonlinear::log_softmax_backward(output, grad_out.as_real(ctx)?)),
            )),
            (LayerSpec::QuantumConv { dim, kernel, step }, LayerCache::Conv { stages }) => {
                let plan = ConvPlan::new(self.weights()?.clone(), *dim, *kernel, *step)?;
                let (gx, gk) = plan.backward(stages, grad_out.as_complex(ctx)?)?;
                if let Some(acc) = grad_w {
                    for (a, b) in acc.re.iter_mut().zip(&gk.re) {
                        *a += b;
                    }
                    for (a, b) in acc.im.iter_mut().zip(&gk.im) {
                        *a += b;
                    }
                }
                Ok(complex(gx))
            }
            (LayerSpec::SplitMaxPool { .. }, LayerCache::Pool(pc)) => {
                Ok(complex(pool::backward(pc, grad_out.as_complex(ctx)?)?))
            }
            _ => unreachable!("cache kind checked above"),
        }
    }
}

/// Runs a stack of layers, returning the output and one tape node per layer.
/// An empty stack is the identity.
pub fn forward_stack(layers: &[Layer], x: Activation) -> Result<(Activation, Vec<TapeNode>)> {
    let mut nodes = Vec::with_capacity(layers.len());
    let mut cur = x;
    for (i, layer) in layers.iter().enumerate() {
        let (y, cache) = layer.forward(&cur).map_err(|e| at_layer(i, e))?;
        nodes.push(TapeNode { layer: i, cache });
        cur = y;
    }
    Ok((cur, nodes))
}

pub(crate) fn at_layer(i: usize, e: Error) -> Error {
    match e {
        Error::Shape {
            context,
            expected,
            actual,
        } => Error::Shape {
            context: format!("layer {i} ({context})"),
            expected,
            actual,
        },
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("layer {i}: {m}")),
        other => other,
    }
}
