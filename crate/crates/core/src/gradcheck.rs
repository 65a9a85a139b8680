//! Central finite-difference checks of the analytic gradients.
//!
//! Every real parameter component and every real component of every layer
//! input is perturbed by `±eps` and the single-sample loss re-evaluated.
//! Components whose perturbation moves a max-pool winner, or brings a
//! mod_softplus input within [`NON_SMOOTH_MARGIN`] of zero, are counted as
//! skipped rather than compared.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{FoldedInput, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::layers::{forward_stack, Activation, LayerCache, LayerKind, TapeNode};
use crate::linalg::ComplexVector;
use crate::model::{ArchConfig, Architecture, ModelGraph};
use crate::train::{backward_with_hook, forward_loss, nll_loss};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;
/// Largest model the harness accepts.
pub const MAX_PARAMS: usize = 5_000;
/// Distance to a max-pool tie or to the mod_softplus zero branch below which
/// a component is skipped.
pub const NON_SMOOTH_MARGIN: f64 = 1e-6;
/// Denominator floor of the relative error. Gradients smaller than this are
/// compared in absolute terms.
pub const ERROR_FLOOR: f64 = 1e-4;

/// Deliberate corruption of the backward pass, used to confirm the harness
/// catches wrong gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate the input gradient produced by every layer of this kind.
    NegateInputGradient(LayerKind),
}

impl FromStr for Fault {
    type Err = Error;

    /// Accepts `negate-<layer kind>`, for example `negate-sinusoid`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = s
            .strip_prefix("negate-")
            .and_then(|name| LayerKind::ALL.into_iter().find(|k| k.name() == name));
        kind.map(Fault::NegateInputGradient)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fault '{s}'")))
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::NegateInputGradient(kind) => write!(f, "negate-{kind}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    pub eps: f64,
    pub tol: f64,
    pub fault: Option<Fault>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            tol: DEFAULT_TOL,
            fault: None,
        }
    }
}

/// Worst relative errors found for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: usize,
    pub kind: LayerKind,
    /// `None` for layers without weights.
    pub param_error: Option<f64>,
    pub input_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl LayerCheck {
    pub fn max_error(&self) -> f64 {
        self.param_error.unwrap_or(0.0).max(self.input_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub layers: Vec<LayerCheck>,
    pub tol: f64,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.layers.iter().map(LayerCheck::max_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&LayerCheck> {
        self.layers.iter().filter(|l| l.max_error() > self.tol).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn skipped(&self) -> usize {
        self.layers.iter().map(|l| l.skipped).sum()
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.layers {
            let status = if l.max_error() <= self.tol { "ok" } else { "FAIL" };
            write!(f, "layer {:>2} {:<15} input {:.3e}", l.layer, l.kind.name(), l.input_error)?;
            if let Some(p) = l.param_error {
                write!(f, " params {p:.3e}")?;
            }
            writeln!(f, " checked {} skipped {} {status}", l.checked, l.skipped)?;
        }
        Ok(())
    }
}

/// `|a - n| / max(|a|, |n|, ERROR_FLOOR)`, infinite when either side is NaN.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let e = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR);
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

/// Non-differentiable state of a forward pass: pool winners, and whether any
/// mod_softplus input sits near its zero branch.
#[derive(PartialEq)]
struct Branches {
    pools: Vec<(Vec<usize>, Vec<usize>)>,
    near_zero: bool,
}

fn branches(nodes: &[TapeNode]) -> Branches {
    let mut out = Branches {
        pools: Vec::new(),
        near_zero: false,
    };
    for node in nodes {
        match &node.cache {
            LayerCache::Pool(pc) => out.pools.push((pc.argmax_re.clone(), pc.argmax_im.clone())),
            LayerCache::ModSoftplus { input } => {
                let near = (0..input.len()).any(|i| input.get(i).norm() < NON_SMOOTH_MARGIN);
                out.near_zero |= near;
            }
            _ => {}
        }
    }
    out
}

fn tail_loss(model: &ModelGraph, from: usize, x: Activation, label: usize) -> Result<(f64, Branches)> {
    let (out, nodes) = forward_stack(&model.layers[from..], x)?;
    Ok((nll_loss(&out.into_real("model output")?, label)?, branches(&nodes)))
}

/// Central difference of `f` at `eps`, or `None` if either side leaves the
/// branch recorded at the base point.
fn central(
    eps: f64,
    base: &Branches,
    mut f: impl FnMut(f64) -> Result<(f64, Branches)>,
) -> Result<Option<f64>> {
    let (plus, bp) = f(eps)?;
    let (minus, bm) = f(-eps)?;
    if base.near_zero || bp.near_zero || bm.near_zero || bp.pools != base.pools || bm.pools != base.pools {
        return Ok(None);
    }
    Ok(Some((plus - minus) / (2.0 * eps)))
}

#[derive(Default)]
struct Tally {
    worst: f64,
    checked: usize,
    skipped: usize,
}

impl Tally {
    fn add(&mut self, analytic: f64, numeric: Option<f64>) {
        match numeric {
            Some(n) => {
                let e = relative_error(analytic, n);
                // NaN must surface as a failure
                self.worst = self.worst.max(e);
                self.checked += 1;
            }
            None => self.skipped += 1,
        }
    }
}

/// Compares analytic parameter and layer-input gradients of the loss on
/// `sample` against central differences.
pub fn grad_check(model: &ModelGraph, sample: &FoldedInput, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    if model.param_count() > MAX_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "gradient check limited to {MAX_PARAMS} parameters, model has {}",
            model.param_count()
        )));
    }
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {}", opts.eps)));
    }
    let label = sample.label as usize;
    let n_layers = model.layers.len();

    let (_, tape) = forward_loss(model, &[sample])?;
    let mut input_grads: Vec<Option<Activation>> = vec![None; n_layers];
    let grads = backward_with_hook(model, tape, |i, spec, g| {
        if opts.fault == Some(Fault::NegateInputGradient(spec.kind())) {
            for c in 0..g.real_len() {
                *g.component_mut(c) = -g.component(c);
            }
        }
        input_grads[i] = Some(g.clone());
    })?;

    // inputs[i] is the input to layer i
    let mut inputs = Vec::with_capacity(n_layers);
    let mut cur = Activation::Complex(sample.vec.clone());
    for layer in &model.layers {
        inputs.push(cur.clone());
        cur = layer.forward(&cur)?.0;
    }
    let (_, base_nodes) = forward_stack(&model.layers, inputs[0].clone())?;

    let full_base = branches(&base_nodes);

    let mut report = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let mut input_tally = Tally::default();
        let tail_base = branches(&base_nodes[i..]);
        let analytic_in = input_grads[i]
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("no input gradient reached layer {i}")))?;
        for c in 0..inputs[i].real_len() {
            let numeric = central(opts.eps, &tail_base, |d| {
                let mut x = inputs[i].clone();
                *x.component_mut(c) += d;
                tail_loss(model, i, x, label)
            })?;
            input_tally.add(analytic_in.component(c), numeric);
        }

        let mut param_tally = None;
        if let (Some(w), Some(g)) = (&model.layers[i].weights, &grads.layers[i]) {
            let mut tally = Tally::default();
            for c in 0..2 * w.len() {
                let numeric = central(opts.eps, &full_base, |d| {
                    let mut m = model.clone();
                    let w = m.layers[i].weights.as_mut().expect("weighted layer");
                    if c < w.len() {
                        w.re[c] += d;
                    } else {
                        let k = c - w.len();
                        w.im[k] += d;
                    }
                    let (out, nodes) = m.forward_tape(&sample.vec)?;
                    Ok((nll_loss(&out.into_real("model output")?, label)?, branches(&nodes)))
                })?;
                let analytic = if c < g.len() { g.re[c] } else { g.im[c - g.len()] };
                tally.add(analytic, numeric);
            }
            param_tally = Some(tally);
        }

        let (param_error, pc, ps) = match param_tally {
            Some(t) => (Some(t.worst), t.checked, t.skipped),
            None => (None, 0, 0),
        };
        report.push(LayerCheck {
            layer: i,
            kind: model.layers[i].spec.kind(),
            param_error,
            input_error: input_tally.worst,
            checked: input_tally.checked + pc,
            skipped: input_tally.skipped + ps,
        });
    }
    Ok(GradcheckReport {
        layers: report,
        tol: opts.tol,
    })
}

/// A tiny instance of each built-in architecture together with a fixed
/// sample, sized so a full check takes well under a second.
pub fn tiny_models(seed: u64) -> Result<Vec<(ModelGraph, FoldedInput)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input_dim = 12;
    let mut out = Vec::new();
    for arch in [Architecture::Onn, Architecture::Qonn, Architecture::Qocnn] {
        let cfg = ArchConfig {
            input_dim,
            hidden: 6,
            conv_k: 3,
            conv_s: 2,
            ..ArchConfig::defaults(arch)
        };
        let model = ModelGraph::build(arch, &cfg, seed)?;
        let re: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let im: Vec<f64> = (0..input_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sample = FoldedInput {
            vec: ComplexVector::new(re, im)?,
            label: rng.gen_range(0..NUM_CLASSES) as u8,
        };
        out.push((model, sample));
    }
    Ok(out)
}

/// Checks every model from [`tiny_models`].
pub fn check_tiny_models(seed: u64, opts: &GradcheckOptions) -> Result<Vec<(Architecture, GradcheckReport)>> {
    tiny_models(seed)?
        .into_iter()
        .map(|(m, s)| Ok((m.arch, grad_check(&m, &s, opts)?)))
        .collect()
}
