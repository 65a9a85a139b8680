//! Model graphs for the three architectures and their parameter storage.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{FOLDED_LEN, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::layers::{forward_stack, Activation, Layer, LayerSpec, TapeNode};
use crate::linalg::{ComplexMatrix, ComplexVector};

/// Default scale of the sinusoidal nonlinearity.
pub const DEFAULT_LAMBDA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Complex linear layers with a modulus softplus (ComplexNet).
    Onn = 0,
    /// Complex linear layers with the sinusoidal nonlinearity.
    Qonn = 1,
    /// Convolution and split pooling feeding a QONN head.
    Qocnn = 2,
    /// Hand-assembled layer stacks (tests, gradient checks).
    Custom = 3,
}

impl Architecture {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Architecture::Onn),
            1 => Ok(Architecture::Qonn),
            2 => Ok(Architecture::Qocnn),
            3 => Ok(Architecture::Custom),
            _ => Err(Error::Format(format!("unknown architecture tag {tag}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Onn => "onn",
            Architecture::Qonn => "qonn",
            Architecture::Qocnn => "qocnn",
            Architecture::Custom => "custom",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "onn" | "complexnet" => Ok(Architecture::Onn),
            "qonn" => Ok(Architecture::Qonn),
            "qocnn" => Ok(Architecture::Qocnn),
            other => Err(Error::InvalidArgument(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Hyperparameters shaping the built-in architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub lambda: f64,
    pub conv_k: usize,
    pub conv_s: usize,
    pub pool_w: usize,
    pub pool_p: usize,
}

impl ArchConfig {
    pub fn defaults(arch: Architecture) -> Self {
        let hidden = match arch {
            Architecture::Qocnn => 64,
            _ => 128,
        };
        Self {
            input_dim: FOLDED_LEN,
            hidden,
            lambda: DEFAULT_LAMBDA,
            conv_k: 4,
            conv_s: 2,
            pool_w: 2,
            pool_p: 2,
        }
    }

    pub fn layer_specs(&self, arch: Architecture) -> Result<Vec<LayerSpec>> {
        let head = |input: usize, nonlinear: LayerSpec| {
            vec![
                LayerSpec::ComplexLinear {
                    in_dim: input,
                    out_dim: self.hidden,
                },
                nonlinear,
                LayerSpec::ComplexLinear {
                    in_dim: self.hidden,
                    out_dim: NUM_CLASSES,
                },
                LayerSpec::ModSquared { dim: NUM_CLASSES },
                LayerSpec::LogSoftmax { dim: NUM_CLASSES },
            ]
        };
        let sinusoid = LayerSpec::Sinusoid {
            dim: self.hidden,
            lambda: self.lambda,
        };
        Ok(match arch {
            Architecture::Onn => head(self.input_dim, LayerSpec::ModSoftplus { dim: self.hidden }),
            Architecture::Qonn => head(self.input_dim, sinusoid),
            Architecture::Qocnn => {
                let pool = LayerSpec::SplitMaxPool {
                    dim: self.input_dim,
                    window: self.pool_w,
                    stride: self.pool_p,
                };
                pool.validate()?;
                let mut specs = vec![
                    LayerSpec::QuantumConv {
                        dim: self.input_dim,
                        kernel: self.conv_k,
                        step: self.conv_s,
                    },
                    pool.clone(),
                ];
                specs.extend(head(pool.out_dim(), sinusoid));
                specs
            }
            Architecture::Custom => {
                return Err(Error::InvalidArgument(
                    "custom architectures are assembled from explicit layer specs".into(),
                ))
            }
        })
    }
}

/// Ordered layers with their parameters.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    pub arch: Architecture,
    pub seed: u64,
    pub layers: Vec<Layer>,
    version: u64,
}

impl ModelGraph {
    /// Builds one of the named architectures with freshly initialized weights.
    pub fn build(arch: Architecture, cfg: &ArchConfig, seed: u64) -> Result<Self> {
        Self::from_specs(arch, cfg.layer_specs(arch)?, seed)
    }

    /// Initializes weights for an explicit layer stack: linear entries uniform
    /// in `[-1/sqrt(N1), 1/sqrt(N1)]`, kernels uniform in `[-1/k, 1/k]`,
    /// real and imaginary parts drawn independently.
    pub fn from_specs(arch: Architecture, specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate()?;
            let weights = spec.weight_shape().map(|(rows, cols)| {
                let bound = match spec {
                    LayerSpec::QuantumConv { kernel, .. } => 1.0 / kernel as f64,
                    _ => 1.0 / (rows as f64).sqrt(),
                };
                let mut draw = || -> Vec<f64> {
                    (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect()
                };
                let re = draw();
                let im = draw();
                ComplexMatrix { rows, cols, re, im }
            });
            layers.push(Layer::new(spec, weights)?);
        }
        Self::from_layers(arch, seed, layers)
    }

    pub fn from_layers(arch: Architecture, seed: u64, layers: Vec<Layer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            let (a, b) = (&pair[0].spec, &pair[1].spec);
            if a.out_dim() != b.in_dim() {
                return Err(Error::shape(
                    format!("layer {} input (after {})", i + 1, a.kind()),
                    a.out_dim(),
                    b.in_dim(),
                ));
            }
            if a.complex_output() != b.complex_input() {
                return Err(Error::InvalidArgument(format!(
                    "layer {} ({}) cannot consume the output of {}",
                    i + 1,
                    b.kind(),
                    a.kind()
                )));
            }
        }
        Ok(Self {
            arch,
            seed,
            layers,
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.spec.in_dim())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.out_dim())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Incremented whenever parameters change; tapes record it to detect
    /// staleness.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Mutable access to every trainable weight matrix, in layer order.
    /// Bumps the model version.
    pub fn weights_mut(&mut self) -> impl Iterator<Item = (usize, &mut ComplexMatrix)> {
        self.version += 1;
        self.layers
            .iter_mut()
            .enumerate()
            .filter_map(|(i, l)| l.weights.as_mut().map(|w| (i, w)))
    }

    pub fn forward(&self, x: &ComplexVector) -> Result<Activation> {
        Ok(self.forward_tape(x)?.0)
    }

    pub fn forward_tape(&self, x: &ComplexVector) -> Result<(Activation, Vec<TapeNode>)> {
        forward_stack(&self.layers, Activation::Complex(x.clone()))
    }

    /// Log-probabilities for one input; requires a real-valued final layer.
    pub fn log_probs(&self, x: &ComplexVector) -> Result<Vec<f64>> {
        self.forward(x)?.into_real("model output")
    }

    pub fn predict(&self, x: &ComplexVector) -> Result<usize> {
        Ok(argmax(&self.log_probs(x)?))
    }
}

// The version counter is bookkeeping, not model content.
impl PartialEq for ModelGraph {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.seed == other.seed && self.layers == other.layers
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_topologies() {
        let onn = ModelGraph::build(Architecture::Onn, &ArchConfig::defaults(Architecture::Onn), 0).unwrap();
        assert_eq!(onn.layers.len(), 5);
        assert_eq!(onn.param_count(), 2 * (392 * 128 + 128 * 10));

        let cfg = ArchConfig::defaults(Architecture::Qocnn);
        let qocnn = ModelGraph::build(Architecture::Qocnn, &cfg, 0).unwrap();
        let dims: Vec<_> = qocnn.layers.iter().map(|l| l.spec.out_dim()).collect();
        assert_eq!(dims, vec![392, 196, 64, 64, 10, 10, 10]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = ArchConfig::defaults(Architecture::Qonn);
        let a = ModelGraph::build(Architecture::Qonn, &cfg, 7).unwrap();
        let b = ModelGraph::build(Architecture::Qonn, &cfg, 7).unwrap();
        let c = ModelGraph::build(Architecture::Qonn, &cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let w = a.layers[0].weights.as_ref().unwrap();
        let bound = 1.0 / 392f64.sqrt();
        assert!(w.re.iter().chain(&w.im).all(|v| v.abs() <= bound));
    }

    #[test]
    fn rejects_non_conforming_stack() {
        let specs = vec![
            LayerSpec::ComplexLinear { in_dim: 4, out_dim: 3 },
            LayerSpec::ModSquared { dim: 2 },
        ];
        assert!(ModelGraph::from_specs(Architecture::Custom, specs, 0).is_err());

        let specs = vec![LayerSpec::LogSoftmax { dim: 3 }, LayerSpec::ModSquared { dim: 3 }];
        assert!(ModelGraph::from_specs(Architecture::Custom, specs, 0).is_err());
    }

    #[test]
    fn outputs_are_log_probabilities() {
        let cfg = ArchConfig::defaults(Architecture::Qocnn);
        let m = ModelGraph::build(Architecture::Qocnn, &cfg, 1).unwrap();
        let x = ComplexVector::new(vec![0.5; 392], vec![0.25; 392]).unwrap();
        let lp = m.log_probs(&x).unwrap();
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arch_names_parse() {
        for a in [Architecture::Onn, Architecture::Qonn, Architecture::Qocnn] {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
            assert_eq!(Architecture::from_tag(a.tag()).unwrap(), a);
        }
        assert!("lenet".parse::<Architecture>().is_err());
    }
}
