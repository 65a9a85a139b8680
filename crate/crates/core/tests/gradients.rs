mod common;

use common::{random_matrix, random_vector, real_vector, rng};
use proptest::prelude::*;
use qocnn::data::FoldedInput;
use qocnn::gradcheck::{check_tiny_models, grad_check, relative_error, GradcheckOptions};
use qocnn::layers::{forward_stack, Activation, Layer, LayerKind, LayerSpec};
use qocnn::linalg::{ComplexMatrix, ComplexVector};
use qocnn::model::{ArchConfig, Architecture, ModelGraph};
use qocnn::train::{backward, forward_loss};
use rand::Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// `L = <g, f(x)>` over real components.
fn probe(layers: &[Layer], x: &Activation, g: &Activation) -> f64 {
    let (y, _) = forward_stack(layers, x.clone()).unwrap();
    (0..y.real_len()).map(|i| y.component(i) * g.component(i)).sum()
}

/// Worst relative error of the input and weight gradients of a layer stack
/// under the probe loss.
fn stack_error(layers: &[Layer], x: &Activation, g: &Activation) -> f64 {
    let (_, nodes) = forward_stack(layers, x.clone()).unwrap();
    let mut grad = g.clone();
    let mut weight_grads = vec![None; layers.len()];
    for (i, node) in nodes.iter().enumerate().rev() {
        let (gx, gw) = layers[i].backward(&node.cache, &grad).unwrap();
        weight_grads[i] = gw;
        grad = gx;
    }
    let mut worst: f64 = 0.0;
    for c in 0..x.real_len() {
        let f = |d: f64| {
            let mut xp = x.clone();
            *xp.component_mut(c) += d;
            probe(layers, &xp, g)
        };
        let numeric = (f(EPS) - f(-EPS)) / (2.0 * EPS);
        worst = worst.max(relative_error(grad.component(c), numeric));
    }
    for (i, gw) in weight_grads.iter().enumerate() {
        let Some(gw) = gw else { continue };
        let n = gw.len();
        for c in 0..2 * n {
            let f = |d: f64| {
                let mut ls = layers.to_vec();
                let w = ls[i].weights.as_mut().unwrap();
                if c < n {
                    w.re[c] += d;
                } else {
                    w.im[c - n] += d;
                }
                probe(&ls, x, g)
            };
            let numeric = (f(EPS) - f(-EPS)) / (2.0 * EPS);
            let analytic = if c < n { gw.re[c] } else { gw.im[c - n] };
            worst = worst.max(relative_error(analytic, numeric));
        }
    }
    worst
}

fn layer(spec: LayerSpec, r: &mut impl Rng) -> Layer {
    let weights = spec.weight_shape().map(|(a, b)| random_matrix(r, a, b));
    Layer::new(spec, weights).unwrap()
}

fn complex_input(r: &mut impl Rng, n: usize) -> Activation {
    Activation::Complex(random_vector(r, n))
}

fn upstream(spec: &LayerSpec, r: &mut impl Rng) -> Activation {
    if spec.complex_output() {
        Activation::Complex(random_vector(r, spec.out_dim()))
    } else {
        Activation::Real(real_vector(r, spec.out_dim()))
    }
}

/// A tiny instance of every layer kind.
fn tiny_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::ComplexLinear { in_dim: 3, out_dim: 2 },
        LayerSpec::Sinusoid { dim: 5, lambda: 0.2 },
        LayerSpec::Sinusoid { dim: 4, lambda: 1.7 },
        LayerSpec::ModSoftplus { dim: 5 },
        LayerSpec::ModSquared { dim: 4 },
        LayerSpec::LogSoftmax { dim: 10 },
        LayerSpec::QuantumConv { dim: 10, kernel: 3, step: 2 },
        LayerSpec::QuantumConv { dim: 8, kernel: 2, step: 2 },
        LayerSpec::SplitMaxPool { dim: 9, window: 3, stride: 2 },
    ]
}

#[test]
fn every_layer_kind_is_covered() {
    for kind in LayerKind::ALL {
        assert!(tiny_specs().iter().any(|s| s.kind() == kind), "{kind} missing");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_layers_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        for spec in tiny_specs() {
            let l = layer(spec.clone(), &mut r);
            let x = if spec.complex_input() {
                complex_input(&mut r, spec.in_dim())
            } else {
                Activation::Real(real_vector(&mut r, spec.in_dim()))
            };
            // pool ties and the mod_softplus origin are measure-zero under
            // continuous random draws, far beyond eps
            let g = upstream(&spec, &mut r);
            let err = stack_error(&[l], &x, &g);
            prop_assert!(err <= TOL, "{} error {err}", spec.kind());
        }
    }

    #[test]
    fn chained_layers_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let layers = vec![
            layer(LayerSpec::ComplexLinear { in_dim: 4, out_dim: 3 }, &mut r),
            layer(LayerSpec::Sinusoid { dim: 3, lambda: 0.9 }, &mut r),
        ];
        let x = complex_input(&mut r, 4);
        let g = Activation::Complex(random_vector(&mut r, 3));
        prop_assert!(stack_error(&layers, &x, &g) <= TOL);
    }

    #[test]
    fn tiny_models_match_finite_differences(seed in any::<u64>()) {
        for (arch, report) in check_tiny_models(seed, &GradcheckOptions::default()).unwrap() {
            prop_assert!(report.passed(), "{arch}:\n{report}");
        }
    }
}

#[test]
fn tiny_models_cover_every_layer_kind() {
    let reports = check_tiny_models(3, &GradcheckOptions::default()).unwrap();
    for kind in LayerKind::ALL {
        assert!(
            reports.iter().any(|(_, r)| r.layers.iter().any(|l| l.kind == kind)),
            "{kind} not exercised"
        );
    }
}

#[test]
fn linear_layer_three_by_two() {
    let mut r = rng(32);
    let l = layer(LayerSpec::ComplexLinear { in_dim: 3, out_dim: 2 }, &mut r);
    let x = complex_input(&mut r, 3);
    let g = Activation::Complex(random_vector(&mut r, 2));
    assert!(stack_error(&[l], &x, &g) <= TOL);
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut r = rng(1);
    let l = layer(LayerSpec::ComplexLinear { in_dim: 3, out_dim: 2 }, &mut r);
    let x = complex_input(&mut r, 3);
    let (_, cache) = l.forward(&x).unwrap();
    let (gx, gw) = l.backward(&cache, &Activation::Complex(ComplexVector::zeros(2))).unwrap();
    assert_eq!(gx, Activation::Complex(ComplexVector::zeros(3)));
    assert_eq!(gw.unwrap(), ComplexMatrix::zeros(3, 2));
}

#[test]
fn scalar_linear_is_the_product_rule() {
    let w = ComplexMatrix::from_parts(1, 1, vec![3.0], vec![0.0]).unwrap();
    let l = Layer::new(LayerSpec::ComplexLinear { in_dim: 1, out_dim: 1 }, Some(w)).unwrap();
    let x = Activation::Complex(ComplexVector::new(vec![2.0], vec![0.0]).unwrap());
    let (_, cache) = l.forward(&x).unwrap();
    let g = Activation::Complex(ComplexVector::new(vec![5.0], vec![0.0]).unwrap());
    let (gx, gw) = l.backward(&cache, &g).unwrap();
    assert_eq!(gx.component(0), 15.0);
    assert_eq!(gw.unwrap().re[0], 10.0);
}

#[test]
fn sinusoid_derivative_vanishes_at_zero() {
    let l = Layer::stateless(LayerSpec::Sinusoid { dim: 2, lambda: 0.2 }).unwrap();
    let x = Activation::Complex(ComplexVector::zeros(2));
    let (y, cache) = l.forward(&x).unwrap();
    assert_eq!(y, x);
    let g = Activation::Complex(ComplexVector::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap());
    let (gx, _) = l.backward(&cache, &g).unwrap();
    assert_eq!(gx, Activation::Complex(ComplexVector::zeros(2)));
}

#[test]
fn pool_routes_each_gradient_to_one_slot() {
    let l = Layer::stateless(LayerSpec::SplitMaxPool { dim: 4, window: 2, stride: 2 }).unwrap();
    let x = Activation::Complex(ComplexVector::new(vec![1.0, 3.0, 2.0, 5.0], vec![4.0, 4.0, -1.0, -2.0]).unwrap());
    let (y, cache) = l.forward(&x).unwrap();
    assert_eq!(y.as_complex("").unwrap().re, vec![3.0, 5.0]);
    let g = Activation::Complex(ComplexVector::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap());
    let (gx, _) = l.backward(&cache, &g).unwrap();
    let gx = gx.into_complex("").unwrap();
    assert_eq!(gx.re, vec![0.0, 1.0, 0.0, 2.0]);
    // tie in the first imaginary window goes to the lower index
    assert_eq!(gx.im, vec![3.0, 0.0, 4.0, 0.0]);
}

fn sample(r: &mut impl Rng, n: usize, label: u8) -> FoldedInput {
    let re = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    let im = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    FoldedInput {
        vec: ComplexVector::new(re, im).unwrap(),
        label,
    }
}

#[test]
fn linear_only_model_is_near_exact() {
    let specs = vec![
        LayerSpec::ComplexLinear { in_dim: 6, out_dim: 10 },
        LayerSpec::ModSquared { dim: 10 },
        LayerSpec::LogSoftmax { dim: 10 },
    ];
    let model = ModelGraph::from_specs(Architecture::Custom, specs, 4).unwrap();
    let s = sample(&mut rng(4), 6, 3);
    let report = grad_check(&model, &s, &GradcheckOptions::default()).unwrap();
    assert!(report.max_error() < 1e-6, "{report}");
}

#[test]
fn tiny_qocnn_from_layer_specs() {
    let cfg = ArchConfig {
        input_dim: 8,
        hidden: 4,
        conv_k: 2,
        conv_s: 2,
        ..ArchConfig::defaults(Architecture::Qocnn)
    };
    let model = ModelGraph::build(Architecture::Qocnn, &cfg, 9).unwrap();
    assert!(model.param_count() <= 200);
    let s = sample(&mut rng(9), 8, 7);
    let report = grad_check(&model, &s, &GradcheckOptions::default()).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn models_near_the_size_limit() {
    for arch in [Architecture::Onn, Architecture::Qonn, Architecture::Qocnn] {
        let cfg = ArchConfig {
            input_dim: 48,
            hidden: 40,
            ..ArchConfig::defaults(arch)
        };
        let model = ModelGraph::build(arch, &cfg, 21).unwrap();
        assert!(model.param_count() > 2_000 && model.param_count() <= 5_000, "{}", model.param_count());
        let s = sample(&mut rng(21), 48, 5);
        let report = grad_check(&model, &s, &GradcheckOptions::default()).unwrap();
        assert!(report.passed(), "{arch}:\n{report}");
    }
}

#[test]
fn oversized_model_rejected() {
    let model = ModelGraph::build(Architecture::Qonn, &ArchConfig::defaults(Architecture::Qonn), 0).unwrap();
    let s = sample(&mut rng(0), 392, 0);
    assert!(grad_check(&model, &s, &GradcheckOptions::default()).is_err());
}

#[test]
fn pool_tie_is_skipped_not_failed() {
    let specs = vec![
        LayerSpec::SplitMaxPool { dim: 4, window: 2, stride: 2 },
        LayerSpec::ComplexLinear { in_dim: 2, out_dim: 10 },
        LayerSpec::ModSquared { dim: 10 },
        LayerSpec::LogSoftmax { dim: 10 },
    ];
    let model = ModelGraph::from_specs(Architecture::Custom, specs, 2).unwrap();
    let s = FoldedInput {
        vec: ComplexVector::new(vec![0.5, 0.5, 0.1, 0.9], vec![0.3, 0.7, 0.2, 0.2]).unwrap(),
        label: 1,
    };
    let report = grad_check(&model, &s, &GradcheckOptions::default()).unwrap();
    assert!(report.passed(), "{report}");
    assert!(report.skipped() >= 2, "{report}");
}

#[test]
fn mod_softplus_origin_is_skipped() {
    let w = ComplexMatrix::zeros(3, 2);
    let layers = vec![
        Layer::new(LayerSpec::ComplexLinear { in_dim: 3, out_dim: 2 }, Some(w)).unwrap(),
        Layer::stateless(LayerSpec::ModSoftplus { dim: 2 }).unwrap(),
        Layer::new(
            LayerSpec::ComplexLinear { in_dim: 2, out_dim: 10 },
            Some(random_matrix(&mut rng(5), 2, 10)),
        )
        .unwrap(),
        Layer::stateless(LayerSpec::ModSquared { dim: 10 }).unwrap(),
        Layer::stateless(LayerSpec::LogSoftmax { dim: 10 }).unwrap(),
    ];
    let model = ModelGraph::from_layers(Architecture::Custom, 0, layers).unwrap();
    let s = sample(&mut rng(5), 3, 2);
    let report = grad_check(&model, &s, &GradcheckOptions::default()).unwrap();
    assert!(report.passed(), "{report}");
    assert!(report.skipped() > 0);
}

#[test]
fn zero_final_weights_give_uniform_predictions() {
    let mut r = rng(6);
    let layers = vec![
        layer(LayerSpec::ComplexLinear { in_dim: 4, out_dim: 3 }, &mut r),
        Layer::stateless(LayerSpec::Sinusoid { dim: 3, lambda: 0.2 }).unwrap(),
        Layer::new(LayerSpec::ComplexLinear { in_dim: 3, out_dim: 10 }, Some(ComplexMatrix::zeros(3, 10))).unwrap(),
        Layer::stateless(LayerSpec::ModSquared { dim: 10 }).unwrap(),
        Layer::stateless(LayerSpec::LogSoftmax { dim: 10 }).unwrap(),
    ];
    let model = ModelGraph::from_layers(Architecture::Custom, 0, layers).unwrap();
    let s = FoldedInput {
        vec: ComplexVector::new(vec![0.5; 4], vec![0.5; 4]).unwrap(),
        label: 4,
    };
    let lp = model.log_probs(&s.vec).unwrap();
    assert!(lp.iter().all(|v| (v - 0.1f64.ln()).abs() < 1e-15));
    // |y|^2 has zero derivative at y = 0, so every gradient vanishes
    let (_, tape) = forward_loss(&model, &[&s]).unwrap();
    let grads = backward(&model, tape).unwrap();
    assert_eq!(grads.max_abs(), 0.0);
    let report = grad_check(&model, &s, &GradcheckOptions::default()).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn dead_path_parameters_get_zero_gradient() {
    let mut r = rng(12);
    let layers = vec![
        layer(LayerSpec::ComplexLinear { in_dim: 4, out_dim: 3 }, &mut r),
        Layer::stateless(LayerSpec::Sinusoid { dim: 3, lambda: 0.2 }).unwrap(),
        Layer::new(LayerSpec::ComplexLinear { in_dim: 3, out_dim: 10 }, Some(ComplexMatrix::zeros(3, 10))).unwrap(),
        Layer::stateless(LayerSpec::ModSquared { dim: 10 }).unwrap(),
        Layer::stateless(LayerSpec::LogSoftmax { dim: 10 }).unwrap(),
    ];
    let model = ModelGraph::from_layers(Architecture::Custom, 0, layers).unwrap();
    let s = sample(&mut r, 4, 0);
    let (_, tape) = forward_loss(&model, &[&s]).unwrap();
    let grads = backward(&model, tape).unwrap();
    assert_eq!(grads.layers[0].as_ref().unwrap().max_abs(), 0.0);
}

#[test]
fn dispatch_matches_direct_calls() {
    use qocnn::layers::{linear, nonlinear, pool};
    let mut r = rng(13);
    let x = random_vector(&mut r, 6);
    let m = random_matrix(&mut r, 6, 4);
    let l = Layer::new(LayerSpec::ComplexLinear { in_dim: 6, out_dim: 4 }, Some(m.clone())).unwrap();
    let ax = Activation::Complex(x.clone());
    assert_eq!(l.forward(&ax).unwrap().0, Activation::Complex(linear::forward(&x, &m).unwrap()));
    let l = Layer::stateless(LayerSpec::Sinusoid { dim: 6, lambda: 0.4 }).unwrap();
    assert_eq!(l.forward(&ax).unwrap().0, Activation::Complex(nonlinear::sinusoid_forward(&x, 0.4)));
    let l = Layer::stateless(LayerSpec::ModSoftplus { dim: 6 }).unwrap();
    assert_eq!(l.forward(&ax).unwrap().0, Activation::Complex(nonlinear::mod_softplus_forward(&x)));
    let l = Layer::stateless(LayerSpec::ModSquared { dim: 6 }).unwrap();
    assert_eq!(l.forward(&ax).unwrap().0, Activation::Real(nonlinear::mod_squared_forward(&x)));
    let l = Layer::stateless(LayerSpec::SplitMaxPool { dim: 6, window: 2, stride: 2 }).unwrap();
    assert_eq!(l.forward(&ax).unwrap().0, Activation::Complex(pool::forward(&x, 2, 2).unwrap().0));
    let v = real_vector(&mut r, 10);
    let l = Layer::stateless(LayerSpec::LogSoftmax { dim: 10 }).unwrap();
    assert_eq!(l.forward(&Activation::Real(v.clone())).unwrap().0, Activation::Real(nonlinear::log_softmax(&v)));
}

#[test]
fn shape_errors_name_the_layer() {
    let model = ModelGraph::from_specs(
        Architecture::Custom,
        vec![
            LayerSpec::ComplexLinear { in_dim: 4, out_dim: 10 },
            LayerSpec::ModSquared { dim: 10 },
            LayerSpec::LogSoftmax { dim: 10 },
        ],
        0,
    )
    .unwrap();
    let err = model.forward(&ComplexVector::zeros(5)).unwrap_err().to_string();
    assert!(err.contains("layer 0"), "{err}");
}
