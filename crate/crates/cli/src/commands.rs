use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qocnn::gradcheck::{check_tiny_models, Fault, GradcheckOptions};
use qocnn::io::write_atomic;
use qocnn::layers::LayerSpec;
use qocnn::resources::write_csv;
use qocnn::{
    amplification_normalize, estimate as estimate_resources, evaluate as evaluate_model, load_checkpoint,
    save_checkpoint, svd, train as train_model, ArchConfig, Architecture, ComplexMatrix, Dataset, ModelGraph,
    OptimizerKind, ResourceReport, Split, TrainConfig, WorkloadSpec, FOLDED_LEN,
};

use crate::config::Resolver;
use crate::error::CliError;
use crate::{EstimateArgs, EvaluateArgs, ExportArgs, GradcheckArgs, ModelArgs, TestDataArgs, TrainArgs};

const DEFAULT_OUT_DIR: &str = "out";

fn path_flag(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn required_path(r: &mut Resolver, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    r.required::<String>(key, path_flag(flag)).map(PathBuf::from)
}

fn out_dir(r: &mut Resolver, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(r.get("out-dir", path_flag(flag), DEFAULT_OUT_DIR.to_string())?);
    fs::create_dir_all(&dir).map_err(|e| CliError::missing(&dir, e))?;
    Ok(dir)
}

/// Echoes the effective parameters to stderr and, given a directory, saves
/// them as `<command>.log` in config syntax.
fn write_run_log(r: &Resolver, command: &str, dir: Option<&Path>) -> Result<(), CliError> {
    let mut text = r.render(command);
    let _ = writeln!(text, "# threads = {}", rayon::current_num_threads());
    eprint!("{text}");
    if let Some(dir) = dir {
        write_atomic(&dir.join(format!("{command}.log")), text.as_bytes())?;
    }
    Ok(())
}

fn arch_config(r: &mut Resolver, m: ModelArgs, arch: Architecture) -> Result<ArchConfig, CliError> {
    let d = ArchConfig::defaults(arch);
    Ok(ArchConfig {
        input_dim: d.input_dim,
        hidden: r.get("hidden", m.hidden, d.hidden)?,
        lambda: r.get("lambda", m.lambda, d.lambda)?,
        conv_k: r.get("conv-k", m.conv_k, d.conv_k)?,
        conv_s: r.get("conv-s", m.conv_s, d.conv_s)?,
        pool_w: r.get("pool-w", m.pool_w, d.pool_w)?,
        pool_p: r.get("pool-p", m.pool_p, d.pool_p)?,
    })
}

fn load_split(
    r: &mut Resolver,
    prefix: &str,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    limit: Option<usize>,
    split: Split,
) -> Result<Dataset, CliError> {
    let images = required_path(r, &format!("{prefix}-images"), images)?;
    let labels = required_path(r, &format!("{prefix}-labels"), labels)?;
    let limit = r.optional(&format!("{prefix}-limit"), limit)?;
    for p in [&images, &labels] {
        if !p.is_file() {
            return Err(CliError::Usage(format!("{}: no such file", p.display())));
        }
    }
    let ds = Dataset::load(&images, &labels, split).map_err(|e| CliError::input(&images, e))?;
    Ok(match limit {
        Some(n) => ds.subset(n),
        None => ds,
    })
}

fn test_set(r: &mut Resolver, t: TestDataArgs) -> Result<Dataset, CliError> {
    load_split(r, "test", t.test_images, t.test_labels, t.test_limit, Split::Test)
}

fn parse_arch(raw: Option<String>) -> Result<Option<Architecture>, CliError> {
    raw.map(|s| s.parse().map_err(|e: qocnn::Error| CliError::Usage(e.to_string())))
        .transpose()
}

pub fn train(a: TrainArgs, mut r: Resolver) -> Result<(), CliError> {
    let arch = r.get("arch", parse_arch(a.model.arch.clone())?, Architecture::Qocnn)?;
    if arch == Architecture::Custom {
        return Err(CliError::Usage("arch must be onn, qonn or qocnn".into()));
    }
    let arch_cfg = arch_config(&mut r, a.model, arch)?;
    let defaults = TrainConfig::default();
    let optimizer = a
        .optimizer
        .map(|s| s.parse::<OptimizerKind>().map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    let cfg = TrainConfig {
        epochs: r.get("epochs", a.epochs, defaults.epochs)?,
        batch_size: r.get("batch-size", a.batch_size, defaults.batch_size)?,
        learning_rate: r.get("lr", a.lr, defaults.learning_rate)?,
        optimizer: r.get("optimizer", optimizer, defaults.optimizer)?,
        seed: r.get("seed", a.seed, defaults.seed)?,
        patience: r.get("patience", a.patience, defaults.patience)?,
    };
    cfg.validate()?;
    let train_ds = load_split(&mut r, "train", a.train_images, a.train_labels, a.train_limit, Split::Train)?;
    let test_ds = test_set(&mut r, a.test)?;
    let dir = out_dir(&mut r, a.out_dir)?;
    let default_ckpt = dir.join("model.ckpt").display().to_string();
    let ckpt = PathBuf::from(r.get("checkpoint", path_flag(a.checkpoint), default_ckpt)?);

    let mut model = ModelGraph::build(arch, &arch_cfg, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    write_run_log(&r, "train", Some(&dir))?;
    eprintln!(
        "{arch}: {} parameters, {} train / {} test images",
        model.param_count(),
        train_ds.len(),
        test_ds.len()
    );

    let history = train_model(&mut model, &train_ds, &test_ds, &cfg, |e| {
        eprintln!(
            "epoch {:>2}  train loss {:.5}  test loss {:.5}  test accuracy {:.4}",
            e.epoch, e.train_loss, e.test_loss, e.test_accuracy
        )
    })?;

    save_checkpoint(&model, &ckpt)?;
    let mut buf = Vec::new();
    history.write_csv(&mut buf)?;
    write_atomic(&dir.join("history.csv"), &buf)?;
    let last = history.last().ok_or_else(|| CliError::Runtime("no epochs ran".into()))?;
    println!("test accuracy {}", last.test_accuracy);
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, mut r: Resolver) -> Result<(), CliError> {
    let expected = r.optional("arch", parse_arch(a.arch)?)?;
    let ckpt = required_path(&mut r, "checkpoint", a.checkpoint)?;
    let model = load_checkpoint(&ckpt).map_err(|e| CliError::checkpoint(&ckpt, e))?;
    if let Some(want) = expected {
        if want != model.arch {
            return Err(CliError::Mismatch(format!(
                "{} holds a {} model, not {want}",
                ckpt.display(),
                model.arch
            )));
        }
    }
    if model.input_dim() != FOLDED_LEN {
        return Err(CliError::Mismatch(format!(
            "{} expects {} inputs, MNIST folds to {FOLDED_LEN}",
            ckpt.display(),
            model.input_dim()
        )));
    }
    let test_ds = test_set(&mut r, a.test)?;
    let dir = out_dir(&mut r, a.out_dir)?;
    write_run_log(&r, "evaluate", Some(&dir))?;

    let report = evaluate_model(&model, &test_ds)?;
    report.write_dir(&dir)?;
    println!("test accuracy {}", report.accuracy);
    println!("macro mcc {}", report.mcc_macro);
    println!("mean loss {}", report.mean_loss);
    for (c, (mcc, roc)) in report.mcc_per_class.iter().zip(&report.roc).enumerate() {
        println!("class {c}  mcc {mcc:.4}  auc {:.4}", roc.auc);
    }
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs, mut r: Resolver) -> Result<(), CliError> {
    let seed = r.get("seed", a.seed, 0u64)?;
    let fault = a
        .inject_fault
        .map(|s| s.parse::<Fault>().map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    write_run_log(&r, "gradcheck", None)?;
    let opts = GradcheckOptions {
        fault,
        ..GradcheckOptions::default()
    };
    let mut failures = Vec::new();
    for (arch, report) in check_tiny_models(seed, &opts)? {
        println!("{arch} (max relative error {:.3e}, tolerance {:.0e})", report.max_error(), report.tol);
        print!("{report}");
        for l in report.failures() {
            failures.push(format!("{arch} layer {} {} max error {:.3e}", l.layer, l.kind, l.max_error()));
        }
    }
    if failures.is_empty() {
        println!("all layers within tolerance");
        Ok(())
    } else {
        Err(CliError::Gradcheck(failures.join("; ")))
    }
}

fn parse_sweep(path: &Path) -> Result<Vec<WorkloadSpec>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::missing(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: Result<Vec<u64>, _> = fields.iter().map(|f| f.parse::<u64>()).collect();
        match nums {
            Ok(v) if v.len() == 3 => out.push(workload(v[0], v[1], v[2])?),
            // header row
            Err(_) if out.is_empty() && i == 0 => {}
            _ => {
                return Err(CliError::Usage(format!(
                    "{} line {}: expected three positive integers L,n,b",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn workload(layers: u64, n: u64, batch: u64) -> Result<WorkloadSpec, CliError> {
    WorkloadSpec::new(layers, n, batch).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn estimate(a: EstimateArgs, mut r: Resolver) -> Result<(), CliError> {
    let sweep = r.optional::<String>("sweep", path_flag(a.sweep))?;
    let workloads = match sweep {
        Some(p) => parse_sweep(Path::new(&p))?,
        None => {
            let layers = r.required("layers", a.layers)?;
            let n = r.required("n", a.n)?;
            let batch = r.required("batch", a.batch)?;
            vec![workload(layers, n, batch)?]
        }
    };
    let dir = match r.optional::<String>("out-dir", path_flag(a.out_dir))? {
        Some(d) => {
            let d = PathBuf::from(d);
            fs::create_dir_all(&d).map_err(|e| CliError::missing(&d, e))?;
            Some(d)
        }
        None => None,
    };
    write_run_log(&r, "estimate", dir.as_deref())?;
    let reports: Vec<ResourceReport> = workloads.into_iter().map(estimate_resources).collect();
    let mut buf = Vec::new();
    write_csv(&reports, &mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    if let Some(d) = dir {
        write_atomic(&d.join("resources.csv"), &buf)?;
    }
    Ok(())
}

fn hyperparams(spec: &LayerSpec) -> String {
    match spec {
        LayerSpec::Sinusoid { lambda, .. } => format!("lambda={lambda}"),
        LayerSpec::QuantumConv { kernel, step, .. } => format!("k={kernel};s={step}"),
        LayerSpec::SplitMaxPool { window, stride, .. } => format!("w={window};p={stride}"),
        _ => String::new(),
    }
}

fn matrix_csv(m: &ComplexMatrix) -> String {
    let mut s = String::from("row,col,re,im\n");
    for i in 0..m.rows {
        for j in 0..m.cols {
            let z = m.get(i, j);
            let _ = writeln!(s, "{i},{j},{},{}", z.re, z.im);
        }
    }
    s
}

pub fn export(a: ExportArgs, mut r: Resolver) -> Result<(), CliError> {
    let ckpt = required_path(&mut r, "checkpoint", a.checkpoint)?;
    let model = load_checkpoint(&ckpt).map_err(|e| CliError::checkpoint(&ckpt, e))?;
    let dir = out_dir(&mut r, a.out_dir)?;
    write_run_log(&r, "export", Some(&dir))?;

    let mut summary = String::from("index,kind,in_dim,out_dim,hyperparams,params,beta\n");
    for (i, layer) in model.layers.iter().enumerate() {
        let spec = &layer.spec;
        let params = layer.weights.as_ref().map_or(0, |w| 2 * w.rows * w.cols);
        let mut beta = String::new();
        if let (LayerSpec::ComplexLinear { .. }, Some(w)) = (spec, &layer.weights) {
            let f = amplification_normalize(svd(w)?);
            beta = f.beta.to_string();
            let mut sigma = String::from("index,sigma\n");
            for (k, s) in f.sigma.iter().enumerate() {
                let _ = writeln!(sigma, "{k},{s}");
            }
            write_atomic(&dir.join(format!("layer_{i}_sigma.csv")), sigma.as_bytes())?;
            write_atomic(&dir.join(format!("layer_{i}_v.csv")), matrix_csv(&f.v).as_bytes())?;
            write_atomic(&dir.join(format!("layer_{i}_u.csv")), matrix_csv(&f.u).as_bytes())?;
        } else if let Some(w) = &layer.weights {
            write_atomic(&dir.join(format!("layer_{i}_kernel.csv")), matrix_csv(w).as_bytes())?;
        }
        let _ = writeln!(
            summary,
            "{i},{},{},{},{},{params},{beta}",
            spec.kind(),
            spec.in_dim(),
            spec.out_dim(),
            hyperparams(spec)
        );
    }
    write_atomic(&dir.join("layers.csv"), summary.as_bytes())?;
    print!("{summary}");
    println!("{} model, {} parameters", model.arch, model.param_count());
    Ok(())
}
