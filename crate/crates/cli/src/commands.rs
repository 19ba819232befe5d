use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;
use tensorda::adapt::{flatten_samples, AdaptationConfig, LabeledTensorSet};
use tensorda::data_io::{
    generate_shift, labels_path, read_model, read_set, read_tensor, spatial_pool, write_model, write_set, write_tensor,
    write_text, ShiftSpec,
};
use tensorda::eval::{a_distance, accuracy, class_divergence, train_classifier, ADistanceOptions};
use tensorda::method::{fit_method, FittedModel, Method};
use tensorda::{DenseTensor, Shape};

use crate::error::{CliError, WithPath};
use crate::report::{ClassLevel, Discrepancy, Report, TracePoint};
use crate::{EvalArgs, ExportArgs, FitArgs, PoolArgs, SynthArgs};

/// Records a data file and its labels companion, when present.
fn record_set(report: &mut Report, role: &str, path: &Path, output: bool) -> Result<(), CliError> {
    let labels = labels_path(path);
    let add = |r: &mut Report, role: &str, p: &Path| if output { r.output(role, p) } else { r.input(role, p) };
    add(report, role, path)?;
    if labels.exists() {
        add(report, &format!("{role}_labels"), &labels)?;
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<Vec<String>, CliError> {
    let spec = ShiftSpec {
        class_count: a.classes,
        samples_per_class: a.per_class,
        target_per_class: a.target_per_class,
        dims: a.dims.clone(),
        true_dims: a.true_dims.clone(),
        kind: a.kind,
        rotation_angle_scale: a.angle,
        noise_sigma: a.sigma,
        within_class_sigma: a.within_sigma,
        seed: a.seed,
    };
    let config = json!({
        "classes": a.classes,
        "per_class": a.per_class,
        "target_per_class": a.target_per_class.unwrap_or(a.per_class),
        "dims": a.dims,
        "true_dims": a.true_dims,
        "kind": a.kind.to_string(),
        "angle": a.angle,
        "sigma": a.sigma,
        "within_sigma": a.within_sigma,
    });
    let mut report = Report::new("synth", Some(a.seed), config, a.common.timings);
    let shift = report.timed("generate", || generate_shift(&spec))?;

    std::fs::create_dir_all(&a.out_dir).at(&a.out_dir)?;
    let source = a.out_dir.join("source.tnsb");
    let target = a.out_dir.join("target.tnsb");
    report.timed("write", || -> Result<(), CliError> {
        write_set(&source, &shift.source).at(&source)?;
        write_set(&target, &shift.target).at(&target)
    })?;
    record_set(&mut report, "source", &source, true)?;
    record_set(&mut report, "target", &target, true)?;
    for (k, r) in shift.ground_truth.mats().iter().enumerate() {
        let path = a.out_dir.join(format!("ground_truth_mode{k}.tnsb"));
        let t = DenseTensor::new(Shape::new(vec![r.nrows(), r.ncols()])?, r.as_slice().to_vec())?;
        write_tensor(&path, &t).at(&path)?;
        report.output(&format!("ground_truth_mode{k}"), &path)?;
    }
    report.emit(a.common.report.as_deref())?;
    Ok(report.warnings)
}

fn read_pair(
    report: &mut Report,
    source: &Path,
    target: &Path,
) -> Result<(LabeledTensorSet, LabeledTensorSet), CliError> {
    let (xs, xt) = report.timed("read", || -> Result<_, CliError> {
        Ok((read_set(source).at(source)?, read_set(target).at(target)?))
    })?;
    record_set(report, "source", source, false)?;
    record_set(report, "target", target, false)?;
    Ok((xs, xt))
}

pub fn fit(a: &FitArgs) -> Result<Vec<String>, CliError> {
    if !(a.lambda >= 0.0 && a.lambda.is_finite()) {
        return Err(CliError::Usage(format!(
            "--lambda must be finite and >= 0, got {}",
            a.lambda
        )));
    }
    if !(a.tol >= 0.0 && a.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be finite and >= 0, got {}", a.tol)));
    }
    // The config echo is completed once the default dims are known.
    let mut report = Report::new("fit", Some(a.seed), json!({}), a.common.timings);
    let (xs, xt) = read_pair(&mut report, &a.source, &a.target)?;
    let dims = a
        .dims
        .clone()
        .unwrap_or_else(|| AdaptationConfig::default_dims(xs.sample_dims()));
    report.config = json!({
        "method": a.method.name(),
        "dims": dims,
        "lambda": a.lambda,
        "iters": a.iters,
        "tol": a.tol,
    });
    let mut cfg = AdaptationConfig::new(dims);
    cfg.lambda = a.lambda;
    cfg.max_outer_iters = a.iters;
    cfg.outer_tol = a.tol;

    let (model, warnings) = report.timed("fit", || fit_method(a.method, &xs, &xt, &cfg))?;
    report.loss_trace = model
        .loss_trace()
        .iter()
        .map(|&(iter, loss)| TracePoint { iter, loss })
        .collect();
    report.warnings = warnings;
    write_model(&a.model, &model).at(&a.model)?;
    report.output("model", &a.model)?;
    report.emit(a.common.report.as_deref())?;
    Ok(report.warnings)
}

/// Class-level divergences need at least two classes, each with two or
/// more samples in every set.
fn every_class_has_two(label_sets: &[&[usize]]) -> bool {
    let classes = label_sets.iter().flat_map(|l| l.iter()).max().map_or(0, |&m| m + 1);
    classes >= 2
        && label_sets.iter().all(|labels| {
            let mut counts = vec![0usize; classes];
            for &l in labels.iter() {
                counts[l] += 1;
            }
            counts.iter().all(|&c| c >= 2)
        })
}

/// Accuracy (when the target is labelled) and discrepancies of one model.
fn evaluate(
    report: &mut Report,
    model: &FittedModel,
    xs: &LabeledTensorSet,
    xt: &LabeledTensorSet,
    ridge: f64,
    opts: &ADistanceOptions,
) -> Result<(), CliError> {
    let name = model.method().name();
    let ls = xs
        .labels
        .as_deref()
        .ok_or_else(|| tensorda::Error::Format("the source set has no labels".into()))?;
    let fs = model.source_features(&xs.data)?;
    let ft = model.target_features(&xt.data)?;
    if let Some(lt) = xt.labels.as_deref() {
        let acc = report.timed(&format!("classify_{name}"), || -> Result<f64, CliError> {
            let clf = train_classifier(&fs, ls, ridge)?;
            Ok(accuracy(&clf, &ft, lt)?)
        })?;
        report.accuracies.insert(name.to_string(), acc);
    }
    let disc = report.timed(&format!("discrepancy_{name}"), || -> Result<Discrepancy, CliError> {
        let d_a = a_distance(&fs, &ft, opts)?;
        let class = match xt.labels.as_deref() {
            Some(lt) if every_class_has_two(&[ls, lt]) => {
                Some(ClassLevel::new(class_divergence(&fs, ls, &ft, lt, opts)?, "target"))
            }
            None if every_class_has_two(&[ls]) => {
                let before = flatten_samples(&xs.data);
                let after = model.aligned_source(&xs.data)?;
                Some(ClassLevel::new(
                    class_divergence(&before, ls, &after, ls, opts)?,
                    "aligned_source",
                ))
            }
            _ => {
                log::info!("{name}: a class has fewer than two samples, class-level divergences omitted");
                None
            }
        };
        Ok(Discrepancy { d_a, class })
    })?;
    report.discrepancies.insert(name.to_string(), disc);
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<Vec<String>, CliError> {
    if !(a.ridge > 0.0 && a.ridge.is_finite()) {
        return Err(CliError::Usage(format!(
            "--ridge must be finite and > 0, got {}",
            a.ridge
        )));
    }
    if a.folds < 2 {
        return Err(CliError::Usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    let config = json!({ "ridge": a.ridge, "folds": a.folds });
    let mut report = Report::new("eval", Some(a.seed), config, a.common.timings);
    let (xs, xt) = read_pair(&mut report, &a.source, &a.target)?;

    let mut models: BTreeMap<Method, FittedModel> = BTreeMap::new();
    for path in &a.model {
        let model = read_model(path).at(path)?;
        report.input(&format!("model_{}", model.method()), path)?;
        if models.insert(model.method(), model).is_some() {
            return Err(CliError::Usage(format!(
                "more than one model for the same method ({})",
                path.display()
            )));
        }
    }
    models.entry(Method::Na).or_insert_with(|| FittedModel::Identity {
        sample_dims: xs.sample_dims().to_vec(),
    });

    let opts = ADistanceOptions {
        folds: a.folds,
        seed: a.seed,
        ridge: a.ridge,
    };
    for model in models.values() {
        evaluate(&mut report, model, &xs, &xt, a.ridge, &opts)?;
    }
    if xt.labels.is_none() {
        log::info!("target set has no labels: accuracy omitted");
    }
    report.emit(a.common.report.as_deref())?;
    Ok(report.warnings)
}

pub fn pool(a: &PoolArgs) -> Result<Vec<String>, CliError> {
    let config = json!({ "out_h": a.out_h, "out_w": a.out_w });
    let mut report = Report::new("pool", None, config, a.common.timings);
    let set = read_set(&a.input).at(&a.input)?;
    record_set(&mut report, "input", &a.input, false)?;
    let pooled = report.timed("pool", || spatial_pool(&set.data, a.out_h, a.out_w))?;
    let out = LabeledTensorSet::new(pooled, set.labels)?;
    write_set(&a.output, &out).at(&a.output)?;
    record_set(&mut report, "output", &a.output, true)?;
    report.emit(a.common.report.as_deref())?;
    Ok(report.warnings)
}

pub fn export(a: &ExportArgs) -> Result<(), CliError> {
    let x = read_tensor(&a.input).at(&a.input)?;
    match &a.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).at(path)?);
            write_text(&mut w, &x).at(path)?;
            w.flush().at(path)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_text(&mut w, &x)?;
            w.flush().map_err(|e| CliError::Core(e.into()))
        }
    }
}
