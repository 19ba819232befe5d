//! Fits NA / PCA / NTSL / TAISL on a synthetic rotation shift and prints
//! cross-domain accuracies and the TAISL loss trace.
//!
//! Usage: `shift_demo [angle_scale] [seed] [per_class] [within_sigma]`.

use std::time::Instant;

use tensorda::adapt::{
    flatten_samples, ntsl_fit, pca_fit, taisl_fit, transform_source, transform_target, AdaptationConfig,
};
use tensorda::data_io::{generate_shift, ShiftSpec};
use tensorda::eval::{accuracy, class_divergence, train_classifier, ADistanceOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let mut spec = ShiftSpec::new(vec![6, 6, 32], vec![3, 3, 8]);
    if let Some(a) = args.get(1) {
        spec.rotation_angle_scale = a.parse()?;
    }
    if let Some(s) = args.get(2) {
        spec.seed = s.parse()?;
    }
    if let Some(n) = args.get(3) {
        spec.samples_per_class = n.parse()?;
    }
    if let Some(n) = args.get(4) {
        spec.within_class_sigma = n.parse()?;
    }
    let shift = generate_shift(&spec)?;
    let same = generate_shift(&ShiftSpec {
        rotation_angle_scale: 0.0,
        ..spec.clone()
    })?;
    {
        let clf = train_classifier(
            &flatten_samples(&same.source.data),
            same.source.labels.as_ref().unwrap(),
            1.0,
        )?;
        let acc = accuracy(
            &clf,
            &flatten_samples(&same.target.data),
            same.target.labels.as_ref().unwrap(),
        )?;
        println!("within-domain acc {acc:.3}");
    }
    let (s, t) = (&shift.source, &shift.target);
    let ls = s.labels.as_ref().unwrap();
    let lt = t.labels.as_ref().unwrap();
    let opts = ADistanceOptions::default();

    let report = |name: &str, fs: &tensorda::Matrix, ft: &tensorda::Matrix| -> Result<(), Box<dyn std::error::Error>> {
        let clf = train_classifier(fs, ls, 1.0)?;
        let acc = accuracy(&clf, ft, lt)?;
        let js = class_divergence(fs, ls, ft, lt, &opts)
            .map(|c| c.j_s)
            .unwrap_or(f64::NAN);
        println!(
            "{name:6} acc {:.3}  train {:.3}  J_s {js:.3}",
            acc,
            accuracy(&clf, fs, ls)?
        );
        Ok(())
    };
    report("NA", &flatten_samples(&s.data), &flatten_samples(&t.data))?;
    let pca = pca_fit(s, t, 72)?;
    report("PCA", &pca.transform(&s.data)?, &pca.transform(&t.data)?)?;
    let cfg = AdaptationConfig::new(spec.true_dims.clone());
    let m = ntsl_fit(s, t, &cfg)?;
    report("NTSL", &flatten_samples(&m.g_source), &flatten_samples(&m.g_target))?;
    let t0 = Instant::now();
    let m = taisl_fit(s, t, &cfg)?;
    println!("taisl fit {:?}", t0.elapsed());
    report(
        "TAISL",
        &flatten_samples(&transform_source(&s.data, &m)?),
        &flatten_samples(&transform_target(&t.data, &m)?),
    )?;
    for (i, l) in &m.loss_trace {
        println!("  iter {i}: {l:.6e}");
    }
    for w in &m.warnings {
        println!("  warn {w}");
    }
    let gt: f64 = m
        .alignment
        .mats()
        .iter()
        .zip(shift.ground_truth.mats())
        .map(|(a, b)| (a - b).norm())
        .sum();
    println!("  ‖M − R‖ sum {gt:.3}");
    Ok(())
}
