use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::manifest::{files_below, RunContext};
use super::{
    Boot, CalibrateCommand, CliError, CliResult, Command, EnsembleCommand, Inputs, Level, Method, Metric, Output,
    PairBy, PairingArgs, Target,
};
use crate::error::{Error, Result};
use crate::fusion::{fit_calibration, fit_stacking, nll, CalibrationParams, StackingWeights};
use crate::geometry::{diameter_v1, diameter_v2, mask_volume};
use crate::growth::{growth_records, nelson_protocol_select, GrowthOptions, GrowthRecord};
use crate::io::report::float;
use crate::io::{
    read_cohort, read_records, write_records, write_synth, CohortPaths, MaskContainer, MaskStore, PredictionRow,
    Report, SynthSpec, Table,
};
use crate::matching::{dedup, largest_per_patient, link_longitudinal, pair, pair_by_mask, size_window_filter};
use crate::matching::{DedupOptions, Finding, PairingResult};
use crate::metrics::{
    auc, cpm, envelope, froc, interpolate_sensitivity, pooled_reader_roc, roc, sensitivity_at_fp, FrocCurve, FrocData,
    Orientation, RankedScores, RocCurve, CPM_FP_THRESHOLDS,
};
use crate::model::{validate_cohort, Cohort, Detection, GtNodule, Label, ViolationKind};
use crate::plot::Plot;
use crate::stats::{bootstrap, bootstrap_many, ece, welch_one_sided, BootstrapConfig, BootstrapResult};
use crate::subgroup::{stratify, StratifierConfig};

pub(super) fn execute(cmd: Command, argv: &[String]) -> CliResult<()> {
    match cmd {
        Command::Validate { inputs } => validate(&inputs),
        Command::Roc {
            inputs,
            output,
            boot,
            level,
            timepoint,
            orientation,
            iou,
            plot,
        } => with_context(&output, argv, |ctx| {
            cmd_roc(ctx, &inputs, &boot, level, timepoint, orientation, iou, plot)
        }),
        Command::Froc {
            inputs,
            output,
            boot,
            pairing,
            fp,
            plot,
        } => with_context(&output, argv, |ctx| cmd_froc(ctx, &inputs, &boot, &pairing, fp, plot)),
        Command::Cpm {
            inputs,
            output,
            boot,
            pairing,
        } => with_context(&output, argv, |ctx| cmd_cpm(ctx, &inputs, &boot, &pairing)),
        Command::Compare {
            inputs,
            output,
            boot,
            metric,
            level,
            pairing,
        } => with_context(&output, argv, |ctx| {
            cmd_compare(ctx, &inputs, &boot, metric, level, &pairing)
        }),
        Command::Growth {
            inputs,
            output,
            denominator,
            normalization,
            nelson_select,
            iou,
        } => with_context(&output, argv, |ctx| {
            let opts = GrowthOptions {
                denominator,
                normalization,
                ..GrowthOptions::new()
            };
            cmd_growth(ctx, &inputs, &opts, nelson_select, iou)
        }),
        Command::Ensemble(EnsembleCommand::Fit {
            classes,
            tune,
            seed,
            output,
        }) => with_context(&output, argv, |ctx| ensemble_fit(ctx, &classes, &tune, seed)),
        Command::Ensemble(EnsembleCommand::Apply { weights, pred, output }) => {
            with_context(&output, argv, |ctx| ensemble_apply(ctx, &weights, &pred))
        }
        Command::Calibrate(CalibrateCommand::Fit {
            tune,
            column,
            temperature,
            bins,
            output,
        }) => with_context(&output, argv, |ctx| {
            calibrate_fit(ctx, &tune, &column, temperature, bins)
        }),
        Command::Calibrate(CalibrateCommand::Apply {
            params,
            pred,
            column,
            output,
        }) => with_context(&output, argv, |ctx| calibrate_apply(ctx, &params, &pred, &column)),
        Command::Dedup {
            inputs,
            output,
            min_mm,
            max_mm,
        } => with_context(&output, argv, |ctx| cmd_dedup(ctx, &inputs, min_mm, max_mm)),
        Command::Measure { masks, method, output } => {
            with_context(&output, argv, |ctx| cmd_measure(ctx, &masks, method))
        }
        Command::Subgroup {
            inputs,
            output,
            axis,
            config,
            diameter_source,
            timepoint,
        } => with_context(&output, argv, |ctx| {
            let cfg = match config {
                Some(p) => {
                    ctx.input(&p);
                    let mut c: StratifierConfig = read_json(&p)?;
                    c.axis = axis;
                    c
                }
                None => {
                    let mut c = StratifierConfig::default_for(axis);
                    c.diameter_source = diameter_source;
                    c
                }
            };
            cmd_subgroup(ctx, &inputs, &cfg, timepoint)
        }),
        Command::Synth { spec, seed, output } => {
            with_context(&output, argv, |ctx| cmd_synth(ctx, spec.as_deref(), seed))
        }
        Command::Readers { inputs, output, plot } => with_context(&output, argv, |ctx| cmd_readers(ctx, &inputs, plot)),
    }
}

fn with_context(
    output: &Output,
    argv: &[String],
    body: impl FnOnce(&mut RunContext) -> CliResult<()>,
) -> CliResult<()> {
    let mut ctx = RunContext::new(&output.out, output.format)?;
    body(&mut ctx)?;
    ctx.finish(argv)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        field: "json".into(),
        message: e.to_string(),
    })
}

fn write_json(ctx: &mut RunContext, file: &str, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    ctx.text(file, &text)
}

fn boot_config(boot: &Boot) -> BootstrapConfig {
    let cfg = BootstrapConfig::new(boot.boot, boot.seed);
    match boot.threads {
        Some(n) => cfg.threads(n),
        None => cfg,
    }
}

fn boot_json(r: &BootstrapResult) -> Value {
    json!({
        "ci95": [float(r.ci95.0), float(r.ci95.1)],
        "mean": float(r.mean),
        "n_boot": r.n_boot,
        "seed": r.seed,
        "n_skipped": r.n_skipped,
    })
}

// ---- cohort loading ----

struct Loaded {
    cohort: Cohort,
    masks: MaskStore,
    masks_dir: Option<PathBuf>,
    has_patients: bool,
    has_scans: bool,
}

fn resolve(inputs: &Inputs) -> CohortPaths {
    let mut p = inputs.cohort.as_deref().map(CohortPaths::in_dir).unwrap_or_default();
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            *slot = v.clone();
        }
    };
    set(&mut p.gt, &inputs.gt);
    set(&mut p.patients, &inputs.patients);
    set(&mut p.scans, &inputs.scans);
    set(&mut p.masks, &inputs.masks);
    set(&mut p.readers, &inputs.readers);
    set(&mut p.detections, &inputs.pred.first().cloned());
    p
}

fn read_inputs(inputs: &Inputs, ctx: Option<&mut RunContext>) -> Result<Loaded> {
    let paths = resolve(inputs);
    if let Some(ctx) = ctx {
        for f in paths.files() {
            ctx.input(f);
        }
    }
    let (cohort, masks) = read_cohort(&paths)?;
    Ok(Loaded {
        cohort,
        masks,
        masks_dir: paths.masks.clone(),
        has_patients: paths.patients.is_some(),
        has_scans: paths.scans.is_some(),
    })
}

/// Validate, ignoring references into tables that were not supplied.
fn check(l: &Loaded) -> CliResult<()> {
    let mut report = validate_cohort(&l.cohort);
    report.violations.retain(|v| {
        let skip = v.kind == ViolationKind::DanglingKey
            && ((!l.has_patients && v.detail.starts_with("unknown patient_id"))
                || (!l.has_scans && v.detail.starts_with("unknown scan_id")));
        !skip
    });
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Validation(report))
    }
}

fn load(inputs: &Inputs, ctx: &mut RunContext) -> CliResult<Loaded> {
    let l = read_inputs(inputs, Some(ctx))?;
    check(&l)?;
    Ok(l)
}

fn track_masks(ctx: &mut RunContext, l: &Loaded) -> Result<()> {
    if let Some(dir) = &l.masks_dir {
        for f in files_below(dir)? {
            ctx.input(&f);
        }
    }
    Ok(())
}

fn validate(inputs: &Inputs) -> CliResult<()> {
    let l = read_inputs(inputs, None)?;
    let report = validate_cohort(&l.cohort);
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Validation(report))
    }
}

// ---- shared scoring ----

/// GT nodules and detections on scans of `timepoint` (everything if `None`).
fn at_timepoint(l: &Loaded, dets: &[Detection], timepoint: Option<i32>) -> Result<(Vec<GtNodule>, Vec<Detection>)> {
    let Some(tp) = timepoint else {
        return Ok((l.cohort.gt_nodules.clone(), dets.to_vec()));
    };
    if !l.has_scans {
        return Err(Error::invalid("--timepoint needs the scans file"));
    }
    let keep = l.cohort.scan_ids_at(Some(tp));
    Ok((
        l.cohort
            .gt_nodules
            .iter()
            .filter(|g| keep.contains(g.scan_id.as_str()))
            .cloned()
            .collect(),
        dets.iter()
            .filter(|d| keep.contains(d.scan_id.as_str()))
            .cloned()
            .collect(),
    ))
}

fn resolve_level(level: Option<Level>, l: &Loaded) -> Result<Level> {
    let patient_ok = l.has_patients && l.has_scans;
    match level {
        Some(Level::Patient) if !patient_ok => Err(Error::invalid("patient level needs the patients and scans files")),
        Some(x) => Ok(x),
        None if patient_ok => Ok(Level::Patient),
        None => Ok(Level::Nodule),
    }
}

fn level_name(level: Level) -> &'static str {
    match level {
        Level::Patient => "patient",
        Level::Nodule => "nodule",
    }
}

/// Labels and scores at the requested level. Patients score their highest
/// detection; GT nodules (either label) score their best paired detection,
/// 0 when missed.
fn level_scores(
    level: Level,
    l: &Loaded,
    dets: &[Detection],
    timepoint: Option<i32>,
    iou: f64,
) -> Result<(Vec<bool>, Vec<f64>)> {
    match level {
        Level::Patient => {
            let cohort = Cohort {
                detections: dets.to_vec(),
                ..l.cohort.clone()
            };
            Ok(cohort
                .patient_scores(timepoint)
                .into_iter()
                .map(|(_, y, s)| (y, s))
                .unzip())
        }
        Level::Nodule => {
            let (gt, dets) = at_timepoint(l, dets, timepoint)?;
            let pairing = pair(&gt, &dets, iou, &[Label::Malignant, Label::Benign]);
            let best = pairing.best_score_per_target();
            Ok(gt
                .iter()
                .map(|g| {
                    (
                        g.label.is_malignant(),
                        best.get(g.nodule_id.as_str()).copied().unwrap_or(0.0),
                    )
                })
                .unzip())
        }
    }
}

fn target_labels(t: Target) -> Vec<Label> {
    match t {
        Target::Malignant => vec![Label::Malignant],
        Target::Benign => vec![Label::Benign],
        Target::All => vec![Label::Malignant, Label::Benign],
    }
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::Malignant => "malignant",
        Target::Benign => "benign",
        Target::All => "all",
    }
}

fn froc_pairing(l: &Loaded, dets: &[Detection], a: &PairingArgs) -> Result<PairingResult> {
    let (gt, dets) = at_timepoint(l, dets, a.timepoint)?;
    let labels = target_labels(a.target);
    let p = match a.pair_by {
        PairBy::Bbox => pair(&gt, &dets, a.iou, &labels),
        PairBy::Mask => pair_by_mask(&gt, &dets, &l.masks, a.iou, &labels)?,
    };
    Ok(if l.has_scans {
        p.with_scans(l.cohort.scan_ids_at(a.timepoint))
    } else {
        p
    })
}

fn op_json(op: &crate::metrics::OperatingPoint) -> Value {
    json!({
        "cutoff": float(op.cutoff),
        "sensitivity": float(op.sensitivity),
        "specificity": float(op.specificity),
        "accuracy": float(op.accuracy),
        "youden_j": float(op.youden_j),
    })
}

fn roc_report(curve: &RocCurve) -> Report {
    let mut t = Table::new("curve", &["cutoff", "fpr", "tpr"]);
    for p in &curve.points {
        t.push(vec![float(p.cutoff), float(p.fpr), float(p.tpr)]);
    }
    Report::new()
        .with("auc", float(curve.auc))
        .with("myi", op_json(&curve.myi))
        .with("flipped", curve.flipped)
        .with("n_positive", curve.n_positive)
        .with("n_negative", curve.n_negative)
        .with_table(t)
}

fn roc_plot(curve: &RocCurve, title: &str) -> String {
    Plot::new(title, "1 - specificity", "sensitivity")
        .series("ROC", curve.points.iter().map(|p| (p.fpr, p.tpr)).collect())
        .marker("MYI", 1.0 - curve.myi.specificity, curve.myi.sensitivity)
        .to_svg()
}

fn froc_plot(curve: &FrocCurve, ops: &[(f64, f64)]) -> String {
    let mut p = Plot::new("FROC", "mean false positives per scan", "sensitivity").series(
        "FROC",
        curve
            .points
            .iter()
            .map(|p| (p.mean_fp_per_scan, p.sensitivity))
            .collect(),
    );
    p.log_x = true;
    p.x_range = (CPM_FP_THRESHOLDS[0], CPM_FP_THRESHOLDS[CPM_FP_THRESHOLDS.len() - 1]);
    for &(fp, s) in ops {
        p = p.marker(&format!("{fp}"), fp, s);
    }
    p.to_svg()
}

// ---- commands ----

#[allow(clippy::too_many_arguments)]
fn cmd_roc(
    ctx: &mut RunContext,
    inputs: &Inputs,
    boot: &Boot,
    level: Option<Level>,
    timepoint: Option<i32>,
    orientation: Orientation,
    iou: f64,
    plot: bool,
) -> CliResult<()> {
    let l = load(inputs, ctx)?;
    let level = resolve_level(level, &l)?;
    let (labels, scores) = level_scores(level, &l, &l.cohort.detections, timepoint, iou)?;
    let curve = roc(&labels, &scores, orientation)?;
    let mut report = roc_report(&curve).with("level", level_name(level));
    if boot.boot > 0 {
        ctx.seed = Some(boot.seed);
        let oriented: Vec<f64> = if curve.flipped {
            scores.iter().map(|s| -s).collect()
        } else {
            scores.clone()
        };
        let ranked = RankedScores::new(&labels, &oriented)?;
        let r = bootstrap(labels.len(), &boot_config(boot), |w| ranked.weighted_auc(w))?;
        report.set("bootstrap", boot_json(&r));
    }
    ctx.report("roc", &report)?;
    if plot {
        ctx.text(
            "roc.svg",
            &roc_plot(&curve, &format!("ROC ({} level)", level_name(level))),
        )?;
    }
    Ok(())
}

fn cmd_froc(
    ctx: &mut RunContext,
    inputs: &Inputs,
    boot: &Boot,
    a: &PairingArgs,
    fp: Vec<f64>,
    plot: bool,
) -> CliResult<()> {
    let l = load(inputs, ctx)?;
    if a.pair_by == PairBy::Mask {
        track_masks(ctx, &l)?;
    }
    let fps = if fp.is_empty() { CPM_FP_THRESHOLDS.to_vec() } else { fp };
    let pairing = froc_pairing(&l, &l.cohort.detections, a)?;
    let curve = froc(&pairing)?;
    let ops = fps
        .iter()
        .map(|&f| sensitivity_at_fp(&curve, f))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let boots = if boot.boot > 0 {
        ctx.seed = Some(boot.seed);
        let data = FrocData::new(&pairing);
        Some(bootstrap_many(
            data.n_scans(),
            1 + fps.len(),
            &boot_config(boot),
            |w| {
                let c = data.weighted_curve(w)?;
                let mut v = vec![cpm(&c).ok()?];
                for &f in &fps {
                    v.push(sensitivity_at_fp(&c, f).ok()?.0);
                }
                Some(v)
            },
        )?)
    } else {
        None
    };

    let op_rows: Vec<Value> = fps
        .iter()
        .zip(&ops)
        .enumerate()
        .map(|(i, (&target, &(sens, achieved)))| {
            let mut o = json!({
                "target_fp": float(target),
                "achieved_fp": float(achieved),
                "sensitivity": float(sens),
            });
            if let Some(b) = &boots {
                o["bootstrap"] = boot_json(&b[i + 1]);
            }
            o
        })
        .collect();
    let mut t = Table::new("curve", &["cutoff", "mean_fp_per_scan", "sensitivity"]);
    for p in &curve.points {
        t.push(vec![float(p.cutoff), float(p.mean_fp_per_scan), float(p.sensitivity)]);
    }
    let mut report = Report::new()
        .with("target", target_name(a.target))
        .with("cpm", float(cpm(&curve)?))
        .with("n_scans", curve.n_scans)
        .with("n_targets", curve.n_targets)
        .with("iou_threshold", float(a.iou))
        .with("operating_points", op_rows)
        .with_table(t);
    if let Some(b) = &boots {
        report.set("cpm_bootstrap", boot_json(&b[0]));
    }
    ctx.report("froc", &report)?;
    if plot {
        let marks: Vec<(f64, f64)> = ops.iter().map(|&(s, f)| (f, s)).collect();
        ctx.text("froc.svg", &froc_plot(&curve, &marks))?;
    }
    Ok(())
}

fn cmd_cpm(ctx: &mut RunContext, inputs: &Inputs, boot: &Boot, a: &PairingArgs) -> CliResult<()> {
    let l = load(inputs, ctx)?;
    if a.pair_by == PairBy::Mask {
        track_masks(ctx, &l)?;
    }
    let pairing = froc_pairing(&l, &l.cohort.detections, a)?;
    let curve = froc(&pairing)?;
    let env = envelope(&curve);
    let boots = if boot.boot > 0 {
        ctx.seed = Some(boot.seed);
        let data = FrocData::new(&pairing);
        Some(bootstrap_many(
            data.n_scans(),
            1 + CPM_FP_THRESHOLDS.len(),
            &boot_config(boot),
            |w| {
                let c = data.weighted_curve(w)?;
                let e = envelope(&c);
                let mut v = vec![cpm(&c).ok()?];
                v.extend(CPM_FP_THRESHOLDS.iter().map(|&t| interpolate_sensitivity(&e, t)));
                Some(v)
            },
        )?)
    } else {
        None
    };
    let mut t = Table::new("thresholds", &["fp_per_scan", "sensitivity", "ci95_low", "ci95_high"]);
    for (i, &fp) in CPM_FP_THRESHOLDS.iter().enumerate() {
        let (lo, hi) = boots.as_ref().map_or((Value::Null, Value::Null), |b| {
            (float(b[i + 1].ci95.0), float(b[i + 1].ci95.1))
        });
        t.push(vec![float(fp), float(interpolate_sensitivity(&env, fp)), lo, hi]);
    }
    let mut report = Report::new()
        .with("target", target_name(a.target))
        .with("cpm", float(cpm(&curve)?))
        .with("n_scans", curve.n_scans)
        .with("n_targets", curve.n_targets)
        .with_table(t);
    if let Some(b) = &boots {
        report.set("bootstrap", boot_json(&b[0]));
    }
    ctx.report("cpm", &report)?;
    Ok(())
}

fn cmd_compare(
    ctx: &mut RunContext,
    inputs: &Inputs,
    boot: &Boot,
    metric: Metric,
    level: Option<Level>,
    a: &PairingArgs,
) -> CliResult<()> {
    if inputs.pred.len() != 2 {
        return Err(Error::invalid("compare needs --pred exactly twice").into());
    }
    if boot.boot == 0 {
        return Err(Error::invalid("compare needs --boot > 0").into());
    }
    ctx.seed = Some(boot.seed);
    let base_inputs = Inputs {
        pred: Vec::new(),
        ..inputs.clone()
    };
    let mut base = read_inputs(&base_inputs, Some(ctx))?;
    let mut arms = Vec::new();
    for p in &inputs.pred {
        ctx.input(p);
        let dets: Vec<Detection> = read_records(p)?;
        base.cohort.detections = dets.clone();
        check(&base)?;
        arms.push(dets);
    }
    base.cohort.detections.clear();
    let cfg = boot_config(boot);

    let mut report = Report::new();
    let res = match metric {
        Metric::Auc => {
            let level = resolve_level(level, &base)?;
            report.set("level", level_name(level));
            let (la, sa) = level_scores(level, &base, &arms[0], a.timepoint, a.iou)?;
            let (lb, sb) = level_scores(level, &base, &arms[1], a.timepoint, a.iou)?;
            if la != lb {
                return Err(Error::invalid("prediction sets do not cover the same cohort").into());
            }
            let ra = RankedScores::new(&la, &sa)?;
            let rb = RankedScores::new(&lb, &sb)?;
            bootstrap_many(la.len(), 2, &cfg, |w| {
                Some(vec![ra.weighted_auc(w)?, rb.weighted_auc(w)?])
            })?
        }
        Metric::Cpm => {
            report.set("target", target_name(a.target));
            let pa = froc_pairing(&base, &arms[0], a)?;
            let pb = froc_pairing(&base, &arms[1], a)?;
            let keys: BTreeSet<String> = pa
                .per_scan_counts
                .keys()
                .chain(pb.per_scan_counts.keys())
                .cloned()
                .collect();
            let pa = pa.with_scans(keys.iter().map(String::as_str));
            let pb = pb.with_scans(keys.iter().map(String::as_str));
            let (da, db) = (FrocData::new(&pa), FrocData::new(&pb));
            bootstrap_many(da.n_scans(), 2, &cfg, |w| {
                Some(vec![
                    cpm(&da.weighted_curve(w)?).ok()?,
                    cpm(&db.weighted_curve(w)?).ok()?,
                ])
            })?
        }
    };
    let defined = |r: &BootstrapResult| -> Vec<f64> { r.replicates.iter().copied().filter(|x| !x.is_nan()).collect() };
    let w = welch_one_sided(&defined(&res[0]), &defined(&res[1]))?;

    let mut t = Table::new("replicates", &["replicate", "first", "second"]);
    for (i, (x, y)) in res[0].replicates.iter().zip(&res[1].replicates).enumerate() {
        t.push(vec![json!(i), float(*x), float(*y)]);
    }
    report.set("metric", if metric == Metric::Auc { "auc" } else { "cpm" });
    report.set("alternative", "first > second");
    report.set("pred_first", inputs.pred[0].display().to_string());
    report.set("pred_second", inputs.pred[1].display().to_string());
    report.set("estimate_first", float(res[0].estimate));
    report.set("estimate_second", float(res[1].estimate));
    report.set("bootstrap_first", boot_json(&res[0]));
    report.set("bootstrap_second", boot_json(&res[1]));
    report.set("n_boot", boot.boot);
    report.set("seed", boot.seed);
    report.set(
        "welch",
        json!({"t": float(w.t), "df": float(w.df), "p_value": float(w.p_value)}),
    );
    ctx.report("compare", &report.with_table(t))?;
    Ok(())
}

type Measure = (&'static str, fn(&GrowthRecord) -> Option<f64>);

const GROWTH_MEASURES: [Measure; 8] = [
    ("vdt", |r| Some(r.vdt)),
    ("vdt_centered", |r| r.vdt_centered),
    ("rdt", |r| Some(r.rdt)),
    ("volume_growth", |r| Some(r.volume_growth)),
    ("delta_volume", |r| Some(r.delta_volume).filter(|x| !x.is_nan())),
    ("delta_diameter", |r| r.delta_diameter),
    ("darcy", |r| Some(r.darcy)),
    ("prediction", |r| Some(r.linked.prediction_1)),
];

/// Average ranks, 1-based, ties sharing their mean rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn growth_roc_rows(t: &mut Table, level: &str, records: &[GrowthRecord], label: impl Fn(&GrowthRecord) -> bool) {
    for (name, f) in GROWTH_MEASURES {
        let (labels, scores): (Vec<bool>, Vec<f64>) =
            records.iter().filter_map(|r| f(r).map(|s| (label(r), s))).unzip();
        let as_is = auc(&labels, &scores).ok();
        let oriented = roc(&labels, &scores, Orientation::Auto).ok();
        let pos = labels.iter().filter(|&&y| y).count();
        t.push(vec![
            json!(level),
            json!(name),
            json!(labels.len()),
            json!(pos),
            json!(labels.len() - pos),
            as_is.map_or(Value::Null, float),
            oriented.as_ref().map_or(Value::Null, |c| float(c.auc)),
            oriented.map_or(Value::Null, |c| json!(c.flipped)),
        ]);
    }
}

fn cmd_growth(
    ctx: &mut RunContext,
    inputs: &Inputs,
    opts: &GrowthOptions,
    nelson_select: bool,
    iou: f64,
) -> CliResult<()> {
    let l = load(inputs, ctx)?;
    if !l.has_scans {
        return Err(Error::invalid("growth needs the scans file").into());
    }
    let c = &l.cohort;
    let pairing = pair(&c.gt_nodules, &c.detections, iou, &[Label::Malignant, Label::Benign]);
    let pairs = link_longitudinal(&c.gt_nodules, &c.scans, &pairing, &pairing);
    if pairs.is_empty() {
        return Err(Error::Empty("no nodule linked across the two timepoints").into());
    }
    let all = growth_records(&pairs, opts)?;
    let selected: BTreeSet<String> = nelson_protocol_select(&all)
        .iter()
        .map(|r| r.linked.longitudinal_id.clone())
        .collect();
    let keep = |rs: Vec<GrowthRecord>| -> Vec<GrowthRecord> {
        if nelson_select {
            rs.into_iter()
                .filter(|r| selected.contains(&r.linked.longitudinal_id))
                .collect()
        } else {
            rs
        }
    };
    let records = keep(all.clone());

    let mut t = Table::new(
        "records",
        &[
            "longitudinal_id",
            "patient_id",
            "label",
            "volume_2",
            "volume_1",
            "elapsed_days",
            "vdt",
            "vdt_centered",
            "rdt",
            "volume_growth",
            "delta_volume",
            "delta_diameter",
            "darcy",
            "prediction_2",
            "prediction_1",
            "nodcat",
            "growcat",
            "lungrads_growth",
            "nelson_selected",
        ],
    );
    let opt = |x: Option<f64>| x.map_or(Value::Null, float);
    for r in &records {
        let k = &r.linked;
        t.push(vec![
            json!(k.longitudinal_id),
            json!(k.patient_id),
            serde_json::to_value(k.label).map_err(Error::from)?,
            opt(k.volume_2),
            opt(k.volume_1),
            json!(k.elapsed_days()),
            float(r.vdt),
            opt(r.vdt_centered),
            float(r.rdt),
            float(r.volume_growth),
            float(r.delta_volume),
            opt(r.delta_diameter),
            float(r.darcy),
            float(k.prediction_2),
            float(k.prediction_1),
            serde_json::to_value(r.nodcat).map_err(Error::from)?,
            serde_json::to_value(r.growcat).map_err(Error::from)?,
            r.lungrads_growth.map_or(Value::Null, Value::Bool),
            json!(selected.contains(&k.longitudinal_id)),
        ]);
    }
    let report = Report::new()
        .with("n_linked_pairs", pairs.len())
        .with("n_records", records.len())
        .with(
            "n_infinite_vdt_excluded_from_centering",
            all.iter().filter(|r| !r.vdt.is_finite()).count(),
        )
        .with("n_nelson_selected", selected.len())
        .with(
            "n_lungrads_growth",
            records.iter().filter(|r| r.lungrads_growth == Some(true)).count(),
        )
        .with("nelson_select", nelson_select)
        .with("options", opts)
        .with_table(t);
    ctx.report("growth", &report)?;

    let mut rt = Table::new(
        "roc",
        &[
            "level",
            "measure",
            "n_used",
            "n_positive",
            "n_negative",
            "auc_as_is",
            "auc_oriented",
            "flipped",
        ],
    );
    growth_roc_rows(&mut rt, "nodule", &records, |r| r.linked.label.is_malignant());
    let status: HashMap<&str, bool> = c
        .patients
        .iter()
        .map(|p| (p.patient_id.as_str(), p.cancer_status))
        .collect();
    let per_patient = keep(growth_records(&largest_per_patient(&pairs), opts)?);
    growth_roc_rows(&mut rt, "patient", &per_patient, |r| {
        status
            .get(r.linked.patient_id.as_str())
            .copied()
            .unwrap_or_else(|| r.linked.label.is_malignant())
    });
    ctx.report(
        "growth_roc",
        &Report::new().with("n_patients", per_patient.len()).with_table(rt),
    )?;

    let dv: Vec<f64> = records.iter().map(|r| r.delta_volume).collect();
    let ratio: Vec<f64> = records
        .iter()
        .map(|r| r.linked.volume_1.unwrap() / r.linked.volume_2.unwrap())
        .collect();
    let (rdv, rratio) = (average_ranks(&dv), average_ranks(&ratio));
    let mut kt = Table::new(
        "ranks",
        &[
            "longitudinal_id",
            "delta_volume",
            "volume_ratio",
            "rank_delta_volume",
            "rank_volume_ratio",
            "rank_difference",
        ],
    );
    for (i, r) in records.iter().enumerate() {
        kt.push(vec![
            json!(r.linked.longitudinal_id),
            float(dv[i]),
            float(ratio[i]),
            float(rdv[i]),
            float(rratio[i]),
            float(rdv[i] - rratio[i]),
        ]);
    }
    let max_shift = rdv.iter().zip(&rratio).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ctx.report(
        "growth_ranks",
        &Report::new()
            .with("max_abs_rank_difference", float(max_shift))
            .with_table(kt),
    )?;
    Ok(())
}

/// Class predictions of each row: the mean of its columns starting with
/// each prefix.
fn class_rows(rows: &[PredictionRow], prefixes: &[String]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            prefixes
                .iter()
                .map(|p| {
                    let v: Vec<f64> = r
                        .values
                        .iter()
                        .filter(|(k, _)| k.starts_with(p.as_str()))
                        .map(|(_, &v)| v)
                        .collect();
                    if v.is_empty() {
                        Err(Error::invalid(format!(
                            "row `{}` has no column starting with `{p}`",
                            r.id
                        )))
                    } else {
                        Ok(v.iter().sum::<f64>() / v.len() as f64)
                    }
                })
                .collect()
        })
        .collect()
}

fn row_labels(rows: &[PredictionRow]) -> Result<Vec<bool>> {
    rows.iter()
        .map(|r| {
            r.label
                .ok_or_else(|| Error::invalid(format!("row `{}` has no label", r.id)))
        })
        .collect()
}

fn ensemble_fit(ctx: &mut RunContext, classes: &str, tune: &Path, seed: u64) -> CliResult<()> {
    ctx.input(tune);
    ctx.seed = Some(seed);
    let prefixes: Vec<String> = classes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if prefixes.is_empty() {
        return Err(Error::invalid("--classes lists no class").into());
    }
    let rows: Vec<PredictionRow> = read_records(tune)?;
    let labels = row_labels(&rows)?;
    let preds = class_rows(&rows, &prefixes)?;
    let weights = fit_stacking(&preds, &labels, &prefixes, seed)?;
    write_json(ctx, "weights.json", &weights)?;

    let mut t = Table::new("classes", &["class", "weight", "auc"]);
    for (k, p) in prefixes.iter().enumerate() {
        let col: Vec<f64> = preds.iter().map(|r| r[k]).collect();
        t.push(vec![json!(p), float(weights.weights[k]), float(auc(&labels, &col)?)]);
    }
    let report = Report::new()
        .with("tuning_auc", weights.tuning_auc.map_or(Value::Null, float))
        .with("n_rows", rows.len())
        .with("seed", seed)
        .with_table(t);
    ctx.report("ensemble_fit", &report)?;
    Ok(())
}

fn write_rows(ctx: &mut RunContext, rows: &[PredictionRow]) -> Result<()> {
    let p = ctx.out.join("predictions.ndrec");
    write_records(&p, rows)?;
    ctx.output(&p);
    Ok(())
}

fn ensemble_apply(ctx: &mut RunContext, weights: &Path, pred: &Path) -> CliResult<()> {
    ctx.input(weights);
    ctx.input(pred);
    let w: StackingWeights = read_json(weights)?;
    w.check()?;
    let rows: Vec<PredictionRow> = read_records(pred)?;
    let scores = w.apply(&class_rows(&rows, &w.labels)?)?;
    let mut t = Table::new("predictions", &["id", "label", "score"]);
    let mut out = Vec::with_capacity(rows.len());
    for (r, &s) in rows.iter().zip(&scores) {
        t.push(vec![json!(r.id), r.label.map_or(Value::Null, Value::Bool), float(s)]);
        out.push(PredictionRow {
            id: r.id.clone(),
            label: r.label,
            values: BTreeMap::from([("score".to_string(), s)]),
        });
    }
    write_rows(ctx, &out)?;
    ctx.report("ensemble", &Report::new().with("n_rows", rows.len()).with_table(t))?;
    Ok(())
}

fn column(rows: &[PredictionRow], name: &str) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| {
            r.values
                .get(name)
                .copied()
                .ok_or_else(|| Error::invalid(format!("row `{}` has no column `{name}`", r.id)))
        })
        .collect()
}

fn calibrate_fit(ctx: &mut RunContext, tune: &Path, col: &str, temperature: bool, bins: usize) -> CliResult<()> {
    ctx.input(tune);
    let rows: Vec<PredictionRow> = read_records(tune)?;
    let labels = row_labels(&rows)?;
    let scores = column(&rows, col)?;
    let params = fit_calibration(&scores, &labels, temperature)?;
    let out = params.apply_all(&scores);
    write_json(ctx, "calibration.json", &params)?;
    let report = Report::new()
        .with("a", float(params.a))
        .with("b", float(params.b))
        .with("epsilon", float(params.epsilon))
        .with("temperature_only", temperature)
        .with("n_rows", rows.len())
        .with("ece_bins", bins)
        .with("ece_before", float(ece(&scores, &labels, bins)?))
        .with("ece_after", float(ece(&out, &labels, bins)?))
        .with("nll_before", float(nll(&scores, &labels)))
        .with("nll_after", float(nll(&out, &labels)));
    ctx.report("calibration_fit", &report)?;
    Ok(())
}

fn calibrate_apply(ctx: &mut RunContext, params: &Path, pred: &Path, col: &str) -> CliResult<()> {
    ctx.input(params);
    ctx.input(pred);
    let p: CalibrationParams = read_json(params)?;
    let rows: Vec<PredictionRow> = read_records(pred)?;
    let scores = column(&rows, col)?;
    let mut t = Table::new("predictions", &["id", "label", "score", "calibrated"]);
    let mut out = Vec::with_capacity(rows.len());
    for (r, &s) in rows.iter().zip(&scores) {
        let c = p.apply(s);
        t.push(vec![
            json!(r.id),
            r.label.map_or(Value::Null, Value::Bool),
            float(s),
            float(c),
        ]);
        let mut values = r.values.clone();
        values.insert("calibrated".into(), c);
        out.push(PredictionRow {
            id: r.id.clone(),
            label: r.label,
            values,
        });
    }
    write_rows(ctx, &out)?;
    ctx.report("calibrated", &Report::new().with("n_rows", rows.len()).with_table(t))?;
    Ok(())
}

fn cmd_dedup(ctx: &mut RunContext, inputs: &Inputs, min_mm: Option<f64>, max_mm: Option<f64>) -> CliResult<()> {
    let l = load(inputs, ctx)?;
    track_masks(ctx, &l)?;
    let dets = &l.cohort.detections;
    let index: HashMap<&str, usize> = dets
        .iter()
        .enumerate()
        .map(|(i, d)| (d.detection_id.as_str(), i))
        .collect();
    let mut by_scan: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut kept: Vec<(usize, Detection)> = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        match d.mask_ref {
            Some(_) => by_scan.entry(d.scan_id.as_str()).or_default().push(i),
            None => kept.push((i, d.clone())),
        }
    }
    let mask_dir = ctx.out.join(crate::io::records::MASKS_DIR);
    let n_masked: usize = by_scan.values().map(Vec::len).sum();
    let opts = DedupOptions::default();
    let mut written: Vec<PathBuf> = Vec::new();
    for members in by_scan.values() {
        let findings = members
            .iter()
            .map(|&i| {
                let d = &dets[i];
                Ok(Finding {
                    id: d.detection_id.clone(),
                    mask: l.masks.load(d.mask_ref.as_deref().unwrap())?,
                    bbox: d.bbox,
                    score: d.score,
                    patch_center: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for f in dedup(&findings, &opts)? {
            let i = index[f.id.as_str()];
            let mut d = dets[i].clone();
            d.score = f.score;
            d.bbox = f.bbox;
            d.mask_ref = Some(f.id.clone());
            d.derived_diameter = Some(diameter_v1(&f.mask)?.mean);
            d.derived_volume = Some(mask_volume(&f.mask));
            std::fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;
            let p = MaskStore::path_for(&mask_dir, &f.id);
            f.mask.write_vmask(&p)?;
            written.push(p);
            kept.push((i, d));
        }
    }
    kept.sort_by_key(|k| k.0);
    let mut out: Vec<Detection> = kept.into_iter().map(|k| k.1).collect();
    let n_deduped = out.len();
    if min_mm.is_some() || max_mm.is_some() {
        out = size_window_filter(&out, min_mm.unwrap_or(0.0), max_mm.unwrap_or(f64::INFINITY));
    }
    let p = ctx.out.join(crate::io::records::DETECTIONS_FILE);
    write_records(&p, &out)?;
    ctx.output(&p);
    for w in &written {
        ctx.output(w);
    }
    let report = Report::new()
        .with("n_input", dets.len())
        .with("n_with_mask", n_masked)
        .with("n_after_dedup", n_deduped)
        .with("n_output", out.len())
        .with(
            "window_mm",
            json!([min_mm.map_or(Value::Null, float), max_mm.map_or(Value::Null, float)]),
        );
    ctx.report("dedup", &report)?;
    Ok(())
}

fn cmd_measure(ctx: &mut RunContext, masks: &[PathBuf], method: Method) -> CliResult<()> {
    let mut t = Table::new(
        "measurements",
        &["mask", "lax_mm", "sax_mm", "mean_mm", "volume_mm3", "slice_index"],
    );
    for p in masks {
        ctx.input(p);
        let m = MaskContainer::read_vmask(p)?;
        let d = match method {
            Method::V1 => diameter_v1(&m)?,
            Method::V2 => diameter_v2(&m)?,
        };
        t.push(vec![
            json!(p.display().to_string()),
            float(d.lax),
            float(d.sax),
            float(d.mean),
            float(mask_volume(&m)),
            json!(d.slice_index),
        ]);
    }
    let method = if method == Method::V1 { "v1" } else { "v2" };
    ctx.report("measure", &Report::new().with("method", method).with_table(t))?;
    Ok(())
}

fn cmd_subgroup(
    ctx: &mut RunContext,
    inputs: &Inputs,
    cfg: &StratifierConfig,
    timepoint: Option<i32>,
) -> CliResult<()> {
    cfg.check()?;
    let l = load(inputs, ctx)?;
    let groups = stratify(&l.cohort, cfg)?;
    let scored = !l.cohort.detections.is_empty();
    let scores: HashMap<String, (bool, f64)> = l
        .cohort
        .patient_scores(timepoint)
        .into_iter()
        .map(|(id, y, s)| (id, (y, s)))
        .collect();
    let mut t = Table::new("groups", &["group", "n_patients", "n_positive", "n_negative", "auc"]);
    for (name, ids) in &groups {
        let (labels, s): (Vec<bool>, Vec<f64>) = ids.iter().filter_map(|id| scores.get(id).copied()).unzip();
        let pos = labels.iter().filter(|&&y| y).count();
        let a = if scored { auc(&labels, &s).ok() } else { None };
        t.push(vec![
            json!(name),
            json!(ids.len()),
            json!(pos),
            json!(labels.len() - pos),
            a.map_or(Value::Null, float),
        ]);
    }
    let report = Report::new()
        .with("config", cfg)
        .with("n_patients", l.cohort.patients.len())
        .with_table(t);
    ctx.report("subgroup", &report)?;
    Ok(())
}

fn cmd_synth(ctx: &mut RunContext, spec_path: Option<&Path>, seed: Option<u64>) -> CliResult<()> {
    let mut spec = match spec_path {
        Some(p) => {
            ctx.input(p);
            read_json::<SynthSpec>(p)?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    ctx.seed = Some(spec.seed);
    let s = crate::io::synth_cohort(&spec)?;
    let out = ctx.out.clone();
    let paths = write_synth(&out, &s)?;
    for f in paths.files() {
        ctx.output(f);
    }
    if let Some(dir) = &paths.masks {
        for f in files_below(dir)? {
            ctx.output(&f);
        }
    }
    write_json(ctx, "synth_spec.json", &spec)?;
    Ok(())
}

fn cmd_readers(ctx: &mut RunContext, inputs: &Inputs, plot: bool) -> CliResult<()> {
    let l = load(inputs, ctx)?;
    let c = &l.cohort;
    let curve = pooled_reader_roc(&c.annotations, &c.scans, &c.patients, Orientation::AsIs)?;
    let readers: BTreeSet<&str> = c.annotations.iter().map(|a| a.reader_id.as_str()).collect();
    let mut report = roc_report(&curve).with("n_readers", readers.len());
    if !c.detections.is_empty() {
        let (labels, scores): (Vec<bool>, Vec<f64>) =
            c.patient_scores(None).into_iter().map(|(_, y, s)| (y, s)).unzip();
        report.set("model_auc", float(auc(&labels, &scores)?));
    }
    ctx.report("readers", &report)?;
    if plot {
        ctx.text("readers.svg", &roc_plot(&curve, "Pooled readers"))?;
    }
    Ok(())
}
