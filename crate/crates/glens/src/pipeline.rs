//! Subcommand implementations. Each reads its inputs, writes its outputs in
//! input order and returns the data problems it met; callers turn a
//! non-empty list into exit code 2.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use glens_core::cropgen::{crop_pixels, plan_crop, refine as refine_point, CropConfig, CropWindow};
use glens_core::pss::{parse_coordinates, perplexity, record_pss, CoordinateFormat, DigitDistribution};
use glens_core::record::{EvalRecord, Pass, PssSummary, EVAL_SCHEMA_VERSION};
use glens_core::scenegen::{generate_scene, SceneManifest, SceneSpec};
use glens_core::{classify as classify_point, Point};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{GlensError, Result};
use crate::io::{read_json, read_jsonl, read_jsonl_values, read_png, write_json_pretty, write_jsonl, write_png, write_text};
use crate::library::{icon_library_or_builtin, Backgrounds};
use crate::mock::{predict, MockConfig};
use crate::records::{FirstPass, PredictionRecord, ScoreRecord, TaskRecord};
use crate::report::{build_report, distribution_csv, pss_csv, render_markdown, threshold_csv, ReportBundle, ReportSettings};
use crate::schema::{self, Issue};

/// A record-level problem. Processing continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DataError {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    pub message: String,
}

impl DataError {
    fn at(source: &Path, line: usize, message: impl Into<String>) -> Self {
        Self { source: Some(source.display().to_string()), line: Some(line), scene_id: None, message: message.into() }
    }

    fn scene(mut self, scene_id: &str) -> Self {
        self.scene_id = Some(scene_id.to_string());
        self
    }
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(s) = &self.source {
            write!(f, "{s}")?;
            if let Some(l) = self.line {
                write!(f, ":{l}")?;
            }
            f.write_str(": ")?;
        }
        if let Some(id) = &self.scene_id {
            write!(f, "scene {id}: ")?;
        }
        f.write_str(&self.message)
    }
}

pub type Outcome = Vec<DataError>;

pub const MANIFEST_DIR: &str = "manifests";
pub const IMAGE_DIR: &str = "images";
pub const TASKS_FILE: &str = "tasks.jsonl";

pub fn manifest_path(scenes: &Path, scene_id: &str) -> PathBuf {
    scenes.join(MANIFEST_DIR).join(format!("{scene_id}.json"))
}

pub fn image_path(scenes: &Path, scene_id: &str) -> PathBuf {
    scenes.join(IMAGE_DIR).join(format!("{scene_id}.png"))
}

/// Per-scene seed derived from the run seed (splitmix64 finalizer).
pub fn scene_seed(run_seed: u64, index: u64) -> u64 {
    let mut z = run_seed.wrapping_add((index + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn scene_id(index: usize) -> String {
    format!("scene-{index:05}")
}

pub fn gen_scenes(cfg: &RunConfig, count: usize, out: &Path) -> Result<Outcome> {
    let library = icon_library_or_builtin(cfg.paths.library.as_deref())?;
    let backgrounds = match &cfg.paths.backgrounds {
        Some(dir) => Backgrounds::from_dir(dir)?,
        None => Backgrounds::Synthetic(cfg.scene_dims()?),
    };
    let template = cfg.instruction_template()?;
    let mut tasks = Vec::with_capacity(count);
    for i in 0..count {
        let id = scene_id(i);
        let seed = scene_seed(cfg.seed, i as u64);
        let (background_ref, background) = backgrounds.pick(i, seed)?;
        let spec = SceneSpec {
            scene_id: id.clone(),
            split: cfg.scene.splits[i % cfg.scene.splits.len()].clone(),
            background_ref,
            icon_count: cfg.scene.icons_per_scene,
            seed,
            constraints: cfg.scene.constraints(),
            template: template.clone(),
        };
        let (manifest, image) = generate_scene(&spec, &background, &library)
            .map_err(|e| GlensError::Data(format!("scene {id}: {e}")))?;
        write_json_pretty(&manifest_path(out, &id), &manifest)?;
        write_png(&image_path(out, &id), &image)?;
        tasks.push(TaskRecord {
            scene_id: id.clone(),
            split: manifest.split.clone(),
            image: format!("{IMAGE_DIR}/{id}.png"),
            instruction: manifest.instruction.clone(),
            crop_window: None,
        });
    }
    write_jsonl(&out.join(TASKS_FILE), &tasks)?;
    Ok(Vec::new())
}

/// Scene manifests loaded on demand.
pub struct SceneIndex {
    dir: PathBuf,
    cache: HashMap<String, std::result::Result<SceneManifest, String>>,
}

impl SceneIndex {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), cache: HashMap::new() }
    }

    pub fn get(&mut self, scene_id: &str) -> std::result::Result<&SceneManifest, String> {
        let dir = &self.dir;
        self.cache
            .entry(scene_id.to_string())
            .or_insert_with(|| {
                let path = manifest_path(dir, scene_id);
                if !path.exists() {
                    return Err(format!("unknown scene_id (no {})", path.display()));
                }
                let m: SceneManifest = read_json(&path).map_err(|e| e.to_string())?;
                m.check(0.0).map_err(|e| format!("{}: {e}", path.display()))?;
                Ok(m)
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// The kinds of document `validate` understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DocKind {
    Prediction,
    Task,
    Eval,
    Manifest,
}

impl DocKind {
    fn detect(v: &Value) -> Option<Self> {
        let has = |k: &str| v.get(k).is_some();
        if has("placements") {
            Some(DocKind::Manifest)
        } else if has("category") {
            Some(DocKind::Eval)
        } else if has("x_digit_logits") || has("error") || has("raw_text") {
            Some(DocKind::Prediction)
        } else if has("image") {
            Some(DocKind::Task)
        } else {
            None
        }
    }
}

fn issue_messages(issues: Vec<Issue>) -> impl Iterator<Item = String> {
    issues.into_iter().map(|i| i.to_string())
}

/// Structural and cross-field problems of one document.
pub fn check_document(v: &Value, kind: DocKind, format: CoordinateFormat) -> Vec<String> {
    match kind {
        DocKind::Prediction => {
            let shape = schema::prediction_schema_for(v);
            let issues = schema::validate(v, shape);
            if !issues.is_empty() {
                return issue_messages(issues).collect();
            }
            if std::ptr::eq(shape, schema::PREDICTION_FAILURE) {
                return Vec::new();
            }
            match serde_json::from_value::<PredictionRecord>(v.clone()) {
                Ok(r) => r.consistency_errors(format).into_iter().map(|(p, m)| format!("{p}: {m}")).collect(),
                Err(e) => vec![e.to_string()],
            }
        }
        DocKind::Task => {
            let issues = schema::validate(v, schema::TASK);
            if !issues.is_empty() {
                return issue_messages(issues).collect();
            }
            serde_json::from_value::<TaskRecord>(v.clone()).err().map(|e| e.to_string()).into_iter().collect()
        }
        DocKind::Eval => {
            let issues = schema::validate(v, schema::EVAL);
            if !issues.is_empty() {
                return issue_messages(issues).collect();
            }
            match serde_json::from_value::<EvalRecord>(v.clone()) {
                Ok(r) if r.schema_version != EVAL_SCHEMA_VERSION => {
                    vec![format!("/schema_version: unsupported version {}", r.schema_version)]
                }
                Ok(_) => Vec::new(),
                Err(e) => vec![e.to_string()],
            }
        }
        DocKind::Manifest => {
            let issues = schema::validate(v, schema::MANIFEST);
            if !issues.is_empty() {
                return issue_messages(issues).collect();
            }
            match serde_json::from_value::<SceneManifest>(v.clone()) {
                Ok(m) => m.check(0.0).err().map(|e| e.to_string()).into_iter().collect(),
                Err(e) => vec![e.to_string()],
            }
        }
    }
}

/// Validate a JSONL stream or a single JSON manifest. Returns the number of
/// documents seen and their problems.
pub fn validate(path: &Path, kind: Option<DocKind>, format: CoordinateFormat) -> Result<(usize, Outcome)> {
    let (docs, bad) = if path.extension().is_some_and(|e| e == "json") {
        (vec![(1, read_json::<Value>(path)?)], Vec::new())
    } else {
        read_jsonl_values(path)?
    };
    let mut errs: Outcome = bad.iter().map(|e| DataError::at(path, e.line, e.message.clone())).collect();
    for (line, v) in &docs {
        errs.extend(check_one(path, *line, v, kind, format));
    }
    errs.sort_by_key(|e| e.line);
    Ok((docs.len() + bad.len(), errs))
}

fn check_one(path: &Path, line: usize, v: &Value, kind: Option<DocKind>, format: CoordinateFormat) -> Vec<DataError> {
    let Some(kind) = kind.or_else(|| DocKind::detect(v)) else {
        return vec![DataError::at(path, line, "cannot tell the record kind; pass --kind")];
    };
    check_document(v, kind, format).into_iter().map(|m| DataError::at(path, line, m)).collect()
}

/// Successful prediction records of a file, with problems for the rest.
pub fn read_predictions(path: &Path, format: CoordinateFormat) -> Result<(Vec<(usize, PredictionRecord)>, Outcome)> {
    let (values, bad) = read_jsonl_values(path)?;
    let mut errs: Outcome = bad.into_iter().map(|e| DataError::at(path, e.line, e.message)).collect();
    let mut out = Vec::with_capacity(values.len());
    for (line, v) in values {
        let problems = check_document(&v, DocKind::Prediction, format);
        let scene = v.get("scene_id").and_then(Value::as_str).unwrap_or("").to_string();
        let tag = |e: DataError| if scene.is_empty() { e } else { e.scene(&scene) };
        if !problems.is_empty() {
            errs.extend(problems.into_iter().map(|m| tag(DataError::at(path, line, m))));
            continue;
        }
        if let Some(reason) = v.get("error").and_then(Value::as_str) {
            errs.push(tag(DataError::at(path, line, format!("prediction failed: {reason}"))));
            continue;
        }
        let rec: PredictionRecord = serde_json::from_value(v).expect("validated above");
        out.push((line, rec));
    }
    errs.sort_by_key(|e| e.line);
    Ok((out, errs))
}

fn write_errors(out: &Path, errs: &Outcome) -> Result<()> {
    write_jsonl(&out.join("errors.jsonl"), errs)
}

pub fn classify(predictions: &Path, scenes: &Path, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let ccfg = cfg.classifier()?;
    let (preds, mut errs) = read_predictions(predictions, cfg.coordinate_format())?;
    let mut index = SceneIndex::new(scenes);
    let mut evals = Vec::with_capacity(preds.len());
    for (line, p) in preds {
        let m = match index.get(&p.scene_id) {
            Ok(m) => m,
            Err(msg) => {
                errs.push(DataError::at(predictions, line, msg).scene(&p.scene_id));
                continue;
            }
        };
        if p.pass == Pass::Crop && p.crop_window.is_some_and(|w| w.parent() != m.dims) {
            errs.push(DataError::at(predictions, line, "crop_window parent size differs from the scene").scene(&p.scene_id));
            continue;
        }
        let pred = p.full_frame_pred();
        let target = m.target().expect("checked manifest").bbox;
        let r = classify_point(pred, target, &m.distractors(), &ccfg)?;
        evals.push(EvalRecord {
            schema_version: EVAL_SCHEMA_VERSION,
            scene_id: p.scene_id.clone(),
            model_id: p.model_id.clone(),
            split: m.split.clone(),
            pass: p.pass,
            pred,
            category: r.category,
            distance_to_target: r.distance_to_target,
            nearest_distractor_id: r.nearest_distractor_id,
            nearest_distractor_distance: r.nearest_distractor_distance,
            pss: None,
            perplexity: None,
        });
    }
    errs.sort_by_key(|e| e.line);
    write_jsonl(&out.join("eval.jsonl"), &evals)?;
    write_errors(out, &errs)?;
    Ok(errs)
}

/// Digit emitted at the tenths position of a number literal, if any.
fn key_digit(literal: &str) -> Option<usize> {
    let frac = literal.split_once('.')?.1;
    frac.chars().next()?.to_digit(10).map(|d| d as usize)
}

/// Perplexity over the key tokens: the reported probabilities when present,
/// otherwise the digit distribution at the emitted digits. Scores are
/// softmaxed unless `normalize` is off and they already form a distribution.
pub fn key_token_perplexity(p: &PredictionRecord, format: CoordinateFormat, normalize: bool) -> Result<f64> {
    if let Some(probs) = p.key_token_probs.as_deref().filter(|ps| !ps.is_empty()) {
        return Ok(perplexity(probs)?);
    }
    let digits = parse_coordinates(&p.raw_text, format).ok().map(|c| {
        (key_digit(&p.raw_text[c.x_span.clone()]), key_digit(&p.raw_text[c.y_span.clone()]))
    });
    let prob = |v: &DigitDistribution, d: Option<usize>| {
        let s = if normalize || !v.is_probability() { v.softmax() } else { *v };
        let i = d.unwrap_or_else(|| glens_core::pss::peak(&s).0);
        s.values()[i]
    };
    let (dx, dy) = digits.unwrap_or((None, None));
    Ok(perplexity(&[prob(&p.x_digit_logits, dx), prob(&p.y_digit_logits, dy)])?)
}

pub fn score_prediction(p: &PredictionRecord, cfg: &RunConfig) -> Result<ScoreRecord> {
    let pss_cfg = cfg.pss_config()?;
    let r = record_pss(&p.x_digit_logits, &p.y_digit_logits, &pss_cfg);
    Ok(ScoreRecord {
        scene_id: p.scene_id.clone(),
        model_id: p.model_id.clone(),
        pass: p.pass,
        pss: PssSummary::from(&r),
        x_peak: r.x.peak_index,
        y_peak: r.y.peak_index,
        perplexity: key_token_perplexity(p, cfg.coordinate_format(), pss_cfg.normalize_input())?,
    })
}

type JoinKey = (String, String, Pass);

pub fn score(predictions: &Path, eval: Option<&Path>, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (preds, mut errs) = read_predictions(predictions, cfg.coordinate_format())?;
    let mut scores = Vec::with_capacity(preds.len());
    let mut by_key: HashMap<JoinKey, usize> = HashMap::new();
    for (line, p) in preds {
        let s = match score_prediction(&p, cfg) {
            Ok(s) => s,
            Err(e) => {
                errs.push(DataError::at(predictions, line, e.to_string()).scene(&p.scene_id));
                continue;
            }
        };
        let key = (s.scene_id.clone(), s.model_id.clone(), s.pass);
        if by_key.insert(key, scores.len()).is_some() {
            errs.push(DataError::at(predictions, line, format!("duplicate prediction for model {}", s.model_id)).scene(&s.scene_id));
        }
        scores.push(s);
    }
    errs.sort_by_key(|e| e.line);
    write_jsonl(&out.join("scores.jsonl"), &scores)?;

    if let Some(eval_path) = eval {
        let (records, bad) = read_jsonl::<EvalRecord>(eval_path)?;
        errs.extend(bad.into_iter().map(|e| DataError::at(eval_path, e.line, e.message)));
        let mut joined = Vec::with_capacity(records.len());
        for (line, mut r) in records {
            match by_key.get(&(r.scene_id.clone(), r.model_id.clone(), r.pass)) {
                Some(&i) => {
                    r.pss = Some(scores[i].pss);
                    r.perplexity = Some(scores[i].perplexity);
                }
                None => errs.push(
                    DataError::at(eval_path, line, format!("no {} prediction for model {}", r.pass.as_str(), r.model_id))
                        .scene(&r.scene_id),
                ),
            }
            joined.push(r);
        }
        write_jsonl(&out.join("eval.jsonl"), &joined)?;
    }
    write_errors(out, &errs)?;
    Ok(errs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CropPlan {
    pub scene_id: String,
    pub model_id: String,
    pub alpha: f64,
    pub pred: Point,
    pub window: CropWindow,
}

/// Plan crops around full-pass predictions and write the cropped images and
/// second-pass tasks. With several `alphas`, each gets its own
/// `alpha-<value>` subdirectory.
pub fn crop_plan(
    predictions: &Path,
    scenes: &Path,
    cfg: &RunConfig,
    alphas: &[f64],
    model: Option<&str>,
    out: &Path,
) -> Result<Outcome> {
    let (preds, mut errs) = read_predictions(predictions, cfg.coordinate_format())?;
    let mut models: Vec<&str> = preds.iter().map(|(_, p)| p.model_id.as_str()).collect();
    models.sort();
    models.dedup();
    let model = match (model, models.as_slice()) {
        (Some(m), _) => m.to_string(),
        (None, [m]) => m.to_string(),
        (None, []) => String::new(),
        (None, many) => {
            return Err(GlensError::Config(format!("predictions cover several models ({}); pick one with --model", many.join(", "))))
        }
    };

    let sweep = !alphas.is_empty();
    let alphas = if sweep { alphas.to_vec() } else { vec![cfg.alpha] };
    let mut index = SceneIndex::new(scenes);
    let mut images: HashMap<String, glens_core::Raster> = HashMap::new();

    for alpha in alphas {
        let crop_cfg = CropConfig::new(alpha).map_err(|e| GlensError::Config(format!("alpha {alpha}: {e}")))?;
        let dir = if sweep { out.join(format!("alpha-{alpha:.2}")) } else { out.to_path_buf() };
        let mut plans = Vec::new();
        let mut tasks = Vec::new();
        for (line, p) in &preds {
            if p.model_id != model {
                continue;
            }
            if p.pass != Pass::Full {
                errs.push(DataError::at(predictions, *line, "crop plans need full-pass predictions").scene(&p.scene_id));
                continue;
            }
            let m = match index.get(&p.scene_id) {
                Ok(m) => m.clone(),
                Err(msg) => {
                    errs.push(DataError::at(predictions, *line, msg).scene(&p.scene_id));
                    continue;
                }
            };
            let window = plan_crop(p.pred, m.dims, &crop_cfg)?;
            if !images.contains_key(&p.scene_id) {
                images.insert(p.scene_id.clone(), read_png(&image_path(scenes, &p.scene_id))?);
            }
            let crop = crop_pixels(&images[&p.scene_id], &window)?;
            let rel = format!("crops/{}.png", p.scene_id);
            write_png(&dir.join(&rel), &crop)?;
            tasks.push(TaskRecord {
                scene_id: p.scene_id.clone(),
                split: m.split.clone(),
                image: rel,
                instruction: p.instruction.clone(),
                crop_window: Some(window),
            });
            plans.push(CropPlan { scene_id: p.scene_id.clone(), model_id: p.model_id.clone(), alpha, pred: p.pred, window });
        }
        write_jsonl(&dir.join("crop_plans.jsonl"), &plans)?;
        write_jsonl(&dir.join("crop_tasks.jsonl"), &tasks)?;
    }
    errs.sort_by_key(|e| e.line);
    write_errors(out, &errs)?;
    Ok(errs)
}

/// Join crop-pass answers to the full-pass answers they were planned from
/// and attach the refined full-frame point.
pub fn refine(full: &Path, crop: &Path, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let format = cfg.coordinate_format();
    let (firsts, mut errs) = read_predictions(full, format)?;
    let (seconds, crop_errs) = read_predictions(crop, format)?;
    errs.extend(crop_errs);

    let mut first_by: BTreeMap<(String, String), (usize, PredictionRecord)> = BTreeMap::new();
    for (line, p) in firsts {
        if p.pass != Pass::Full {
            errs.push(DataError::at(full, line, "expected a full-pass prediction").scene(&p.scene_id));
            continue;
        }
        first_by.insert((p.scene_id.clone(), p.model_id.clone()), (line, p));
    }

    let mut refined = Vec::with_capacity(seconds.len());
    for (line, mut p) in seconds {
        let Some(window) = p.crop_window.filter(|_| p.pass == Pass::Crop) else {
            errs.push(DataError::at(crop, line, "expected a crop-pass prediction with crop_window").scene(&p.scene_id));
            continue;
        };
        let Some((_, first)) = first_by.remove(&(p.scene_id.clone(), p.model_id.clone())) else {
            errs.push(DataError::at(crop, line, format!("no full-pass prediction for model {}", p.model_id)).scene(&p.scene_id));
            continue;
        };
        let r = refine_point(first.pred, p.pred, &window);
        p.first_pass = Some(FirstPass { pred: first.pred, raw_text: first.raw_text });
        p.refined_pred = Some(r.refined);
        refined.push(p);
    }
    for ((scene, model), (line, _)) in first_by {
        errs.push(DataError::at(full, line, format!("no crop-pass prediction for model {model}")).scene(&scene));
    }
    errs.sort_by(|a, b| (&a.source, a.line).cmp(&(&b.source, b.line)));
    write_jsonl(&out.join("refined.jsonl"), &refined)?;
    write_errors(out, &errs)?;
    Ok(errs)
}

pub fn report(evals: &[PathBuf], cfg: &RunConfig, splits: &[String], out: &Path) -> Result<(ReportBundle, Outcome)> {
    let mut records = Vec::new();
    let mut errs = Vec::new();
    for path in evals {
        let (recs, bad) = read_jsonl::<EvalRecord>(path)?;
        errs.extend(bad.into_iter().map(|e| DataError::at(path, e.line, e.message)));
        records.extend(recs.into_iter().map(|(_, r)| r));
    }
    let settings = ReportSettings {
        thresholds: cfg.thresholds.clone(),
        ttest: cfg.ttest,
        average: cfg.average,
        splits: splits.to_vec(),
    };
    let bundle = build_report(&records, &settings);
    write_json_pretty(&out.join("report.json"), &bundle)?;
    write_text(&out.join("report.md"), &render_markdown(&bundle))?;
    let plots = out.join("plots");
    write_text(&plots.join("category_distribution.csv"), &distribution_csv(&bundle))?;
    write_text(&plots.join("threshold_curve.csv"), &threshold_csv(&bundle))?;
    write_text(&plots.join("pss_by_category.csv"), &pss_csv(&bundle))?;
    errs.extend(bundle.issues.iter().map(|m| DataError { source: None, line: None, scene_id: None, message: m.clone() }));
    Ok((bundle, errs))
}

/// Run the built-in mock model over a tasks file.
pub fn mock(tasks: &Path, scenes: &Path, mcfg: &MockConfig, out_file: &Path) -> Result<Outcome> {
    let (tasks_in, bad) = read_jsonl::<TaskRecord>(tasks)?;
    let mut errs: Outcome = bad.into_iter().map(|e| DataError::at(tasks, e.line, e.message)).collect();
    let mut index = SceneIndex::new(scenes);
    let mut preds = Vec::with_capacity(tasks_in.len());
    for (line, t) in tasks_in {
        match index.get(&t.scene_id) {
            Ok(m) => preds.push(predict(&t, m, mcfg)),
            Err(msg) => errs.push(DataError::at(tasks, line, msg).scene(&t.scene_id)),
        }
    }
    write_jsonl(out_file, &preds)?;
    Ok(errs)
}
