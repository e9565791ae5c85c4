//! Report tables: aggregation into a [`ReportBundle`] and rendering to
//! Markdown and CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use glens_core::record::{EvalRecord, Pass};
use glens_core::stats::{
    accuracy_table, category_distribution, group_stats, pss_by_group, t_test, AverageMode, CategoryDistribution,
    GroupStats, ReportGroup, SplitAccuracy, TTestKind, TTestResult,
};
use glens_core::taxonomy::{threshold_curve, ThresholdCurve};
use glens_core::ResponseCategory;
use serde::Serialize;

use crate::io::round_sig9;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// The three comparisons of the significance table, in column order.
pub const COMPARISONS: [(ReportGroup, ReportGroup); 3] = [
    (ReportGroup::Biased, ReportGroup::Correct),
    (ReportGroup::Other, ReportGroup::Correct),
    (ReportGroup::Biased, ReportGroup::Other),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSettings {
    pub thresholds: Vec<f64>,
    pub ttest: TTestKind,
    pub average: AverageMode,
    /// Accuracy-table columns; the sorted set of observed splits when empty.
    pub splits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDistribution {
    pub row: String,
    #[serde(flatten)]
    pub distribution: CategoryDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCurve {
    pub row: String,
    #[serde(flatten)]
    pub curve: ThresholdCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowGroups {
    pub row: String,
    /// Keyed by group name; empty groups are absent.
    pub groups: BTreeMap<ReportGroup, GroupStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: ReportGroup,
    pub b: ReportGroup,
    pub result: Option<TTestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSignificance {
    pub row: String,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowAccuracy {
    pub row: String,
    pub splits: Vec<SplitAccuracy>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowPerplexity {
    pub row: String,
    pub categories: BTreeMap<ResponseCategory, GroupStats>,
}

/// Every table of the report, at full precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub records: usize,
    pub settings: ReportSettings,
    pub rows: Vec<String>,
    pub category_distribution: Vec<RowDistribution>,
    pub threshold_curve: Vec<RowCurve>,
    pub pss: Vec<RowGroups>,
    pub significance: Vec<RowSignificance>,
    pub accuracy: Vec<RowAccuracy>,
    pub perplexity: Vec<RowPerplexity>,
    /// Tables or rows that could not be computed.
    pub issues: Vec<String>,
}

/// Table row name: the model id, with `+ Crop` for the refined pass.
pub fn row_label(model_id: &str, pass: Pass) -> String {
    match pass {
        Pass::Full => model_id.to_string(),
        Pass::Crop => format!("{model_id} + Crop"),
    }
}

fn by_row(records: &[EvalRecord]) -> BTreeMap<(String, Pass), Vec<EvalRecord>> {
    let mut rows: BTreeMap<(String, Pass), Vec<EvalRecord>> = BTreeMap::new();
    for r in records {
        rows.entry((r.model_id.clone(), r.pass)).or_default().push(r.clone());
    }
    rows
}

pub fn build_report(records: &[EvalRecord], settings: &ReportSettings) -> ReportBundle {
    let mut settings = settings.clone();
    if settings.splits.is_empty() {
        let mut s: Vec<String> = records.iter().map(|r| r.split.clone()).collect();
        s.sort();
        s.dedup();
        settings.splits = s;
    }
    let mut bundle = ReportBundle {
        schema_version: REPORT_SCHEMA_VERSION,
        records: records.len(),
        settings: settings.clone(),
        rows: Vec::new(),
        category_distribution: Vec::new(),
        threshold_curve: Vec::new(),
        pss: Vec::new(),
        significance: Vec::new(),
        accuracy: Vec::new(),
        perplexity: Vec::new(),
        issues: Vec::new(),
    };

    for ((model, pass), rows) in by_row(records) {
        let label = row_label(&model, pass);
        bundle.rows.push(label.clone());

        if let Some(d) = category_distribution(&rows).remove(&model) {
            bundle.category_distribution.push(RowDistribution { row: label.clone(), distribution: d });
        }

        let pairs: Vec<(bool, f64)> =
            rows.iter().map(|r| (r.category == ResponseCategory::Correct, r.distance_to_target)).collect();
        match threshold_curve(&pairs, &settings.thresholds) {
            Ok(curve) => bundle.threshold_curve.push(RowCurve { row: label.clone(), curve }),
            Err(e) => bundle.issues.push(format!("{label}: threshold curve: {e}")),
        }

        let scores = pss_by_group(&rows);
        let groups = scores.iter().filter_map(|(g, v)| group_stats(v).map(|s| (*g, s))).collect();
        bundle.pss.push(RowGroups { row: label.clone(), groups });

        let comparisons = COMPARISONS
            .iter()
            .map(|&(a, b)| {
                let empty = Vec::new();
                let (va, vb) = (scores.get(&a).unwrap_or(&empty), scores.get(&b).unwrap_or(&empty));
                match t_test(va, vb, settings.ttest) {
                    Ok(r) => Comparison { a, b, result: Some(r), note: None },
                    Err(e) => Comparison { a, b, result: None, note: Some(e.to_string()) },
                }
            })
            .collect();
        bundle.significance.push(RowSignificance { row: label.clone(), comparisons });

        if !settings.splits.is_empty() {
            match accuracy_table(&rows, &settings.splits, settings.average) {
                Ok(mut t) => {
                    let t = t.remove(0);
                    bundle.accuracy.push(RowAccuracy { row: label.clone(), splits: t.splits, average: t.average });
                }
                Err(e) => bundle.issues.push(format!("{label}: accuracy: {e}")),
            }
        }

        let mut ppl: BTreeMap<ResponseCategory, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            if let Some(p) = r.perplexity {
                ppl.entry(r.category).or_default().push(p);
            }
        }
        let categories = ppl.into_iter().filter_map(|(c, v)| group_stats(&v).map(|s| (c, s))).collect();
        bundle.perplexity.push(RowPerplexity { row: label, categories });
    }
    bundle
}

/// Percentage with one decimal, from a value already in percent.
pub fn fmt_percent(v: f64) -> String {
    format!("{v:.1}")
}

/// `0.59 ± 0.33`; the spread is dropped for a single value.
pub fn fmt_mean_std(g: &GroupStats) -> String {
    match g.std {
        Some(s) => format!("{:.2} ± {:.2}", g.mean, s),
        None => format!("{:.2}", g.mean),
    }
}

pub fn fmt_mark(significant: bool) -> &'static str {
    if significant {
        "✓"
    } else {
        "×"
    }
}

pub fn fmt_p(p: f64) -> String {
    if p >= 1e-3 {
        format!("{p:.3}")
    } else {
        format!("{p:.1e}")
    }
}

fn fmt_threshold(t: f64) -> String {
    format!("{t:.2}")
}

const ABSENT: &str = "-";

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let line = |cells: &[String]| format!("| {} |", cells.join(" | "));
    writeln!(out, "{}", line(header)).unwrap();
    let rule: Vec<String> = header.iter().enumerate().map(|(i, _)| if i == 0 { "---".into() } else { "---:".into() }).collect();
    writeln!(out, "{}", line(&rule)).unwrap();
    for r in rows {
        writeln!(out, "{}", line(r)).unwrap();
    }
}

fn header(first: &str, rest: impl IntoIterator<Item = String>) -> Vec<String> {
    std::iter::once(first.to_string()).chain(rest).collect()
}

pub fn render_distribution(rows: &[RowDistribution]) -> String {
    let mut out = String::new();
    let head = header("Model", ResponseCategory::ALL.iter().map(|c| category_title(*c).to_string()).chain(["n".into()]));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.clone()];
            cells.extend(r.distribution.proportions.iter().map(|p| fmt_percent(100.0 * p)));
            cells.push(r.distribution.total.to_string());
            cells
        })
        .collect();
    table(&mut out, &head, &body);
    out
}

pub fn render_threshold_curve(rows: &[RowCurve]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else { return out };
    let head = header(
        "Model",
        std::iter::once("Correct response".to_string())
            .chain(first.curve.thresholds.iter().map(|t| format!("Distance < {}", fmt_threshold(*t)))),
    );
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.clone(), fmt_percent(100.0 * r.curve.correct)];
            cells.extend(r.curve.within.iter().map(|w| fmt_percent(100.0 * w)));
            cells
        })
        .collect();
    table(&mut out, &head, &body);
    out
}

pub fn render_pss(rows: &[RowGroups]) -> String {
    let mut out = String::new();
    let head = header("Model", ReportGroup::ALL.iter().map(|g| g.label().to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.clone()];
            cells.extend(ReportGroup::ALL.iter().map(|g| r.groups.get(g).map_or(ABSENT.into(), fmt_mean_std)));
            cells
        })
        .collect();
    table(&mut out, &head, &body);
    out
}

fn group_short(g: ReportGroup) -> &'static str {
    match g {
        ReportGroup::Correct => "Correct",
        ReportGroup::Biased => "Biased",
        ReportGroup::Other => "Other",
    }
}

pub fn render_significance(rows: &[RowSignificance]) -> String {
    let mut out = String::new();
    let head = header("Model", COMPARISONS.iter().map(|(a, b)| format!("{} vs. {}", group_short(*a), group_short(*b))));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.clone()];
            cells.extend(r.comparisons.iter().map(|c| match &c.result {
                Some(t) => format!("{} (p = {})", fmt_mark(t.significant), fmt_p(t.p)),
                None => ABSENT.to_string(),
            }));
            cells
        })
        .collect();
    table(&mut out, &head, &body);
    out
}

pub fn render_accuracy(rows: &[RowAccuracy]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else { return out };
    let head = header("Model", first.splits.iter().map(|s| s.split.clone()).chain(["Avg.".to_string()]));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.clone()];
            cells.extend(r.splits.iter().map(|s| fmt_percent(s.accuracy)));
            cells.push(fmt_percent(r.average));
            cells
        })
        .collect();
    table(&mut out, &head, &body);
    out
}

fn category_title(c: ResponseCategory) -> &'static str {
    match c {
        ResponseCategory::Correct => "Correct",
        ResponseCategory::Biased => "Biased",
        ResponseCategory::Misleading => "Misleading",
        ResponseCategory::Confusion => "Confusion",
    }
}

pub fn render_perplexity(rows: &[RowPerplexity]) -> String {
    let mut out = String::new();
    let head = header("Model", ResponseCategory::ALL.iter().map(|c| category_title(*c).to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.row.clone()];
            cells.extend(
                ResponseCategory::ALL.iter().map(|c| r.categories.get(c).map_or(ABSENT.into(), |g| format!("{:.2}", g.mean))),
            );
            cells
        })
        .collect();
    table(&mut out, &head, &body);
    out
}

pub fn render_markdown(b: &ReportBundle) -> String {
    let mut out = String::new();
    writeln!(out, "# Localization hallucination report\n").unwrap();
    writeln!(out, "Records: {}. Rows: {}.\n", b.records, b.rows.len()).unwrap();

    writeln!(out, "## Response types (%)\n").unwrap();
    out.push_str(&render_distribution(&b.category_distribution));

    writeln!(out, "\n## Distance to target (%)\n").unwrap();
    out.push_str(&render_threshold_curve(&b.threshold_curve));

    writeln!(out, "\n## Peak Sharpness Score (mean ± std)\n").unwrap();
    out.push_str(&render_pss(&b.pss));

    let test = match b.settings.ttest {
        TTestKind::Welch => "Welch",
        TTestKind::Student => "Student",
    };
    writeln!(out, "\n## PSS significance ({test} t-test, p < 0.05)\n").unwrap();
    out.push_str(&render_significance(&b.significance));

    if !b.accuracy.is_empty() {
        let avg = match b.settings.average {
            AverageMode::Unweighted => "unweighted",
            AverageMode::Weighted => "weighted by split size",
        };
        writeln!(out, "\n## Accuracy by split (%, Avg. {avg})\n").unwrap();
        out.push_str(&render_accuracy(&b.accuracy));
    }

    if b.perplexity.iter().any(|r| !r.categories.is_empty()) {
        writeln!(out, "\n## Perplexity (mean)\n").unwrap();
        out.push_str(&render_perplexity(&b.perplexity));
    }

    if !b.issues.is_empty() {
        writeln!(out, "\n## Issues\n").unwrap();
        for i in &b.issues {
            writeln!(out, "- {i}").unwrap();
        }
    }
    out
}

fn csv_float(v: f64) -> String {
    round_sig9(v).to_string()
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn distribution_csv(b: &ReportBundle) -> String {
    let mut rows = Vec::new();
    for r in &b.category_distribution {
        for c in ResponseCategory::ALL {
            let i = c.index();
            rows.push(vec![
                r.row.clone(),
                c.as_str().to_string(),
                r.distribution.counts[i].to_string(),
                csv_float(r.distribution.proportions[i]),
            ]);
        }
    }
    csv_string(&["model", "category", "count", "proportion"], rows)
}

pub fn threshold_csv(b: &ReportBundle) -> String {
    let mut rows = Vec::new();
    for r in &b.threshold_curve {
        rows.push(vec![r.row.clone(), "contained".into(), csv_float(r.curve.correct)]);
        for (t, w) in r.curve.thresholds.iter().zip(&r.curve.within) {
            rows.push(vec![r.row.clone(), csv_float(*t), csv_float(*w)]);
        }
    }
    csv_string(&["model", "threshold", "proportion"], rows)
}

pub fn pss_csv(b: &ReportBundle) -> String {
    let mut rows = Vec::new();
    for r in &b.pss {
        for (g, s) in &r.groups {
            rows.push(vec![
                r.row.clone(),
                group_short(*g).to_lowercase(),
                s.n.to_string(),
                csv_float(s.mean),
                s.std.map(csv_float).unwrap_or_default(),
            ]);
        }
    }
    csv_string(&["model", "group", "n", "mean", "std"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use glens_core::record::{PssSummary, EVAL_SCHEMA_VERSION};
    use glens_core::Point;

    fn rec(model: &str, pass: Pass, cat: ResponseCategory, d: f64, score: f64) -> EvalRecord {
        EvalRecord {
            schema_version: EVAL_SCHEMA_VERSION,
            scene_id: "s".into(),
            model_id: model.into(),
            split: "synthetic".into(),
            pass,
            pred: Point::new(0.5, 0.5).unwrap(),
            category: cat,
            distance_to_target: d,
            nearest_distractor_id: None,
            nearest_distractor_distance: None,
            pss: Some(PssSummary { score, x: score, y: score }),
            perplexity: Some(1.0 + score),
        }
    }

    fn settings() -> ReportSettings {
        ReportSettings {
            thresholds: vec![0.05, 0.1],
            ttest: TTestKind::Welch,
            average: AverageMode::Unweighted,
            splits: Vec::new(),
        }
    }

    #[test]
    fn rows_are_split_by_pass() {
        let recs = vec![
            rec("m", Pass::Crop, ResponseCategory::Correct, 0.0, 0.9),
            rec("m", Pass::Full, ResponseCategory::Biased, 0.03, 0.5),
            rec("m", Pass::Full, ResponseCategory::Correct, 0.0, 0.7),
        ];
        let b = build_report(&recs, &settings());
        assert_eq!(b.rows, vec!["m".to_string(), "m + Crop".to_string()]);
        assert_eq!(b.accuracy[0].average, 50.0);
        assert_eq!(b.accuracy[1].average, 100.0);
        assert_eq!(b.threshold_curve[0].curve.within, vec![1.0, 1.0]);
    }

    #[test]
    fn absent_groups_render_as_dash() {
        let recs = vec![rec("m", Pass::Full, ResponseCategory::Correct, 0.0, 0.7)];
        let b = build_report(&recs, &settings());
        let md = render_pss(&b.pss);
        assert!(md.contains("| m | 0.70 | - | - |"), "{md}");
        assert!(b.significance[0].comparisons.iter().all(|c| c.result.is_none()));
    }

    #[test]
    fn mean_std_format() {
        let g = GroupStats { n: 3, mean: 0.594, std: Some(0.3349) };
        assert_eq!(fmt_mean_std(&g), "0.59 ± 0.33");
        assert_eq!(fmt_percent(75.08333), "75.1");
        assert_eq!(fmt_p(0.04123), "0.041");
        assert_eq!(fmt_p(0.00001234), "1.2e-5");
    }

    #[test]
    fn csv_has_one_line_per_category() {
        let recs = vec![rec("m", Pass::Full, ResponseCategory::Correct, 0.0, 0.7)];
        let b = build_report(&recs, &settings());
        let csv = distribution_csv(&b);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("m,correct,1,1\n"));
    }
}
