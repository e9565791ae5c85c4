//! Aggregations behind the report tables: grouped score statistics,
//! two-sample t-tests, category distributions and split accuracies.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::record::{EvalRecord, Pass};
use crate::taxonomy::ResponseCategory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("each sample needs at least 2 values (got {a} and {b})")]
    SampleTooSmall { a: usize, b: usize },
    #[error("both samples have zero variance")]
    DegenerateSample,
    #[error("no records for split {split:?} in row {model_id} ({pass})")]
    MissingSplit { model_id: String, pass: &'static str, split: String },
    #[error("no records")]
    EmptyInput,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if math::abs(self.sum) >= math::abs(v) {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn compensated_mean(values: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add(v));
    s.value() / values.len() as f64
}

/// Sample variance with the `n - 1` denominator.
fn sample_variance(values: &[f64], mean: f64) -> f64 {
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add((v - mean) * (v - mean)));
    s.value() / (values.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub std: Option<f64>,
}

pub fn group_stats(values: &[f64]) -> Option<GroupStats> {
    if values.is_empty() {
        return None;
    }
    let mean = compensated_mean(values);
    let std = (values.len() >= 2).then(|| math::sqrt(sample_variance(values, mean)));
    Some(GroupStats { n: values.len(), mean, std })
}

/// Response groups used when only the target box is trustworthy: misleading
/// and confusion responses are pooled as "other".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportGroup {
    Correct,
    Biased,
    Other,
}

impl ReportGroup {
    pub const ALL: [ReportGroup; 3] = [ReportGroup::Correct, ReportGroup::Biased, ReportGroup::Other];

    pub fn label(&self) -> &'static str {
        match self {
            ReportGroup::Correct => "Correct",
            ReportGroup::Biased => "Biased Hallucination",
            ReportGroup::Other => "Other Response",
        }
    }
}

impl From<ResponseCategory> for ReportGroup {
    fn from(c: ResponseCategory) -> Self {
        match c {
            ResponseCategory::Correct => ReportGroup::Correct,
            ResponseCategory::Biased => ReportGroup::Biased,
            ResponseCategory::Misleading | ResponseCategory::Confusion => ReportGroup::Other,
        }
    }
}

/// Record-level scores per report group. Records without a score are skipped
/// and empty groups are absent from the map.
pub fn pss_by_group<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> BTreeMap<ReportGroup, Vec<f64>> {
    let mut groups: BTreeMap<ReportGroup, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(p) = &r.pss {
            groups.entry(r.category.into()).or_default().push(p.score);
        }
    }
    groups
}

pub fn aggregate_pss<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> BTreeMap<ReportGroup, GroupStats> {
    pss_by_group(records)
        .into_iter()
        .filter_map(|(g, v)| group_stats(&v).map(|s| (g, s)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n_a + n_b - 2` degrees of freedom.
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub dof: f64,
    /// Two-sided.
    pub p: f64,
    pub significant: bool,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    t_test(a, b, TTestKind::Welch)
}

pub fn t_test(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::SampleTooSmall { a: a.len(), b: b.len() });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (compensated_mean(a), compensated_mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    let (t, dof) = match kind {
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let dof = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((ma - mb) / math::sqrt(se2), dof)
        }
        TTestKind::Student => {
            let dof = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
            ((ma - mb) / math::sqrt(pooled * (1.0 / na + 1.0 / nb)), dof)
        }
    };
    let p = t_two_sided_p(t, dof);
    Ok(TTestResult { t, dof, p, significant: p < SIGNIFICANCE_LEVEL })
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    let t2 = t * t;
    // x and 1 - x computed separately to avoid cancellation
    let x = dof / (dof + t2);
    let y = t2 / (dof + t2);
    inc_beta_split(0.5 * dof, 0.5, x, y).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    inc_beta_split(a, b, x, 1.0 - x)
}

fn inc_beta_split(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = math::ln_gamma(a + b) - math::ln_gamma(a) - math::ln_gamma(b) + a * math::ln(x) + b * math::ln(y);
    let front = math::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, y) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if math::abs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if math::abs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub total: usize,
    /// Indexed by [`ResponseCategory::index`].
    pub counts: [usize; 4],
    pub proportions: [f64; 4],
}

/// Response-type proportions per model.
pub fn category_distribution<'a>(
    records: impl IntoIterator<Item = &'a EvalRecord>,
) -> BTreeMap<String, CategoryDistribution> {
    let mut counts: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for r in records {
        counts.entry(r.model_id.clone()).or_default()[r.category.index()] += 1;
    }
    counts
        .into_iter()
        .map(|(model, c)| {
            let total: usize = c.iter().sum();
            let proportions = c.map(|k| k as f64 / total as f64);
            (model, CategoryDistribution { total, counts: c, proportions })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMode {
    /// Plain mean of the per-split percentages.
    #[default]
    Unweighted,
    /// Mean weighted by per-split record counts.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAccuracy {
    pub split: String,
    pub n: usize,
    pub correct: usize,
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model_id: String,
    pub pass: Pass,
    pub splits: Vec<SplitAccuracy>,
    pub average: f64,
}

/// Average of per-split percentages.
pub fn average_accuracy(splits: &[SplitAccuracy], mode: AverageMode) -> f64 {
    let mut s = CompensatedSum::default();
    match mode {
        AverageMode::Unweighted => {
            splits.iter().for_each(|sa| s.add(sa.accuracy));
            s.value() / splits.len() as f64
        }
        AverageMode::Weighted => {
            let n: usize = splits.iter().map(|sa| sa.n).sum();
            splits.iter().for_each(|sa| s.add(sa.accuracy * sa.n as f64));
            s.value() / n as f64
        }
    }
}

/// Accuracy (fraction Correct, as a percentage) per `(model, pass)` row and
/// requested split. Rows are ordered by model id, full pass before crop.
pub fn accuracy_table<'a>(
    records: impl IntoIterator<Item = &'a EvalRecord>,
    splits: &[String],
    mode: AverageMode,
) -> Result<Vec<AccuracyRow>, StatsError> {
    // (records, correct) per split, per row
    type Tally<'s> = BTreeMap<&'s str, (usize, usize)>;
    let mut tallies: BTreeMap<(String, Pass), Tally> = BTreeMap::new();
    let mut any = false;
    for r in records {
        any = true;
        let t = tallies.entry((r.model_id.clone(), r.pass)).or_default().entry(r.split.as_str()).or_default();
        t.0 += 1;
        if r.category == ResponseCategory::Correct {
            t.1 += 1;
        }
    }
    if !any || splits.is_empty() {
        return Err(StatsError::EmptyInput);
    }

    let mut rows = Vec::with_capacity(tallies.len());
    for ((model_id, pass), by_split) in tallies {
        let mut cols = Vec::with_capacity(splits.len());
        for split in splits {
            let &(n, correct) = by_split.get(split.as_str()).ok_or_else(|| StatsError::MissingSplit {
                model_id: model_id.clone(),
                pass: pass.as_str(),
                split: split.clone(),
            })?;
            cols.push(SplitAccuracy { split: split.clone(), n, correct, accuracy: 100.0 * correct as f64 / n as f64 });
        }
        let average = average_accuracy(&cols, mode);
        rows.push(AccuracyRow { model_id, pass, splits: cols, average });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::record::{PssSummary, EVAL_SCHEMA_VERSION};
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    fn rec(model: &str, split: &str, pass: Pass, cat: ResponseCategory, score: Option<f64>) -> EvalRecord {
        EvalRecord {
            schema_version: EVAL_SCHEMA_VERSION,
            scene_id: "s".to_string(),
            model_id: model.to_string(),
            split: split.to_string(),
            pass,
            pred: Point::new(0.5, 0.5).unwrap(),
            category: cat,
            distance_to_target: 0.0,
            nearest_distractor_id: None,
            nearest_distractor_distance: None,
            pss: score.map(|s| PssSummary { score: s, x: s, y: s }),
            perplexity: None,
        }
    }

    fn reference_p(t: f64, dof: f64) -> f64 {
        2.0 * StudentsT::new(0.0, 1.0, dof).unwrap().sf(t.abs())
    }

    #[test]
    fn group_stats_examples() {
        let g = group_stats(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((g.mean, g.std), (0.5, Some(0.0)));
        let g = group_stats(&[0.2, 0.4, 0.6]).unwrap();
        assert!((g.mean - 0.4).abs() < 1e-15);
        assert!((g.std.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(group_stats(&[0.3]).unwrap().std, None);
        assert!(group_stats(&[]).is_none());
    }

    #[test]
    fn misleading_and_confusion_pool_into_other() {
        use ResponseCategory::*;
        let recs = vec![
            rec("m", "a", Pass::Full, Correct, Some(0.9)),
            rec("m", "a", Pass::Full, Misleading, Some(0.2)),
            rec("m", "a", Pass::Full, Confusion, Some(0.4)),
            rec("m", "a", Pass::Full, Confusion, None),
        ];
        let agg = aggregate_pss(&recs);
        assert!(!agg.contains_key(&ReportGroup::Biased));
        let other = agg[&ReportGroup::Other];
        assert_eq!(other.n, 2);
        assert!((other.mean - 0.3).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [1.0, 2.0, 4.0, 7.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn welch_shifted_sequences() {
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        // means differ by 1 with standard error 1; dof = 8
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.dof - 8.0).abs() < 1e-12);
        assert!((r.p - reference_p(r.t, r.dof)).abs() < 1e-9);
    }

    #[test]
    fn welch_symmetry_and_errors() {
        let a = [0.1, 0.5, 0.3, 0.9];
        let b = [0.2, 0.25, 0.3];
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
        assert!(matches!(welch_t_test(&[1.0], &b), Err(StatsError::SampleTooSmall { .. })));
        assert!(matches!(welch_t_test(&[1.0, 1.0], &[2.0, 2.0]), Err(StatsError::DegenerateSample)));
    }

    #[test]
    fn student_pooled_matches_reference() {
        let a = [3.1, 2.4, 5.5, 4.0, 3.3];
        let b = [1.0, 2.2, 1.7];
        let r = t_test(&a, &b, TTestKind::Student).unwrap();
        assert_eq!(r.dof, 6.0);
        assert!((r.p - reference_p(r.t, r.dof)).abs() < 1e-10);
    }

    #[test]
    fn incomplete_beta_known_values() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a
        for &x in &[0.1, 0.5, 0.93] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.0, 1.0, x) - x * x * x).abs() < 1e-14);
        }
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn t_tail_against_reference_grid() {
        for &dof in &[1.0, 2.5, 7.0, 30.0, 250.0] {
            for &t in &[0.01, 0.5, 1.0, 2.0, 4.5, 12.0] {
                let got = t_two_sided_p(t, dof);
                assert!((got - reference_p(t, dof)).abs() < 1e-10, "t={t} dof={dof}");
            }
        }
    }

    #[test]
    fn category_distribution_counts() {
        use ResponseCategory::*;
        let single = category_distribution(&[rec("m", "a", Pass::Full, Correct, None)]);
        assert_eq!(single["m"].proportions, [1.0, 0.0, 0.0, 0.0]);
        let recs = [Correct, Correct, Biased, Confusion].map(|c| rec("m", "a", Pass::Full, c, None));
        assert_eq!(category_distribution(&recs)["m"].proportions, [0.5, 0.25, 0.0, 0.25]);
    }

    #[test]
    fn accuracy_examples() {
        use ResponseCategory::*;
        let splits = vec!["a".to_string()];
        let all = [Correct; 3].map(|c| rec("m", "a", Pass::Full, c, None));
        assert_eq!(accuracy_table(&all, &splits, AverageMode::Unweighted).unwrap()[0].average, 100.0);
        let three_of_four = [Correct, Correct, Correct, Biased].map(|c| rec("m", "a", Pass::Full, c, None));
        let row = &accuracy_table(&three_of_four, &splits, AverageMode::Unweighted).unwrap()[0];
        assert_eq!(row.splits[0].accuracy, 75.0);
    }

    #[test]
    fn accuracy_missing_split_and_ordering() {
        use ResponseCategory::*;
        let recs = vec![
            rec("m", "a", Pass::Crop, Correct, None),
            rec("m", "a", Pass::Full, Biased, None),
            rec("m", "b", Pass::Full, Correct, None),
        ];
        let err = accuracy_table(&recs, &["a".to_string(), "b".to_string()], AverageMode::Unweighted).unwrap_err();
        assert!(matches!(err, StatsError::MissingSplit { ref split, .. } if split == "b"));
        let rows = accuracy_table(&recs, &["a".to_string()], AverageMode::Unweighted).unwrap();
        assert_eq!(rows[0].pass, Pass::Full);
        assert_eq!(rows[1].pass, Pass::Crop);
    }

    #[test]
    fn weighted_average_uses_counts() {
        let splits = vec![
            SplitAccuracy { split: "a".to_string(), n: 1, correct: 1, accuracy: 100.0 },
            SplitAccuracy { split: "b".to_string(), n: 3, correct: 0, accuracy: 0.0 },
        ];
        assert_eq!(average_accuracy(&splits, AverageMode::Unweighted), 50.0);
        assert_eq!(average_accuracy(&splits, AverageMode::Weighted), 25.0);
    }

    proptest! {
        #[test]
        fn aggregation_is_order_invariant(scores in proptest::collection::vec((0usize..4, 0.0..1.0f64), 1..60), rot in 0usize..60) {
            let recs: Vec<EvalRecord> = scores
                .iter()
                .map(|&(c, s)| rec("m", "a", Pass::Full, ResponseCategory::ALL[c], Some(s)))
                .collect();
            let mut shuffled = recs.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = aggregate_pss(&recs);
            let b = aggregate_pss(&shuffled);
            prop_assert_eq!(a.len(), b.len());
            for (g, s) in &a {
                let t = &b[g];
                prop_assert_eq!(s.n, t.n);
                prop_assert!((s.mean - t.mean).abs() < 1e-12);
                prop_assert!((s.std.unwrap_or(0.0) - t.std.unwrap_or(0.0)).abs() < 1e-12);
            }
            prop_assert_eq!(category_distribution(&recs), category_distribution(&shuffled));
        }

        #[test]
        fn pooling_is_associative(scores in proptest::collection::vec((0usize..4, 0.0..1.0f64), 1..60)) {
            let recs: Vec<EvalRecord> = scores
                .iter()
                .map(|&(c, s)| rec("m", "a", Pass::Full, ResponseCategory::ALL[c], Some(s)))
                .collect();
            // relabel misleading as confusion up front: the pooled group must not change
            let merged: Vec<EvalRecord> = recs
                .iter()
                .cloned()
                .map(|mut r| {
                    if r.category == ResponseCategory::Misleading {
                        r.category = ResponseCategory::Confusion;
                    }
                    r
                })
                .collect();
            prop_assert_eq!(aggregate_pss(&recs), aggregate_pss(&merged));
        }

        #[test]
        fn distribution_sums_to_one(cats in proptest::collection::vec(0usize..4, 1..100)) {
            let recs: Vec<EvalRecord> = cats.iter().map(|&c| rec("m", "a", Pass::Full, ResponseCategory::ALL[c], None)).collect();
            let d = &category_distribution(&recs)["m"];
            let sum: f64 = d.proportions.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(d.proportions.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn compensated_merge_matches_sequential(vals in proptest::collection::vec(-1e3..1e3f64, 2..200), cut in 0usize..200) {
            let cut = cut % vals.len();
            let mut whole = CompensatedSum::default();
            vals.iter().for_each(|&v| whole.add(v));
            let (mut left, mut right) = (CompensatedSum::default(), CompensatedSum::default());
            vals[..cut].iter().for_each(|&v| left.add(v));
            vals[cut..].iter().for_each(|&v| right.add(v));
            left.merge(&right);
            prop_assert!((left.value() - whole.value()).abs() <= 1e-12 * vals.len() as f64);
        }
    }
}
