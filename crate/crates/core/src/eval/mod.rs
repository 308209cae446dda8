//! Accuracy, confusion matrices, code-to-class matching and exports.

pub mod export;
pub mod matching;

use std::ops::AddAssign;

use ndarray::Array2;
use serde::Serialize;

pub use export::{
    export_curves, export_sequences, smoothed_abs_wasserstein, time_to_level, window_median, CurveRun, CurveSet,
    SequenceRecord, BONES,
};
pub use matching::{hungarian_max, map_code_to_class, CodeMapping, Remapped};

use crate::baselines::Classifier;
use crate::data::SkeletonSequence;
use crate::{Error, Result};

/// `counts[[true, predicted]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: Array2::zeros((n_classes, n_classes)),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.nrows()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[[truth, predicted]] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts.diag().sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    /// Per true class; `None` for classes without samples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .outer_iter()
            .enumerate()
            .map(|(i, row)| {
                let n = row.sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect()
    }

    /// Writes the matrix as CSV, one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.counts.outer_iter() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Whether row and column `class` hold no samples.
    pub fn is_class_empty(&self, class: usize) -> bool {
        self.counts.row(class).sum() == 0 && self.counts.column(class).sum() == 0
    }
}

impl AddAssign<&ConfusionMatrix> for ConfusionMatrix {
    fn add_assign(&mut self, rhs: &ConfusionMatrix) {
        self.counts += &rhs.counts;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub label_fraction: f64,
    pub model_tag: String,
    pub n_samples: usize,
    /// Non-fatal findings, e.g. samples in classes expected to be empty.
    pub warnings: Vec<String>,
}

/// Options of [`evaluate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalOptions {
    pub n_classes: usize,
    pub label_fraction: f64,
    pub model_tag: String,
    /// Classes that filtering should have removed (multi-subject actions);
    /// non-empty rows or columns produce a warning.
    pub expect_empty: Vec<usize>,
}

/// Classifies every test sequence and tallies the results.
pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    test: &[SkeletonSequence],
    opts: &EvalOptions,
) -> Result<(EvalReport, ConfusionMatrix)> {
    if test.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty test set".into()));
    }
    let mut cm = ConfusionMatrix::new(opts.n_classes);
    for (i, s) in test.iter().enumerate() {
        let truth = s
            .label
            .ok_or_else(|| Error::Data(format!("test sequence {i} has no label")))?;
        if truth >= opts.n_classes {
            return Err(Error::Data(format!("test label {truth} outside 0..{}", opts.n_classes)));
        }
        if s.is_empty() {
            return Err(Error::EmptySequence(format!("test sequence {i}")));
        }
        let (pred, _) = model.classify(s.to_matrix().view());
        if pred >= opts.n_classes {
            return Err(Error::Argument(format!(
                "model predicts class {pred}, outside 0..{}",
                opts.n_classes
            )));
        }
        cm.record(truth, pred);
    }
    let warnings = opts
        .expect_empty
        .iter()
        .filter(|&&c| c < opts.n_classes && !cm.is_class_empty(c))
        .map(|c| format!("class {c} was expected to be filtered out but has samples or predictions"))
        .collect();
    let report = EvalReport {
        accuracy: cm.accuracy(),
        per_class_accuracy: cm.per_class_accuracy(),
        label_fraction: opts.label_fraction,
        model_tag: opts.model_tag.clone(),
        n_samples: test.len(),
        warnings,
    };
    Ok((report, cm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array3, ArrayView2};

    /// Predicts the class stored in the first coordinate.
    struct Oracle(usize);
    impl Classifier for Oracle {
        fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
            let mut l = Array1::zeros(self.0);
            l[x[[0, 0]] as usize] = 1.0;
            l
        }
    }

    fn seq(label: usize, predicted: usize) -> SkeletonSequence {
        let mut frames = Array3::zeros((2, 25, 3));
        frames[[0, 0, 0]] = predicted as f32;
        SkeletonSequence {
            frames,
            label: Some(label),
            subject_id: 1,
            labeled: true,
        }
    }

    fn opts(n: usize) -> EvalOptions {
        EvalOptions {
            n_classes: n,
            label_fraction: 1.0,
            model_tag: "oracle".into(),
            expect_empty: vec![],
        }
    }

    #[test]
    fn hand_counted_accuracy() {
        let test = [seq(0, 0), seq(0, 1), seq(1, 1), seq(2, 2), seq(2, 0)];
        let (report, cm) = evaluate(&Oracle(3), &test, &opts(3)).unwrap();
        assert_eq!(cm.total(), 5);
        assert_eq!(cm.trace(), 3);
        assert!((report.accuracy - 0.6).abs() < 1e-12);
        assert_eq!(report.per_class_accuracy, vec![Some(0.5), Some(1.0), Some(0.5)]);
        assert_eq!(cm.counts.row(0).sum(), 2);
    }

    #[test]
    fn perfect_predictions_diagonal() {
        let test = [seq(0, 0), seq(1, 1), seq(1, 1)];
        let (report, cm) = evaluate(&Oracle(2), &test, &opts(2)).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(cm.counts, ndarray::array![[1, 0], [0, 2]]);
    }

    #[test]
    fn empty_test_set_is_argument_error() {
        assert!(matches!(evaluate(&Oracle(2), &[], &opts(2)), Err(Error::Argument(_))));
    }

    #[test]
    fn additivity_and_warning() {
        let a = [seq(0, 0), seq(1, 0)];
        let b = [seq(1, 1), seq(2, 2)];
        let all: Vec<_> = a.iter().chain(&b).cloned().collect();
        let mut o = opts(4);
        o.expect_empty = vec![2, 3];
        let (_, ca) = evaluate(&Oracle(4), &a, &o).unwrap();
        let (_, cb) = evaluate(&Oracle(4), &b, &o).unwrap();
        let (report, call) = evaluate(&Oracle(4), &all, &o).unwrap();
        let mut sum = ca.clone();
        sum += &cb;
        assert_eq!(sum, call);
        assert_eq!(report.warnings.len(), 1);
        assert!(call.is_class_empty(3));
    }
}
