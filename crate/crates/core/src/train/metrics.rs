use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Category, Mstcn};
use crate::sim::LabeledSample;
use crate::stream::{infer_offline, SlotGrid};
use crate::{Error, Result};

/// Counts indexed `[truth][prediction]` in [`Category::ALL`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn from_pairs(predictions: &[Category], labels: &[Category]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} predictions against {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut m = Self::default();
        for (p, l) in predictions.iter().zip(labels) {
            m.add(*l, *p);
        }
        Ok(m)
    }

    pub fn add(&mut self, truth: Category, predicted: Category) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            row.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Decisions whose label is `class`.
    pub fn support(&self, class: Category) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    /// Decisions predicted as `class`.
    pub fn predicted(&self, class: Category) -> u64 {
        self.counts.iter().map(|r| r[class.index()]).sum()
    }

    pub fn true_positives(&self, class: Category) -> u64 {
        self.counts[class.index()][class.index()]
    }

    /// One-vs-rest `(precision, recall)` as fractions; `None` for an empty
    /// denominator.
    pub fn precision_recall(&self, class: Category) -> (Option<f64>, Option<f64>) {
        let tp = self.true_positives(class) as f64;
        let ratio = |d: u64| (d > 0).then(|| tp / d as f64);
        (ratio(self.predicted(class)), ratio(self.support(class)))
    }

    pub fn accuracy(&self) -> Option<f64> {
        let hits: u64 = Category::ALL.iter().map(|&c| self.true_positives(c)).sum();
        (self.total() > 0).then(|| hits as f64 / self.total() as f64)
    }
}

/// One-vs-rest precision and recall of `class`, as fractions.
pub fn precision_recall(
    predictions: &[Category],
    labels: &[Category],
    class: Category,
) -> Result<(Option<f64>, Option<f64>)> {
    Ok(ConfusionMatrix::from_pairs(predictions, labels)?.precision_recall(class))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub category: Category,
    /// Percent; `None` when no decision was predicted as this category.
    pub precision: Option<f64>,
    /// Percent; `None` when no decision carries this label.
    pub recall: Option<f64>,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub decisions: u64,
    /// Percent of decisions matching their label.
    pub accuracy: Option<f64>,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let classes = Category::ALL
            .iter()
            .map(|&c| {
                let (p, r) = confusion.precision_recall(c);
                ClassMetrics {
                    category: c,
                    precision: p.map(|v| v * 100.0),
                    recall: r.map(|v| v * 100.0),
                    support: confusion.support(c),
                }
            })
            .collect();
        Self {
            classes,
            decisions: confusion.total(),
            accuracy: confusion.accuracy().map(|v| v * 100.0),
            confusion,
        }
    }

    pub fn class(&self, category: Category) -> &ClassMetrics {
        &self.classes[category.index()]
    }

    /// Recall and precision per category, then the confusion matrix.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "");
        for c in Category::ALL {
            let _ = write!(out, "{:>12}", c.name());
        }
        out.push('\n');
        for (label, pick) in [("Rec. (%)", 0), ("Pre. (%)", 1)] {
            let _ = write!(out, "{label:<10}");
            for m in &self.classes {
                let v = if pick == 0 { m.recall } else { m.precision };
                let _ = write!(out, "{:>12}", pct(v));
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "\ndecisions: {}  accuracy (%): {}",
            self.decisions,
            pct(self.accuracy)
        );
        let _ = write!(out, "\n{:<12}", "truth\\pred");
        for c in Category::ALL {
            let _ = write!(out, "{:>8}", c.code());
        }
        out.push('\n');
        for t in Category::ALL {
            let _ = write!(out, "{:<12}", t.code());
            for p in Category::ALL {
                let _ = write!(out, "{:>8}", self.confusion.counts[t.index()][p.index()]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }
}

/// Runs sliding-window inference on every sample and scores each decision
/// against the label at its timestamp.
pub fn evaluate(
    model: &Mstcn<f32>,
    samples: &[LabeledSample],
    window_seconds: f64,
    hop_seconds: f64,
) -> Result<EvalReport> {
    let sr = model.config().sample_rate;
    let grid = SlotGrid::new(window_seconds, hop_seconds, sr)?;
    let mut confusion = ConfusionMatrix::default();
    for (i, s) in samples.iter().enumerate() {
        if s.sample_rate != sr {
            return Err(Error::SampleRate {
                expected: sr,
                found: s.sample_rate,
            });
        }
        let track = infer_offline(model, &s.audio, window_seconds, hop_seconds)?;
        for (k, d) in track.decisions.iter().enumerate() {
            let truth = s.category_at(k * grid.hop).ok_or_else(|| {
                Error::Invalid(format!("sample {i}: no label at {} s", d.timestamp))
            })?;
            confusion.add(truth, d.category);
        }
    }
    Ok(EvalReport::from_confusion(confusion))
}
