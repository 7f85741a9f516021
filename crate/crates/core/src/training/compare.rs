use super::metrics::evaluate;
use super::normalize::Normalizer;
use super::split::{select, split_dataset, DatasetSplit};
use super::trainer::{train, LossTrace, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::{FrameRecord, TargetTriple};
use crate::model::{FusedModel, Modality, ModelConfig, ModelInput};
use std::fmt::Write;

/// A model fitted on one split, with its target normalizer.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub model: FusedModel,
    pub normalizer: Normalizer,
    pub trace: LossTrace,
}

fn targets_of(records: &[&FrameRecord]) -> Result<Vec<TargetTriple>> {
    records
        .iter()
        .map(|r| {
            r.targets
                .ok_or_else(|| Error::data(format!("record {}: no targets", r.id)))
        })
        .collect()
}

/// Fits the normalizer and input scalers on the training split, then trains.
pub fn fit_model(
    records: &[FrameRecord],
    split: &DatasetSplit,
    model_cfg: &ModelConfig,
    modality: Modality,
    train_cfg: &TrainConfig,
) -> Result<FittedModel> {
    let train_set = select(records, &split.train)?;
    let test_set = select(records, &split.test)?;
    let normalizer = Normalizer::fit(&targets_of(&train_set)?)?;
    let mut model = FusedModel::build(model_cfg, modality)?;
    let inputs: Vec<ModelInput> = train_set.iter().map(|r| ModelInput::from(*r)).collect();
    model.fit_scaler(&inputs)?;
    let (model, trace) = train(model, &normalizer, &train_set, &test_set, train_cfg)?;
    Ok(FittedModel {
        model,
        normalizer,
        trace,
    })
}

/// Per-target error of one model on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub split: &'static str,
    pub model: Modality,
    /// stress, mass, deflection
    pub error_pct: [f64; 3],
}

/// Rows for each split and model, in the order test/holdout ×
/// unimodal/multimodal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

pub const SPLITS: [&str; 2] = ["test", "holdout"];

fn model_label(m: Modality) -> &'static str {
    match m {
        Modality::ImageOnly => "unimodal",
        Modality::Multimodal => "multimodal",
    }
}

impl ComparisonReport {
    pub fn errors(&self, split: &str, model: Modality) -> Option<[f64; 3]> {
        self.rows
            .iter()
            .find(|r| r.split == split && r.model == model)
            .map(|r| r.error_pct)
    }

    /// Multimodal minus unimodal error per target; negative favors the
    /// multimodal model.
    pub fn delta(&self, split: &str) -> Option<[f64; 3]> {
        let (u, m) = (
            self.errors(split, Modality::ImageOnly)?,
            self.errors(split, Modality::Multimodal)?,
        );
        Some(std::array::from_fn(|k| m[k] - u[k]))
    }

    fn labelled_rows(&self) -> Vec<(&'static str, &'static str, [f64; 3])> {
        let mut out = Vec::new();
        for split in SPLITS {
            for r in self.rows.iter().filter(|r| r.split == split) {
                out.push((split, model_label(r.model), r.error_pct));
            }
            if let Some(d) = self.delta(split) {
                out.push((split, "delta", d));
            }
        }
        out
    }

    /// Rows `split,model,stress_pct,mass_pct,deflection_pct`, with a
    /// `delta` row after each split.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("split,model,stress_pct,mass_pct,deflection_pct\n");
        for (split, label, e) in self.labelled_rows() {
            writeln!(s, "{split},{label},{},{},{}", e[0], e[1], e[2]).unwrap();
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:<11} {:>10} {:>10} {:>13}\n",
            "split", "model", "stress %", "mass %", "deflection %"
        );
        for (split, label, e) in self.labelled_rows() {
            writeln!(s, "{split:<8} {label:<11} {:>10.2} {:>10.2} {:>13.2}", e[0], e[1], e[2]).unwrap();
        }
        s
    }
}

/// Trains the image-only baseline and the multimodal model on the same split
/// and seeds and scores both on the test and holdout splits.
pub fn compare_modalities(
    records: &[FrameRecord],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<ComparisonReport> {
    let split = split_dataset(records, train_cfg.seed)?;
    let mut rows = Vec::with_capacity(4);
    for modality in [Modality::ImageOnly, Modality::Multimodal] {
        let fitted = fit_model(records, &split, model_cfg, modality, train_cfg)?;
        for (name, ids) in SPLITS.into_iter().zip([&split.test, &split.holdout]) {
            let report = evaluate(&fitted.model, &select(records, ids)?, &fitted.normalizer)?;
            rows.push(ComparisonRow {
                split: name,
                model: modality,
                error_pct: report.error_pct,
            });
        }
    }
    rows.sort_by_key(|r| {
        (
            SPLITS.iter().position(|s| *s == r.split),
            r.model == Modality::Multimodal,
        )
    });
    Ok(ComparisonReport { rows })
}
