use super::normalize::Normalizer;
use crate::error::{Error, Result};
use crate::geometry::{FrameRecord, TargetTriple};
use crate::model::{FusedModel, ModelInput};
use std::fmt::Write;

/// `100 · mean |predicted − actual| / |actual|`.
pub fn percentage_error(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::usage(format!(
            "need equal non-empty actual/predicted lists, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let mut sum = 0.0;
    for (i, (a, p)) in actual.iter().zip(predicted).enumerate() {
        if *a == 0.0 {
            return Err(Error::data(format!(
                "actual value {i} is zero; relative error undefined"
            )));
        }
        sum += (p - a).abs() / a.abs();
    }
    Ok(100.0 * sum / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub id: String,
    pub target: &'static str,
    pub actual: f64,
    pub predicted: f64,
}

/// Average percentage error per target over an evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// stress, mass, deflection
    pub error_pct: [f64; 3],
    pub n: usize,
    pub residuals: Vec<Residual>,
}

impl MetricsReport {
    pub fn from_predictions(ids: &[&str], actual: &[TargetTriple], predicted: &[TargetTriple]) -> Result<Self> {
        if ids.len() != actual.len() || ids.len() != predicted.len() {
            return Err(Error::usage("ids, actual and predicted lengths differ"));
        }
        for (id, a) in ids.iter().zip(actual) {
            if let Some(k) = a.to_array().iter().position(|&v| v == 0.0) {
                return Err(Error::data(format!(
                    "record {id}: actual {} is zero; relative error undefined",
                    TargetTriple::NAMES[k]
                )));
            }
        }
        let mut error_pct = [0.0; 3];
        for (k, e) in error_pct.iter_mut().enumerate() {
            let a: Vec<f64> = actual.iter().map(|t| t.to_array()[k]).collect();
            let p: Vec<f64> = predicted.iter().map(|t| t.to_array()[k]).collect();
            *e = percentage_error(&a, &p)?;
        }
        let residuals = ids
            .iter()
            .zip(actual.iter().zip(predicted))
            .flat_map(|(id, (a, p))| {
                let (a, p) = (a.to_array(), p.to_array());
                (0..3).map(move |k| Residual {
                    id: id.to_string(),
                    target: TargetTriple::NAMES[k],
                    actual: a[k],
                    predicted: p[k],
                })
            })
            .collect();
        Ok(MetricsReport {
            error_pct,
            n: ids.len(),
            residuals,
        })
    }

    /// Rows `target,error_pct,n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("target,error_pct,n\n");
        for (name, e) in TargetTriple::NAMES.iter().zip(self.error_pct) {
            writeln!(s, "{name},{e},{}", self.n).unwrap();
        }
        s
    }

    /// Rows `id,target,actual,predicted`.
    pub fn residuals_csv(&self) -> String {
        let mut s = String::from("id,target,actual,predicted\n");
        for r in &self.residuals {
            writeln!(s, "{},{},{},{}", r.id, r.target, r.actual, r.predicted).unwrap();
        }
        s
    }
}

/// Predictions in original units.
pub fn predict_targets(
    model: &FusedModel,
    normalizer: &Normalizer,
    inputs: &[ModelInput],
) -> Result<Vec<TargetTriple>> {
    Ok(model
        .predict_rows(inputs)?
        .into_iter()
        .map(|z| normalizer.invert(z))
        .collect())
}

pub fn evaluate(model: &FusedModel, records: &[&FrameRecord], normalizer: &Normalizer) -> Result<MetricsReport> {
    let actual = records
        .iter()
        .map(|r| {
            r.targets
                .ok_or_else(|| Error::data(format!("record {}: no targets", r.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<ModelInput> = records.iter().map(|r| ModelInput::from(*r)).collect();
    let predicted = predict_targets(model, normalizer, &inputs)?;
    let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    MetricsReport::from_predictions(&ids, &actual, &predicted)
}
