//! Batched network inputs and per-feature scaling of the vector modalities.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::geometry::{CrossSection, DepthVector, FrameRecord, ViewImage, IMAGE_SIZE};

/// Borrowed view of one design. Vector modalities are optional so image-only
/// predictions work on records without sections or depths.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub id: &'a str,
    pub top: &'a ViewImage,
    pub side: &'a ViewImage,
    pub sec25: Option<&'a CrossSection>,
    pub sec75: Option<&'a CrossSection>,
    pub depths: Option<&'a DepthVector>,
}

impl<'a> From<&'a FrameRecord> for ModelInput<'a> {
    fn from(r: &'a FrameRecord) -> Self {
        ModelInput {
            id: &r.id,
            top: &r.top,
            side: &r.side,
            sec25: Some(&r.sec25),
            sec75: Some(&r.sec75),
            depths: Some(&r.depths),
        }
    }
}

pub fn inputs_of(records: &[FrameRecord]) -> Vec<ModelInput<'_>> {
    records.iter().map(ModelInput::from).collect()
}

fn missing(id: &str, what: &str) -> Error {
    Error::data(format!("record {id}: missing {what}"))
}

pub(crate) fn image_batch<'a>(inputs: &[ModelInput<'a>], pick: fn(&ModelInput<'a>) -> &'a ViewImage) -> Result<Tensor> {
    let px = IMAGE_SIZE * IMAGE_SIZE;
    let mut data = Vec::with_capacity(inputs.len() * px);
    for inp in inputs {
        data.extend_from_slice(pick(inp).pixels());
    }
    Tensor::new(vec![inputs.len(), 1, IMAGE_SIZE, IMAGE_SIZE], data)
}

pub(crate) fn section_features(inp: &ModelInput, which: usize, len: usize) -> Result<Vec<f64>> {
    let (sec, name) = match which {
        0 => (inp.sec25, "sec25"),
        _ => (inp.sec75, "sec75"),
    };
    let sec = sec.ok_or_else(|| missing(inp.id, &format!("{name} cross-section")))?;
    if sec.len() != len {
        return Err(Error::data(format!(
            "record {}: {name} has {} points, expected {len}",
            inp.id,
            sec.len()
        )));
    }
    Ok(sec.interleaved().collect())
}

pub(crate) fn depth_features(inp: &ModelInput, len: usize) -> Result<Vec<f64>> {
    let d = inp.depths.ok_or_else(|| missing(inp.id, "depth vector"))?;
    if d.len() != len {
        return Err(Error::data(format!(
            "record {}: depth vector has {} entries, expected {len}",
            inp.id,
            d.len()
        )));
    }
    Ok(d.values().to_vec())
}

/// Per-feature standardization `(v - mean) / std`. Near-constant features
/// keep std 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const MIN_FEATURE_STD: f64 = 1e-6;

impl FeatureScaler {
    pub fn identity(width: usize) -> Self {
        FeatureScaler {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::data("cannot fit a scaler on zero rows"))?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            var.iter_mut()
                .zip(r.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt())
            .map(|s| if s < MIN_FEATURE_STD { 1.0 } else { s })
            .collect();
        Ok(FeatureScaler { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Scalers for both section branches and the depth branch.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaler {
    pub sec25: FeatureScaler,
    pub sec75: FeatureScaler,
    pub depths: FeatureScaler,
}

impl InputScaler {
    pub fn identity(section_len: usize, depth_len: usize) -> Self {
        InputScaler {
            sec25: FeatureScaler::identity(2 * section_len),
            sec75: FeatureScaler::identity(2 * section_len),
            depths: FeatureScaler::identity(depth_len),
        }
    }

    pub fn fit(inputs: &[ModelInput], section_len: usize, depth_len: usize) -> Result<Self> {
        let collect =
            |f: &dyn Fn(&ModelInput) -> Result<Vec<f64>>| -> Result<Vec<Vec<f64>>> { inputs.iter().map(f).collect() };
        Ok(InputScaler {
            sec25: FeatureScaler::fit(&collect(&|i| section_features(i, 0, section_len))?)?,
            sec75: FeatureScaler::fit(&collect(&|i| section_features(i, 1, section_len))?)?,
            depths: FeatureScaler::fit(&collect(&|i| depth_features(i, depth_len))?)?,
        })
    }

    pub(crate) fn section_batch(&self, inputs: &[ModelInput], which: usize, len: usize) -> Result<Tensor> {
        let scaler = if which == 0 { &self.sec25 } else { &self.sec75 };
        let mut data = Vec::with_capacity(inputs.len() * 2 * len);
        for inp in inputs {
            let mut row = section_features(inp, which, len)?;
            scaler.apply(&mut row);
            data.extend(row);
        }
        Tensor::new(vec![inputs.len(), 2 * len], data)
    }

    pub(crate) fn depth_batch(&self, inputs: &[ModelInput], len: usize) -> Result<Tensor> {
        let mut data = Vec::with_capacity(inputs.len() * len);
        for inp in inputs {
            let mut row = depth_features(inp, len)?;
            self.depths.apply(&mut row);
            data.extend(row);
        }
        Tensor::new(vec![inputs.len(), len], data)
    }
}
