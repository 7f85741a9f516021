//! Late fusion: branch embeddings are concatenated and regressed by a small
//! fully connected head.

use super::config::{Modality, ModelConfig};
use super::encoders::{build_image_branch, build_param_branch, build_section_branch, ImageEncoder, MlpEncoder};
use super::input::{image_batch, InputScaler, ModelInput};
use super::layers::{Dense, Session, StatsAccess};
use super::store::ParameterStore;
use crate::autodiff::{Mode, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::par;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const HEAD_WIDTHS: [usize; 5] = [128, 64, 32, 16, 3];
pub const OUTPUT_WIDTH: usize = 3;

#[derive(Debug, Clone)]
pub struct FusionHead {
    layers: Vec<Dense>,
    rates: [f64; 3],
    pub in_width: usize,
}

/// Dense 128/64/32/16/3 with dropout after the first three layers. Every
/// head weight carries the L2 penalty.
pub fn build_fusion_head(
    store: &mut ParameterStore,
    name: &str,
    in_width: usize,
    rates: [f64; 3],
) -> Result<FusionHead> {
    if in_width != Modality::Multimodal.fused_width() && in_width != Modality::ImageOnly.fused_width() {
        return Err(Error::usage(format!(
            "fusion head width {in_width} unsupported (expected 640 or 256)"
        )));
    }
    let mut layers = Vec::with_capacity(HEAD_WIDTHS.len());
    let mut prev = in_width;
    for (i, &w) in HEAD_WIDTHS.iter().enumerate() {
        layers.push(Dense::new(store, &format!("{name}.fc{}", i + 1), prev, w, true)?);
        prev = w;
    }
    Ok(FusionHead {
        layers,
        rates,
        in_width,
    })
}

impl FusionHead {
    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(s, h)?;
            if i < last {
                h = s.tape.relu(h)?;
            }
            if let Some(&rate) = self.rates.get(i) {
                h = s.tape.dropout(h, rate, s.mode, &mut *s.rng)?;
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone)]
struct VectorBranches {
    sec25: MlpEncoder,
    sec75: MlpEncoder,
    depths: MlpEncoder,
}

/// Output of a recorded train-mode pass.
#[derive(Debug, Clone)]
pub struct TrainGraph {
    /// `[B, 3]` predictions in normalized target space.
    pub output: Var,
    /// Weights subject to the L2 penalty.
    pub decayed: Vec<Var>,
}

/// Independent branch encoders feeding one fusion head.
#[derive(Debug, Clone)]
pub struct FusedModel {
    config: ModelConfig,
    modality: Modality,
    pub store: ParameterStore,
    pub scaler: InputScaler,
    top: ImageEncoder,
    side: ImageEncoder,
    vector: Option<VectorBranches>,
    head: FusionHead,
}

/// Rows per chunk when predicting many records.
const PREDICT_CHUNK: usize = 16;

impl FusedModel {
    /// Builds and initializes from `config.seed`.
    pub fn build(config: &ModelConfig, modality: Modality) -> Result<Self> {
        config.validate()?;
        let mut store = ParameterStore::new();
        let top = build_image_branch(&mut store, "top", config.encoder)?;
        let side = build_image_branch(&mut store, "side", config.encoder)?;
        let vector = match modality {
            Modality::Multimodal => Some(VectorBranches {
                sec25: build_section_branch(&mut store, "sec25", config.section_len)?,
                sec75: build_section_branch(&mut store, "sec75", config.section_len)?,
                depths: build_param_branch(&mut store, "depths", config.depth_len)?,
            }),
            Modality::ImageOnly => None,
        };
        let head = build_fusion_head(&mut store, "fusion", modality.fused_width(), config.dropout_rates)?;
        store.init(config.seed);
        Ok(FusedModel {
            config: config.clone(),
            modality,
            store,
            scaler: InputScaler::identity(config.section_len, config.depth_len),
            top,
            side,
            vector,
            head,
        })
    }

    pub fn multimodal(config: &ModelConfig) -> Result<Self> {
        Self::build(config, Modality::Multimodal)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn fused_width(&self) -> usize {
        self.head.in_width
    }

    pub fn head_param_count(&self) -> usize {
        self.store.count_with_prefix("fusion.")
    }

    /// Fits the section and depth scalers. Image-only models keep identity
    /// scalers.
    pub fn fit_scaler(&mut self, inputs: &[ModelInput]) -> Result<()> {
        if self.vector.is_some() {
            self.scaler = InputScaler::fit(inputs, self.config.section_len, self.config.depth_len)?;
        }
        Ok(())
    }

    pub fn re_init(&mut self, seed: u64) {
        self.store.init(seed);
    }

    fn run(&self, s: &mut Session, inputs: &[ModelInput]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::usage("forward needs at least one record"));
        }
        let mut embeddings = Vec::with_capacity(5);
        let top = s.input(image_batch(inputs, |i| i.top)?);
        embeddings.push(self.top.forward(s, top)?);
        let side = s.input(image_batch(inputs, |i| i.side)?);
        embeddings.push(self.side.forward(s, side)?);
        if let Some(v) = &self.vector {
            let len = self.config.section_len;
            for (which, enc) in [&v.sec25, &v.sec75].into_iter().enumerate() {
                let x = s.input(self.scaler.section_batch(inputs, which, len)?);
                embeddings.push(enc.forward(s, x)?);
            }
            let x = s.input(self.scaler.depth_batch(inputs, self.config.depth_len)?);
            embeddings.push(v.depths.forward(s, x)?);
        }
        let fused = s.tape.concat(&embeddings)?;
        self.head.forward(s, fused)
    }

    /// Records a train-mode pass: batch statistics, live dropout, running
    /// statistics updated.
    pub fn forward_train(
        &mut self,
        tape: &mut Tape,
        inputs: &[ModelInput],
        rng: &mut dyn RngCore,
    ) -> Result<TrainGraph> {
        let mut stats = std::mem::take(&mut self.store.stats);
        let result = {
            let mut s = Session::new(tape, &self.store, StatsAccess::Update(&mut stats), Mode::Train, rng);
            self.run(&mut s, inputs).map(|output| TrainGraph {
                output,
                decayed: s.decayed_vars(),
            })
        };
        self.store.stats = stats;
        result
    }

    /// Records an eval-mode pass; the model is not modified.
    pub fn forward_eval(&self, tape: &mut Tape, inputs: &[ModelInput]) -> Result<Var> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = Session::new(
            tape,
            &self.store,
            StatsAccess::Read(&self.store.stats),
            Mode::Eval,
            &mut rng,
        );
        self.run(&mut s, inputs)
    }

    /// Eval-mode `[B, 3]` predictions in normalized target space.
    pub fn predict(&self, inputs: &[ModelInput]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward_eval(&mut tape, inputs)?;
        Ok(tape.value(out).detached())
    }

    /// Predictions for any number of records, in fixed-size chunks evaluated
    /// in parallel. Rows are in input order.
    pub fn predict_rows(&self, inputs: &[ModelInput]) -> Result<Vec<[f64; 3]>> {
        let chunks: Vec<&[ModelInput]> = inputs.chunks(PREDICT_CHUNK).collect();
        let parts = par::map_range(chunks.len(), |c| self.predict(chunks[c]));
        let mut rows = Vec::with_capacity(inputs.len());
        for part in parts {
            let t = part?;
            rows.extend(t.data().chunks_exact(OUTPUT_WIDTH).map(|r| [r[0], r[1], r[2]]));
        }
        Ok(rows)
    }
}

/// Top and side image branches with a 256-wide head; otherwise identical to
/// the multimodal build.
pub fn build_unimodal_baseline(config: &ModelConfig) -> Result<FusedModel> {
    FusedModel::build(config, Modality::ImageOnly)
}
