//! Versioned little-endian container for a trained model.
//!
//! Layout: magic `HFMM`, `u32` version, `u32`-prefixed config echo
//! (`key=value` lines), six `f64` target statistics, three input scalers as
//! `u32`-prefixed mean and std vectors, then `u32`-counted parameter records
//! (name, `u32` rank, `u64` dims, `f64` values) and running-statistic records
//! (name, `u32` features, means, variances).

use super::normalize::Normalizer;
use crate::autodiff::RunningStats;
use crate::error::{Error, Result};
use crate::model::{EncoderPreset, FeatureScaler, FusedModel, Modality, ModelConfig};
use std::collections::HashMap;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"HFMM";
pub const VERSION: u32 = 1;

/// A trained model with everything needed to predict in original units.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: FusedModel,
    pub normalizer: Normalizer,
    /// Seed of the train/test/holdout split the model was fitted on.
    pub split_seed: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|v| self.0.extend_from_slice(&v.to_le_bytes()));
    }

    fn text(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn vector(&mut self, vs: &[f64]) {
        self.u32(vs.len());
        self.f64s(vs);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::data(format!(
                "checkpoint truncated at offset {} (needed {n} more bytes)",
                self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::data("checkpoint length overflow"))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn text(&mut self) -> Result<String> {
        let at = self.pos;
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::data(format!("checkpoint text at offset {at} is not UTF-8")))
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        self.f64s(n)
    }
}

fn config_echo(model: &FusedModel, split_seed: u64) -> String {
    let c = model.config();
    let r = c.dropout_rates;
    format!(
        "modality={}\nencoder={}\nsection_len={}\ndepth_len={}\ndropout_rates={:?},{:?},{:?}\nl2_lambda={:?}\nseed={}\nsplit_seed={split_seed}\n",
        model.modality(),
        c.encoder,
        c.section_len,
        c.depth_len,
        r[0],
        r[1],
        r[2],
        c.l2_lambda,
        c.seed
    )
}

fn parse_echo(text: &str) -> Result<(ModelConfig, Modality, u64)> {
    let map: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| {
        map.get(k)
            .copied()
            .ok_or_else(|| Error::data(format!("checkpoint config lacks '{k}'")))
    };
    let bad = |k: &str| Error::data(format!("checkpoint config has a malformed '{k}'"));
    let num = |k: &str| get(k)?.parse::<u64>().map_err(|_| bad(k));
    let rates: Vec<f64> = get("dropout_rates")?
        .split(',')
        .map(|s| s.parse().map_err(|_| bad("dropout_rates")))
        .collect::<Result<_>>()?;
    let dropout_rates: [f64; 3] = rates.try_into().map_err(|_| bad("dropout_rates"))?;
    let config = ModelConfig {
        encoder: get("encoder")?.parse::<EncoderPreset>().map_err(|_| bad("encoder"))?,
        section_len: num("section_len")? as usize,
        depth_len: num("depth_len")? as usize,
        dropout_rates,
        l2_lambda: get("l2_lambda")?.parse().map_err(|_| bad("l2_lambda"))?,
        seed: num("seed")?,
    };
    let modality = get("modality")?.parse::<Modality>().map_err(|_| bad("modality"))?;
    Ok((config, modality, num("split_seed")?))
}

pub fn encode_checkpoint(model: &FusedModel, normalizer: &Normalizer, split_seed: u64) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.text(&config_echo(model, split_seed));
    w.f64s(&normalizer.mean);
    w.f64s(&normalizer.std);
    for s in [&model.scaler.sec25, &model.scaler.sec75, &model.scaler.depths] {
        w.vector(&s.mean);
        w.vector(&s.std);
    }
    let store = &model.store;
    w.u32(store.len());
    for id in store.ids() {
        let t = store.get(id);
        w.text(store.name(id));
        w.u32(t.dims().len());
        t.dims()
            .iter()
            .for_each(|&d| w.0.extend_from_slice(&(d as u64).to_le_bytes()));
        w.f64s(t.data());
    }
    let stats: Vec<(&str, &RunningStats)> = store.stat_entries().collect();
    w.u32(stats.len());
    for (name, s) in stats {
        w.text(name);
        w.u32(s.features());
        w.f64s(&s.mean);
        w.f64s(&s.var);
    }
    w.0
}

/// Rebuilds the model described by the header and fills in every stored
/// value. `expect` rejects checkpoints of the other modality.
pub fn decode_checkpoint(bytes: &[u8], expect: Option<Modality>) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::data("not a checkpoint: bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::data(format!(
            "checkpoint version {version} unsupported (expected {VERSION})"
        )));
    }
    let (config, modality, split_seed) = parse_echo(&r.text()?)?;
    if let Some(want) = expect.filter(|&m| m != modality) {
        return Err(Error::data(format!(
            "modality mismatch: checkpoint is {modality}, expected {want}"
        )));
    }
    let mean = r.f64s(3)?;
    let std = r.f64s(3)?;
    let normalizer = Normalizer {
        mean: mean.try_into().unwrap(),
        std: std.try_into().unwrap(),
    };
    let mut model = FusedModel::build(&config, modality)?;
    let widths = [2 * config.section_len, 2 * config.section_len, config.depth_len];
    let mut scalers = Vec::with_capacity(3);
    for width in widths {
        let at = r.pos;
        let s = FeatureScaler {
            mean: r.vector()?,
            std: r.vector()?,
        };
        if s.mean.len() != width || s.std.len() != width {
            return Err(Error::data(format!(
                "input scaler at offset {at} has width {}, expected {width}",
                s.mean.len()
            )));
        }
        scalers.push(s);
    }
    model.scaler.depths = scalers.pop().unwrap();
    model.scaler.sec75 = scalers.pop().unwrap();
    model.scaler.sec25 = scalers.pop().unwrap();

    let count = r.u32()?;
    if count != model.store.len() {
        return Err(Error::data(format!(
            "checkpoint holds {count} parameter tensors, model expects {}",
            model.store.len()
        )));
    }
    for _ in 0..count {
        let name = r.text()?;
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| Error::data(format!("checkpoint tensor '{name}' is not part of the model")))?;
        if model.store.get(id).dims() != dims.as_slice() {
            return Err(Error::data(format!(
                "shape mismatch for '{name}': stored {dims:?}, model {:?}",
                model.store.get(id).dims()
            )));
        }
        let values = r.f64s(dims.iter().product())?;
        model.store.get_mut(id).data_mut().copy_from_slice(&values);
    }
    let count = r.u32()?;
    if count != model.store.stat_entries().count() {
        return Err(Error::data(format!(
            "checkpoint holds {count} statistic records, model expects another count"
        )));
    }
    for _ in 0..count {
        let name = r.text()?;
        let features = r.u32()?;
        let id = model
            .store
            .find_stats(&name)
            .ok_or_else(|| Error::data(format!("checkpoint statistics '{name}' are not part of the model")))?;
        if model.store.stats(id).features() != features {
            return Err(Error::data(format!("shape mismatch for statistics '{name}'")));
        }
        let s = RunningStats {
            mean: r.f64s(features)?,
            var: r.f64s(features)?,
        };
        *model.store.stats_mut(id) = s;
    }
    if r.pos != bytes.len() {
        return Err(Error::data(format!("trailing bytes after offset {}", r.pos)));
    }
    Ok(Checkpoint {
        model,
        normalizer,
        split_seed,
    })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &FusedModel,
    normalizer: &Normalizer,
    split_seed: u64,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model, normalizer, split_seed)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, expect: Option<Modality>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, expect)
}
