//! Per-modality encoders. Each emits a 128-wide embedding per sample.

use super::layers::{BatchNorm, Conv, Dense, Session};
use super::store::ParameterStore;
use crate::autodiff::Var;
use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

pub const EMBED_WIDTH: usize = 128;

/// Residual image encoder topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderPreset {
    /// Bottleneck stages of 3/4/6/3 blocks after a 7×7 stride-2 stem and
    /// 3×3 stride-2 max pool.
    Resnet50,
    /// 3×3 stride-1 stem, then three stages of two basic blocks at 8/16/32
    /// channels.
    Mini,
}

impl FromStr for EncoderPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resnet50" => Ok(EncoderPreset::Resnet50),
            "mini" => Ok(EncoderPreset::Mini),
            other => Err(Error::usage(format!(
                "unknown encoder preset '{other}' (expected resnet50 or mini)"
            ))),
        }
    }
}

impl fmt::Display for EncoderPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderPreset::Resnet50 => "resnet50",
            EncoderPreset::Mini => "mini",
        })
    }
}

#[derive(Debug, Clone)]
struct Shortcut {
    conv: Conv,
    bn: BatchNorm,
}

impl Shortcut {
    fn build(store: &mut ParameterStore, name: &str, cin: usize, cout: usize, stride: usize) -> Result<Option<Self>> {
        if stride == 1 && cin == cout {
            return Ok(None);
        }
        Ok(Some(Shortcut {
            conv: Conv::new(store, &format!("{name}.down"), cin, cout, 1, stride, 0)?,
            bn: BatchNorm::new(store, &format!("{name}.down_bn"), cout)?,
        }))
    }

    fn apply(this: &Option<Self>, s: &mut Session, x: Var) -> Result<Var> {
        match this {
            Some(sc) => {
                let y = sc.conv.forward(s, x)?;
                sc.bn.forward(s, y)
            }
            None => Ok(x),
        }
    }
}

#[derive(Debug, Clone)]
enum Block {
    Basic {
        convs: [Conv; 2],
        bns: [BatchNorm; 2],
        shortcut: Option<Shortcut>,
    },
    Bottleneck {
        convs: [Conv; 3],
        bns: [BatchNorm; 3],
        shortcut: Option<Shortcut>,
    },
}

impl Block {
    fn basic(store: &mut ParameterStore, name: &str, cin: usize, cout: usize, stride: usize) -> Result<Self> {
        Ok(Block::Basic {
            convs: [
                Conv::new(store, &format!("{name}.conv1"), cin, cout, 3, stride, 1)?,
                Conv::new(store, &format!("{name}.conv2"), cout, cout, 3, 1, 1)?,
            ],
            bns: [
                BatchNorm::new(store, &format!("{name}.bn1"), cout)?,
                BatchNorm::new(store, &format!("{name}.bn2"), cout)?,
            ],
            shortcut: Shortcut::build(store, name, cin, cout, stride)?,
        })
    }

    fn bottleneck(store: &mut ParameterStore, name: &str, cin: usize, width: usize, stride: usize) -> Result<Self> {
        let cout = width * 4;
        Ok(Block::Bottleneck {
            convs: [
                Conv::new(store, &format!("{name}.conv1"), cin, width, 1, 1, 0)?,
                Conv::new(store, &format!("{name}.conv2"), width, width, 3, stride, 1)?,
                Conv::new(store, &format!("{name}.conv3"), width, cout, 1, 1, 0)?,
            ],
            bns: [
                BatchNorm::new(store, &format!("{name}.bn1"), width)?,
                BatchNorm::new(store, &format!("{name}.bn2"), width)?,
                BatchNorm::new(store, &format!("{name}.bn3"), cout)?,
            ],
            shortcut: Shortcut::build(store, name, cin, cout, stride)?,
        })
    }

    fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let (convs, bns, shortcut): (&[Conv], &[BatchNorm], _) = match self {
            Block::Basic { convs, bns, shortcut } => (convs, bns, shortcut),
            Block::Bottleneck { convs, bns, shortcut } => (convs, bns, shortcut),
        };
        let mut h = x;
        for (i, (conv, bn)) in convs.iter().zip(bns).enumerate() {
            h = conv.forward(s, h)?;
            h = bn.forward(s, h)?;
            if i + 1 < convs.len() {
                h = s.tape.relu(h)?;
            }
        }
        let skip = Shortcut::apply(shortcut, s, x)?;
        let sum = s.tape.add(h, skip)?;
        s.tape.relu(sum)
    }
}

/// Residual encoder for a `[B, 1, 128, 128]` image batch.
#[derive(Debug, Clone)]
pub struct ImageEncoder {
    pub preset: EncoderPreset,
    stem: Conv,
    stem_bn: BatchNorm,
    pool: Option<(usize, usize, usize)>,
    blocks: Vec<Block>,
    head: Dense,
    head_bn: BatchNorm,
    pub feature_channels: usize,
}

impl ImageEncoder {
    pub fn build(store: &mut ParameterStore, name: &str, preset: EncoderPreset) -> Result<Self> {
        let mut blocks = Vec::new();
        let (stem, stem_ch, pool, channels) = match preset {
            EncoderPreset::Resnet50 => {
                let stem = Conv::new(store, &format!("{name}.stem"), 1, 64, 7, 2, 3)?;
                let mut cin = 64;
                for (stage, (width, count, stride)) in [(64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)]
                    .into_iter()
                    .enumerate()
                {
                    for i in 0..count {
                        let s = if i == 0 { stride } else { 1 };
                        blocks.push(Block::bottleneck(
                            store,
                            &format!("{name}.layer{}.{i}", stage + 1),
                            cin,
                            width,
                            s,
                        )?);
                        cin = width * 4;
                    }
                }
                (stem, 64, Some((3, 2, 1)), cin)
            }
            EncoderPreset::Mini => {
                let stem = Conv::new(store, &format!("{name}.stem"), 1, 8, 3, 1, 1)?;
                let mut cin = 8;
                for (stage, (width, stride)) in [(8, 1), (16, 2), (32, 2)].into_iter().enumerate() {
                    for i in 0..2 {
                        let s = if i == 0 { stride } else { 1 };
                        blocks.push(Block::basic(
                            store,
                            &format!("{name}.layer{}.{i}", stage + 1),
                            cin,
                            width,
                            s,
                        )?);
                        cin = width;
                    }
                }
                (stem, 8, None, cin)
            }
        };
        let stem_bn = BatchNorm::new(store, &format!("{name}.stem_bn"), stem_ch)?;
        let head = Dense::new(store, &format!("{name}.head"), channels, EMBED_WIDTH, false)?;
        let head_bn = BatchNorm::new(store, &format!("{name}.head_bn"), EMBED_WIDTH)?;
        Ok(ImageEncoder {
            preset,
            stem,
            stem_bn,
            pool,
            blocks,
            head,
            head_bn,
            feature_channels: channels,
        })
    }

    /// Feature map right before global pooling.
    pub fn features(&self, s: &mut Session, x: Var) -> Result<Var> {
        let mut h = self.stem.forward(s, x)?;
        h = self.stem_bn.forward(s, h)?;
        h = s.tape.relu(h)?;
        if let Some((window, stride, pad)) = self.pool {
            h = s.tape.max_pool2d(h, window, stride, pad)?;
        }
        for block in &self.blocks {
            h = block.forward(s, h)?;
        }
        Ok(h)
    }

    pub fn embed_features(&self, s: &mut Session, features: Var) -> Result<Var> {
        let pooled = s.tape.global_avg_pool(features)?;
        let h = self.head.forward(s, pooled)?;
        let h = s.tape.relu(h)?;
        self.head_bn.forward(s, h)
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let f = self.features(s, x)?;
        self.embed_features(s, f)
    }
}

/// Fully connected encoder: ReLU after every layer, batch norm on the output.
#[derive(Debug, Clone)]
pub struct MlpEncoder {
    layers: Vec<Dense>,
    bn: BatchNorm,
    pub input_width: usize,
}

/// Hidden widths of the cross-section encoder.
pub const SECTION_WIDTHS: [usize; 6] = [128, 256, 512, 1024, 512, 128];
/// Hidden widths of the rib-depth encoder.
pub const DEPTH_WIDTHS: [usize; 4] = [128, 256, 512, 128];

impl MlpEncoder {
    pub fn build(store: &mut ParameterStore, name: &str, input_width: usize, widths: &[usize]) -> Result<Self> {
        if input_width == 0 || widths.is_empty() {
            return Err(Error::usage(format!(
                "{name}: encoder needs an input and at least one layer"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input_width;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Dense::new(store, &format!("{name}.fc{}", i + 1), prev, w, false)?);
            prev = w;
        }
        let bn = BatchNorm::new(store, &format!("{name}.bn"), prev)?;
        Ok(MlpEncoder {
            layers,
            bn,
            input_width,
        })
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(s, h)?;
            h = s.tape.relu(h)?;
        }
        self.bn.forward(s, h)
    }
}

/// Encoder for a flattened `(x, z)`-interleaved section of `section_len` points.
pub fn build_section_branch(store: &mut ParameterStore, name: &str, section_len: usize) -> Result<MlpEncoder> {
    if section_len < 4 {
        return Err(Error::usage(format!("section length {section_len} must be at least 4")));
    }
    MlpEncoder::build(store, name, 2 * section_len, &SECTION_WIDTHS)
}

pub fn build_param_branch(store: &mut ParameterStore, name: &str, depth_len: usize) -> Result<MlpEncoder> {
    if depth_len == 0 {
        return Err(Error::usage("depth vector length must be at least 1"));
    }
    MlpEncoder::build(store, name, depth_len, &DEPTH_WIDTHS)
}

pub fn build_image_branch(store: &mut ParameterStore, name: &str, preset: EncoderPreset) -> Result<ImageEncoder> {
    ImageEncoder::build(store, name, preset)
}
