//! Seeded synthetic datasets: parameter draws, meshing, modality extraction
//! and oracle targets.

use super::frame::{gen_frame, ribs_fit};
use super::oracle::{oracle_targets, FrameParams};
use crate::error::{Error, Result};
use crate::geometry::{assemble_record, FrameRecord, DEPTH_LEN, SECTION_FRACTIONS, SECTION_LEN};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::RangeInclusive;

/// Closed sampling intervals for every drawn parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRanges {
    pub length: RangeInclusive<f64>,
    pub width: RangeInclusive<f64>,
    pub thickness: RangeInclusive<f64>,
    pub crown: RangeInclusive<f64>,
    pub rib_count: RangeInclusive<usize>,
    pub rib_depth: RangeInclusive<f64>,
    pub rib_width: RangeInclusive<f64>,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            length: 900.0..=1400.0,
            width: 600.0..=1000.0,
            thickness: 1.0..=3.0,
            crown: 0.0..=80.0,
            rib_count: 1..=6,
            rib_depth: 5.0..=40.0,
            rib_width: 20.0..=50.0,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self, depth_len: usize) -> Result<()> {
        let spans = [
            ("length", &self.length, true),
            ("width", &self.width, true),
            ("thickness", &self.thickness, true),
            ("crown", &self.crown, false),
            ("rib_depth", &self.rib_depth, true),
            ("rib_width", &self.rib_width, true),
        ];
        for (name, r, strictly_positive) in spans {
            let ok_low = if strictly_positive {
                *r.start() > 0.0
            } else {
                *r.start() >= 0.0
            };
            if !(r.start().is_finite() && r.end().is_finite() && ok_low && r.start() <= r.end()) {
                return Err(Error::usage(format!("invalid {name} range {:?}", r)));
            }
        }
        if self.rib_count.start() > self.rib_count.end() || *self.rib_count.end() > depth_len {
            return Err(Error::usage(format!(
                "rib_count range {:?} must be ordered and at most {depth_len}",
                self.rib_count
            )));
        }
        Ok(())
    }
}

/// Sampling ranges plus the record layout of the generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub ranges: ParamRanges,
    pub section_len: usize,
    pub depth_len: usize,
    /// Upper bound on ribs crossing either slicing plane; `None` leaves
    /// crossings unconstrained.
    pub max_crossing_ribs: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            ranges: ParamRanges::default(),
            section_len: SECTION_LEN,
            depth_len: DEPTH_LEN,
            max_crossing_ribs: None,
        }
    }
}

/// Draws before a record is declared infeasible.
const MAX_DRAWS: usize = 10_000;

/// Ribs whose footprint straddles a slicing plane.
pub fn crossing_ribs(p: &FrameParams) -> usize {
    (0..p.rib_count())
        .filter(|&i| {
            let yc = p.rib_center(i);
            SECTION_FRACTIONS
                .iter()
                .any(|f| (yc - f * p.width).abs() < p.rib_width / 2.0)
        })
        .count()
}

fn uniform<R: Rng>(rng: &mut R, r: &RangeInclusive<f64>) -> f64 {
    if r.start() == r.end() {
        *r.start()
    } else {
        rng.gen_range(r.clone())
    }
}

/// Draws feasible parameters: ribs fit across the width and the crossing
/// bound holds.
pub fn draw_params<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> Result<FrameParams> {
    let r = &cfg.ranges;
    for _ in 0..MAX_DRAWS {
        let length = uniform(rng, &r.length);
        let width = uniform(rng, &r.width);
        let thickness = uniform(rng, &r.thickness);
        let crown = uniform(rng, &r.crown);
        let n = rng.gen_range(r.rib_count.clone());
        let rib_width = uniform(rng, &r.rib_width);
        let depths = (0..n).map(|_| uniform(rng, &r.rib_depth)).collect();
        let p = FrameParams::new(length, width, thickness, crown, depths, rib_width);
        if !ribs_fit(&p) {
            continue;
        }
        if cfg.max_crossing_ribs.is_some_and(|m| crossing_ribs(&p) > m) {
            continue;
        }
        return Ok(p);
    }
    Err(Error::data(format!(
        "no feasible frame parameters after {MAX_DRAWS} draws"
    )))
}

pub fn record_id(index: usize) -> String {
    format!("frame{index:05}")
}

/// Parameters of record `index`, drawn from its own stream of `seed`.
pub fn record_params(seed: u64, index: usize, cfg: &SynthConfig) -> Result<FrameParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    draw_params(&mut rng, cfg).map_err(|e| e.with_record(&record_id(index)))
}

/// One complete record with oracle targets.
pub fn gen_record(index: usize, p: &FrameParams, cfg: &SynthConfig) -> Result<FrameRecord> {
    let id = record_id(index);
    let (mesh, depths) = gen_frame(&id, p, cfg.depth_len).map_err(|e| e.with_record(&id))?;
    assemble_record(&mesh, depths, Some(oracle_targets(p)), cfg.section_len)
}

/// `count` records from independent per-record streams; identical for a
/// given seed whatever the thread count.
pub fn gen_dataset(count: usize, seed: u64, cfg: &SynthConfig) -> Result<Vec<FrameRecord>> {
    Ok(gen_dataset_with_params(count, seed, cfg)?
        .into_iter()
        .map(|(r, _)| r)
        .collect())
}

pub fn gen_dataset_with_params(count: usize, seed: u64, cfg: &SynthConfig) -> Result<Vec<(FrameRecord, FrameParams)>> {
    if count == 0 {
        return Err(Error::usage("dataset count must be at least 1"));
    }
    cfg.ranges.validate(cfg.depth_len)?;
    par::map_range(count, |i| {
        let p = record_params(seed, i, cfg)?;
        Ok((gen_record(i, &p, cfg)?, p))
    })
    .into_iter()
    .collect()
}
