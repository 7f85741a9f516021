use crate::autodiff::{RunningStats, Tensor};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatsId(pub(crate) usize);

/// How a parameter is initialised and whether it is weight-decayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// He-normal with the given fan-in.
    Weight {
        fan_in: usize,
        decay: bool,
    },
    Bias,
    /// Batch-norm scale, initialised to 1.
    Gamma,
    /// Batch-norm shift, initialised to 0.
    Beta,
}

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    kind: ParamKind,
    tensor: Tensor,
}

/// Named trainable tensors plus batch-norm running statistics.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
    pub(crate) stats: Vec<RunningStats>,
    stat_names: Vec<String>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, dims: Vec<usize>, kind: ParamKind) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) || self.stat_names.contains(&name) {
            return Err(Error::usage(format!("duplicate parameter name '{name}'")));
        }
        let fill = if kind == ParamKind::Gamma { 1.0 } else { 0.0 };
        let tensor = Tensor::full(dims, fill)?.into_trainable();
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(Entry { name, kind, tensor });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn add_stats(&mut self, name: impl Into<String>, features: usize) -> Result<StatsId> {
        let name = name.into();
        if self.index.contains_key(&name) || self.stat_names.contains(&name) {
            return Err(Error::usage(format!("duplicate statistics name '{name}'")));
        }
        self.stat_names.push(name);
        self.stats.push(RunningStats::new(features));
        Ok(StatsId(self.stats.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn kind(&self, id: ParamId) -> ParamKind {
        self.entries[id.0].kind
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn stats(&self, id: StatsId) -> &RunningStats {
        &self.stats[id.0]
    }

    pub fn stats_mut(&mut self, id: StatsId) -> &mut RunningStats {
        &mut self.stats[id.0]
    }

    /// Every running-statistics slot, in registration order.
    pub fn all_stats(&self) -> &[RunningStats] {
        &self.stats
    }

    pub fn stat_entries(&self) -> impl Iterator<Item = (&str, &RunningStats)> {
        self.stat_names.iter().map(String::as_str).zip(&self.stats)
    }

    pub fn find_stats(&self, name: &str) -> Option<StatsId> {
        self.stat_names.iter().position(|n| n == name).map(StatsId)
    }

    /// Parameters penalised by L2 regularisation.
    pub fn decayed(&self) -> Vec<ParamId> {
        self.ids()
            .filter(|&id| matches!(self.kind(id), ParamKind::Weight { decay: true, .. }))
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.tensor.is_trainable())
            .map(|e| e.tensor.numel())
            .sum()
    }

    /// Trainable element count over parameters whose name starts with `prefix`.
    pub fn count_with_prefix(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.name.starts_with(prefix) && e.tensor.is_trainable())
            .map(|e| e.tensor.numel())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        self.entries.iter_mut().for_each(|e| e.tensor.zero_grad());
    }

    /// Draws weights from N(0, 2/fan_in), zeroes biases and shifts, sets
    /// scales to 1 and resets running statistics. Deterministic per seed.
    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for e in self.entries.iter_mut() {
            let data = e.tensor.data_mut();
            match e.kind {
                ParamKind::Weight { fan_in, .. } => {
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                    data.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
                }
                ParamKind::Bias | ParamKind::Beta => data.fill(0.0),
                ParamKind::Gamma => data.fill(1.0),
            }
            e.tensor.zero_grad();
        }
        for s in self.stats.iter_mut() {
            *s = RunningStats::new(s.features());
        }
    }

    /// Overwrites parameter values and statistics from another store with the
    /// same layout.
    pub fn copy_values_from(&mut self, other: &ParameterStore) -> Result<()> {
        if self.entries.len() != other.entries.len() || self.stats.len() != other.stats.len() {
            return Err(Error::usage("parameter stores have different layouts"));
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            if a.name != b.name || a.tensor.dims() != b.tensor.dims() {
                return Err(Error::usage(format!(
                    "parameter '{}' does not match '{}'",
                    a.name, b.name
                )));
            }
            a.tensor.data_mut().copy_from_slice(b.tensor.data());
        }
        self.stats.clone_from(&other.stats);
        Ok(())
    }
}
