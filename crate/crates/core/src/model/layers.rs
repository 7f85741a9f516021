//! Building blocks shared by every branch.

use super::store::{ParamId, ParamKind, ParameterStore, StatsId};
use crate::autodiff::{BatchNormOptions, Mode, RunningStats, Tape, Tensor, Var};
use crate::error::Result;
use rand::RngCore;
use std::collections::HashMap;

/// Running statistics are updated in train mode and only read in eval mode.
pub enum StatsAccess<'a> {
    Update(&'a mut [RunningStats]),
    Read(&'a [RunningStats]),
}

/// One forward pass: the tape being recorded, read access to parameter
/// values, and the statistics access the mode allows.
pub struct Session<'a> {
    pub tape: &'a mut Tape,
    params: &'a ParameterStore,
    stats: StatsAccess<'a>,
    pub mode: Mode,
    pub rng: &'a mut dyn RngCore,
    vars: HashMap<ParamId, Var>,
}

impl<'a> Session<'a> {
    pub fn new(
        tape: &'a mut Tape,
        params: &'a ParameterStore,
        stats: StatsAccess<'a>,
        mode: Mode,
        rng: &'a mut dyn RngCore,
    ) -> Self {
        Session {
            tape,
            params,
            stats,
            mode,
            rng,
            vars: HashMap::new(),
        }
    }

    /// Records a parameter once per pass and reuses the handle afterwards.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.vars.get(&id) {
            return v;
        }
        let v = self.tape.param(self.params.get(id), id.0);
        self.vars.insert(id, v);
        v
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.tape.leaf(t, false)
    }

    fn batch_norm(&mut self, x: Var, gamma: ParamId, beta: ParamId, stats: StatsId) -> Result<Var> {
        let (g, b) = (self.param(gamma), self.param(beta));
        let opts = BatchNormOptions::default();
        match &mut self.stats {
            StatsAccess::Update(s) => self.tape.batch_norm(x, g, b, self.mode, &mut s[stats.0], opts),
            StatsAccess::Read(s) => {
                let mut copy = s[stats.0].clone();
                self.tape.batch_norm(x, g, b, Mode::Eval, &mut copy, opts)
            }
        }
    }

    /// Vars of every decayed weight touched in this pass.
    pub fn decayed_vars(&self) -> Vec<Var> {
        let mut ids: Vec<&ParamId> = self
            .vars
            .keys()
            .filter(|id| matches!(self.params.kind(**id), ParamKind::Weight { decay: true, .. }))
            .collect();
        ids.sort();
        ids.into_iter().map(|id| self.vars[id]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new(store: &mut ParameterStore, name: &str, inputs: usize, outputs: usize, decay: bool) -> Result<Self> {
        Ok(Dense {
            weight: store.add(
                format!("{name}.weight"),
                vec![inputs, outputs],
                ParamKind::Weight { fan_in: inputs, decay },
            )?,
            bias: store.add(format!("{name}.bias"), vec![outputs], ParamKind::Bias)?,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let (w, b) = (s.param(self.weight), s.param(self.bias));
        s.tape.dense(x, w, b)
    }
}

#[derive(Debug, Clone)]
pub struct Conv {
    pub kernel: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn new(
        store: &mut ParameterStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        size: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        let kernel = store.add(
            format!("{name}.kernel"),
            vec![out_ch, in_ch, size, size],
            ParamKind::Weight {
                fan_in: in_ch * size * size,
                decay: false,
            },
        )?;
        Ok(Conv { kernel, stride, pad })
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let k = s.param(self.kernel);
        s.tape.conv2d(x, k, self.stride, self.pad)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub stats: StatsId,
}

impl BatchNorm {
    pub fn new(store: &mut ParameterStore, name: &str, features: usize) -> Result<Self> {
        Ok(BatchNorm {
            gamma: store.add(format!("{name}.gamma"), vec![features], ParamKind::Gamma)?,
            beta: store.add(format!("{name}.beta"), vec![features], ParamKind::Beta)?,
            stats: store.add_stats(format!("{name}.running"), features)?,
        })
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        s.batch_norm(x, self.gamma, self.beta, self.stats)
    }
}
