use crate::error::{Error, Result};
use crate::geometry::TargetTriple;

/// Per-target standardization fitted on the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub mean: [f64; 3],
    /// Population standard deviation.
    pub std: [f64; 3],
}

impl Normalizer {
    pub fn fit(targets: &[TargetTriple]) -> Result<Self> {
        if targets.len() < 2 {
            return Err(Error::data(format!(
                "need at least 2 training targets, got {}",
                targets.len()
            )));
        }
        let n = targets.len() as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for t in targets {
            mean.iter_mut().zip(t.to_array()).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for t in targets {
            std.iter_mut()
                .zip(t.to_array().iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        for (k, s) in std.iter_mut().enumerate() {
            *s = (*s / n).sqrt();
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::data(format!(
                    "{} has zero spread over the training split",
                    TargetTriple::NAMES[k]
                )));
            }
        }
        Ok(Normalizer { mean, std })
    }

    pub fn apply(&self, t: TargetTriple) -> [f64; 3] {
        let v = t.to_array();
        std::array::from_fn(|k| (v[k] - self.mean[k]) / self.std[k])
    }

    pub fn invert(&self, z: [f64; 3]) -> TargetTriple {
        TargetTriple::from_array(std::array::from_fn(|k| z[k] * self.std[k] + self.mean[k]))
    }
}
