//! `key = value` run configuration covering model and training settings.

use hoodframe::model::ModelConfig;
use hoodframe::training::TrainConfig;
use hoodframe::{Error, Result};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub const KEYS: [&str; 13] = [
    "encoder",
    "section_len",
    "depth_len",
    "dropout_rates",
    "l2_lambda",
    "seed",
    "initial_lr",
    "epochs",
    "batch_size",
    "plateau_patience",
    "plateau_factor",
    "min_lr",
    "min_delta",
];

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::usage(format!("config line {line}: invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Parses one `key = value` per line; `#` starts a comment. Unknown keys
    /// are rejected. `seed` drives both initialization and the split.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::usage(format!("config line {line}: expected key = value, found '{body}'")))?;
            let (m, t) = (&mut cfg.model, &mut cfg.train);
            match key {
                "encoder" => {
                    m.encoder = value
                        .parse()
                        .map_err(|e: Error| Error::usage(format!("config line {line}: {e}")))?
                }
                "section_len" => m.section_len = parse(key, value, line)?,
                "depth_len" => m.depth_len = parse(key, value, line)?,
                "dropout_rates" => {
                    let rates: Vec<f64> = value
                        .split(',')
                        .map(|v| parse(key, v.trim(), line))
                        .collect::<Result<_>>()?;
                    m.dropout_rates = rates
                        .try_into()
                        .map_err(|_| Error::usage(format!("config line {line}: dropout_rates needs 3 values")))?;
                }
                "l2_lambda" => {
                    m.l2_lambda = parse(key, value, line)?;
                    t.l2_lambda = m.l2_lambda;
                }
                "seed" => {
                    m.seed = parse(key, value, line)?;
                    t.seed = m.seed;
                }
                "initial_lr" => t.initial_lr = parse(key, value, line)?,
                "epochs" => t.epochs = parse(key, value, line)?,
                "batch_size" => t.batch_size = parse(key, value, line)?,
                "plateau_patience" => t.plateau_patience = parse(key, value, line)?,
                "plateau_factor" => t.plateau_factor = parse(key, value, line)?,
                "min_lr" => t.min_lr = parse(key, value, line)?,
                "min_delta" => t.min_delta = parse(key, value, line)?,
                other => {
                    return Err(Error::usage(format!(
                        "config line {line}: unknown key '{other}' (known: {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hoodframe::model::EncoderPreset;

    #[test]
    fn parses_every_key() {
        let text = "# run\nencoder = mini\nsection_len=64\ndepth_len = 8\ndropout_rates = 0.1, 0.2, 0.3\n\
                    l2_lambda = 0.001\nseed = 42 # trailing\ninitial_lr = 1e-3\nepochs = 7\nbatch_size = 8\n\
                    plateau_patience = 2\nplateau_factor = 0.25\nmin_lr = 1e-6\nmin_delta = 0\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.model.encoder, EncoderPreset::Mini);
        assert_eq!((cfg.model.section_len, cfg.model.depth_len), (64, 8));
        assert_eq!(cfg.model.dropout_rates, [0.1, 0.2, 0.3]);
        assert_eq!((cfg.model.seed, cfg.train.seed), (42, 42));
        assert_eq!(cfg.train.l2_lambda, 0.001);
        assert_eq!(
            (cfg.train.epochs, cfg.train.batch_size, cfg.train.plateau_patience),
            (7, 8, 2)
        );
        assert_eq!(
            (cfg.train.initial_lr, cfg.train.plateau_factor, cfg.train.min_lr),
            (1e-3, 0.25, 1e-6)
        );
    }

    #[test]
    fn defaults_without_keys() {
        let cfg = RunConfig::parse("\n# nothing\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.train.initial_lr, 1e-5);
    }

    #[test]
    fn unknown_key_is_named() {
        match RunConfig::parse("epochs = 3\nlearning_rate = 0.1\n") {
            Err(Error::Usage(msg)) => assert!(msg.contains("learning_rate") && msg.contains("line 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("epochs 3"), Err(Error::Usage(_))));
        assert!(matches!(RunConfig::parse("epochs = three"), Err(Error::Usage(_))));
        assert!(matches!(RunConfig::parse("plateau_factor = 1.5"), Err(Error::Usage(_))));
    }
}
