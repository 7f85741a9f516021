//! One function per subcommand. Each returns a typed error whose class
//! decides the exit code.

use crate::config::RunConfig;
use crate::dataset::{read_depths, upsert_record, write_dataset, DatasetManifest, LoadedInput, DEPTHS};
use crate::plot;
use crate::{Command, CompareArgs, EvalArgs, ExtractArgs, GenArgs, PredictArgs, SplitArg, TrainArgs};
use hoodframe::geometry::{assemble_record, load_depths, parse_stl, FrameRecord, TargetTriple};
use hoodframe::model::Modality;
use hoodframe::synth::{gen_dataset, SynthConfig};
use hoodframe::training::{
    compare_modalities, evaluate, fit_model, load_checkpoint, predict_targets, save_checkpoint, select, split_dataset,
    LossTrace,
};
use hoodframe::{Error, Result};
use std::path::{Path, PathBuf};

pub fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `<path><suffix>`, e.g. `model.ckpt` becomes `model.ckpt.trace.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let cfg = SynthConfig {
        section_len: a.section_len,
        depth_len: a.depth_len,
        max_crossing_ribs: a.max_crossing_ribs,
        ..SynthConfig::default()
    };
    let records = gen_dataset(a.count, a.seed, &cfg)?;
    write_dataset(&a.out, &records)?;
    let ribs: usize = records
        .iter()
        .map(|r| r.depths.values().iter().filter(|&&d| d > 0.0).count())
        .sum();
    println!(
        "generated {} records ({ribs} ribs) with seed {} into {}",
        records.len(),
        a.seed,
        a.out.display()
    );
    Ok(())
}

/// Numbers separated by commas, whitespace or newlines.
pub fn parse_depth_text(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::data(format!("depth value {} ('{s}') is not a finite number", i + 1)))
        })
        .collect()
}

/// Depths for `id` from either an `id,d1..dK` table or a bare list of numbers.
fn read_depth_file(path: &Path, id: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.split(',').next().map(str::trim) == Some("id") {
        let table = read_depths(path)?;
        return match (table.get(id), table.len()) {
            (Some(v), _) => Ok(v.clone()),
            (None, 1) => Ok(table.into_values().next().unwrap_or_default()),
            _ => Err(Error::data(format!("{}: no row for id '{id}'", path.display()))),
        };
    }
    parse_depth_text(&text).map_err(|e| match e {
        Error::Data(m) => Error::data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_targets(s: &str) -> Result<TargetTriple> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::usage(format!("--targets '{s}' is not three finite numbers")))?;
    let v: [f64; 3] = v
        .try_into()
        .map_err(|_| Error::usage(format!("--targets '{s}' needs stress,mass,deflection")))?;
    Ok(TargetTriple::from_array(v))
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let id = match &a.id {
        Some(id) => id.clone(),
        None => a
            .stl
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::usage(format!("cannot derive a record id from {}", a.stl.display())))?,
    };
    let targets = a.targets.as_deref().map(parse_targets).transpose()?;
    let bytes = std::fs::read(&a.stl).map_err(|e| Error::io(&a.stl, e))?;
    let mesh = parse_stl(&id, &bytes).map_err(|e| match e {
        Error::Data(m) => Error::data(format!("{}: {m}", a.stl.display())),
        other => other,
    })?;
    let values = match &a.depths {
        Some(p) if p.exists() => read_depth_file(p, &id)?,
        Some(p) => {
            eprintln!(
                "warning: depths file {} not found; recording all-zero rib depths",
                p.display()
            );
            Vec::new()
        }
        None => {
            eprintln!("warning: no depths file given; recording all-zero rib depths");
            Vec::new()
        }
    };
    let depths = load_depths(&values, a.depth_len).map_err(|e| e.with_record(&id))?;
    let record = assemble_record(&mesh, depths, targets, a.section_len)?;
    upsert_record(&a.out, &record)?;
    println!(
        "extracted {} ({} triangles) into {}",
        id,
        mesh.triangles().len(),
        a.out.display()
    );
    Ok(())
}

fn load_records(data: &Path) -> Result<Vec<FrameRecord>> {
    DatasetManifest::load(data)?.records()
}

/// Writes the trace CSV and the loss-curve SVG beside `ckpt`.
pub fn write_trace(ckpt: &Path, trace: &LossTrace, title: &str) -> Result<()> {
    write_file(&sibling(ckpt, ".trace.csv"), trace.to_csv())?;
    let x: Vec<f64> = trace.epochs.iter().map(|e| e.epoch as f64).collect();
    let train: Vec<f64> = trace.epochs.iter().map(|e| e.train_loss).collect();
    let test: Vec<f64> = trace.epochs.iter().map(|e| e.test_loss).collect();
    let svg = plot::line_chart(
        title,
        "epoch",
        "loss (normalized MSE)",
        &x,
        &[("train", &train), ("test", &test)],
    );
    write_file(&sibling(ckpt, ".loss.svg"), svg)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let modality = Modality::from(a.modality);
    let records = load_records(&a.data)?;
    let split = split_dataset(&records, cfg.train.seed)?;
    let fitted = fit_model(&records, &split, &cfg.model, modality, &cfg.train)?;
    save_checkpoint(&a.out, &fitted.model, &fitted.normalizer, cfg.train.seed)?;
    write_trace(&a.out, &fitted.trace, &format!("{modality} training loss"))?;
    let best = fitted
        .trace
        .epochs
        .iter()
        .min_by(|x, y| x.test_loss.total_cmp(&y.test_loss))
        .map_or(f64::NAN, |e| e.test_loss);
    println!(
        "trained {modality} model on {} records for {} epochs (best test loss {best:.6}); checkpoint {}",
        split.train.len(),
        fitted.trace.len(),
        a.out.display()
    );
    Ok(())
}

fn predict_input(a: &PredictArgs) -> Result<LoadedInput> {
    let dir = Path::new(&a.record);
    if dir.is_dir() {
        let id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| a.record.clone());
        let table = match &a.data {
            Some(d) => Some(d.join(DEPTHS)),
            None => dir.parent().map(|p| p.join(DEPTHS)),
        };
        let depths = match table.filter(|p| p.exists()) {
            Some(p) => read_depths(&p)?.get(&id).map(|v| load_depths(v, v.len())).transpose()?,
            None => None,
        };
        return LoadedInput::from_dir(&id, dir, depths);
    }
    match &a.data {
        Some(data) => DatasetManifest::load(data)?.input(&a.record),
        None => Err(Error::data(format!("record directory {} not found", dir.display()))),
    }
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt, a.modality.map(Modality::from))?;
    let input = predict_input(a)?;
    let t = predict_targets(&ckpt.model, &ckpt.normalizer, &[input.as_input()])?[0];
    let v = t.to_array();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!("record {}: prediction is not finite", input.id)));
    }
    println!("id,stress_mpa,mass_kg,deflection_mm");
    println!("{},{},{},{}", input.id, v[0], v[1], v[2]);
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt, None)?;
    let records = load_records(&a.data)?;
    let chosen: Vec<&FrameRecord> = match a.split {
        SplitArg::All => records.iter().collect(),
        SplitArg::Test | SplitArg::Holdout => {
            let split = split_dataset(&records, ckpt.split_seed)?;
            let ids = if a.split == SplitArg::Test {
                &split.test
            } else {
                &split.holdout
            };
            select(&records, ids)?
        }
    };
    let report = evaluate(&ckpt.model, &chosen, &ckpt.normalizer)?;
    write_file(&a.out.join("metrics.csv"), report.to_csv())?;
    write_file(&a.out.join("residuals.csv"), report.residuals_csv())?;
    for (k, name) in TargetTriple::NAMES.iter().enumerate() {
        let rows = report.residuals.iter().skip(k).step_by(3);
        let actual: Vec<f64> = rows.clone().map(|r| r.actual).collect();
        let predicted: Vec<f64> = rows.map(|r| r.predicted).collect();
        let svg = plot::scatter(&format!("{name}: actual vs predicted"), &actual, &predicted);
        write_file(&a.out.join(format!("scatter_{name}.svg")), svg)?;
    }
    print!("{}", report.to_csv());
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let records = load_records(&a.data)?;
    let report = compare_modalities(&records, &cfg.model, &cfg.train)?;
    write_file(&a.out, report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_text_accepts_mixed_separators() {
        assert_eq!(parse_depth_text("12, 8.5\n20\n").unwrap(), vec![12.0, 8.5, 20.0]);
        assert!(parse_depth_text("").unwrap().is_empty());
        assert!(matches!(parse_depth_text("1, nan"), Err(Error::Data(_))));
    }

    #[test]
    fn depth_table_rows_are_looked_up_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "id,d1,d2\na,1,2\nb,3,0\n").unwrap();
        assert_eq!(read_depth_file(&p, "b").unwrap(), vec![3.0, 0.0]);
        assert!(matches!(read_depth_file(&p, "c"), Err(Error::Data(_))));
        std::fs::write(&p, "id,d1\nonly,7\n").unwrap();
        assert_eq!(read_depth_file(&p, "other").unwrap(), vec![7.0]);
    }

    #[test]
    fn targets_flag_needs_three_numbers() {
        assert_eq!(parse_targets("1,2,3").unwrap().to_array(), [1.0, 2.0, 3.0]);
        assert!(matches!(parse_targets("1,2"), Err(Error::Usage(_))));
        assert!(matches!(parse_targets("1,x,3"), Err(Error::Usage(_))));
    }

    #[test]
    fn sibling_appends_suffix() {
        assert_eq!(
            sibling(Path::new("out/m.ckpt"), ".trace.csv"),
            PathBuf::from("out/m.ckpt.trace.csv")
        );
    }
}
