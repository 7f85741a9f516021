//! On-disk dataset layout.
//!
//! ```text
//! <root>/manifest.csv   id,top,side,sec25,sec75   (paths relative to root)
//! <root>/depths.csv     id,d1..dK
//! <root>/targets.csv    id,stress,mass,deflection
//! <root>/<id>/{top.pgm, side.pgm, sec25.csv, sec75.csv}
//! ```

use hoodframe::geometry::io::{read_pgm, read_section_csv, write_pgm, write_section_csv};
use hoodframe::geometry::{
    load_depths, CrossSection, DepthVector, FrameRecord, TargetTriple, View, ViewImage, SECTION_FRACTIONS,
};
use hoodframe::model::ModelInput;
use hoodframe::{par, Error, Result};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.csv";
pub const DEPTHS: &str = "depths.csv";
pub const TARGETS: &str = "targets.csv";
const MANIFEST_HEADER: [&str; 5] = ["id", "top", "side", "sec25", "sec75"];
const TARGET_HEADER: [&str; 4] = ["id", "stress", "mass", "deflection"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub id: String,
    pub top: PathBuf,
    pub side: PathBuf,
    pub sec25: PathBuf,
    pub sec75: PathBuf,
}

impl ManifestRow {
    /// Default per-record file names under `<id>/`.
    pub fn standard(id: &str) -> Self {
        let dir = PathBuf::from(id);
        ManifestRow {
            id: id.to_string(),
            top: dir.join("top.pgm"),
            side: dir.join("side.pgm"),
            sec25: dir.join("sec25.csv"),
            sec75: dir.join("sec75.csv"),
        }
    }

    fn paths(&self) -> [&Path; 4] {
        [&self.top, &self.side, &self.sec25, &self.sec75]
    }
}

/// Owned counterpart of `ModelInput`; vector modalities may be absent.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub id: String,
    pub top: ViewImage,
    pub side: ViewImage,
    pub sec25: Option<CrossSection>,
    pub sec75: Option<CrossSection>,
    pub depths: Option<DepthVector>,
}

impl LoadedInput {
    pub fn as_input(&self) -> ModelInput<'_> {
        ModelInput {
            id: &self.id,
            top: &self.top,
            side: &self.side,
            sec25: self.sec25.as_ref(),
            sec75: self.sec75.as_ref(),
            depths: self.depths.as_ref(),
        }
    }

    /// Reads `top.pgm` and `side.pgm` from `dir`; section files are optional.
    pub fn from_dir(id: &str, dir: &Path, depths: Option<DepthVector>) -> Result<Self> {
        let optional = |name: &str, f: f64| -> Result<Option<CrossSection>> {
            let p = dir.join(name);
            if p.exists() {
                read_section_csv(&p, f).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(LoadedInput {
            id: id.to_string(),
            top: read_pgm(&dir.join("top.pgm"), View::Top)?,
            side: read_pgm(&dir.join("side.pgm"), View::Side)?,
            sec25: optional("sec25.csv", SECTION_FRACTIONS[0])?,
            sec75: optional("sec75.csv", SECTION_FRACTIONS[1])?,
            depths,
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

/// Header fields, then each data row's fields with its line number.
type Table = (Vec<String>, Vec<(u64, Vec<String>)>);

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn number(path: &Path, line: u64, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::data(format!("{} line {line}: '{s}' is not a finite number", path.display())))
}

fn check_header(path: &Path, found: &[String], expected: &[&str]) -> Result<()> {
    if found.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::data(format!(
            "{}: header is '{}', expected '{}'",
            path.display(),
            found.join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let (header, rows) = read_table(path)?;
    check_header(path, &header, &MANIFEST_HEADER)?;
    let mut seen = HashSet::new();
    rows.into_iter()
        .map(|(line, cols)| {
            let [id, top, side, sec25, sec75]: [String; 5] = cols
                .try_into()
                .map_err(|_| Error::data(format!("{} line {line}: expected 5 columns", path.display())))?;
            if !seen.insert(id.clone()) {
                return Err(Error::data(format!(
                    "{} line {line}: duplicate id '{id}'",
                    path.display()
                )));
            }
            Ok(ManifestRow {
                id,
                top: top.into(),
                side: side.into(),
                sec25: sec25.into(),
                sec75: sec75.into(),
            })
        })
        .collect()
}

pub fn read_depths(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let (header, rows) = read_table(path)?;
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::data(format!("{}: first column must be 'id'", path.display())));
    }
    let mut out = BTreeMap::new();
    for (line, cols) in rows {
        if cols.len() != header.len() {
            return Err(Error::data(format!(
                "{} line {line}: expected {} columns",
                path.display(),
                header.len()
            )));
        }
        let values = cols[1..]
            .iter()
            .map(|s| number(path, line, s))
            .collect::<Result<Vec<_>>>()?;
        if out.insert(cols[0].clone(), values).is_some() {
            return Err(Error::data(format!(
                "{} line {line}: duplicate id '{}'",
                path.display(),
                cols[0]
            )));
        }
    }
    Ok(out)
}

pub fn read_targets(path: &Path) -> Result<BTreeMap<String, TargetTriple>> {
    let (header, rows) = read_table(path)?;
    check_header(path, &header, &TARGET_HEADER)?;
    let mut out = BTreeMap::new();
    for (line, cols) in rows {
        if cols.len() != 4 {
            return Err(Error::data(format!(
                "{} line {line}: expected 4 columns",
                path.display()
            )));
        }
        let v = [
            number(path, line, &cols[1])?,
            number(path, line, &cols[2])?,
            number(path, line, &cols[3])?,
        ];
        if out.insert(cols[0].clone(), TargetTriple::from_array(v)).is_some() {
            return Err(Error::data(format!(
                "{} line {line}: duplicate id '{}'",
                path.display(),
                cols[0]
            )));
        }
    }
    Ok(out)
}

fn fmt(v: f64) -> String {
    // Display is the shortest representation that parses back to the same bits.
    v.to_string()
}

fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let header: Vec<String> = MANIFEST_HEADER.iter().map(|s| s.to_string()).collect();
    let text = |p: &Path| p.to_string_lossy().replace('\\', "/");
    write_table(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                r.id.clone(),
                text(&r.top),
                text(&r.side),
                text(&r.sec25),
                text(&r.sec75),
            ]
        }),
    )
}

fn write_depths(path: &Path, depths: &BTreeMap<String, Vec<f64>>, order: &[ManifestRow]) -> Result<()> {
    let k = depths.values().map(Vec::len).max().unwrap_or(0);
    if let Some((id, _)) = depths.iter().find(|(_, v)| v.len() != k) {
        return Err(Error::data(format!(
            "record {id}: depth vector length differs from the dataset's {k}"
        )));
    }
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=k).map(|i| format!("d{i}")))
        .collect();
    let rows = order.iter().filter_map(|r| {
        depths
            .get(&r.id)
            .map(|v| std::iter::once(r.id.clone()).chain(v.iter().map(|&d| fmt(d))).collect())
    });
    write_table(path, &header, rows)
}

fn write_targets(path: &Path, targets: &BTreeMap<String, TargetTriple>, order: &[ManifestRow]) -> Result<()> {
    let header: Vec<String> = TARGET_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = order.iter().filter_map(|r| {
        targets.get(&r.id).map(|t| {
            std::iter::once(r.id.clone())
                .chain(t.to_array().iter().map(|&v| fmt(v)))
                .collect()
        })
    });
    write_table(path, &header, rows)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the per-record files of `rec` under `root` and returns its row.
pub fn write_record_files(root: &Path, rec: &FrameRecord) -> Result<ManifestRow> {
    if rec.id.is_empty() || rec.id.contains(['/', '\\', ',']) || rec.id.starts_with('.') {
        return Err(Error::data(format!(
            "record id '{}' is not usable as a directory name",
            rec.id
        )));
    }
    let row = ManifestRow::standard(&rec.id);
    create_dir(&root.join(&rec.id))?;
    write_pgm(&root.join(&row.top), &rec.top)?;
    write_pgm(&root.join(&row.side), &rec.side)?;
    write_section_csv(&root.join(&row.sec25), &rec.sec25)?;
    write_section_csv(&root.join(&row.sec75), &rec.sec75)?;
    Ok(row)
}

/// Writes a complete dataset, replacing any index files already in `root`.
pub fn write_dataset(root: &Path, records: &[FrameRecord]) -> Result<()> {
    create_dir(root)?;
    let rows = par::map_range(records.len(), |i| write_record_files(root, &records[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut ids = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.id.as_str())) {
        return Err(Error::data(format!("duplicate record id '{}'", dup.id)));
    }
    let depths = records
        .iter()
        .map(|r| (r.id.clone(), r.depths.values().to_vec()))
        .collect();
    let targets = records
        .iter()
        .filter_map(|r| r.targets.map(|t| (r.id.clone(), t)))
        .collect();
    write_manifest(&root.join(MANIFEST), &rows)?;
    write_depths(&root.join(DEPTHS), &depths, &rows)?;
    write_targets(&root.join(TARGETS), &targets, &rows)
}

/// Adds or replaces one record in the dataset at `root`, creating the index
/// files when absent.
pub fn upsert_record(root: &Path, rec: &FrameRecord) -> Result<()> {
    create_dir(root)?;
    let row = write_record_files(root, rec)?;
    let existing = |name: &str| root.join(name).exists().then(|| root.join(name));
    let mut rows = existing(MANIFEST)
        .map(|p| read_manifest(&p))
        .transpose()?
        .unwrap_or_default();
    let mut depths = existing(DEPTHS)
        .map(|p| read_depths(&p))
        .transpose()?
        .unwrap_or_default();
    let mut targets = existing(TARGETS)
        .map(|p| read_targets(&p))
        .transpose()?
        .unwrap_or_default();
    match rows.iter_mut().find(|r| r.id == rec.id) {
        Some(r) => *r = row,
        None => rows.push(row),
    }
    depths.insert(rec.id.clone(), rec.depths.values().to_vec());
    match rec.targets {
        Some(t) => targets.insert(rec.id.clone(), t),
        None => targets.remove(&rec.id),
    };
    write_manifest(&root.join(MANIFEST), &rows)?;
    write_depths(&root.join(DEPTHS), &depths, &rows)?;
    write_targets(&root.join(TARGETS), &targets, &rows)
}

/// A validated dataset index: every referenced file exists and ids are unique.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub depths: BTreeMap<String, Vec<f64>>,
    pub targets: BTreeMap<String, TargetTriple>,
}

impl DatasetManifest {
    pub fn load(root: &Path) -> Result<Self> {
        let manifest = root.join(MANIFEST);
        if !manifest.exists() {
            return Err(Error::data(format!("{} not found", manifest.display())));
        }
        let rows = read_manifest(&manifest)?;
        for row in &rows {
            for p in row.paths() {
                if !root.join(p).is_file() {
                    return Err(Error::data(format!(
                        "record {}: referenced file {} does not exist",
                        row.id,
                        root.join(p).display()
                    )));
                }
            }
        }
        let optional = |name: &str| root.join(name).exists().then(|| root.join(name));
        let depths = optional(DEPTHS)
            .map(|p| read_depths(&p))
            .transpose()?
            .unwrap_or_default();
        let targets = optional(TARGETS)
            .map(|p| read_targets(&p))
            .transpose()?
            .unwrap_or_default();
        let known: HashSet<&str> = rows.iter().map(|r| r.id.as_str()).collect();
        for (name, id) in depths
            .keys()
            .map(|k| (DEPTHS, k))
            .chain(targets.keys().map(|k| (TARGETS, k)))
        {
            if !known.contains(id.as_str()) {
                return Err(Error::data(format!("{name}: id '{id}' is not in the manifest")));
            }
        }
        Ok(DatasetManifest {
            root: root.to_path_buf(),
            rows,
            depths,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: &str) -> Result<&ManifestRow> {
        self.rows.iter().find(|r| r.id == id).ok_or_else(|| {
            Error::data(format!(
                "record '{id}' is not in {}",
                self.root.join(MANIFEST).display()
            ))
        })
    }

    fn depth_vector(&self, id: &str) -> Result<Option<DepthVector>> {
        self.depths
            .get(id)
            .map(|v| load_depths(v, v.len()).map_err(|e| e.with_record(id)))
            .transpose()
    }

    /// Loads a complete record; depths are required, targets optional.
    pub fn record(&self, row: &ManifestRow) -> Result<FrameRecord> {
        let at = |p: &Path| self.root.join(p);
        let depths = self
            .depth_vector(&row.id)?
            .ok_or_else(|| Error::data(format!("record {}: no row in {DEPTHS}", row.id)))?;
        Ok(FrameRecord {
            id: row.id.clone(),
            top: read_pgm(&at(&row.top), View::Top)?,
            side: read_pgm(&at(&row.side), View::Side)?,
            sec25: read_section_csv(&at(&row.sec25), SECTION_FRACTIONS[0])?,
            sec75: read_section_csv(&at(&row.sec75), SECTION_FRACTIONS[1])?,
            depths,
            targets: self.targets.get(&row.id).copied(),
        })
    }

    /// Loads every record in manifest order.
    pub fn records(&self) -> Result<Vec<FrameRecord>> {
        par::map_range(self.rows.len(), |i| self.record(&self.rows[i]))
            .into_iter()
            .collect()
    }

    /// Loads one record for prediction; depths may be absent.
    pub fn input(&self, id: &str) -> Result<LoadedInput> {
        let row = self.row(id)?;
        let at = |p: &Path| self.root.join(p);
        Ok(LoadedInput {
            id: row.id.clone(),
            top: read_pgm(&at(&row.top), View::Top)?,
            side: read_pgm(&at(&row.side), View::Side)?,
            sec25: Some(read_section_csv(&at(&row.sec25), SECTION_FRACTIONS[0])?),
            sec75: Some(read_section_csv(&at(&row.sec75), SECTION_FRACTIONS[1])?),
            depths: self.depth_vector(id)?,
        })
    }
}
