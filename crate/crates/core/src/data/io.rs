use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Column naming for dataset CSV files.
///
/// Features are the columns `{feature_prefix}0 .. {feature_prefix}{d-1}`.
/// When `group_names` is set, group values are mapped onto those ids (so
/// that train/eval/test files agree); otherwise ids are assigned densely in
/// order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_prefix: String,
    pub label_column: String,
    pub group_column: String,
    pub group_names: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            feature_prefix: "feature_".into(),
            label_column: "label".into(),
            group_column: "group".into(),
            group_names: None,
        }
    }
}

impl CsvSchema {
    pub fn with_group_names(mut self, names: Vec<String>) -> Self {
        self.group_names = Some(names);
        self
    }
}

/// JSON sidecar written next to dataset CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub group_names: Vec<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl DatasetMetadata {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    read_csv(File::open(path)?, schema)
}

/// Parses dataset CSV text. Lines starting with `#` are provenance comments.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_col = find(&schema.label_column)?;
    let group_col = find(&schema.group_column)?;

    let mut feature_cols = Vec::new();
    for (col, h) in headers.iter().enumerate() {
        if let Some(idx) = h.strip_prefix(schema.feature_prefix.as_str()) {
            if let Ok(idx) = idx.parse::<usize>() {
                feature_cols.push((idx, col));
            }
        }
    }
    feature_cols.sort_unstable();
    if feature_cols.is_empty() {
        return Err(Error::MissingColumn(format!("{}0", schema.feature_prefix)));
    }
    for (expected, &(idx, _)) in feature_cols.iter().enumerate() {
        if idx != expected {
            return Err(Error::MissingColumn(format!("{}{expected}", schema.feature_prefix)));
        }
    }
    let dim = feature_cols.len();

    let mut group_ids: HashMap<String, usize> = HashMap::new();
    let mut group_names = Vec::new();
    if let Some(names) = &schema.group_names {
        for (i, n) in names.iter().enumerate() {
            group_ids.insert(n.clone(), i);
        }
        group_names = names.clone();
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        for &(_, col) in &feature_cols {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("feature value {raw:?} is not a number"),
            })?;
            features.push(v);
        }
        let raw = record.get(label_col).unwrap_or("");
        let label = match raw {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    row,
                    message: format!("label value {other:?} is not 0 or 1"),
                })
            }
        };
        labels.push(label);
        let name = record.get(group_col).unwrap_or("");
        let id = match group_ids.get(name) {
            Some(&id) => id,
            None if schema.group_names.is_some() => {
                return Err(Error::Parse {
                    row,
                    message: format!("group {name:?} is not among the declared group names"),
                })
            }
            None => {
                let id = group_names.len();
                group_names.push(name.to_string());
                group_ids.insert(name.to_string(), id);
                id
            }
        };
        groups.push(id);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::from_flat(features, dim, labels, groups, group_names)
}

/// Writes `ds` as CSV with 17 significant digits per feature, optionally
/// preceded by a `#` comment line.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W, comment: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("feature_{j}")).collect();
    header.push("label".into());
    header.push("group".into());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..ds.len() {
        for v in ds.row(i) {
            write!(w, "{v:.16e},")?;
        }
        writeln!(w, "{},{}", ds.label(i), csv_field(&ds.group_names()[ds.group(i)]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: &Path, comment: Option<&str>) -> Result<()> {
    write_csv(ds, File::create(path)?, comment)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
