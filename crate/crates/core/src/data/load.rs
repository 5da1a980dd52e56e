//! Text dataset formats.
//!
//! Delimited: one sample per line, the label in a configurable column and
//! every other column a feature. Sparse: `label idx:val idx:val ...` with
//! 1-based indices; the feature count is the largest index in the file and
//! absent entries are zero. Blank lines and lines starting with `#` are
//! skipped in both. Label tokens are mapped to class ids `1..=C` in order of
//! first appearance.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Dataset;

/// Which column of a delimited file holds the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    First,
    #[default]
    Last,
    /// 0-based column index.
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Format {
    Delimited {
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default)]
        label_column: LabelColumn,
    },
    SparseIndexValue,
}

fn default_delimiter() -> char {
    ','
}

impl Default for Format {
    fn default() -> Self {
        Format::Delimited {
            delimiter: ',',
            label_column: LabelColumn::Last,
        }
    }
}

/// A parsed file: the dataset plus the label token behind each class id.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    /// `class_tokens[c - 1]` is the token that became class `c`.
    pub class_tokens: Vec<String>,
}

/// One parsed delimited line.
#[derive(Debug, Clone, PartialEq)]
pub struct DelimitedRecord {
    pub label: String,
    pub features: Vec<f64>,
}

impl DelimitedRecord {
    pub fn parse(line: &str, delimiter: char, label_column: LabelColumn) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        if fields.len() < 2 {
            return Err(format!("expected at least 2 fields, found {}", fields.len()));
        }
        let at = match label_column {
            LabelColumn::First => 0,
            LabelColumn::Last => fields.len() - 1,
            LabelColumn::Index(i) if i < fields.len() => i,
            LabelColumn::Index(i) => return Err(format!("label column {i} missing ({} fields)", fields.len())),
        };
        let label = fields[at];
        if label.is_empty() {
            return Err("empty label".into());
        }
        let features = fields
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != at)
            .map(|(k, f)| parse_value(f).map_err(|e| format!("column {k}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(DelimitedRecord {
            label: label.to_string(),
            features,
        })
    }

    pub fn to_line(&self, delimiter: char, label_column: LabelColumn) -> String {
        let mut fields: Vec<String> = self.features.iter().map(|v| v.to_string()).collect();
        let at = match label_column {
            LabelColumn::First => 0,
            LabelColumn::Last => fields.len(),
            LabelColumn::Index(i) => i.min(fields.len()),
        };
        fields.insert(at, self.label.clone());
        fields.join(&delimiter.to_string())
    }
}

/// One parsed sparse line: label token and `(1-based index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRecord {
    pub label: String,
    pub entries: Vec<(usize, f64)>,
}

impl SparseRecord {
    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let mut tokens = line.split_ascii_whitespace();
        let label = tokens.next().ok_or("missing label")?;
        if label.contains(':') {
            return Err(format!("label token {label:?} looks like an index:value pair"));
        }
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| format!("expected index:value, found {tok:?}"))?;
            let idx: usize = idx.parse().map_err(|_| format!("bad index {idx:?}"))?;
            if idx == 0 {
                return Err("indices are 1-based; found 0".into());
            }
            if entries.iter().any(|&(i, _)| i == idx) {
                return Err(format!("duplicate index {idx}"));
            }
            entries.push((idx, parse_value(val)?));
        }
        Ok(SparseRecord {
            label: label.to_string(),
            entries,
        })
    }

    pub fn to_line(&self) -> String {
        let mut out = self.label.clone();
        for (i, v) in &self.entries {
            out.push_str(&format!(" {i}:{v}"));
        }
        out
    }
}

fn parse_value(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value {s:?}"))
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

#[derive(Default)]
struct LabelMap {
    ids: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl LabelMap {
    fn id(&mut self, token: &str) -> usize {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        self.tokens.push(token.to_string());
        let id = self.tokens.len();
        self.ids.insert(token.to_string(), id);
        id
    }
}

/// Parses dataset text; `origin` names the source in error messages.
pub fn parse(text: &str, format: &Format, origin: &str) -> Result<Loaded> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut labels = LabelMap::default();
    let mut y = Vec::new();
    let (n_features, features) = match *format {
        Format::Delimited {
            delimiter,
            label_column,
        } => {
            let mut width = None;
            let mut features = Vec::new();
            for (no, line) in content_lines(text) {
                let rec = DelimitedRecord::parse(line, delimiter, label_column).map_err(|m| err(no, m))?;
                match width {
                    None => width = Some(rec.features.len()),
                    Some(w) if w != rec.features.len() => {
                        return Err(err(
                            no,
                            format!("inconsistent feature count: {} (expected {w})", rec.features.len()),
                        ))
                    }
                    _ => {}
                }
                y.push(labels.id(&rec.label));
                features.extend(rec.features);
            }
            (width.unwrap_or(0), features)
        }
        Format::SparseIndexValue => {
            let mut records = Vec::new();
            for (no, line) in content_lines(text) {
                let rec = SparseRecord::parse(line).map_err(|m| err(no, m))?;
                y.push(labels.id(&rec.label));
                records.push(rec);
            }
            let d = records
                .iter()
                .flat_map(|r| r.entries.iter().map(|&(i, _)| i))
                .max()
                .unwrap_or(0);
            let mut features = vec![0.0; records.len() * d];
            for (r, rec) in records.iter().enumerate() {
                for &(i, v) in &rec.entries {
                    features[r * d + i - 1] = v;
                }
            }
            (d, features)
        }
    };
    if y.is_empty() {
        return Err(err(0, "no samples".into()));
    }
    let dataset = Dataset::new(y.len(), n_features, features, y)?;
    Ok(Loaded {
        dataset,
        class_tokens: labels.tokens,
    })
}

/// Reads and parses a dataset file.
pub fn load(path: impl AsRef<Path>, format: &Format) -> Result<Dataset> {
    load_with_classes(path, format).map(|l| l.dataset)
}

pub fn load_with_classes(path: impl AsRef<Path>, format: &Format) -> Result<Loaded> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, format, &path.display().to_string())
}

/// Writes `data` as comma-delimited text with the class id in the last column.
pub fn write_delimited(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (row, y) in data.rows().zip(data.labels()) {
        let rec = DelimitedRecord {
            label: y.to_string(),
            features: row.to_vec(),
        };
        out.push_str(&rec.to_line(',', LabelColumn::Last));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sparse_example() {
        let l = parse("1 1:0.5 3:2.0\n2 2:1\n", &Format::SparseIndexValue, "mem").unwrap();
        assert_eq!(l.dataset.row(0), &[0.5, 0.0, 2.0]);
        assert_eq!(l.dataset.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(l.dataset.labels(), &[1, 2]);
    }

    #[test]
    fn delimited_example_remaps_tokens() {
        let text = "# header comment\n5.1,3.5,1.4,0.2,Iris-setosa\n\n6.3,3.3,6.0,2.5,Iris-virginica\n4.9,3.0,1.4,0.2,Iris-setosa\n";
        let l = parse(text, &Format::default(), "mem").unwrap();
        assert_eq!(l.dataset.dim(), 4);
        assert_eq!(l.dataset.labels(), &[1, 2, 1]);
        assert_eq!(l.class_tokens, vec!["Iris-setosa", "Iris-virginica"]);
    }

    #[test]
    fn label_first_and_custom_delimiter() {
        let fmt = Format::Delimited {
            delimiter: ';',
            label_column: LabelColumn::First,
        };
        let l = parse("b;1;2\na;3;4\n", &fmt, "mem").unwrap();
        assert_eq!(l.dataset.labels(), &[1, 2]);
        assert_eq!(l.dataset.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(parse("", &Format::default(), "mem").is_err());
        let e = parse("1,2,a\n1,x,b\n", &Format::default(), "f.csv").unwrap_err();
        assert!(e.to_string().starts_with("f.csv:2:"), "{e}");
        let e = parse("1,2,a\n1,b\n", &Format::default(), "f.csv").unwrap_err();
        assert!(e.to_string().contains("inconsistent feature count"), "{e}");
        let e = parse("1 0:1.0\n", &Format::SparseIndexValue, "s").unwrap_err();
        assert!(e.to_string().contains("1-based"), "{e}");
        assert!(parse("1 2:1 2:3\n2 1:1\n", &Format::SparseIndexValue, "s").is_err());
        assert!(parse("1,nan,a\n2,1,b\n", &Format::default(), "s").is_err());
    }

    #[test]
    fn file_roundtrip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = Dataset::from_rows(
            &[vec![0.1, 1.0 / 3.0], vec![-7e-12, 2.0], vec![3.0, 4.0]],
            vec![1, 2, 2],
        )
        .unwrap();
        write_delimited(&ds, &path).unwrap();
        let back = load(&path, &Format::default()).unwrap();
        assert_eq!(back, ds);
        assert!(load(dir.path().join("missing.csv"), &Format::default()).is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL
    }

    proptest! {
        #[test]
        fn sparse_line_roundtrip(label in "[a-z0-9+-]{1,6}", entries in prop::collection::btree_map(1usize..1000, finite(), 0..8)) {
            let rec = SparseRecord { label, entries: entries.into_iter().collect() };
            let line = rec.to_line();
            let parsed = SparseRecord::parse(&line).unwrap();
            prop_assert_eq!(&parsed, &rec);
            prop_assert_eq!(parsed.to_line(), line);
        }

        #[test]
        fn delimited_line_roundtrip(label in "[A-Za-z][A-Za-z0-9_-]{0,8}", features in prop::collection::vec(finite(), 1..8), first in any::<bool>()) {
            let col = if first { LabelColumn::First } else { LabelColumn::Last };
            let rec = DelimitedRecord { label, features };
            let line = rec.to_line(',', col);
            let parsed = DelimitedRecord::parse(&line, ',', col).unwrap();
            prop_assert_eq!(&parsed, &rec);
            prop_assert_eq!(parsed.to_line(',', col), line);
        }
    }
}
