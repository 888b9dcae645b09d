//! CSV input and output. Empty cells are missing values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Columns, DataError, FeatureGroups, LabelKind, MaskedDataset, PatternPolicy, PatternRegistry,
};
use crate::numeric::Matrix;

/// One data-source group: a name and the CSV columns it owns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub columns: Vec<String>,
}

/// The `[data]` section of a config file.
///
/// Columns not named by any group each form a group of their own. When
/// `patterns` is absent the response patterns are discovered from the rows;
/// when present (each pattern listing its observed groups) rows with any other
/// mask are rejected unless `auto_register` is set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSchema {
    pub label: Option<String>,
    #[serde(default)]
    pub label_type: LabelKind,
    #[serde(default)]
    pub groups: Vec<GroupSpec>,
    pub patterns: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub auto_register: bool,
}

impl DataSchema {
    /// Resolves column metadata for a header row.
    pub fn columns_for(&self, header: &[String]) -> Result<Columns, DataError> {
        if let Some(label) = &self.label {
            if !header.contains(label) {
                return Err(DataError::UnknownColumn(label.clone()));
            }
        }
        let feature_names: Vec<String> = header
            .iter()
            .filter(|h| Some(*h) != self.label.as_ref())
            .cloned()
            .collect();
        let mut names: Vec<String> = Vec::new();
        let mut of_feature: Vec<Option<usize>> = vec![None; feature_names.len()];
        for group in &self.groups {
            if names.contains(&group.name) {
                return Err(DataError::Schema(format!(
                    "group {:?} declared twice",
                    group.name
                )));
            }
            let g = names.len();
            names.push(group.name.clone());
            for col in &group.columns {
                let j = feature_names
                    .iter()
                    .position(|f| f == col)
                    .ok_or_else(|| DataError::UnknownColumn(col.clone()))?;
                if of_feature[j].is_some() {
                    return Err(DataError::Schema(format!(
                        "column {col:?} is in two groups"
                    )));
                }
                of_feature[j] = Some(g);
            }
        }
        let of_feature = of_feature
            .into_iter()
            .enumerate()
            .map(|(j, g)| {
                g.unwrap_or_else(|| {
                    names.push(feature_names[j].clone());
                    names.len() - 1
                })
            })
            .collect();
        let groups = FeatureGroups::new(names, of_feature)?;
        let mut columns = Columns::new(feature_names, groups);
        if let Some(label) = &self.label {
            columns = columns.with_label(label, self.label_type);
        }
        Ok(columns)
    }

    pub fn pattern_policy(&self, columns: &Columns) -> Result<PatternPolicy, DataError> {
        let Some(patterns) = &self.patterns else {
            return Ok(PatternPolicy::Discover);
        };
        let mut masks = Vec::with_capacity(patterns.len());
        for observed in patterns {
            let mut mask = vec![false; columns.feature_names.len()];
            for name in observed {
                let g = columns.groups.index_of(name).ok_or_else(|| {
                    DataError::Schema(format!("pattern names unknown group {name:?}"))
                })?;
                for j in columns.groups.members(g) {
                    mask[j] = true;
                }
            }
            masks.push(mask);
        }
        let registry = PatternRegistry::from_masks(masks)?;
        Ok(if self.auto_register {
            PatternPolicy::Extend(registry)
        } else {
            PatternPolicy::Strict(registry)
        })
    }
}

pub fn load_csv(path: &Path, schema: &DataSchema) -> Result<MaskedDataset, DataError> {
    let file =
        std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &DataSchema) -> Result<MaskedDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DataError::Empty);
    }
    let columns = schema.columns_for(&header)?;
    let label_pos = schema
        .label
        .as_ref()
        .and_then(|l| header.iter().position(|h| h == l));
    let d = columns.feature_names.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = record.position().map_or(n + 2, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(DataError::Ragged {
                line,
                expected: header.len(),
                got: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let value = if cell.is_empty() {
                f64::NAN
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                    line,
                    column: header[c].clone(),
                    value: cell.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonNumeric {
                        line,
                        column: header[c].clone(),
                        value: cell.to_owned(),
                    });
                }
                v
            };
            if Some(c) == label_pos {
                if value.is_nan() {
                    return Err(DataError::MissingLabel { row: n });
                }
                labels.push(value);
            } else {
                values.push(value);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(DataError::Empty);
    }
    let features = Matrix::from_vec(n, d, values)?;
    let policy = schema.pattern_policy(&columns)?;
    MaskedDataset::new(features, label_pos.map(|_| labels), columns, policy)
}

/// Writes features (empty cells for NaN) and, when given, a label column last.
pub fn write_csv<W: Write>(
    writer: W,
    feature_names: &[String],
    features: &Matrix,
    label: Option<(&str, &[f64])>,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = feature_names.iter().map(String::as_str).collect();
    if let Some((name, _)) = label {
        header.push(name);
    }
    w.write_record(&header)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    for (i, row) in features.iter_rows().enumerate() {
        let mut rec: Vec<String> = row
            .iter()
            .map(|v| {
                if v.is_finite() {
                    v.to_string()
                } else {
                    String::new()
                }
            })
            .collect();
        if let Some((_, y)) = label {
            rec.push(y[i].to_string());
        }
        w.write_record(&rec)
            .map_err(|e| DataError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}

/// Writes a dataset back in the layout it was read from.
pub fn save_dataset(path: &Path, ds: &MaskedDataset) -> Result<(), DataError> {
    let file = std::fs::File::create(path)
        .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let cols = ds.columns();
    let label = match (&cols.label_name, ds.labels()) {
        (Some(name), Some(y)) => Some((name.as_str(), y)),
        _ => None,
    };
    write_csv(file, &cols.feature_names, ds.features(), label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, schema: &DataSchema) -> Result<MaskedDataset, DataError> {
        read_csv(text.as_bytes(), schema)
    }

    #[test]
    fn mask_from_empty_cells() {
        let ds = read("a,b\n1,2\n3,\n5,6\n", &DataSchema::default()).unwrap();
        let masks: Vec<Vec<bool>> = (0..3).map(|i| ds.mask_row(i).to_vec()).collect();
        assert_eq!(
            masks,
            vec![vec![true, true], vec![true, false], vec![true, true]]
        );
        assert_eq!(ds.k(), 2);
        assert!(ds.row(1)[1].is_nan());
    }

    #[test]
    fn complete_file_has_one_pattern() {
        let ds = read("a,b\n1,2\n3,4\n", &DataSchema::default()).unwrap();
        assert_eq!(ds.k(), 1);
        assert!(ds.registry().first_is_complete());
    }

    #[test]
    fn missing_label_is_an_error() {
        let schema = DataSchema {
            label: Some("y".into()),
            ..Default::default()
        };
        let err = read("a,y\n1,0\n2,\n", &schema).unwrap_err();
        assert!(matches!(err, DataError::MissingLabel { row: 1 }));
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        assert!(matches!(
            read("a,b\n1,2\n3\n", &DataSchema::default()),
            Err(DataError::Ragged { line: 3, .. })
        ));
        assert!(matches!(
            read("a,b\n1,x\n", &DataSchema::default()),
            Err(DataError::NonNumeric { .. })
        ));
    }

    #[test]
    fn declared_patterns_are_strict() {
        let schema = DataSchema {
            groups: vec![
                GroupSpec {
                    name: "base".into(),
                    columns: vec!["a".into()],
                },
                GroupSpec {
                    name: "extra".into(),
                    columns: vec!["b".into(), "c".into()],
                },
            ],
            patterns: Some(vec![vec!["base".into(), "extra".into()]]),
            ..Default::default()
        };
        let text = "a,b,c\n1,2,3\n4,,\n";
        assert!(matches!(
            read(text, &schema),
            Err(DataError::UnknownPattern { row: 1, .. })
        ));
        let lenient = DataSchema {
            auto_register: true,
            ..schema
        };
        let ds = read(text, &lenient).unwrap();
        assert_eq!(ds.k(), 2);
        assert_eq!(ds.columns().groups.members(1), vec![1, 2]);
    }

    #[test]
    fn write_then_read_preserves_missing_cells() {
        let schema = DataSchema {
            label: Some("y".into()),
            label_type: LabelKind::Binary,
            ..Default::default()
        };
        let ds = read("a,b,y\n0.25,,1\n1.5,2,0\n", &schema).unwrap();
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &ds.columns().feature_names,
            ds.features(),
            Some(("y", ds.labels().unwrap())),
        )
        .unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap(), &schema).unwrap();
        assert_eq!(back.mask_matrix(), ds.mask_matrix());
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.row(1), ds.row(1));
    }
}
