//! CSV ingestion and emission: comma-separated, double-quote escaping,
//! UTF-8, header row required. Missing numeric cells are filled per the
//! schema policy; missing categorical cells become the `__MISSING__` token.

use std::path::Path;

use pipegrad_core::data::{
    Column, ColumnKind, ColumnSchema, DataError, Dataset, MissingPolicy, MISSING_TOKEN,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// The schema sidecar document: ordered column descriptions plus the label
/// column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub columns: Vec<ColumnSchema>,
    pub label_column: String,
}

pub fn read_schema(path: &Path) -> Result<SchemaFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read schema `{}`: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("schema `{}`: {e}", path.display())))
}

pub fn write_schema(path: &Path, schema: &SchemaFile) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(schema)?)?;
    Ok(())
}

/// Loads a CSV into a [`Dataset`]: every non-label header column must be in
/// the schema and vice versa; the label column must contain only 0/1; numeric
/// misses are filled per policy, categorical misses become `__MISSING__`.
/// Row order is preserved.
pub fn load_csv(
    path: &Path,
    schema: &[ColumnSchema],
    label_column: &str,
) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot open `{}`: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Config(format!("`{}`: {e}", path.display())))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    for s in schema {
        if !headers.iter().any(|h| h == &s.name) {
            return Err(DataError::UnknownColumn(s.name.clone()).into());
        }
    }
    for h in &headers {
        if h != label_column && !schema.iter().any(|s| &s.name == h) {
            return Err(CliError::Config(format!(
                "csv column `{h}` is not in the schema"
            )));
        }
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| CliError::Config(format!("label column `{label_column}` not in header")))?;
    let col_idx: Vec<usize> = schema
        .iter()
        .map(|s| headers.iter().position(|h| h == &s.name).expect("checked"))
        .collect();

    // First pass: raw cells.
    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::Config(format!("`{}` row {}: {e}", path.display(), row_number + 1))
        })?;
        let label_cell = record.get(label_idx).unwrap_or("");
        labels.push(match label_cell {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CliError::Config(format!(
                    "invalid label `{other}` at row {} (labels must be 0 or 1)",
                    row_number + 1
                )))
            }
        });
        raw.push(
            col_idx
                .iter()
                .map(|&i| record.get(i).unwrap_or("").to_string())
                .collect(),
        );
    }

    let mut columns = Vec::with_capacity(schema.len());
    for (j, s) in schema.iter().enumerate() {
        match s.kind {
            ColumnKind::Numeric => {
                let mut values = Vec::with_capacity(raw.len());
                let mut missing_rows = Vec::new();
                for (r, row) in raw.iter().enumerate() {
                    let cell = row[j].trim();
                    if cell.is_empty() {
                        missing_rows.push(r);
                        values.push(0.0);
                        continue;
                    }
                    let v: f64 = cell.parse().map_err(|_| {
                        CliError::Config(format!(
                            "unparseable numeric cell `{cell}` at row {} column `{}`",
                            r + 1,
                            s.name
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(CliError::Config(format!(
                            "non-finite value at row {} column `{}`",
                            r + 1,
                            s.name
                        )));
                    }
                    values.push(v);
                }
                if s.missing_policy == MissingPolicy::FillMean && !missing_rows.is_empty() {
                    let present = values.len() - missing_rows.len();
                    let mean = if present == 0 {
                        0.0
                    } else {
                        let missing_set: std::collections::HashSet<usize> =
                            missing_rows.iter().copied().collect();
                        values
                            .iter()
                            .enumerate()
                            .filter(|(r, _)| !missing_set.contains(r))
                            .map(|(_, v)| v)
                            .sum::<f64>()
                            / present as f64
                    };
                    for r in missing_rows {
                        values[r] = mean;
                    }
                }
                columns.push(Column::Numeric(values));
            }
            ColumnKind::Categorical => {
                columns.push(Column::Categorical(
                    raw.iter()
                        .map(|row| {
                            let cell = row[j].trim();
                            if cell.is_empty() {
                                MISSING_TOKEN.to_string()
                            } else {
                                cell.to_string()
                            }
                        })
                        .collect(),
                ));
            }
        }
    }

    Dataset::new(schema.to_vec(), columns, labels).map_err(Into::into)
}

/// Writes a dataset back to CSV (schema order, label column last). Numeric
/// formatting is shortest-round-trip, so load ∘ write is the identity.
pub fn write_csv(path: &Path, ds: &Dataset, label_column: &str) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot write `{}`: {e}", path.display())))?;
    let mut header: Vec<String> = ds.schema.iter().map(|s| s.name.clone()).collect();
    header.push(label_column.to_string());
    writer
        .write_record(&header)
        .map_err(|e| CliError::Config(e.to_string()))?;
    for r in 0..ds.rows() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for c in &ds.columns {
            record.push(match c {
                Column::Numeric(v) => format!("{}", v[r]),
                Column::Categorical(v) => v[r].clone(),
            });
        }
        record.push(format!("{}", ds.labels[r]));
        writer
            .write_record(&record)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pipegrad_core::data::MissingPolicy;

    fn schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema {
                name: "x".into(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillZero,
            },
            ColumnSchema {
                name: "m".into(),
                kind: ColumnKind::Numeric,
                missing_policy: MissingPolicy::FillMean,
            },
            ColumnSchema {
                name: "c".into(),
                kind: ColumnKind::Categorical,
                missing_policy: MissingPolicy::FillZero,
            },
        ]
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_verbatim_values() {
        let f = write_tmp("x,m,c,label\n1.5,2.0,a,0\n-0.25,4.0,b,1\n3.0,6.0,a,1\n");
        let ds = load_csv(f.path(), &schema(), "label").unwrap();
        assert_eq!(ds.rows(), 3);
        assert_eq!(ds.numeric("x").unwrap(), &[1.5, -0.25, 3.0]);
        assert_eq!(ds.labels, vec![0, 1, 1]);
    }

    #[test]
    fn fills_missing_per_policy() {
        let f = write_tmp("x,m,c,label\n,2.0,,0\n1.0,,b,1\n2.0,4.0,b,1\n");
        let ds = load_csv(f.path(), &schema(), "label").unwrap();
        // fill_zero on x.
        assert_eq!(ds.numeric("x").unwrap()[0], 0.0);
        // fill_mean on m: mean of 2.0 and 4.0.
        assert_eq!(ds.numeric("m").unwrap()[1], 3.0);
        // categorical miss becomes the token.
        assert_eq!(ds.categorical("c").unwrap()[0], MISSING_TOKEN);
    }

    #[test]
    fn bad_label_is_an_error() {
        let f = write_tmp("x,m,c,label\n1.0,2.0,a,2\n");
        let err = load_csv(f.path(), &schema(), "label").unwrap_err();
        assert!(err.to_string().contains("invalid label"));
    }

    #[test]
    fn unparseable_numeric_names_row_and_column() {
        let f = write_tmp("x,m,c,label\n1.0,2.0,a,0\noops,2.0,a,1\n");
        let err = load_csv(f.path(), &schema(), "label").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("`x`"), "{msg}");
    }

    #[test]
    fn unknown_schema_column_is_an_error() {
        let f = write_tmp("x,m,label\n1.0,2.0,0\n");
        let err = load_csv(f.path(), &schema(), "label").unwrap_err();
        assert!(err.to_string().contains("c"));
    }

    #[test]
    fn roundtrip_is_identity() {
        let f = write_tmp("x,m,c,label\n0.1,2.5e-3,hello world,0\n-7.25,0.3333333333333333,\"a,b\",1\n1e300,0.0,ü,0\n");
        let ds = load_csv(f.path(), &schema(), "label").unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(out.path(), &ds, "label").unwrap();
        let ds2 = load_csv(out.path(), &schema(), "label").unwrap();
        assert_eq!(ds, ds2);
    }
}
