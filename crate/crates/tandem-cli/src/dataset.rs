//! Dual-fidelity descriptor datasets.
//!
//! File format: CSV with header `id, f1..fP, y_cheap, y_exp`. Every row
//! carries a constant-width feature vector and at least one of the two
//! fidelity labels; a missing label is an empty cell.

use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRow {
    pub id: String,
    pub features: Vec<f64>,
    pub y_cheap: Option<f64>,
    pub y_exp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorDataset {
    rows: Vec<DescriptorRow>,
    width: usize,
}

impl DescriptorDataset {
    pub fn new(rows: Vec<DescriptorRow>) -> Result<Self> {
        if rows.is_empty() {
            bail!("descriptor dataset has no rows");
        }
        let width = rows[0].features.len();
        if width == 0 {
            bail!("descriptor rows need at least one feature");
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != width {
                bail!(
                    "row {} ({:?}) has {} features, expected {width}",
                    i + 1,
                    row.id,
                    row.features.len()
                );
            }
            if row.y_cheap.is_none() && row.y_exp.is_none() {
                bail!("row {} ({:?}) has neither y_cheap nor y_exp", i + 1, row.id);
            }
            if let Some(bad) = row.features.iter().find(|f| !f.is_finite()) {
                bail!("row {} ({:?}) has non-finite feature {bad}", i + 1, row.id);
            }
            for y in [row.y_cheap, row.y_exp].into_iter().flatten() {
                if !y.is_finite() {
                    bail!("row {} ({:?}) has non-finite label {y}", i + 1, row.id);
                }
            }
        }
        Ok(DescriptorDataset { rows, width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[DescriptorRow] {
        &self.rows
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        let header = reader.headers().context("missing header")?.clone();
        if header.len() < 4 {
            bail!("header needs id, at least one feature, y_cheap, y_exp");
        }
        let p = header.len() - 3;
        if &header[0] != "id" {
            bail!("first column must be `id`, found {:?}", &header[0]);
        }
        for (i, name) in header.iter().enumerate().take(p + 1).skip(1) {
            let expect = format!("f{i}");
            if name != expect {
                bail!("feature column {i} must be {expect:?}, found {name:?}");
            }
        }
        if &header[p + 1] != "y_cheap" || &header[p + 2] != "y_exp" {
            bail!("last two columns must be y_cheap, y_exp");
        }

        let parse_opt = |field: &str, line: usize| -> Result<Option<f64>> {
            if field.is_empty() {
                return Ok(None);
            }
            Ok(Some(field.parse().with_context(|| {
                format!("line {line}: cannot parse {field:?} as a number")
            })?))
        };
        let mut rows = Vec::new();
        for (ri, record) in reader.records().enumerate() {
            let record = record.with_context(|| format!("record {}", ri + 2))?;
            if record.len() != p + 3 {
                bail!("line {}: {} fields, expected {}", ri + 2, record.len(), p + 3);
            }
            let mut features = Vec::with_capacity(p);
            for f in record.iter().take(p + 1).skip(1) {
                features.push(
                    f.parse::<f64>()
                        .with_context(|| format!("line {}: bad feature {f:?}", ri + 2))?,
                );
            }
            rows.push(DescriptorRow {
                id: record[0].to_string(),
                features,
                y_cheap: parse_opt(&record[p + 1], ri + 2)?,
                y_exp: parse_opt(&record[p + 2], ri + 2)?,
            });
        }
        Self::new(rows).with_context(|| format!("{}", path.display()))
    }

    // Not called by any subcommand yet; kept as the write half of the file
    // format so datasets can be produced as well as consumed.
    #[allow(dead_code)]
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        let mut header = vec!["id".to_string()];
        header.extend((1..=self.width).map(|i| format!("f{i}")));
        header.push("y_cheap".into());
        header.push("y_exp".into());
        writer.write_record(&header)?;
        // `{}` on f64 prints the shortest digits that parse back to the
        // same bits, so a write/read cycle is value-identical.
        let fmt = |v: Option<f64>| v.map(|v| format!("{v}")).unwrap_or_default();
        for row in &self.rows {
            let mut record = vec![row.id.clone()];
            record.extend(row.features.iter().map(|f| format!("{f}")));
            record.push(fmt(row.y_cheap));
            record.push(fmt(row.y_exp));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DescriptorDataset {
        DescriptorDataset::new(vec![
            DescriptorRow {
                id: "a".into(),
                features: vec![0.25, 1.0 / 3.0],
                y_cheap: Some(-1.5),
                y_exp: Some(0.125),
            },
            DescriptorRow {
                id: "b".into(),
                features: vec![0.5, std::f64::consts::PI],
                y_cheap: None,
                y_exp: Some(2.0),
            },
            DescriptorRow {
                id: "c".into(),
                features: vec![1e-300, 7.0],
                y_cheap: Some(0.1 + 0.2),
                y_exp: None,
            },
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_is_value_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = sample();
        ds.write_csv(&path).unwrap();
        let back = DescriptorDataset::read_csv(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn rejects_row_without_any_label() {
        let err = DescriptorDataset::new(vec![DescriptorRow {
            id: "x".into(),
            features: vec![1.0],
            y_cheap: None,
            y_exp: None,
        }])
        .unwrap_err();
        assert!(err.to_string().contains("neither"), "{err}");
    }

    #[test]
    fn rejects_ragged_widths() {
        let rows = vec![
            DescriptorRow { id: "a".into(), features: vec![1.0], y_cheap: Some(0.0), y_exp: None },
            DescriptorRow {
                id: "b".into(),
                features: vec![1.0, 2.0],
                y_cheap: Some(0.0),
                y_exp: None,
            },
        ];
        assert!(DescriptorDataset::new(rows).is_err());
    }

    #[test]
    fn rejects_misnamed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,x1,y_cheap,y_exp\na,1.0,2.0,\n").unwrap();
        let err = DescriptorDataset::read_csv(&path).unwrap_err();
        assert!(format!("{err:#}").contains("f1"), "{err:#}");
    }

}
