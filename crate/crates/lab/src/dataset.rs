//! CSV ingestion: one-hot categoricals, grid-snapped numerics, seeded
//! 60/20/20 split.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tra_core::generate::split_indices;
use tra_core::{FeatureSchema, Label, Point};

use crate::io::{FeatureSpec, SchemaFile};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Schema(#[from] tra_core::Error),
}

/// How one CSV column becomes a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnConfig {
    /// Bounds default to the data range widened to multiples of `delta`.
    Numeric {
        name: String,
        delta: f64,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    /// Integer levels `0..levels`.
    Ordinal { name: String, levels: u32 },
    /// Values `0` and `1`.
    Binary { name: String },
    Categorical { name: String, categories: Vec<String> },
}

impl ColumnConfig {
    fn name(&self) -> &str {
        match self {
            ColumnConfig::Numeric { name, .. }
            | ColumnConfig::Ordinal { name, .. }
            | ColumnConfig::Binary { name }
            | ColumnConfig::Categorical { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub label: String,
    pub features: Vec<ColumnConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub schema: FeatureSchema,
    /// The configuration with every numeric range resolved.
    pub config: DatasetConfig,
    pub points: Vec<Point>,
    pub labels: Vec<Label>,
    /// Class names, indexed by label.
    pub label_names: Vec<String>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DatasetBundle {
    pub fn part(&self, idx: &[usize]) -> (Vec<Point>, Vec<Label>) {
        (idx.iter().map(|&i| self.points[i].clone()).collect(), idx.iter().map(|&i| self.labels[i]).collect())
    }

    /// Schema file carrying category names.
    pub fn schema_file(&self) -> SchemaFile {
        let mut file = SchemaFile::from_schema(&self.schema);
        for (spec, col) in file.features.iter_mut().zip(&self.config.features) {
            if let (FeatureSpec::Categorical { categories, .. }, ColumnConfig::Categorical { categories: names, .. }) = (spec, col) {
                *categories = names.clone();
            }
        }
        file
    }

    /// Writes the rows back as CSV, features in schema order and the label last.
    pub fn export_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.config.features.iter().map(ColumnConfig::name).collect();
        header.push(&self.config.label);
        w.write_record(&header)?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            for (f, col) in self.config.features.iter().enumerate() {
                let v = self.schema.feature_value(p, f);
                row.push(match col {
                    ColumnConfig::Categorical { categories, .. } => categories[v as usize].clone(),
                    ColumnConfig::Numeric { .. } => format!("{}", self.schema.axis_value(self.schema.axes_of(f).start, v)),
                    _ => v.to_string(),
                });
            }
            row.push(self.label_names[l.0 as usize].clone());
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn parse_f64(cell: &str, row: usize, column: &str) -> Result<f64, DatasetError> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DatasetError::Row {
        row,
        message: format!("column {column:?}: {cell:?} is not a number"),
    })
}

fn parse_level(cell: &str, row: usize, column: &str, levels: u32) -> Result<u32, DatasetError> {
    let x = parse_f64(cell, row, column)?;
    if x.fract() != 0.0 || x < 0.0 || x >= levels as f64 {
        return Err(DatasetError::Row { row, message: format!("column {column:?}: {cell:?} is not a level in 0..{levels}") });
    }
    Ok(x as u32)
}

/// Reads a headed CSV file and encodes it under `config`.
///
/// Row numbers in errors count data rows from 1.
pub fn ingest_csv(path: &Path, config: &DatasetConfig, seed: u64) -> Result<DatasetBundle, DatasetError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::Config(format!("column {name:?} not found in the header")))
    };
    let label_col = column(&config.label)?;
    let cols: Vec<usize> = config.features.iter().map(|c| column(c.name())).collect::<Result<_, _>>()?;
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;

    let mut resolved = config.clone();
    for (col, cfg) in cols.iter().zip(resolved.features.iter_mut()) {
        if let ColumnConfig::Numeric { name, delta, lo, hi } = cfg {
            if !(*delta > 0.0) {
                return Err(DatasetError::Config(format!("feature {name:?}: delta must be positive")));
            }
            if lo.is_none() || hi.is_none() {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for (i, r) in records.iter().enumerate() {
                    let v = parse_f64(r.get(*col).unwrap_or(""), i + 1, name)?;
                    min = min.min(v);
                    max = max.max(v);
                }
                if records.is_empty() {
                    (min, max) = (0.0, 0.0);
                }
                let l = lo.unwrap_or((min / *delta).floor() * *delta);
                let mut h = hi.unwrap_or((max / *delta).ceil() * *delta);
                if h <= l {
                    h = l + *delta;
                }
                *lo = Some(l);
                *hi = Some(h);
            }
        }
    }
    let features = resolved
        .features
        .iter()
        .map(|c| match c {
            ColumnConfig::Numeric { name, delta, lo, hi } => {
                let (l, h) = (lo.expect("resolved"), hi.expect("resolved"));
                // widen to a whole number of steps
                let steps = ((h - l) / delta - 1e-9).ceil().max(1.0);
                tra_core::Feature::numeric(name.clone(), l, l + steps * delta, *delta)
            }
            ColumnConfig::Ordinal { name, levels } => tra_core::Feature::ordinal(name.clone(), *levels),
            ColumnConfig::Binary { name } => tra_core::Feature::binary(name.clone()),
            ColumnConfig::Categorical { name, categories } => tra_core::Feature::categorical(name.clone(), categories.len() as u32),
        })
        .collect();
    let schema = FeatureSchema::new(features)?;
    for (f, cfg) in resolved.features.iter_mut().enumerate() {
        if let (ColumnConfig::Numeric { hi, .. }, tra_core::FeatureKind::Numeric { hi: h, .. }) = (cfg, schema.feature(f).kind) {
            *hi = Some(h);
        }
    }

    let label_names: Vec<String> = records
        .iter()
        .filter_map(|r| r.get(label_col).map(|s| s.trim().to_owned()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut points = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        let mut values = Vec::with_capacity(cols.len());
        for (f, (&col, cfg)) in cols.iter().zip(&resolved.features).enumerate() {
            let cell = r.get(col).ok_or_else(|| DatasetError::Row { row, message: format!("missing column {:?}", cfg.name()) })?;
            let v = match cfg {
                ColumnConfig::Numeric { name, .. } => {
                    let x = parse_f64(cell, row, name)?;
                    let tra_core::FeatureKind::Numeric { lo, hi, .. } = schema.feature(f).kind else { unreachable!() };
                    if x < lo - 1e-9 || x > hi + 1e-9 {
                        return Err(DatasetError::Row { row, message: format!("column {name:?}: {x} outside [{lo}, {hi}]") });
                    }
                    schema.snap(schema.axes_of(f).start, x)
                }
                ColumnConfig::Ordinal { name, levels } => parse_level(cell, row, name, *levels)?,
                ColumnConfig::Binary { name } => parse_level(cell, row, name, 2)?,
                ColumnConfig::Categorical { name, categories } => {
                    categories.iter().position(|c| c == cell.trim()).ok_or_else(|| DatasetError::Row {
                        row,
                        message: format!("column {name:?}: unknown category {cell:?}"),
                    })? as u32
                }
            };
            values.push(v);
        }
        let label = r.get(label_col).map(str::trim).filter(|s| !s.is_empty()).ok_or_else(|| DatasetError::Row {
            row,
            message: format!("missing label in column {:?}", config.label),
        })?;
        points.push(schema.encode(&values)?);
        labels.push(Label(label_names.iter().position(|n| n == label).expect("collected above") as u32));
    }
    let (train, val, test) = split_indices(points.len(), seed);
    Ok(DatasetBundle { schema, config: resolved, points, labels, label_names, train, val, test, seed })
}
