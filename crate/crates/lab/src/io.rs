//! JSON and CSV file formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tra_core::model::Node;
use tra_core::oracle::QueryRecord;
use tra_core::region::Constraint;
use tra_core::{Feature, FeatureKind, FeatureSchema, ForestModel, Label, Model, Point, Region, Split, TreeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSpec {
    Numeric { name: String, lo: f64, hi: f64, delta: f64 },
    Ordinal { name: String, levels: u32 },
    Binary { name: String },
    Categorical {
        name: String,
        k: u32,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        categories: Vec<String>,
    },
}

impl FeatureSpec {
    pub fn name(&self) -> &str {
        match self {
            FeatureSpec::Numeric { name, .. }
            | FeatureSpec::Ordinal { name, .. }
            | FeatureSpec::Binary { name }
            | FeatureSpec::Categorical { name, .. } => name,
        }
    }
}

/// Schema file: the features in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub features: Vec<FeatureSpec>,
}

impl SchemaFile {
    pub fn to_schema(&self) -> Result<FeatureSchema> {
        let features = self
            .features
            .iter()
            .map(|f| match f {
                FeatureSpec::Numeric { name, lo, hi, delta } => Feature::numeric(name.clone(), *lo, *hi, *delta),
                FeatureSpec::Ordinal { name, levels } => Feature::ordinal(name.clone(), *levels),
                FeatureSpec::Binary { name } => Feature::binary(name.clone()),
                FeatureSpec::Categorical { name, k, .. } => Feature::categorical(name.clone(), *k),
            })
            .collect();
        Ok(FeatureSchema::new(features)?)
    }

    pub fn from_schema(schema: &FeatureSchema) -> Self {
        let features = schema
            .features()
            .iter()
            .map(|f| {
                let name = f.name.clone();
                match f.kind {
                    FeatureKind::Numeric { lo, hi, delta } => FeatureSpec::Numeric { name, lo, hi, delta },
                    FeatureKind::Ordinal { levels } => FeatureSpec::Ordinal { name, levels },
                    FeatureKind::Binary => FeatureSpec::Binary { name },
                    FeatureKind::Categorical { k } => FeatureSpec::Categorical { name, k, categories: Vec::new() },
                }
            })
            .collect();
        Self { features }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeDto {
    Split { id: usize, axis: usize, threshold: String, left: usize, right: usize },
    Leaf { id: usize, label: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDto {
    pub nodes: Vec<NodeDto>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_ref: Option<String>,
    /// Attack that produced the model, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<String>,
    /// Whether the model is certified functionally equivalent to its target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trees: Vec<TreeDto>,
}

/// Decimal string of a grid threshold.
pub fn threshold_string(schema: &FeatureSchema, axis: usize, t: u32) -> String {
    format!("{}", schema.axis_value(axis, t))
}

fn tree_to_dto(schema: &FeatureSchema, tree: &TreeModel) -> TreeDto {
    let nodes = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(id, n)| match *n {
            Node::Split { split, left, right } => NodeDto::Split {
                id,
                axis: split.axis,
                threshold: threshold_string(schema, split.axis, split.threshold),
                left,
                right,
            },
            Node::Leaf { label } => NodeDto::Leaf { id, label: label.0 },
        })
        .collect();
    TreeDto { nodes, root: tree.root() }
}

fn tree_from_dto(schema: &FeatureSchema, dto: &TreeDto) -> Result<TreeModel> {
    let mut nodes = vec![None; dto.nodes.len()];
    for n in &dto.nodes {
        let (id, node) = match n {
            NodeDto::Split { id, axis, threshold, left, right } => {
                if *axis >= schema.n_axes() {
                    bail!("node {id}: axis {axis} out of range");
                }
                let value: f64 = threshold.parse().with_context(|| format!("node {id}: bad threshold {threshold:?}"))?;
                let t = schema.axis_coord(*axis, value).with_context(|| format!("node {id}"))?;
                (*id, Node::Split { split: Split::new(*axis, t), left: *left, right: *right })
            }
            NodeDto::Leaf { id, label } => (*id, Node::Leaf { label: Label(*label) }),
        };
        let slot = nodes.get_mut(id).with_context(|| format!("node id {id} out of range"))?;
        if slot.replace(node).is_some() {
            bail!("duplicate node id {id}");
        }
    }
    let nodes: Vec<Node> = nodes.into_iter().map(|n| n.expect("every id filled")).collect();
    Ok(TreeModel::from_nodes(&nodes, dto.root, schema.n_axes())?)
}

impl ModelFile {
    pub fn from_model(schema: &FeatureSchema, model: &Model) -> Self {
        let mut file = ModelFile {
            schema: Some(SchemaFile::from_schema(schema)),
            schema_ref: None,
            attack: None,
            certified: None,
            nodes: Vec::new(),
            root: None,
            trees: Vec::new(),
        };
        match model {
            Model::Tree(t) => {
                let dto = tree_to_dto(schema, t);
                file.nodes = dto.nodes;
                file.root = Some(dto.root);
            }
            Model::Forest(f) => file.trees = f.trees().iter().map(|t| tree_to_dto(schema, t)).collect(),
        }
        file
    }

    pub fn to_model(&self, schema: &FeatureSchema) -> Result<Model> {
        let model = match (self.root, self.trees.is_empty()) {
            (Some(root), true) => Model::Tree(tree_from_dto(schema, &TreeDto { nodes: self.nodes.clone(), root })?),
            (None, false) => Model::Forest(ForestModel::new(
                self.trees.iter().map(|t| tree_from_dto(schema, t)).collect::<Result<Vec<_>>>()?,
            )?),
            _ => bail!("a model file holds either `nodes` with `root` or `trees`"),
        };
        model.validate(schema)?;
        Ok(model)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_schema(path: &Path) -> Result<FeatureSchema> {
    read_json::<SchemaFile>(path)?.to_schema()
}

/// Loads a model; the schema comes from the file or, failing that, from `schema`.
pub fn read_model(path: &Path, schema: Option<&FeatureSchema>) -> Result<(FeatureSchema, Model)> {
    let file: ModelFile = read_json(path)?;
    let schema = match (&file.schema, schema, &file.schema_ref) {
        (Some(s), _, _) => s.to_schema()?,
        (None, Some(s), _) => s.clone(),
        (None, None, Some(r)) => {
            let base = path.parent().unwrap_or(Path::new("."));
            read_schema(&base.join(r))?
        }
        (None, None, None) => bail!("{} has no schema; pass --schema", path.display()),
    };
    let model = file.to_model(&schema).with_context(|| format!("model {}", path.display()))?;
    Ok((schema, model))
}

pub fn write_model(path: &Path, schema: &FeatureSchema, model: &Model, attack: Option<&str>, certified: Option<bool>) -> Result<()> {
    let mut file = ModelFile::from_model(schema, model);
    file.attack = attack.map(str::to_owned);
    file.certified = certified;
    write_json(path, &file)
}

/// Real feature values of a point: numeric values, ordinal levels, bits and category indices.
pub fn point_values(schema: &FeatureSchema, p: &Point) -> Vec<f64> {
    (0..schema.n_features())
        .map(|f| {
            let v = schema.feature_value(p, f);
            if schema.feature(f).is_categorical() {
                v as f64
            } else {
                schema.axis_value(schema.axes_of(f).start, v)
            }
        })
        .collect()
}

fn region_json(schema: &FeatureSchema, r: &Region) -> serde_json::Value {
    let items: Vec<serde_json::Value> = r
        .constraints()
        .iter()
        .enumerate()
        .map(|(f, c)| match *c {
            Constraint::Range { lo, hi } => {
                let axis = schema.axes_of(f).start;
                serde_json::json!({"lo": schema.axis_value(axis, lo), "hi": schema.axis_value(axis, hi)})
            }
            Constraint::Categories(mask) => {
                let cats: Vec<u32> = (0..64).filter(|b| mask & (1u64 << b) != 0).collect();
                serde_json::json!({"categories": cats})
            }
        })
        .collect();
    serde_json::Value::Array(items)
}

/// One JSON line per billed query.
pub fn write_trace(path: &Path, schema: &FeatureSchema, records: &[QueryRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in records {
        let line = serde_json::json!({
            "index": r.response.query_index,
            "x": point_values(schema, &r.x),
            "region": region_json(schema, &r.region),
            "label": r.response.label.0,
            "counterfactual": r.response.counterfactual.as_ref().map(|c| point_values(schema, c)),
        });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// One row of an anytime curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub queries: u64,
    pub certified_fraction: f64,
    pub fidelity_uniform: f64,
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub queries: u64,
    pub mean_fidelity: f64,
}

pub fn write_mean_curve(path: &Path, rows: &[(u64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for &(queries, mean_fidelity) in rows {
        w.serialize(MeanRow { queries, mean_fidelity })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tra_core::generate::{gen_random_forest, gen_random_tree};

    fn mixed() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::numeric("a", -1.0, 1.0, 1.0 / 512.0),
            Feature::categorical("c", 3),
            Feature::ordinal("o", 5),
            Feature::binary("b"),
        ])
        .unwrap()
    }

    #[test]
    fn models_round_trip_through_json() {
        let schema = mixed();
        for seed in 0..10 {
            let tree: Model = gen_random_tree(&schema, 6, 3, seed).unwrap().into();
            let forest: Model = gen_random_forest(&schema, 3, 3, 2, seed).unwrap().into();
            for m in [tree, forest] {
                let text = serde_json::to_string(&ModelFile::from_model(&schema, &m)).unwrap();
                let back: ModelFile = serde_json::from_str(&text).unwrap();
                assert_eq!(back.to_model(&schema).unwrap(), m);
            }
        }
    }

    #[test]
    fn thresholds_are_decimal_grid_values() {
        let schema = FeatureSchema::unit_cube(1, 1.0 / 1024.0).unwrap();
        assert_eq!(threshold_string(&schema, 0, 512), "0.5");
        assert_eq!(threshold_string(&schema, 0, 513), "0.5009765625");
        let bad = r#"{"nodes":[{"id":0,"kind":"split","axis":0,"threshold":"0.1234","left":1,"right":2},
            {"id":1,"kind":"leaf","label":0},{"id":2,"kind":"leaf","label":1}],"root":0}"#;
        let file: ModelFile = serde_json::from_str(bad).unwrap();
        assert!(file.to_model(&schema).is_err());
    }

    #[test]
    fn schema_files_round_trip() {
        let schema = mixed();
        let file = SchemaFile::from_schema(&schema);
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains(r#""kind":"categorical""#));
        let back: SchemaFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_schema().unwrap(), schema);
    }
}
