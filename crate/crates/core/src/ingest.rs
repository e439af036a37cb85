//! Builds relation data from a CSV file described by a JSON manifest.
//!
//! The manifest names each column's type and groups columns into attribute
//! trees: a string leaf is a column, an array is array composition and an
//! object is object composition.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine;
use indexmap::IndexMap;
use serde::Deserialize;

use crate::schema::lang::has_uri_scheme;
use crate::value::{Mapping, Value};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Number,
    Integer,
    String,
    Boolean,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
    #[serde(rename = "enum", default)]
    pub enumeration: Option<Vec<String>>,
    /// Marks a rich-value column holding URIs of this media type.
    #[serde(default)]
    pub media_type: Option<String>,
    /// Rich cells name local files to embed as data URIs.
    #[serde(default)]
    pub inline: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    #[serde(default)]
    pub description: Option<String>,
    pub tree: serde_json::Value,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub csv: PathBuf,
    pub columns: Vec<ColumnSpec>,
    pub default_attribute: String,
    pub attributes: IndexMap<String, AttributeSpec>,
    #[serde(default = "yes")]
    pub folds: bool,
}

fn yes() -> bool {
    true
}

/// How an attribute is assembled from columns.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrTree {
    Column(usize),
    Array(Vec<AttrTree>),
    Object(Vec<(String, AttrTree)>),
}

#[derive(Debug, Clone)]
pub struct TopAttribute {
    pub name: String,
    pub description: Option<String>,
    pub tree: AttrTree,
}

#[derive(Debug, Clone)]
pub struct IngestedRelation {
    pub name: String,
    pub description: Option<String>,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<Value>>,
    pub attributes: Vec<TopAttribute>,
    pub default_attribute: String,
    pub folds: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Embed every rich column as data URIs, whatever the manifest says.
    pub inline_rich: bool,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IngestError::Manifest(e.to_string()))
}

/// Loads the manifest at `path` and the CSV it names (relative to the
/// manifest's directory).
pub fn ingest(path: &Path, opts: IngestOptions) -> Result<IngestedRelation, IngestError> {
    let manifest = load_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    ingest_manifest(&manifest, dir, opts)
}

pub fn ingest_manifest(
    manifest: &Manifest,
    dir: &Path,
    opts: IngestOptions,
) -> Result<IngestedRelation, IngestError> {
    check_columns(&manifest.columns)?;
    let mut attributes = Vec::new();
    for (name, spec) in &manifest.attributes {
        if !crate::schema::lang::is_legal_property_name(name) || name.contains('/') {
            return Err(IngestError::Manifest(format!(
                "illegal attribute name {name:?}"
            )));
        }
        attributes.push(TopAttribute {
            name: name.clone(),
            description: spec.description.clone(),
            tree: parse_tree(&spec.tree, &manifest.columns)?,
        });
    }
    if !manifest
        .attributes
        .contains_key(&manifest.default_attribute)
    {
        return Err(IngestError::Manifest(format!(
            "default attribute {:?} is not defined",
            manifest.default_attribute
        )));
    }

    let csv_path = dir.join(&manifest.csv);
    let file = fs::File::open(&csv_path).map_err(|source| IngestError::Io {
        path: csv_path.clone(),
        source,
    })?;
    let base = csv_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let rows = read_rows(file, &manifest.columns, &base, opts)?;
    tracing::debug!(relation = %manifest.name, rows = rows.len(), "ingested");

    Ok(IngestedRelation {
        name: manifest.name.clone(),
        description: manifest.description.clone(),
        columns: manifest.columns.clone(),
        rows,
        attributes,
        default_attribute: manifest.default_attribute.clone(),
        folds: manifest.folds,
    })
}

fn check_columns(columns: &[ColumnSpec]) -> Result<(), IngestError> {
    let mut seen = HashSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) {
            return Err(IngestError::Manifest(format!(
                "duplicate column {:?}",
                c.name
            )));
        }
        if c.enumeration.is_some() && c.kind != ColumnType::String {
            return Err(IngestError::Manifest(format!(
                "column {:?}: enum is only allowed on string columns",
                c.name
            )));
        }
        if c.media_type.is_some() && (c.kind != ColumnType::String || c.enumeration.is_some()) {
            return Err(IngestError::Manifest(format!(
                "column {:?}: rich columns must be plain strings",
                c.name
            )));
        }
    }
    Ok(())
}

fn parse_tree(tree: &serde_json::Value, columns: &[ColumnSpec]) -> Result<AttrTree, IngestError> {
    match tree {
        serde_json::Value::String(name) => columns
            .iter()
            .position(|c| &c.name == name)
            .map(AttrTree::Column)
            .ok_or_else(|| IngestError::Manifest(format!("unknown column {name:?}"))),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|t| parse_tree(t, columns))
            .collect::<Result<_, _>>()
            .map(AttrTree::Array),
        serde_json::Value::Object(m) => m
            .iter()
            .map(|(k, t)| {
                if !crate::schema::lang::is_legal_property_name(k) || k.contains('/') {
                    return Err(IngestError::Manifest(format!(
                        "illegal attribute key {k:?}"
                    )));
                }
                Ok((k.clone(), parse_tree(t, columns)?))
            })
            .collect::<Result<_, _>>()
            .map(AttrTree::Object),
        other => Err(IngestError::Manifest(format!(
            "attribute trees are column names, arrays or objects, not {other}"
        ))),
    }
}

fn read_rows(
    input: impl std::io::Read,
    columns: &[ColumnSpec],
    base: &Path,
    opts: IngestOptions,
) -> Result<Vec<Vec<Value>>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let csv_err = |e: csv::Error| {
        let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
        IngestError::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        }
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let positions: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| IngestError::Manifest(format!("CSV has no column {:?}", c.name)))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        let mut values = Vec::with_capacity(columns.len());
        for (spec, &pos) in columns.iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("");
            let value =
                parse_cell(cell, spec, base, opts).map_err(|message| IngestError::Parse {
                    row,
                    column: spec.name.clone(),
                    message,
                })?;
            values.push(value);
        }
        rows.push(values);
    }
    Ok(rows)
}

fn parse_cell(
    cell: &str,
    spec: &ColumnSpec,
    base: &Path,
    opts: IngestOptions,
) -> Result<Value, String> {
    let cell = cell.trim();
    match spec.kind {
        ColumnType::Number => cell
            .parse::<f64>()
            .ok()
            .filter(|n| n.is_finite())
            .map(Value::Number)
            .ok_or_else(|| format!("{cell:?} is not a number")),
        ColumnType::Integer => cell
            .parse::<i64>()
            .map(Value::Integer)
            .map_err(|_| format!("{cell:?} is not an integer")),
        ColumnType::Boolean => match cell {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("{cell:?} is not true or false")),
        },
        ColumnType::String => {
            if let Some(allowed) = &spec.enumeration {
                if !allowed.iter().any(|a| a == cell) {
                    return Err(format!("{cell:?} is not one of {allowed:?}"));
                }
            }
            match &spec.media_type {
                Some(media_type) if spec.inline || opts.inline_rich => {
                    if cell.starts_with("data:") {
                        return Ok(cell.into());
                    }
                    let path = base.join(cell);
                    let bytes = fs::read(&path)
                        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    let payload = base64::engine::general_purpose::STANDARD.encode(bytes);
                    Ok(format!("data:{media_type};base64,{payload}").into())
                }
                Some(_) if !has_uri_scheme(cell) => Err(format!(
                    "{cell:?} is not a URI; mark the column inline to embed files"
                )),
                _ => Ok(cell.into()),
            }
        }
    }
}

/// The PSI schema a column's values satisfy.
pub fn column_emits(spec: &ColumnSpec) -> Value {
    if let Some(media_type) = &spec.media_type {
        return format!("@{media_type}").into();
    }
    match (spec.kind, &spec.enumeration) {
        (ColumnType::String, Some(values)) => {
            let mut args = Mapping::new();
            args.insert(
                "enum".into(),
                Value::Array(values.iter().map(|v| v.as_str().into()).collect()),
            );
            let mut m = Mapping::new();
            m.insert("$string".into(), Value::Object(args));
            Value::Object(m)
        }
        (ColumnType::String, None) => "$string".into(),
        (ColumnType::Number, _) => "$number".into(),
        (ColumnType::Integer, _) => "$integer".into(),
        (ColumnType::Boolean, _) => "$boolean".into(),
    }
}
