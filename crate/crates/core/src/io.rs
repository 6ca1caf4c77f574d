//! File formats: network and chain TOML, hypothesis and dataset CSV, and
//! the experiment config with `key=value` overrides.
//!
//! Network file:
//!
//! ```toml
//! dims = [2, 1]            # [d, d_2, ..., d_{L+1}]
//!
//! [[layers]]
//! activation = "relu"      # relu | sigmoid | tanh | identity | custom
//! weights = [[0.1], [0.0], [0.0]]   # (d+1) x d_2 for layer 1, row-major
//! norm_cap = 0.5           # optional class-level cap on ||W||_{1,inf}
//! # weights_csv = "layer_1.csv"   # alternative to `weights`
//! # beta = 1.0, value_at_zero = 0.0 for custom activations
//! ```
//!
//! Chain file: `q = [[0.7, 0.3], [0.2, 0.8]]` and an optional initial law
//! `nu = [1.0, 0.0]`.
//!
//! Hypothesis CSV: one row per function, header `s{i}c{j}` for sample `i`
//! and coordinate `j` (both 0-based). Dataset CSV: header `x1,...,xd,label`
//! where `label` is a value from `Y` (binary: -1/1, softmax: class index).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{default_gamma_grid, BoundSettings};
use crate::complexity::{FiniteHypothesisTable, ENUMERATION_CUTOFF};
use crate::error::{Error, Result};
use crate::experiments::{DistSpec, StateEmbedding};
use crate::margins::{MarginKind, MarginModel};
use crate::markov::{default_tau_grid, AnalysisOptions, ChainModel, DEFAULT_T_MAX};
use crate::network::{Activation, ActivationKind, NetworkSpec};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("{}: {}", origin.display(), e.message())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub activation: ActivationKind,
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub weights_csv: Option<PathBuf>,
    #[serde(default)]
    pub norm_cap: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub value_at_zero: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub dims: Vec<usize>,
    pub layers: Vec<LayerFile>,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::dim(format!("{what} is empty or ragged")));
    }
    Ok(DMatrix::from_row_iterator(
        r,
        c,
        rows.iter().flatten().copied(),
    ))
}

fn read_numeric_csv(path: &Path, has_header: bool) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let header = if has_header {
        reader
            .headers()
            .map_err(parse_err)?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(parse_err)?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{}: row {}: '{f}' is not a number",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

impl NetworkFile {
    pub fn into_network(self, base: &Path) -> Result<NetworkSpec> {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut caps = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.into_iter().enumerate() {
            let what = format!("layer {} weights", i + 1);
            let w = match (&layer.weights, &layer.weights_csv) {
                (Some(rows), None) => matrix_from_rows(rows, &what)?,
                (None, Some(p)) => {
                    matrix_from_rows(&read_numeric_csv(&resolve(base, p), false)?.1, &what)?
                }
                (None, None) => {
                    let fallback = base.join(format!("layer_{}.csv", i + 1));
                    if !fallback.exists() {
                        return Err(Error::arg(format!(
                            "layer {} has neither `weights` nor `weights_csv`, and {} does not exist",
                            i + 1,
                            fallback.display()
                        )));
                    }
                    matrix_from_rows(&read_numeric_csv(&fallback, false)?.1, &what)?
                }
                (Some(_), Some(_)) => {
                    return Err(Error::arg(format!(
                        "layer {} gives both `weights` and `weights_csv`",
                        i + 1
                    )))
                }
            };
            let act = match layer.activation {
                ActivationKind::Custom => Activation::custom(
                    layer.beta.ok_or_else(|| {
                        Error::arg(format!("custom activation in layer {} needs `beta`", i + 1))
                    })?,
                    layer.value_at_zero.ok_or_else(|| {
                        Error::arg(format!(
                            "custom activation in layer {} needs `value_at_zero`",
                            i + 1
                        ))
                    })?,
                    None,
                )?,
                kind => {
                    if layer.beta.is_some() || layer.value_at_zero.is_some() {
                        return Err(Error::arg(format!(
                            "layer {}: `beta` and `value_at_zero` are fixed for {kind}",
                            i + 1
                        )));
                    }
                    Activation::from_kind(kind)?
                }
            };
            weights.push(w);
            activations.push(act);
            caps.push(layer.norm_cap);
        }
        let mut net = NetworkSpec::new(self.dims, weights, activations)?;
        for (i, cap) in caps.into_iter().enumerate() {
            if let Some(c) = cap {
                net = net.with_norm_cap(i + 1, c)?;
            }
        }
        Ok(net)
    }
}

pub fn parse_network(text: &str, base: &Path) -> Result<NetworkSpec> {
    parse_toml::<NetworkFile>(text, &base.join("<network>"))?.into_network(base)
}

pub fn load_network(path: &Path) -> Result<NetworkSpec> {
    let text = read_text(path)?;
    parse_toml::<NetworkFile>(&text, path)?.into_network(&base_dir(path))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
}

pub fn parse_chain(text: &str) -> Result<ChainModel> {
    let file: ChainFile = parse_toml(text, Path::new("<chain>"))?;
    ChainModel::from_rows(&file.q, file.nu)
}

pub fn load_chain(path: &Path) -> Result<ChainModel> {
    let file: ChainFile = parse_toml(&read_text(path)?, path)?;
    ChainModel::from_rows(&file.q, file.nu)
}

fn parse_cell_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('s')?;
    let (i, j) = rest.split_once('c')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

/// Reads a hypothesis table; the header fixes `n` and `m`.
pub fn load_hypothesis_csv(path: &Path) -> Result<FiniteHypothesisTable> {
    let (header, rows) = read_numeric_csv(path, true)?;
    let cells = header
        .iter()
        .map(|h| {
            parse_cell_name(h).ok_or_else(|| {
                Error::Parse(format!(
                    "{}: bad column name '{h}', expected s<i>c<j>",
                    path.display()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = cells.iter().map(|c| c.0).max().map_or(0, |m| m + 1);
    let coords = cells.iter().map(|c| c.1).max().map_or(0, |m| m + 1);
    if samples * coords != cells.len() {
        return Err(Error::Parse(format!(
            "{}: header does not cover a full {samples}x{coords} grid",
            path.display()
        )));
    }
    let mut values = vec![f64::NAN; rows.len() * samples * coords];
    for (h, row) in rows.iter().enumerate() {
        if row.len() != cells.len() {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields",
                path.display(),
                h + 1,
                row.len()
            )));
        }
        for (&(i, j), &v) in cells.iter().zip(row) {
            values[(h * samples + i) * coords + j] = v;
        }
    }
    FiniteHypothesisTable::new(rows.len(), samples, coords, values)
}

/// Writes a hypothesis table in the format read by [`load_hypothesis_csv`].
pub fn hypothesis_csv(table: &FiniteHypothesisTable) -> Result<String> {
    let mut header = Vec::new();
    for i in 0..table.samples() {
        for j in 0..table.coords() {
            header.push(format!("s{i}c{j}"));
        }
    }
    let mut t = crate::report::Table {
        header,
        rows: Vec::new(),
    };
    for row in table.rows() {
        t.push(row.iter().map(|&v| crate::report::format_f64(v)).collect());
    }
    t.to_csv()
}

/// Reads `x1,...,xd,label` rows, mapping labels to indices of `model`.
pub fn load_dataset_csv(path: &Path, model: &MarginModel) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let (header, rows) = read_numeric_csv(path, true)?;
    if header.last().map(String::as_str) != Some("label") || header.len() < 2 {
        return Err(Error::Parse(format!(
            "{}: expected header x1,...,xd,label",
            path.display()
        )));
    }
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for (k, mut row) in rows.into_iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields",
                path.display(),
                k + 1,
                row.len()
            )));
        }
        let y = row.pop().expect("non-empty");
        ys.push(model.label_index(y)?);
        xs.push(row);
    }
    if xs.is_empty() {
        return Err(Error::arg(format!("{}: dataset is empty", path.display())));
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    pub delta: f64,
    pub gamma_grid: Vec<f64>,
    pub conservative_constants: bool,
    /// `σ_0(0)` convention for the input embedding in the closed-form bound.
    pub sigma0_at_zero: f64,
}

impl Default for BoundSection {
    fn default() -> Self {
        BoundSection {
            delta: 0.05,
            gamma_grid: default_gamma_grid(),
            conservative_constants: false,
            sigma0_at_zero: 0.0,
        }
    }
}

impl BoundSection {
    pub fn settings(&self) -> BoundSettings {
        BoundSettings {
            delta: self.delta,
            gamma_grid: self.gamma_grid.clone(),
            conservative_constants: self.conservative_constants,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginSection {
    pub kind: MarginKind,
    pub label_bound: f64,
    /// Label values for `squared_ml`.
    pub labels: Option<Vec<f64>>,
    /// Number of classes for `softmax`.
    pub classes: Option<usize>,
}

impl Default for MarginSection {
    fn default() -> Self {
        MarginSection {
            kind: MarginKind::Binary,
            label_bound: 1.0,
            labels: None,
            classes: None,
        }
    }
}

impl MarginSection {
    pub fn model(&self) -> Result<MarginModel> {
        match self.kind {
            MarginKind::Binary => MarginModel::binary(self.label_bound),
            MarginKind::SquaredMl => MarginModel::squared_ml(
                self.label_bound,
                self.labels
                    .clone()
                    .ok_or_else(|| Error::arg("margin.labels is required for squared_ml"))?,
            ),
            MarginKind::Softmax => MarginModel::softmax(
                self.label_bound,
                self.classes
                    .ok_or_else(|| Error::arg("margin.classes is required for softmax"))?,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarkovSection {
    pub tau_grid: Vec<f64>,
    pub t_max: usize,
    /// `M` in the convergence term; defaults to `margin.label_bound`.
    pub m_f: Option<f64>,
}

impl Default for MarkovSection {
    fn default() -> Self {
        MarkovSection {
            tau_grid: default_tau_grid(),
            t_max: DEFAULT_T_MAX,
            m_f: None,
        }
    }
}

impl MarkovSection {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            tau_grid: self.tau_grid.clone(),
            t_max: self.t_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RademacherSection {
    pub enumeration_cutoff: usize,
    pub draws: u64,
    /// Hypothesis CSV whose estimate replaces the closed form in `bound`.
    pub table: Option<PathBuf>,
}

impl Default for RademacherSection {
    fn default() -> Self {
        RademacherSection {
            enumeration_cutoff: ENUMERATION_CUTOFF,
            draws: 100_000,
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddedPoint {
    pub x: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSection {
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Network files forming the function grid.
    pub networks: Vec<PathBuf>,
    /// i.i.d. law; exclusive with `chain`.
    #[serde(default)]
    pub distribution: Option<DistSpec>,
    #[serde(default)]
    pub chain: Option<PathBuf>,
    /// Label index of each chain state as a point in `[0,1]^d`.
    #[serde(default)]
    pub embedding: Option<Vec<EmbeddedPoint>>,
}

fn default_trials() -> usize {
    crate::experiments::DEFAULT_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseSection {
    /// Value of `f` on each state.
    pub f: Vec<f64>,
    pub n: usize,
    #[serde(default)]
    pub n0: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
}

fn default_trajectories() -> usize {
    10_000
}

/// The experiment config file; every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub bound: BoundSection,
    pub margin: MarginSection,
    pub markov: MarkovSection,
    pub rademacher: RademacherSection,
    pub coverage: Option<CoverageSection>,
    pub mse: Option<MseSection>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::arg(format!("override '{s}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::arg(format!("override '{s}' has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<BTreeMap<String, toml::Value>>(&format!("v = {raw}")) {
        Ok(mut m) => m.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut table = root;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::arg(format!("override key '{key}': '{p}' is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses `text` and applies `key=value` overrides (dotted keys, TOML
    /// values). Unknown keys anywhere are rejected.
    pub fn parse(text: &str, overrides: &[String], base_dir: &Path) -> Result<Self> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {}", e.message())))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            set_path(&mut root, &k, v)?;
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("config: {}", e.message())))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or an empty config when `None`) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => Self::parse(&read_text(p)?, overrides, &base_dir(p)),
            None => Self::parse("", overrides, Path::new("")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bound.settings().validate()?;
        self.margin.model()?;
        if self.markov.tau_grid.is_empty() {
            return Err(Error::arg("markov.tau_grid is empty"));
        }
        if let Some(bad) = self
            .markov
            .tau_grid
            .iter()
            .find(|e| !(0.0..1.0).contains(*e))
        {
            return Err(Error::arg(format!(
                "markov.tau_grid point {bad} outside [0, 1)"
            )));
        }
        if let Some(c) = &self.coverage {
            match (&c.distribution, &c.chain) {
                (Some(d), None) => d.validate()?,
                (None, Some(_)) => {
                    if c.embedding.is_none() {
                        return Err(Error::arg("coverage.chain needs coverage.embedding"));
                    }
                }
                _ => {
                    return Err(Error::arg(
                        "coverage needs exactly one of `distribution` and `chain`",
                    ))
                }
            }
            if c.networks.is_empty() {
                return Err(Error::arg("coverage.networks is empty"));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        resolve(&self.base_dir, p)
    }

    pub fn embedding(&self) -> Result<Option<StateEmbedding>> {
        match self.coverage.as_ref().and_then(|c| c.embedding.as_ref()) {
            Some(points) => Ok(Some(StateEmbedding::new(
                points.iter().map(|p| (p.x.clone(), p.label)).collect(),
            )?)),
            None => Ok(None),
        }
    }

    /// Canonical JSON of the effective config, used for digests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config is serializable")
    }
}
