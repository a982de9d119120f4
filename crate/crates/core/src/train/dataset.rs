use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::hypergraph::IncidenceStructure;

use super::TrainError;

/// Index lists of one data split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn check_disjoint(&self, n: usize) -> Result<(), String> {
        let mut owner = vec![None; n];
        for (name, list) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &v in list {
                if v >= n {
                    return Err(format!("{name} index {v} >= {n}"));
                }
                if let Some(prev) = owner[v].replace(name) {
                    return Err(format!("vertex {v} in both {prev} and {name}"));
                }
            }
        }
        Ok(())
    }
}

/// A labelled hypergraph with features and named splits.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub hypergraph: IncidenceStructure,
    pub features: Matrix<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: BTreeMap<String, Split>,
    pub label_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesJson {
    Dense(Vec<Vec<f32>>),
    Sparse { dim: usize, rows: Vec<Vec<(usize, f32)>> },
}

/// On-disk dataset schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetJson {
    pub name: String,
    pub num_vertices: usize,
    pub hyperedges: Vec<Vec<usize>>,
    pub features: FeaturesJson,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<BTreeMap<String, Split>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_rate: Option<f64>,
}

/// Known label rates (fraction of vertices labelled for training).
pub fn reference_label_rate(name: &str) -> Option<f64> {
    let n = name.to_ascii_lowercase();
    if n.contains("dblp") {
        Some(0.040)
    } else if n.contains("pubmed") {
        Some(0.008)
    } else if n.contains("citeseer") {
        Some(0.042)
    } else if n.contains("cora") {
        Some(0.052)
    } else {
        None
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> TrainError {
    TrainError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

impl DatasetBundle {
    pub fn num_vertices(&self) -> usize {
        self.hypergraph.num_vertices()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn split(&self, id: &str) -> Result<&Split, TrainError> {
        self.splits.get(id).ok_or_else(|| {
            TrainError::InvalidConfig(format!(
                "dataset '{}' has no split '{id}' (available: {:?})",
                self.name,
                self.splits.keys().collect::<Vec<_>>()
            ))
        })
    }

    pub fn from_json(doc: DatasetJson) -> Result<Self, TrainError> {
        let n = doc.num_vertices;
        let hypergraph = IncidenceStructure::build(n, &doc.hyperedges)
            .map_err(|e| schema("hyperedges", e.to_string()))?;
        let features = match doc.features {
            FeaturesJson::Dense(rows) => {
                if rows.len() != n {
                    return Err(schema("features.dense", format!("{} rows for {n} vertices", rows.len())));
                }
                let d = rows.first().map_or(0, Vec::len);
                let mut data = Vec::with_capacity(n * d);
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != d {
                        return Err(schema(format!("features.dense[{i}]"), format!("length {} != {d}", r.len())));
                    }
                    data.extend_from_slice(r);
                }
                Matrix::from_vec(n, d, data).expect("sizes checked")
            }
            FeaturesJson::Sparse { dim, rows } => {
                if rows.len() != n {
                    return Err(schema("features.sparse.rows", format!("{} rows for {n} vertices", rows.len())));
                }
                let mut m = Matrix::zeros(n, dim);
                for (i, r) in rows.iter().enumerate() {
                    for (k, &(j, v)) in r.iter().enumerate() {
                        if j >= dim {
                            return Err(schema(
                                format!("features.sparse.rows[{i}][{k}]"),
                                format!("column {j} >= dim {dim}"),
                            ));
                        }
                        m.set(i, j, v);
                    }
                }
                m
            }
        };
        if features.cols() == 0 {
            return Err(schema("features", "feature dimension is zero"));
        }
        if !features.all_finite() {
            return Err(schema("features", "non-finite feature value"));
        }
        if doc.labels.len() != n {
            return Err(schema("labels", format!("{} labels for {n} vertices", doc.labels.len())));
        }
        if doc.num_classes == 0 {
            return Err(schema("num_classes", "must be positive"));
        }
        if let Some(i) = doc.labels.iter().position(|&l| l >= doc.num_classes) {
            return Err(schema(
                format!("labels[{i}]"),
                format!("label {} out of range for {} classes", doc.labels[i], doc.num_classes),
            ));
        }
        let splits = doc.splits.unwrap_or_default();
        for (id, s) in &splits {
            s.check_disjoint(n).map_err(|m| schema(format!("splits.{id}"), m))?;
        }
        if let Some(r) = doc.label_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(schema("label_rate", format!("{r} outside [0, 1]")));
            }
        }
        Ok(DatasetBundle {
            label_rate: doc.label_rate.or_else(|| reference_label_rate(&doc.name)),
            name: doc.name,
            hypergraph,
            features,
            labels: doc.labels,
            num_classes: doc.num_classes,
            splits,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, TrainError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: DatasetJson = serde_path_to_error::deserialize(de)
            .map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
        Self::from_json(doc)
    }

    /// Serializes features sparsely when fewer than half the entries are non-zero.
    pub fn to_json(&self) -> DatasetJson {
        let (n, d) = self.features.shape();
        let nnz = self.features.as_slice().iter().filter(|&&v| v != 0.0).count();
        let features = if 2 * nnz < n * d {
            FeaturesJson::Sparse {
                dim: d,
                rows: (0..n)
                    .map(|i| {
                        self.features
                            .row(i)
                            .iter()
                            .enumerate()
                            .filter(|(_, &v)| v != 0.0)
                            .map(|(j, &v)| (j, v))
                            .collect()
                    })
                    .collect(),
            }
        } else {
            FeaturesJson::Dense((0..n).map(|i| self.features.row(i).to_vec()).collect())
        };
        DatasetJson {
            name: self.name.clone(),
            num_vertices: n,
            hyperedges: self.hypergraph.edge_lists(),
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            splits: (!self.splits.is_empty()).then(|| self.splits.clone()),
            label_rate: self.label_rate,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let text = serde_json::to_string(&self.to_json()).expect("dataset serializes");
        std::fs::write(path, text).map_err(|e| TrainError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Adds `count` stratified splits named `"0"`, `"1"`, ... when the bundle
    /// has none, using the bundle's label rate (default 0.05).
    pub fn ensure_splits<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) {
        if !self.splits.is_empty() {
            return;
        }
        let rate = self.label_rate.unwrap_or(0.05);
        for k in 0..count {
            let s = stratified_split(&self.labels, self.num_classes, rate, 0.0, rng);
            self.splits.insert(k.to_string(), s);
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetBundle, TrainError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    DatasetBundle::from_json_str(&text)
}

/// Per class, `round(label_rate * count)` (at least one) vertices go to
/// train. Of the rest, `val_fraction` goes to validation and the remainder to
/// test. All lists are sorted.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[usize],
    num_classes: usize,
    label_rate: f64,
    val_fraction: f64,
    rng: &mut R,
) -> Split {
    let mut by_class = vec![Vec::new(); num_classes];
    for (v, &l) in labels.iter().enumerate() {
        by_class[l].push(v);
    }
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for mut members in by_class {
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let k = ((label_rate * members.len() as f64).round() as usize).clamp(1, members.len());
        train.extend_from_slice(&members[..k]);
        rest.extend_from_slice(&members[k..]);
    }
    rest.sort_unstable();
    rest.shuffle(rng);
    let nv = (val_fraction * rest.len() as f64).round() as usize;
    let mut val = rest[..nv].to_vec();
    let mut test = rest[nv..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Split { train, val, test }
}
