//! Word datasets the service can host, and the registry file that lists them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use seqteach::arms::{read_feature_csv, rbf_arm_set, ArmSet};
use seqteach::datasets::{word_embeddings, WordSpec};

use crate::error::ServiceError;

pub const DEFAULT_DATASET: &str = "words20";
pub const DEFAULT_LENGTH_SCALE: f64 = 1.0;

/// Where a dataset's raw word vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// `name, f1, f2, …` rows; relative paths resolve against the registry file.
    Csv { path: PathBuf },
    SyntheticWords { spec: WordSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: String,
    #[serde(flatten)]
    pub source: DatasetSpec,
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
}

fn default_length_scale() -> f64 {
    DEFAULT_LENGTH_SCALE
}

/// Contents of the dataset registry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryFile {
    pub datasets: Vec<RegistryEntry>,
}

impl Default for RegistryFile {
    fn default() -> Self {
        Self {
            datasets: vec![RegistryEntry {
                id: DEFAULT_DATASET.into(),
                source: DatasetSpec::SyntheticWords {
                    spec: WordSpec {
                        n_words: 20,
                        dim: 300,
                        n_topics: 5,
                        latent_dim: 30,
                        seed: 20,
                    },
                },
                length_scale: DEFAULT_LENGTH_SCALE,
            }],
        }
    }
}

/// A loaded word set. Arm `k` has features `[1, κ(w_k, w_1), …, κ(w_k, w_N)]`,
/// and the reward of asking about word `k` when the target is `j` is `κ(w_k, w_j)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub arms: ArmSet,
    pub length_scale: f64,
}

impl Dataset {
    pub fn from_vectors(id: &str, names: Vec<String>, raw: &DMatrix<f64>, length_scale: f64) -> Result<Self, ServiceError> {
        if names.len() < 2 {
            return Err(ServiceError::InvalidRequest(format!("dataset {id} needs at least two words")));
        }
        let arms = rbf_arm_set(raw, names, length_scale)?;
        Ok(Self {
            id: id.to_string(),
            arms,
            length_scale,
        })
    }

    pub fn words(&self) -> &[String] {
        self.arms.names()
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Ground-truth weights for `target`: all weight on its kernel column.
    pub fn theta_star(&self, target: usize) -> DVector<f64> {
        let mut theta = DVector::zeros(self.arms.dim());
        theta[target + 1] = 1.0;
        theta
    }

    pub fn reward(&self, target: usize, word: usize) -> f64 {
        self.arms.features()[(word, target + 1)]
    }
}

/// All datasets the service offers, keyed by id.
#[derive(Debug, Clone)]
pub struct Registry {
    datasets: BTreeMap<String, Dataset>,
}

impl Registry {
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let (file, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| ServiceError::Config(format!("cannot read registry {}: {e}", p.display())))?;
                let file: RegistryFile = serde_json::from_str(&text)
                    .map_err(|e| ServiceError::Config(format!("bad registry {}: {e}", p.display())))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (RegistryFile::default(), PathBuf::new()),
        };
        Self::from_file(&file, &base)
    }

    pub fn from_file(file: &RegistryFile, base: &Path) -> Result<Self, ServiceError> {
        let mut datasets = BTreeMap::new();
        for entry in &file.datasets {
            let (names, raw) = match &entry.source {
                DatasetSpec::Csv { path } => read_feature_csv(&base.join(path))?,
                DatasetSpec::SyntheticWords { spec } => word_embeddings(spec)?,
            };
            let ds = Dataset::from_vectors(&entry.id, names, &raw, entry.length_scale)?;
            if datasets.insert(entry.id.clone(), ds).is_some() {
                return Err(ServiceError::Config(format!("dataset id {} is listed twice", entry.id)));
            }
        }
        Ok(Self { datasets })
    }

    pub fn get(&self, id: &str) -> Result<&Dataset, ServiceError> {
        self.datasets
            .get(id)
            .ok_or_else(|| ServiceError::UnknownDataset(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.datasets.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_has_twenty_words() {
        let reg = Registry::load(None).unwrap();
        let ds = reg.get(DEFAULT_DATASET).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.arms.dim(), 21);
        for t in 0..20 {
            assert!((ds.reward(t, t) - 1.0).abs() < 1e-12);
            let others = (0..20).filter(|&w| w != t).map(|w| ds.reward(t, w)).fold(0.0, f64::max);
            assert!(others < 1.0);
            assert_eq!(ds.theta_star(t).dot(&ds.arms.arm(3)), ds.reward(t, 3));
        }
        assert!(matches!(reg.get("nope"), Err(ServiceError::UnknownDataset(_))));
    }

    #[test]
    fn registry_file_round_trip() {
        let json = serde_json::to_string(&RegistryFile::default()).unwrap();
        assert!(json.contains("\"kind\":\"synthetic_words\""));
        let back: RegistryFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, RegistryFile::default());
    }

    #[test]
    fn csv_entries_resolve_against_the_registry() {
        let dir = tempfile::tempdir().unwrap();
        let (names, raw) = word_embeddings(&WordSpec {
            n_words: 6,
            dim: 8,
            n_topics: 2,
            latent_dim: 4,
            seed: 1,
        })
        .unwrap();
        seqteach::datasets::write_feature_csv(&dir.path().join("w.csv"), &names, &raw).unwrap();
        let file = RegistryFile {
            datasets: vec![RegistryEntry {
                id: "mini".into(),
                source: DatasetSpec::Csv { path: "w.csv".into() },
                length_scale: 0.5,
            }],
        };
        let path = dir.path().join("registry.json");
        fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let reg = Registry::load(Some(&path)).unwrap();
        assert_eq!(reg.get("mini").unwrap().words(), names.as_slice());
    }
}
