use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Space;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Matrix,
}

/// On-disk JSON form of a space.
///
/// ```json
/// {"coords": [[0], [1], [3]], "dist": null, "weights": [1, 1, 1], "metric": "euclidean"}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDocument {
    #[serde(default)]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub dist: Option<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl SpaceDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialise")
    }

    pub fn into_space(self) -> Result<Space> {
        let n = self.weights.len();
        let names = self.names.unwrap_or_else(|| Space::default_names(n));
        match self.metric {
            MetricKind::Euclidean => {
                let coords = self
                    .coords
                    .ok_or_else(|| Error::Document("metric \"euclidean\" needs coords".into()))?;
                if coords.len() != n {
                    return Err(Error::Document(format!(
                        "{} coordinate rows for {n} weights",
                        coords.len()
                    )));
                }
                Space::from_coords(names, &coords, self.weights)
            }
            MetricKind::Matrix => {
                let dist = self
                    .dist
                    .ok_or_else(|| Error::Document("metric \"matrix\" needs dist".into()))?;
                Space::from_matrix(names, dist, self.weights)
            }
        }
    }

    /// Matrix-form document describing `space`.
    pub fn from_space(space: &Space) -> Self {
        Self {
            coords: None,
            dist: Some(space.dist_rows()),
            weights: space.weights().to_vec(),
            metric: MetricKind::Matrix,
            names: Some(space.names().to_vec()),
        }
    }
}

impl Space {
    pub fn from_json(text: &str) -> Result<Self> {
        SpaceDocument::from_json(text)?.into_space()
    }

    pub fn load(path: &Path) -> Result<Self> {
        SpaceDocument::read(path)?.into_space()
    }
}
