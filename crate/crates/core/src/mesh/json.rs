//! Mesh interchange: `{"vertices": [[x,y],...], "elements": [[i0,i1,...],...]}`
//! with 0-based indices. Edges and adjacency are derived on load.

use super::{MeshError, PolygonalMesh};
use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct MeshJson {
    vertices: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
}

impl PolygonalMesh {
    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let raw: MeshJson = serde_json::from_str(text)?;
        let vertices = raw
            .vertices
            .into_iter()
            .map(|[x, y]| Point2::new(x, y))
            .collect();
        Self::from_parts(vertices, raw.elements)
    }

    pub fn to_json(&self) -> String {
        let raw = MeshJson {
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            elements: self.elements.clone(),
        };
        serde_json::to_string(&raw).expect("mesh serialization cannot fail")
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}
