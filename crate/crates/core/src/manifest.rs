//! Scene manifest: the JSON file `synth` writes and `bench` reads.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::eval::Camera;
use crate::synth::SceneKind;
use crate::transfer::BakeConfig;
use crate::UnitVec3;

/// What rendered frames are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// The scene's analytic texture and normals, evaluated on the low mesh.
    Analytic,
    /// A render of the vertex-colored high mesh.
    DenseRender,
}

/// Desk-scale to paper-scale size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scaling {
    pub points_factor: f64,
    pub faces_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneKind>,
    pub cloud: PathBuf,
    pub low_mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_mesh: Option<PathBuf>,
    pub cameras: Vec<Camera>,
    pub reference: Reference,
    pub cfg: BakeConfig,
    pub light_dir: UnitVec3,
    #[serde(default)]
    pub point_count: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scaling: Scaling,
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<Option<T>> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::Manifest(format!("{name}: {e}"))),
    }
}

fn required<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<T> {
    field(obj, name)?.ok_or_else(|| Error::Manifest(name.into()))
}

impl SceneManifest {
    /// Parses and validates a manifest; every failure names the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Manifest(format!("(document): {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Manifest("(document): expected a JSON object".into()))?;
        let m = SceneManifest {
            scene: field(obj, "scene")?,
            cloud: required(obj, "cloud")?,
            low_mesh: required(obj, "low_mesh")?,
            high_mesh: field(obj, "high_mesh")?,
            cameras: required(obj, "cameras")?,
            reference: required(obj, "reference")?,
            cfg: required(obj, "cfg")?,
            light_dir: field(obj, "light_dir")?.unwrap_or_else(SceneKind::light_dir),
            point_count: field(obj, "point_count")?.unwrap_or(0),
            noise_sigma: field(obj, "noise_sigma")?.unwrap_or(0.0),
            seed: field(obj, "seed")?.unwrap_or(0),
            scaling: field(obj, "scaling")?.unwrap_or_default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::Manifest("cameras: at least one camera is required".into()));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            c.validate().map_err(|e| Error::Manifest(format!("cameras[{i}]: {e}")))?;
        }
        self.cfg.validate().map_err(|e| Error::Manifest(format!("cfg: {e}")))?;
        match self.reference {
            Reference::Analytic if self.scene.is_none() => {
                Err(Error::Manifest("scene: required when reference is \"analytic\"".into()))
            }
            Reference::DenseRender if self.high_mesh.is_none() => {
                Err(Error::Manifest("high_mesh: required when reference is \"dense-render\"".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Resolves a manifest path against the manifest's directory and checks
    /// that the file exists.
    pub fn resolve(base: &Path, rel: &Path, field: &str) -> Result<PathBuf> {
        let p = if rel.is_absolute() { rel.to_path_buf() } else { base.join(rel) };
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::Manifest(format!("{field}: file not found: {}", p.display())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_scene, write_scene};

    fn sample() -> String {
        let dir = tempfile::tempdir().unwrap();
        let s = synth_scene(SceneKind::CheckerPlane, 1000, 0.0, 1).unwrap();
        write_scene(&s, dir.path()).unwrap();
        std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()
    }

    #[test]
    fn roundtrip() {
        let text = sample();
        let m = SceneManifest::from_json(&text).unwrap();
        assert_eq!(m.scene, Some(SceneKind::CheckerPlane));
        assert_eq!(m.reference, Reference::Analytic);
        assert_eq!(SceneManifest::from_json(&serde_json::to_string(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn missing_fields_are_named() {
        let text = sample();
        for name in ["cloud", "low_mesh", "cameras", "reference", "cfg"] {
            let mut v: Value = serde_json::from_str(&text).unwrap();
            v.as_object_mut().unwrap().remove(name);
            match SceneManifest::from_json(&v.to_string()) {
                Err(Error::Manifest(f)) => assert!(f.starts_with(name), "{f}"),
                other => panic!("{name}: {other:?}"),
            }
        }
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["cameras"] = Value::Array(vec![]);
        assert!(matches!(SceneManifest::from_json(&v.to_string()), Err(Error::Manifest(f)) if f.starts_with("cameras")));
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["cfg"]["d_max"] = Value::from(-1.0);
        assert!(matches!(SceneManifest::from_json(&v.to_string()), Err(Error::Manifest(f)) if f.starts_with("cfg")));
    }
}
