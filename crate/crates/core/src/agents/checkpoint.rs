//! JSON checkpoints of trained policies.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::{GlobalPolicy, LocalPolicy};
use super::train::{init_global, init_local, TrainConfig};
use crate::embedding::Parameters;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse checkpoint {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint has {got} zones, scenario has {expected}")]
    Zones { expected: usize, got: usize },
    #[error("{policy}: tensor {tensor} has shape {got:?}, expected {expected:?}")]
    Shape { policy: String, tensor: String, expected: [usize; 2], got: [usize; 2] },
    #[error("{policy}: tensor {tensor} holds {len} values for shape {shape:?}")]
    Corrupt { policy: String, tensor: String, len: usize, shape: [usize; 2] },
    #[error("{policy}: expected {expected} tensors, found {got}")]
    TensorCount { policy: String, expected: usize, got: usize },
    #[error("local policy {index} is tagged with zone {zone}, which is out of range or repeated")]
    ZoneTag { index: usize, zone: usize },
    #[error("checkpoint holds no local policy")]
    NoPolicies,
    #[error("a global policy needs a local policy for each of the {expected} zones, found {got}")]
    MissingLocals { expected: usize, got: usize },
}

/// Every trained tensor plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub code_version: String,
    pub zones: usize,
    pub config: TrainConfig,
    pub global: Option<GlobalPolicy>,
    pub locals: Vec<LocalPolicy>,
}

fn check_shapes<P: Parameters>(name: &str, got: &P, template: &P) -> Result<(), CheckpointError> {
    let (g, t) = (got.tensors(), template.tensors());
    if g.len() != t.len() {
        return Err(CheckpointError::TensorCount { policy: name.into(), expected: t.len(), got: g.len() });
    }
    for ((m, tm), tname) in g.iter().zip(&t).zip(template.tensor_names()) {
        if m.data.len() != m.rows * m.cols {
            return Err(CheckpointError::Corrupt { policy: name.into(), tensor: tname, len: m.data.len(), shape: m.shape() });
        }
        if m.shape() != tm.shape() {
            return Err(CheckpointError::Shape { policy: name.into(), tensor: tname, expected: tm.shape(), got: m.shape() });
        }
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(config: TrainConfig, zones: usize, global: Option<GlobalPolicy>, locals: Vec<LocalPolicy>) -> Self {
        Self { version: CHECKPOINT_VERSION, code_version: env!("CARGO_PKG_VERSION").into(), zones, config, global, locals }
    }

    /// Checks version, zone count, zone tags and every tensor shape against
    /// freshly initialized policies for `zones` zones. Local policies may
    /// cover a subset of zones unless a global policy is present.
    pub fn validate(&self, zones: usize) -> Result<(), CheckpointError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        if self.zones != zones {
            return Err(CheckpointError::Zones { expected: zones, got: self.zones });
        }
        if self.locals.is_empty() {
            return Err(CheckpointError::NoPolicies);
        }
        let mut seen = vec![false; zones];
        for (i, l) in self.locals.iter().enumerate() {
            if l.zone >= zones || seen[l.zone] {
                return Err(CheckpointError::ZoneTag { index: i, zone: l.zone });
            }
            seen[l.zone] = true;
            check_shapes(&format!("local[{i}]"), l, &init_local(l.zone, 0))?;
        }
        if let Some(g) = &self.global {
            if g.zones != zones {
                return Err(CheckpointError::Zones { expected: zones, got: g.zones });
            }
            if self.locals.len() != zones {
                return Err(CheckpointError::MissingLocals { expected: zones, got: self.locals.len() });
            }
            check_shapes("global", g, &init_global(zones, 0))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        crate::harness::to_json(self)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    /// Reads a checkpoint and validates it for `zones` zones.
    pub fn load(path: &Path, zones: usize) -> Result<Self, CheckpointError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io { path: p.clone(), source })?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|source| CheckpointError::Parse { path: p, source })?;
        ck.validate(zones)?;
        Ok(ck)
    }

    /// Parameter bytes across all policies.
    pub fn parameter_bytes(&self) -> usize {
        let g = self.global.as_ref().map_or(0, |g| g.param_count());
        8 * (g + self.locals.iter().map(|l| l.param_count()).sum::<usize>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Matrix;

    fn sample() -> Checkpoint {
        Checkpoint::new(TrainConfig::default(), 2, Some(init_global(2, 4)), vec![init_local(0, 4), init_local(1, 4)])
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path, 2).unwrap(), ck);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut ck = sample();
        ck.locals[1].head.layers[0].w = Matrix::zeros(3, 3);
        let err = ck.validate(2).unwrap_err();
        assert!(err.to_string().contains("local[1]: tensor head.dense0.w has shape [3, 3]"), "{err}");
        assert!(matches!(sample().validate(3), Err(CheckpointError::Zones { expected: 3, got: 2 })));
    }

    #[test]
    fn zone_subsets_need_no_global() {
        let mut ck = sample();
        ck.locals.remove(0);
        assert!(matches!(ck.validate(2), Err(CheckpointError::MissingLocals { .. })));
        ck.global = None;
        ck.validate(2).unwrap();
        ck.locals.push(init_local(1, 0));
        assert!(matches!(ck.validate(2), Err(CheckpointError::ZoneTag { index: 1, zone: 1 })));
    }

    #[test]
    fn truncated_tensor_is_rejected() {
        let mut ck = sample();
        ck.global.as_mut().unwrap().head.layers[1].b.data.pop();
        assert!(matches!(ck.validate(2), Err(CheckpointError::Corrupt { .. })));
    }
}
