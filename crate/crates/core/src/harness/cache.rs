//! Binary eigendata sidecar, keyed by a content hash of the space and
//! operator descriptors.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::operator::SpectralOperator;
use crate::space::Space;

use super::config::ExperimentConfig;

const MAGIC: &[u8; 8] = b"HGEIG01\0";

/// Hex content hash of the descriptors that determine the eigendata.
pub fn descriptor_hash(config: &ExperimentConfig) -> String {
    let doc = serde_json::json!({
        "space": config.space,
        "operator": config.operator,
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(dir: &Path, config: &ExperimentConfig) -> PathBuf {
    dir.join(format!("op-{}.eig", descriptor_hash(config)))
}

pub fn save(path: &Path, op: &SpectralOperator) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let p = op.len();
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(p as u64).to_le_bytes())?;
    file.write_all(&op.order().to_le_bytes())?;
    for &l in op.eigenvalues() {
        file.write_all(&l.to_le_bytes())?;
    }
    for col in 0..p {
        for row in 0..p {
            file.write_all(&op.eigenvectors()[(row, col)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load(path: &Path, space: Arc<Space>) -> Result<SpectralOperator> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config(format!("{} is not an eigendata sidecar", path.display())));
    }
    let mut buf8 = [0u8; 8];
    file.read_exact(&mut buf8)?;
    let p = u64::from_le_bytes(buf8) as usize;
    if p != space.len() {
        return Err(Error::Config(format!(
            "cached eigendata is for {p} points, space has {}",
            space.len()
        )));
    }
    file.read_exact(&mut buf8)?;
    let m = f64::from_le_bytes(buf8);
    let read_f64 = |file: &mut std::fs::File| -> Result<f64> {
        let mut b = [0u8; 8];
        file.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let mut eigenvalues = Vec::with_capacity(p);
    for _ in 0..p {
        eigenvalues.push(read_f64(&mut file)?);
    }
    let mut eigenvectors = DMatrix::zeros(p, p);
    for col in 0..p {
        for row in 0..p {
            eigenvectors[(row, col)] = read_f64(&mut file)?;
        }
    }
    SpectralOperator::from_eigendata(space, eigenvalues, eigenvectors, m)
}

/// Loads the cached decomposition when present, otherwise computes and
/// stores it.
pub fn load_or_compute(config: &ExperimentConfig, space: &Arc<Space>, dir: &Path) -> Result<(SpectralOperator, bool)> {
    let path = cache_path(dir, config);
    if path.exists() {
        if let Ok(op) = load(&path, Arc::clone(space)) {
            return Ok((op, true));
        }
    }
    let op = config.build_operator(space)?;
    save(&path, &op)?;
    Ok((op, false))
}
