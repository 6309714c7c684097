//! Model directory serialization: a JSON manifest plus one little-endian
//! binary array file per (u-node, series order). Round-trips bit-exactly.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::builder::{build_cutoff, ManifoldModel};
use crate::error::{Error, Result};
use crate::forcing::ForcingFamily;
use crate::grid::{Grid1D, Grid2D, GridFn1D, GridFn2D, TripleY};
use crate::report::{sha256_hex, write_atomic};
use crate::series::EpsSeries;
use crate::ustencil::UStencil;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub node: usize,
    pub order: usize,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub xi: AxisSpec,
    pub x: AxisSpec,
    pub u_star: f64,
    pub nu: usize,
    pub u_nodes: Vec<f64>,
    pub alpha: u32,
    pub orthogonality_weighted: bool,
    pub xi_cap: f64,
    pub order: usize,
    pub validated_eps_max: f64,
    pub forcing: ForcingFamily,
    pub config_sha256: String,
    pub arrays: Vec<ArrayEntry>,
}

fn pack(values: &[f64], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn unpack(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Serialization("array file length not /8".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Write the model directory; returns the manifest SHA-256.
pub fn save_model(model: &ManifoldModel, dir: &Path, config_sha: &str) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let g = &model.grids;
    let mut arrays = Vec::new();
    for (m, series) in model.coeffs.iter().enumerate() {
        for n in 0..=series.order() {
            let c = series.coeff(n);
            let file = format!("node{m}_order{n}.bin");
            let mut bytes = Vec::with_capacity(8 * (2 * g.len() + g.xi.n()));
            pack(c.theta.values(), &mut bytes);
            pack(c.psi.values(), &mut bytes);
            pack(c.lambda.values(), &mut bytes);
            write_atomic(&dir.join(&file), &bytes)?;
            arrays.push(ArrayEntry {
                node: m,
                order: n,
                file,
            });
        }
    }
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        xi: AxisSpec {
            min: g.xi.min(),
            max: g.xi.max(),
            n: g.xi.n(),
        },
        x: AxisSpec {
            min: g.x.min(),
            max: g.x.max(),
            n: g.x.n(),
        },
        u_star: model.stencil.u_star(),
        nu: model.stencil.len(),
        u_nodes: model.stencil.nodes().to_vec(),
        alpha: model.alpha,
        orthogonality_weighted: model.orthogonality_weighted,
        xi_cap: model.xi_cap,
        order: model.order,
        validated_eps_max: model.validated_eps_max,
        forcing: model.forcing.clone(),
        config_sha256: config_sha.to_string(),
        arrays,
    };
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Load a model directory; returns the model and the manifest SHA-256.
pub fn load_model(dir: &Path) -> Result<(ManifoldModel, String)> {
    let manifest_path = dir.join("manifest.json");
    let bytes = std::fs::read(&manifest_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", manifest_path.display())))?;
    let sha = sha256_hex(&bytes);
    let manifest: ModelManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Serialization(format!("bad manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Serialization(format!(
            "unsupported model format {}",
            manifest.format_version
        )));
    }
    let xi = Grid1D::uniform(manifest.xi.min, manifest.xi.max, manifest.xi.n)?;
    let x = Grid1D::uniform(manifest.x.min, manifest.x.max, manifest.x.n)?;
    let grids = Grid2D::new(xi, x, manifest.xi_cap)?;
    let stencil = UStencil::new(manifest.u_star, manifest.nu)?;
    for (a, b) in stencil.nodes().iter().zip(&manifest.u_nodes) {
        if (a - b).abs() > 1e-14 {
            return Err(Error::Serialization(
                "stored u-nodes disagree with the reconstructed stencil".into(),
            ));
        }
    }
    let chi = build_cutoff(manifest.xi_cap, &Arc::new(grids.xi.clone()))?;
    manifest.forcing.validate()?;

    let nxi = grids.xi.n();
    let len2d = grids.len();
    let mut coeffs: Vec<Vec<Option<TripleY>>> = vec![vec![None; manifest.order + 1]; manifest.nu];
    for entry in &manifest.arrays {
        let raw = std::fs::read(dir.join(&entry.file))?;
        let vals = unpack(&raw)?;
        if vals.len() != 2 * len2d + nxi {
            return Err(Error::Serialization(format!(
                "array {} has wrong length",
                entry.file
            )));
        }
        let theta = GridFn2D::from_values(grids.clone(), vals[..len2d].to_vec())?;
        let psi = GridFn2D::from_values(grids.clone(), vals[len2d..2 * len2d].to_vec())?;
        let lambda = GridFn1D::from_values(Arc::new(grids.xi.clone()), vals[2 * len2d..].to_vec())?;
        if entry.node >= manifest.nu || entry.order > manifest.order {
            return Err(Error::Serialization(format!(
                "array entry {}/{} out of range",
                entry.node, entry.order
            )));
        }
        coeffs[entry.node][entry.order] = Some(TripleY { theta, psi, lambda });
    }
    let mut series = Vec::with_capacity(manifest.nu);
    for (m, node_coeffs) in coeffs.into_iter().enumerate() {
        let mut list = Vec::with_capacity(manifest.order + 1);
        for (n, c) in node_coeffs.into_iter().enumerate() {
            list.push(c.ok_or_else(|| {
                Error::Serialization(format!("missing array for node {m} order {n}"))
            })?);
        }
        series.push(EpsSeries::new(list));
    }
    let model = ManifoldModel {
        grids,
        stencil,
        coeffs: series,
        chi,
        forcing: manifest.forcing.clone(),
        xi_cap: manifest.xi_cap,
        order: manifest.order,
        alpha: manifest.alpha,
        orthogonality_weighted: manifest.orthogonality_weighted,
        validated_eps_max: manifest.validated_eps_max,
    };
    Ok((model, sha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_manifold, BuildInputs, BuildOptions};

    #[test]
    fn roundtrip_is_bit_exact() {
        let xi = Grid1D::uniform(-6.0, 6.0, 25).unwrap();
        let x = Grid1D::uniform(-9.0, 9.0, 37).unwrap();
        let grids = Grid2D::new(xi, x, 1.0).unwrap();
        let inputs = BuildInputs::new(
            grids,
            ForcingFamily::Gaussian {
                amplitude: 0.7,
                x0: 0.1,
                sigma: 1.1,
            },
            BuildOptions {
                order: 3,
                u_star: 0.1,
                nu: 5,
                xi_cap: 1.0,
                ..BuildOptions::default()
            },
        )
        .unwrap();
        let (model, _) = build_manifold(&inputs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sha1 = save_model(&model, dir.path(), "cfg").unwrap();
        let (loaded, sha2) = load_model(dir.path()).unwrap();
        assert_eq!(sha1, sha2);
        assert_eq!(loaded.order, model.order);
        assert_eq!(loaded.validated_eps_max, model.validated_eps_max);
        for m in 0..model.stencil.len() {
            for n in 0..=model.order {
                let a = model.coeffs[m].coeff(n);
                let b = loaded.coeffs[m].coeff(n);
                assert_eq!(a.theta.values(), b.theta.values(), "node {m} order {n}");
                assert_eq!(a.psi.values(), b.psi.values());
                assert_eq!(a.lambda.values(), b.lambda.values());
            }
        }
        // saving the loaded model reproduces the manifest byte-for-byte
        let dir2 = tempfile::tempdir().unwrap();
        let sha3 = save_model(&loaded, dir2.path(), "cfg").unwrap();
        assert_eq!(sha1, sha3);
    }
}
