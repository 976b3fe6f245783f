//! Binary array container with a JSON sidecar.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "MSNF"
//! version    u32      1
//! count      u32      number of arrays
//! per array:
//!   name_len u32, name (UTF-8)
//!   layout   u8       0 = dense matrix, 1 = sparse 3-mode tensor
//!   dense:   rows u64, cols u64, rows*cols f64 row-major
//!   sparse:  dims 3 x u64, nnz u64, nnz x (i, j, k) u64, nnz x f64
//! ```
//!
//! Metadata (ranks, ids, convergence) lives in `<file>.json` next to it.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aspects::{AspectData, AspectKind, AspectModel};
use crate::decompose::JiveResult;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::tensor::{Entry, SparseTensor3};

pub const MAGIC: &[u8; 4] = b"MSNF";
pub const VERSION: u32 = 1;

const DENSE: u8 = 0;
const SPARSE3: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    Dense(DenseMatrix),
    Sparse(SparseTensor3),
}

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated container".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}

fn get_len(r: &mut impl Read) -> Result<usize> {
    usize::try_from(u64::from_le_bytes(get(r)?))
        .map_err(|_| Error::Format("length overflow".into()))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get(r)?))
}

pub fn write_arrays(mut w: impl Write, arrays: &[(String, Array)]) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_u32(&mut w, arrays.len() as u32)?;
    for (name, array) in arrays {
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        match array {
            Array::Dense(m) => {
                w.write_all(&[DENSE])?;
                put_u64(&mut w, m.rows() as u64)?;
                put_u64(&mut w, m.cols() as u64)?;
                for &v in m.as_slice() {
                    put_f64(&mut w, v)?;
                }
            }
            Array::Sparse(t) => {
                w.write_all(&[SPARSE3])?;
                for d in t.dims() {
                    put_u64(&mut w, d as u64)?;
                }
                put_u64(&mut w, t.nnz() as u64)?;
                for e in t.entries() {
                    put_u64(&mut w, e.i as u64)?;
                    put_u64(&mut w, e.j as u64)?;
                    put_u64(&mut w, e.k as u64)?;
                }
                for e in t.entries() {
                    put_f64(&mut w, e.value)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_arrays(mut r: impl Read) -> Result<Vec<(String, Array)>> {
    if &get::<4>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = get_u32(&mut r)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = get_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|_| Error::Format("truncated array name".into()))?;
        let name =
            String::from_utf8(name).map_err(|_| Error::Format("array name is not UTF-8".into()))?;
        let array = match get::<1>(&mut r)?[0] {
            DENSE => {
                let (rows, cols) = (get_len(&mut r)?, get_len(&mut r)?);
                let n = rows
                    .checked_mul(cols)
                    .ok_or_else(|| Error::Format("dense size overflow".into()))?;
                let data = (0..n)
                    .map(|_| get_f64(&mut r))
                    .collect::<Result<Vec<_>>>()?;
                Array::Dense(DenseMatrix::from_vec(rows, cols, data)?)
            }
            SPARSE3 => {
                let dims = [get_len(&mut r)?, get_len(&mut r)?, get_len(&mut r)?];
                let nnz = get_len(&mut r)?;
                let coords = (0..nnz)
                    .map(|_| Ok((get_len(&mut r)?, get_len(&mut r)?, get_len(&mut r)?)))
                    .collect::<Result<Vec<_>>>()?;
                let entries = coords
                    .into_iter()
                    .map(|(i, j, k)| {
                        Ok(Entry {
                            i,
                            j,
                            k,
                            value: get_f64(&mut r)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Array::Sparse(SparseTensor3::new(dims, entries)?)
            }
            other => return Err(Error::Format(format!("unknown layout {other}"))),
        };
        out.push((name, array));
    }
    Ok(out)
}

/// `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save(
    path: impl AsRef<Path>,
    arrays: &[(String, Array)],
    sidecar: &impl Serialize,
) -> Result<()> {
    let path = path.as_ref();
    write_arrays(BufWriter::new(std::fs::File::create(path)?), arrays)?;
    let mut meta = serde_json::to_string_pretty(sidecar)?;
    meta.push('\n');
    std::fs::write(sidecar_path(path), meta)?;
    Ok(())
}

pub fn load<T: for<'de> Deserialize<'de>>(
    path: impl AsRef<Path>,
) -> Result<(Vec<(String, Array)>, T)> {
    let path = path.as_ref();
    let arrays = read_arrays(BufReader::new(std::fs::File::open(path)?))?;
    let meta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    Ok((arrays, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectEntry {
    pub name: String,
    pub kind: AspectKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectsMeta {
    pub content: String,
    pub article_ids: Vec<String>,
    pub aspects: Vec<AspectEntry>,
}

pub fn save_aspects(path: impl AsRef<Path>, models: &[AspectModel]) -> Result<()> {
    crate::aspects::check_alignment(models)?;
    let arrays = models
        .iter()
        .map(|m| {
            let a = match &m.data {
                AspectData::Tensor(t) => Array::Sparse(t.clone()),
                AspectData::Matrix(x) => Array::Dense(x.clone()),
            };
            (m.name.clone(), a)
        })
        .collect::<Vec<_>>();
    let meta = AspectsMeta {
        content: "aspects".into(),
        article_ids: models
            .first()
            .map(|m| m.article_ids.clone())
            .unwrap_or_default(),
        aspects: models
            .iter()
            .map(|m| AspectEntry {
                name: m.name.clone(),
                kind: m.kind,
            })
            .collect(),
    };
    save(path, &arrays, &meta)
}

pub fn load_aspects(path: impl AsRef<Path>) -> Result<Vec<AspectModel>> {
    let (arrays, meta): (_, AspectsMeta) = load(path)?;
    if meta.aspects.len() != arrays.len() {
        return Err(Error::Format(format!(
            "sidecar lists {} aspects, container holds {}",
            meta.aspects.len(),
            arrays.len()
        )));
    }
    meta.aspects
        .iter()
        .zip(arrays)
        .map(|(entry, (name, array))| {
            if name != entry.name {
                return Err(Error::Format(format!(
                    "array {name:?} where {:?} was expected",
                    entry.name
                )));
            }
            Ok(AspectModel {
                kind: entry.kind,
                name,
                data: match array {
                    Array::Dense(m) => AspectData::Matrix(m),
                    Array::Sparse(t) => AspectData::Tensor(t),
                },
                article_ids: meta.article_ids.clone(),
            })
        })
        .collect()
}

/// Metadata written next to an embedding container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub content: String,
    pub article_ids: Vec<String>,
    pub aspects: Vec<String>,
    pub level1_ranks: Vec<usize>,
    pub r_joint: Option<usize>,
    pub r_individual: Option<Vec<usize>>,
    pub bounds: Option<Vec<usize>>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub residual_history: Option<Vec<f64>>,
}

/// Stores the article embedding and, when present, the joint result.
/// Arrays: `embedding`, then `joint`, `basis` and `individual/<aspect>`.
pub fn save_embedding(
    path: impl AsRef<Path>,
    embedding: &DenseMatrix,
    article_ids: &[String],
    aspects: &[String],
    level1_ranks: &[usize],
    jive: Option<&JiveResult>,
) -> Result<()> {
    if embedding.rows() != article_ids.len() {
        return Err(Error::Alignment(format!(
            "{} embedding rows for {} ids",
            embedding.rows(),
            article_ids.len()
        )));
    }
    let mut arrays = vec![("embedding".to_string(), Array::Dense(embedding.clone()))];
    if let Some(j) = jive {
        arrays.push(("joint".into(), Array::Dense(j.joint.clone())));
        arrays.push(("basis".into(), Array::Dense(j.basis.clone())));
        for (name, a) in j.names.iter().zip(&j.individual) {
            arrays.push((format!("individual/{name}"), Array::Dense(a.clone())));
        }
    }
    let meta = EmbeddingMeta {
        content: "embedding".into(),
        article_ids: article_ids.to_vec(),
        aspects: aspects.to_vec(),
        level1_ranks: level1_ranks.to_vec(),
        r_joint: jive.map(|j| j.r_joint),
        r_individual: jive.map(|j| j.r_individual.clone()),
        bounds: jive.map(|j| j.bounds.clone()),
        converged: jive.map(|j| j.converged),
        iterations: jive.map(|j| j.iterations),
        residual_history: jive.map(|j| j.residual_history.clone()),
    };
    save(path, &arrays, &meta)
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<(DenseMatrix, EmbeddingMeta)> {
    let (arrays, meta): (Vec<(String, Array)>, EmbeddingMeta) = load(path)?;
    let emb = arrays
        .into_iter()
        .find_map(|(n, a)| match (n.as_str(), a) {
            ("embedding", Array::Dense(m)) => Some(m),
            _ => None,
        })
        .ok_or_else(|| Error::Format("container has no dense embedding array".into()))?;
    if emb.rows() != meta.article_ids.len() {
        return Err(Error::Alignment(format!(
            "{} embedding rows for {} ids",
            emb.rows(),
            meta.article_ids.len()
        )));
    }
    Ok((emb, meta))
}
