//! Named parameter storage and the on-disk tensor format used by checkpoints.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

const TENSOR_MAGIC: &[u8; 4] = b"FSTN";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StoreId(u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Non-trainable state such as batch-norm running statistics.
    Buffer,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub kind: ParamKind,
}

/// An ordered collection of named tensors belonging to one network.
#[derive(Debug)]
pub struct ParamStore {
    id: StoreId,
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        Self {
            id: StoreId(NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)),
            params: self.params.clone(),
            index: self.index.clone(),
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            id: StoreId(NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)),
            params: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> StoreId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor, kind: ParamKind) {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, value, kind });
    }

    /// Inserts a trainable tensor drawn from `U(-bound, bound)`.
    pub fn insert_uniform(&mut self, name: impl Into<String>, shape: &[usize], bound: f64, rng: &mut impl Rng) {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data), ParamKind::Trainable);
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.params[i].value)
    }

    pub fn by_index(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::Validation(format!("unknown parameter {name}")))?;
        if self.params[i].value.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "parameter {name}: expected {:?}, got {:?}",
                self.params[i].value.shape(),
                value.shape()
            )));
        }
        self.params[i].value = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    /// Writes every tensor to `dir/<prefix><name>.bin`.
    pub fn save(&self, dir: &Path, prefix: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        for p in &self.params {
            write_tensor(&dir.join(format!("{prefix}{}.bin", p.name)), &p.value)?;
        }
        Ok(())
    }

    /// Loads every registered tensor from `dir`. Missing files and shape
    /// mismatches are errors; the architecture must already be registered.
    pub fn load(&mut self, dir: &Path, prefix: &str) -> Result<()> {
        for p in &mut self.params {
            let path = dir.join(format!("{prefix}{}.bin", p.name));
            let t = read_tensor(&path)?;
            if t.shape() != p.value.shape() {
                return Err(Error::Shape(format!(
                    "{}: checkpoint shape {:?} does not match architecture {:?}",
                    path.display(),
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t;
        }
        Ok(())
    }
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 8 * (t.ndim() + t.numel()));
    buf.extend_from_slice(TENSOR_MAGIC);
    buf.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?
        .read_to_end(&mut bytes)?;
    let bad = || Error::Validation(format!("{}: malformed tensor file", path.display()));
    if bytes.len() < 8 || &bytes[..4] != TENSOR_MAGIC {
        return Err(bad());
    }
    let ndim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let mut off = 8;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = bytes.get(off..off + 8).ok_or_else(bad)?;
        shape.push(u64::from_le_bytes(d.try_into().unwrap()) as usize);
        off += 8;
    }
    let n: usize = shape.iter().product();
    if bytes.len() != off + 8 * n {
        return Err(bad());
    }
    let data = bytes[off..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor::new(shape, data))
}
