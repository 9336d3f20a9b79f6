//! Versioned binary checkpoints.
//!
//! ```text
//! "SMLP" | version u32 | n_meta u32 | (name_len u32, name, value u64)*
//!        | n_tensors u32 | (name_len u32, name, rows u64, cols u64, f32 LE data)*
//! ```
//! Values are stored as `f32`; `f64` parameters are rounded on save.

use std::fs;
use std::path::Path;

use super::{GcnBaseline, Mlp, SimMlp, SimMlpDims};
use crate::graph::{normalize, Graph, Scheme};
use crate::numeric::Module;
use crate::{Error, Result, Scalar, Tensor};

const MAGIC: &[u8; 4] = b"SMLP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, u64)>,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn name(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

fn put_name(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_name(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (k, t) in &self.tensors {
            put_name(&mut out, k);
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut meta = Vec::new();
        for _ in 0..r.u32()? {
            let k = r.name()?;
            meta.push((k, r.u64()?));
        }
        let mut tensors = Vec::new();
        for _ in 0..r.u32()? {
            let k = r.name()?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let raw = r.take(rows * cols * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push((k.clone(), Tensor::new(rows, cols, data).map_err(|e| Error::Checkpoint(format!("{k}: {e}")))?));
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Checkpoint { meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn get(&self, key: &str) -> Result<u64> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
            .ok_or_else(|| Error::Checkpoint(format!("missing metadata `{key}`")))
    }

    fn from_module<T: Scalar, M: Module<T> + Clone>(m: &M, meta: Vec<(String, u64)>) -> Self {
        let mut m = m.clone();
        let mut state = Vec::new();
        m.state_mut("", &mut state);
        Checkpoint {
            meta,
            tensors: state.into_iter().map(|(k, t)| (k, t.cast())).collect(),
        }
    }

    fn fill_module<T: Scalar, M: Module<T>>(&self, m: &mut M) -> Result<()> {
        let mut state = Vec::new();
        m.state_mut("", &mut state);
        if state.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "model expects {} tensors, checkpoint has {}",
                state.len(),
                self.tensors.len()
            )));
        }
        for (name, slot) in state {
            let (_, t) = self
                .tensors
                .iter()
                .find(|(k, _)| *k == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, model expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.cast();
        }
        Ok(())
    }
}

fn scheme_code(s: Scheme) -> u64 {
    match s {
        Scheme::Bi => 0,
        Scheme::Row => 1,
        Scheme::Col => 2,
    }
}

fn scheme_from(c: u64) -> Result<Scheme> {
    match c {
        0 => Ok(Scheme::Bi),
        1 => Ok(Scheme::Row),
        2 => Ok(Scheme::Col),
        _ => Err(Error::Checkpoint(format!("unknown scheme code {c}"))),
    }
}

fn dims_meta(dims: &[usize], meta: &mut Vec<(String, u64)>) {
    meta.push(("n_dims".into(), dims.len() as u64));
    for (i, &d) in dims.iter().enumerate() {
        meta.push((format!("dim{i}"), d as u64));
    }
}

fn dims_from(ck: &Checkpoint) -> Result<Vec<usize>> {
    (0..ck.get("n_dims")?).map(|i| Ok(ck.get(&format!("dim{i}"))? as usize)).collect()
}

/// Any model this crate can persist.
#[derive(Debug, Clone)]
pub enum SavedModel<T> {
    SimMlp(SimMlp<T>),
    Mlp(Mlp<T>),
    Gcn(GcnBaseline<T>),
}

impl<T: Scalar> SavedModel<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::SimMlp(_) => "simmlp",
            SavedModel::Mlp(_) => "mlp",
            SavedModel::Gcn(_) => "gcn",
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            SavedModel::SimMlp(m) => m.dims.in_dim,
            SavedModel::Mlp(m) => m.in_dim(),
            SavedModel::Gcn(m) => m.dims()[0],
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta = Vec::new();
        match self {
            SavedModel::SimMlp(m) => {
                let d = m.dims;
                meta.extend([
                    ("kind".to_string(), 0),
                    ("in_dim".into(), d.in_dim as u64),
                    ("hidden".into(), d.hidden as u64),
                    ("mlp_layers".into(), d.mlp_layers as u64),
                    ("hops".into(), d.hops as u64),
                    ("scheme".into(), scheme_code(d.scheme)),
                    ("shared_encoder".into(), d.shared_encoder as u64),
                ]);
                Checkpoint::from_module(m, meta)
            }
            SavedModel::Mlp(m) => {
                meta.push(("kind".into(), 1));
                let mut dims = vec![m.in_dim()];
                dims.extend(m.linears.iter().map(|l| l.out_dim()));
                dims_meta(&dims, &mut meta);
                meta.push(("batchnorm".into(), m.has_batchnorm() as u64));
                Checkpoint::from_module(m, meta)
            }
            SavedModel::Gcn(m) => {
                meta.push(("kind".into(), 2));
                dims_meta(&m.dims(), &mut meta);
                Checkpoint::from_module(m, meta)
            }
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.get("kind")? {
            0 => {
                let dims = SimMlpDims {
                    in_dim: ck.get("in_dim")? as usize,
                    hidden: ck.get("hidden")? as usize,
                    mlp_layers: ck.get("mlp_layers")? as usize,
                    hops: ck.get("hops")? as usize,
                    scheme: scheme_from(ck.get("scheme")?)?,
                    shared_encoder: ck.get("shared_encoder")? != 0,
                };
                let mut m = SimMlp::new(dims, 0)?;
                ck.fill_module(&mut m)?;
                Ok(SavedModel::SimMlp(m))
            }
            1 => {
                let mut rng = <crate::rng::Rng as rand::SeedableRng>::seed_from_u64(0);
                let mut m = Mlp::new(&dims_from(ck)?, ck.get("batchnorm")? != 0, &mut rng)?;
                ck.fill_module(&mut m)?;
                Ok(SavedModel::Mlp(m))
            }
            2 => {
                let mut m = GcnBaseline::new(&dims_from(ck)?, 0)?;
                ck.fill_module(&mut m)?;
                Ok(SavedModel::Gcn(m))
            }
            k => Err(Error::Checkpoint(format!("unknown model kind {k}"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    fn check_graph(&self, g: &Graph<T>) -> Result<()> {
        if g.n_features() != self.in_dim() {
            return Err(Error::Config(format!(
                "{} checkpoint expects {} input features but the dataset has {}; \
                 was it trained on a different dataset?",
                self.kind(),
                self.in_dim(),
                g.n_features()
            )));
        }
        Ok(())
    }

    /// Frozen node embeddings: `H^MLP` for SimMLP, the last hidden layer
    /// for the supervised baselines.
    pub fn embed(&self, g: &Graph<T>) -> Result<Tensor<T>> {
        self.check_graph(g)?;
        match self {
            SavedModel::SimMlp(m) => m.encode_mlp(&g.features),
            SavedModel::Mlp(m) => Ok(m.infer_with_hidden(&g.features)?.1),
            SavedModel::Gcn(m) => m.embed(&normalize(g, Scheme::Bi), &g.features),
        }
    }

    /// Class logits for the supervised baselines.
    pub fn logits(&self, g: &Graph<T>) -> Result<Option<Tensor<T>>> {
        self.check_graph(g)?;
        match self {
            SavedModel::SimMlp(_) => Ok(None),
            SavedModel::Mlp(m) => Ok(Some(m.infer(&g.features)?)),
            SavedModel::Gcn(m) => Ok(Some(m.logits(&normalize(g, Scheme::Bi), &g.features)?)),
        }
    }
}
