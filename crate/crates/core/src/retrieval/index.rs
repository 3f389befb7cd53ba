use std::cmp::Ordering;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::{dot, embed, EmbedError, Embedder, Vector};
use crate::corpus::Corpus;
use crate::exec::Execution;

/// Index file magic and current format version.
///
/// Layout (little-endian): magic `SPQAIDX\0`, `u32` version, `u32`-prefixed
/// UTF-8 provider id, `u32` dim, `u64` count, then `count` records of a
/// `u32`-prefixed UTF-8 pair id followed by `dim` `f64` components.
pub const INDEX_MAGIC: &[u8; 8] = b"SPQAIDX\0";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub pair_id: String,
    pub vector: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    provider_id: String,
    dim: usize,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub pair_id: String,
    pub score: f64,
    /// Position of the pair in the indexed corpus.
    pub position: usize,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("embedding pair `{pair_id}`: {source}")]
    Embed { pair_id: String, source: EmbedError },
    #[error("query embedding failed: {0}")]
    Query(EmbedError),
    #[error("index was built with provider `{index}` but the query uses `{query}`")]
    ProviderMismatch { index: String, query: String },
    #[error("n = {n} is out of range for an index of {len} entries")]
    OutOfRange { n: usize, len: usize },
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("index file: {0}")]
    Io(#[from] io::Error),
    #[error("index file is malformed: {0}")]
    Format(String),
    #[error("unsupported index version {0}")]
    UnsupportedVersion(u32),
}

/// Embed every question of `corpus`. Entries keep corpus order whatever the
/// execution strategy.
pub fn build_index(corpus: &Corpus, provider: &dyn Embedder, exec: Execution) -> Result<EmbeddingIndex, IndexError> {
    if corpus.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let entries = exec
        .map(&corpus.pairs, |pair| {
            embed(provider, &pair.question)
                .map(|vector| IndexEntry { pair_id: pair.id.clone(), vector })
                .map_err(|source| IndexError::Embed { pair_id: pair.id.clone(), source })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmbeddingIndex { provider_id: provider.provider_id().to_string(), dim: provider.dim(), entries })
}

/// Scores are snapped to multiples of this before ranking. Equal cosines
/// reached through different summation orders can differ in the last few
/// bits; snapping makes them tie so corpus position decides.
const SCORE_GRID: f64 = (1u64 << 40) as f64;

fn snap(score: f64) -> f64 {
    (score * SCORE_GRID).round() / SCORE_GRID
}

/// Descending score, then ascending corpus position.
fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

impl EmbeddingIndex {
    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    fn check_provider(&self, provider: &dyn Embedder) -> Result<(), IndexError> {
        if provider.provider_id() != self.provider_id {
            return Err(IndexError::ProviderMismatch {
                index: self.provider_id.clone(),
                query: provider.provider_id().to_string(),
            });
        }
        Ok(())
    }

    /// The `n` training questions most similar to `query`.
    pub fn top_n(&self, provider: &dyn Embedder, query: &str, n: usize) -> Result<Vec<Neighbor>, IndexError> {
        self.check_provider(provider)?;
        let v = embed(provider, query).map_err(IndexError::Query)?;
        self.top_n_vector(&v, n)
    }

    pub fn top_n_vector(&self, query: &Vector, n: usize) -> Result<Vec<Neighbor>, IndexError> {
        if n == 0 || n > self.entries.len() {
            return Err(IndexError::OutOfRange { n, len: self.entries.len() });
        }
        if query.dim() != self.dim {
            return Err(IndexError::Query(EmbedError::DimMismatch { expected: self.dim, got: query.dim() }));
        }
        let q = query.as_slice();
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (snap(dot(q, e.vector.as_slice()).clamp(-1.0, 1.0)), i))
            .collect();
        if n < scored.len() {
            scored.select_nth_unstable_by(n - 1, rank_order);
            scored.truncate(n);
        }
        scored.sort_unstable_by(rank_order);
        Ok(scored
            .into_iter()
            .map(|(score, position)| Neighbor { pair_id: self.entries[position].pair_id.clone(), score, position })
            .collect())
    }

    /// [`top_n`](Self::top_n) for many queries. Output order follows `queries`.
    pub fn top_n_batch(
        &self,
        provider: &dyn Embedder,
        queries: &[String],
        n: usize,
        exec: Execution,
    ) -> Result<Vec<Vec<Neighbor>>, IndexError> {
        self.check_provider(provider)?;
        exec.map(queries, |q| self.top_n(provider, q, n)).into_iter().collect()
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&INDEX_VERSION.to_le_bytes())?;
        write_str(w, &self.provider_id)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for e in &self.entries {
            write_str(w, &e.pair_id)?;
            for x in e.vector.as_slice() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, IndexError> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != INDEX_VERSION {
            return Err(IndexError::UnsupportedVersion(version));
        }
        let provider_id = read_string(r)?;
        let dim = read_u32(r)? as usize;
        if dim == 0 {
            return Err(IndexError::Format("dimension is zero".into()));
        }
        let count = read_u64(r)?;
        let mut entries = Vec::new();
        for i in 0..count {
            let pair_id = read_string(r)?;
            let mut components = Vec::with_capacity(dim);
            for _ in 0..dim {
                let mut b = [0u8; 8];
                read_exact(r, &mut b)?;
                components.push(f64::from_le_bytes(b));
            }
            let vector = Vector::from_unit(components)
                .map_err(|e| IndexError::Format(format!("entry {i} (`{pair_id}`): {e}")))?;
            entries.push(IndexEntry { pair_id, vector });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(IndexError::Format("trailing bytes after last entry".into()));
        }
        Ok(Self { provider_id, dim, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Load an index and insist it was built by `provider`.
    pub fn load(path: &Path, provider: &dyn Embedder) -> Result<Self, IndexError> {
        let mut f = io::BufReader::new(std::fs::File::open(path)?);
        let index = Self::read_from(&mut f)?;
        index.check_provider(provider)?;
        if index.dim != provider.dim() {
            return Err(IndexError::Format(format!(
                "index dimension {} does not match provider dimension {}",
                index.dim,
                provider.dim()
            )));
        }
        Ok(index)
    }
}

fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), IndexError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => IndexError::Format("truncated file".into()),
        _ => IndexError::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32, IndexError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, IndexError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> Result<String, IndexError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| IndexError::Format("string is not UTF-8".into()))
}
