use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::embed::EmbeddingMatrix;
use crate::error::Result;
use crate::io_util;
use crate::numerics::Matrix;

const MAGIC: &[u8] = b"EFLXEM1";

/// Embedding artifact: shape, training seed, the hash of the producing
/// configuration, and the row-major values.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub config_hash: [u8; 32],
    pub embeddings: EmbeddingMatrix,
}

pub fn save_embeddings(
    em: &EmbeddingMatrix,
    seed: u64,
    config_hash: [u8; 32],
    path: &Path,
) -> Result<()> {
    let mut w = io_util::create(path)?;
    io_util::write_all(&mut w, path, MAGIC)?;
    let werr = |e| io_util::write_error(path, e);
    w.write_u32::<LittleEndian>(em.n() as u32).map_err(werr)?;
    w.write_u32::<LittleEndian>(em.dim() as u32).map_err(werr)?;
    w.write_u64::<LittleEndian>(seed).map_err(werr)?;
    io_util::write_all(&mut w, path, &config_hash)?;
    for v in em.values.data() {
        w.write_f64::<LittleEndian>(*v).map_err(werr)?;
    }
    w.flush().map_err(werr)?;
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingFile> {
    let mut r = io_util::open(path)?;
    io_util::expect_magic(&mut r, path, MAGIC)?;
    let rerr = |e| io_util::read_error(path, e);
    let n = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
    let dim = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
    let seed = r.read_u64::<LittleEndian>().map_err(rerr)?;
    let mut config_hash = [0u8; 32];
    r.read_exact(&mut config_hash).map_err(rerr)?;
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        data.push(r.read_f64::<LittleEndian>().map_err(rerr)?);
    }
    io_util::expect_eof(&mut r, path)?;
    Ok(EmbeddingFile {
        n,
        dim,
        seed,
        config_hash,
        embeddings: EmbeddingMatrix {
            values: Matrix::from_vec(n, dim, data)?,
        },
    })
}
