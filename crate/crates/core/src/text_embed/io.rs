//! Binary model files and plain-text vector export.
//!
//! Layout (little endian): 8-byte magic, u32 version, u32-length JSON config,
//! u64 vocab size, per token (u32 length, UTF-8 bytes, u64 count), input
//! matrix, output matrix, u64 bucket rows, bucket matrix. Matrices are raw f32.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{EmbedConfig, EmbedError, EmbedderModel};
use crate::vecfile;

pub const MAGIC: &[u8; 8] = b"ATEMBED\0";
pub const FORMAT_VERSION: u32 = 1;

fn write_matrix<W: Write>(w: &mut W, m: &Array2<f32>) -> io::Result<()> {
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_model(model: &EmbedderModel, path: &Path) -> Result<(), EmbedError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(&model.config).expect("config serializes");
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    w.write_all(&(model.vocab.len() as u64).to_le_bytes())?;
    for (t, c) in model.vocab.iter().zip(&model.counts) {
        w.write_all(&(t.len() as u32).to_le_bytes())?;
        w.write_all(t.as_bytes())?;
        w.write_all(&c.to_le_bytes())?;
    }
    write_matrix(&mut w, &model.input)?;
    write_matrix(&mut w, &model.output)?;
    let rows = model.subwords.as_ref().map_or(0, |b| b.nrows());
    w.write_all(&(rows as u64).to_le_bytes())?;
    if let Some(b) = &model.subwords {
        write_matrix(&mut w, b)?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> io::Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn u32(&mut self) -> io::Result<u32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> io::Result<u64> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> io::Result<Array2<f32>> {
        let raw = self.bytes(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
    }
}

fn mismatch(msg: impl Into<String>) -> EmbedError {
    EmbedError::FormatVersionMismatch(msg.into())
}

pub fn load_model(path: &Path) -> Result<EmbedderModel, EmbedError> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    let magic = r
        .bytes(MAGIC.len())
        .map_err(|_| mismatch("file too short for header"))?;
    if magic != MAGIC {
        return Err(mismatch("not an embedder model file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(mismatch(format!(
            "file version {version}, reader supports {FORMAT_VERSION}"
        )));
    }
    let cfg_len = r.u32()? as usize;
    let config: EmbedConfig =
        serde_json::from_slice(&r.bytes(cfg_len)?).map_err(|e| mismatch(format!("bad config block: {e}")))?;
    let n = r.u64()? as usize;
    let mut vocab = Vec::with_capacity(n.min(1 << 20));
    let mut counts = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = r.u32()? as usize;
        let token = String::from_utf8(r.bytes(len)?).map_err(|_| mismatch("token is not UTF-8"))?;
        vocab.push(token);
        counts.push(r.u64()?);
    }
    let input = r.matrix(n, config.dim)?;
    let output = r.matrix(n, config.dim)?;
    let bucket_rows = r.u64()? as usize;
    let subwords = if bucket_rows > 0 {
        Some(r.matrix(bucket_rows, config.dim)?)
    } else {
        None
    };
    if subwords.is_some() != config.subwords_enabled {
        return Err(mismatch("subword table disagrees with config"));
    }
    let mut rest = Vec::new();
    r.inner.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(mismatch(format!("{} trailing bytes", rest.len())));
    }
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    if index.len() != vocab.len() {
        return Err(mismatch("duplicate vocabulary entries"));
    }
    Ok(EmbedderModel {
        vocab,
        counts,
        index,
        input,
        output,
        subwords,
        config,
    })
}

/// Writes `vocab_count dim` followed by one line per token with its full
/// (word plus n-gram) vector.
pub fn export_text(model: &EmbedderModel, path: &Path) -> Result<(), EmbedError> {
    let rows = model.vocab.iter().map(|t| {
        let v = model
            .token_vector(t)
            .expect("in-vocabulary token has a vector")
            .into_iter()
            .map(f64::from)
            .collect();
        (t.as_str(), v)
    });
    vecfile::write_vectors_file(path, model.dim(), rows)?;
    Ok(())
}
