//! Checkpoint layout: 8-byte magic, u32 version, u64-length JSON header
//! (config, vocabularies, tensor shapes), then every tensor as little-endian
//! f64 in [`Params::tensors`] order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Params;
use super::vocab::Vocab;
use super::{Seq2SeqConfig, TranslationModel, TranslatorError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ATNMTCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: Seq2SeqConfig,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    shapes: Vec<(usize, usize)>,
}

pub fn save_checkpoint(model: &TranslationModel, path: &Path) -> Result<(), TranslatorError> {
    let header = Header {
        config: model.config.clone(),
        src_vocab: model.src_vocab.clone(),
        tgt_vocab: model.tgt_vocab.clone(),
        shapes: model.params.tensors().iter().map(|t| t.dim()).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for t in model.params.tensors() {
        for v in t.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn mismatch(m: impl Into<String>) -> TranslatorError {
    TranslatorError::FormatVersionMismatch(m.into())
}

pub fn load_checkpoint(path: &Path) -> Result<TranslationModel, TranslatorError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| mismatch("file too short"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(mismatch("not a translator checkpoint"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(mismatch(format!(
            "checkpoint version {version}, reader supports {CHECKPOINT_VERSION}"
        )));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| mismatch(format!("bad header: {e}")))?;
    header.config.validate()?;

    let mut params = Params::zeros(&header.config, header.src_vocab.len(), header.tgt_vocab.len());
    let expected: Vec<(usize, usize)> = params.tensors().iter().map(|t| t.dim()).collect();
    if expected != header.shapes {
        return Err(TranslatorError::ShapeMismatch(
            "tensor shapes in header disagree with config".into(),
        ));
    }
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(mismatch(format!("{} trailing bytes", rest.len())));
    }
    Ok(TranslationModel {
        params,
        src_vocab: header.src_vocab,
        tgt_vocab: header.tgt_vocab,
        config: header.config,
    })
}
