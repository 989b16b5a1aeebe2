//! Checkpoint persistence: a self-describing JSON header line (shapes,
//! vocabulary, step) followed by the flat parameter values in the float
//! sidecar layout (little-endian u32 count, then f32 values in traversal
//! order).

use crate::error::{MindError, Result};
use crate::p2cl::Phase;
use crate::seq2seq::model::ModelParams;
use crate::seq2seq::train::TrainState;
use crate::seq2seq::vocab::Vocab;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: u32,
    d_model: usize,
    d_ff: usize,
    layers: usize,
    vocab_size: usize,
    feat_dim: usize,
    proj_dim: usize,
    step: u64,
    phase: Phase,
    vocab_hash: String,
    vocab: Vec<String>,
}

const FORMAT: u32 = 1;

pub fn save_checkpoint(path: impl AsRef<Path>, state: &TrainState, vocab: &Vocab) -> Result<()> {
    let path = path.as_ref();
    let params = &state.params;
    let header = CheckpointHeader {
        format: FORMAT,
        d_model: params.d_model,
        d_ff: params.d_ff,
        layers: params.enc.len(),
        vocab_size: params.vocab_size,
        feat_dim: params.feat_dim,
        proj_dim: params.proj_dim,
        step: state.step,
        phase: state.phase,
        vocab_hash: vocab.hash(),
        vocab: vocab.tokens().to_vec(),
    };
    let mut buf = serde_json::to_vec(&header).map_err(|e| MindError::BadResponse(e.to_string()))?;
    buf.push(b'\n');

    let count = params.param_count() as u32;
    buf.extend_from_slice(&count.to_le_bytes());
    params.for_each(|v| buf.extend_from_slice(&(v as f32).to_le_bytes()));

    let mut file = std::fs::File::create(path).map_err(|e| MindError::io(path, e))?;
    file.write_all(&buf).map_err(|e| MindError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TrainState, Vocab)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| MindError::io(path, e))?;

    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| MindError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header line".into(),
        })?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| MindError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
    if header.format != FORMAT {
        return Err(MindError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unsupported checkpoint format {}", header.format),
        });
    }

    let vocab = Vocab::from_tokens(header.vocab.clone());
    if vocab.hash() != header.vocab_hash {
        return Err(MindError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "vocabulary hash mismatch".into(),
        });
    }

    let body = &bytes[newline + 1..];
    if body.len() < 4 {
        return Err(MindError::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: "truncated parameter block".into(),
        });
    }
    let count = u32::from_le_bytes(body[..4].try_into().unwrap()) as usize;
    let values = &body[4..];
    if values.len() != count * 4 {
        return Err(MindError::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: format!(
                "expected {} parameter bytes, found {}",
                count * 4,
                values.len()
            ),
        });
    }

    let mut params = ModelParams::zeros(
        header.d_model,
        header.d_ff,
        header.layers,
        header.vocab_size,
        header.feat_dim,
        header.proj_dim,
    );
    if params.param_count() != count {
        return Err(MindError::Shape {
            expected: format!("{} parameters for declared shapes", params.param_count()),
            got: format!("{}", count),
        });
    }
    let mut i = 0;
    params.for_each_mut(|v| {
        let chunk: [u8; 4] = values[i * 4..i * 4 + 4].try_into().unwrap();
        *v = f32::from_le_bytes(chunk) as f64;
        i += 1;
    });

    Ok((
        TrainState {
            params,
            step: header.step,
            phase: header.phase,
        },
        vocab,
    ))
}
