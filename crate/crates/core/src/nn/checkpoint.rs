//! Checkpoint format `SPCK1`: magic, u32 LE header length, header JSON
//! (hyperparameters, seed, step, blob directory), then named float32
//! little-endian blobs in directory order. Adam moments ride along as
//! extra blobs so training can resume.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::{Param, ParameterStore};

pub const MAGIC: &[u8; 5] = b"SPCK1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not an SPCK1 checkpoint")]
    BadMagic,
    #[error("malformed checkpoint header: {0}")]
    BadHeader(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    rows: usize,
    cols: usize,
    frozen: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    seed: u64,
    step: u64,
    blobs: Vec<BlobEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub seed: u64,
    pub store: ParameterStore,
}

fn write_blob<W: Write>(w: &mut W, arr: &Array2<f64>) -> std::io::Result<()> {
    for &v in arr.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_blob<R: Read>(r: &mut R, rows: usize, cols: usize) -> std::io::Result<Array2<f64>> {
    let mut buf = vec![0u8; rows * cols * 4];
    r.read_exact(&mut buf)?;
    let data: Vec<f64> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let blobs: Vec<BlobEntry> = ckpt
        .store
        .params
        .iter()
        .map(|(name, p)| BlobEntry {
            name: name.clone(),
            rows: p.value.nrows(),
            cols: p.value.ncols(),
            frozen: p.frozen,
        })
        .collect();
    let header = Header {
        config: ckpt.config.clone(),
        seed: ckpt.seed,
        step: ckpt.store.step,
        blobs,
    };
    let header_bytes = serde_json::to_vec(&serde_json::to_value(&header)?)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for p in ckpt.store.params.values() {
        write_blob(w, &p.value)?;
        write_blob(w, &p.m)?;
        write_blob(w, &p.v)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let mut header_bytes = vec![0u8; u32::from_le_bytes(len_buf) as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;

    let mut store = ParameterStore::new();
    store.step = header.step;
    for entry in &header.blobs {
        let value = read_blob(r, entry.rows, entry.cols)?;
        let m = read_blob(r, entry.rows, entry.cols)?;
        let v = read_blob(r, entry.rows, entry.cols)?;
        store
            .params
            .insert(entry.name.clone(), Param { value, m, v, frozen: entry.frozen });
    }
    Ok(Checkpoint { config: header.config, seed: header.seed, store })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn checkpoint_round_trip() {
        let mut store = ParameterStore::new();
        // f32-representable values survive the cast
        store.insert("layer.w", array![[0.5, -0.25], [1.0, 2.0]]);
        store.insert_frozen("text.table", array![[0.125, 0.75]]);
        store.step = 17;
        let ckpt = Checkpoint {
            config: serde_json::json!({"model_dim": 32, "blocks": 2}),
            seed: 99,
            store,
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.store.step, 17);
        assert_eq!(back.config["model_dim"], 32);
        assert_eq!(back.store.params["layer.w"].value, ckpt.store.params["layer.w"].value);
        assert!(back.store.params["text.table"].frozen);
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"WRONG".to_vec();
        assert!(matches!(read_checkpoint(&mut buf.as_slice()), Err(CheckpointError::BadMagic)));
    }
}
