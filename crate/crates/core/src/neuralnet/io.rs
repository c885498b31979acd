//! Model files.
//!
//! ```text
//! magic "CPRMODEL" | version u32 | header_len u32 | header (JSON, header_len bytes)
//! | n_params u64 | n_params × f64 | sha256 of every preceding byte (32 bytes)
//! ```
//!
//! All integers and floats are little-endian. The JSON header carries the
//! network spec, input/output dimensions and free-form metadata.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelParams, NetError, NetworkSpec};

const MAGIC: &[u8; 8] = b"CPRMODEL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    input_dim: usize,
    output_dim: usize,
    metadata: serde_json::Value,
}

/// Decoded model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spec: NetworkSpec,
    pub params: ModelParams,
    pub metadata: serde_json::Value,
    /// Hex SHA-256 stored in the file.
    pub checksum: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes a model; returns the hex checksum written at the end.
pub fn write_model_file(
    mut w: impl Write,
    spec: &NetworkSpec,
    params: &ModelParams,
    metadata: serde_json::Value,
) -> Result<String, NetError> {
    if !params.matches(spec) {
        return Err(NetError::Shape);
    }
    let header = Header { spec: spec.clone(), input_dim: spec.input_dim, output_dim: spec.output_dim, metadata };
    let header = serde_json::to_vec(&header).map_err(|e| NetError::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(8 + 8 + header.len() + 8 + params.len() * 8 + 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    w.write_all(&buf)?;
    Ok(hex(&digest))
}

pub fn read_model_file(mut r: impl Read) -> Result<ModelFile, NetError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let bad = |m: &str| NetError::Format(m.to_string());
    if buf.len() < 8 + 8 + 8 + 32 || &buf[..8] != MAGIC {
        return Err(bad("not a model file"));
    }
    let (body, stored) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != stored {
        return Err(bad("checksum mismatch"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(8);
    if version != VERSION {
        return Err(NetError::Format(format!("unsupported model version {version}")));
    }
    let header_len = u32_at(12) as usize;
    let header_end = 16 + header_len;
    if body.len() < header_end + 8 {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[16..header_end]).map_err(|e| NetError::Format(e.to_string()))?;
    let n = u64::from_le_bytes(body[header_end..header_end + 8].try_into().expect("8 bytes")) as usize;
    let data = &body[header_end + 8..];
    if data.len() != n * 8 {
        return Err(bad("parameter block length mismatch"));
    }
    let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    header.spec.validate()?;
    if header.input_dim != header.spec.input_dim || header.output_dim != header.spec.output_dim {
        return Err(bad("header dimensions disagree with spec"));
    }
    let params = ModelParams::from_values(&header.spec, values)?;
    if !params.is_finite() {
        return Err(NetError::NonFinite("parameters"));
    }
    Ok(ModelFile { spec: header.spec, params, metadata: header.metadata, checksum: hex(stored) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_corruption() {
        let spec = NetworkSpec::embedding(7, vec![5], 3);
        let params = ModelParams::init(&spec, &mut ChaCha8Rng::seed_from_u64(0));
        let mut bytes = Vec::new();
        let sum = write_model_file(&mut bytes, &spec, &params, serde_json::json!({"db": "abc"})).unwrap();
        let back = read_model_file(bytes.as_slice()).unwrap();
        assert_eq!(back.spec, spec);
        assert_eq!(back.params, params);
        assert_eq!(back.metadata["db"], "abc");
        assert_eq!(back.checksum, sum);

        let mut flipped = bytes.clone();
        let i = flipped.len() - 40;
        flipped[i] ^= 1;
        assert!(matches!(read_model_file(flipped.as_slice()), Err(NetError::Format(m)) if m.contains("checksum")));
        assert!(read_model_file(&b"garbage"[..]).is_err());
    }
}
