//! Model file format: `MAGIC`, little-endian `u32` version, little-endian
//! `u64` payload length, then a JSON payload holding the model and its
//! vocabularies.

use std::fs;
use std::path::Path;

use super::{AnyModel, ModelError};

pub const MAGIC: &[u8; 8] = b"BRVMODEL";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_model(model: &AnyModel) -> Vec<u8> {
    let payload = serde_json::to_vec(model).expect("models always serialize");
    let mut out = Vec::with_capacity(payload.len() + 20);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<AnyModel, ModelError> {
    let magic_len = MAGIC.len().min(bytes.len());
    if bytes[..magic_len] != MAGIC[..magic_len] {
        return Err(ModelError::NotAModelFile);
    }
    let take = |at: usize, n: usize| bytes.get(at..at + n).ok_or(ModelError::UnexpectedEof);
    take(0, MAGIC.len())?;
    let version = u32::from_le_bytes(take(8, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(take(12, 8)?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| ModelError::UnexpectedEof)?;
    let payload = take(20, len)?;
    if bytes.len() > 20 + len {
        return Err(ModelError::Payload("trailing bytes after payload".into()));
    }
    serde_json::from_slice(payload).map_err(|e| ModelError::Payload(e.to_string()))
}

pub fn save_model(model: &AnyModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_model(model)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<AnyModel, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TableModel;

    #[test]
    fn header_errors() {
        let bytes = encode_model(&TableModel::figure1().into());
        assert!(matches!(
            decode_model(&bytes[..bytes.len() - 3]),
            Err(ModelError::UnexpectedEof)
        ));
        assert!(matches!(
            decode_model(&bytes[..5]),
            Err(ModelError::UnexpectedEof)
        ));
        assert!(matches!(
            decode_model(&bytes[..10]),
            Err(ModelError::UnexpectedEof)
        ));
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert_eq!(
            decode_model(&wrong).unwrap_err().to_string(),
            "not a model file"
        );
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(
            decode_model(&v2),
            Err(ModelError::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
        assert_eq!(
            decode_model(&bytes[..bytes.len() - 1])
                .unwrap_err()
                .to_string(),
            "unexpected end of model file"
        );
    }
}
