//! Little-endian binary encoding of a trained [`ToyModel`].

use alloc::string::String;
use alloc::vec::Vec;

use super::model::{Head, ToyConfig, ToyModel};
use crate::corpus::Vocabulary;

const MAGIC: &[u8; 8] = b"SALTOY01";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PersistError {
    #[error("not a toy model file (bad magic)")]
    Magic,
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown head code {0}")]
    Head(u8),
    #[error("token {0} is not valid UTF-8")]
    Utf8(usize),
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("parameter count does not match the stored shape")]
    Shape,
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

fn head_code(h: Head) -> u8 {
    match h {
        Head::Linear => 0,
        Head::Mlp => 1,
    }
}

impl ToyModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + self.params().len() * 8);
        out.extend_from_slice(MAGIC);
        out.push(head_code(c.head));
        out.push(c.train_embeddings as u8);
        out.push(c.squared_features as u8);
        for v in [self.vocab.len(), c.d, c.features, c.hidden, c.num_classes] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&c.beta.to_le_bytes());
        for t in self.vocab.tokens() {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            out.extend_from_slice(t.as_bytes());
        }
        for set in [&self.vocab.special_tokens, &self.vocab.punctuation] {
            out.extend_from_slice(&(set.len() as u32).to_le_bytes());
            for t in set {
                out.extend_from_slice(&(t.len() as u32).to_le_bytes());
                out.extend_from_slice(t.as_bytes());
            }
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Decodes a model written by [`ToyModel::to_bytes`]. Training-only
    /// settings (learning rate, epochs, ...) come back as defaults.
    pub fn from_bytes(bytes: &[u8]) -> Result<ToyModel, PersistError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(PersistError::Magic);
        }
        let head = match r.take(1)?[0] {
            0 => Head::Linear,
            1 => Head::Mlp,
            x => return Err(PersistError::Head(x)),
        };
        let train_embeddings = r.take(1)?[0] != 0;
        let squared_features = r.take(1)?[0] != 0;
        let v = r.u64()? as usize;
        let d = r.u64()? as usize;
        let features = r.u64()? as usize;
        let hidden = r.u64()? as usize;
        let num_classes = r.u64()? as usize;
        let beta = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let mut tokens = Vec::with_capacity(v.min(1 << 20));
        for i in 0..v {
            tokens.push(r.string(i)?);
        }
        let mut sets: [Vec<String>; 2] = [Vec::new(), Vec::new()];
        for set in sets.iter_mut() {
            let n = r.u32()? as usize;
            for i in 0..n {
                set.push(r.string(i)?);
            }
        }
        let vocab = Vocabulary::from_tokens(tokens, &sets[0], &sets[1]).map_err(|e| PersistError::Vocab(alloc::format!("{e}")))?;
        let remaining = bytes.len() - r.at;
        if !remaining.is_multiple_of(8) {
            return Err(PersistError::Truncated(bytes.len()));
        }
        let params: Vec<f64> = bytes[r.at..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let config = ToyConfig { head, d, features, hidden, beta, num_classes, train_embeddings, squared_features, ..ToyConfig::default() };
        ToyModel::from_parts(vocab, config, params).ok_or(PersistError::Shape)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or(PersistError::Truncated(self.at))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, i: usize) -> Result<String, PersistError> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| PersistError::Utf8(i))
    }
}
