// SPDX-License-Identifier: Apache-2.0

//! Binary embedding store.
//!
//! Layout (little-endian):
//!
//! ```text
//! "QDEM" | u32 version=1 | u32 count
//! per record: u32 id_len | id (UTF-8) | u32 rows | u32 dim | u8 pooled | rows*dim f32
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::DataError;

pub const EMBED_MAGIC: [u8; 4] = *b"QDEM";
pub const EMBED_VERSION: u32 = 1;

/// Frozen code-model hidden states for one design: token rows or a single
/// pre-pooled row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub design_id: String,
    pub rows: usize,
    pub dim: usize,
    /// `rows x dim`, row-major.
    pub data: Vec<f32>,
    pub pooled: bool,
}

impl EmbeddingRecord {
    pub fn new(
        design_id: impl Into<String>,
        rows: usize,
        dim: usize,
        data: Vec<f32>,
        pooled: bool,
    ) -> Result<Self, DataError> {
        let r = Self {
            design_id: design_id.into(),
            rows,
            dim,
            data,
            pooled,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn pooled(design_id: impl Into<String>, data: Vec<f32>) -> Result<Self, DataError> {
        let dim = data.len();
        Self::new(design_id, 1, dim, data, true)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |message: String| DataError::Domain {
            id: self.design_id.clone(),
            message,
        };
        if self.rows == 0 || self.dim == 0 {
            return Err(bad(format!("empty embedding {}x{}", self.rows, self.dim)));
        }
        if self.pooled && self.rows != 1 {
            return Err(bad(format!("pooled record has {} rows", self.rows)));
        }
        if self.data.len() != self.rows * self.dim {
            return Err(bad(format!(
                "{} values for {}x{}",
                self.data.len(),
                self.rows,
                self.dim
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite(format!("embedding {:?}", self.design_id)));
        }
        Ok(())
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.buf.len() - self.pos < n {
            return Err(DataError::Truncated(format!(
                "{what}: need {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u8(&mut self, what: &str) -> Result<u8, DataError> {
        Ok(self.take(1, what)?[0])
    }
}

/// Decodes a QDEM buffer into records keyed by design id.
pub fn read_embeddings(bytes: &[u8]) -> Result<BTreeMap<String, EmbeddingRecord>, DataError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = c.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != EMBED_MAGIC {
        return Err(DataError::Magic {
            expected: EMBED_MAGIC,
            found: magic,
        });
    }
    let version = c.u32("version")?;
    if version != EMBED_VERSION {
        return Err(DataError::Version(version));
    }
    let count = c.u32("record count")?;
    let mut out = BTreeMap::new();
    for i in 0..count {
        let id_len = c.u32("id length")? as usize;
        let id = std::str::from_utf8(c.take(id_len, "id")?)
            .map_err(|e| DataError::Invalid(format!("record {i}: id is not UTF-8: {e}")))?
            .to_string();
        let rows = c.u32("rows")? as usize;
        let dim = c.u32("dim")? as usize;
        let pooled = match c.u8("pooled flag")? {
            0 => false,
            1 => true,
            other => {
                return Err(DataError::Invalid(format!(
                    "record {id:?}: pooled flag {other}"
                )))
            }
        };
        let n = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| DataError::Truncated(format!("record {id:?}: size overflow")))?;
        let payload = c.take(n, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let rec = EmbeddingRecord::new(id.clone(), rows, dim, data, pooled)?;
        if out.insert(id.clone(), rec).is_some() {
            return Err(DataError::DuplicateKey(id));
        }
    }
    if c.pos != bytes.len() {
        return Err(DataError::TrailingBytes(bytes.len() - c.pos));
    }
    Ok(out)
}

pub fn load_embeddings(path: &Path) -> Result<BTreeMap<String, EmbeddingRecord>, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    read_embeddings(&bytes)
}

/// Encodes records in iteration order.
pub fn write_embeddings<'a, I>(records: I) -> Vec<u8>
where
    I: IntoIterator<Item = &'a EmbeddingRecord>,
    I::IntoIter: ExactSizeIterator,
{
    let records = records.into_iter();
    let mut out = Vec::new();
    out.extend_from_slice(&EMBED_MAGIC);
    out.extend_from_slice(&EMBED_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.design_id.len() as u32).to_le_bytes());
        out.extend_from_slice(r.design_id.as_bytes());
        out.extend_from_slice(&(r.rows as u32).to_le_bytes());
        out.extend_from_slice(&(r.dim as u32).to_le_bytes());
        out.push(u8::from(r.pooled));
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_embeddings<'a, I>(path: &Path, records: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = &'a EmbeddingRecord>,
    I::IntoIter: ExactSizeIterator,
{
    fs::write(path, write_embeddings(records)).map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Hand-assembled file: one record "ab", 3 rows x 4 dims, values 0.5*k.
    fn fixture() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"QDEM");
        b.extend_from_slice(&[1, 0, 0, 0]);
        b.extend_from_slice(&[1, 0, 0, 0]);
        b.extend_from_slice(&[2, 0, 0, 0]);
        b.extend_from_slice(b"ab");
        b.extend_from_slice(&[3, 0, 0, 0]);
        b.extend_from_slice(&[4, 0, 0, 0]);
        b.push(0);
        for k in 0..12u8 {
            b.extend_from_slice(&(0.5f32 * k as f32).to_le_bytes());
        }
        b
    }

    #[test]
    fn hand_built_fixture_decodes_exactly() {
        let recs = read_embeddings(&fixture()).unwrap();
        let r = &recs["ab"];
        assert_eq!((r.rows, r.dim, r.pooled), (3, 4, false));
        assert_eq!(r.row(2), &[4.0, 4.5, 5.0, 5.5]);
        assert_eq!(write_embeddings(recs.values()), fixture());
    }

    #[test]
    fn pooled_record_keeps_flag() {
        let r = EmbeddingRecord::pooled("p", vec![1.0, 2.0]).unwrap();
        let back = read_embeddings(&write_embeddings([&r])).unwrap();
        assert!(back["p"].pooled);
        assert_eq!(back["p"].rows, 1);
        assert!(EmbeddingRecord::new("q", 2, 1, vec![1.0, 2.0], true).is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let r = EmbeddingRecord::pooled("x", vec![1.0]).unwrap();
        let bytes = write_embeddings([&r, &r]);
        assert!(matches!(read_embeddings(&bytes), Err(DataError::DuplicateKey(id)) if id == "x"));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let mut bad_magic = fixture();
        bad_magic[0] = b'X';
        assert!(matches!(read_embeddings(&bad_magic), Err(DataError::Magic { .. })));

        let mut truncated = fixture();
        truncated.truncate(truncated.len() - 3);
        assert!(matches!(read_embeddings(&truncated), Err(DataError::Truncated(_))));

        let mut nan = fixture();
        let at = nan.len() - 4;
        nan[at..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_embeddings(&nan), Err(DataError::NonFinite(_))));

        let mut inf = fixture();
        let at = inf.len() - 4;
        inf[at..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(read_embeddings(&inf), Err(DataError::NonFinite(_))));

        let mut trailing = fixture();
        trailing.push(0);
        assert!(matches!(read_embeddings(&trailing), Err(DataError::TrailingBytes(1))));
    }

    fn arb_record() -> impl Strategy<Value = EmbeddingRecord> {
        ("[a-z0-9]{1,6}", 1usize..5, 1usize..6, any::<bool>()).prop_flat_map(
            |(id, rows, dim, pooled)| {
                let rows = if pooled { 1 } else { rows };
                prop::collection::vec(-1e6f32..1e6, rows * dim).prop_map(move |data| {
                    EmbeddingRecord::new(id.clone(), rows, dim, data, pooled).unwrap()
                })
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip(recs in prop::collection::vec(arb_record(), 0..5)) {
            let map: BTreeMap<_, _> = recs.into_iter().map(|r| (r.design_id.clone(), r)).collect();
            let back = read_embeddings(&write_embeddings(map.values())).unwrap();
            prop_assert_eq!(back, map);
        }
    }
}
