//! Binary index file: `magic, version, dim, count, doc id, rows`.
//!
//! All integers little-endian. A row is `start: u64, end: u64` followed by
//! `dim` `f32` components. Chunk text is not stored; it is re-sliced from the
//! document on load.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{EvidenceChunk, Index};
use crate::graph::{Document, MentionSpan};

const MAGIC: &[u8; 8] = b"RGEVIDX\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an index file")]
    BadMagic,
    #[error("unsupported index version {0}")]
    Version(u32),
    #[error("index belongs to document {found:?}, not {expected:?}")]
    WrongDocument { expected: String, found: String },
    #[error("row {0} has a span outside the document")]
    BadSpan(usize),
}

pub fn write_index(idx: &Index, mut w: impl Write) -> Result<(), SidecarError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(idx.dim as u32).to_le_bytes())?;
    w.write_all(&(idx.chunks.len() as u64).to_le_bytes())?;
    w.write_all(&(idx.doc.len() as u32).to_le_bytes())?;
    w.write_all(idx.doc.as_bytes())?;
    for c in &idx.chunks {
        w.write_all(&(c.span.start as u64).to_le_bytes())?;
        w.write_all(&(c.span.end as u64).to_le_bytes())?;
        for x in &c.vector {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    read_array(r).map(u32::from_le_bytes)
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    read_array(r).map(u64::from_le_bytes)
}

pub fn read_index(mut r: impl Read, doc: &Document) -> Result<Index, SidecarError> {
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(SidecarError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(SidecarError::Version(version));
    }
    let dim = read_u32(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let id_len = read_u32(&mut r)? as usize;
    let mut id = vec![0u8; id_len];
    r.read_exact(&mut id)?;
    let found = String::from_utf8_lossy(&id).into_owned();
    if found != doc.id {
        return Err(SidecarError::WrongDocument {
            expected: doc.id.clone(),
            found,
        });
    }
    let chars: Vec<char> = doc.text.chars().collect();
    let mut chunks = Vec::with_capacity(count.min(1 << 20));
    for row in 0..count {
        let start = read_u64(&mut r)? as usize;
        let end = read_u64(&mut r)? as usize;
        if start >= end || end > chars.len() {
            return Err(SidecarError::BadSpan(row));
        }
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            vector.push(f32::from_le_bytes(read_array(&mut r)?));
        }
        chunks.push(EvidenceChunk {
            doc: doc.id.clone(),
            span: MentionSpan { start, end },
            text: chars[start..end].iter().collect(),
            vector,
        });
    }
    Ok(Index {
        doc: found,
        dim,
        chunks,
    })
}
