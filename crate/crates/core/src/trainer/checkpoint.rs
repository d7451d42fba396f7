//! Binary training snapshots.
//!
//! Layout: magic `HSCK1`, then C, V, M and the iteration count as 64-bit
//! little-endian integers, then D row-major and A column-major as 64-bit
//! little-endian floats.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{CodeMatrix, Dictionary};

const MAGIC: &[u8; 5] = b"HSCK1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub iteration: u64,
    pub dictionary: Dictionary,
    pub codes: CodeMatrix,
}

pub fn write_checkpoint(path: &Path, snapshot: &Checkpoint) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    let c = snapshot.dictionary.num_contexts() as u64;
    let v = snapshot.codes.num_words() as u64;
    let m = snapshot.dictionary.num_dims() as u64;
    for value in [c, v, m, snapshot.iteration] {
        w.write_all(&value.to_le_bytes()).map_err(io)?;
    }
    for x in snapshot.dictionary.as_slice() {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    for x in snapshot.codes.as_slice() {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let io = |e| Error::io(path, e);

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::parse(path, 0, "not a checkpoint file (bad magic)"));
    }
    let mut read_u64 = |r: &mut BufReader<std::fs::File>| -> Result<u64> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        Ok(u64::from_le_bytes(buf))
    };
    let contexts = read_u64(&mut r)? as usize;
    let words = read_u64(&mut r)? as usize;
    let dims = read_u64(&mut r)? as usize;
    let iteration = read_u64(&mut r)?;

    let mut read_matrix = |r: &mut BufReader<std::fs::File>, len: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect())
    };
    let d_data = read_matrix(&mut r, contexts * dims)?;
    let a_data = read_matrix(&mut r, dims * words)?;

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io)? != 0 {
        return Err(Error::parse(path, 0, "trailing bytes after checkpoint payload"));
    }

    Ok(Checkpoint {
        iteration,
        dictionary: Dictionary::new(contexts, dims, d_data),
        codes: CodeMatrix::new(dims, words, a_data),
    })
}
