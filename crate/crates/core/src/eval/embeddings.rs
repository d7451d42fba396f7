use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::{TokenNormalizer, Vocabulary};
use crate::error::{Error, Result};
use crate::trainer::CodeMatrix;

/// On-disk vector formats: a text header `V M` followed either by
/// `word v1 ... vM` lines (6 significant digits) or by `word ` plus M
/// little-endian 32-bit floats per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Text,
    Binary,
}

impl std::str::FromStr for VectorFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(VectorFormat::Text),
            "binary" => Ok(VectorFormat::Binary),
            other => Err(Error::validation(format!("unknown format {other:?}"))),
        }
    }
}

/// A set of word vectors with token lookup.
///
/// Row `v` of the matrix is the representation of word `v`. Lookups
/// normalize the query exactly as corpus ingestion does, but an absent
/// word is reported as missing rather than falling back to the rare
/// token.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    words: Vec<String>,
    ids: HashMap<String, u32>,
    matrix: Vec<f64>,
    dims: usize,
    normalizer: TokenNormalizer,
}

impl EmbeddingSet {
    pub fn new(words: Vec<String>, matrix: Vec<f64>, dims: usize) -> Result<Self> {
        if words.is_empty() || dims == 0 {
            return Err(Error::validation("embedding set must be nonempty"));
        }
        if matrix.len() != words.len() * dims {
            return Err(Error::validation(format!(
                "matrix size {} does not match {} words x {} dims",
                matrix.len(),
                words.len(),
                dims
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("embedding vectors must be finite"));
        }
        let ids: HashMap<String, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        if ids.len() != words.len() {
            return Err(Error::validation("duplicate word in embedding set"));
        }
        let lowercase = !words.iter().any(|t| t.chars().any(|c| c.is_uppercase()));
        Ok(EmbeddingSet {
            words,
            ids,
            matrix,
            dims,
            normalizer: TokenNormalizer { lowercase },
        })
    }

    /// Builds the embedding set from trained codes: word `v`'s vector is
    /// column `a_v`.
    pub fn from_codes(vocab: &Vocabulary, codes: &CodeMatrix) -> Result<Self> {
        if vocab.len() != codes.num_words() {
            return Err(Error::validation(format!(
                "vocabulary size {} does not match code matrix width {}",
                vocab.len(),
                codes.num_words()
            )));
        }
        let dims = codes.num_dims();
        let mut matrix = Vec::with_capacity(vocab.len() * dims);
        for v in 0..vocab.len() {
            matrix.extend_from_slice(codes.column(v));
        }
        let words: Vec<String> = (0..vocab.len() as u32)
            .map(|i| vocab.token(i).to_string())
            .collect();
        let mut set = EmbeddingSet::new(words, matrix, dims)?;
        set.normalizer = vocab.normalizer();
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        let i = id as usize;
        &self.matrix[i * self.dims..(i + 1) * self.dims]
    }

    /// Id of a benchmark word after normalization; `None` when absent.
    pub fn lookup_id(&self, raw: &str) -> Option<u32> {
        let tok = self.normalizer.normalize(raw);
        self.ids.get(&tok).copied()
    }

    pub fn lookup(&self, raw: &str) -> Option<&[f64]> {
        self.lookup_id(raw).map(|id| self.vector(id))
    }

    pub fn write(&self, path: &Path, format: VectorFormat) -> Result<()> {
        match format {
            VectorFormat::Text => self.write_text(path),
            VectorFormat::Binary => self.write_binary(path),
        }
    }

    pub fn read(path: &Path, format: VectorFormat) -> Result<Self> {
        match format {
            VectorFormat::Text => Self::read_text(path),
            VectorFormat::Binary => Self::read_binary(path),
        }
    }

    fn write_text(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dims).map_err(io)?;
        for (v, word) in self.words.iter().enumerate() {
            write!(w, "{word}").map_err(io)?;
            for x in self.vector(v as u32) {
                write!(w, " {x:.5e}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let (count, dims) = parse_header(header)
            .ok_or_else(|| Error::parse(path, 1, "bad header, expected: V M"))?;
        let mut words = Vec::with_capacity(count);
        let mut matrix = Vec::with_capacity(count * dims);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let word = it
                .next()
                .ok_or_else(|| Error::parse(path, lineno + 1, "empty row"))?;
            words.push(word.to_string());
            let before = matrix.len();
            for tok in it {
                let x: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(path, lineno + 1, format!("bad value {tok:?}")))?;
                matrix.push(x);
            }
            if matrix.len() - before != dims {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected {dims} values, found {}", matrix.len() - before),
                ));
            }
        }
        if words.len() != count {
            return Err(Error::parse(
                path,
                0,
                format!("header claims {count} words, found {}", words.len()),
            ));
        }
        EmbeddingSet::new(words, matrix, dims)
    }

    fn write_binary(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dims).map_err(io)?;
        for (v, word) in self.words.iter().enumerate() {
            write!(w, "{word} ").map_err(io)?;
            for x in self.vector(v as u32) {
                w.write_all(&(*x as f32).to_le_bytes()).map_err(io)?;
            }
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    fn read_binary(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let io = |e| Error::io(path, e);
        let mut header = String::new();
        r.read_line(&mut header).map_err(io)?;
        let (count, dims) = parse_header(header.trim_end())
            .ok_or_else(|| Error::parse(path, 1, "bad header, expected: V M"))?;
        let mut words = Vec::with_capacity(count);
        let mut matrix = Vec::with_capacity(count * dims);
        for row in 0..count {
            let mut word_bytes = Vec::new();
            let n = r
                .read_until(b' ', &mut word_bytes)
                .map_err(io)?;
            if n == 0 {
                return Err(Error::parse(path, row + 2, "unexpected end of file"));
            }
            word_bytes.pop();
            let word = String::from_utf8(word_bytes)
                .map_err(|_| Error::parse(path, row + 2, "word is not valid UTF-8"))?;
            let mut buf = vec![0u8; dims * 4 + 1];
            r.read_exact(&mut buf).map_err(io)?;
            if buf.pop() != Some(b'\n') {
                return Err(Error::parse(path, row + 2, "missing row terminator"));
            }
            for chunk in buf.chunks_exact(4) {
                matrix.push(f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")) as f64);
            }
            words.push(word);
        }
        EmbeddingSet::new(words, matrix, dims)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dims = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((count, dims))
}
