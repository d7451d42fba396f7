use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved surface form absorbing tokens rarer than `min_count`.
pub const RARE_TOKEN: &str = "#rare#";
/// Reserved surface form absorbing numeric tokens.
pub const NUMBER_TOKEN: &str = "#number#";

/// Token normalization applied identically at corpus ingestion and at
/// benchmark lookup time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenNormalizer {
    pub lowercase: bool,
}

impl Default for TokenNormalizer {
    fn default() -> Self {
        TokenNormalizer { lowercase: true }
    }
}

impl TokenNormalizer {
    /// Normalizes a raw token and collapses numbers onto [`NUMBER_TOKEN`].
    pub fn normalize(&self, raw: &str) -> String {
        let tok = if self.lowercase {
            raw.to_lowercase()
        } else {
            raw.to_string()
        };
        if is_number_token(&tok) {
            NUMBER_TOKEN.to_string()
        } else {
            tok
        }
    }
}

/// A token is numeric when, after stripping one optional leading sign and
/// any ',' or '.', only digits remain and there is at least one digit.
pub fn is_number_token(tok: &str) -> bool {
    let body = tok.strip_prefix(['+', '-']).unwrap_or(tok);
    let mut digits = 0usize;
    for c in body.chars() {
        if c.is_ascii_digit() {
            digits += 1;
        } else if c != ',' && c != '.' {
            return false;
        }
    }
    digits > 0
}

/// Bidirectional token <-> id map with per-token counts.
///
/// Ids are assigned by descending count with lexicographic tie-breaking,
/// so id 0 is the most frequent token. The reserved rare and number
/// tokens are always present.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    counts: Vec<u64>,
    normalizer: TokenNormalizer,
    rare_id: u32,
    number_id: u32,
}

impl Vocabulary {
    fn from_counts(mut counts: Vec<(String, u64)>, normalizer: TokenNormalizer) -> Self {
        counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens: Vec<String> = counts.iter().map(|(t, _)| t.clone()).collect();
        let ids: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let rare_id = ids[RARE_TOKEN];
        let number_id = ids[NUMBER_TOKEN];
        Vocabulary {
            counts: counts.into_iter().map(|(_, c)| c).collect(),
            tokens,
            ids,
            normalizer,
            rare_id,
            number_id,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn normalizer(&self) -> TokenNormalizer {
        self.normalizer
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn rare_id(&self) -> u32 {
        self.rare_id
    }

    pub fn number_id(&self) -> u32 {
        self.number_id
    }

    /// Id of an exact (already normalized) vocabulary entry.
    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Resolves a raw corpus token to an id, falling back to the rare
    /// token for anything absent from the vocabulary.
    pub fn resolve(&self, raw: &str) -> u32 {
        let tok = self.normalizer.normalize(raw);
        self.ids.get(&tok).copied().unwrap_or(self.rare_id)
    }

    /// Lookup for benchmark words: same normalization as ingestion, but
    /// absent words report `None` instead of collapsing onto the rare id.
    pub fn lookup(&self, raw: &str) -> Option<u32> {
        let tok = self.normalizer.normalize(raw);
        self.ids.get(&tok).copied()
    }

    /// Writes `token<TAB>count` lines ordered by id.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for (tok, count) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{tok}\t{count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno + 1, "expected token<TAB>count"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad count {count:?}")))?;
            tokens.push(tok.to_string());
            counts.push(count);
        }
        if tokens.is_empty() {
            return Err(Error::parse(path, 0, "empty vocabulary file"));
        }
        let ids: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if ids.len() != tokens.len() {
            return Err(Error::parse(path, 0, "duplicate token in vocabulary file"));
        }
        let rare_id = *ids
            .get(RARE_TOKEN)
            .ok_or_else(|| Error::parse(path, 0, "missing reserved rare token"))?;
        let number_id = *ids
            .get(NUMBER_TOKEN)
            .ok_or_else(|| Error::parse(path, 0, "missing reserved number token"))?;
        // The file format carries no flags; a vocabulary built with
        // lowercasing contains no uppercase entries, so infer the setting.
        let lowercase = !tokens
            .iter()
            .any(|t| t.chars().any(|c| c.is_uppercase()));
        Ok(Vocabulary {
            tokens,
            ids,
            counts,
            normalizer: TokenNormalizer { lowercase },
            rare_id,
            number_id,
        })
    }
}

/// Builds the vocabulary from sentences (one per item). Tokens occurring
/// fewer than `min_count` times are dropped and their occurrences counted
/// under the rare token; numeric tokens count under the number token.
pub fn build_vocabulary<I, S>(
    sentences: I,
    min_count: u64,
    normalizer: TokenNormalizer,
) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut raw_counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for sentence in sentences {
        for raw in sentence.as_ref().split_whitespace() {
            *raw_counts.entry(normalizer.normalize(raw)).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }

    let mut rare_total = raw_counts.remove(RARE_TOKEN).unwrap_or(0);
    let number_total = raw_counts.remove(NUMBER_TOKEN).unwrap_or(0);
    let mut kept: Vec<(String, u64)> = Vec::with_capacity(raw_counts.len() + 2);
    for (tok, count) in raw_counts {
        if count < min_count {
            rare_total += count;
        } else {
            kept.push((tok, count));
        }
    }
    kept.push((RARE_TOKEN.to_string(), rare_total));
    kept.push((NUMBER_TOKEN.to_string(), number_total));
    Ok(Vocabulary::from_counts(kept, normalizer))
}

/// Builds the vocabulary from a corpus file (one sentence per line).
pub fn build_vocabulary_from_file(
    path: &Path,
    min_count: u64,
    normalizer: TokenNormalizer,
) -> Result<Vocabulary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    build_vocabulary(text.lines(), min_count, normalizer)
}
