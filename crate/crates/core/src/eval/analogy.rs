use std::path::Path;

use crate::error::{Error, Result};

use super::{cosine, EmbeddingSet};

/// One analogy question `a : b :: c : d` with the section header it was
/// read under.
#[derive(Debug, Clone)]
pub struct AnalogyItem {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub section: String,
}

/// Analogy questions grouped by section. Sections whose name starts with
/// `gram` are the syntactic part; all others are semantic.
#[derive(Debug, Clone)]
pub struct AnalogyDataset {
    pub items: Vec<AnalogyItem>,
}

impl AnalogyDataset {
    pub fn new(items: Vec<AnalogyItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::validation("analogy dataset is empty"));
        }
        Ok(AnalogyDataset { items })
    }

    /// Reads 4-word lines; `: section-name` headers switch the current
    /// section and are otherwise ignored.
    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut items = Vec::new();
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                section = name.trim().to_string();
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            let [a, b, c, d] = words[..] else {
                return Err(Error::parse(path, lineno + 1, "expected 4 words"));
            };
            items.push(AnalogyItem {
                a: a.to_string(),
                b: b.to_string(),
                c: c.to_string(),
                d: d.to_string(),
                section: section.clone(),
            });
        }
        AnalogyDataset::new(items)
    }

    fn is_syntactic(section: &str) -> bool {
        section.starts_with("gram")
    }

    pub fn syntactic(&self) -> Vec<&AnalogyItem> {
        self.items
            .iter()
            .filter(|i| Self::is_syntactic(&i.section))
            .collect()
    }

    pub fn semantic(&self) -> Vec<&AnalogyItem> {
        self.items
            .iter()
            .filter(|i| !Self::is_syntactic(&i.section))
            .collect()
    }
}

/// Vector-offset prediction for `a : b :: c : ?`: the word nearest to
/// `b - a + c` by cosine. Query words are excluded from the candidates
/// unless `include_query_words` is set; ties go to the lower word id.
pub fn solve_analogy(
    emb: &EmbeddingSet,
    a: &str,
    b: &str,
    c: &str,
    include_query_words: bool,
) -> Result<u32> {
    let (Some(ia), Some(ib), Some(ic)) = (emb.lookup_id(a), emb.lookup_id(b), emb.lookup_id(c))
    else {
        return Err(Error::validation(format!(
            "analogy query has out-of-vocabulary word(s): {a:?} {b:?} {c:?}"
        )));
    };
    let dims = emb.dims();
    let mut target = vec![0.0; dims];
    let (va, vb, vc) = (emb.vector(ia), emb.vector(ib), emb.vector(ic));
    for i in 0..dims {
        target[i] = vb[i] - va[i] + vc[i];
    }

    let mut best: Option<(u32, f64)> = None;
    for v in 0..emb.len() as u32 {
        if !include_query_words && (v == ia || v == ib || v == ic) {
            continue;
        }
        let sim = cosine(&target, emb.vector(v));
        if best.map_or(true, |(_, s)| sim > s) {
            best = Some((v, sim));
        }
    }
    best.map(|(v, _)| v)
        .ok_or_else(|| Error::validation("no candidate words available"))
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct AnalogyResult {
    pub accuracy: f64,
    pub evaluated: usize,
    pub total: usize,
}

/// Accuracy over the evaluable questions; questions with any
/// out-of-vocabulary word are excluded from the denominator and appear
/// only in the counts.
pub fn eval_analogies<'a, I>(
    emb: &EmbeddingSet,
    items: I,
    include_query_words: bool,
) -> Result<AnalogyResult>
where
    I: IntoIterator<Item = &'a AnalogyItem>,
{
    let mut total = 0usize;
    let mut evaluated = 0usize;
    let mut correct = 0usize;
    for item in items {
        total += 1;
        let Some(expected) = emb.lookup_id(&item.d) else {
            continue;
        };
        let Ok(predicted) = solve_analogy(emb, &item.a, &item.b, &item.c, include_query_words)
        else {
            continue;
        };
        evaluated += 1;
        if predicted == expected {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::validation(format!(
            "no evaluable analogy questions (0 of {total})"
        )));
    }
    Ok(AnalogyResult {
        accuracy: correct as f64 / evaluated as f64,
        evaluated,
        total,
    })
}
