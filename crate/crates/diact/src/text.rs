//! Word-level tokenization, vocabulary construction, and embedding tables.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::corpus::Corpus;
use crate::neural::{RandomSource, Tensor};

/// Reserved vocabulary indices.
pub const PAD: usize = 0;
pub const UNK: usize = 1;

/// Half-width of the uniform init interval for embedding rows.
pub const EMBED_INIT: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed word-vector header: {0:?}")]
    MalformedHeader(String),
    #[error("word-vector file has dimension {file}, configuration expects {expected}")]
    DimensionMismatch { file: usize, expected: usize },
    #[error("unreadable word-vector line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("segment tokenized to an empty sequence: {0:?}")]
    EmptyTokens(String),
}

/// Lowercased, Unicode-aware word tokens. Characters in the punctuation and
/// symbol general categories are stripped; the survivors are split on
/// whitespace. Accented letters pass through untouched.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| {
            let group = c.general_category_group();
            if matches!(
                group,
                GeneralCategoryGroup::Punctuation | GeneralCategoryGroup::Symbol
            ) {
                ' '
            } else {
                c
            }
        })
        .collect();
    cleaned
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect()
}

/// Token inventory with reserved PAD and UNK entries. Content tokens are
/// ordered by descending corpus frequency, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(content_tokens: Vec<String>) -> Vocabulary {
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(content_tokens);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    /// Serialization order: PAD, UNK, then content tokens.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Builds the vocabulary of all tokens occurring at least `min_count` times.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocabulary {
    let mut freq: HashMap<String, usize> = HashMap::new();
    for seg in corpus.segments() {
        for tok in tokenize(&seg.text) {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|(_, count)| *count >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t).collect())
}

/// A tokenized segment paired with its vocabulary indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedSegment {
    pub tokens: Vec<String>,
    pub indices: Vec<usize>,
}

/// Tokenizes and indexes a text, truncating from the right at `max_len`.
/// No padding is stored; padding is a batching concern inside the models.
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<TokenizedSegment, TextError> {
    let mut tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(TextError::EmptyTokens(text.to_string()));
    }
    tokens.truncate(max_len);
    let indices = tokens.iter().map(|t| vocab.lookup(t)).collect();
    Ok(TokenizedSegment { tokens, indices })
}

/// A `vocab size x dimension` matrix of word vectors. The PAD row is all
/// zeros and is never updated during training.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub matrix: Tensor,
    pub trainable: bool,
}

fn random_row(rng: &mut RandomSource, row: &mut [f64]) {
    for v in row {
        *v = rng.uniform_in(-EMBED_INIT, EMBED_INIT);
    }
}

/// Seeded uniform(-0.05, 0.05) table with a zero PAD row.
pub fn random_embeddings(vocab: &Vocabulary, dimension: usize, seed: u64) -> EmbeddingTable {
    assert!(dimension >= 1);
    let mut rng = RandomSource::new(seed).derive(0x656d_6264); // "embd"
    let mut matrix = Tensor::zeros(&[vocab.size(), dimension]);
    for i in 1..vocab.size() {
        random_row(&mut rng, matrix.row_mut(i));
    }
    EmbeddingTable {
        dimension,
        matrix,
        trainable: true,
    }
}

/// Loads vectors in the standard textual word-vector format: a header line
/// `count dim` followed by `token v1 .. vdim` lines. Rows for in-vocabulary
/// tokens are copied from the file; in-vocabulary tokens missing from the
/// file fall back to the seeded random scheme; tokens in the file but not in
/// the vocabulary are ignored; PAD stays zero.
pub fn load_pretrained_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dimension: usize,
    seed: u64,
) -> Result<EmbeddingTable, TextError> {
    let content = fs::read_to_string(path).map_err(|source| TextError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pretrained_embeddings(&content, vocab, dimension, seed)
}

pub fn parse_pretrained_embeddings(
    content: &str,
    vocab: &Vocabulary,
    dimension: usize,
    seed: u64,
) -> Result<EmbeddingTable, TextError> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| TextError::MalformedHeader(String::new()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(TextError::MalformedHeader(header.to_string()));
    }
    let _count: usize = parts[0]
        .parse()
        .map_err(|_| TextError::MalformedHeader(header.to_string()))?;
    let file_dim: usize = parts[1]
        .parse()
        .map_err(|_| TextError::MalformedHeader(header.to_string()))?;
    if file_dim != dimension {
        return Err(TextError::DimensionMismatch {
            file: file_dim,
            expected: dimension,
        });
    }

    let mut table = random_embeddings(vocab, dimension, seed);
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or(TextError::BadLine {
            line: line_no + 1,
            message: "missing token".into(),
        })?;
        let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| TextError::BadLine {
            line: line_no + 1,
            message: e.to_string(),
        })?;
        if values.len() != dimension {
            return Err(TextError::BadLine {
                line: line_no + 1,
                message: format!("expected {} values, found {}", dimension, values.len()),
            });
        }
        if vocab.contains(token) {
            let row = vocab.lookup(token);
            if row != PAD && row != UNK {
                table.matrix.row_mut(row).copy_from_slice(&values);
            }
        }
    }
    table.matrix.row_mut(PAD).iter_mut().for_each(|v| *v = 0.0);
    Ok(table)
}
