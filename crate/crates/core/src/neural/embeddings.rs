//! Pretrained word vectors in the text format
//! `vocab_count dim` followed by one `word v1 ... v_dim` line per word.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use super::NeuralError;
use crate::fingerprint::Fingerprinter;

/// Dimension of the pretrained vectors the classifier is built for.
pub const EMBEDDING_DIM: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f32>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions<'a> {
    /// Required dimension; `None` means [`EMBEDDING_DIM`].
    pub dim: Option<usize>,
    /// Keep only these words (the rest are validated and skipped).
    pub keep: Option<&'a HashSet<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadStats {
    pub lines: usize,
    pub kept: usize,
    /// Words seen more than once; the last occurrence wins.
    pub duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            index: HashMap::new(),
            words: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Inserts or replaces a vector. Returns true when the word was present.
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> bool {
        assert_eq!(vector.len(), self.dim, "vector length must equal table dim");
        match self.index.get(word) {
            Some(&row) => {
                self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
                true
            }
            None => {
                self.index.insert(word.to_string(), self.words.len());
                self.words.push(word.to_string());
                self.data.extend_from_slice(vector);
                false
            }
        }
    }

    /// The stored vector, or `None` for out-of-vocabulary words.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// Writes the vector for `word` into `out`; unknown words give zeros.
    pub fn lookup_into(&self, word: &str, out: &mut [f64]) {
        match self.get(word) {
            Some(v) => out.iter_mut().zip(v).for_each(|(o, x)| *o = f64::from(*x)),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    pub fn lookup(&self, word: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.lookup_into(word, &mut v);
        v
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new("sugmine-embeddings v1");
        fp.field("dim", &self.dim.to_string());
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| self.words[a].cmp(&self.words[b]));
        for row in order {
            let bytes: Vec<u8> = self.data[row * self.dim..(row + 1) * self.dim]
                .iter()
                .flat_map(|x| x.to_le_bytes())
                .collect();
            fp.bytes(&self.words[row], &bytes);
        }
        fp.finish()
    }
}

impl EmbeddingTable {
    /// Text form readable by [`read_embeddings`], words in lexicographic
    /// order.
    pub fn to_text(&self) -> String {
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| self.words[a].cmp(&self.words[b]));
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for row in order {
            out.push_str(&self.words[row]);
            for x in &self.data[row * self.dim..(row + 1) * self.dim] {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Copy holding only the given words that are present.
    pub fn subset<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(self.dim);
        for w in words {
            if let Some(v) = self.get(w) {
                t.insert(w, v);
            }
        }
        t
    }
}

pub fn load_embeddings(
    path: &Path,
    opts: &LoadOptions<'_>,
) -> Result<(EmbeddingTable, LoadStats), NeuralError> {
    let file = std::fs::File::open(path).map_err(|source| NeuralError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_embeddings(std::io::BufReader::new(file), opts)
}

pub fn read_embeddings<R: BufRead>(
    reader: R,
    opts: &LoadOptions<'_>,
) -> Result<(EmbeddingTable, LoadStats), NeuralError> {
    let want_dim = opts.dim.unwrap_or(EMBEDDING_DIM);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| NeuralError::Read { line: 1, source: e })?,
        None => return Err(NeuralError::MalformedHeader("empty file".into())),
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match parts.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) => (c, d),
            _ => return Err(NeuralError::MalformedHeader(header.clone())),
        },
        _ => return Err(NeuralError::MalformedHeader(header.clone())),
    };
    if dim != want_dim {
        return Err(NeuralError::WrongDimension {
            expected: want_dim,
            found: dim,
        });
    }
    let mut table = EmbeddingTable::new(dim);
    let mut stats = LoadStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut vec = vec![0.0f32; dim];
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| NeuralError::Read {
            line: line_no,
            source: e,
        })?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if stats.lines == count {
            return Err(NeuralError::ExtraLine {
                line: line_no,
                count,
            });
        }
        stats.lines += 1;
        let mut fields = line.split(' ');
        let word = fields.next().unwrap_or_default();
        let mut n = 0;
        for f in fields {
            if n == dim {
                n += 1;
                break;
            }
            let v: f32 = f.parse().map_err(|_| NeuralError::BadValue {
                line: line_no,
                value: f.to_string(),
            })?;
            if !v.is_finite() {
                return Err(NeuralError::NonFinite { line: line_no });
            }
            vec[n] = v;
            n += 1;
        }
        if n != dim {
            return Err(NeuralError::ComponentCount {
                line: line_no,
                expected: dim,
                found: line.split(' ').count() - 1,
            });
        }
        if !seen.insert(word.to_string()) {
            stats.duplicates += 1;
        }
        if opts.keep.is_none_or(|k| k.contains(word)) {
            table.insert(word, &vec);
        }
    }
    if stats.lines < count {
        return Err(NeuralError::MissingLines {
            line: stats.lines + 2,
            count,
            found: stats.lines,
        });
    }
    stats.kept = table.len();
    Ok((table, stats))
}
