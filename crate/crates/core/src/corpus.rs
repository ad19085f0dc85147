//! Token corpora: newline-delimited id sequences or raw text read through a
//! byte-level tokenizer (token id = byte value).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DamError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Token ids if every non-blank line parses as ids, bytes otherwise.
    #[default]
    Auto,
    Ids,
    Bytes,
}

impl FromStr for CorpusFormat {
    type Err = DamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(CorpusFormat::Auto),
            "ids" => Ok(CorpusFormat::Ids),
            "bytes" => Ok(CorpusFormat::Bytes),
            other => Err(DamError::Config(format!("unknown corpus format '{other}' (auto, ids, bytes)"))),
        }
    }
}

fn parse_ids(line: &str) -> Option<Vec<u32>> {
    line.split_whitespace().map(|t| t.parse().ok()).collect()
}

/// One sequence per non-blank line.
pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<Vec<Vec<u32>>> {
    let lines = text.lines().filter(|l| !l.trim().is_empty());
    let bytes = |l: &str| l.bytes().map(u32::from).collect::<Vec<u32>>();
    match format {
        CorpusFormat::Bytes => Ok(lines.map(bytes).collect()),
        CorpusFormat::Ids => lines
            .enumerate()
            .map(|(n, l)| parse_ids(l).ok_or_else(|| DamError::input(format!("corpus line {}: not a token-id list", n + 1))))
            .collect(),
        CorpusFormat::Auto => {
            let lines: Vec<&str> = lines.collect();
            match lines.iter().map(|l| parse_ids(l)).collect::<Option<Vec<_>>>() {
                Some(ids) => Ok(ids),
                None => Ok(lines.into_iter().map(bytes).collect()),
            }
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<Vec<u32>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DamError::io(path, e))?;
    parse_corpus(&text, format)
}

/// Seeded random sequences with lengths in `min_len..=max_len` and ids in
/// `0..vocab_size`. Every sequence starts with token 0.
pub fn synthetic_corpus(n: usize, min_len: usize, max_len: usize, vocab_size: usize, seed: u64) -> Vec<Vec<u32>> {
    assert!(1 <= min_len && min_len <= max_len && vocab_size >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            std::iter::once(0)
                .chain((1..len).map(|_| rng.gen_range(0..vocab_size as u32)))
                .collect()
        })
        .collect()
}

/// Renders sequences in the id-list corpus format.
pub fn corpus_to_text(seqs: &[Vec<u32>]) -> String {
    let mut out = String::new();
    for s in seqs {
        let line: Vec<String> = s.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}
