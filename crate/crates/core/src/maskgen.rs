//! True masks, the diagonal/vertical pattern pool, match scoring and
//! extended-mask construction.
//!
//! A true mask is the thresholded amplified map of one (layer, head). Each
//! of the `2L` pool patterns (diagonals `j = i - r` and verticals `j = c,
//! i >= c`) is scored by the fraction of its cells present in the mask.
//! Patterns scoring at least μ are kept as generator descriptors and
//! regenerated at any longer length `S` to extend the mask past `L`.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::error::{DamError, Result};
use crate::exec::Exec;
use crate::tensor::{BitMask, DenseMap};

pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_MU: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternKind {
    Diagonal,
    Vertical,
}

impl PatternKind {
    pub fn code(self) -> char {
        match self {
            PatternKind::Diagonal => 'D',
            PatternKind::Vertical => 'V',
        }
    }
}

/// One pool pattern: diagonal starting at row `offset`, or vertical at
/// column `offset`. Orders diagonals before verticals, then by offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternId {
    pub kind: PatternKind,
    pub offset: usize,
}

impl PatternId {
    pub const fn diagonal(r: usize) -> Self {
        PatternId { kind: PatternKind::Diagonal, offset: r }
    }

    pub const fn vertical(c: usize) -> Self {
        PatternId { kind: PatternKind::Vertical, offset: c }
    }

    /// Rows `i` covered at size `size`; the cell in row `i` is
    /// [`PatternId::cell`].
    pub fn rows(&self, size: usize) -> std::ops::Range<usize> {
        self.offset.min(size)..size
    }

    #[inline]
    pub fn cell(&self, i: usize) -> (usize, usize) {
        match self.kind {
            PatternKind::Diagonal => (i, i - self.offset),
            PatternKind::Vertical => (i, self.offset),
        }
    }

    /// Number of cells at size `size`.
    pub fn len(&self, size: usize) -> usize {
        size.saturating_sub(self.offset)
    }

    pub fn is_empty(&self, size: usize) -> bool {
        self.len(size) == 0
    }

    /// The full pool for size `l`: diagonals `0..l`, then verticals `0..l`.
    pub fn pool(l: usize) -> Vec<PatternId> {
        (0..l).map(PatternId::diagonal).chain((0..l).map(PatternId::vertical)).collect()
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PatternKind::Diagonal => write!(f, "diagonal({})", self.offset),
            PatternKind::Vertical => write!(f, "vertical({})", self.offset),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternMatch {
    pub pattern: PatternId,
    pub score: f64,
}

/// Bit `(i, j)` set iff `amap[i][j] >= tau` and `j <= i`.
pub fn true_mask(amap: &DenseMap, tau: f64) -> BitMask {
    let mut m = BitMask::zeros(amap.rows(), amap.cols());
    for i in 0..amap.rows() {
        let end = (i + 1).min(amap.cols());
        for (j, &v) in amap.row(i)[..end].iter().enumerate() {
            if v >= tau {
                m.set(i, j, true);
            }
        }
    }
    m
}

/// Materializes a pattern as a `size x size` mask.
pub fn gen_pattern(p: PatternId, size: usize) -> BitMask {
    let mut m = BitMask::zeros(size, size);
    for i in p.rows(size) {
        let (a, b) = p.cell(i);
        m.set(a, b, true);
    }
    m
}

fn square(mask: &BitMask) -> Result<usize> {
    if mask.rows() != mask.cols() {
        return Err(DamError::input(format!("mask must be square, got {}x{}", mask.rows(), mask.cols())));
    }
    Ok(mask.rows())
}

/// Fraction of the pattern's cells (at the mask's size) set in `mask`.
pub fn match_score(mask: &BitMask, p: PatternId) -> Result<f64> {
    let l = square(mask)?;
    let total = p.len(l);
    if total == 0 {
        return Err(DamError::UndefinedScore(p.to_string()));
    }
    let hits = p
        .rows(l)
        .filter(|&i| {
            let (a, b) = p.cell(i);
            mask.get(a, b)
        })
        .count();
    Ok(hits as f64 / total as f64)
}

/// Every pool pattern with score `>= mu`, diagonals first, each by offset.
pub fn match_patterns(mask: &BitMask, mu: f64, exec: Exec) -> Result<Vec<PatternMatch>> {
    let l = square(mask)?;
    let pool = PatternId::pool(l);
    let scored = exec.map(&pool, |&p| match_score(mask, p).map(|score| PatternMatch { pattern: p, score }));
    let mut out = Vec::new();
    for m in scored {
        let m = m?;
        if m.score >= mu {
            out.push(m);
        }
    }
    Ok(out)
}

/// Extends an `l x l` true mask to `s x s`.
///
/// The leading `l x l` block is copied verbatim. Every cell outside it is set
/// iff it lies on some matched pattern regenerated at size `s`.
pub fn build_extended(matched: &[PatternMatch], true_mask: &BitMask, s: usize) -> Result<BitMask> {
    let l = square(true_mask)?;
    if s < l {
        return Err(DamError::input(format!("extended size {s} is smaller than the true mask size {l}")));
    }
    let mut out = BitMask::zeros(s, s);
    for i in 0..l {
        for j in true_mask.row_ones(i) {
            out.set(i, j, true);
        }
    }
    for m in matched {
        let p = m.pattern;
        // a pattern cell (i, j) has j <= i, so it is outside the block iff i >= l
        for i in p.offset.max(l)..s {
            let (a, b) = p.cell(i);
            out.set(a, b, true);
        }
    }
    Ok(out)
}

/// Sets every diagonal bit; all other bits unchanged.
pub fn force_self_attend(mask: &BitMask) -> Result<BitMask> {
    let n = square(mask)?;
    let mut out = mask.clone();
    for i in 0..n {
        out.set(i, i, true);
    }
    Ok(out)
}

/// Matched patterns for every (layer, head) that has any.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchedSet {
    entries: BTreeMap<(usize, usize), Vec<PatternMatch>>,
}

impl MatchedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: usize, head: usize, mut matches: Vec<PatternMatch>) {
        matches.sort_by_key(|m| m.pattern);
        if matches.is_empty() {
            self.entries.remove(&(layer, head));
        } else {
            self.entries.insert((layer, head), matches);
        }
    }

    pub fn get(&self, layer: usize, head: usize) -> &[PatternMatch] {
        self.entries.get(&(layer, head)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &[PatternMatch])> {
        self.entries.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    /// Total number of matches across all heads.
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per match: `layer head kind offset score`, kind `D`/`V`,
    /// sorted by (layer, head, kind, offset).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&(l, h), matches) in &self.entries {
            for m in matches {
                let _ = writeln!(out, "{l} {h} {} {} {:.9}", m.pattern.kind.code(), m.pattern.offset, m.score);
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<(usize, usize), Vec<PatternMatch>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| DamError::Format(format!("matched-set line {}: {what}: '{line}'", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [l, h, kind, offset, score] = fields[..] else {
                return Err(bad("expected 5 fields"));
            };
            let l: usize = l.parse().map_err(|_| bad("bad layer"))?;
            let h: usize = h.parse().map_err(|_| bad("bad head"))?;
            let offset: usize = offset.parse().map_err(|_| bad("bad offset"))?;
            let score: f64 = score.parse().map_err(|_| bad("bad score"))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(bad("score outside [0, 1]"));
            }
            let pattern = match kind {
                "D" => PatternId::diagonal(offset),
                "V" => PatternId::vertical(offset),
                _ => return Err(bad("kind must be D or V")),
            };
            entries.entry((l, h)).or_default().push(PatternMatch { pattern, score });
        }
        for v in entries.values_mut() {
            v.sort_by_key(|m| m.pattern);
        }
        Ok(MatchedSet { entries })
    }
}
