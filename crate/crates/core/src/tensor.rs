//! Dense real matrices, bit-packed masks and per-(layer, head) collections.

use std::fmt;

use crate::error::{DamError, Result};

/// Row-major real matrix holding attention weights, logits or transformed
/// scores.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMap {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMap { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DamError::input(format!(
                "{rows}x{cols} map needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMap { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMap { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Values on or below the main diagonal (`j <= i`), row by row.
    pub fn causal_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).flat_map(move |i| {
            let end = (i + 1).min(self.cols);
            self.row(i)[..end].iter().copied()
        })
    }

    /// Apply `f` elementwise, producing a new map of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMap {
        DenseMap { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Leading `rows x cols` block.
    pub fn top_left(&self, rows: usize, cols: usize) -> DenseMap {
        assert!(rows <= self.rows && cols <= self.cols, "block exceeds map");
        DenseMap::from_fn(rows, cols, |i, j| self.get(i, j))
    }
}

/// Bit-packed row-major binary matrix.
///
/// Bit `(i, j)` lives at flat index `i * cols + j`, stored LSB-first in
/// 64-bit words. Bits past `rows * cols` in the last word are always zero,
/// so [`BitMask::count_ones`] is the number of set cells.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    rows: usize,
    cols: usize,
    words: Vec<u64>,
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMask {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: String = (0..self.cols).map(|j| if self.get(i, j) { '1' } else { '.' }).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitMask {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMask { rows, cols, words: vec![0; words_for(rows * cols)] }
    }

    /// Lower-triangular-inclusive mask: every `j <= i` set.
    pub fn causal(n: usize) -> Self {
        let mut m = BitMask::zeros(n, n);
        for i in 0..n {
            m.set_range(i, 0, i + 1);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMask::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = BitMask::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    /// Build from LSB-first packed bytes; fails if padding bits are set.
    pub fn from_packed_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        let bits = rows * cols;
        let expected = bits.div_ceil(8);
        if bytes.len() != expected {
            return Err(DamError::Length { expected, actual: bytes.len() });
        }
        let mut words = vec![0u64; words_for(bits)];
        for (k, &b) in bytes.iter().enumerate() {
            words[k / 8] |= (b as u64) << ((k % 8) * 8);
        }
        let m = BitMask { rows, cols, words };
        if !m.padding_is_clear() {
            return Err(DamError::Format("nonzero padding bits in mask payload".into()));
        }
        Ok(m)
    }

    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let n = (self.rows * self.cols).div_ceil(8);
        (0..n).map(|k| (self.words[k / 8] >> ((k % 8) * 8)) as u8).collect()
    }

    fn padding_is_clear(&self) -> bool {
        let bits = self.rows * self.cols;
        let tail = bits % 64;
        match self.words.last() {
            Some(&w) if tail != 0 => w >> tail == 0,
            _ => true,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        let k = i * self.cols + j;
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.rows && j < self.cols, "({i},{j}) outside {}x{}", self.rows, self.cols);
        let k = i * self.cols + j;
        if value {
            self.words[k / 64] |= 1 << (k % 64);
        } else {
            self.words[k / 64] &= !(1 << (k % 64));
        }
    }

    /// Set bits `(i, start..end)`.
    pub fn set_range(&mut self, i: usize, start: usize, end: usize) {
        assert!(i < self.rows && start <= end && end <= self.cols);
        let mut k = i * self.cols + start;
        let stop = i * self.cols + end;
        while k < stop {
            let off = k % 64;
            let take = (64 - off).min(stop - k);
            let bits = if take == 64 { u64::MAX } else { ((1u64 << take) - 1) << off };
            self.words[k / 64] |= bits;
            k += take;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Set columns of row `i`, ascending.
    pub fn row_ones(&self, i: usize) -> RowOnes<'_> {
        let start = i * self.cols;
        RowOnes { words: &self.words, pos: start, end: start + self.cols, base: start }
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row_ones(i).count()
    }

    /// Every set bit satisfies `j <= i`.
    pub fn is_causal(&self) -> bool {
        (0..self.rows).all(|i| self.row_ones(i).all(|j| j <= i))
    }

    /// Every bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.shape() == other.shape() && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &BitMask) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Leading `rows x cols` block.
    pub fn top_left(&self, rows: usize, cols: usize) -> BitMask {
        assert!(rows <= self.rows && cols <= self.cols, "block exceeds mask");
        let mut out = BitMask::zeros(rows, cols);
        for i in 0..rows {
            for j in self.row_ones(i).take_while(|&j| j < cols) {
                out.set(i, j, true);
            }
        }
        out
    }

    /// Row `i` as one bool per column.
    pub fn row_bools(&self, i: usize) -> Vec<bool> {
        let mut row = vec![false; self.cols];
        for j in self.row_ones(i) {
            row[j] = true;
        }
        row
    }
}

/// Iterator over the set columns of one mask row.
pub struct RowOnes<'a> {
    words: &'a [u64],
    pos: usize,
    end: usize,
    base: usize,
}

impl Iterator for RowOnes<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.pos < self.end {
            let w = self.words[self.pos / 64] >> (self.pos % 64);
            if w == 0 {
                self.pos = (self.pos / 64 + 1) * 64;
                continue;
            }
            let hit = self.pos + w.trailing_zeros() as usize;
            if hit >= self.end {
                self.pos = self.end;
                return None;
            }
            self.pos = hit + 1;
            return Some(hit - self.base);
        }
        None
    }
}

/// One item per (layer, head), stored layer-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PerHead<T> {
    n_layers: usize,
    n_heads: usize,
    items: Vec<T>,
}

impl<T> PerHead<T> {
    pub fn from_vec(n_layers: usize, n_heads: usize, items: Vec<T>) -> Result<Self> {
        if items.len() != n_layers * n_heads {
            return Err(DamError::input(format!(
                "expected {} per-head items for {n_layers} layers x {n_heads} heads, got {}",
                n_layers * n_heads,
                items.len()
            )));
        }
        Ok(PerHead { n_layers, n_heads, items })
    }

    pub fn from_fn(n_layers: usize, n_heads: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut items = Vec::with_capacity(n_layers * n_heads);
        for l in 0..n_layers {
            for h in 0..n_heads {
                items.push(f(l, h));
            }
        }
        PerHead { n_layers, n_heads, items }
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn get(&self, layer: usize, head: usize) -> &T {
        &self.items[layer * self.n_heads + head]
    }

    pub fn get_mut(&mut self, layer: usize, head: usize) -> &mut T {
        &mut self.items[layer * self.n_heads + head]
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn items_mut(&mut self) -> &mut [T] {
        &mut self.items
    }

    pub fn into_items(self) -> Vec<T> {
        self.items
    }

    /// `(layer, head, item)` in layer-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let nh = self.n_heads;
        self.items.iter().enumerate().map(move |(k, t)| (k / nh, k % nh, t))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> PerHead<U> {
        PerHead { n_layers: self.n_layers, n_heads: self.n_heads, items: self.items.iter().map(f).collect() }
    }
}
