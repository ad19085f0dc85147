//! Applying masks: Case 1 / Case 2 mask selection, masked softmax and
//! gather-style sparse attention, plus FLOPs accounting.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DamError, Result};
use crate::exec::Exec;
use crate::maskgen::{build_extended, force_self_attend, PatternMatch};
use crate::tensor::{BitMask, DenseMap};

/// Query, key and value matrices for one head of self-attention.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionInputs {
    pub q: DenseMap,
    pub k: DenseMap,
    pub v: DenseMap,
    pub scale: f64,
}

impl AttentionInputs {
    /// Uses the standard `1/sqrt(d_k)` scale.
    pub fn new(q: DenseMap, k: DenseMap, v: DenseMap) -> Result<Self> {
        if q.cols() == 0 {
            return Err(DamError::input("d_k must be at least 1"));
        }
        if q.cols() != k.cols() {
            return Err(DamError::input(format!("Q has d_k {} but K has {}", q.cols(), k.cols())));
        }
        if k.rows() != v.rows() {
            return Err(DamError::input(format!("K has {} rows but V has {}", k.rows(), v.rows())));
        }
        let scale = 1.0 / (q.cols() as f64).sqrt();
        Ok(AttentionInputs { q, k, v, scale })
    }

    /// Seeded uniform `[-1, 1]` inputs with `n` tokens and width `d`.
    pub fn random(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-1.0, 1.0);
        let mut draw = || DenseMap::from_fn(n, d, |_, _| dist.sample(&mut rng));
        let (q, k, v) = (draw(), draw(), draw());
        AttentionInputs::new(q, k, v).expect("shapes agree by construction")
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    pub fn d_k(&self) -> usize {
        self.q.cols()
    }

    pub fn d_v(&self) -> usize {
        self.v.cols()
    }
}

/// Picks the mask for a sequence of `seq_len` tokens.
///
/// `seq_len <= L` takes the leading block of the `L x L` true mask;
/// longer sequences get the extended mask. The diagonal is forced on when
/// `self_attend` is set.
pub fn select_mask(seq_len: usize, true_mask: &BitMask, matched: &[PatternMatch], self_attend: bool) -> Result<BitMask> {
    if seq_len == 0 {
        return Err(DamError::input("sequence length must be at least 1"));
    }
    let l = true_mask.rows();
    let mask = if seq_len <= l {
        true_mask.top_left(seq_len, seq_len)
    } else {
        build_extended(matched, true_mask, seq_len)?
    };
    if self_attend {
        force_self_attend(&mask)
    } else {
        Ok(mask)
    }
}

/// Softmax over `logits` in place; `logits` holds only kept positions.
fn softmax_kept(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in logits.iter_mut() {
        *x /= sum;
    }
}

/// Softmax restricted to positions where `keep` is true; masked positions
/// get probability exactly 0 and never enter the max or the exponentials.
pub fn masked_softmax(logits: &[f64], keep: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != keep.len() {
        return Err(DamError::input(format!("{} logits but {} mask bits", logits.len(), keep.len())));
    }
    let idx: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
    if idx.is_empty() {
        return Err(DamError::FullyMaskedRow { row: 0 });
    }
    let mut kept: Vec<f64> = idx.iter().map(|&j| logits[j]).collect();
    softmax_kept(&mut kept);
    let mut out = vec![0.0; logits.len()];
    for (&j, p) in idx.iter().zip(kept) {
        out[j] = p;
    }
    Ok(out)
}

fn check_shapes(inp: &AttentionInputs, mask: &BitMask) -> Result<()> {
    if inp.q.cols() != inp.k.cols() || inp.k.rows() != inp.v.rows() {
        return Err(DamError::input("inconsistent Q/K/V shapes"));
    }
    if mask.shape() != (inp.q.rows(), inp.k.rows()) {
        return Err(DamError::input(format!(
            "mask is {}x{} but attention is {}x{}",
            mask.rows(),
            mask.cols(),
            inp.q.rows(),
            inp.k.rows()
        )));
    }
    Ok(())
}

/// Masked attention computing dot products only for set mask bits.
///
/// Row `i` of the output is `sum_j a_ij V_j` over the set bits `j` of mask
/// row `i`, with `a_i` the softmax of the kept scaled scores.
pub fn sparse_attention(inp: &AttentionInputs, mask: &BitMask, exec: Exec) -> Result<DenseMap> {
    check_shapes(inp, mask)?;
    let (n, dv) = (inp.n(), inp.d_v());
    let rows = exec.map_range(n, |i| -> Result<Vec<f64>> {
        let idx: Vec<usize> = mask.row_ones(i).collect();
        if idx.is_empty() {
            return Err(DamError::FullyMaskedRow { row: i });
        }
        let qi = inp.q.row(i);
        let mut w: Vec<f64> = idx
            .iter()
            .map(|&j| qi.iter().zip(inp.k.row(j)).map(|(a, b)| a * b).sum::<f64>() * inp.scale)
            .collect();
        softmax_kept(&mut w);
        let mut out = vec![0.0; dv];
        for (&j, &a) in idx.iter().zip(&w) {
            for (o, &v) in out.iter_mut().zip(inp.v.row(j)) {
                *o += a * v;
            }
        }
        Ok(out)
    });
    let mut data = Vec::with_capacity(n * dv);
    for r in rows {
        data.extend(r?);
    }
    DenseMap::from_vec(n, dv, data)
}

/// Full-matrix reference: scores for every pair, masked cells set to `-inf`
/// before a row softmax. Used for `--dense-check`.
pub fn dense_attention(inp: &AttentionInputs, mask: &BitMask) -> Result<DenseMap> {
    check_shapes(inp, mask)?;
    let (n, m) = (inp.n(), inp.k.rows());
    let mut out = DenseMap::zeros(n, inp.d_v());
    for i in 0..n {
        let mut s: Vec<f64> = (0..m)
            .map(|j| {
                if mask.get(i, j) {
                    inp.q.row(i).iter().zip(inp.k.row(j)).map(|(a, b)| a * b).sum::<f64>() * inp.scale
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(DamError::FullyMaskedRow { row: i });
        }
        let mut sum = 0.0;
        for x in s.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        let row = out.row_mut(i);
        for (j, &e) in s.iter().enumerate() {
            let a = e / sum;
            for (o, &v) in row.iter_mut().zip(inp.v.row(j)) {
                *o += a * v;
            }
        }
    }
    Ok(out)
}

/// Sparsity and FLOPs for a square mask at head width `d`.
///
/// Each kept cell costs `2d` for its score and `2d` for the value
/// accumulation; the dense baseline keeps every causal cell.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyReport {
    pub nnz: u64,
    pub total: u64,
    pub sparsity: f64,
    pub flops_sparse: u64,
    pub flops_dense: u64,
    pub s_avg: f64,
}

impl EfficiencyReport {
    pub const CSV_HEADER: &'static str = "nnz,total,sparsity,flops_sparse,flops_dense,s_avg";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{},{},{:.6}",
            self.nnz, self.total, self.sparsity, self.flops_sparse, self.flops_dense, self.s_avg
        )
    }

    /// `flops_sparse / flops_dense`.
    pub fn flops_ratio(&self) -> f64 {
        if self.flops_dense == 0 {
            0.0
        } else {
            self.flops_sparse as f64 / self.flops_dense as f64
        }
    }
}

pub fn efficiency_report(mask: &BitMask, d: usize) -> Result<EfficiencyReport> {
    if mask.rows() != mask.cols() {
        return Err(DamError::input(format!("mask must be square, got {}x{}", mask.rows(), mask.cols())));
    }
    let n = mask.rows() as u64;
    let nnz = mask.count_ones() as u64;
    let total = n * (n + 1) / 2;
    let d = d as u64;
    Ok(EfficiencyReport {
        nnz,
        total,
        sparsity: if total == 0 { 0.0 } else { 1.0 - nnz as f64 / total as f64 },
        flops_sparse: 4 * nnz * d,
        flops_dense: 4 * total * d,
        s_avg: if n == 0 { 0.0 } else { nnz as f64 / n as f64 },
    })
}
