//! Attention-map capture: a seeded toy causal transformer and cross-batch
//! accumulation of its attention maps into mean maps.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DamError, Result};
use crate::exec::Exec;
use crate::tensor::{DenseMap, PerHead};

/// Default pattern capture length.
pub const DEFAULT_L_MAX: usize = 512;
/// Default denominator / stabilization constant.
pub const DEFAULT_EPS: f64 = 1e-8;

/// Truncation point for full-attention capture: `min(seq_len, l_max)`.
pub fn effective_pcl(seq_len: usize, l_max: usize) -> usize {
    seq_len.min(l_max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub vocab_size: usize,
    pub seed: u64,
    /// Add a per-head linear distance penalty to the attention logits.
    pub distance_bias: bool,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        ToyModelConfig { n_layers: 4, n_heads: 4, d_model: 32, vocab_size: 256, seed: 42, distance_bias: true }
    }
}

impl ToyModelConfig {
    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [self.n_layers, self.n_heads, self.d_model, self.vocab_size];
        if counts.contains(&0) {
            return Err(DamError::Config("model counts must all be at least 1".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(DamError::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    /// Distance-penalty slope for head `h`: `2^(-8(h+1)/n_heads)`.
    pub fn head_slope(&self, h: usize) -> f64 {
        if !self.distance_bias {
            return 0.0;
        }
        (2.0f64).powf(-8.0 * (h + 1) as f64 / self.n_heads as f64)
    }
}

struct LayerWeights {
    wq: Vec<f64>,
    wk: Vec<f64>,
    wv: Vec<f64>,
    wo: Vec<f64>,
}

/// Single-block-per-layer causal attention stack with frozen random weights.
///
/// No MLP, no residual: each layer's concatenated head outputs, projected
/// by `W_o`, feed the next layer.
pub struct ToyModel {
    cfg: ToyModelConfig,
    embed: Vec<f64>,
    layers: Vec<LayerWeights>,
}

fn matmul(x: &[f64], n: usize, k: usize, w: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let xi = &x[i * k..(i + 1) * k];
        let oi = &mut out[i * m..(i + 1) * m];
        for (a, &xa) in xi.iter().enumerate() {
            let wa = &w[a * m..(a + 1) * m];
            for (o, &wv) in oi.iter_mut().zip(wa) {
                *o += xa * wv;
            }
        }
    }
    out
}

impl ToyModel {
    pub fn new(cfg: ToyModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.d_model;
        let embed_dist = Uniform::new_inclusive(-1.0, 1.0);
        let embed = (0..cfg.vocab_size * d).map(|_| embed_dist.sample(&mut rng)).collect();
        let bound = 1.0 / (d as f64).sqrt();
        let w_dist = Uniform::new_inclusive(-bound, bound);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d * d).map(|_| w_dist.sample(rng)).collect() };
        let layers = (0..cfg.n_layers)
            .map(|_| LayerWeights { wq: draw(&mut rng), wk: draw(&mut rng), wv: draw(&mut rng), wo: draw(&mut rng) })
            .collect();
        Ok(ToyModel { cfg, embed, layers })
    }

    pub fn config(&self) -> &ToyModelConfig {
        &self.cfg
    }

    /// Full causal attention probabilities for every (layer, head).
    pub fn forward(&self, tokens: &[u32]) -> Result<PerHead<DenseMap>> {
        let cfg = &self.cfg;
        let (n, d, dk) = (tokens.len(), cfg.d_model, cfg.d_k());
        if n == 0 {
            return Err(DamError::input("empty token sequence"));
        }
        let mut x = Vec::with_capacity(n * d);
        for &t in tokens {
            let t = t as usize;
            if t >= cfg.vocab_size {
                return Err(DamError::input(format!("token id {t} out of range for vocab size {}", cfg.vocab_size)));
            }
            x.extend_from_slice(&self.embed[t * d..(t + 1) * d]);
        }

        let scale = 1.0 / (dk as f64).sqrt();
        let mut maps = Vec::with_capacity(cfg.n_layers * cfg.n_heads);
        for layer in &self.layers {
            let q = matmul(&x, n, d, &layer.wq, d);
            let k = matmul(&x, n, d, &layer.wk, d);
            let v = matmul(&x, n, d, &layer.wv, d);
            let mut concat = vec![0.0; n * d];
            for h in 0..cfg.n_heads {
                let slope = cfg.head_slope(h);
                let cols = h * dk..(h + 1) * dk;
                let mut map = DenseMap::zeros(n, n);
                for i in 0..n {
                    let qi = &q[i * d..(i + 1) * d][cols.clone()];
                    let row = &mut map.row_mut(i)[..=i];
                    for (j, s) in row.iter_mut().enumerate() {
                        let kj = &k[j * d..(j + 1) * d][cols.clone()];
                        let dot: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
                        *s = dot * scale - slope * (i - j) as f64;
                    }
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for s in row.iter_mut() {
                        *s = (*s - max).exp();
                        sum += *s;
                    }
                    for s in row.iter_mut() {
                        *s /= sum;
                    }
                    let out = &mut concat[i * d..(i + 1) * d][cols.clone()];
                    for (j, &a) in row.iter().enumerate() {
                        let vj = &v[j * d..(j + 1) * d][cols.clone()];
                        for (o, &vv) in out.iter_mut().zip(vj) {
                            *o += a * vv;
                        }
                    }
                }
                maps.push(map);
            }
            x = matmul(&concat, n, d, &layer.wo, d);
        }
        PerHead::from_vec(cfg.n_layers, cfg.n_heads, maps)
    }
}

/// Builds the model from `cfg` and runs one forward pass.
pub fn toy_forward(tokens: &[u32], cfg: &ToyModelConfig) -> Result<PerHead<DenseMap>> {
    ToyModel::new(cfg.clone())?.forward(tokens)
}

/// Running per-(layer, head) attention sums and observation counts over
/// `l_max x l_max` positions.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionAccumulator {
    l_max: usize,
    sums: PerHead<Vec<f64>>,
    counts: PerHead<Vec<u32>>,
    batches: u64,
    longest: usize,
}

impl AttentionAccumulator {
    pub fn new(n_layers: usize, n_heads: usize, l_max: usize) -> Self {
        AttentionAccumulator {
            l_max,
            sums: PerHead::from_fn(n_layers, n_heads, |_, _| vec![0.0; l_max * l_max]),
            counts: PerHead::from_fn(n_layers, n_heads, |_, _| vec![0; l_max * l_max]),
            batches: 0,
            longest: 0,
        }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_layers(&self) -> usize {
        self.sums.n_layers()
    }

    pub fn n_heads(&self) -> usize {
        self.sums.n_heads()
    }

    /// Number of maps accumulated so far.
    pub fn batches(&self) -> u64 {
        self.batches
    }

    /// Longest sequence accumulated so far.
    pub fn longest(&self) -> usize {
        self.longest
    }

    pub fn sum(&self, layer: usize, head: usize, i: usize, j: usize) -> f64 {
        self.sums.get(layer, head)[i * self.l_max + j]
    }

    pub fn count(&self, layer: usize, head: usize, i: usize, j: usize) -> u32 {
        self.counts.get(layer, head)[i * self.l_max + j]
    }

    /// Adds one batch of `seq_len x seq_len` maps over the causal pairs
    /// `j <= i < seq_len`. Positions at or beyond `seq_len` are untouched.
    pub fn accumulate(&mut self, maps: &PerHead<DenseMap>, seq_len: usize, exec: Exec) -> Result<()> {
        if maps.n_layers() != self.n_layers() || maps.n_heads() != self.n_heads() {
            return Err(DamError::input(format!(
                "maps cover {}x{} layer-heads, accumulator {}x{}",
                maps.n_layers(),
                maps.n_heads(),
                self.n_layers(),
                self.n_heads()
            )));
        }
        if seq_len > self.l_max {
            return Err(DamError::input(format!("sequence length {seq_len} exceeds l_max {}", self.l_max)));
        }
        if let Some((l, h, m)) = maps.iter().find(|(_, _, m)| m.shape() != (seq_len, seq_len)) {
            return Err(DamError::input(format!(
                "map L{l} H{h} is {}x{}, expected {seq_len}x{seq_len}",
                m.rows(),
                m.cols()
            )));
        }
        let l_max = self.l_max;
        let mut pairs: Vec<(&mut Vec<f64>, &mut Vec<u32>)> =
            self.sums.items_mut().iter_mut().zip(self.counts.items_mut().iter_mut()).collect();
        exec.for_each_mut(&mut pairs, |k, (sums, counts)| {
            let map = &maps.items()[k];
            for i in 0..seq_len {
                let src = &map.row(i)[..=i];
                let base = i * l_max;
                for (j, &a) in src.iter().enumerate() {
                    sums[base + j] += a;
                    counts[base + j] += 1;
                }
            }
        });
        self.batches += 1;
        self.longest = self.longest.max(seq_len);
        Ok(())
    }

    fn to_maps(&self, exec: Exec, f: impl Fn(f64, u32) -> f64 + Sync + Send) -> PerHead<DenseMap> {
        let l = self.l_max;
        let idx: Vec<usize> = (0..self.sums.items().len()).collect();
        let maps = exec.map(&idx, |&k| {
            let (s, c) = (&self.sums.items()[k], &self.counts.items()[k]);
            let data = s.iter().zip(c).map(|(&a, &n)| f(a, n)).collect();
            DenseMap::from_vec(l, l, data).expect("accumulator buffers are l_max^2")
        });
        PerHead::from_vec(self.n_layers(), self.n_heads(), maps).expect("one map per layer-head")
    }

    /// Mean maps `A / (C + eps)`; never-observed positions are 0.
    pub fn mean_maps(&self, eps: f64, exec: Exec) -> PerHead<DenseMap> {
        self.to_maps(exec, |a, c| if c == 0 { 0.0 } else { a / (c as f64 + eps) })
    }

    /// The raw sums `A`.
    pub fn sum_maps(&self, exec: Exec) -> PerHead<DenseMap> {
        self.to_maps(exec, |a, _| a)
    }

    /// The counts `C` as reals.
    pub fn count_maps(&self, exec: Exec) -> PerHead<DenseMap> {
        self.to_maps(exec, |_, c| c as f64)
    }
}

/// `A / (C + eps)` for a single cell.
pub fn mean_value(sum: f64, count: u32, eps: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / (count as f64 + eps)
    }
}
