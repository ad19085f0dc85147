//! End-to-end orchestration behind the `dam` subcommands.
//!
//! Files are written per (layer, head) as `{stage}_L{layer}_H{head}.damt`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::amplify::{apply_transform_all, shift_nonnegative, stabilize};
use crate::capture::{effective_pcl, AttentionAccumulator, ToyModel};
use crate::config::PipelineConfig;
use crate::damt::{read_tensor, write_tensor, TensorRef};
use crate::error::{DamError, Result};
use crate::exec::Exec;
use crate::maskgen::{match_patterns, true_mask, MatchedSet, PatternId, PatternKind, PatternMatch};
use crate::sparse::{dense_attention, efficiency_report, select_mask, sparse_attention, AttentionInputs, EfficiencyReport};
use crate::tensor::{BitMask, DenseMap, PerHead};

/// Sequences forwarded together before their maps are accumulated.
const CAPTURE_CHUNK: usize = 32;

pub fn stage_file_name(stage: &str, layer: usize, head: usize) -> String {
    format!("{stage}_L{layer}_H{head}.damt")
}

fn parse_stage_file_name(name: &str, stage: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix(stage)?.strip_prefix("_L")?.strip_suffix(".damt")?;
    let (l, h) = rest.split_once("_H")?;
    Some((l.parse().ok()?, h.parse().ok()?))
}

/// Reads every `{stage}_L{l}_H{h}.damt` in `dir`; the set must cover a full
/// layers x heads grid.
pub fn read_stage_dir(dir: &Path, stage: &str) -> Result<PerHead<crate::damt::Tensor>> {
    let mut found = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| DamError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| DamError::io(dir, e))?;
        if let Some(lh) = entry.file_name().to_str().and_then(|n| parse_stage_file_name(n, stage)) {
            found.push((lh, entry.path()));
        }
    }
    if found.is_empty() {
        return Err(DamError::input(format!("no {stage}_L*_H*.damt files in {}", dir.display())));
    }
    found.sort();
    let n_layers = found.iter().map(|((l, _), _)| l + 1).max().unwrap_or(0);
    let n_heads = found.iter().map(|((_, h), _)| h + 1).max().unwrap_or(0);
    if found.len() != n_layers * n_heads {
        return Err(DamError::input(format!(
            "{}: {} {stage} files do not form a {n_layers}x{n_heads} grid",
            dir.display(),
            found.len()
        )));
    }
    let tensors = found.iter().map(|(_, p)| read_tensor(p)).collect::<Result<Vec<_>>>()?;
    PerHead::from_vec(n_layers, n_heads, tensors)
}

fn write_all<'a, T>(dir: &Path, stage: &str, items: &'a PerHead<T>, exec: Exec) -> Result<()>
where
    T: Sync,
    &'a T: Into<TensorRef<'a>>,
{
    let jobs: Vec<(usize, usize, &'a T)> = items.iter().collect();
    exec.map(&jobs, |&(l, h, t)| write_tensor(dir.join(stage_file_name(stage, l, h)), t))
        .into_iter()
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| DamError::io(dir, e))
}

/// Forwards every sequence (truncated to the capture length) through the
/// toy model and accumulates the maps in corpus order.
pub fn capture_corpus(seqs: &[Vec<u32>], cfg: &PipelineConfig, exec: Exec) -> Result<AttentionAccumulator> {
    cfg.validate()?;
    let model = ToyModel::new(cfg.model.clone())?;
    let mut acc = AttentionAccumulator::new(cfg.model.n_layers, cfg.model.n_heads, cfg.l_max);
    let seqs: Vec<&[u32]> = seqs
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| &s[..effective_pcl(s.len(), cfg.l_max)])
        .collect();
    for chunk in seqs.chunks(CAPTURE_CHUNK) {
        let maps = exec.map(chunk, |s| model.forward(s));
        for (s, m) in chunk.iter().zip(maps) {
            acc.accumulate(&m?, s.len(), exec)?;
        }
    }
    if acc.batches() == 0 {
        return Err(DamError::NoSequences);
    }
    Ok(acc)
}

/// Accumulates externally captured maps; each directory holds one batch of
/// `attn_L{l}_H{h}.damt` files.
pub fn capture_ingest(dirs: &[PathBuf], l_max: usize, exec: Exec) -> Result<AttentionAccumulator> {
    let mut acc: Option<AttentionAccumulator> = None;
    for dir in dirs {
        let tensors = read_stage_dir(dir, "attn")?;
        let mut maps = Vec::new();
        for t in tensors.items() {
            maps.push(t.clone().into_dense()?);
        }
        let n = maps[0].rows();
        if let Some(m) = maps.iter().find(|m| m.shape() != (n, n)) {
            return Err(DamError::input(format!(
                "{}: attention maps must share one square shape, found {}x{} and {n}x{n}",
                dir.display(),
                m.rows(),
                m.cols()
            )));
        }
        let len = effective_pcl(n, l_max);
        let maps = PerHead::from_vec(tensors.n_layers(), tensors.n_heads(), maps.iter().map(|m| m.top_left(len, len)).collect())?;
        let acc = acc.get_or_insert_with(|| AttentionAccumulator::new(maps.n_layers(), maps.n_heads(), l_max));
        acc.accumulate(&maps, len, exec)?;
    }
    acc.ok_or(DamError::NoSequences)
}

/// Where attention maps come from.
#[derive(Clone, Debug)]
pub enum CaptureSource {
    Corpus(Vec<Vec<u32>>),
    Ingest(Vec<PathBuf>),
}

pub fn capture(source: &CaptureSource, cfg: &PipelineConfig, exec: Exec) -> Result<AttentionAccumulator> {
    match source {
        CaptureSource::Corpus(seqs) => capture_corpus(seqs, cfg, exec),
        CaptureSource::Ingest(dirs) => {
            cfg.validate()?;
            capture_ingest(dirs, cfg.l_max, exec)
        }
    }
}

/// Mean, sum and count maps trimmed to the longest accumulated sequence.
pub struct CaptureMaps {
    pub pcl: usize,
    pub means: PerHead<DenseMap>,
    pub sums: PerHead<DenseMap>,
    pub counts: PerHead<DenseMap>,
}

pub fn capture_maps(acc: &AttentionAccumulator, eps: f64, exec: Exec) -> Result<CaptureMaps> {
    if acc.batches() == 0 {
        return Err(DamError::NoSequences);
    }
    let pcl = acc.longest();
    let trim = |m: PerHead<DenseMap>| m.map(|d| d.top_left(pcl, pcl));
    Ok(CaptureMaps {
        pcl,
        means: trim(acc.mean_maps(eps, exec)),
        sums: trim(acc.sum_maps(exec)),
        counts: trim(acc.count_maps(exec)),
    })
}

/// Runs capture and writes `mean_`, `sum_` and `count_` files.
pub fn cmd_capture(source: &CaptureSource, cfg: &PipelineConfig, out_dir: &Path, exec: Exec) -> Result<CaptureMaps> {
    let acc = capture(source, cfg, exec)?;
    let maps = capture_maps(&acc, cfg.eps, exec)?;
    create_dir(out_dir)?;
    write_all(out_dir, "mean", &maps.means, exec)?;
    write_all(out_dir, "sum", &maps.sums, exec)?;
    write_all(out_dir, "count", &maps.counts, exec)?;
    Ok(maps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadStats {
    pub layer: usize,
    pub head: usize,
    pub nnz: usize,
    pub sparsity: f64,
    pub diagonals: usize,
    pub verticals: usize,
}

pub const STATS_HEADER: &str = "layer,head,nnz,sparsity,diagonals,verticals";

pub fn stats_csv(stats: &[HeadStats]) -> String {
    let mut out = format!("{STATS_HEADER}\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{:.6},{},{}\n",
            s.layer, s.head, s.nnz, s.sparsity, s.diagonals, s.verticals
        ));
    }
    out
}

/// In-memory result of the mask-generation stage.
pub struct PipelineResult {
    pub capture: CaptureMaps,
    pub amplified: PerHead<DenseMap>,
    pub masks: PerHead<BitMask>,
    pub matched: MatchedSet,
    pub stats: Vec<HeadStats>,
}

/// Stabilize → transform → global shift → threshold → pattern match.
pub fn generate_masks(acc: &AttentionAccumulator, cfg: &PipelineConfig, exec: Exec) -> Result<PipelineResult> {
    cfg.validate()?;
    let capture = capture_maps(acc, cfg.eps, exec)?;
    let kind = cfg.transform;
    let inputs: Vec<DenseMap> = if kind.wants_sums() {
        capture.sums.items().to_vec()
    } else if kind.wants_stabilized() {
        exec.map(capture.means.items(), |m| stabilize(m, cfg.eps))
    } else {
        capture.means.items().to_vec()
    };
    let transformed = apply_transform_all(kind, &inputs, cfg.eps, exec)?;
    let shifted = shift_nonnegative(&transformed, exec);
    let (nl, nh) = (acc.n_layers(), acc.n_heads());
    let masks = exec.map(&shifted, |m| true_mask(m, cfg.tau));
    let matches = exec.map(&masks, |m| match_patterns(m, cfg.mu, Exec::Sequential));

    let pcl = capture.pcl;
    let causal = (pcl * (pcl + 1) / 2) as f64;
    let mut matched = MatchedSet::new();
    let mut stats = Vec::with_capacity(nl * nh);
    for (k, (mask, found)) in masks.iter().zip(matches).enumerate() {
        let found = found?;
        let (layer, head) = (k / nh, k % nh);
        let nnz = mask.count_ones();
        let diagonals = found.iter().filter(|m| m.pattern.kind == PatternKind::Diagonal).count();
        stats.push(HeadStats {
            layer,
            head,
            nnz,
            sparsity: 1.0 - nnz as f64 / causal,
            diagonals,
            verticals: found.len() - diagonals,
        });
        matched.insert(layer, head, found);
    }
    Ok(PipelineResult {
        capture,
        amplified: PerHead::from_vec(nl, nh, shifted)?,
        masks: PerHead::from_vec(nl, nh, masks)?,
        matched,
        stats,
    })
}

pub const MATCHED_FILE: &str = "matched.txt";
pub const STATS_FILE: &str = "stats.csv";
pub const CONFIG_FILE: &str = "config.txt";

/// Full mask-generation run. Writes the capture files plus `amp_` maps,
/// `mask_` true masks, the matched-set file, the stats table and the
/// effective config.
pub fn cmd_pipeline(source: &CaptureSource, cfg: &PipelineConfig, out_dir: &Path, exec: Exec) -> Result<PipelineResult> {
    let acc = capture(source, cfg, exec)?;
    let result = generate_masks(&acc, cfg, exec)?;
    create_dir(out_dir)?;
    write_all(out_dir, "mean", &result.capture.means, exec)?;
    write_all(out_dir, "sum", &result.capture.sums, exec)?;
    write_all(out_dir, "count", &result.capture.counts, exec)?;
    write_all(out_dir, "amp", &result.amplified, exec)?;
    write_all(out_dir, "mask", &result.masks, exec)?;
    let write = |name: &str, body: String| {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| DamError::io(p, e))
    };
    write(MATCHED_FILE, result.matched.to_text())?;
    write(STATS_FILE, stats_csv(&result.stats))?;
    write(CONFIG_FILE, cfg.render())?;
    Ok(result)
}

pub fn load_matched(path: &Path) -> Result<MatchedSet> {
    let text = fs::read_to_string(path).map_err(|e| DamError::io(path, e))?;
    MatchedSet::parse(&text)
}

fn load_square_mask(path: &Path) -> Result<BitMask> {
    let mask = read_tensor(path)?.into_mask()?;
    if mask.rows() != mask.cols() {
        return Err(DamError::input(format!("{}: mask must be square", path.display())));
    }
    Ok(mask)
}

/// Matched patterns for one head, or none when no file is given.
fn head_patterns(matched: Option<&Path>, layer: usize, head: usize) -> Result<Vec<PatternMatch>> {
    match matched {
        Some(p) => Ok(load_matched(p)?.get(layer, head).to_vec()),
        None => Ok(Vec::new()),
    }
}

/// Where Q, K and V come from for `attend`.
#[derive(Clone, Debug)]
pub enum AttendInputs {
    Files { q: PathBuf, k: PathBuf, v: PathBuf },
    Seeded { seed: u64, d: usize },
}

#[derive(Clone, Debug)]
pub struct AttendOptions {
    pub mask: PathBuf,
    pub matched: Option<PathBuf>,
    pub layer: usize,
    pub head: usize,
    pub seq_len: usize,
    pub inputs: AttendInputs,
    pub self_attend: bool,
    pub dense_check: bool,
    pub out: Option<PathBuf>,
}

pub struct AttendOutput {
    pub output: DenseMap,
    pub mask: BitMask,
    pub report: EfficiencyReport,
    pub max_abs_diff: Option<f64>,
}

/// Selects the mask for `seq_len` and runs sparse attention on it.
pub fn cmd_attend(opts: &AttendOptions, exec: Exec) -> Result<AttendOutput> {
    let tm = load_square_mask(&opts.mask)?;
    if opts.seq_len > tm.rows() && opts.matched.is_none() {
        return Err(DamError::input(format!(
            "mask is {0}x{0} but seq_len is {1}; pass a matched-set file to extend it",
            tm.rows(),
            opts.seq_len
        )));
    }
    let patterns = head_patterns(opts.matched.as_deref(), opts.layer, opts.head)?;
    let mask = select_mask(opts.seq_len, &tm, &patterns, opts.self_attend)?;
    let inp = match &opts.inputs {
        AttendInputs::Seeded { seed, d } => AttentionInputs::random(opts.seq_len, *d, *seed),
        AttendInputs::Files { q, k, v } => {
            let load = |p: &Path| -> Result<DenseMap> {
                let m = read_tensor(p)?.into_dense()?;
                if m.rows() < opts.seq_len {
                    return Err(DamError::input(format!("{}: {} rows < seq_len {}", p.display(), m.rows(), opts.seq_len)));
                }
                Ok(m.top_left(opts.seq_len, m.cols()))
            };
            AttentionInputs::new(load(q)?, load(k)?, load(v)?)?
        }
    };
    let output = sparse_attention(&inp, &mask, exec)?;
    let report = efficiency_report(&mask, inp.d_k())?;
    let max_abs_diff = if opts.dense_check {
        let reference = dense_attention(&inp, &mask)?;
        Some(output.data().iter().zip(reference.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    if let Some(out) = &opts.out {
        write_tensor(out, &output)?;
    }
    Ok(AttendOutput { output, mask, report, max_abs_diff })
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub mask: PathBuf,
    pub matched: Option<PathBuf>,
    pub layer: usize,
    pub head: usize,
    /// Sequence lengths; empty means `L, 2L, 4L, 8L`.
    pub lengths: Vec<usize>,
    pub d: usize,
    pub self_attend: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub seq_len: usize,
    pub report: EfficiencyReport,
}

pub const BENCH_HEADER: &str = "seq_len,nnz,sparsity,flops_sparse,flops_dense";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{BENCH_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{},{}\n",
            r.seq_len, r.report.nnz, r.report.sparsity, r.report.flops_sparse, r.report.flops_dense
        ));
    }
    out
}

/// Number of line patterns an extension can add per extra row: the matched
/// patterns, plus the forced diagonal when it is not already matched.
pub fn pattern_budget(matched: &[PatternMatch], self_attend: bool) -> usize {
    let forced = self_attend && !matched.iter().any(|m| m.pattern == PatternId::diagonal(0));
    matched.len() + usize::from(forced)
}

/// Efficiency reports for the selected mask at each sequence length.
pub fn bench_sweep(
    true_mask: &BitMask,
    matched: &[PatternMatch],
    lengths: &[usize],
    d: usize,
    self_attend: bool,
    exec: Exec,
) -> Result<Vec<BenchRow>> {
    exec.map(lengths, |&s| {
        let mask = select_mask(s, true_mask, matched, self_attend)?;
        Ok(BenchRow { seq_len: s, report: efficiency_report(&mask, d)? })
    })
    .into_iter()
    .collect()
}

pub fn cmd_bench(opts: &BenchOptions, exec: Exec) -> Result<Vec<BenchRow>> {
    let tm = load_square_mask(&opts.mask)?;
    let patterns = head_patterns(opts.matched.as_deref(), opts.layer, opts.head)?;
    let l = tm.rows();
    let lengths = if opts.lengths.is_empty() { vec![l, 2 * l, 4 * l, 8 * l] } else { opts.lengths.clone() };
    if opts.matched.is_none() {
        if let Some(&s) = lengths.iter().find(|&&s| s > l) {
            return Err(DamError::input(format!("seq_len {s} exceeds the {l}x{l} mask and no matched-set file was given")));
        }
    }
    bench_sweep(&tm, &patterns, &lengths, opts.d, opts.self_attend, exec)
}
