//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dam::amplify::{apply_transform, box_cox, shift_nonnegative, stabilize, TransformKind};
use dam::corpus::{corpus_to_text, synthetic_corpus};
use dam::damt::{decode, encode, read_tensor};
use dam::maskgen::{build_extended, force_self_attend, match_patterns, true_mask, PatternId, PatternKind, PatternMatch};
use dam::pipeline::{bench_csv, cmd_bench, cmd_pipeline, pattern_budget, BenchOptions, CaptureSource};
use dam::render::render_pgm;
use dam::sparse::{select_mask, sparse_attention, AttentionInputs};
use dam::{BitMask, DenseMap, Exec, PipelineConfig, ToyModelConfig};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "{what} took {took:?}, limit {limit:?}");
    Ok(took)
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

fn oracle_transform(kind: TransformKind, x: &DenseMap, eps: f64) -> Vec<f64> {
    let causal: Vec<f64> =
        (0..x.rows()).flat_map(|i| (0..x.cols()).filter(move |&j| j <= i).map(move |j| (i, j))).map(|(i, j)| x.get(i, j)).collect();
    let n = causal.len() as f64;
    let mean = causal.iter().sum::<f64>() / n;
    let std = (causal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let lo = causal.iter().cloned().fold(f64::MAX, f64::min);
    let hi = causal.iter().cloned().fold(f64::MIN, f64::max);
    x.data()
        .iter()
        .map(|&v| match kind {
            TransformKind::RawSum | TransformKind::Average => v,
            TransformKind::Log => v.ln(),
            TransformKind::BoxCox(0.0) => v.ln(),
            TransformKind::BoxCox(l) => ((l * v.ln()).exp() - 1.0) / l,
            TransformKind::YeoJohnson(l) => {
                if v >= 0.0 && l != 0.0 {
                    ((l * (v + 1.0).ln()).exp() - 1.0) / l
                } else if v >= 0.0 {
                    (v + 1.0).ln()
                } else if l != 2.0 {
                    -(((2.0 - l) * (1.0 - v).ln()).exp() - 1.0) / (2.0 - l)
                } else {
                    -(1.0 - v).ln()
                }
            }
            TransformKind::ZScore => (v - mean) / (std + eps),
            TransformKind::MinMax => (v - lo) / (hi - lo + eps),
            TransformKind::SquareRoot => v.powf(0.5),
            TransformKind::Arcsinh => v.asinh(),
        })
        .collect()
}

/// Random causal map whose rows are probability distributions.
fn random_prob_map(rng: &mut ChaCha8Rng, n: usize) -> DenseMap {
    let mut m = DenseMap::zeros(n, n);
    for i in 0..n {
        let w: Vec<f64> = (0..=i).map(|_| rng.gen::<f64>().powi(4)).collect();
        let s: f64 = w.iter().sum();
        for (j, x) in w.into_iter().enumerate() {
            m.set(i, j, x / s);
        }
    }
    m
}

fn dense_bool(rows: usize, cols: usize) -> Vec<Vec<bool>> {
    vec![vec![false; cols]; rows]
}

fn pattern_cells(p: PatternId, size: usize) -> Vec<Vec<bool>> {
    let mut m = dense_bool(size, size);
    for i in 0..size {
        for j in 0..size {
            m[i][j] = match p.kind {
                PatternKind::Diagonal => j + p.offset == i,
                PatternKind::Vertical => j == p.offset && i >= p.offset,
            };
        }
    }
    m
}

fn to_bools(m: &BitMask) -> Vec<Vec<bool>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

/// Random causal mask: a union of a few pool patterns plus noise.
fn random_mask(rng: &mut ChaCha8Rng, l: usize) -> BitMask {
    let mut m = BitMask::zeros(l, l);
    for _ in 0..rng.gen_range(0..5) {
        let off = rng.gen_range(0..l);
        let p = if rng.gen() { PatternId::diagonal(off) } else { PatternId::vertical(off) };
        let cells = pattern_cells(p, l);
        for i in 0..l {
            for j in 0..l {
                if cells[i][j] {
                    m.set(i, j, true);
                }
            }
        }
    }
    let density = rng.gen_range(0.0..0.6);
    for i in 0..l {
        for j in 0..=i {
            if rng.gen_bool(density) {
                m.set(i, j, true);
            }
        }
    }
    m
}

fn oracle_attention(inp: &AttentionInputs, keep: impl Fn(usize, usize) -> bool) -> Vec<Vec<f64>> {
    let n = inp.q.rows();
    let d = inp.q.cols() as f64;
    (0..n)
        .map(|i| {
            let scores: Vec<Option<f64>> = (0..n)
                .map(|j| {
                    keep(i, j).then(|| (0..inp.q.cols()).map(|c| inp.q.get(i, c) * inp.k.get(j, c)).sum::<f64>() / d.sqrt())
                })
                .collect();
            let max = scores.iter().flatten().cloned().fold(f64::MIN, f64::max);
            let z: f64 = scores.iter().flatten().map(|s| (s - max).exp()).sum();
            (0..inp.v.cols())
                .map(|c| {
                    scores
                        .iter()
                        .enumerate()
                        .filter_map(|(j, s)| s.map(|s| (s - max).exp() / z * inp.v.get(j, c)))
                        .sum()
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn c1_transforms() -> Outcome {
    let start = Instant::now();
    ensure!(box_cox(1.0, 0.5).unwrap() == 0.0, "box_cox(1, .5) != 0");
    ensure!((box_cox(4.0, 0.5).unwrap() - 2.0).abs() <= 1e-12, "box_cox(4, .5) != 2");
    ensure!((box_cox(std::f64::consts::E, 0.0).unwrap() - 1.0).abs() <= 1e-12, "box_cox(e, 0) != 1");

    let eps = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let n = rng.gen_range(2..24);
        let mean = random_prob_map(&mut rng, n);
        let sums = mean.map(|v| v * 7.0);
        let x = stabilize(&mean, eps);
        let lambda = if t % 10 == 0 { 0.0 } else { rng.gen_range(0.0..2.0) };
        // signed input exercises both Yeo-Johnson branches
        let signed = DenseMap::from_fn(n, n, |_, _| rng.gen_range(-3.0..3.0));
        for kind in TransformKind::all(lambda) {
            let input = match kind {
                TransformKind::RawSum => &sums,
                TransformKind::Average => &mean,
                _ => &x,
            };
            let mut cases = vec![input];
            if matches!(kind, TransformKind::YeoJohnson(_)) {
                cases.push(&signed);
            }
            for input in cases {
                let got = apply_transform(kind, input, eps).map_err(|e| format!("{kind}: {e}"))?;
                let want = oracle_transform(kind, input, eps);
                for (a, b) in got.data().iter().zip(&want) {
                    let diff = (a - b).abs();
                    worst = worst.max(diff);
                    ensure!(diff <= 1e-9, "{kind} (λ={lambda}) differs by {diff:e} on map {t}");
                }
            }
        }
    }
    let took = within(Duration::from_secs(1), start, "criterion 1")?;
    Ok(format!("9 kinds x 100 maps, max |diff| {worst:.2e}, {took:?}"))
}

fn c2_compactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0usize;
    let check = |x: &DenseMap| -> Result<(), String> {
        let bc = apply_transform(TransformKind::BoxCox(0.5), x, 1e-8).map_err(|e| e.to_string())?;
        let sq = apply_transform(TransformKind::SquareRoot, x, 1e-8).map_err(|e| e.to_string())?;
        for (k, (b, s)) in bc.data().iter().zip(sq.data()).enumerate() {
            ensure!(b <= s, "box-cox {b} > sqrt {s} at cell {k} (x = {})", x.data()[k]);
        }
        let bmax = bc.data().iter().cloned().fold(f64::MIN, f64::max);
        let smax = sq.data().iter().cloned().fold(f64::MIN, f64::max);
        ensure!(bmax <= smax, "max box-cox {bmax} > max sqrt {smax}");
        Ok(())
    };
    // stabilized mean maps as produced by capture
    for _ in 0..50 {
        let n = rng.gen_range(2..32);
        check(&stabilize(&random_prob_map(&mut rng, n), 1e-8))?;
        checked += 1;
    }
    // stabilized maps with every value >= 1, over the range where 2√x - 2 <= √x
    for _ in 0..50 {
        let n = rng.gen_range(2..32);
        let m = DenseMap::from_fn(n, n, |_, _| rng.gen_range(1.0..=4.0));
        check(&stabilize(&m, 1e-8))?;
        checked += 1;
    }
    let nine = box_cox(9.0, 0.5).unwrap();
    Ok(format!("{checked} maps; note box_cox(9, .5) = {nine} > sqrt(9) = 3, so the bound needs x <= 4"))
}

fn amplified_map(rng: &mut ChaCha8Rng, n: usize) -> DenseMap {
    let x = stabilize(&random_prob_map(rng, n), 1e-8);
    let b = apply_transform(TransformKind::BoxCox(0.5), &x, 1e-8).unwrap();
    shift_nonnegative(&[b], Exec::Sequential).pop().unwrap()
}

fn c3_threshold_monotonicity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let taus: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    for t in 0..50 {
        let n = rng.gen_range(4..48);
        let amap = amplified_map(&mut rng, n);
        let masks: Vec<BitMask> = taus.iter().map(|&tau| true_mask(&amap, tau)).collect();
        for (k, w) in masks.windows(2).enumerate() {
            ensure!(w[1].is_subset_of(&w[0]), "map {t}: mask at τ={} not within τ={}", taus[k + 1], taus[k]);
        }
    }
    let took = within(Duration::from_secs(1), start, "criterion 3")?;
    Ok(format!("50 maps x 11 thresholds nested, {took:?}"))
}

struct MatchCase {
    mask: BitMask,
    matched: Vec<PatternMatch>,
}

fn matching_cases() -> Vec<MatchCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut cases = Vec::new();
    for &l in &[8usize, 16, 32] {
        for _ in 0..100 {
            let mask = random_mask(&mut rng, l);
            let matched = match_patterns(&mask, 1.0, Exec::default()).unwrap();
            cases.push(MatchCase { mask, matched });
        }
    }
    cases
}

fn c4_containment(cases: &[MatchCase], built: Duration) -> Outcome {
    let start = Instant::now();
    let mut total = 0usize;
    for (t, case) in cases.iter().enumerate() {
        let l = case.mask.rows();
        let m = to_bools(&case.mask);
        let mut brute = Vec::new();
        for p in (0..l).map(PatternId::diagonal).chain((0..l).map(PatternId::vertical)) {
            let cells = pattern_cells(p, l);
            let contained = (0..l).all(|i| (0..l).all(|j| !cells[i][j] || m[i][j]));
            if contained {
                brute.push(p);
            }
        }
        let got: Vec<PatternId> = case.matched.iter().map(|m| m.pattern).collect();
        ensure!(got == brute, "case {t} (L={l}): matched {got:?}, brute force {brute:?}");
        ensure!(case.matched.iter().all(|m| m.score == 1.0), "case {t}: score below 1 at μ=1");
        total += got.len();
    }
    let took = within(Duration::from_secs(5), start, "criterion 4")? + built;
    Ok(format!("300 masks (L = 8, 16, 32), {total} matches agree with brute force, {took:?}"))
}

fn c5_extension(cases: &[MatchCase]) -> Outcome {
    let start = Instant::now();
    for (t, case) in cases.iter().enumerate() {
        let l = case.mask.rows();
        let tm = to_bools(&case.mask);
        for s in [2 * l, 4 * l] {
            let ext = build_extended(&case.matched, &case.mask, s).map_err(|e| e.to_string())?;
            let mut want = dense_bool(s, s);
            for m in &case.matched {
                let cells = pattern_cells(m.pattern, s);
                for i in 0..s {
                    for j in 0..s {
                        want[i][j] |= cells[i][j];
                    }
                }
            }
            for i in 0..s {
                for j in 0..s {
                    let expect = if i < l && j < l { tm[i][j] } else { want[i][j] };
                    ensure!(ext.get(i, j) == expect, "case {t}, S={s}: cell ({i},{j}) is {}, oracle {expect}", ext.get(i, j));
                }
            }
        }
    }
    let took = within(Duration::from_secs(10), start, "criterion 5")?;
    Ok(format!("300 matched sets at S = 2L and 4L equal the union oracle, {took:?}"))
}

fn c6_case2_boundary(cases: &[MatchCase]) -> Outcome {
    for (t, case) in cases.iter().enumerate() {
        let l = case.mask.rows();
        let ext = build_extended(&case.matched, &case.mask, l).map_err(|e| e.to_string())?;
        ensure!(ext == case.mask, "case {t}: S = L changed the true mask");
        let sel = select_mask(l, &case.mask, &case.matched, false).map_err(|e| e.to_string())?;
        ensure!(sel == case.mask, "case {t}: Case-1 selection at S = L changed the true mask");
        let longer = build_extended(&case.matched, &case.mask, 3 * l).map_err(|e| e.to_string())?;
        ensure!(longer.top_left(l, l) == case.mask, "case {t}: leading block changed at S = 3L");
    }
    Ok(format!("{} masks reproduced bit-for-bit", cases.len()))
}

fn c7_dense_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let n = rng.gen_range(1..=64);
        let d = rng.gen_range(1..=32);
        let inp = AttentionInputs::random(n, d, rng.gen());
        let out = sparse_attention(&inp, &BitMask::causal(n), Exec::default()).map_err(|e| e.to_string())?;
        let want = oracle_attention(&inp, |i, j| j <= i);
        for i in 0..n {
            for c in 0..d {
                let diff = (out.get(i, c) - want[i][c]).abs();
                worst = worst.max(diff);
                ensure!(diff <= 1e-6, "instance {t}: ({i},{c}) differs by {diff:e}");
            }
        }

        // zero leak: perturbing V_j cannot touch rows that mask j out
        let mask = force_self_attend(&random_mask(&mut rng, n)).unwrap();
        let base = sparse_attention(&inp, &mask, Exec::default()).map_err(|e| e.to_string())?;
        let j = rng.gen_range(0..n);
        let mut poked = inp.clone();
        for c in 0..d {
            poked.v.set(j, c, poked.v.get(j, c) + 1e3 + rng.gen::<f64>());
        }
        let after = sparse_attention(&poked, &mask, Exec::default()).map_err(|e| e.to_string())?;
        for i in (0..n).filter(|&i| !mask.get(i, j)) {
            let same = base.row(i).iter().zip(after.row(i)).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same, "instance {t}: row {i} changed when masked V_{j} was perturbed");
        }
    }
    Ok(format!("100 instances, max |diff| {worst:.2e}, zero-leak bit-exact"))
}

struct Run {
    dir: PathBuf,
    took: Duration,
    matched: usize,
}

fn e2e_config() -> PipelineConfig {
    PipelineConfig {
        l_max: 64,
        model: ToyModelConfig { n_layers: 4, n_heads: 4, d_model: 32, vocab_size: 256, seed: 9, distance_bias: true },
        ..PipelineConfig::default()
    }
}

fn e2e_run(root: &Path, name: &str, exec: Exec) -> Result<Run, String> {
    let corpus_path = root.join("corpus.txt");
    if !corpus_path.exists() {
        fs::write(&corpus_path, corpus_to_text(&synthetic_corpus(200, 24, 96, 256, 2024))).map_err(|e| e.to_string())?;
    }
    let seqs = dam::corpus::load_corpus(&corpus_path, dam::corpus::CorpusFormat::Ids).map_err(|e| e.to_string())?;
    let dir = root.join(name);
    let start = Instant::now();
    let res = cmd_pipeline(&CaptureSource::Corpus(seqs), &e2e_config(), &dir, exec).map_err(|e| e.to_string())?;
    Ok(Run { dir, took: start.elapsed(), matched: res.matched.len() })
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        out.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap());
    }
    out
}

fn c8_scaling(run: &Run, cases: &[MatchCase]) -> Outcome {
    let cfg = e2e_config();
    let mut sweeps = 0usize;
    let mut sample = String::new();
    let check = |rows: &[dam::pipeline::BenchRow], budget: usize, label: &str| -> Result<(), String> {
        let l = rows[0].seq_len;
        let base = rows[0].report.nnz as usize;
        for r in rows {
            ensure!(
                r.report.nnz as usize <= base + budget * r.seq_len,
                "{label}: nnz({}) = {} > nnz(L) + p·S = {} + {budget}·{}",
                r.seq_len,
                r.report.nnz,
                base,
                r.seq_len
            );
        }
        for w in rows.windows(2) {
            ensure!(
                w[1].report.flops_ratio() < w[0].report.flops_ratio(),
                "{label}: flops ratio rose from S={} to S={} (L={l})",
                w[0].seq_len,
                w[1].seq_len
            );
        }
        Ok(())
    };
    for l in 0..cfg.model.n_layers {
        for h in 0..cfg.model.n_heads {
            let opts = BenchOptions {
                mask: run.dir.join(format!("mask_L{l}_H{h}.damt")),
                matched: Some(run.dir.join("matched.txt")),
                layer: l,
                head: h,
                lengths: Vec::new(),
                d: 64,
                self_attend: true,
            };
            let rows = cmd_bench(&opts, Exec::default()).map_err(|e| e.to_string())?;
            let matched = dam::pipeline::load_matched(&run.dir.join("matched.txt")).map_err(|e| e.to_string())?;
            check(&rows, pattern_budget(matched.get(l, h), true), &format!("L{l}H{h}"))?;
            if sample.is_empty() && !matched.get(l, h).is_empty() {
                sample = format!("L{l}H{h}\n{}", bench_csv(&rows));
            }
            sweeps += 1;
        }
    }
    for (t, case) in cases.iter().enumerate() {
        let l = case.mask.rows();
        let rows = dam::pipeline::bench_sweep(&case.mask, &case.matched, &[l, 2 * l, 4 * l, 8 * l], 16, true, Exec::default())
            .map_err(|e| e.to_string())?;
        check(&rows, pattern_budget(&case.matched, true), &format!("random case {t}"))?;
        sweeps += 1;
    }
    for line in sample.lines() {
        println!("      {line}");
    }
    Ok(format!("{sweeps} sweeps over S = L, 2L, 4L, 8L within nnz(L) + p·S, flops ratio strictly falling"))
}

fn c9_end_to_end(root: &Path, first: &Run) -> Outcome {
    ensure!(first.took < Duration::from_secs(30), "pipeline took {:?}", first.took);
    ensure!(first.matched > 0, "matched set is empty for every head");
    let tree = read_tree(&first.dir);
    let mut masks = 0usize;
    for (name, bytes) in &tree {
        if !name.ends_with(".damt") {
            continue;
        }
        let t = decode(bytes).map_err(|e| format!("{name}: {e}"))?;
        if let dam::Tensor::Mask(m) = t {
            ensure!(m.is_causal(), "{name} is not causal");
            let forced = force_self_attend(&m).unwrap();
            ensure!((0..forced.rows()).all(|i| forced.row_count(i) > 0), "{name} has an empty row after forcing");
            masks += 1;
        }
    }
    ensure!(masks == 16, "expected 16 mask files, found {masks}");
    let heads = dam::pipeline::load_matched(&first.dir.join("matched.txt")).map_err(|e| e.to_string())?.iter().count();

    let again = e2e_run(root, "run_b", Exec::default())?;
    ensure!(read_tree(&again.dir) == tree, "rerun is not byte-identical");
    let seq = e2e_run(root, "run_seq", Exec::Sequential)?;
    ensure!(read_tree(&seq.dir) == tree, "sequential run differs from parallel run");
    Ok(format!(
        "{} matches over {heads} heads, {masks} causal masks, {} files byte-identical on rerun, {:?}",
        first.matched,
        tree.len(),
        first.took
    ))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn c10_golden_files() -> Outcome {
    let dir = fixtures();
    for name in ["mask5", "ramp4x6", "const3"] {
        let raw = fs::read(dir.join(format!("{name}.damt"))).map_err(|e| e.to_string())?;
        let t = read_tensor(dir.join(format!("{name}.damt"))).map_err(|e| format!("{name}: {e}"))?;
        ensure!(encode(&t).map_err(|e| e.to_string())? == raw, "{name}: DAMT re-encode differs");
        let golden = fs::read(dir.join(format!("{name}.pgm"))).map_err(|e| e.to_string())?;
        let pgm = render_pgm(&t).map_err(|e| e.to_string())?;
        ensure!(pgm == golden, "{name}: PGM differs from golden");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..50 {
        let (r, c) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let m = BitMask::from_fn(r, c, |_, _| rng.gen());
        let d = DenseMap::from_fn(r, c, |_, _| (rng.gen::<f32>() * 10.0 - 5.0) as f64);
        ensure!(decode(&encode(&m).unwrap()).unwrap() == dam::Tensor::Mask(m), "mask round trip");
        ensure!(decode(&encode(&d).unwrap()).unwrap() == dam::Tensor::Dense(d), "dense round trip");
    }
    Ok("3 fixtures render to golden PGM bytes; 100 random DAMT round trips bit-exact".into())
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path().to_path_buf();
    let built_at = Instant::now();
    let cases = matching_cases();
    let build_time = built_at.elapsed();
    let first = e2e_run(&root, "run_a", Exec::default());

    let criteria: Vec<Criterion> = vec![
        ("C1 transform correctness", Box::new(c1_transforms)),
        ("C2 box-cox compactness", Box::new(c2_compactness)),
        ("C3 threshold monotonicity", Box::new(c3_threshold_monotonicity)),
        ("C4 containment at mu=1", Box::new(|| c4_containment(&cases, build_time))),
        ("C5 extension oracle", Box::new(|| c5_extension(&cases))),
        ("C6 case-2 boundary", Box::new(|| c6_case2_boundary(&cases))),
        ("C7 dense equivalence", Box::new(c7_dense_equivalence)),
        (
            "C8 O(sL) scaling",
            Box::new(|| first.as_ref().map_err(|e| format!("pipeline failed: {e}")).and_then(|r| c8_scaling(r, &cases))),
        ),
        (
            "C9 end-to-end pipeline",
            Box::new(|| first.as_ref().map_err(|e| format!("pipeline failed: {e}")).and_then(|r| c9_end_to_end(&root, r))),
        ),
        ("C10 golden files", Box::new(c10_golden_files)),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
