//! Feature amplification of mean attention maps.
//!
//! Small and medium attention weights are stretched by a monotone transform
//! (Box-Cox with λ = 0.5 by default) and the result is shifted so the global
//! minimum over every (layer, head) is zero. Statistics used by the
//! transforms (min, max, mean, σ) and by the shift are taken over the causal
//! region `j <= i` only; the region above the diagonal is structurally zero.

use std::fmt;
use std::str::FromStr;

use crate::error::{DamError, Result};
use crate::exec::Exec;
use crate::tensor::DenseMap;

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransformKind {
    RawSum,
    Average,
    Log,
    BoxCox(f64),
    YeoJohnson(f64),
    ZScore,
    MinMax,
    SquareRoot,
    Arcsinh,
}

impl Default for TransformKind {
    fn default() -> Self {
        TransformKind::BoxCox(DEFAULT_LAMBDA)
    }
}

impl TransformKind {
    pub const NAMES: [&'static str; 9] =
        ["raw-sum", "average", "log", "box-cox", "yeo-johnson", "z-score", "min-max", "square-root", "arcsinh"];

    /// All nine kinds, with `lambda` for the parametric ones.
    pub fn all(lambda: f64) -> [TransformKind; 9] {
        use TransformKind::*;
        [RawSum, Average, Log, BoxCox(lambda), YeoJohnson(lambda), ZScore, MinMax, SquareRoot, Arcsinh]
    }

    pub fn name(&self) -> &'static str {
        use TransformKind::*;
        match self {
            RawSum => "raw-sum",
            Average => "average",
            Log => "log",
            BoxCox(_) => "box-cox",
            YeoJohnson(_) => "yeo-johnson",
            ZScore => "z-score",
            MinMax => "min-max",
            SquareRoot => "square-root",
            Arcsinh => "arcsinh",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            TransformKind::BoxCox(l) | TransformKind::YeoJohnson(l) => Some(l),
            _ => None,
        }
    }

    /// Same kind with its λ replaced; no-op for kinds without one.
    pub fn with_lambda(self, lambda: f64) -> Self {
        match self {
            TransformKind::BoxCox(_) => TransformKind::BoxCox(lambda),
            TransformKind::YeoJohnson(_) => TransformKind::YeoJohnson(lambda),
            other => other,
        }
    }

    /// Raw sums are the input instead of mean maps.
    pub fn wants_sums(&self) -> bool {
        matches!(self, TransformKind::RawSum)
    }

    /// Kinds that read the stabilized map `max(mean, eps)`.
    pub fn wants_stabilized(&self) -> bool {
        !matches!(self, TransformKind::RawSum | TransformKind::Average)
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = DamError;

    /// Parses a kind name; λ-carrying kinds get [`DEFAULT_LAMBDA`].
    fn from_str(s: &str) -> Result<Self> {
        use TransformKind::*;
        let kind = match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "raw-sum" => RawSum,
            "average" => Average,
            "log" => Log,
            "box-cox" => BoxCox(DEFAULT_LAMBDA),
            "yeo-johnson" => YeoJohnson(DEFAULT_LAMBDA),
            "z-score" => ZScore,
            "min-max" => MinMax,
            "square-root" => SquareRoot,
            "arcsinh" => Arcsinh,
            other => {
                return Err(DamError::Config(format!(
                    "unknown transform '{other}' (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        Ok(kind)
    }
}

/// `max(v, eps)` elementwise.
pub fn stabilize(map: &DenseMap, eps: f64) -> DenseMap {
    map.map(|v| if v >= eps { v } else { eps })
}

/// Box-Cox power transform of a positive value.
pub fn box_cox(x: f64, lambda: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(DamError::Domain(format!("box-cox needs x > 0, got {x}")));
    }
    Ok(box_cox_unchecked(x, lambda))
}

#[inline]
fn box_cox_unchecked(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

/// Yeo-Johnson transform; defined for every real `x`.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            (x + 1.0).ln()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if lambda == 2.0 {
        -(-x + 1.0).ln()
    } else {
        -((-x + 1.0).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

fn require_positive(map: &DenseMap, what: &str) -> Result<()> {
    match map.data().iter().find(|&&v| v.is_nan() || v <= 0.0) {
        Some(v) => Err(DamError::Domain(format!("{what} needs strictly positive input, found {v}; stabilize first"))),
        None => Ok(()),
    }
}

/// Population mean and standard deviation over the causal region.
pub fn causal_mean_std(map: &DenseMap) -> (f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in map.causal_values() {
        n += 1;
        sum += v;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = map.causal_values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn causal_min_max(map: &DenseMap) -> (f64, f64) {
    map.causal_values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Applies one transform to a map.
///
/// `raw-sum` expects accumulated sums and `average` mean maps; both return
/// their input unchanged. Every other kind expects the stabilized map.
pub fn apply_transform(kind: TransformKind, map: &DenseMap, eps: f64) -> Result<DenseMap> {
    use TransformKind::*;
    let out = match kind {
        RawSum | Average => map.clone(),
        Log => {
            require_positive(map, "log")?;
            map.map(f64::ln)
        }
        BoxCox(lambda) => {
            require_positive(map, "box-cox")?;
            map.map(|x| box_cox_unchecked(x, lambda))
        }
        YeoJohnson(lambda) => map.map(|x| yeo_johnson(x, lambda)),
        ZScore => {
            let (mean, std) = causal_mean_std(map);
            map.map(|x| (x - mean) / (std + eps))
        }
        MinMax => {
            let (lo, hi) = causal_min_max(map);
            if lo > hi {
                return Ok(map.clone());
            }
            map.map(|x| (x - lo) / (hi - lo + eps))
        }
        SquareRoot => {
            if let Some(v) = map.data().iter().find(|&&v| v.is_nan() || v < 0.0) {
                return Err(DamError::Domain(format!("square root of negative value {v}")));
            }
            map.map(f64::sqrt)
        }
        Arcsinh => map.map(|x| (x + (x * x + 1.0).sqrt()).ln()),
    };
    Ok(out)
}

/// Applies `kind` to every map.
pub fn apply_transform_all(kind: TransformKind, maps: &[DenseMap], eps: f64, exec: Exec) -> Result<Vec<DenseMap>> {
    exec.map(maps, |m| apply_transform(kind, m, eps)).into_iter().collect()
}

/// Subtracts the global causal-region minimum across all maps.
///
/// Causal entries become `v - min`, so the smallest is exactly 0; entries
/// above the diagonal are set to 0.
pub fn shift_nonnegative(maps: &[DenseMap], exec: Exec) -> Vec<DenseMap> {
    let mins = exec.map(maps, |m| causal_min_max(m).0);
    let min = mins.into_iter().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return maps.iter().map(|m| DenseMap::zeros(m.rows(), m.cols())).collect();
    }
    exec.map(maps, |m| DenseMap::from_fn(m.rows(), m.cols(), |i, j| if j <= i { m.get(i, j) - min } else { 0.0 }))
}
