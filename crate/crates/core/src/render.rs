//! Grayscale PGM rendering of maps and masks.

use std::fs;
use std::path::Path;

use crate::damt::{read_tensor, Tensor};
use crate::error::{DamError, Result};

/// Binary PGM (`P5`, maxval 255), one pixel per cell.
///
/// Dense maps are min-max scaled to `round(255 (v - min) / (max - min))`,
/// all zero when `max == min`; masks map to 0 / 255.
pub fn render_pgm(t: &Tensor) -> Result<Vec<u8>> {
    let (rows, cols) = t.shape();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    match t {
        Tensor::Mask(m) => {
            for i in 0..rows {
                out.extend((0..cols).map(|j| if m.get(i, j) { 255u8 } else { 0 }));
            }
        }
        Tensor::Dense(d) => {
            if let Some(v) = d.data().iter().find(|v| !v.is_finite()) {
                return Err(DamError::input(format!("cannot render non-finite value {v}")));
            }
            let (lo, hi) = d
                .data()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let span = hi - lo;
            out.extend(d.data().iter().map(|&v| {
                if span > 0.0 {
                    (255.0 * (v - lo) / span).round() as u8
                } else {
                    0
                }
            }));
        }
    }
    Ok(out)
}

/// Reads a DAMT file and writes its PGM rendering.
pub fn cmd_render(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<()> {
    let t = read_tensor(input)?;
    let bytes = render_pgm(&t)?;
    let output = output.as_ref();
    fs::write(output, bytes).map_err(|e| DamError::io(output, e))
}
