//! Symmetric N-bit quantization with selectable rounding, dequantization,
//! and residual extraction.
//!
//! The scale is `lambda = (2^(N-1)-1) / max_abs`, values are clamped to the
//! symmetric range `[-(2^(N-1)-1), 2^(N-1)-1]` (the extra negative code of
//! two's complement is unused). Rounding down makes every residual entry
//! nonnegative, which is what the low-rank compensation path relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// How `lambda * a` is cast to the integer lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    /// Round to nearest; residuals are sign-symmetric around zero.
    Nearest,
    /// Round toward negative infinity; residuals are nonnegative.
    Floor,
}

impl std::fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RoundingMode::Nearest => write!(f, "nearest"),
            RoundingMode::Floor => write!(f, "floor"),
        }
    }
}

/// Integer-valued matrix with its bit width, scale, and rounding mode.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    values: Vec<i32>,
    bit_width: u8,
    scale: f64,
    rounding: RoundingMode,
}

impl QuantizedMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn bit_width(&self) -> u8 {
        self.bit_width
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rounding(&self) -> RoundingMode {
        self.rounding
    }

    /// Largest representable code, `2^(N-1)-1`.
    pub fn code_limit(&self) -> i32 {
        code_limit(self.bit_width)
    }

    /// Builds a quantized matrix directly from codes. The values must
    /// already sit in the symmetric range.
    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        values: Vec<i32>,
        bit_width: u8,
        scale: f64,
        rounding: RoundingMode,
    ) -> Self {
        let limit = code_limit(bit_width);
        debug_assert!(values.iter().all(|v| (-limit..=limit).contains(v)));
        debug_assert_eq!(values.len(), rows * cols);
        Self {
            rows,
            cols,
            values,
            bit_width,
            scale,
            rounding,
        }
    }
}

pub(crate) fn code_limit(bit_width: u8) -> i32 {
    (1i32 << (bit_width - 1)) - 1
}

fn validate_bit_width(bit_width: u8) -> Result<()> {
    if (2..=16).contains(&bit_width) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "bit width must be in 2..=16, got {bit_width}"
        )))
    }
}

/// Scale for a matrix whose largest absolute entry is `max_abs`:
/// `(2^(N-1)-1) / max_abs`, nudged down by at most two ulps so the extreme
/// code dequantizes to at least `max_abs`. Without the nudge the clamped
/// boundary cell can pick up a one-ulp negative residual in floor mode.
pub fn compute_scale(max_abs: f64, bit_width: u8) -> Result<f64> {
    validate_bit_width(bit_width)?;
    if !(max_abs > 0.0) || !max_abs.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "max_abs must be positive and finite, got {max_abs}"
        )));
    }
    let k = code_limit(bit_width) as f64;
    let mut lambda = k / max_abs;
    while k / lambda < max_abs {
        lambda = lambda.next_down();
    }
    Ok(lambda)
}

/// Quantizes `a` to `bit_width` signed integers with the symmetric scale.
/// An all-zero matrix has no defined scale; it quantizes to zeros with the
/// documented sentinel `lambda = 1`.
pub fn quantize(a: &DenseMatrix, bit_width: u8, mode: RoundingMode) -> Result<QuantizedMatrix> {
    validate_bit_width(bit_width)?;
    let limit = code_limit(bit_width);
    let max_abs = a.max_abs();
    if max_abs == 0.0 {
        return Ok(QuantizedMatrix {
            rows: a.rows(),
            cols: a.cols(),
            values: vec![0; a.data().len()],
            bit_width,
            scale: 1.0,
            rounding: mode,
        });
    }
    let scale = compute_scale(max_abs, bit_width)?;
    let lo = -limit as f64;
    let hi = limit as f64;
    let values = a
        .data()
        .iter()
        .map(|&x| {
            let t = scale * x;
            let r = match mode {
                RoundingMode::Nearest => t.round(),
                RoundingMode::Floor => t.floor(),
            };
            let mut v = r.clamp(lo, hi) as i32;
            if mode == RoundingMode::Floor {
                // A one-ulp overshoot in scale*x can land one lattice step
                // too high; the dequantized value must never exceed the
                // source or the residual picks up a negative entry.
                let mut guard = 0;
                while v > -limit && (v as f64) / scale > x && guard < 2 {
                    v -= 1;
                    guard += 1;
                }
            }
            v
        })
        .collect();
    Ok(QuantizedMatrix {
        rows: a.rows(),
        cols: a.cols(),
        values,
        bit_width,
        scale,
        rounding: mode,
    })
}

/// Maps codes back to reals: `v / lambda`.
pub fn dequantize(q: &QuantizedMatrix) -> DenseMatrix {
    let data = q.values.iter().map(|&v| v as f64 / q.scale).collect();
    DenseMatrix::from_vec(q.rows, q.cols, data).expect("quantized matrix has valid shape")
}

/// The information lost to quantization: `R = A - dequantize(Q)`.
/// In floor mode every entry is in `[0, 1/lambda]` (the closed upper end
/// only at clamped boundary cells); in nearest mode entries stay within
/// `[-1/(2 lambda), 1/(2 lambda)]` away from clamp boundaries.
pub fn residual(a: &DenseMatrix, q: &QuantizedMatrix) -> Result<DenseMatrix> {
    if a.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            q.shape()
        )));
    }
    a.sub(&dequantize(q))
}

/// Rescales an integer product back to reals: `C = C_int / (lambda_a * lambda_b)`.
pub fn dequant_result(c_int: &DenseMatrix, lambda_a: f64, lambda_b: f64) -> Result<DenseMatrix> {
    if !(lambda_a > 0.0) || !(lambda_b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scales must be positive, got {lambda_a} and {lambda_b}"
        )));
    }
    Ok(c_int.scale(1.0 / (lambda_a * lambda_b)))
}
