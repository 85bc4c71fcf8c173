//! 64-bit DCT perceptual hash.
//!
//! Pipeline, all in `f64`:
//!
//! 1. Luma `0.299 R + 0.587 G + 0.114 B` (grayscale input is used as is).
//! 2. Bilinear resize to 32×32 with corner-aligned sampling: output sample
//!    `(r, c)` reads the source at `y = r (H-1)/31`, `x = c (W-1)/31`
//!    (`0` when the source dimension is 1), and interpolates as
//!    `p = a + (b - a) t` first along x, then along y, with
//!    `x0 = floor(x)`, `x1 = min(x0 + 1, W - 1)`, `t = x - x0`.
//! 3. The grid is offset by its first sample, so flat input is exactly zero.
//!    This only moves the DC term.
//! 4. Orthonormal 2-D DCT-II; keep the top-left 8×8 block.
//! 5. Mean of the 63 AC coefficients.
//! 6. Bit for block index `i = 8 row + col` is set iff coefficient `i` is
//!    strictly greater than the mean. Index 0 (DC) never sets a bit. Bit
//!    `i` is stored at position `63 - i`, so the hex form reads in scan order.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use image::DynamicImage;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const GRID: usize = 32;
const BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PHash64(pub u64);

impl PHash64 {
    pub fn bits(self) -> u64 {
        self.0
    }
}

impl fmt::Display for PHash64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for PHash64 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 16 {
            return Err(Error::Rejected(format!("{s:?} is not a 16-digit hash")));
        }
        u64::from_str_radix(s, 16)
            .map(PHash64)
            .map_err(|e| Error::Rejected(format!("{s:?}: {e}")))
    }
}

impl TryFrom<String> for PHash64 {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PHash64> for String {
    fn from(h: PHash64) -> String {
        h.to_string()
    }
}

/// Number of differing bits.
pub fn hamming(a: PHash64, b: PHash64) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// Hashes a decoded image.
pub fn phash64(image: &DynamicImage) -> PHash64 {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let luma: Vec<f64> = if image.color().has_color() {
        image
            .to_rgb8()
            .pixels()
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect()
    } else {
        image.to_luma8().pixels().map(|p| f64::from(p[0])).collect()
    };
    phash64_luma(w, h, &luma)
}

/// Decodes a PNG or JPEG payload and hashes it. Other formats are refused.
pub fn phash64_bytes(payload: &[u8]) -> Result<PHash64> {
    let format = image::guess_format(payload)
        .map_err(|e| Error::Rejected(format!("unrecognised image payload: {e}")))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::Rejected(format!("unsupported image format {format:?}")));
    }
    let img = image::load_from_memory_with_format(payload, format)
        .map_err(|e| Error::Rejected(format!("undecodable image: {e}")))?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Rejected("empty image".into()));
    }
    Ok(phash64(&img))
}

/// Hashes a row-major grid of luma values.
///
/// # Panics
///
/// If the grid is empty or `luma.len() != width * height`.
pub fn phash64_luma(width: usize, height: usize, luma: &[f64]) -> PHash64 {
    assert!(width > 0 && height > 0, "image has no pixels");
    assert_eq!(luma.len(), width * height, "luma grid size mismatch");

    let mut grid = resize_bilinear(width, height, luma, GRID, GRID);
    let origin = grid[0];
    for v in &mut grid {
        *v -= origin;
    }
    let block = dct_block(&grid);

    let ac_mean = block[1..].iter().sum::<f64>() / (BLOCK * BLOCK - 1) as f64;
    let bits = block
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c > ac_mean)
        .fold(0u64, |acc, (i, _)| acc | 1 << (63 - i));
    PHash64(bits)
}

/// Corner-aligned bilinear resize; see the module docs for the formula.
pub fn resize_bilinear(
    width: usize,
    height: usize,
    src: &[f64],
    out_w: usize,
    out_h: usize,
) -> Vec<f64> {
    let coord = |i: usize, src_len: usize, out_len: usize| -> (usize, usize, f64) {
        if src_len == 1 || out_len == 1 {
            return (0, 0, 0.0);
        }
        let x = i as f64 * (src_len - 1) as f64 / (out_len - 1) as f64;
        let x0 = (x.floor() as usize).min(src_len - 1);
        let x1 = (x0 + 1).min(src_len - 1);
        (x0, x1, x - x0 as f64)
    };

    let mut out = Vec::with_capacity(out_w * out_h);
    for r in 0..out_h {
        let (y0, y1, ty) = coord(r, height, out_h);
        for c in 0..out_w {
            let (x0, x1, tx) = coord(c, width, out_w);
            let at = |y: usize, x: usize| src[y * width + x];
            let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * tx;
            let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    out
}

/// `basis[k][n]` for the orthonormal DCT-II of length 32, `k < 8`.
fn basis() -> &'static [[f64; GRID]; BLOCK] {
    static TABLE: OnceLock<[[f64; GRID]; BLOCK]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = GRID as f64;
        let mut t = [[0.0; GRID]; BLOCK];
        for (k, row) in t.iter_mut().enumerate() {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for (i, v) in row.iter_mut().enumerate() {
                *v = scale * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n)).cos();
            }
        }
        t
    })
}

/// Low-frequency 8×8 corner of the 2-D DCT of a 32×32 grid, row-major.
fn dct_block(grid: &[f64]) -> [f64; BLOCK * BLOCK] {
    let basis = basis();
    // Transform along x for every row, keeping 8 frequencies.
    let mut rows = [[0.0; BLOCK]; GRID];
    for (y, out) in rows.iter_mut().enumerate() {
        let line = &grid[y * GRID..(y + 1) * GRID];
        for (u, v) in out.iter_mut().enumerate() {
            *v = line.iter().zip(&basis[u]).map(|(a, b)| a * b).sum();
        }
    }
    let mut block = [0.0; BLOCK * BLOCK];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            block[v * BLOCK + u] = (0..GRID).map(|y| rows[y][u] * basis[v][y]).sum();
        }
    }
    block
}
