//! Chroma-key segmentation against blue keying fabric.
//!
//! Pixels are converted to CIELAB and keyed on the b channel, which runs
//! from blue (negative) to yellow (positive). Plants and soil sit well above
//! zero, the fabric well below. Binary morphology and plain background
//! subtraction are available as follow-up or alternative steps.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::raster::{Image, Mask, Rgb8};

/// Linear sRGB to CIE XYZ, D65.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// D65 reference white as the XYZ of linear (1, 1, 1), so every gray
/// lands exactly on the achromatic axis.
pub const D65_WHITE: [f64; 3] = [
    SRGB_TO_XYZ[0][0] + SRGB_TO_XYZ[0][1] + SRGB_TO_XYZ[0][2],
    SRGB_TO_XYZ[1][0] + SRGB_TO_XYZ[1][1] + SRGB_TO_XYZ[1][2],
    SRGB_TO_XYZ[2][0] + SRGB_TO_XYZ[2][1] + SRGB_TO_XYZ[2][2],
];

/// Keying threshold separating the blue background from plant and soil.
pub const DEFAULT_B_THRESHOLD: f64 = 0.0;

/// Standard sRGB decoding of one 8-bit channel.
pub fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

static LINEAR: LazyLock<[f64; 256]> = LazyLock::new(|| std::array::from_fn(|i| srgb_to_linear(i as u8)));

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIELAB (L*, a*, b*) of an sRGB color under D65.
pub fn srgb_to_lab(c: Rgb8) -> [f64; 3] {
    let lin = c.map(srgb_to_linear);
    let xyz: [f64; 3] =
        std::array::from_fn(|i| (0..3).map(|j| SRGB_TO_XYZ[i][j] * lin[j]).sum::<f64>());
    let [fx, fy, fz] = std::array::from_fn(|i| lab_f(xyz[i] / D65_WHITE[i]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Per-pixel CIELAB b values.
#[derive(Debug, Clone, PartialEq)]
pub struct BMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl BMap {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// b* alone, bit-identical to `srgb_to_lab(c)[2]` but skipping X.
fn lab_b(c: Rgb8) -> f64 {
    let lut = &*LINEAR;
    let lin = c.map(|v| lut[v as usize]);
    let row = |i: usize| (0..3).map(|j| SRGB_TO_XYZ[i][j] * lin[j]).sum::<f64>();
    200.0 * (lab_f(row(1) / D65_WHITE[1]) - lab_f(row(2) / D65_WHITE[2]))
}

pub fn b_channel(img: &Image, exec: Execution) -> BMap {
    let mut values = vec![0.0; img.pixels().len()];
    let w = (img.width() as usize).max(1);
    exec.for_each_chunk_mut(&mut values, w, |row, out| {
        let src = &img.pixels()[row * w..row * w + out.len()];
        for (o, p) in out.iter_mut().zip(src) {
            *o = lab_b(*p);
        }
    });
    BMap {
        width: img.width(),
        height: img.height(),
        values,
    }
}

/// Foreground where b exceeds `threshold`.
pub fn threshold_keyout(bmap: &BMap, threshold: f64) -> Mask {
    Mask::from_bits(
        bmap.width,
        bmap.height,
        bmap.values.iter().map(|b| *b > threshold).collect(),
    )
    .expect("b map dimensions are consistent")
}

/// Foreground where any channel differs from the background plate by more
/// than `tolerance`.
pub fn background_subtract(img: &Image, background: &Image, tolerance: u8) -> Result<Mask> {
    if img.width() != background.width() || img.height() != background.height() {
        return Err(Error::Shape(format!(
            "image is {}x{} but background is {}x{}",
            img.width(),
            img.height(),
            background.width(),
            background.height()
        )));
    }
    let bits = img
        .pixels()
        .iter()
        .zip(background.pixels())
        .map(|(a, b)| (0..3).any(|i| a[i].abs_diff(b[i]) > tolerance))
        .collect();
    Mask::from_bits(img.width(), img.height(), bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Dilate,
    Erode,
    FillHoles,
}

impl std::str::FromStr for MorphOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dilate" => Ok(MorphOp::Dilate),
            "erode" => Ok(MorphOp::Erode),
            "fill_holes" | "fill" => Ok(MorphOp::FillHoles),
            other => Err(Error::domain(format!("unknown morphology operation '{other}'"))),
        }
    }
}

/// Binary morphology with a `(2r+1) x (2r+1)` square element. Pixels
/// outside the image count as background.
pub fn morphology(mask: &Mask, op: MorphOp, radius: u32) -> Result<Mask> {
    match op {
        MorphOp::Dilate | MorphOp::Erode if radius == 0 => {
            Err(Error::domain("dilate/erode need a kernel radius of at least 1"))
        }
        MorphOp::Dilate => Ok(square_filter(mask, radius, true)),
        MorphOp::Erode => Ok(square_filter(mask, radius, false)),
        MorphOp::FillHoles => Ok(fill_holes(mask)),
    }
}

/// Separable square window: `any` for dilation, `all` for erosion.
fn square_filter(mask: &Mask, radius: u32, dilate: bool) -> Mask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let r = radius as i64;
    let sample = |m: &Mask, x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            false
        } else {
            m.get(x as u32, y as u32)
        }
    };
    let pass = |src: &Mask, horizontal: bool| {
        Mask::from_fn(mask.width(), mask.height(), |x, y| {
            let mut window = (-r..=r).map(|d| {
                let (xx, yy) = if horizontal {
                    (x as i64 + d, y as i64)
                } else {
                    (x as i64, y as i64 + d)
                };
                sample(src, xx, yy)
            });
            if dilate {
                window.any(|v| v)
            } else {
                window.all(|v| v)
            }
        })
    };
    let horizontal = pass(mask, true);
    pass(&horizontal, false)
}

/// Sets every background pixel that is not 4-connected to the border.
fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = Mask::empty(w, h);
    let mut stack = Vec::new();
    for x in 0..w {
        stack.push((x, 0));
        stack.push((x, h.saturating_sub(1)));
    }
    for y in 0..h {
        stack.push((0, y));
        stack.push((w.saturating_sub(1), y));
    }
    while let Some((x, y)) = stack.pop() {
        if w == 0 || h == 0 || mask.get(x, y) || outside.get(x, y) {
            continue;
        }
        outside.set(x, y, true);
        if x > 0 {
            stack.push((x - 1, y));
        }
        if x + 1 < w {
            stack.push((x + 1, y));
        }
        if y > 0 {
            stack.push((x, y - 1));
        }
        if y + 1 < h {
            stack.push((x, y + 1));
        }
    }
    Mask::from_fn(w, h, |x, y| !outside.get(x, y))
}

/// Mean filter over a `(2r+1)` square, clamped at the borders. Meant for
/// camera images; rendered scenes are noiseless and skip it.
pub fn box_blur(img: &Image, radius: u32) -> Image {
    if radius == 0 {
        return img.clone();
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let r = radius as i64;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0u32; 3];
            let mut n = 0u32;
            for yy in (y - r).max(0)..=(y + r).min(h - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w - 1) {
                    let p = img.get(xx as u32, yy as u32);
                    for c in 0..3 {
                        acc[c] += p[c] as u32;
                    }
                    n += 1;
                }
            }
            out.set(x as u32, y as u32, acc.map(|a| ((a + n / 2) / n) as u8));
        }
    }
    out
}

/// Summary of a segmentation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub width: u32,
    pub height: u32,
    pub foreground_pixels: usize,
    pub foreground_fraction: f64,
}

impl From<&Mask> for MaskStats {
    fn from(m: &Mask) -> Self {
        Self {
            width: m.width(),
            height: m.height(),
            foreground_pixels: m.count(),
            foreground_fraction: m.fraction(),
        }
    }
}
