//! Three-digit colored scenes: sampling, rendering and text description.
//!
//! A scene holds one signed colored digit at each of the three fixed
//! positions. Rendering tints the raw glyph and pastes it at a fixed,
//! non-overlapping anchor on a black 56x56 canvas; images serialize as
//! binary PPM (P6) for bit-exactness.

use crate::mnist::{GlyphStore, GLYPH_SIDE};
use crate::rng::PrngStream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const IMAGE_SIDE: usize = 56;
pub const IMAGE_BYTES: usize = IMAGE_SIDE * IMAGE_SIDE * 3;
pub const NUM_COLORS: usize = 6;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("magnitude {0} has all {NUM_COLORS} colors held out; sampler cannot terminate")]
    HoldoutExhausted(u8),
    #[error("palette must contain 6 distinct colors")]
    PaletteNotDistinct,
    #[error("glyph index {index} out of range for class {class} (pool size {pool})")]
    GlyphOutOfRange { class: u8, index: usize, pool: usize },
}

/// One of the three fixed digit positions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Left,
    Right,
    Bottom,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Left, Position::Right, Position::Bottom];

    /// Top-left (row, col) paste anchor of this digit's 28x28 box.
    pub fn anchor(self) -> (usize, usize) {
        match self {
            Position::Left => (0, 0),
            Position::Right => (0, 28),
            Position::Bottom => (28, 14),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Position::Left => "left",
            Position::Right => "right",
            Position::Bottom => "bottom",
        }
    }
}

pub type Rgb = [u8; 3];

/// Six scene colors: indices 0-2 positive, 3-5 negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub positive_colors: [Rgb; 3],
    pub negative_colors: [Rgb; 3],
}

impl Palette {
    pub fn new(positive_colors: [Rgb; 3], negative_colors: [Rgb; 3]) -> Result<Self, SceneError> {
        let palette = Self { positive_colors, negative_colors };
        let mut seen = std::collections::HashSet::new();
        for i in 0..NUM_COLORS {
            seen.insert(palette.color(i as u8));
        }
        if seen.len() != NUM_COLORS {
            return Err(SceneError::PaletteNotDistinct);
        }
        Ok(palette)
    }

    pub fn color(&self, color_index: u8) -> Rgb {
        let i = color_index as usize;
        if i < 3 {
            self.positive_colors[i]
        } else {
            self.negative_colors[i - 3]
        }
    }
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            positive_colors: [[0, 255, 0], [0, 128, 255], [0, 255, 255]],
            negative_colors: [[255, 0, 0], [255, 0, 255], [255, 128, 0]],
        }
    }
}

/// Default text-mode names matching the default palette order.
pub fn default_color_names() -> [String; NUM_COLORS] {
    ["green", "blue", "cyan", "red", "magenta", "orange"].map(str::to_string)
}

/// One digit: magnitude, color (which carries the sign) and glyph choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DigitSpec {
    pub position: Position,
    pub magnitude: u8,
    pub color_index: u8,
    pub glyph_index: u32,
}

impl DigitSpec {
    /// Signed value: positive colors (0-2) keep the magnitude, negative
    /// colors (3-5) negate it. Magnitude 0 with a negative color is 0.
    pub fn signed_value(&self) -> i64 {
        if self.color_index < 3 {
            i64::from(self.magnitude)
        } else {
            -i64::from(self.magnitude)
        }
    }
}

/// Exactly one digit per position, stored in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scene {
    digits: [DigitSpec; 3],
}

impl Scene {
    /// Builds a scene from per-position digits; positions are normalized to
    /// canonical order and must be pairwise distinct.
    pub fn new(digits: [DigitSpec; 3]) -> Option<Self> {
        let mut slots: [Option<DigitSpec>; 3] = [None; 3];
        for d in digits {
            let slot = &mut slots[d.position.index()];
            if slot.is_some() {
                return None;
            }
            *slot = Some(d);
        }
        Some(Scene { digits: [slots[0]?, slots[1]?, slots[2]?] })
    }

    pub fn digit(&self, position: Position) -> &DigitSpec {
        &self.digits[position.index()]
    }

    pub fn digits(&self) -> &[DigitSpec; 3] {
        &self.digits
    }

    pub fn value(&self, position: Position) -> i64 {
        self.digit(position).signed_value()
    }

    pub fn values(&self) -> [i64; 3] {
        [self.value(Position::Left), self.value(Position::Right), self.value(Position::Bottom)]
    }
}

/// Scene constructed directly from three signed values, for tests and
/// value-level tooling. Positive values get color 0, negative color 3.
pub fn scene_from_values(values: [i64; 3]) -> Scene {
    let digits = std::array::from_fn(|i| {
        let v = values[i];
        assert!((-9..=9).contains(&v));
        DigitSpec {
            position: Position::ALL[i],
            magnitude: v.unsigned_abs() as u8,
            color_index: if v < 0 { 3 } else { 0 },
            glyph_index: 0,
        }
    });
    Scene { digits }
}

/// Samples a scene with uniform magnitudes, colors restricted by per-pair
/// holdouts and glyph indices uniform over the class pool.
///
/// Draw order is fixed: positions left, right, bottom; within a digit:
/// magnitude, color, glyph. One stream draw each.
pub fn sample_scene(
    rng: &mut PrngStream,
    holdouts: &[(u8, u8)],
    glyphs: &GlyphStore,
) -> Result<Scene, SceneError> {
    for magnitude in 0..10u8 {
        let held = holdouts.iter().filter(|(m, _)| *m == magnitude).count();
        if held >= NUM_COLORS {
            return Err(SceneError::HoldoutExhausted(magnitude));
        }
    }
    let digits = Position::ALL.map(|position| {
        let magnitude = rng.next_index(10) as u8;
        let legal: Vec<u8> = (0..NUM_COLORS as u8)
            .filter(|&c| !holdouts.contains(&(magnitude, c)))
            .collect();
        let color_index = legal[rng.next_index(legal.len())];
        let glyph_index = rng.next_index(glyphs.pool_len(magnitude)) as u32;
        DigitSpec { position, magnitude, color_index, glyph_index }
    });
    Ok(Scene { digits })
}

/// A 56x56 RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    bytes: Vec<u8>,
}

impl RgbImage {
    pub fn black() -> Self {
        RgbImage { bytes: vec![0; IMAGE_BYTES] }
    }

    pub fn pixel(&self, row: usize, col: usize) -> Rgb {
        let at = (row * IMAGE_SIDE + col) * 3;
        [self.bytes[at], self.bytes[at + 1], self.bytes[at + 2]]
    }

    fn set_pixel(&mut self, row: usize, col: usize, rgb: Rgb) {
        let at = (row * IMAGE_SIDE + col) * 3;
        self.bytes[at..at + 3].copy_from_slice(&rgb);
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Binary PPM (P6, maxval 255) encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n").into_bytes();
        out.extend_from_slice(&self.bytes);
        out
    }
}

/// Rounded tint of one gray level by one color channel.
fn tint(gray: u8, channel: u8) -> u8 {
    ((u32::from(gray) * u32::from(channel) + 127) / 255) as u8
}

/// Renders the scene onto a black canvas.
///
/// Each glyph pixel becomes `round(gray/255 * color)` per channel; anchor
/// boxes never overlap, so paste order is irrelevant.
pub fn render(
    scene: &Scene,
    glyphs: &GlyphStore,
    palette: &Palette,
) -> Result<RgbImage, SceneError> {
    let mut image = RgbImage::black();
    for digit in scene.digits() {
        let glyph = glyphs
            .glyph(digit.magnitude, digit.glyph_index as usize)
            .ok_or(SceneError::GlyphOutOfRange {
                class: digit.magnitude,
                index: digit.glyph_index as usize,
                pool: glyphs.pool_len(digit.magnitude),
            })?;
        let color = palette.color(digit.color_index);
        let (row0, col0) = digit.position.anchor();
        for r in 0..GLYPH_SIDE {
            for c in 0..GLYPH_SIDE {
                let gray = glyph.pixels[r * GLYPH_SIDE + c];
                if gray == 0 {
                    continue;
                }
                image.set_pixel(row0 + r, col0 + c, color.map(|ch| tint(gray, ch)));
            }
        }
    }
    Ok(image)
}

const DIGIT_WORDS: [&str; 10] =
    ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

/// Text-modality description of a scene and its program result.
///
/// Digit words are unsigned; the sign is carried by the color name. The
/// result prints as a signed decimal.
pub fn describe(scene: &Scene, color_names: &[String; NUM_COLORS], result: i64) -> String {
    let part = |position: Position| {
        let d = scene.digit(position);
        format!(
            "{} {}",
            color_names[d.color_index as usize], DIGIT_WORDS[d.magnitude as usize]
        )
    };
    format!(
        "There is a {} on the left, a {} on the right, and a {} at the bottom. The result is {}.",
        part(Position::Left),
        part(Position::Right),
        part(Position::Bottom),
        result
    )
}
