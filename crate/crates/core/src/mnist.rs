//! IDX file parsing and the glyph store.
//!
//! Glyphs are 28x28 grayscale digit shapes, kept raw (0-255) and grouped by
//! digit class in source-file order. Tinting happens at render time, so the
//! store is the single source of truth for pixel values. A deterministic
//! builtin store is available for running without MNIST files on disk.

use crate::rng::derive_stream;
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const GLYPH_SIDE: usize = 28;
pub const GLYPH_PIXELS: usize = GLYPH_SIDE * GLYPH_SIDE;

const MAGIC_IMAGES: u32 = 2051;
const MAGIC_LABELS: u32 = 2049;

#[derive(Debug, Error)]
pub enum MnistError {
    #[error("bad magic number {0} (expected 2051 for images or 2049 for labels)")]
    BadMagic(u32),
    #[error("truncated file: header declares {expected} bytes of payload, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("bad dimensions {rows}x{cols} (expected 28x28)")]
    BadDimensions { rows: u32, cols: u32 },
    #[error("label {value} at index {index} out of range [0,9]")]
    BadLabel { index: usize, value: u8 },
    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("digit class {0} has zero glyphs")]
    EmptyClass(u8),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One unsigned digit shape.
#[derive(Clone)]
pub struct Glyph {
    pub pixels: [u8; GLYPH_PIXELS],
    pub class_label: u8,
    /// Position in the source file, for provenance.
    pub source_index: u32,
}

impl fmt::Debug for Glyph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Glyph")
            .field("class_label", &self.class_label)
            .field("source_index", &self.source_index)
            .finish_non_exhaustive()
    }
}

/// Parsed payload of a single IDX file.
pub enum IdxContent {
    /// Row-major 28x28 images in file order.
    Images(Vec<[u8; GLYPH_PIXELS]>),
    /// Digit labels in file order.
    Labels(Vec<u8>),
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32, MnistError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(MnistError::TruncatedFile { expected: end, found: bytes.len() });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses raw IDX bytes into images (magic 2051) or labels (magic 2049).
pub fn parse_idx(bytes: &[u8]) -> Result<IdxContent, MnistError> {
    let magic = read_be_u32(bytes, 0)?;
    match magic {
        MAGIC_IMAGES => {
            let count = read_be_u32(bytes, 4)? as usize;
            let rows = read_be_u32(bytes, 8)?;
            let cols = read_be_u32(bytes, 12)?;
            if rows != GLYPH_SIDE as u32 || cols != GLYPH_SIDE as u32 {
                return Err(MnistError::BadDimensions { rows, cols });
            }
            let expected = 16 + count * GLYPH_PIXELS;
            if bytes.len() < expected {
                return Err(MnistError::TruncatedFile { expected, found: bytes.len() });
            }
            let images = bytes[16..expected]
                .chunks_exact(GLYPH_PIXELS)
                .map(|chunk| {
                    let mut px = [0u8; GLYPH_PIXELS];
                    px.copy_from_slice(chunk);
                    px
                })
                .collect();
            Ok(IdxContent::Images(images))
        }
        MAGIC_LABELS => {
            let count = read_be_u32(bytes, 4)? as usize;
            let expected = 8 + count;
            if bytes.len() < expected {
                return Err(MnistError::TruncatedFile { expected, found: bytes.len() });
            }
            let labels = bytes[8..expected].to_vec();
            if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 9) {
                return Err(MnistError::BadLabel { index, value });
            }
            Ok(IdxContent::Labels(labels))
        }
        other => Err(MnistError::BadMagic(other)),
    }
}

/// Glyphs grouped by digit class, in source-file order within each pool.
///
/// Immutable after construction; safe for concurrent reads.
#[derive(Debug, Clone)]
pub struct GlyphStore {
    pools: [Vec<Glyph>; 10],
    provenance: String,
}

/// Places image `i` in the pool named by `labels[i]`, preserving file order.
pub fn build_glyph_store(
    images: Vec<[u8; GLYPH_PIXELS]>,
    labels: Vec<u8>,
    provenance: &str,
) -> Result<GlyphStore, MnistError> {
    if images.len() != labels.len() {
        return Err(MnistError::CountMismatch { images: images.len(), labels: labels.len() });
    }
    let mut pools: [Vec<Glyph>; 10] = Default::default();
    for (i, (pixels, &label)) in images.into_iter().zip(&labels).enumerate() {
        if label > 9 {
            return Err(MnistError::BadLabel { index: i, value: label });
        }
        pools[label as usize].push(Glyph {
            pixels,
            class_label: label,
            source_index: i as u32,
        });
    }
    for (class, pool) in pools.iter().enumerate() {
        if pool.is_empty() {
            return Err(MnistError::EmptyClass(class as u8));
        }
    }
    Ok(GlyphStore { pools, provenance: provenance.to_string() })
}

impl GlyphStore {
    /// Loads and pairs one images file with one labels file.
    pub fn load_pair(images_path: &Path, labels_path: &Path) -> Result<Self, MnistError> {
        let read = |path: &Path| {
            std::fs::read(path).map_err(|source| MnistError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let images = match parse_idx(&read(images_path)?)? {
            IdxContent::Images(images) => images,
            IdxContent::Labels(_) => return Err(MnistError::BadMagic(MAGIC_LABELS)),
        };
        let labels = match parse_idx(&read(labels_path)?)? {
            IdxContent::Labels(labels) => labels,
            IdxContent::Images(_) => return Err(MnistError::BadMagic(MAGIC_IMAGES)),
        };
        let provenance = format!("{}+{}", images_path.display(), labels_path.display());
        build_glyph_store(images, labels, &provenance)
    }

    pub fn pool_len(&self, class: u8) -> usize {
        self.pools[class as usize].len()
    }

    pub fn pool_lens(&self) -> [usize; 10] {
        std::array::from_fn(|c| self.pools[c].len())
    }

    pub fn glyph(&self, class: u8, index: usize) -> Option<&Glyph> {
        self.pools[class as usize].get(index)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn total(&self) -> usize {
        self.pools.iter().map(Vec::len).sum()
    }
}

// 5x7 digit font, one bit per pixel, top row first.
const FONT: [[u8; 7]; 10] = [
    [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110], // 0
    [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110], // 1
    [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111], // 2
    [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110], // 3
    [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010], // 4
    [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110], // 5
    [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110], // 6
    [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000], // 7
    [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110], // 8
    [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100], // 9
];

/// Deterministic glyph store that needs no files on disk.
///
/// Glyph shapes come from a fixed 5x7 font scaled 4x; each glyph gets its
/// own intensity drawn from a stream tagged `builtin-glyphs/<pool_tag>`, so
/// distinct pool tags give disjoint pools.
pub fn builtin_store(pool_tag: &str, per_class: usize) -> GlyphStore {
    assert!(per_class >= 1);
    let mut pools: [Vec<Glyph>; 10] = Default::default();
    for class in 0u8..10 {
        for index in 0..per_class {
            let mut stream =
                derive_stream(0, &format!("builtin-glyphs/{pool_tag}/{class}/{index}"));
            let intensity = 160 + stream.next_index(96) as u8;
            let mut pixels = [0u8; GLYPH_PIXELS];
            let font = &FONT[class as usize];
            for (fr, bits) in font.iter().enumerate() {
                for fc in 0..5 {
                    if bits >> (4 - fc) & 1 == 0 {
                        continue;
                    }
                    for dr in 0..4 {
                        for dc in 0..4 {
                            let row = fr * 4 + dr;
                            let col = 4 + fc * 4 + dc;
                            pixels[row * GLYPH_SIDE + col] = intensity;
                        }
                    }
                }
            }
            pools[class as usize].push(Glyph {
                pixels,
                class_label: class,
                source_index: index as u32,
            });
        }
    }
    GlyphStore { pools, provenance: format!("builtin/{pool_tag}") }
}
