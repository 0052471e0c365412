//! Adaptive average pooling: any input grid size down (or up) to a fixed
//! output size, averaging over bins whose edges follow the floor/ceil rule.
//! Bin `i` of an `H`-row input pooled to `out_h` rows covers input rows
//! `[floor(i*H/out_h), ceil((i+1)*H/out_h))`; columns work the same way.
//! Neighboring bins overlap when the sizes do not divide evenly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense `height x width x channels` grid of finite values, stored row-major
/// in double precision. Accumulation always happens in f64 no matter what
/// precision the values arrived in.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidInput(format!(
                "grid dimensions must be at least 1, got {height}x{width}x{channels}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::InvalidInput("grid dimensions overflow".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} values for {height}x{width}x{channels}, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite grid value {bad}")));
        }
        Ok(FeatureGrid { height, width, channels, values })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        let len = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::InvalidInput("grid dimensions overflow".into()))?;
        FeatureGrid::new(height, width, channels, vec![value; len])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        self.values[(row * self.width + col) * self.channels + channel]
    }
}

/// Input rows covered by output row bin `i`.
fn bin_range(i: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let start = i * in_len / out_len;
    let end = ((i + 1) * in_len).div_ceil(out_len);
    (start, end)
}

/// Pools `grid` to `out_h x out_w`, channel count unchanged. Each output
/// cell is the plain arithmetic mean of its bin, summed row-major in f64.
pub fn adaptive_avg_pool(grid: &FeatureGrid, out_h: usize, out_w: usize) -> Result<FeatureGrid> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(format!(
            "output dimensions must be at least 1, got {out_h}x{out_w}"
        )));
    }
    let (h, w, c) = (grid.height, grid.width, grid.channels);
    let mut values = vec![0.0; out_h * out_w * c];
    for i in 0..out_h {
        let (r0, r1) = bin_range(i, h, out_h);
        for j in 0..out_w {
            let (c0, c1) = bin_range(j, w, out_w);
            let count = ((r1 - r0) * (c1 - c0)) as f64;
            for ch in 0..c {
                let mut sum = 0.0f64;
                for r in r0..r1 {
                    for col in c0..c1 {
                        sum += grid.get(r, col, ch);
                    }
                }
                values[(i * out_w + j) * c + ch] = sum / count;
            }
        }
    }
    FeatureGrid::new(out_h, out_w, c, values)
}

/// Default output size for pair-crop feature maps.
pub const POOL_OUT: (usize, usize) = (7, 7);

// ===== Binary sidecar format =====
//
// Little-endian: three u32 dims (height, width, channels), then
// height*width*channels f32 values row-major. The bridge for feature grids
// produced outside this toolkit.

/// Writes the grid in the sidecar layout. Values are stored as f32; the
/// in-memory f64 precision beyond that is not preserved.
pub fn write_feature_grid(grid: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    for dim in [grid.height, grid.width, grid.channels] {
        let dim = u32::try_from(dim)
            .map_err(|_| Error::format(path.display().to_string(), format!("dimension {dim} exceeds u32")))?;
        out.write_all(&dim.to_le_bytes())?;
    }
    for v in &grid.values {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a sidecar file back into a grid. The byte length must match the
/// header exactly; non-finite stored values are rejected.
pub fn read_feature_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(Error::format(
            path.display().to_string(),
            format!("file too short for a 12-byte header: {} bytes", bytes.len()),
        ));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| Error::format(path.display().to_string(), "dimensions overflow".to_string()))?;
    let expected_len = 12 + count * 4;
    if bytes.len() != expected_len {
        return Err(Error::format(
            path.display().to_string(),
            format!("header says {h}x{w}x{c} ({expected_len} bytes), file has {}", bytes.len()),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let off = 12 + i * 4;
        values.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64);
    }
    FeatureGrid::new(h, w, c, values).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}
