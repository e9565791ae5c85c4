//! Minimal RGBA8 raster.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::PixelDims;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("expected {expected} bytes for a {width}x{height} RGBA image, got {got}")]
    BufferSize { width: u32, height: u32, expected: usize, got: usize },
    #[error("image is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch { want_w: u32, want_h: u32, got_w: u32, got_h: u32 },
}

pub type Rgba = [u8; 4];

/// Row-major RGBA8 pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    dims: PixelDims,
    data: Vec<u8>,
}

impl Raster {
    pub fn filled(dims: PixelDims, px: Rgba) -> Self {
        let n = dims.width() as usize * dims.height() as usize;
        let mut data = vec![0u8; n * 4];
        for chunk in data.chunks_exact_mut(4) {
            chunk.copy_from_slice(&px);
        }
        Self { dims, data }
    }

    pub fn from_rgba(dims: PixelDims, data: Vec<u8>) -> Result<Self, RasterError> {
        let expected = dims.width() as usize * dims.height() as usize * 4;
        if data.len() != expected {
            return Err(RasterError::BufferSize {
                width: dims.width(),
                height: dims.height(),
                expected,
                got: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: PixelDims, mut f: impl FnMut(u32, u32) -> Rgba) -> Self {
        let mut data = Vec::with_capacity(dims.width() as usize * dims.height() as usize * 4);
        for y in 0..dims.height() {
            for x in 0..dims.width() {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> PixelDims {
        self.dims
    }

    pub fn width(&self) -> u32 {
        self.dims.width()
    }

    pub fn height(&self) -> u32 {
        self.dims.height()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.dims.width() as usize + x as usize) * 4
    }

    /// Panics when out of bounds.
    pub fn get(&self, x: u32, y: u32) -> Rgba {
        assert!(x < self.width() && y < self.height(), "pixel ({x}, {y}) out of bounds");
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2], self.data[o + 3]]
    }

    pub fn put(&mut self, x: u32, y: u32, px: Rgba) {
        assert!(x < self.width() && y < self.height(), "pixel ({x}, {y}) out of bounds");
        let o = self.offset(x, y);
        self.data[o..o + 4].copy_from_slice(&px);
    }

    /// Copy of the `width` x `height` block whose top-left corner is
    /// `(x0, y0)`. The caller guarantees the block is in bounds.
    pub(crate) fn sub_image(&self, x0: u32, y0: u32, width: u32, height: u32) -> Raster {
        let row_bytes = width as usize * 4;
        let mut data = Vec::with_capacity(row_bytes * height as usize);
        for y in y0..y0 + height {
            let o = self.offset(x0, y);
            data.extend_from_slice(&self.data[o..o + row_bytes]);
        }
        Raster {
            dims: PixelDims::new(width, height).expect("sub image is non-empty"),
            data,
        }
    }

    /// Nearest-neighbour resample to `dims`.
    pub fn resize_nearest(&self, dims: PixelDims) -> Raster {
        if dims == self.dims {
            return self.clone();
        }
        let (sw, sh) = (self.width() as u64, self.height() as u64);
        let (dw, dh) = (dims.width() as u64, dims.height() as u64);
        Raster::from_fn(dims, |x, y| {
            // sample the source pixel under the destination pixel centre
            let sx = ((2 * x as u64 + 1) * sw / (2 * dw)) as u32;
            let sy = ((2 * y as u64 + 1) * sh / (2 * dh)) as u32;
            self.get(sx, sy)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(w: u32, h: u32) -> PixelDims {
        PixelDims::new(w, h).unwrap()
    }

    #[test]
    fn buffer_size_checked() {
        assert!(Raster::from_rgba(dims(2, 2), vec![0; 15]).is_err());
        assert!(Raster::from_rgba(dims(2, 2), vec![0; 16]).is_ok());
    }

    #[test]
    fn nearest_upscale_repeats_pixels() {
        let src = Raster::from_fn(dims(2, 1), |x, _| [x as u8 * 100, 0, 0, 255]);
        let up = src.resize_nearest(dims(4, 2));
        let row: Vec<u8> = (0..4).map(|x| up.get(x, 1)[0]).collect();
        assert_eq!(row, [0, 0, 100, 100]);
    }

    #[test]
    fn nearest_downscale_samples_centres() {
        let src = Raster::from_fn(dims(4, 4), |x, y| [x as u8, y as u8, 0, 255]);
        let down = src.resize_nearest(dims(2, 2));
        assert_eq!(down.get(0, 0), [1, 1, 0, 255]);
        assert_eq!(down.get(1, 1), [3, 3, 0, 255]);
    }
}
