//! Core rasters: color frames, binary masks, flow fields, and sequences.
//!
//! Frames hold interleaved RGB samples in `[0, 1]`. Masks are strictly
//! binary with `1` marking hole (missing) pixels and `0` valid pixels.
//! Flow fields store per-pixel displacements in pixel units plus a
//! validity flag. All types are immutable in normal pipeline use and
//! safe to share across worker threads.

use crate::error::{Error, Result};

/// Number of color channels in a [`Frame`].
pub const CHANNELS: usize = 3;

/// H×W×3 color raster with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    /// Creates a frame filled with a constant gray value.
    pub fn filled(width: usize, height: usize, value: f32) -> Frame {
        assert!((0.0..=1.0).contains(&value), "fill value out of [0,1]");
        Frame {
            width,
            height,
            data: vec![value; width * height * CHANNELS],
        }
    }

    /// Builds a frame from interleaved RGB data, validating range and finiteness.
    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Frame> {
        if data.len() != width * height * CHANNELS {
            return Err(Error::InvalidParameter(format!(
                "frame data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                CHANNELS
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidParameter(
                "frame samples must be finite and within [0,1]".into(),
            ));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * CHANNELS + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; CHANNELS] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, p: [f32; CHANNELS]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i] = p[0];
        self.data[i + 1] = p[1];
        self.data[i + 2] = p[2];
    }

    /// Generates a frame from a per-pixel closure returning RGB in `[0,1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; CHANNELS],
    ) -> Frame {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                debug_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
                data.extend_from_slice(&p);
            }
        }
        Frame {
            width,
            height,
            data,
        }
    }

}

/// H×W binary raster; `1` marks hole pixels, `0` valid pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            data: vec![1; width * height],
        }
    }

    /// Builds a mask from raw bytes; any nonzero byte becomes a hole pixel.
    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Result<Mask> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "mask data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        let data = data.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Mask {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Mask {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, hole: bool) {
        self.data[y * self.width + x] = u8::from(hole);
    }

    /// Number of hole pixels.
    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn union(&self, other: &Mask) -> Mask {
        debug_assert_eq!(self.dims(), other.dims());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a | b)
            .collect();
        Mask {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn intersect(&self, other: &Mask) -> Mask {
        debug_assert_eq!(self.dims(), other.dims());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a & b)
            .collect();
        Mask {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Set difference: pixels in `self` but not in `other`.
    pub fn subtract(&self, other: &Mask) -> Mask {
        debug_assert_eq!(self.dims(), other.dims());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a & (1 - b))
            .collect();
        Mask {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// True when every hole pixel of `self` is also a hole pixel of `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(&a, &b)| a == 0 || b == 1)
    }

    /// Iterates `(x, y)` over hole pixels in row-major order.
    pub fn iter_holes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub(crate) fn same_geometry_frame(&self, frame: &Frame) -> bool {
        self.width == frame.width() && self.height == frame.height()
    }
}

/// H×W×2 displacement raster in pixel units with per-pixel validity.
///
/// `u` is the horizontal and `v` the vertical displacement. Samples with
/// `valid = 0` carry no meaning and must not be consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub valid: Vec<u8>,
}

impl FlowField {
    /// All-zero flow, fully valid.
    pub fn zero(width: usize, height: usize) -> FlowField {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
            valid: vec![1; width * height],
        }
    }

    /// Constant displacement, fully valid.
    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> FlowField {
        FlowField {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
            valid: vec![1; width * height],
        }
    }

    pub fn from_components(
        width: usize,
        height: usize,
        u: Vec<f32>,
        v: Vec<f32>,
    ) -> Result<FlowField> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "flow component length {}/{} does not match {}x{}",
                u.len(),
                v.len(),
                width,
                height
            )));
        }
        Ok(FlowField {
            width,
            height,
            u,
            v,
            valid: vec![1; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, u: f32, v: f32) {
        let i = y * self.width + x;
        self.u[i] = u;
        self.v[i] = v;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x] != 0
    }

    #[inline]
    pub fn set_valid(&mut self, x: usize, y: usize, valid: bool) {
        self.valid[y * self.width + x] = u8::from(valid);
    }

}

/// Ordered frames plus their masks, all of equal geometry.
#[derive(Debug, Clone)]
pub struct Sequence {
    frames: Vec<Frame>,
    masks: Vec<Mask>,
}

impl Sequence {
    pub fn new(frames: Vec<Frame>, masks: Vec<Mask>) -> Result<Sequence> {
        if frames.len() != masks.len() {
            return Err(Error::CountMismatch {
                frames: frames.len(),
                masks: masks.len(),
            });
        }
        if frames.is_empty() {
            return Err(Error::InvalidParameter(
                "sequence must contain at least one frame".into(),
            ));
        }
        let (w, h) = frames[0].dims();
        for (i, f) in frames.iter().enumerate() {
            if f.dims() != (w, h) {
                return Err(Error::geometry(format!("frame {i}"), (w, h), f.dims()));
            }
        }
        for (i, m) in masks.iter().enumerate() {
            if m.dims() != (w, h) {
                return Err(Error::geometry(format!("mask {i}"), (w, h), m.dims()));
            }
        }
        Ok(Sequence { frames, masks })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t]
    }

    pub fn mask(&self, t: usize) -> &Mask {
        &self.masks[t]
    }
}
