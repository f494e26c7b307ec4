//! RGB float rasters and the resampling primitives shared by patch
//! extraction and augmentation.
//!
//! Sample positions are continuous pixel coordinates in which the centre of
//! pixel `(i, j)` sits at `(i + 0.5, j + 0.5)`.

use std::io::{Read, Write};

use thiserror::Error;

pub const CHANNELS: usize = 3;

/// Magic bytes opening a tensor file.
pub const TENSOR_MAGIC: [u8; 4] = *b"SPT1";

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("buffer of {len} samples does not match {width}x{height}x3")]
    Shape { width: u32, height: u32, len: usize },
    #[error("image has zero width or height")]
    Empty,
    #[error("sample is not finite")]
    NonFinite,
    #[error("image decode failed: {0}")]
    Decode(#[from] image::ImageError),
    #[error("tensor file: {0}")]
    Tensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major, interleaved RGB samples. Decoded 8-bit images hold values in
/// `[0, 1]`; normalized patches hold arbitrary finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        if data.len() != width as usize * height as usize * CHANNELS {
            return Err(RasterError::Shape {
                width,
                height,
                len: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(RasterError::NonFinite);
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Self {
        let n = width as usize * height as usize;
        let data = (0..n).flat_map(|_| rgb).collect();
        Self { width, height, data }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Bilinear sample at a continuous position, clamping to the edge.
    pub fn sample_clamped(&self, x: f64, y: f64) -> [f32; 3] {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as u32;
        let y0 = fy.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let (a, b, c, d) = (
            self.pixel(x0, y0),
            self.pixel(x1, y0),
            self.pixel(x0, y1),
            self.pixel(x1, y1),
        );
        std::array::from_fn(|k| {
            let top = a[k] as f64 * (1.0 - tx) + b[k] as f64 * tx;
            let bottom = c[k] as f64 * (1.0 - tx) + d[k] as f64 * tx;
            (top * (1.0 - ty) + bottom * ty) as f32
        })
    }

    /// Bilinear sample treating everything outside the raster as `fill`.
    pub fn sample_filled(&self, x: f64, y: f64, fill: [f32; 3]) -> [f32; 3] {
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let get = |ix: f64, iy: f64| -> [f32; 3] {
            if ix < 0.0 || iy < 0.0 || ix >= self.width as f64 || iy >= self.height as f64 {
                fill
            } else {
                self.pixel(ix as u32, iy as u32)
            }
        };
        let (a, b, c, d) = (
            get(x0, y0),
            get(x0 + 1.0, y0),
            get(x0, y0 + 1.0),
            get(x0 + 1.0, y0 + 1.0),
        );
        std::array::from_fn(|k| {
            let top = a[k] as f64 * (1.0 - tx) + b[k] as f64 * tx;
            let bottom = c[k] as f64 * (1.0 - tx) + d[k] as f64 * tx;
            (top * (1.0 - ty) + bottom * ty) as f32
        })
    }

    /// Copies the pixel rectangle `[x0, x0 + w) × [y0, y0 + h)`.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<Self, RasterError> {
        if w == 0 || h == 0 {
            return Err(RasterError::Empty);
        }
        if x0 + w > self.width || y0 + h > self.height {
            return Err(RasterError::Shape {
                width: w,
                height: h,
                len: self.data.len(),
            });
        }
        let mut data = Vec::with_capacity(w as usize * h as usize * CHANNELS);
        for y in y0..y0 + h {
            let start = self.offset(x0, y);
            data.extend_from_slice(&self.data[start..start + w as usize * CHANNELS]);
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    /// Bilinear resize with half-pixel alignment and edge clamping.
    pub fn resize(&self, width: u32, height: u32) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Self::from_fn(width, height, |u, v| {
            self.sample_clamped((u as f64 + 0.5) * sx, (v as f64 + 0.5) * sy)
        })
    }

    /// Mirrors the raster about its vertical axis.
    pub fn hflip(&self) -> Self {
        let w = self.width;
        Self::from_fn(w, self.height, |x, y| self.pixel(w - 1 - x, y))
    }

    /// Rotates about the raster centre by `degrees` (counter-clockwise on
    /// screen), bilinear resampling, `fill` outside the source.
    pub fn rotate(&self, degrees: f64, fill: [f32; 3]) -> Self {
        if degrees == 0.0 {
            return self.clone();
        }
        let (s, c) = degrees.to_radians().sin_cos();
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        Self::from_fn(self.width, self.height, |u, v| {
            let dx = u as f64 + 0.5 - cx;
            let dy = v as f64 + 0.5 - cy;
            // Inverse map. With y pointing down a counter-clockwise turn on
            // screen is a negative angle in the usual y-up convention.
            let sx = c * dx - s * dy + cx;
            let sy = s * dx + c * dy + cy;
            self.sample_filled(sx, sy, fill)
        })
    }

    /// Decodes PNG/JPEG bytes; 8-bit samples are divided by 255.
    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let rgb = image::load_from_memory(bytes)?.to_rgb8();
        let (width, height) = rgb.dimensions();
        let data = rgb.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
        Self::new(width, height, data)
    }

    /// Encodes as 8-bit RGB PNG, clamping to `[0, 1]` and rounding.
    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let raw: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let img = image::RgbImage::from_raw(self.width, self.height, raw).ok_or(RasterError::Empty)?;
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Tensor layout: 16-byte header (`SPT1`, then width, height, channels
    /// as u32 little-endian) followed by `width·height·3` f32 little-endian
    /// samples in row-major, channel-interleaved order.
    pub fn write_tensor<W: Write>(&self, mut w: W) -> Result<(), RasterError> {
        w.write_all(&TENSOR_MAGIC)?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        w.write_all(&(CHANNELS as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_tensor<R: Read>(mut r: R) -> Result<Self, RasterError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if header[..4] != TENSOR_MAGIC {
            return Err(RasterError::Tensor("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes([header[i], header[i + 1], header[i + 2], header[i + 3]]);
        let (width, height, channels) = (word(4), word(8), word(12));
        if channels as usize != CHANNELS {
            return Err(RasterError::Tensor(format!("expected 3 channels, got {channels}")));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        let data: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(width, height, data)
    }
}
