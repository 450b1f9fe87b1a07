//! Label-image decoding, class-map caching and result overlays.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageFormat, Luma, Rgb};

pub use image::RgbImage;

use crate::error::{Error, Result};
use crate::geometry::EllipseParams;
use crate::scoring::{LabeledImage, PixelClass};

/// Reference colors of the four weighted classes and a per-channel
/// matching tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassPalette {
    pub red: [u8; 3],
    pub green: [u8; 3],
    pub grey: [u8; 3],
    pub black: [u8; 3],
    pub tolerance: u8,
}

impl Default for ClassPalette {
    fn default() -> Self {
        ClassPalette {
            red: [255, 0, 0],
            green: [0, 255, 0],
            grey: [128, 128, 128],
            black: [0, 0, 0],
            tolerance: 8,
        }
    }
}

impl ClassPalette {
    pub fn entries(&self) -> [(PixelClass, [u8; 3]); 4] {
        [
            (PixelClass::Red, self.red),
            (PixelClass::Green, self.green),
            (PixelClass::Grey, self.grey),
            (PixelClass::Black, self.black),
        ]
    }

    pub fn color(&self, class: PixelClass) -> Option<[u8; 3]> {
        self.entries()
            .into_iter()
            .find(|(c, _)| *c == class)
            .map(|(_, rgb)| rgb)
    }

    /// Every pair of reference colors must differ by more than twice the
    /// tolerance on some channel, so no pixel can match two classes.
    pub fn validate(&self) -> Result<()> {
        let entries = self.entries();
        let limit = 2 * self.tolerance as i32;
        for (i, (ci, a)) in entries.iter().enumerate() {
            for (cj, b) in &entries[i + 1..] {
                let separated = a
                    .iter()
                    .zip(b)
                    .any(|(&p, &q)| (p as i32 - q as i32).abs() > limit);
                if !separated {
                    return Err(Error::Config(format!(
                        "palette colors for {ci:?} {a:?} and {cj:?} {b:?} are within 2x tolerance {}",
                        self.tolerance
                    )));
                }
            }
        }
        Ok(())
    }

    fn matches(&self, reference: [u8; 3], pixel: [u8; 3]) -> bool {
        reference
            .iter()
            .zip(pixel)
            .all(|(&r, p)| r.abs_diff(p) <= self.tolerance)
    }

    /// Class of a single pixel; `Other` when nothing matches.
    pub fn classify(
        &self,
        pixel: [u8; 3],
    ) -> std::result::Result<PixelClass, (PixelClass, PixelClass)> {
        let mut found = None;
        for (class, reference) in self.entries() {
            if self.matches(reference, pixel) {
                if let Some(first) = found {
                    return Err((first, class));
                }
                found = Some(class);
            }
        }
        Ok(found.unwrap_or(PixelClass::Other))
    }
}

/// Maps every raster pixel to the palette class it matches.
pub fn decode_label_image(raster: &RgbImage, palette: &ClassPalette) -> Result<LabeledImage> {
    let (w, h) = raster.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::LabelImage("raster is empty".into()));
    }
    let mut labels = Vec::with_capacity(w as usize * h as usize);
    for (x, y, px) in raster.enumerate_pixels() {
        let class = palette
            .classify(px.0)
            .map_err(|(first, second)| Error::AmbiguousPixel {
                x,
                y,
                first,
                second,
            })?;
        labels.push(class);
    }
    LabeledImage::new(w as usize, h as usize, labels)
}

/// Paints a labeled image back into palette colors; `Other` becomes `other`.
pub fn encode_label_image(
    image: &LabeledImage,
    palette: &ClassPalette,
    other: [u8; 3],
) -> RgbImage {
    RgbImage::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        let class = image.get(x as usize, y as usize);
        Rgb(palette.color(class).unwrap_or(other))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlineStyle {
    /// Half-width of the recolored band `|E − 1| ≤ epsilon`.
    pub epsilon: f64,
    pub color: [u8; 3],
}

impl Default for OutlineStyle {
    fn default() -> Self {
        OutlineStyle {
            epsilon: 0.02,
            color: [0, 0, 255],
        }
    }
}

impl OutlineStyle {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "outline epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Copy of `raster` with the ellipse outline band `E ∈ [1−ε, 1+ε]` painted.
pub fn render_overlay(raster: &RgbImage, params: &EllipseParams, style: &OutlineStyle) -> RgbImage {
    let mut out = raster.clone();
    let (w, h) = raster.dimensions();
    if w == 0 || h == 0 {
        return out;
    }
    // E ≤ 1+ε is the interior of the ellipse with axes scaled by √(1+ε)
    let grow = (1.0 + style.epsilon).sqrt();
    let outer = EllipseParams {
        a: params.a * grow,
        b: params.b * grow,
        ..*params
    };
    let bbox = outer.shape().bounding_box();
    let x0 = (bbox.x_lo.floor() - 1.0).max(0.0);
    let x1 = (bbox.x_hi.ceil() + 1.0).min(w as f64 - 1.0);
    let y0 = (bbox.y_lo.floor() - 1.0).max(0.0);
    let y1 = (bbox.y_hi.ceil() + 1.0).min(h as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return out;
    }
    let shape = params.shape();
    let (lo, hi) = (1.0 - style.epsilon, 1.0 + style.epsilon);
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let e = shape.value(x as f64, y as f64);
            if e >= lo && e <= hi {
                out.put_pixel(x, y, Rgb(style.color));
            }
        }
    }
    out
}

/// Loads a PNG or binary PPM as 8-bit RGB, dropping any alpha channel.
pub fn load_raster(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    Ok(img.to_rgb8())
}

pub fn save_png(raster: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    raster
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

/// Byte stored for each class in a cached class map.
pub fn class_code(class: PixelClass) -> u8 {
    match class {
        PixelClass::Black => 0,
        PixelClass::Red => 1,
        PixelClass::Green => 2,
        PixelClass::Grey => 3,
        PixelClass::Other => 255,
    }
}

pub fn class_from_code(code: u8) -> Option<PixelClass> {
    match code {
        0 => Some(PixelClass::Black),
        1 => Some(PixelClass::Red),
        2 => Some(PixelClass::Green),
        3 => Some(PixelClass::Grey),
        255 => Some(PixelClass::Other),
        _ => None,
    }
}

/// Writes the label grid as a binary PGM (P5) of class codes.
pub fn save_class_map(image: &LabeledImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let gray = GrayImage::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        Luma([class_code(image.get(x as usize, y as usize))])
    });
    write_pnm(
        path,
        gray.as_raw(),
        gray.dimensions(),
        PnmSubtype::Graymap(SampleEncoding::Binary),
    )
}

/// Writes a binary PPM (P6).
pub fn save_ppm(raster: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    write_pnm(
        path.as_ref(),
        raster.as_raw(),
        raster.dimensions(),
        PnmSubtype::Pixmap(SampleEncoding::Binary),
    )
}

fn write_pnm(path: &Path, data: &[u8], (w, h): (u32, u32), subtype: PnmSubtype) -> Result<()> {
    let color = match subtype {
        PnmSubtype::Graymap(_) => ExtendedColorType::L8,
        _ => ExtendedColorType::Rgb8,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    PnmEncoder::new(&mut out)
        .with_subtype(subtype)
        .write_image(data, w, h, color)
        .map_err(|e| Error::image(path, e))?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

pub fn load_class_map(path: impl AsRef<Path>) -> Result<LabeledImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::image(path, e))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::LabelImage(format!(
                "{}: class map must be 8-bit grayscale, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = gray.dimensions();
    let mut labels = Vec::with_capacity(w as usize * h as usize);
    for (x, y, px) in gray.enumerate_pixels() {
        let class = class_from_code(px.0[0]).ok_or_else(|| {
            Error::LabelImage(format!(
                "{}: pixel ({x}, {y}) has unknown class code {}",
                path.display(),
                px.0[0]
            ))
        })?;
        labels.push(class);
    }
    LabeledImage::new(w as usize, h as usize, labels)
}

/// Loads a labeled image: `.pgm` files are read as class maps, anything else
/// is decoded as a color raster through `palette`.
pub fn load_labeled(path: impl AsRef<Path>, palette: &ClassPalette) -> Result<LabeledImage> {
    let path = path.as_ref();
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        load_class_map(path)
    } else {
        decode_label_image(&load_raster(path)?, palette)
    }
}
