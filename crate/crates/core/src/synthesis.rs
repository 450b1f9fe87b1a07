//! Synthetic phantoms with planted ellipses, and an exhaustive grid-search
//! oracle for small instances.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{Interval, ParameterRanges};
use crate::geometry::{EllipseParams, PARAM_COUNT, PARAM_NAMES};
use crate::scoring::{fitness_naive, ClassWeights, LabeledImage, PixelClass};

/// Recipe for a phantom: an epicardial core inside the planted ellipse, a
/// mediastinal ring around it, scattered grey discs outside, black elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub planted: EllipseParams,
    /// Added to both semi-axes to get the outer edge of the green ring.
    pub ring_thickness: f64,
    /// Fraction of interior pixels labeled red; the rest are `Other`.
    pub red_fill_fraction: f64,
    pub grey_blob_count: usize,
    pub grey_blob_radius: f64,
    /// Fraction of all pixels relabeled with a uniformly random class.
    pub noise_flip_fraction: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            width: 512,
            height: 512,
            planted: EllipseParams {
                theta: 20.0,
                x_c: 256.0,
                y_c: 250.0,
                a: 150.0,
                b: 110.0,
            },
            ring_thickness: 15.0,
            red_fill_fraction: 0.7,
            grey_blob_count: 8,
            grey_blob_radius: 6.0,
            noise_flip_fraction: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    /// The planted ellipse grown by the ring thickness.
    pub fn outer(&self) -> EllipseParams {
        EllipseParams {
            a: self.planted.a + self.ring_thickness,
            b: self.planted.b + self.ring_thickness,
            ..self.planted
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Phantom(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        self.planted
            .validate()
            .map_err(|e| Error::Phantom(e.to_string()))?;
        if !(self.ring_thickness.is_finite() && self.ring_thickness >= 0.0) {
            return Err(Error::Phantom(format!(
                "ring thickness {} must be non-negative",
                self.ring_thickness
            )));
        }
        for (name, v) in [
            ("red_fill_fraction", self.red_fill_fraction),
            ("noise_flip_fraction", self.noise_flip_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Phantom(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.grey_blob_radius.is_finite() && self.grey_blob_radius >= 0.0) {
            return Err(Error::Phantom(format!(
                "grey blob radius {} must be non-negative",
                self.grey_blob_radius
            )));
        }
        let bbox = self.outer().shape().bounding_box();
        let (w, h) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if bbox.x_lo < 0.0 || bbox.y_lo < 0.0 || bbox.x_hi > w || bbox.y_hi > h {
            return Err(Error::Phantom(format!(
                "planted ellipse plus ring spans x [{:.1}, {:.1}], y [{:.1}, {:.1}], outside the {}x{} image",
                bbox.x_lo, bbox.x_hi, bbox.y_lo, bbox.y_hi, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Renders the phantom and returns it with the planted parameters.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(LabeledImage, EllipseParams)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inner = spec.planted.shape();
    let outer = spec.outer().shape();
    let (w, h) = (spec.width, spec.height);

    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let class = if inner.contains(x, y) {
                if rng.gen_bool(spec.red_fill_fraction) {
                    PixelClass::Red
                } else {
                    PixelClass::Other
                }
            } else if outer.contains(x, y) {
                PixelClass::Green
            } else {
                PixelClass::Black
            };
            labels.push(class);
        }
    }

    // grey discs; pixels inside the ring's outer edge are left alone
    let r = spec.grey_blob_radius;
    let reach = r.ceil() as i64;
    for _ in 0..spec.grey_blob_count {
        let cx = rng.gen_range(0..w) as i64;
        let cy = rng.gen_range(0..h) as i64;
        for y in (cy - reach).max(0)..=(cy + reach).min(h as i64 - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(w as i64 - 1) {
                let (dx, dy) = ((x - cx) as f64, (y - cy) as f64);
                if dx * dx + dy * dy <= r * r && !outer.contains(x, y) {
                    labels[y as usize * w + x as usize] = PixelClass::Grey;
                }
            }
        }
    }

    let flips = (spec.noise_flip_fraction * (w * h) as f64).round() as usize;
    let picked = index::sample(&mut rng, w * h, flips.min(w * h));
    for i in picked.iter() {
        labels[i] = PixelClass::ALL[rng.gen_range(0..PixelClass::ALL.len())];
    }

    Ok((LabeledImage::new(w, h, labels)?, spec.planted))
}

/// Sidecar text for planted parameters: one `key=value` per line.
pub fn format_truth(params: &EllipseParams) -> String {
    let mut out = String::new();
    for (name, v) in PARAM_NAMES.iter().zip(params.to_array()) {
        let _ = writeln!(out, "{name}={v}");
    }
    out
}

pub fn parse_truth(text: &str) -> Result<EllipseParams> {
    let mut genes = [None; PARAM_COUNT];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Record(format!("line {}: expected key=value", lineno + 1)))?;
        let slot = PARAM_NAMES
            .iter()
            .position(|n| *n == key.trim())
            .ok_or_else(|| Error::Record(format!("line {}: unknown key {key:?}", lineno + 1)))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Record(format!("line {}: bad number {value:?}", lineno + 1)))?;
        genes[slot] = Some(v);
    }
    let mut out = [0.0; PARAM_COUNT];
    for (i, g) in genes.iter().enumerate() {
        out[i] = g.ok_or_else(|| Error::Record(format!("missing key {}", PARAM_NAMES[i])))?;
    }
    let p = EllipseParams::from_array(out);
    EllipseParams::new(p.theta, p.x_c, p.y_c, p.a, p.b)
}

pub fn write_truth(params: &EllipseParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_truth(params)).map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<EllipseParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_truth(&text)
}

/// Refuse grids larger than this.
pub const MAX_GRID_POINTS: u128 = 100_000_000;

/// Lattice `lower + k·step ≤ upper` per gene over a parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub ranges: ParameterRanges,
    /// Step sizes in chromosome order `θ, x_c, y_c, a, b`.
    pub steps: [f64; PARAM_COUNT],
}

impl GridSpec {
    fn axis(iv: Interval, step: f64) -> Vec<f64> {
        // tolerate accumulated rounding when upper is a lattice point
        let n = ((iv.upper - iv.lower) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| iv.lower + k as f64 * step).collect()
    }

    pub fn validate(&self) -> Result<u128> {
        self.ranges
            .validate()
            .map_err(|e| Error::Grid(e.to_string()))?;
        for (s, name) in self.steps.iter().zip(PARAM_NAMES) {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::Grid(format!(
                    "step for {name} must be positive, got {s}"
                )));
            }
        }
        let count = self.cardinality();
        if count > MAX_GRID_POINTS {
            return Err(Error::GridTooLarge {
                count,
                limit: MAX_GRID_POINTS,
            });
        }
        Ok(count)
    }

    /// Number of lattice points.
    pub fn cardinality(&self) -> u128 {
        self.ranges
            .as_array()
            .iter()
            .zip(self.steps)
            .map(|(iv, s)| ((iv.upper - iv.lower) / s + 1e-9).floor() as u128 + 1)
            .product()
    }

    /// Per-gene lattice values in increasing order.
    pub fn axes(&self) -> [Vec<f64>; PARAM_COUNT] {
        let r = self.ranges.as_array();
        std::array::from_fn(|i| Self::axis(r[i], self.steps[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridResult {
    pub best: EllipseParams,
    pub fitness: f64,
    pub evaluated: u64,
}

/// Evaluates the naive objective at every lattice point.
///
/// Ties go to the lexicographically smallest `(θ, x_c, y_c, a, b)`.
pub fn grid_search(
    image: &LabeledImage,
    weights: &ClassWeights,
    grid: &GridSpec,
) -> Result<GridResult> {
    grid.validate()?;
    let [thetas, xs, ys, as_, bs] = grid.axes();
    let genes = |i: usize| {
        // mixed-radix decode, last gene fastest, so index order is lexicographic
        let mut rest = i;
        let b = bs[rest % bs.len()];
        rest /= bs.len();
        let a = as_[rest % as_.len()];
        rest /= as_.len();
        let y = ys[rest % ys.len()];
        rest /= ys.len();
        let x = xs[rest % xs.len()];
        rest /= xs.len();
        let t = thetas[rest];
        EllipseParams::from_array([t, x, y, a, b])
    };
    let total = thetas.len() * xs.len() * ys.len() * as_.len() * bs.len();

    let (fitness, idx) = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut p = genes(i);
            p.theta = crate::geometry::normalize_degrees(p.theta);
            (fitness_naive(image, weights, &p), i)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |l, r| {
                if r.0 > l.0 || (r.0 == l.0 && r.1 < l.1) {
                    r
                } else {
                    l
                }
            },
        );
    let mut best = genes(idx);
    best.theta = crate::geometry::normalize_degrees(best.theta);
    Ok(GridResult {
        best,
        fitness,
        evaluated: total as u64,
    })
}
