//! Rotated-ellipse membership and interior enumeration.
//!
//! An ellipse is described by its rotation `theta` (degrees), center
//! `(x_c, y_c)` and semi-axes `a`, `b`. For a lattice point `(x, y)` the
//! ellipse value is
//!
//! ```text
//! E = (dx·cosθ + dy·sinθ)² / a² + (dx·sinθ − dy·cosθ)² / b²
//! ```
//!
//! with `dx = x − x_c`, `dy = y − y_c`. A pixel is interior iff `E < 1`.
//! Pixels are lattice points, not area samples.

use std::fmt;

use crate::error::{Error, Result};

/// Number of genes in an ellipse chromosome.
pub const PARAM_COUNT: usize = 5;

/// Gene names in chromosome order.
pub const PARAM_NAMES: [&str; PARAM_COUNT] = ["theta", "xc", "yc", "a", "b"];

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_degrees(theta: f64) -> f64 {
    let t = theta.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if t >= 360.0 {
        0.0
    } else {
        t
    }
}

/// The five-parameter ellipse `(θ, x_c, y_c, a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    /// Rotation in degrees, kept in `[0, 360)`.
    pub theta: f64,
    pub x_c: f64,
    pub y_c: f64,
    pub a: f64,
    pub b: f64,
}

impl EllipseParams {
    /// Builds validated parameters; `theta` is wrapped into `[0, 360)`.
    pub fn new(theta: f64, x_c: f64, y_c: f64, a: f64, b: f64) -> Result<Self> {
        let params = EllipseParams {
            theta: normalize_degrees(theta),
            x_c,
            y_c,
            a,
            b,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.to_array();
        if let Some(i) = all.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{} is not finite ({})",
                PARAM_NAMES[i], all[i]
            )));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidParams(format!(
                "semi-axes must be positive (a = {}, b = {})",
                self.a, self.b
            )));
        }
        if !(0.0..360.0).contains(&self.theta) {
            return Err(Error::InvalidParams(format!(
                "theta {} outside [0, 360)",
                self.theta
            )));
        }
        Ok(())
    }

    /// Chromosome view: `[θ, x_c, y_c, a, b]`.
    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [self.theta, self.x_c, self.y_c, self.a, self.b]
    }

    /// Inverse of [`to_array`](Self::to_array). Does not validate.
    pub fn from_array(genes: [f64; PARAM_COUNT]) -> Self {
        EllipseParams {
            theta: genes[0],
            x_c: genes[1],
            y_c: genes[2],
            a: genes[3],
            b: genes[4],
        }
    }

    /// Precomputes the trigonometric terms used by every membership test.
    pub fn shape(&self) -> EllipseShape {
        EllipseShape::new(self)
    }
}

impl fmt::Display for EllipseParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "theta={} xc={} yc={} a={} b={}",
            self.theta, self.x_c, self.y_c, self.a, self.b
        )
    }
}

/// Integer pixel coordinate (column `x`, row `y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelPoint {
    pub x: i64,
    pub y: i64,
}

impl PixelPoint {
    pub fn new(x: i64, y: i64) -> Self {
        PixelPoint { x, y }
    }
}

/// Inclusive run of interior pixels `[x_min, x_max]` on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSpan {
    pub y: i64,
    pub x_min: i64,
    pub x_max: i64,
}

impl RowSpan {
    pub fn len(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.x_max < self.x_min
    }
}

/// Axis-aligned box enclosing the ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl BoundingBox {
    pub fn half_extents(&self) -> (f64, f64) {
        ((self.x_hi - self.x_lo) / 2.0, (self.y_hi - self.y_lo) / 2.0)
    }
}

/// Ellipse with cached trig and per-row quadratic coefficients.
///
/// All membership tests in the crate go through [`EllipseShape::value`], so
/// accelerated and naive enumeration evaluate bit-identical arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct EllipseShape {
    x_c: f64,
    y_c: f64,
    cos: f64,
    sin: f64,
    a2: f64,
    b2: f64,
    // E as a quadratic in dx for fixed dy: qa·dx² + 2·dy·cross·dx + dy²·qc
    qa: f64,
    cross: f64,
    qc: f64,
    half_w: f64,
    half_h: f64,
}

impl EllipseShape {
    pub fn new(params: &EllipseParams) -> Self {
        let (sin, cos) = params.theta.to_radians().sin_cos();
        let a2 = params.a * params.a;
        let b2 = params.b * params.b;
        EllipseShape {
            x_c: params.x_c,
            y_c: params.y_c,
            cos,
            sin,
            a2,
            b2,
            qa: cos * cos / a2 + sin * sin / b2,
            cross: cos * sin * (1.0 / a2 - 1.0 / b2),
            qc: sin * sin / a2 + cos * cos / b2,
            half_w: (a2 * cos * cos + b2 * sin * sin).sqrt(),
            half_h: (a2 * sin * sin + b2 * cos * cos).sqrt(),
        }
    }

    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.x_c;
        let dy = y - self.y_c;
        let u = dx * self.cos + dy * self.sin;
        let v = dx * self.sin - dy * self.cos;
        u * u / self.a2 + v * v / self.b2
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        self.value(x as f64, y as f64) < 1.0
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox {
            x_lo: self.x_c - self.half_w,
            x_hi: self.x_c + self.half_w,
            y_lo: self.y_c - self.half_h,
            y_hi: self.y_c + self.half_h,
        }
    }

    /// Interior lattice run on row `y`, clipped to `[0, width)`.
    ///
    /// Roots of the row quadratic give candidate endpoints; each endpoint is
    /// then settled against [`contains`](Self::contains) so the result agrees
    /// exactly with a per-pixel scan.
    pub fn row_span(&self, y: i64, width: i64) -> Option<RowSpan> {
        let dy = y as f64 - self.y_c;
        let lin = 2.0 * dy * self.cross;
        let constant = dy * dy * self.qc - 1.0;
        let disc = lin * lin - 4.0 * self.qa * constant;

        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        if disc >= 0.0 {
            let root = disc.sqrt();
            let left = self.x_c + (-lin - root) / (2.0 * self.qa);
            let right = self.x_c + (-lin + root) / (2.0 * self.qa);
            if right < -2.0 || left > (width + 1) as f64 {
                return None;
            }
            lo = left.ceil() as i64;
            hi = right.floor() as i64;
        }
        if lo > hi {
            // tangent row: the analytic interval holds no lattice point, but
            // rounding may hide one next to the vertex
            let vertex = self.x_c - lin / (2.0 * self.qa);
            if vertex < -2.0 || vertex > (width + 1) as f64 {
                return None;
            }
            let seed = [vertex.floor() as i64, vertex.ceil() as i64]
                .into_iter()
                .find(|&x| self.contains(x, y))?;
            lo = seed;
            hi = seed;
        }

        if self.contains(lo, y) {
            while self.contains(lo - 1, y) {
                lo -= 1;
            }
        } else {
            while lo <= hi && !self.contains(lo, y) {
                lo += 1;
            }
            if lo > hi {
                return None;
            }
        }
        if self.contains(hi, y) {
            while self.contains(hi + 1, y) {
                hi += 1;
            }
        } else {
            while hi > lo && !self.contains(hi, y) {
                hi -= 1;
            }
        }

        let x_min = lo.max(0);
        let x_max = hi.min(width - 1);
        (x_min <= x_max).then_some(RowSpan { y, x_min, x_max })
    }

    /// Calls `visit` for every non-empty interior row span inside a
    /// `width × height` image, in increasing row order.
    pub fn for_each_span(&self, width: usize, height: usize, mut visit: impl FnMut(RowSpan)) {
        if width == 0 || height == 0 {
            return;
        }
        let bbox = self.bounding_box();
        let last_row = height as f64 - 1.0;
        if bbox.y_hi < -1.0 || bbox.y_lo > last_row + 1.0 {
            return;
        }
        if bbox.x_hi < -1.0 || bbox.x_lo > width as f64 {
            return;
        }
        // one row of slack on each side absorbs rounding in the half-height
        let first = (bbox.y_lo.floor() - 1.0).max(0.0) as i64;
        let last = (bbox.y_hi.ceil() + 1.0).min(last_row) as i64;
        for y in first..=last {
            if let Some(span) = self.row_span(y, width as i64) {
                visit(span);
            }
        }
    }
}

/// Ellipse value `E` at pixel `p`; `E < 1` means strictly interior.
pub fn ellipse_value(params: &EllipseParams, p: PixelPoint) -> f64 {
    params.shape().value(p.x as f64, p.y as f64)
}

/// Strict interior test, boundary (`E == 1`) excluded.
pub fn contains(params: &EllipseParams, p: PixelPoint) -> bool {
    params.shape().contains(p.x, p.y)
}

/// One span per image row that intersects the ellipse interior.
pub fn interior_spans(params: &EllipseParams, width: usize, height: usize) -> Vec<RowSpan> {
    let mut spans = Vec::new();
    params
        .shape()
        .for_each_span(width, height, |span| spans.push(span));
    spans
}

pub fn bounding_box(params: &EllipseParams) -> BoundingBox {
    params.shape().bounding_box()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ellipse(theta: f64, x_c: f64, y_c: f64, a: f64, b: f64) -> EllipseParams {
        EllipseParams::new(theta, x_c, y_c, a, b).unwrap()
    }

    fn naive_row(params: &EllipseParams, y: i64, width: i64) -> Vec<i64> {
        (0..width)
            .filter(|&x| contains(params, PixelPoint::new(x, y)))
            .collect()
    }

    #[test]
    fn value_examples() {
        let e = ellipse(0.0, 0.0, 0.0, 2.0, 1.0);
        assert_eq!(ellipse_value(&e, PixelPoint::new(2, 0)), 1.0);
        assert_eq!(ellipse_value(&e, PixelPoint::new(0, 0)), 0.0);
        let r = ellipse(90.0, 0.0, 0.0, 2.0, 1.0);
        assert!((ellipse_value(&r, PixelPoint::new(0, 2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contains_examples() {
        let e = ellipse(0.0, 0.0, 0.0, 2.0, 1.0);
        assert!(contains(&e, PixelPoint::new(0, 0)));
        assert!(!contains(&e, PixelPoint::new(2, 0)));
        assert!(!contains(&e, PixelPoint::new(5, 5)));
    }

    #[test]
    fn theta_is_normalized() {
        assert_eq!(ellipse(-90.0, 0.0, 0.0, 1.0, 1.0).theta, 270.0);
        assert_eq!(ellipse(720.0, 0.0, 0.0, 1.0, 1.0).theta, 0.0);
        assert_eq!(normalize_degrees(-1e-20), 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(EllipseParams::new(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(EllipseParams::new(0.0, 0.0, 0.0, 1.0, -1.0).is_err());
        assert!(EllipseParams::new(f64::NAN, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(EllipseParams::new(0.0, f64::INFINITY, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn circle_spans_match_naive_rows() {
        let c = ellipse(0.0, 10.0, 10.0, 5.0, 5.0);
        // oracle: naive scan of the two rows
        assert_eq!(naive_row(&c, 10, 64), (6..=14).collect::<Vec<_>>());
        assert!(naive_row(&c, 15, 64).is_empty());

        let spans = interior_spans(&c, 64, 64);
        let row10 = spans.iter().find(|s| s.y == 10).unwrap();
        assert_eq!((row10.x_min, row10.x_max), (6, 14));
        assert!(spans.iter().all(|s| s.y != 15));
    }

    #[test]
    fn off_image_ellipse_has_no_spans() {
        let e = ellipse(30.0, -1000.0, 200.0, 100.0, 80.0);
        assert!(interior_spans(&e, 512, 512).is_empty());
    }

    #[test]
    fn spans_are_clipped_to_the_image() {
        let e = ellipse(0.0, 0.0, 0.0, 10.0, 10.0);
        let spans = interior_spans(&e, 5, 5);
        assert_eq!(spans.len(), 5);
        assert!(spans.iter().all(|s| s.x_min == 0 && s.x_max == 4));
    }

    #[test]
    fn tiny_ellipse_between_lattice_points_is_empty() {
        let e = ellipse(0.0, 3.5, 3.5, 0.2, 0.2);
        assert!(interior_spans(&e, 8, 8).is_empty());
    }

    #[test]
    fn bounding_box_examples() {
        let half = |theta, a, b| bounding_box(&ellipse(theta, 0.0, 0.0, a, b)).half_extents();
        let close = |got: (f64, f64), want: (f64, f64)| {
            assert!(
                (got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12,
                "{got:?}"
            );
        };
        close(half(0.0, 3.0, 1.0), (3.0, 1.0));
        close(half(90.0, 3.0, 1.0), (1.0, 3.0));
        close(half(45.0, 2.0, 2.0), (2.0, 2.0));
    }

    fn arb_params(size: f64) -> impl Strategy<Value = EllipseParams> {
        (
            0.0..360.0f64,
            -8.0..size + 8.0,
            -8.0..size + 8.0,
            0.3..size / 1.5,
            0.3..size / 1.5,
        )
            .prop_map(|(t, x, y, a, b)| EllipseParams::new(t, x, y, a, b).unwrap())
    }

    fn arb_lattice_params(size: i32) -> impl Strategy<Value = EllipseParams> {
        // integer and half-integer geometry puts lattice points exactly on the boundary
        (0..8i32, 0..size * 2, 0..size * 2, 1..size, 1..size).prop_map(|(t, x, y, a, b)| {
            EllipseParams::new(
                t as f64 * 45.0,
                x as f64 / 2.0,
                y as f64 / 2.0,
                a as f64,
                b as f64,
            )
            .unwrap()
        })
    }

    fn assert_spans_match_naive(params: &EllipseParams, width: usize, height: usize) {
        let spans = interior_spans(params, width, height);
        let mut fast = vec![false; width * height];
        let mut last_row = -1;
        for s in &spans {
            assert!(s.y > last_row, "one span per row, rows increasing");
            last_row = s.y;
            assert!(s.x_min <= s.x_max);
            for x in s.x_min..=s.x_max {
                fast[s.y as usize * width + x as usize] = true;
            }
        }
        let shape = params.shape();
        for y in 0..height {
            for x in 0..width {
                assert_eq!(
                    fast[y * width + x],
                    shape.contains(x as i64, y as i64),
                    "pixel ({x}, {y}) for {params}"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn spans_equal_naive_membership(params in arb_params(64.0), w in 1usize..=64, h in 1usize..=64) {
            assert_spans_match_naive(&params, w, h);
        }

        #[test]
        fn spans_equal_naive_on_lattice_aligned_ellipses(params in arb_lattice_params(24)) {
            assert_spans_match_naive(&params, 48, 48);
        }

        #[test]
        fn quarter_turn_swaps_axes(params in arb_params(64.0), x in -20i64..80, y in -20i64..80) {
            let swapped = EllipseParams::new(params.theta + 90.0, params.x_c, params.y_c, params.b, params.a).unwrap();
            let p = PixelPoint::new(x, y);
            let (e1, e2) = (ellipse_value(&params, p), ellipse_value(&swapped, p));
            prop_assert!((e1 - e2).abs() <= 1e-9 * e1.abs().max(1.0), "{} vs {}", e1, e2);
        }

        #[test]
        fn center_value_is_zero(params in arb_params(64.0)) {
            prop_assert_eq!(params.shape().value(params.x_c, params.y_c), 0.0);
        }

        #[test]
        fn bounding_box_holds_every_span(params in arb_params(64.0)) {
            let bbox = bounding_box(&params);
            for s in interior_spans(&params, 64, 64) {
                let y = s.y as f64;
                prop_assert!(y >= bbox.y_lo - 1e-9 && y <= bbox.y_hi + 1e-9);
                prop_assert!(s.x_min as f64 >= bbox.x_lo - 1e-9);
                prop_assert!(s.x_max as f64 <= bbox.x_hi + 1e-9);
            }
        }
    }
}
