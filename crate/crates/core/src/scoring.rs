//! Objective function and evaluation indices over class-labeled images.
//!
//! The GA objective rewards epicardial (red) pixels inside the ellipse and
//! penalizes every other fat class and the background:
//!
//! ```text
//! f = q_r·r − (q_g·g + q_c·c + q_b·b)
//! ```
//!
//! where `r, g, c, b` count interior red, green, grey and black pixels.
//! Both the accelerated and the naive evaluators reduce to these four counts
//! and share [`ClassWeights::score`], so they agree bit for bit.

use crate::error::{Error, Result};
use crate::geometry::EllipseParams;

/// Pixel class of a labeled fat image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PixelClass {
    /// Epicardial fat.
    Red,
    /// Mediastinal fat.
    Green,
    /// Remaining fat.
    Grey,
    /// Background.
    Black,
    /// Anything else; contributes nothing to the objective.
    Other,
}

impl PixelClass {
    /// The four weighted classes, in counting order.
    pub const WEIGHTED: [PixelClass; 4] = [
        PixelClass::Red,
        PixelClass::Green,
        PixelClass::Grey,
        PixelClass::Black,
    ];

    pub const ALL: [PixelClass; 5] = [
        PixelClass::Red,
        PixelClass::Green,
        PixelClass::Grey,
        PixelClass::Black,
        PixelClass::Other,
    ];

    fn slot(self) -> Option<usize> {
        match self {
            PixelClass::Red => Some(0),
            PixelClass::Green => Some(1),
            PixelClass::Grey => Some(2),
            PixelClass::Black => Some(3),
            PixelClass::Other => None,
        }
    }
}

/// Pixel counts per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub red: u64,
    pub green: u64,
    pub grey: u64,
    pub black: u64,
    pub other: u64,
}

impl ClassCounts {
    pub fn get(&self, class: PixelClass) -> u64 {
        match class {
            PixelClass::Red => self.red,
            PixelClass::Green => self.green,
            PixelClass::Grey => self.grey,
            PixelClass::Black => self.black,
            PixelClass::Other => self.other,
        }
    }

    pub fn add(&mut self, class: PixelClass, n: u64) {
        match class {
            PixelClass::Red => self.red += n,
            PixelClass::Green => self.green += n,
            PixelClass::Grey => self.grey += n,
            PixelClass::Black => self.black += n,
            PixelClass::Other => self.other += n,
        }
    }

    pub fn total(&self) -> u64 {
        self.red + self.green + self.grey + self.black + self.other
    }

    fn tally<'a>(labels: impl IntoIterator<Item = &'a PixelClass>) -> Self {
        let mut counts = ClassCounts::default();
        for &class in labels {
            counts.add(class, 1);
        }
        counts
    }
}

/// Immutable grid of pixel classes with cached class totals and per-row
/// prefix counts for span queries.
#[derive(Clone, PartialEq)]
pub struct LabeledImage {
    width: usize,
    height: usize,
    labels: Vec<PixelClass>,
    totals: ClassCounts,
    // row-major, (width + 1) entries per row: counts of the four weighted
    // classes in columns [0, x)
    prefix: Vec<[u32; 4]>,
}

impl LabeledImage {
    /// Builds an image from row-major labels.
    pub fn new(width: usize, height: usize, labels: Vec<PixelClass>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::LabelImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if width.checked_mul(height) != Some(labels.len()) {
            return Err(Error::LabelImage(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        if width >= u32::MAX as usize {
            return Err(Error::LabelImage(format!("width {width} too large")));
        }

        let mut prefix = Vec::with_capacity((width + 1) * height);
        for row in labels.chunks_exact(width) {
            let mut acc = [0u32; 4];
            prefix.push(acc);
            for class in row {
                if let Some(slot) = class.slot() {
                    acc[slot] += 1;
                }
                prefix.push(acc);
            }
        }
        let totals = ClassCounts::tally(&labels);
        Ok(LabeledImage {
            width,
            height,
            labels,
            totals,
            prefix,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> PixelClass,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn filled(width: usize, height: usize, class: PixelClass) -> Result<Self> {
        Self::new(width, height, vec![class; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[PixelClass] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> PixelClass {
        self.labels[y * self.width + x]
    }

    pub fn class_totals(&self) -> ClassCounts {
        self.totals
    }

    /// Returns a copy with one pixel relabeled.
    pub fn with_pixel(&self, x: usize, y: usize, class: PixelClass) -> Self {
        let mut labels = self.labels.clone();
        labels[y * self.width + x] = class;
        Self::new(self.width, self.height, labels).expect("dimensions unchanged")
    }

    /// True when no pixel carries a weighted class, so every ellipse scores 0.
    pub fn is_flat(&self) -> bool {
        self.totals.other == self.totals.total()
    }

    fn span_counts(&self, y: usize, x_min: usize, x_max: usize) -> [u32; 4] {
        let row = y * (self.width + 1);
        let hi = self.prefix[row + x_max + 1];
        let lo = self.prefix[row + x_min];
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], hi[3] - lo[3]]
    }
}

impl std::fmt::Debug for LabeledImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LabeledImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("class_totals", &self.totals)
            .finish_non_exhaustive()
    }
}

/// Objective coefficients. Signs are applied by [`score`](Self::score).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub q_r: f64,
    pub q_g: f64,
    pub q_c: f64,
    pub q_b: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights {
            q_r: 85.0,
            q_g: 3.0,
            q_c: 4.0,
            q_b: 2.5,
        }
    }
}

impl ClassWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.q_r, self.q_g, self.q_c, self.q_b];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!(
                "class weights must be finite and non-negative, got {all:?}"
            )));
        }
        Ok(())
    }

    /// Weighted score of interior class counts.
    #[inline]
    pub fn score(&self, inside: &ClassCounts) -> f64 {
        self.q_r * inside.red as f64
            - (self.q_g * inside.green as f64
                + self.q_c * inside.grey as f64
                + self.q_b * inside.black as f64)
    }

    pub fn scaled(&self, k: f64) -> Self {
        ClassWeights {
            q_r: self.q_r * k,
            q_g: self.q_g * k,
            q_c: self.q_c * k,
            q_b: self.q_b * k,
        }
    }
}

/// Class counts of pixels strictly inside the ellipse, via row spans.
pub fn interior_counts(image: &LabeledImage, params: &EllipseParams) -> ClassCounts {
    let mut acc = [0u64; 4];
    let mut interior = 0u64;
    params
        .shape()
        .for_each_span(image.width, image.height, |span| {
            let c = image.span_counts(span.y as usize, span.x_min as usize, span.x_max as usize);
            for (sum, n) in acc.iter_mut().zip(c) {
                *sum += n as u64;
            }
            interior += span.len() as u64;
        });
    let weighted: u64 = acc.iter().sum();
    ClassCounts {
        red: acc[0],
        green: acc[1],
        grey: acc[2],
        black: acc[3],
        other: interior - weighted,
    }
}

/// Class counts of interior pixels by testing every pixel of the image.
pub fn interior_counts_naive(image: &LabeledImage, params: &EllipseParams) -> ClassCounts {
    let shape = params.shape();
    let mut counts = ClassCounts::default();
    for y in 0..image.height {
        for x in 0..image.width {
            if shape.contains(x as i64, y as i64) {
                counts.add(image.get(x, y), 1);
            }
        }
    }
    counts
}

/// GA objective for one ellipse.
pub fn fitness(image: &LabeledImage, weights: &ClassWeights, params: &EllipseParams) -> f64 {
    weights.score(&interior_counts(image, params))
}

/// Reference objective: same contract as [`fitness`] with no acceleration.
pub fn fitness_naive(image: &LabeledImage, weights: &ClassWeights, params: &EllipseParams) -> f64 {
    weights.score(&interior_counts_naive(image, params))
}

/// Evaluation indices of a fitted ellipse.
///
/// `pr`, `pg`, `pc`, `pb` are the percentages of the image's red, green,
/// grey and black pixels that fall inside the ellipse; `gf = pr / (pg + pc + pb)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub pr: f64,
    pub pg: f64,
    pub pc: f64,
    pub pb: f64,
    /// `+inf` when no green, grey or black pixel is inside.
    pub gf: f64,
}

impl Metrics {
    pub fn from_counts(inside: &ClassCounts, totals: &ClassCounts) -> Self {
        let pct = |class| {
            let total = totals.get(class);
            if total == 0 {
                0.0
            } else {
                100.0 * inside.get(class) as f64 / total as f64
            }
        };
        let pr = pct(PixelClass::Red);
        let pg = pct(PixelClass::Green);
        let pc = pct(PixelClass::Grey);
        let pb = pct(PixelClass::Black);
        Metrics {
            pr,
            pg,
            pc,
            pb,
            gf: general_fit(pr, pg, pc, pb),
        }
    }
}

/// `pr / (pg + pc + pb)`, or `+inf` if the denominator is zero.
pub fn general_fit(pr: f64, pg: f64, pc: f64, pb: f64) -> f64 {
    let denom = pg + pc + pb;
    if denom > 0.0 {
        pr / denom
    } else {
        f64::INFINITY
    }
}

pub fn compute_metrics(image: &LabeledImage, params: &EllipseParams) -> Metrics {
    Metrics::from_counts(&interior_counts(image, params), &image.class_totals())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::{contains, PixelPoint};

    fn ellipse(theta: f64, x_c: f64, y_c: f64, a: f64, b: f64) -> EllipseParams {
        EllipseParams::new(theta, x_c, y_c, a, b).unwrap()
    }

    fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> LabeledImage {
        LabeledImage::from_fn(w, h, |_, _| PixelClass::ALL[rng.gen_range(0..5)]).unwrap()
    }

    #[test]
    fn rejects_mismatched_label_count() {
        assert!(LabeledImage::new(3, 3, vec![PixelClass::Red; 8]).is_err());
        assert!(LabeledImage::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn totals_match_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 17, 9);
        let t = img.class_totals();
        assert_eq!(t.total(), 17 * 9);
        for class in PixelClass::ALL {
            let n = img.labels().iter().filter(|&&c| c == class).count() as u64;
            assert_eq!(t.get(class), n);
        }
    }

    #[test]
    fn single_red_pixel_scores_q_r() {
        let img = LabeledImage::filled(9, 9, PixelClass::Other)
            .unwrap()
            .with_pixel(4, 4, PixelClass::Red);
        let e = ellipse(0.0, 4.0, 4.0, 3.0, 2.0);
        let w = ClassWeights::default();
        assert_eq!(fitness(&img, &w, &e), 85.0);
        assert_eq!(fitness_naive(&img, &w, &e), 85.0);
    }

    #[test]
    fn all_other_scores_zero() {
        let img = LabeledImage::filled(20, 20, PixelClass::Other).unwrap();
        let e = ellipse(33.0, 10.0, 10.0, 8.0, 3.0);
        assert_eq!(fitness(&img, &ClassWeights::default(), &e), 0.0);
        assert!(img.is_flat());
    }

    fn hand_count(e: &EllipseParams) -> Vec<(i64, i64)> {
        (0..5)
            .flat_map(|y| (0..5).map(move |x| (x, y)))
            .filter(|&(x, y)| contains(e, PixelPoint::new(x, y)))
            .collect()
    }

    #[test]
    fn plus_shaped_black_interior() {
        let img = LabeledImage::filled(5, 5, PixelClass::Black).unwrap();
        let w = ClassWeights::default();
        // r² in (1, 2]: the center and its four neighbours
        let plus = ellipse(0.0, 2.0, 2.0, 1.2, 1.2);
        assert_eq!(
            hand_count(&plus),
            vec![(2, 1), (1, 2), (2, 2), (3, 2), (2, 3)]
        );
        assert_eq!(fitness_naive(&img, &w, &plus), -12.5);
        assert_eq!(fitness(&img, &w, &plus), -12.5);
        // r = 1.5 also takes the diagonals (1 + 1 < 2.25): the full 3x3 block
        let block = ellipse(0.0, 2.0, 2.0, 1.5, 1.5);
        assert_eq!(hand_count(&block).len(), 9);
        assert_eq!(fitness_naive(&img, &w, &block), -22.5);
        assert_eq!(fitness(&img, &w, &block), -22.5);
    }

    #[test]
    fn off_image_scores_zero() {
        let img = LabeledImage::filled(16, 16, PixelClass::Black).unwrap();
        let e = ellipse(0.0, -500.0, 8.0, 20.0, 20.0);
        assert_eq!(fitness_naive(&img, &ClassWeights::default(), &e), 0.0);
        assert_eq!(fitness(&img, &ClassWeights::default(), &e), 0.0);
    }

    #[test]
    fn full_red_capture_is_pr_100() {
        let img = LabeledImage::from_fn(32, 32, |x, y| {
            if (14..18).contains(&x) && (14..18).contains(&y) {
                PixelClass::Red
            } else {
                PixelClass::Black
            }
        })
        .unwrap();
        let m = compute_metrics(&img, &ellipse(0.0, 15.5, 15.5, 6.0, 6.0));
        assert_eq!(m.pr, 100.0);
    }

    #[test]
    fn general_fit_arithmetic() {
        assert_eq!(general_fit(100.0, 40.0, 5.0, 5.0), 2.0);
        assert_eq!(general_fit(100.0, 0.0, 0.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn absent_class_has_zero_index() {
        let img = LabeledImage::filled(10, 10, PixelClass::Red).unwrap();
        let m = compute_metrics(&img, &ellipse(0.0, 5.0, 5.0, 3.0, 3.0));
        assert_eq!((m.pg, m.pc, m.pb), (0.0, 0.0, 0.0));
        assert!(m.pr > 0.0 && m.pr < 100.0);
        assert_eq!(m.gf, f64::INFINITY);
    }

    #[test]
    fn random_images_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = ClassWeights::default();
        for _ in 0..100 {
            let img = random_image(&mut rng, 32, 32);
            let e = ellipse(
                rng.gen_range(0.0..360.0),
                rng.gen_range(-5.0..37.0),
                rng.gen_range(-5.0..37.0),
                rng.gen_range(0.5..25.0),
                rng.gen_range(0.5..25.0),
            );
            assert_eq!(fitness(&img, &w, &e), fitness_naive(&img, &w, &e));
            assert_eq!(interior_counts(&img, &e), interior_counts_naive(&img, &e));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn class_flip_shifts_fitness_exactly(
            seed in any::<u64>(),
            theta in 0.0..360.0f64,
            a in 3.0..12.0f64,
            b in 3.0..12.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = LabeledImage::from_fn(24, 24, |x, y| {
                if x == 12 && y == 12 { PixelClass::Other } else { PixelClass::ALL[rng.gen_range(0..5)] }
            }).unwrap();
            let e = ellipse(theta, 12.0, 12.0, a, b);
            let w = ClassWeights::default();
            let f0 = fitness(&base, &w, &e);
            prop_assert_eq!(fitness(&base.with_pixel(12, 12, PixelClass::Red), &w, &e) - f0, w.q_r);
            prop_assert_eq!(f0 - fitness(&base.with_pixel(12, 12, PixelClass::Black), &w, &e), w.q_b);
        }

        #[test]
        fn larger_ellipse_never_lowers_pr(
            seed in any::<u64>(),
            theta in 0.0..360.0f64,
            a in 1.0..15.0f64,
            b in 1.0..15.0f64,
            grow in 1.0..2.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = random_image(&mut rng, 32, 32);
            let small = ellipse(theta, 16.0, 15.0, a, b);
            let big = ellipse(theta, 16.0, 15.0, a * grow, b * grow);
            prop_assert!(compute_metrics(&img, &big).pr >= compute_metrics(&img, &small).pr);
        }

        #[test]
        fn weight_scaling_scales_fitness(
            seed in any::<u64>(),
            k in 0.1..50.0f64,
            exp in -4i32..8,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = random_image(&mut rng, 24, 24);
            let w = ClassWeights::default();
            let scaled = w.scaled(k);
            let candidates: Vec<EllipseParams> = (0..12)
                .map(|_| ellipse(
                    rng.gen_range(0.0..360.0),
                    rng.gen_range(0.0..24.0),
                    rng.gen_range(0.0..24.0),
                    rng.gen_range(1.0..12.0),
                    rng.gen_range(1.0..12.0),
                ))
                .collect();
            let argmax = |w: &ClassWeights| {
                let scores: Vec<f64> = candidates.iter().map(|e| fitness(&img, w, e)).collect();
                let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                scores.iter().position(|&s| s == best).unwrap()
            };
            for e in &candidates {
                let f = fitness(&img, &w, e);
                let fk = fitness(&img, &scaled, e);
                prop_assert!((fk - k * f).abs() <= 1e-9 * (k * f).abs().max(1.0));
            }
            // exact ties stay ties only under power-of-two scaling
            prop_assert_eq!(argmax(&w), argmax(&w.scaled(2f64.powi(exp))));
        }
    }
}
