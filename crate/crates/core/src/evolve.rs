//! Steady-state genetic algorithm over ellipse chromosomes.
//!
//! Each run consumes a single `ChaCha8Rng` stream seeded from
//! [`GaConfig::seed`]. Draw order:
//!
//! 1. initial population: per individual `θ, x_c, y_c, a, b`;
//! 2. per child: parent index `i1`, parent index `i2` (redrawn until
//!    `i2 != i1`), crossover count, one gene index per crossover, mutation
//!    count, then per mutation a gene index followed by the four draws of
//!    [`var`].
//!
//! A child replaces the current worst member (oldest first on ties) as soon as
//! its fitness is strictly greater than the population minimum.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{normalize_degrees, EllipseParams, PARAM_COUNT, PARAM_NAMES};
use crate::scoring::{compute_metrics, fitness, ClassWeights, LabeledImage, Metrics};

/// Closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Interval { lower, upper }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Search box for the five genes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterRanges {
    pub theta: Interval,
    pub x_c: Interval,
    pub y_c: Interval,
    pub a: Interval,
    pub b: Interval,
}

/// Image side length the default ranges were chosen for.
pub const REFERENCE_SIZE: f64 = 512.0;

impl Default for ParameterRanges {
    fn default() -> Self {
        ParameterRanges {
            theta: Interval::new(0.0, 360.0),
            x_c: Interval::new(100.0, 412.0),
            y_c: Interval::new(100.0, 412.0),
            a: Interval::new(80.0, 300.0),
            b: Interval::new(80.0, 300.0),
        }
    }
}

impl ParameterRanges {
    /// Default ranges rescaled from a 512×512 frame to `width × height`.
    ///
    /// Center bounds scale with their own axis; semi-axis bounds scale with
    /// the shorter side. Bounds are rounded to whole pixels.
    pub fn scaled_for(width: usize, height: usize) -> Self {
        let base = ParameterRanges::default();
        let scale = |iv: Interval, dim: usize| {
            let k = dim as f64 / REFERENCE_SIZE;
            Interval::new((iv.lower * k).round(), (iv.upper * k).round())
        };
        let short = width.min(height);
        ParameterRanges {
            theta: base.theta,
            x_c: scale(base.x_c, width),
            y_c: scale(base.y_c, height),
            a: scale(base.a, short),
            b: scale(base.b, short),
        }
    }

    pub fn as_array(&self) -> [Interval; PARAM_COUNT] {
        [self.theta, self.x_c, self.y_c, self.a, self.b]
    }

    pub fn from_array(iv: [Interval; PARAM_COUNT]) -> Self {
        ParameterRanges {
            theta: iv[0],
            x_c: iv[1],
            y_c: iv[2],
            a: iv[3],
            b: iv[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (iv, name) in self.as_array().iter().zip(PARAM_NAMES) {
            if !(iv.lower.is_finite() && iv.upper.is_finite()) || iv.lower > iv.upper {
                return Err(Error::Config(format!(
                    "range for {name} is [{}, {}]",
                    iv.lower, iv.upper
                )));
            }
        }
        if self.a.lower <= 0.0 || self.b.lower <= 0.0 {
            return Err(Error::Config(format!(
                "semi-axis ranges must be positive (a from {}, b from {})",
                self.a.lower, self.b.lower
            )));
        }
        Ok(())
    }

    /// Whether θ spans a full turn and should wrap instead of clamp.
    pub fn theta_wraps(&self) -> bool {
        self.theta.width() >= 360.0
    }

    /// Brings mutated genes back into the box: θ wraps modulo 360 when its
    /// range covers a full turn, every other gene clamps.
    pub fn repair(&self, genes: [f64; PARAM_COUNT]) -> EllipseParams {
        let [theta, x_c, y_c, a, b] = genes;
        let theta = if self.theta_wraps() {
            normalize_degrees(theta)
        } else {
            normalize_degrees(self.theta.clamp(theta))
        };
        EllipseParams {
            theta,
            x_c: self.x_c.clamp(x_c),
            y_c: self.y_c.clamp(y_c),
            a: self.a.clamp(a),
            b: self.b.clamp(b),
        }
    }

    /// Membership test with θ compared modulo 360.
    pub fn admits(&self, params: &EllipseParams) -> bool {
        let theta_ok = self.theta_wraps()
            || self.theta.contains(params.theta)
            || self.theta.contains(params.theta + 360.0)
            || self.theta.contains(params.theta - 360.0);
        theta_ok
            && self.x_c.contains(params.x_c)
            && self.y_c.contains(params.y_c)
            && self.a.contains(params.a)
            && self.b.contains(params.b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub children_per_generation: usize,
    /// Generation budget.
    pub generations: usize,
    /// Crossover count is drawn from `[0, m)`, mutation count from `[0, 2m)`.
    pub m: u32,
    /// Mutation magnitude; each mutation step lies in `[-u², u²]`.
    pub u: u32,
    pub ranges: ParameterRanges,
    pub seed: u64,
    /// Insertion-free generations before stopping; `None` means `⌈n/10⌉`.
    pub stagnation_window: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 20,
            children_per_generation: 40,
            generations: 100,
            m: 5,
            u: 20,
            ranges: ParameterRanges::default(),
            seed: 0,
            stagnation_window: None,
        }
    }
}

/// Mutation magnitude for a `width × height` image.
///
/// `var()` moves a gene by up to `u²` pixels, so `u` scales with the square
/// root of the image scale relative to 512×512. Exactly `u` at 512×512.
pub fn scaled_mutation_magnitude(u: u32, width: usize, height: usize) -> u32 {
    let k = width.min(height) as f64 / REFERENCE_SIZE;
    ((u as f64 * k.sqrt()).round() as u32).max(1)
}

impl GaConfig {
    /// Default constants with ranges and mutation magnitude sized for the image.
    pub fn for_image_size(width: usize, height: usize) -> Self {
        let base = GaConfig::default();
        GaConfig {
            ranges: ParameterRanges::scaled_for(width, height),
            u: scaled_mutation_magnitude(base.u, width, height),
            ..base
        }
    }

    pub fn effective_stagnation_window(&self) -> usize {
        self.stagnation_window
            .unwrap_or_else(|| self.generations.div_ceil(10))
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config(format!(
                "population size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.children_per_generation < 1 {
            return Err(Error::Config(
                "children per generation must be at least 1".into(),
            ));
        }
        if self.generations < 1 {
            return Err(Error::Config("generation budget must be at least 1".into()));
        }
        if self.m < 1 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.stagnation_window == Some(0) {
            return Err(Error::Config("stagnation window must be at least 1".into()));
        }
        self.ranges.validate()
    }

    /// Rejects center ranges that cannot place the ellipse center on the image.
    pub fn validate_for(&self, image: &LabeledImage) -> Result<()> {
        self.validate()?;
        let off = |iv: Interval, dim: usize| iv.upper < 0.0 || iv.lower > (dim - 1) as f64;
        if off(self.ranges.x_c, image.width()) {
            return Err(Error::Config(format!(
                "x_c range [{}, {}] lies outside image columns [0, {}]",
                self.ranges.x_c.lower,
                self.ranges.x_c.upper,
                image.width() - 1
            )));
        }
        if off(self.ranges.y_c, image.height()) {
            return Err(Error::Config(format!(
                "y_c range [{}, {}] lies outside image rows [0, {}]",
                self.ranges.y_c.lower,
                self.ranges.y_c.upper,
                image.height() - 1
            )));
        }
        Ok(())
    }
}

/// A chromosome with its cached objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Individual {
    pub params: EllipseParams,
    pub fitness: f64,
}

impl Individual {
    pub fn evaluate(params: EllipseParams, image: &LabeledImage, weights: &ClassWeights) -> Self {
        Individual {
            fitness: fitness(image, weights, &params),
            params,
        }
    }
}

/// Mutation step: `(random(u+1)·randomf())² − (random(u+1)·randomf())²`.
///
/// `random(k)` is uniform on `{0, …, k−1}` and `randomf()` uniform on
/// `[0, 1]`; draws are taken in the order integer, float, integer, float.
pub fn var<R: Rng + ?Sized>(rng: &mut R, u: u32) -> f64 {
    let term = |rng: &mut R| {
        let k = rng.gen_range(0..=u) as f64;
        let f: f64 = rng.gen_range(0.0..=1.0);
        let p = k * f;
        p * p
    };
    let first = term(rng);
    let second = term(rng);
    first - second
}

/// Uniform draw inside the box, fitness cached.
pub fn random_individual<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &ParameterRanges,
    image: &LabeledImage,
    weights: &ClassWeights,
) -> Individual {
    let mut genes = [0.0; PARAM_COUNT];
    for (g, iv) in genes.iter_mut().zip(ranges.as_array()) {
        *g = rng.gen_range(iv.lower..=iv.upper);
    }
    genes[0] = normalize_degrees(genes[0]);
    Individual::evaluate(EllipseParams::from_array(genes), image, weights)
}

/// The random choices that turn two parents into a child.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChildPlan {
    /// Gene indices copied from the second parent, in order.
    pub crossovers: Vec<usize>,
    /// `(gene index, delta)` pairs added after crossover, in order.
    pub mutations: Vec<(usize, f64)>,
}

impl ChildPlan {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, m: u32, u: u32) -> Self {
        let n_cross = rng.gen_range(0..m);
        let crossovers = (0..n_cross)
            .map(|_| rng.gen_range(0..PARAM_COUNT))
            .collect();
        let n_mut = rng.gen_range(0..2 * m);
        let mutations = (0..n_mut)
            .map(|_| {
                let gene = rng.gen_range(0..PARAM_COUNT);
                (gene, var(rng, u))
            })
            .collect();
        ChildPlan {
            crossovers,
            mutations,
        }
    }

    /// Clone `first`, copy the planned genes from `second`, add the planned
    /// deltas, then repair into `ranges`.
    pub fn apply(
        &self,
        first: &EllipseParams,
        second: &EllipseParams,
        ranges: &ParameterRanges,
    ) -> EllipseParams {
        let mut genes = first.to_array();
        let donor = second.to_array();
        for &r in &self.crossovers {
            genes[r] = donor[r];
        }
        for &(r, delta) in &self.mutations {
            genes[r] += delta;
        }
        ranges.repair(genes)
    }
}

pub fn make_child<R: Rng + ?Sized>(
    rng: &mut R,
    first: &Individual,
    second: &Individual,
    config: &GaConfig,
    image: &LabeledImage,
    weights: &ClassWeights,
) -> Individual {
    let plan = ChildPlan::draw(rng, config.m, config.u);
    let params = plan.apply(&first.params, &second.params, &config.ranges);
    Individual::evaluate(params, image, weights)
}

/// Snapshot handed to observers after every generation.
#[derive(Debug)]
pub struct GenerationReport<'a> {
    /// 1-based generation number.
    pub generation: usize,
    pub population: &'a [Individual],
    pub insertions: usize,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best: Individual,
    pub metrics: Metrics,
    pub generations_run: usize,
    /// Number of objective evaluations.
    pub evaluations: usize,
    /// Best fitness after initialization, then after each generation.
    pub best_trace: Vec<f64>,
    /// Wall time in seconds.
    pub elapsed: f64,
}

impl FitResult {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &FitResult) -> bool {
        FitResult {
            elapsed: 0.0,
            ..self.clone()
        } == FitResult {
            elapsed: 0.0,
            ..other.clone()
        }
    }
}

struct Population {
    members: Vec<Individual>,
    // insertion sequence number per slot, for oldest-first eviction
    born: Vec<u64>,
    next_birth: u64,
}

impl Population {
    fn worst(&self) -> usize {
        let mut worst = 0;
        for i in 1..self.members.len() {
            let (f, w) = (self.members[i].fitness, self.members[worst].fitness);
            if f < w || (f == w && self.born[i] < self.born[worst]) {
                worst = i;
            }
        }
        worst
    }

    fn best(&self) -> Individual {
        // first maximal member in slot order
        let mut best = self.members[0];
        for ind in &self.members[1..] {
            if ind.fitness > best.fitness {
                best = *ind;
            }
        }
        best
    }

    fn offer(&mut self, child: Individual) -> bool {
        let worst = self.worst();
        if child.fitness > self.members[worst].fitness {
            self.members[worst] = child;
            self.born[worst] = self.next_birth;
            self.next_birth += 1;
            true
        } else {
            false
        }
    }
}

pub fn run_ga(
    image: &LabeledImage,
    weights: &ClassWeights,
    config: &GaConfig,
) -> Result<FitResult> {
    run_ga_observed(image, weights, config, |_| {})
}

/// [`run_ga`] with a callback invoked after every generation.
pub fn run_ga_observed(
    image: &LabeledImage,
    weights: &ClassWeights,
    config: &GaConfig,
    mut observe: impl FnMut(&GenerationReport<'_>),
) -> Result<FitResult> {
    config.validate_for(image)?;
    weights.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let members: Vec<Individual> = (0..config.population_size)
        .map(|_| random_individual(&mut rng, &config.ranges, image, weights))
        .collect();
    let mut pop = Population {
        born: (0..members.len() as u64).collect(),
        next_birth: members.len() as u64,
        members,
    };
    let mut evaluations = config.population_size;
    let mut best_trace = vec![pop.best().fitness];

    let window = config.effective_stagnation_window();
    let size = config.population_size;
    let mut idle = 0;
    let mut generations_run = 0;
    while generations_run < config.generations {
        let mut insertions = 0;
        for _ in 0..config.children_per_generation {
            let i1 = rng.gen_range(0..size);
            let i2 = loop {
                let j = rng.gen_range(0..size);
                if j != i1 {
                    break j;
                }
            };
            let child = make_child(
                &mut rng,
                &pop.members[i1],
                &pop.members[i2],
                config,
                image,
                weights,
            );
            evaluations += 1;
            if pop.offer(child) {
                insertions += 1;
            }
        }
        generations_run += 1;
        let best_fitness = pop.best().fitness;
        best_trace.push(best_fitness);
        observe(&GenerationReport {
            generation: generations_run,
            population: &pop.members,
            insertions,
            best_fitness,
        });

        idle = if insertions == 0 { idle + 1 } else { 0 };
        if idle >= window {
            break;
        }
    }

    let best = pop.best();
    Ok(FitResult {
        metrics: compute_metrics(image, &best.params),
        best,
        generations_run,
        evaluations,
        best_trace,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
