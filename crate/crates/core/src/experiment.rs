//! Seeded fit runs, their CSV records and Mean/Median/Min/Max summaries.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{run_ga, FitResult, GaConfig};
use crate::geometry::EllipseParams;
use crate::scoring::{general_fit, ClassWeights, LabeledImage, Metrics};

/// Fixed CSV column order.
pub const CSV_HEADER: [&str; 16] = [
    "image",
    "seed",
    "theta",
    "xc",
    "yc",
    "a",
    "b",
    "fitness",
    "pr",
    "pg",
    "pc",
    "pb",
    "gf",
    "generations",
    "evaluations",
    "time_s",
];

/// Outcome of one fit of one image under one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub image: String,
    pub seed: u64,
    pub params: EllipseParams,
    pub fitness: f64,
    pub metrics: Metrics,
    pub generations: usize,
    pub evaluations: usize,
    pub time_s: f64,
}

impl RunRecord {
    pub fn from_fit(image: impl Into<String>, seed: u64, fit: &FitResult) -> Self {
        RunRecord {
            image: image.into(),
            seed,
            params: fit.best.params,
            fitness: fit.best.fitness,
            metrics: fit.metrics,
            generations: fit.generations_run,
            evaluations: fit.evaluations,
            time_s: fit.elapsed,
        }
    }

    fn fields(&self) -> [String; 16] {
        let p = &self.params;
        let m = &self.metrics;
        [
            self.image.clone(),
            self.seed.to_string(),
            p.theta.to_string(),
            p.x_c.to_string(),
            p.y_c.to_string(),
            p.a.to_string(),
            p.b.to_string(),
            self.fitness.to_string(),
            m.pr.to_string(),
            m.pg.to_string(),
            m.pc.to_string(),
            m.pb.to_string(),
            m.gf.to_string(),
            self.generations.to_string(),
            self.evaluations.to_string(),
            self.time_s.to_string(),
        ]
    }

    fn from_fields(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != CSV_HEADER.len() {
            return Err(Error::Record(format!(
                "expected {} columns, found {}",
                CSV_HEADER.len(),
                row.len()
            )));
        }
        let real = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| {
                Error::Record(format!(
                    "column {}: bad number {:?}",
                    CSV_HEADER[i], &row[i]
                ))
            })
        };
        let int = |i: usize| -> Result<u64> {
            row[i].parse().map_err(|_| {
                Error::Record(format!(
                    "column {}: bad integer {:?}",
                    CSV_HEADER[i], &row[i]
                ))
            })
        };
        Ok(RunRecord {
            image: row[0].to_string(),
            seed: int(1)?,
            params: EllipseParams::from_array([real(2)?, real(3)?, real(4)?, real(5)?, real(6)?]),
            fitness: real(7)?,
            metrics: Metrics {
                pr: real(8)?,
                pg: real(9)?,
                pc: real(10)?,
                pb: real(11)?,
                gf: real(12)?,
            },
            generations: int(13)? as usize,
            evaluations: int(14)? as usize,
            time_s: real(15)?,
        })
    }
}

/// Writes the header and one row per record. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn csv_string(records: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Record(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    rdr.records()
        .map(|row| RunRecord::from_fields(&row?))
        .collect()
}

/// Mean, median, minimum and maximum of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl IndexStats {
    /// `None` for an empty sample. NaN values are not expected.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Some(IndexStats {
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

type StatPick = fn(&IndexStats) -> f64;

/// Table of per-index statistics over a set of runs.
///
/// GF is the statistic of per-run GF values; runs with infinite GF are left
/// out of it and counted in `gf_excluded`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub runs: usize,
    pub pr: Option<IndexStats>,
    pub pg: Option<IndexStats>,
    pub pc: Option<IndexStats>,
    pub pb: Option<IndexStats>,
    pub gf: Option<IndexStats>,
    pub time: Option<IndexStats>,
    pub gf_excluded: usize,
}

impl AggregateReport {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let column =
            |f: fn(&RunRecord) -> f64| IndexStats::of(&records.iter().map(f).collect::<Vec<_>>());
        let finite_gf: Vec<f64> = records
            .iter()
            .map(|r| r.metrics.gf)
            .filter(|g| g.is_finite())
            .collect();
        AggregateReport {
            runs: records.len(),
            pr: column(|r| r.metrics.pr),
            pg: column(|r| r.metrics.pg),
            pc: column(|r| r.metrics.pc),
            pb: column(|r| r.metrics.pb),
            gf: IndexStats::of(&finite_gf),
            time: column(|r| r.time_s),
            gf_excluded: records.len() - finite_gf.len(),
        }
    }

    /// GF recomputed from the mean indices, for comparison with the
    /// mean of per-run GF.
    pub fn gf_of_means(&self) -> Option<f64> {
        Some(general_fit(
            self.pr?.mean,
            self.pg?.mean,
            self.pc?.mean,
            self.pb?.mean,
        ))
    }

    /// Renders the table. With `with_time = false` the Time column is
    /// omitted, which makes the output identical across reruns.
    pub fn render(&self, with_time: bool) -> String {
        let mut cols: Vec<(&str, Option<IndexStats>)> = vec![
            ("PR", self.pr),
            ("PG", self.pg),
            ("PC", self.pc),
            ("PB", self.pb),
            ("GF", self.gf),
        ];
        if with_time {
            cols.push(("Time (s)", self.time));
        }
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "");
        for (name, _) in &cols {
            let _ = write!(out, "{name:>10}");
        }
        out.push('\n');
        let rows: [(&str, StatPick); 4] = [
            ("Mean", |s| s.mean),
            ("Median", |s| s.median),
            ("Min", |s| s.min),
            ("Max", |s| s.max),
        ];
        for (label, pick) in rows {
            let _ = write!(out, "{label:<8}");
            for (_, stats) in &cols {
                match stats {
                    Some(s) => {
                        let _ = write!(out, "{:>10.2}", pick(s));
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
        let _ = writeln!(out, "runs: {}", self.runs);
        if self.gf_excluded > 0 {
            let _ = writeln!(
                out,
                "gf: {} run(s) with no green/grey/black inside (infinite GF) excluded",
                self.gf_excluded
            );
        }
        out
    }
}

/// A labeled image to fit, with the identifier used in records.
#[derive(Debug, Clone)]
pub struct BatchImage {
    pub name: String,
    pub image: LabeledImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFailure {
    pub image: String,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    /// In input order: image-major, then seed order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<BatchFailure>,
}

/// Fits every `(image, seed)` pair. Pairs run in parallel; each fit is
/// sequential and output order follows the input regardless of completion.
pub fn run_batch<F>(
    images: &[BatchImage],
    weights: &ClassWeights,
    config_for: F,
    seeds: &[u64],
) -> BatchOutcome
where
    F: Fn(&LabeledImage) -> GaConfig + Sync,
{
    let jobs: Vec<(&BatchImage, u64)> = images
        .iter()
        .flat_map(|img| seeds.iter().map(move |&s| (img, s)))
        .collect();
    let results: Vec<Result<RunRecord>> = jobs
        .par_iter()
        .map(|(job, seed)| {
            let config = GaConfig {
                seed: *seed,
                ..config_for(&job.image)
            };
            run_ga(&job.image, weights, &config)
                .map(|fit| RunRecord::from_fit(&job.name, *seed, &fit))
        })
        .collect();

    let mut outcome = BatchOutcome::default();
    for ((job, seed), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => outcome.records.push(r),
            Err(e) => outcome.failures.push(BatchFailure {
                image: job.name.clone(),
                seed: *seed,
                reason: e.to_string(),
            }),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn record(image: &str, seed: u64, gf: f64, time_s: f64) -> RunRecord {
        RunRecord {
            image: image.into(),
            seed,
            params: EllipseParams::new(12.345678901, 200.1, 201.9, 150.0, 120.5).unwrap(),
            fitness: 123456.5,
            metrics: Metrics {
                pr: 99.1,
                pg: 12.0 / 7.0,
                pc: 0.0,
                pb: 3.25,
                gf,
            },
            generations: 200,
            evaluations: 8020,
            time_s,
        }
    }

    #[test]
    fn csv_has_fixed_header() {
        let text = csv_string(&[record("a.png", 1, 2.0, 0.5)]);
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            "image,seed,theta,xc,yc,a,b,fitness,pr,pg,pc,pb,gf,generations,evaluations,time_s"
        );
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn csv_round_trips_infinite_gf_and_awkward_names() {
        let recs = vec![
            record("dir/with,comma.png", 3, f64::INFINITY, 1.0 / 3.0),
            record("plain", 4, 1.0 / 3.0, 0.0),
        ];
        let back = read_csv(csv_string(&recs).as_bytes()).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn gf_stats_arithmetic() {
        let recs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &g)| record("x", i as u64, g, 0.1))
            .collect();
        let rep = AggregateReport::from_records(&recs);
        let gf = rep.gf.unwrap();
        assert_eq!((gf.mean, gf.median, gf.min, gf.max), (2.0, 2.0, 1.0, 3.0));
        assert_eq!(rep.gf_excluded, 0);
    }

    #[test]
    fn infinite_gf_is_excluded_and_counted() {
        let recs = vec![record("x", 0, 4.0, 0.1), record("x", 1, f64::INFINITY, 0.1)];
        let rep = AggregateReport::from_records(&recs);
        assert_eq!(rep.gf.unwrap().mean, 4.0);
        assert_eq!(rep.gf_excluded, 1);
        assert!(rep.render(true).contains("excluded"));
    }

    #[test]
    fn even_count_median_averages() {
        let s = IndexStats::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.median, s.min, s.max, s.mean), (2.5, 1.0, 4.0, 2.5));
        assert!(IndexStats::of(&[]).is_none());
    }

    #[test]
    fn table_layout() {
        let rep = AggregateReport::from_records(&[record("x", 0, 2.0, 1.5)]);
        let table = rep.render(true);
        let lines: Vec<&str> = table.lines().collect();
        assert!(
            lines[0].contains("PR") && lines[0].contains("GF") && lines[0].contains("Time (s)")
        );
        for (line, label) in lines[1..5].iter().zip(["Mean", "Median", "Min", "Max"]) {
            assert!(line.starts_with(label), "{line}");
        }
        assert!(!rep.render(false).contains("Time"));
    }

    proptest! {
        #[test]
        fn stats_are_ordered(values in proptest::collection::vec(-1e6..1e6f64, 1..40)) {
            let s = IndexStats::of(&values).unwrap();
            prop_assert!(s.min <= s.median && s.median <= s.max);
            prop_assert!(s.min <= s.mean + 1e-6 && s.mean <= s.max + 1e-6);
        }

        #[test]
        fn csv_round_trip(
            theta in 0.0..360.0f64,
            x in -1e3..1e3f64,
            pr in 0.0..100.0f64,
            gf in prop_oneof![Just(f64::INFINITY), 0.0..1e3f64],
            seed in any::<u64>(),
            time_s in 0.0..1e4f64,
        ) {
            let mut r = record("img", seed, gf, time_s);
            r.params.theta = theta;
            r.params.x_c = x;
            r.metrics.pr = pr;
            let back = read_csv(csv_string(&[r.clone()]).as_bytes()).unwrap();
            prop_assert_eq!(back, vec![r]);
        }
    }
}
