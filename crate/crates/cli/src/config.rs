//! Flat `key=value` settings.
//!
//! Values are layered: built-in defaults, then the config file, then
//! command-line flags. Later layers override earlier ones.

use std::collections::BTreeMap;
use std::path::Path;

use pericardium::evolve::{scaled_mutation_magnitude, GaConfig, Interval, ParameterRanges};
use pericardium::imaging::{ClassPalette, OutlineStyle};
use pericardium::synthesis::{GridSpec, PhantomSpec};
use pericardium::{ClassWeights, EllipseParams};

use crate::CliError;

/// Every key the config file and `--set` accept.
pub const KNOWN_KEYS: &[&str] = &[
    // GA
    "population",
    "children",
    "generations",
    "m",
    "u",
    "stagnation_window",
    "seed",
    // objective
    "q_r",
    "q_g",
    "q_c",
    "q_b",
    // search box
    "theta_min",
    "theta_max",
    "xc_min",
    "xc_max",
    "yc_min",
    "yc_max",
    "a_min",
    "a_max",
    "b_min",
    "b_max",
    // palette
    "palette_red",
    "palette_green",
    "palette_grey",
    "palette_black",
    "palette_tolerance",
    // overlay
    "epsilon",
    "outline_color",
    // phantom
    "width",
    "height",
    "theta",
    "xc",
    "yc",
    "a",
    "b",
    "ring_thickness",
    "red_fill",
    "blob_count",
    "blob_radius",
    "noise",
    // oracle grid
    "theta_step",
    "xc_step",
    "yc_step",
    "a_step",
    "b_step",
];

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut settings = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            settings
                .set_pair(line)
                .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(settings)
    }

    /// Parses and stores one `key=value` pair.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), String> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {pair:?}"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), String> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("unknown key {key:?}"));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Stores `value` under `key` if present; used for dedicated flags.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string()).expect("flag keys are known");
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|_| CliError::Input(format!("{key}: cannot parse {raw:?}")))
            })
            .transpose()
    }

    fn rgb(&self, key: &str) -> Result<Option<[u8; 3]>, CliError> {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        let bad = || {
            CliError::Input(format!(
                "{key}: expected r,g,b with 0-255 values, got {raw:?}"
            ))
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut rgb = [0u8; 3];
        for (slot, p) in rgb.iter_mut().zip(parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        Ok(Some(rgb))
    }

    pub fn seed(&self) -> Result<Option<u64>, CliError> {
        self.parse("seed")
    }

    pub fn weights(&self) -> Result<ClassWeights, CliError> {
        let d = ClassWeights::default();
        let w = ClassWeights {
            q_r: self.parse("q_r")?.unwrap_or(d.q_r),
            q_g: self.parse("q_g")?.unwrap_or(d.q_g),
            q_c: self.parse("q_c")?.unwrap_or(d.q_c),
            q_b: self.parse("q_b")?.unwrap_or(d.q_b),
        };
        w.validate()?;
        Ok(w)
    }

    /// Search box: defaults sized for the image, then per-bound overrides.
    pub fn ranges(&self, width: usize, height: usize) -> Result<ParameterRanges, CliError> {
        let base = ParameterRanges::scaled_for(width, height).as_array();
        let names = ["theta", "xc", "yc", "a", "b"];
        let mut out = base;
        for (iv, name) in out.iter_mut().zip(names) {
            let lower = self.parse(&format!("{name}_min"))?.unwrap_or(iv.lower);
            let upper = self.parse(&format!("{name}_max"))?.unwrap_or(iv.upper);
            *iv = Interval::new(lower, upper);
        }
        let ranges = ParameterRanges::from_array(out);
        ranges.validate()?;
        Ok(ranges)
    }

    /// GA configuration for an image of the given size. The seed is taken
    /// from the settings when present, else 0.
    pub fn ga_config(&self, width: usize, height: usize) -> Result<GaConfig, CliError> {
        let d = GaConfig::default();
        let u = match self.parse("u")? {
            Some(u) => u,
            None => scaled_mutation_magnitude(d.u, width, height),
        };
        let config = GaConfig {
            population_size: self.parse("population")?.unwrap_or(d.population_size),
            children_per_generation: self.parse("children")?.unwrap_or(d.children_per_generation),
            generations: self.parse("generations")?.unwrap_or(d.generations),
            m: self.parse("m")?.unwrap_or(d.m),
            u,
            ranges: self.ranges(width, height)?,
            seed: self.seed()?.unwrap_or(0),
            stagnation_window: self.parse("stagnation_window")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn palette(&self) -> Result<ClassPalette, CliError> {
        let d = ClassPalette::default();
        let p = ClassPalette {
            red: self.rgb("palette_red")?.unwrap_or(d.red),
            green: self.rgb("palette_green")?.unwrap_or(d.green),
            grey: self.rgb("palette_grey")?.unwrap_or(d.grey),
            black: self.rgb("palette_black")?.unwrap_or(d.black),
            tolerance: self.parse("palette_tolerance")?.unwrap_or(d.tolerance),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn outline(&self) -> Result<OutlineStyle, CliError> {
        let d = OutlineStyle::default();
        let s = OutlineStyle {
            epsilon: self.parse("epsilon")?.unwrap_or(d.epsilon),
            color: self.rgb("outline_color")?.unwrap_or(d.color),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn phantom(&self) -> Result<PhantomSpec, CliError> {
        let d = PhantomSpec::default();
        let planted = EllipseParams::new(
            self.parse("theta")?.unwrap_or(d.planted.theta),
            self.parse("xc")?.unwrap_or(d.planted.x_c),
            self.parse("yc")?.unwrap_or(d.planted.y_c),
            self.parse("a")?.unwrap_or(d.planted.a),
            self.parse("b")?.unwrap_or(d.planted.b),
        )?;
        Ok(PhantomSpec {
            width: self.parse("width")?.unwrap_or(d.width),
            height: self.parse("height")?.unwrap_or(d.height),
            planted,
            ring_thickness: self.parse("ring_thickness")?.unwrap_or(d.ring_thickness),
            red_fill_fraction: self.parse("red_fill")?.unwrap_or(d.red_fill_fraction),
            grey_blob_count: self.parse("blob_count")?.unwrap_or(d.grey_blob_count),
            grey_blob_radius: self.parse("blob_radius")?.unwrap_or(d.grey_blob_radius),
            noise_flip_fraction: self.parse("noise")?.unwrap_or(d.noise_flip_fraction),
            seed: self.seed()?.unwrap_or(d.seed),
        })
    }

    /// Grid over the image-sized search box. Default steps: 30° and 4 px.
    pub fn grid(&self, width: usize, height: usize) -> Result<GridSpec, CliError> {
        let defaults = [30.0, 4.0, 4.0, 4.0, 4.0];
        let keys = ["theta_step", "xc_step", "yc_step", "a_step", "b_step"];
        let mut steps = defaults;
        for (s, key) in steps.iter_mut().zip(keys) {
            *s = self.parse(key)?.unwrap_or(*s);
        }
        Ok(GridSpec {
            ranges: self.ranges(width, height)?,
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_constants() {
        let s = Settings::default();
        let c = s.ga_config(512, 512).unwrap();
        assert_eq!(c, GaConfig::default());
        assert_eq!(s.weights().unwrap(), ClassWeights::default());
        assert_eq!(s.palette().unwrap(), ClassPalette::default());
        assert_eq!(s.outline().unwrap(), OutlineStyle::default());
    }

    #[test]
    fn later_values_override_earlier() {
        let mut s = Settings::default();
        s.set_pair("generations=10").unwrap();
        s.set_pair("q_r = 90").unwrap();
        s.set_opt("generations", Some(25));
        s.set_opt::<u64>("seed", None);
        let c = s.ga_config(512, 512).unwrap();
        assert_eq!(c.generations, 25);
        assert_eq!(c.seed, 0);
        assert_eq!(s.weights().unwrap().q_r, 90.0);
    }

    #[test]
    fn range_bounds_override_scaled_defaults() {
        let mut s = Settings::default();
        s.set_pair("a_max=20").unwrap();
        let r = s.ranges(64, 64).unwrap();
        assert_eq!(r.a, Interval::new(10.0, 20.0));
        assert_eq!(r.x_c, Interval::new(13.0, 52.0));
        assert_eq!(s.ga_config(64, 64).unwrap().u, 7);
        s.set_pair("u=20").unwrap();
        assert_eq!(s.ga_config(64, 64).unwrap().u, 20);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut s = Settings::default();
        assert!(s.set_pair("generation=5").is_err());
        assert!(s.set_pair("no equals sign").is_err());
        s.set_pair("generations=ten").unwrap();
        assert!(s.ga_config(512, 512).is_err());

        let mut s = Settings::default();
        s.set_pair("palette_red=255,0").unwrap();
        assert!(s.palette().is_err());
        let mut s = Settings::default();
        s.set_pair("q_g=-1").unwrap();
        assert!(s.weights().is_err());
        let mut s = Settings::default();
        s.set_pair("epsilon=0").unwrap();
        assert!(s.outline().is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# comment\n\ngenerations = 7\npalette_grey=100,100,100\n",
        )
        .unwrap();
        let s = Settings::load(&path).unwrap();
        assert_eq!(s.ga_config(512, 512).unwrap().generations, 7);
        assert_eq!(s.palette().unwrap().grey, [100, 100, 100]);

        std::fs::write(&path, "bogus=1\n").unwrap();
        let err = Settings::load(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
    }
}
