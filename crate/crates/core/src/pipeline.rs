//! End-to-end run: design → (hologram synthesis and extraction) → eigensolve
//! → comparison, configured by a flat `key = value` file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eigensolver::{bound_states, compare_levels, DiscrepancyReport, Spectrum};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, PotentialGrid};
use crate::hologram::{self, HologramState};
use crate::sequences::{first_lucky, first_primes, IntegerSequence};
use crate::susy::{design_potential, KineticConvention};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SequenceSpec {
    Primes(usize),
    Lucky(usize),
    File(PathBuf),
}

impl SequenceSpec {
    pub fn load(&self) -> Result<IntegerSequence> {
        match self {
            SequenceSpec::Primes(n) => Ok(first_primes(*n)),
            SequenceSpec::Lucky(n) => Ok(first_lucky(*n)),
            SequenceSpec::File(path) => parse_sequence(&fs::read_to_string(path)?),
        }
    }
}

/// Integers separated by whitespace or commas; `#` starts a comment.
pub fn parse_sequence(text: &str) -> Result<IntegerSequence> {
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            values.push(
                tok.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("`{tok}` is not a positive integer")))?,
            );
        }
    }
    if values.is_empty() {
        return Err(invalid("sequence file holds no values"));
    }
    IntegerSequence::new(values)
}

impl FromStr for SequenceSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("sequence `{s}`: expected primes:N, lucky:N or file:PATH")))?;
        let count = || -> Result<usize> {
            match arg.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(invalid(format!("sequence `{s}`: count must be a positive integer"))),
            }
        };
        match kind.trim() {
            "primes" => Ok(SequenceSpec::Primes(count()?)),
            "lucky" => Ok(SequenceSpec::Lucky(count()?)),
            "file" if !arg.trim().is_empty() => Ok(SequenceSpec::File(PathBuf::from(arg.trim()))),
            _ => Err(invalid(format!("sequence `{s}`: expected primes:N, lucky:N or file:PATH"))),
        }
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::Primes(n) => write!(f, "primes:{n}"),
            SequenceSpec::Lucky(n) => write!(f, "lucky:{n}"),
            SequenceSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sequence: SequenceSpec,
    pub half_width: f64,
    pub spacing: f64,
    pub kinetic: KineticConvention,
    pub hologram: bool,
    pub m: usize,
    pub sr_length: usize,
    pub steepness: i32,
    pub iterations: usize,
    pub seed: u64,
    /// `None`: top level plus a fifth of the potential depth.
    pub ceiling: Option<f64>,
    /// Half width of the imaged window; `None`: end of the structure plus 0.5.
    pub window: Option<f64>,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sequence: SequenceSpec::Primes(10),
            half_width: 12.0,
            spacing: 0.005,
            kinetic: KineticConvention::Half,
            hologram: false,
            m: hologram::DEFAULT_M,
            sr_length: hologram::DEFAULT_SR_LENGTH,
            steepness: hologram::DEFAULT_STEEPNESS,
            iterations: 500,
            seed: 1,
            ceiling: None,
            window: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn auto_or<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 13] = [
        "sequence",
        "half_width",
        "spacing",
        "kinetic",
        "hologram",
        "m",
        "sr_length",
        "steepness",
        "iterations",
        "seed",
        "ceiling",
        "window",
        "output_dir",
    ];

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse::<T>()
                .map_err(|_| Error::Parse(format!("{key}: cannot parse `{v}`")))
        }
        fn opt(key: &str, v: &str) -> Result<Option<f64>> {
            if v == "auto" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let v = value.trim();
        match key.trim() {
            "sequence" => self.sequence = v.parse()?,
            "half_width" => self.half_width = num(key, v)?,
            "spacing" => self.spacing = num(key, v)?,
            "kinetic" => self.kinetic = v.parse()?,
            "hologram" => self.hologram = num(key, v)?,
            "m" => self.m = num(key, v)?,
            "sr_length" => self.sr_length = num(key, v)?,
            "steepness" => self.steepness = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "ceiling" => self.ceiling = opt(key, v)?,
            "window" => self.window = opt(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "sequence" => self.sequence.to_string(),
            "half_width" => self.half_width.to_string(),
            "spacing" => self.spacing.to_string(),
            "kinetic" => match self.kinetic {
                KineticConvention::Half => "half".into(),
                KineticConvention::Unit => "unit".into(),
            },
            "hologram" => self.hologram.to_string(),
            "m" => self.m.to_string(),
            "sr_length" => self.sr_length.to_string(),
            "steepness" => self.steepness.to_string(),
            "iterations" => self.iterations.to_string(),
            "seed" => self.seed.to_string(),
            "ceiling" => auto_or(&self.ceiling),
            "window" => auto_or(&self.window),
            "output_dir" => self.output_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Parses the file form on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn to_file_string(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.spacing > 0.0) {
            return Err(invalid("half_width and spacing must be positive"));
        }
        if self.hologram {
            if self.m < 2 || self.sr_length == 0 || self.sr_length + 2 > 2 * self.m {
                return Err(invalid("hologram needs m >= 2 and an SR that fits inside the 2m row"));
            }
            if self.iterations == 0 {
                return Err(invalid("iterations must be at least 1"));
            }
        }
        if let Some(w) = self.window {
            if !(w > 0.0 && w <= self.half_width) {
                return Err(invalid("window must lie inside the design grid"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HologramSummary {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub rms_intensity_error: f64,
    pub sr_power_fraction: f64,
    pub line_search_failed: bool,
    pub ceiling: f64,
    pub window: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub sequence: String,
    pub targets: Vec<u64>,
    pub kinetic_scale: f64,
    /// Lowest levels of the solved potential, one per target.
    pub levels: Vec<f64>,
    pub discrepancy: DiscrepancyReport,
    pub all_round: bool,
    pub hologram: Option<HologramSummary>,
    #[serde(skip)]
    pub spectrum: Option<Spectrum>,
    #[serde(skip)]
    pub designed: Option<PotentialGrid>,
    #[serde(skip)]
    pub extracted: Option<PotentialGrid>,
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

impl StageError {
    pub fn is_validation(&self) -> bool {
        self.source.is_validation()
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|source| StageError { stage: name, source })
}

/// Outermost `|x|` where the potential differs from its asymptote by more
/// than a thousandth of its depth.
fn structure_extent(v: &PotentialGrid) -> f64 {
    let depth = v.asymptote - v.min();
    let tol = 1e-3 * depth.abs().max(1e-12);
    (0..v.values.len())
        .filter(|&i| (v.values[i] - v.asymptote).abs() > tol)
        .map(|i| v.grid.x(i).abs())
        .fold(0.0, f64::max)
}

pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<PipelineReport, StageError> {
    stage("config", config.validate())?;
    let seq = stage("sequence", config.sequence.load())?;
    let targets = seq.to_f64();
    let s = config.kinetic.scale();
    let grid = stage("grid", Grid::with_spacing(config.half_width, config.spacing))?;
    let designed = stage("design", design_potential(&targets, grid, s))?;

    let mut summary = None;
    let mut extracted = None;
    let mut cost_history = Vec::new();
    let solve_target = if config.hologram {
        let top = designed.asymptote;
        let ceiling = config.ceiling.unwrap_or(top + 0.2 * (top - designed.min()));
        let window = config
            .window
            .unwrap_or_else(|| (structure_extent(&designed) + 0.5).min(config.half_width));
        let target = stage(
            "hologram",
            hologram::potential_to_target(&designed, config.sr_length, ceiling, window),
        )?;
        let state = stage("hologram", HologramState::for_target(config.m, &target, config.steepness))?;
        let illum = hologram::uniform_illumination(config.m);
        let run = stage(
            "hologram",
            hologram::optimize_phase(&state, &illum, config.iterations, Some(config.seed)),
        )?;
        let field = stage("hologram", hologram::propagate(&run.state, &illum))?;
        let rec = stage(
            "extract",
            hologram::extract_profile(&field, &run.state, config.spacing, 1.0),
        )?;
        summary = Some(HologramSummary {
            iterations: run.history.len() - 1,
            initial_cost: run.history[0],
            final_cost: *run.history.last().expect("non-empty history"),
            rms_intensity_error: hologram::sr_intensity_error(&run.state, &field),
            sr_power_fraction: hologram::sr_power_fraction(&run.state, &field),
            line_search_failed: run.line_search_failed,
            ceiling,
            window,
        });
        cost_history = run.history;
        extracted = Some(rec.clone());
        rec
    } else {
        designed.clone()
    };

    let spectrum = stage("solve", bound_states(&solve_target, s, None))?;
    let mut levels = spectrum.levels();
    if levels.len() < targets.len() {
        return Err(StageError {
            stage: "compare",
            source: Error::Numerical(format!(
                "found {} levels for {} targets",
                levels.len(),
                targets.len()
            )),
        });
    }
    levels.truncate(targets.len());
    let discrepancy = stage("compare", compare_levels(&levels, &targets))?;
    Ok(PipelineReport {
        sequence: config.sequence.to_string(),
        targets: seq.values().to_vec(),
        kinetic_scale: s,
        levels,
        all_round: discrepancy.all_round(),
        discrepancy,
        hologram: summary,
        spectrum: Some(spectrum),
        designed: Some(designed),
        extracted,
        cost_history,
    })
}

/// Writes `potential.csv`, `spectrum.json`, `report.json` and, with the hologram stage,
/// `potential_extracted.csv` and `cost_history.json`. Returns the paths.
pub fn write_outputs(report: &PipelineReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut csv = |name: &str, v: &PotentialGrid| -> Result<()> {
        let path = dir.join(name);
        let mut buf = Vec::new();
        v.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        written.push(path);
        Ok(())
    };
    if let Some(v) = &report.designed {
        csv("potential.csv", v)?;
    }
    if let Some(v) = &report.extracted {
        csv("potential_extracted.csv", v)?;
    }
    if let Some(sp) = &report.spectrum {
        let path = dir.join("spectrum.json");
        fs::write(&path, to_json(sp)?)?;
        written.push(path);
    }
    let path = dir.join("report.json");
    fs::write(&path, to_json(report)?)?;
    written.push(path);
    if report.hologram.is_some() {
        let path = dir.join("cost_history.json");
        fs::write(&path, to_json(&report.cost_history)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Numerical(format!("serialisation failed: {e}")))
}
