#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use primepot::hologram::{self, HologramState, SrReadout};
use primepot::pipeline::{self, PipelineConfig, SequenceSpec, StageError};
use primepot::scattering::{self, Filter, FilterConfig, Propagator};
use primepot::semiclassical;
use primepot::sequences::{self, IntegerSequence};
use primepot::units::{self, PhysicalContext};
use primepot::eigensolver::compare_levels;
use primepot::{bound_states, design_potential, Grid, KineticConvention, PotentialGrid};

#[derive(Parser)]
#[command(name = "primepot", version, about = "Potentials with prescribed integer spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List primes up to a limit or the first N.
    Primes(ListArgs),
    /// List lucky numbers up to a limit or the first N.
    Lucky(ListArgs),
    /// Prime counting function and its smooth estimates.
    Pi {
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = semiclassical::DEFAULT_TERMS)]
        terms: usize,
    },
    /// Build a potential with the given bound levels.
    Design {
        #[arg(long)]
        levels: SequenceSpec,
        #[arg(long, default_value_t = 12.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.005)]
        spacing: f64,
        #[arg(long, default_value = "half")]
        kinetic: KineticConvention,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bound states of a potential CSV.
    Solve {
        potential: PathBuf,
        #[arg(long, default_value = "half")]
        kinetic: KineticConvention,
        /// Target levels to compare with; defaults to the rounded levels.
        #[arg(long)]
        targets: Option<SequenceSpec>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Semiclassical prime potential.
    Semiclassical {
        #[arg(long, default_value_t = 2.0)]
        e0: f64,
        #[arg(long, default_value_t = 100.0)]
        vmax: f64,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = semiclassical::DEFAULT_TERMS)]
        terms: usize,
        #[arg(long, default_value = "half")]
        kinetic: KineticConvention,
        #[arg(long, default_value_t = 0.005)]
        spacing: f64,
        /// Grid half width; defaults to 10% beyond the outermost turning point.
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transmission spectrum of a potential CSV.
    Scatter {
        potential: PathBuf,
        #[arg(long)]
        emin: f64,
        #[arg(long)]
        emax: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value = "half")]
        kinetic: KineticConvention,
        /// Cap the potential at this level before scattering.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Lead level used with --cutoff.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lead: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Lucky-prime transmission filter.
    Filter {
        /// Energies to test; repeat or separate with commas.
        #[arg(long, value_delimiter = ',', required = true)]
        w: Vec<u64>,
        #[arg(long, default_value_t = FilterConfig::default().lucky_count)]
        lucky_count: usize,
        #[arg(long, default_value_t = FilterConfig::default().prime_count)]
        prime_count: usize,
        #[arg(long, default_value_t = FilterConfig::default().separation)]
        separation: f64,
    },
    /// Phase-only hologram synthesis and profile extraction.
    #[command(subcommand)]
    Holo(HoloCommand),
    /// Physical energy scale of the dimensionless units.
    Units {
        /// `rb87` or a mass in kg.
        #[arg(long, default_value = "rb87")]
        mass: String,
        /// Dimensionless length of the potential window.
        #[arg(long)]
        l: f64,
        /// Physical length of the window in metres.
        #[arg(long = "L")]
        length: f64,
    },
    /// Design, optional hologram, solve and compare.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ListArgs {
    #[arg(long, conflicts_with = "count", required_unless_present = "count")]
    limit: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum HoloCommand {
    /// Optimise the SLM phase for a potential CSV.
    Synth {
        potential: PathBuf,
        #[arg(long, default_value_t = hologram::DEFAULT_M)]
        m: usize,
        #[arg(long, default_value_t = hologram::DEFAULT_SR_LENGTH)]
        sr: usize,
        #[arg(long, default_value_t = hologram::DEFAULT_STEEPNESS)]
        d: i32,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Defaults to the top of the potential plus a fifth of its depth.
        #[arg(long)]
        ceiling: Option<f64>,
        /// Half width of the imaged window; defaults to the whole grid.
        #[arg(long)]
        window: Option<f64>,
        /// `phase.csv,intensity.csv`
        #[arg(long, value_delimiter = ',', required = true)]
        out: Vec<PathBuf>,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Recover the potential from an output intensity matrix.
    Extract {
        intensity: PathBuf,
        /// SR readout written by `synth`; defaults to `<intensity>.map.json`.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 0.005)]
        spacing: f64,
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sequence: Option<String>,
    #[arg(long)]
    hologram: bool,
    #[arg(long)]
    kinetic: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Any config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

/// Exit status for a failure: 1 for bad input, 2 for numerical trouble.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<StageError>() {
            return if e.is_validation() || matches!(e.source, primepot::Error::Io(_)) { 1 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<primepot::Error>() {
            return if e.is_validation() || matches!(e, primepot::Error::Io(_)) { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn read_potential(path: &Path) -> anyhow::Result<PotentialGrid> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PotentialGrid::read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_potential(path: &Path, v: &PotentialGrid) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    v.write_csv(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = pipeline::to_json(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_matrix(path: &Path, rows: usize, values: &[f64]) -> anyhow::Result<()> {
    let cols = values.len() / rows;
    let mut out = String::new();
    for r in values.chunks(cols) {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Dense square matrix, row-major.
fn read_matrix(path: &Path) -> anyhow::Result<(usize, Vec<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| primepot::Error::Parse(format!("{}: bad number `{tok}`", path.display())))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || values.len() != rows * rows {
        return Err(primepot::Error::Parse(format!("{}: matrix is not square", path.display())).into());
    }
    Ok((rows, values))
}

fn print_list(seq: &IntegerSequence, json: bool) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", serde_json::to_string(seq.values())?)?;
    } else {
        for v in seq.values() {
            writeln!(out, "{v}")?;
        }
    }
    Ok(())
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Primes(a) => {
            let seq = match (a.limit, a.count) {
                (Some(limit), _) => sequences::sieve_primes(limit),
                (None, Some(n)) => sequences::first_primes(n),
                _ => unreachable!("clap requires one of the two"),
            };
            print_list(&seq, a.json)?;
        }
        Command::Lucky(a) => {
            let seq = match (a.limit, a.count) {
                (Some(limit), _) => sequences::sieve_lucky(limit),
                (None, Some(n)) => sequences::first_lucky(n),
                _ => unreachable!("clap requires one of the two"),
            };
            print_list(&seq, a.json)?;
        }
        Command::Pi { x, terms } => {
            let est = sequences::counting_estimates(x, terms)?;
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Command::Design {
            levels,
            half_width,
            spacing,
            kinetic,
            out,
        } => {
            let targets = levels.load()?.to_f64();
            let grid = Grid::with_spacing(half_width, spacing)?;
            let v = design_potential(&targets, grid, kinetic.scale())?;
            write_potential(&out, &v)?;
        }
        Command::Solve {
            potential,
            kinetic,
            targets,
            json,
        } => {
            let v = read_potential(&potential)?;
            let spectrum = bound_states(&v, kinetic.scale(), None)?;
            let mut levels = spectrum.levels();
            let targets: Vec<f64> = match targets {
                Some(spec) => spec.load()?.to_f64(),
                None => levels.iter().map(|e| e.round()).collect(),
            };
            if levels.len() < targets.len() {
                bail!(primepot::Error::Numerical(format!(
                    "found {} levels for {} targets",
                    levels.len(),
                    targets.len()
                )));
            }
            levels.truncate(targets.len());
            let d = compare_levels(&levels, &targets)?;
            for (e, t) in levels.iter().zip(&targets) {
                println!("{e:.6}\t{t}");
            }
            if let Some(path) = json {
                let report = serde_json::json!({
                    "eigenvalues": levels,
                    "continuum_edge": spectrum.continuum_edge,
                    "targets": targets,
                    "per_level_frac": d.per_level_frac,
                    "rms_frac": d.rms_frac,
                    "rounds_to_target": d.rounds_to_target,
                });
                write_json(&path, &report)?;
            }
        }
        Command::Semiclassical {
            e0,
            vmax,
            samples,
            terms,
            kinetic,
            spacing,
            half_width,
            out,
        } => {
            let s = kinetic.scale();
            let profile = semiclassical::prime_profile(e0, vmax, samples, terms, s)?;
            let half = half_width.unwrap_or(1.1 * profile.x_max());
            let v = profile.to_potential(Grid::with_spacing(half, spacing)?)?;
            write_potential(&out, &v)?;
        }
        Command::Scatter {
            potential,
            emin,
            emax,
            steps,
            kinetic,
            cutoff,
            lead,
            json,
        } => {
            if !(emax > emin) || steps < 2 {
                bail!(primepot::Error::InvalidInput("need emax > emin and steps >= 2".into()));
            }
            let mut v = read_potential(&potential)?;
            if let Some(c) = cutoff {
                v = scattering::truncate_with_lead(&v, c, lead)?.potential;
            }
            let energies: Vec<f64> = (0..steps)
                .map(|i| emin + (emax - emin) * i as f64 / (steps - 1) as f64)
                .collect();
            let scan = scattering::transmission_scan(&v, &energies, kinetic.scale(), Propagator::Magnus)?;
            for r in &scan.resonances {
                println!("{:.6}\t{:.6}\t{:.3e}", r.energy, r.peak, r.width);
            }
            if let Some(path) = json {
                write_json(&path, &scan)?;
            }
        }
        Command::Filter {
            w,
            lucky_count,
            prime_count,
            separation,
        } => {
            let filter = Filter::build(FilterConfig {
                lucky_count,
                prime_count,
                separation,
                ..FilterConfig::default()
            })?;
            let outcomes = w.iter().map(|&w| filter.probe(w)).collect::<Result<Vec<_>, _>>()?;
            println!("{}", serde_json::to_string_pretty(&outcomes)?);
        }
        Command::Holo(HoloCommand::Synth {
            potential,
            m,
            sr,
            d,
            iters,
            seed,
            ceiling,
            window,
            out,
            history,
        }) => {
            if out.len() != 2 {
                bail!(primepot::Error::InvalidInput("--out takes phase.csv,intensity.csv".into()));
            }
            let v = read_potential(&potential)?;
            let top = v.max();
            let ceiling = ceiling.unwrap_or(top + 0.2 * (top - v.min()));
            let window = window.unwrap_or(v.grid.half_width());
            let target = hologram::potential_to_target(&v, sr, ceiling, window)?;
            let state = HologramState::for_target(m, &target, d)?;
            let illum = hologram::uniform_illumination(m);
            let run = hologram::optimize_phase(&state, &illum, iters, Some(seed))?;
            let field = hologram::propagate(&run.state, &illum)?;
            let readout = SrReadout::of(&run.state).ok_or_else(|| anyhow!("signal region has no row readout"))?;
            write_matrix(&out[0], m, &run.state.phase)?;
            write_matrix(&out[1], field.n, &field.intensity())?;
            write_json(&map_path(&out[1]), &readout)?;
            if let Some(path) = history {
                write_json(&path, &run.history)?;
            }
            println!(
                "cost {:.6e} -> {:.6e}, rms SR error {:.4}",
                run.history[0],
                run.history.last().copied().unwrap_or(f64::NAN),
                hologram::sr_intensity_error(&run.state, &field)
            );
        }
        Command::Holo(HoloCommand::Extract {
            intensity,
            map,
            spacing,
            margin,
            out,
        }) => {
            let map = map.unwrap_or_else(|| map_path(&intensity));
            let readout: SrReadout = serde_json::from_str(
                &fs::read_to_string(&map).with_context(|| format!("reading {}", map.display()))?,
            )
            .with_context(|| format!("parsing {}", map.display()))?;
            let (n, values) = read_matrix(&intensity)?;
            let v = hologram::extract_from_intensity(&values, n, &readout, spacing, margin)?;
            write_potential(&out, &v)?;
        }
        Command::Units { mass, l, length } => {
            let ctx = PhysicalContext::new(units::parse_mass(&mass)?, l, length)?;
            println!("{}", serde_json::to_string_pretty(&units::energy_scale(&ctx))?);
        }
        Command::Pipeline(args) => return run_pipeline(args),
    }
    Ok(0)
}

fn map_path(intensity: &Path) -> PathBuf {
    let mut s = intensity.as_os_str().to_owned();
    s.push(".map.json");
    PathBuf::from(s)
}

fn run_pipeline(args: PipelineArgs) -> anyhow::Result<u8> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::parse(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => PipelineConfig::default(),
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(v) = args.sequence {
        overrides.push(("sequence".into(), v));
    }
    if args.hologram {
        overrides.push(("hologram".into(), "true".into()));
    }
    if let Some(v) = args.kinetic {
        overrides.push(("kinetic".into(), v));
    }
    if let Some(v) = args.seed {
        overrides.push(("seed".into(), v));
    }
    if let Some(v) = args.iterations {
        overrides.push(("iterations".into(), v));
    }
    if let Some(v) = args.out_dir {
        overrides.push(("output_dir".into(), v.display().to_string()));
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| primepot::Error::Parse(format!("--set expects key=value, got `{kv}`")))?;
        overrides.push((k.trim().into(), v.trim().into()));
    }
    for (k, v) in &overrides {
        cfg.set(k, v)?;
    }
    if args.print_config {
        print!("{}", cfg.to_file_string());
        return Ok(0);
    }
    let report = pipeline::run_pipeline(&cfg)?;
    pipeline::write_outputs(&report, &cfg.output_dir)?;
    for ((e, t), ok) in report
        .levels
        .iter()
        .zip(&report.targets)
        .zip(&report.discrepancy.rounds_to_target)
    {
        println!("{e:.6}\t{t}\t{}", if *ok { "ok" } else { "MISS" });
    }
    println!("rms fractional error {:.3e}", report.discrepancy.rms_frac);
    Ok(if report.all_round { 0 } else { 2 })
}
