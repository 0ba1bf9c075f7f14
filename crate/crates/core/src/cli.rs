//! `sinusoid-ga` command line: `synth`, `decompose` and `profile`.
//!
//! Exit status is 0 on success, 1 for usage problems (bad flags or settings)
//! and 2 for data problems (unreadable or malformed input, failed writes).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::decomposition::{
    decompose_adaptive_with_norm, decompose_fixed_with_norm, AdaptiveConfig,
};
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::io::{
    emit_trace, generate_synthetic, load_series, random_components, read_json, write_json,
    write_profile, write_series, Bounds, GroundTruth, Mode, ResultDocument, RunConfig,
    SeriesFormat,
};
use crate::signal::{instantaneous_profile, Grid, Norm, SinusoidalComponent};

#[derive(Debug, Parser)]
#[command(
    name = "sinusoid-ga",
    version,
    about = "Decompose a time series into time-windowed sinusoids with a genetic algorithm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic series from known components
    Synth(SynthArgs),
    /// Fit windowed sinusoids to a series
    Decompose(DecomposeArgs),
    /// Per-sample amplitude and angular frequency of a result
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    L2,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => Norm::L1,
            NormArg::L2 => Norm::L2,
        }
    }
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Upper amplitude bound [default: 2 max|R|]
    #[arg(long)]
    a_max: Option<f64>,
    /// Amplitude resolution [default: a-max / 1024]
    #[arg(long)]
    a_step: Option<f64>,
    /// Upper frequency bound [default: Nyquist]
    #[arg(long)]
    f_max: Option<f64>,
    /// Frequency resolution [default: f-max / 1024]
    #[arg(long)]
    f_step: Option<f64>,
    /// Phase resolution in radians [default: 2π / 256]
    #[arg(long)]
    phi_step: Option<f64>,
}

impl BoundsArgs {
    fn bounds(&self) -> Bounds {
        Bounds {
            a_max: self.a_max,
            a_step: self.a_step,
            f_max: self.f_max,
            f_step: self.f_step,
            phi_step: self.phi_step,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of samples
    #[arg(long)]
    length: usize,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// Uniform noise amplitude
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Component as `a,f,phi,t_start,t_end`; repeatable
    #[arg(long = "component", value_name = "A,F,PHI,START,END")]
    components: Vec<String>,
    /// Add this many random components on the encoding grid of the bounds
    #[arg(long, default_value_t = 0)]
    random: usize,
    #[command(flatten)]
    bounds: BoundsArgs,
    /// Series CSV to write
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON to write
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    /// Series CSV (`t,value`, or one value column with --dt)
    #[arg(long)]
    input: PathBuf,
    /// Sample step for single-column input
    #[arg(long)]
    dt: Option<f64>,
    /// Start time for single-column input
    #[arg(long, default_value_t = 0.0, requires = "dt")]
    t0: f64,
    #[arg(long, value_enum, default_value_t = Mode::Fixed)]
    mode: Mode,
    /// Number of components (fixed mode)
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Most simultaneous components (adaptive mode)
    #[arg(long, default_value_t = 2)]
    nmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generation budget (inner budget is --inner-generations in adaptive mode)
    #[arg(long, default_value_t = 2000)]
    generations: usize,
    #[arg(long, default_value_t = 100)]
    pop: usize,
    /// Generations without improvement before stopping
    #[arg(long, default_value_t = 200)]
    stall: usize,
    /// Per-bit mutation probability [default: 1 / chromosome length]
    #[arg(long)]
    mutation: Option<f64>,
    /// Generations between local refinements of the best; 0 disables
    #[arg(long, default_value_t = 10)]
    refine_interval: usize,
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    norm: NormArg,
    /// Per-window penalty in adaptive mode [default: 1e-3 mean|R|]
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 200)]
    inner_generations: usize,
    #[arg(long, default_value_t = 60)]
    outer_generations: usize,
    #[arg(long, default_value_t = 30)]
    outer_pop: usize,
    #[command(flatten)]
    bounds: BoundsArgs,
    /// Result JSON [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Convergence trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Result JSON written by `decompose`
    #[arg(long)]
    result: PathBuf,
    /// Profile CSV [default: standard output]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the command line and returns the exit status.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let outcome = match cli.command {
        Command::Synth(args) => synth(&args, stdout),
        Command::Decompose(args) => decompose(&args, stdout),
        Command::Profile(args) => profile(&args, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidSpec { .. } | Error::InvalidComponent(_) => 1,
        _ => 2,
    }
}

fn parse_component(text: &str) -> Result<SinusoidalComponent> {
    let bad = || Error::InvalidComponent(format!("expected `a,f,phi,t_start,t_end`, got `{text}`"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(bad());
    }
    let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let index = |s: &str| s.parse::<usize>().map_err(|_| bad());
    SinusoidalComponent::new(
        real(parts[0])?,
        real(parts[1])?,
        real(parts[2])?,
        index(parts[3])?,
        index(parts[4])?,
    )
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidSeries(msg) => Error::InvalidConfig(msg),
        other => other,
    }
}

fn synth(args: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let grid = Grid::new(args.t0, args.dt, args.length).map_err(config_error)?;
    let mut components = args
        .components
        .iter()
        .map(|c| parse_component(c))
        .collect::<Result<Vec<_>>>()?;
    if args.random > 0 {
        let specs = args
            .bounds
            .bounds()
            .specs(grid, 1.0)
            .map_err(config_error)?;
        components.extend(random_components(args.random, &specs, args.seed)?);
    }
    if let Some(c) = components.iter().find(|c| c.t_end() >= grid.len) {
        return Err(Error::InvalidComponent(format!(
            "window [{}, {}] exceeds series of length {}",
            c.t_start(),
            c.t_end(),
            grid.len
        )));
    }
    let series = generate_synthetic(&components, grid, args.noise, args.seed)?;
    write_series(&series, &args.out)?;
    if let Some(path) = &args.truth {
        let truth = GroundTruth {
            grid,
            noise: args.noise,
            seed: args.seed,
            components: components.clone(),
        };
        write_json(&truth, path)?;
    }
    let _ = writeln!(
        stdout,
        "wrote {} samples with {} component(s) to {}",
        grid.len,
        components.len(),
        args.out.display()
    );
    Ok(())
}

fn decompose(args: &DecomposeArgs, stdout: &mut dyn Write) -> Result<()> {
    let format = match args.dt {
        Some(dt) => SeriesFormat::SingleColumn { t0: args.t0, dt },
        None => SeriesFormat::TwoColumn,
    };
    let data = load_series(&args.input, format)?;
    if data.len() < 2 {
        return Err(Error::InvalidSeries("need at least two samples".into()));
    }
    let specs = args.bounds.bounds().specs_for(&data)?;
    let ga = GaConfig {
        population_size: args.pop,
        max_generations: args.generations,
        mutation_prob_per_bit: args.mutation,
        stall_generations: args.stall,
        seed: args.seed,
        refine_interval: args.refine_interval,
        ..GaConfig::default()
    };
    let norm = Norm::from(args.norm);
    let (result, n, n_max, adaptive) = match args.mode {
        Mode::Fixed => {
            if args.n < 1 {
                return Err(Error::InvalidConfig("--n must be at least 1".into()));
            }
            let r = decompose_fixed_with_norm(&data, args.n, &specs, &ga, norm)?;
            (r, Some(args.n), None, None)
        }
        Mode::Adaptive => {
            let defaults = AdaptiveConfig::default();
            let adaptive = AdaptiveConfig {
                outer: GaConfig {
                    population_size: args.outer_pop,
                    max_generations: args.outer_generations,
                    seed: args.seed,
                    ..defaults.outer.clone()
                },
                inner_generations: args.inner_generations,
                lambda: args.lambda,
                ..defaults
            };
            let r = decompose_adaptive_with_norm(&data, args.nmax, &specs, &ga, &adaptive, norm)?;
            (r, None, Some(args.nmax), Some(adaptive))
        }
    };
    let config = RunConfig {
        input: args.input.display().to_string(),
        grid: data.grid(),
        mode: args.mode,
        n,
        n_max,
        norm,
        specs,
        ga,
        adaptive,
    };
    let document = ResultDocument::new(&result, config);
    if let Some(path) = &args.trace {
        emit_trace(&result.trace, path)?;
    }
    match &args.out {
        Some(path) => {
            write_json(&document, path)?;
            let _ = writeln!(
                stdout,
                "fitness {} with {} component(s) after {} generation(s)",
                result.final_fitness,
                result.components.len(),
                result.trace.len()
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&document)?;
            let _ = writeln!(stdout, "{text}");
        }
    }
    Ok(())
}

fn profile(args: &ProfileArgs, stdout: &mut dyn Write) -> Result<()> {
    let document: ResultDocument = read_json(&args.result)?;
    let grid = document.config.grid;
    let profile = instantaneous_profile(&document.components, grid)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            write_profile(&profile, grid, std::io::BufWriter::new(file))?;
        }
        None => write_profile(&profile, grid, stdout)?,
    }
    Ok(())
}
