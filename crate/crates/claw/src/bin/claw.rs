use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use claw::constructions::{default_schedule, hat_u, prop33_datum, sawtooth};
use claw::decomposition::{decompose, verify_theorem_dec};
use claw::harness::{self, Baselines, ExperimentName, ExperimentSpec};
use claw::lax_oleinik::{solve_burgers, tv_decay_curve};
use claw::palpha::palpha_norm_upper;
use claw::random::{random_palpha, random_pl};
use claw::{Error, PLFunction};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

/// Burgers' equation on piecewise-linear data: exact solutions, decay
/// curves, interpolation norms, decompositions and experiments.
///
/// Set CLAW_THREADS to cap the worker count.
#[derive(Parser)]
#[command(name = "claw", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    /// `t = 2^-q` inside `[tmin, tmax]`.
    Dyadic,
    /// `--points` geometrically spaced times from `tmax` down to `tmin`.
    Geometric,
}

#[derive(Subcommand)]
enum Cmd {
    /// Entropy solution at time t, as JSON.
    Solve {
        #[command(flatten)]
        datum: DatumArg,
        #[arg(long)]
        t: f64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of t, TV(S_t u) and t^(1-alpha) TV(S_t u).
    Decay {
        #[command(flatten)]
        datum: DatumArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 2f64.powi(-12))]
        tmin: f64,
        #[arg(long, default_value_t = 1.0)]
        tmax: f64,
        #[arg(long, value_enum, default_value_t = Grid::Dyadic)]
        grid: Grid,
        /// Number of times on a geometric grid.
        #[arg(long, default_value_t = 13)]
        points: usize,
    },
    /// Level decomposition and its verification report.
    Decompose {
        #[command(flatten)]
        datum: DatumArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Finest witness level.
        #[arg(long = "K", default_value_t = 12)]
        k_max: u32,
        /// Envelope layers per level.
        #[arg(long = "imax", default_value_t = 24)]
        i_max: u32,
        /// Write the decomposition as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified upper bound on the interpolation norm.
    Palpha {
        #[command(flatten)]
        datum: DatumArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Finest dyadic lambda is 2^-Q.
        #[arg(long = "Q", default_value_t = 24)]
        q_max: u32,
        /// Write the estimate as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named experiment (e1..e5) and write its report.
    Experiment {
        /// Experiment name, `e3` or `e3_theorem61`.
        #[arg(long = "name", required_unless_present = "calibrate")]
        name: Option<String>,
        /// JSON parameters: a file path or an inline object.
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for report.json, CSVs and SVG plots.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Baselines file to compare against instead of the built-in one.
        #[arg(long)]
        baselines: Option<PathBuf>,
        /// Measure the baseline constants and write them to this path.
        #[arg(long)]
        calibrate: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DatumArg {
    /// Datum file: `{"nodes": [...]}`, `{"points": [[x, v], ...]}` or an
    /// example descriptor such as `{"example": "sawtooth", "beta": 1}`.
    #[arg(long, conflicts_with = "gen")]
    input: Option<PathBuf>,
    /// Built-in datum: `sawtooth:BETA:N`, `hat:T`, `triangle:ELL:H`,
    /// `random:SEED:NODES` or `palpha:ALPHA:LEVELS:SEED`.
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Deserialize)]
#[serde(tag = "example", rename_all = "snake_case", deny_unknown_fields)]
enum Descriptor {
    Sawtooth {
        beta: f64,
        #[serde(default = "default_teeth")]
        n_max: usize,
    },
    HatU {
        t: f64,
    },
    Prop33 {
        #[serde(rename = "J")]
        j: usize,
    },
}

fn default_teeth() -> usize {
    4000
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DatumFile {
    Example(Descriptor),
    Nodes(PLFunction),
    Points { points: Vec<(f64, f64)> },
}

fn from_descriptor(d: Descriptor) -> claw::Result<PLFunction> {
    match d {
        Descriptor::Sawtooth { beta, n_max } => {
            if n_max > harness::MAX_TEETH {
                return Err(Error::Resource(format!("n_max = {n_max} exceeds {}", harness::MAX_TEETH)));
            }
            sawtooth(beta, n_max)
        }
        Descriptor::HatU { t } => hat_u(t)?.materialize(),
        Descriptor::Prop33 { j } => {
            if j > harness::MAX_MULTISCALE_LEVELS {
                return Err(Error::Resource(format!("J = {j} exceeds {}", harness::MAX_MULTISCALE_LEVELS)));
            }
            let (u, count) = prop33_datum(j, &default_schedule(j))?.materialize_prefix();
            if count < j {
                return Err(Error::Resource(format!("only the first {count} of {j} levels fit in memory")));
            }
            Ok(u)
        }
    }
}

fn load_datum(d: &DatumArg) -> claw::Result<PLFunction> {
    match (&d.input, &d.gen) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p)?;
            match serde_json::from_str::<DatumFile>(&text)
                .map_err(|_| Error::Invalid(format!("{} is not a datum, point list or example descriptor", p.display())))?
            {
                DatumFile::Example(d) => from_descriptor(d),
                DatumFile::Nodes(u) => Ok(u),
                DatumFile::Points { points } => PLFunction::from_points(&points),
            }
        }
        (None, Some(g)) => generate(g),
        (None, None) => Err(Error::Invalid("one of --input or --gen is required".into())),
    }
}

fn generate(spec: &str) -> claw::Result<PLFunction> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Invalid(format!("cannot parse datum {spec:?}"));
    let num = |i: usize| parts.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
    let int = |i: usize| parts.get(i).and_then(|s| s.parse::<u64>().ok()).ok_or_else(bad);
    match parts[0] {
        "sawtooth" => from_descriptor(Descriptor::Sawtooth { beta: num(1)?, n_max: int(2)? as usize }),
        "hat" => from_descriptor(Descriptor::HatU { t: num(1)? }),
        "triangle" => Ok(PLFunction::triangle(0.0, num(1)?, num(2)?)),
        "random" => Ok(random_pl(&mut ChaCha8Rng::seed_from_u64(int(1)?), int(2)? as usize, 1.0)),
        "palpha" => {
            let (alpha, levels) = (num(1)?, int(2)? as u32);
            if levels > harness::MAX_RANDOM_LEVELS {
                return Err(Error::Resource(format!("levels = {levels} exceeds {}", harness::MAX_RANDOM_LEVELS)));
            }
            Ok(random_palpha(&mut ChaCha8Rng::seed_from_u64(int(3)?), alpha, levels))
        }
        _ => Err(bad()),
    }
}

fn time_grid(tmin: f64, tmax: f64, grid: Grid, points: usize) -> claw::Result<Vec<f64>> {
    if !(tmin > 0.0 && tmin <= tmax && tmax <= 1.0) {
        return Err(Error::Invalid(format!("need 0 < tmin <= tmax <= 1, got [{tmin}, {tmax}]")));
    }
    let times = match grid {
        Grid::Dyadic => {
            let lo = (1.0 / tmax).log2().ceil() as i32;
            let hi = (1.0 / tmin).log2().floor() as i32;
            (lo..=hi).map(|q| 0.5f64.powi(q)).collect::<Vec<_>>()
        }
        Grid::Geometric => {
            if points < 2 {
                return Err(Error::Invalid("a geometric grid needs at least 2 points".into()));
            }
            let r = (tmin / tmax).powf(1.0 / (points - 1) as f64);
            (0..points).map(|i| tmax * r.powi(i as i32)).collect()
        }
    };
    if times.is_empty() {
        return Err(Error::Invalid(format!("no dyadic time in [{tmin}, {tmax}]")));
    }
    Ok(times)
}

// stdout writes that surface a closed pipe as an error instead of a panic
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

fn read_params(p: &Option<String>) -> claw::Result<serde_json::Value> {
    let Some(s) = p else { return Ok(serde_json::Value::Null) };
    let text = if s.trim_start().starts_with('{') { s.clone() } else { std::fs::read_to_string(s)? };
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("--params: {e}")))
}

fn emit(body: &str, out: Option<&Path>) -> claw::Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, body)?),
        None => {
            say!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> claw::Result<bool> {
    match cli.cmd {
        Cmd::Solve { datum, t, out } => {
            let u = load_datum(&datum)?;
            emit(&solve_burgers(&u, t)?.to_json(), out.as_deref())?;
            Ok(true)
        }
        Cmd::Decay { datum, alpha, tmin, tmax, grid, points } => {
            let u = load_datum(&datum)?;
            let c = tv_decay_curve(&u, &time_grid(tmin, tmax, grid, points)?, alpha)?;
            write!(std::io::stdout(), "{}", c.to_csv())?;
            eprintln!("fitted exponent {}", c.fitted_exponent);
            Ok(true)
        }
        Cmd::Decompose { datum, alpha, k_max, i_max, out } => {
            let u = load_datum(&datum)?;
            let (d, est) = decompose(&u, alpha, k_max, i_max)?;
            let rep = verify_theorem_dec(&u, &d);
            for l in rep.levels.iter().filter(|l| l.tv > 0.0) {
                say!("k {:>3}  tv {:<12.6e} support {:<12.6e} c_needed {:.6e}", l.k, l.tv, l.support, l.c_needed);
            }
            say!("norm upper {:.6e}  smallest C {:.6e}  residual {:.3e}", est.norm_upper, rep.smallest_c, rep.residual_measured);
            if !rep.violations.is_empty() {
                say!("violations at k = {:?}", rep.violations);
            }
            if let Some(p) = out {
                std::fs::write(p, d.to_json())?;
            }
            Ok(rep.passed())
        }
        Cmd::Palpha { datum, alpha, q_max, out } => {
            let u = load_datum(&datum)?;
            let est = palpha_norm_upper(&u, alpha, q_max)?;
            say!("lambda,tv,measure,cost");
            for r in est.rows() {
                say!("{},{},{},{}", r.0, r.1, r.2, r.3);
            }
            eprintln!("norm upper {}  certified {}", est.norm_upper, est.certified());
            if let Some(p) = out {
                std::fs::write(p, est.to_json())?;
            }
            Ok(true)
        }
        Cmd::Experiment { name, params, seed, out, baselines, calibrate } => {
            if let Some(path) = calibrate {
                let b = Baselines::calibrate()?;
                std::fs::write(&path, b.to_json() + "\n")?;
                say!("{}", b.to_json());
                return Ok(true);
            }
            let name = name.ok_or_else(|| Error::Invalid("--name is required".into()))?;
            let spec = ExperimentSpec {
                name: ExperimentName::parse(&name)?,
                parameters: read_params(&params)?,
                seed,
                output_dir: out,
            };
            let base = match baselines {
                Some(p) => Baselines::from_file(&p)?,
                None => Baselines::frozen(),
            };
            let report = harness::run_with(&spec, &base)?;
            for v in &report.verdicts {
                say!("{}", v.line());
            }
            if let Some(dir) = &spec.output_dir {
                let files = harness::write_report(&report, dir)?;
                eprintln!("wrote {} files to {}", files.len(), dir.display());
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Ok(n) = std::env::var("CLAW_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: CLAW_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Resource(_) => ExitCode::from(EXIT_RESOURCE),
                _ => ExitCode::from(EXIT_USAGE),
            }
        }
    }
}
