use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rmperm::sim::{
    csv_row, parse_snr_grid, run_gain_sweep, DecoderKind, EtFlags, SimConfig, Simulation,
    SnrConvention, StoppingRule, CSV_HEADER,
};
use rmperm::{
    clt_threshold, perm_decode, precise_threshold, rm_code, sample_permutations, scl_decode,
    ChannelNoise, EarlyTermination, Error,
};

#[derive(Parser, Debug)]
#[command(
    name = "rmperm",
    version,
    about = "Permutation decoding of Reed-Muller codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// BLER curve over an SNR grid.
    Simulate(SimArgs),
    /// Early termination gain of each enabled technique with a fixed trial count.
    Gain {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        trials: u64,
    },
    /// Metric threshold for the all-zero codeword.
    Threshold {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value_t = Method::Precise)]
        method: Method,
        #[arg(long, default_value_t = rmperm::threshold::DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// Decode one LLR vector read from a whitespace-separated file.
    Decode {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        llrs: PathBuf,
        #[arg(long, value_enum, default_value_t = Decoder::Perm)]
        decoder: Decoder,
        #[arg(long, default_value_t = 1)]
        list: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    r: u32,
    #[arg(long, value_enum, default_value_t = Decoder::Perm)]
    decoder: Decoder,
    /// Permutations or list size.
    #[arg(long, default_value_t = 1)]
    list: usize,
    /// Early termination: any of `bb`, `snr:<p>`, `rep[:<Lc>]`, comma separated.
    #[arg(long, default_value = "none")]
    et: String,
    /// `start:step:stop` or a comma-separated list, in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr: String,
    #[arg(long, default_value = "ebn0")]
    convention: String,
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    all_zero: bool,
    #[arg(long, default_value_t = rmperm::threshold::DEFAULT_GRID_STEP)]
    grid_step: f64,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Decoder {
    Perm,
    Scl,
    Sc,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    Precise,
    Clt,
}

impl From<Decoder> for DecoderKind {
    fn from(d: Decoder) -> Self {
        match d {
            Decoder::Perm => DecoderKind::Perm,
            Decoder::Scl => DecoderKind::Scl,
            Decoder::Sc => DecoderKind::Sc,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn sim_config(a: &SimArgs) -> Result<SimConfig, Failure> {
    let mut cfg = SimConfig::new(a.m, a.r, a.decoder.into(), a.list);
    cfg.et = a.et.parse::<EtFlags>()?;
    cfg.snrs_db = parse_snr_grid(&a.snr)?;
    cfg.convention = a.convention.parse::<SnrConvention>()?;
    cfg.stopping = StoppingRule {
        min_errors: a.min_errors,
        max_trials: a.max_trials,
    };
    cfg.seed = a.seed;
    cfg.all_zero = a.all_zero;
    cfg.grid_step = a.grid_step;
    cfg.validate()?;
    Ok(cfg)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn simulate(a: &SimArgs) -> Result<(), Failure> {
    let cfg = sim_config(a)?;
    let sim = Simulation::new(cfg.clone())?;
    let mut out = open_out(a.out.as_deref())?;
    writeln!(out, "{CSV_HEADER}")?;
    out.flush()?;
    sim.run_all(cfg.stopping, |rec| {
        writeln!(out, "{}", csv_row(rec))
            .and_then(|_| out.flush())
            .map_err(|e| Error::Configuration(format!("writing output: {e}")))
    })?;
    Ok(())
}

fn gain(a: &SimArgs, trials: u64) -> Result<(), Failure> {
    let cfg = sim_config(a)?;
    let runs = run_gain_sweep(&cfg, trials)?;
    let several = runs.len() > 1;
    for (technique, records) in &runs {
        let path = match (&a.out, technique) {
            (Some(p), Some(t)) if several => Some(suffixed(p, t.name())),
            (p, _) => p.clone(),
        };
        let mut out = open_out(path.as_deref())?;
        if several && path.is_none() {
            writeln!(out, "# {}", technique.map_or("none", |t| t.name()))?;
        }
        writeln!(out, "{CSV_HEADER}")?;
        for rec in records {
            writeln!(out, "{}", csv_row(rec))?;
        }
        out.flush()?;
    }
    Ok(())
}

fn threshold(n: usize, sigma2: f64, p: f64, method: Method, step: f64) -> Result<(), Failure> {
    let noise = ChannelNoise::new(sigma2)?;
    match method {
        Method::Clt => println!("{:.6}", clt_threshold(n, &noise, p)?),
        Method::Precise => {
            let q = precise_threshold(n, &noise, p, step)?;
            if q.at_point_mass {
                println!("{:.6} (point mass at zero)", q.value);
            } else {
                println!("{:.6}", q.value);
            }
        }
    }
    Ok(())
}

fn read_llrs(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Failure::Usage(format!("invalid LLR '{t}' in {}", path.display())))
        })
        .collect()
}

fn bits(v: &[u8]) -> String {
    v.iter().map(|b| char::from(b'0' + b)).collect()
}

fn decode(
    m: u32,
    r: u32,
    path: &Path,
    decoder: Decoder,
    list: usize,
    seed: u64,
) -> Result<(), Failure> {
    use rand::SeedableRng;
    let spec = rm_code(m, r)?;
    let llrs = read_llrs(path)?;
    let (codeword, metric, ops) = match decoder {
        Decoder::Scl => {
            let out = scl_decode(&spec, &llrs, list)?;
            (out.codeword, out.metric, out.ops)
        }
        Decoder::Sc | Decoder::Perm => {
            let list = if matches!(decoder, Decoder::Sc) {
                1
            } else {
                list
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let perms = sample_permutations(m, list, &mut rng)?.perms;
            let out = perm_decode(
                &spec,
                &llrs,
                &perms,
                f64::NEG_INFINITY,
                EarlyTermination::none(),
            )?;
            (out.codeword, out.metric, out.stats.ops)
        }
    };
    println!("codeword {}", bits(&codeword));
    println!("metric {metric}");
    println!("ops f_plus={} f_minus={}", ops.f_plus, ops.f_minus);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Gain { sim, trials } => gain(&sim, trials),
        Command::Threshold {
            n,
            sigma2,
            p,
            method,
            grid_step,
        } => threshold(n, sigma2, p, method, grid_step),
        Command::Decode {
            m,
            r,
            llrs,
            decoder,
            list,
            seed,
        } => decode(m, r, &llrs, decoder, list, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
