//! Command-line front end. Exit codes: 0 success, 1 validation or
//! numerical failure, 2 usage error, 3 I/O or file format error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{build_operator, estimate_error, run_benchmark, write_csv, BenchConfig, Kernel};
use crate::compressed::{compress, CompressParams, Compressed, Format};
use crate::io;
use crate::operator::{
    compressed_oracle, dense_oracle, log_kernel_oracle, CountingOracle, LinearOracle, PointSet2D,
};
use crate::tree::IndexTree;
use crate::validate::validate;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HSKETCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hsketch", version, about = "Matrix-free HODLR / HBS / HBS-ID compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a dense matrix file or a built-in operator.
    Compress(CompressArgs),
    /// Apply a compressed matrix to the columns of a dense matrix file.
    Apply(ApplyArgs),
    /// Print the header and rank summary of a compressed file.
    Info { file: PathBuf },
    /// Check the structural invariants of a compressed file.
    Validate { file: PathBuf },
    /// Run a benchmark sweep described by a TOML file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// CSV output; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn positive_eps(s: &str) -> Result<f64, String> {
    let eps: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if eps > 0.0 && eps < 1.0 {
        Ok(eps)
    } else {
        Err(format!("tolerance must lie in (0, 1), got {s}"))
    }
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Dense matrix file (binary, or text when it ends in .txt).
    #[arg(long, conflicts_with = "kernel", required_unless_present = "kernel")]
    matrix: Option<PathBuf>,
    /// Built-in operator.
    #[arg(long, value_parser = clap::value_parser!(Kernel), requires = "n")]
    kernel: Option<Kernel>,
    /// Operator size for --kernel.
    #[arg(long)]
    n: Option<usize>,
    /// Points (one `x y` pair per line) for the log kernel instead of the default curve.
    #[arg(long, requires = "kernel")]
    points: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(Format), default_value = "hbsid")]
    format: Format,
    #[arg(long, value_parser = positive_eps, default_value = "1e-9")]
    eps: f64,
    /// Sample width (the fixed sampling rank).
    #[arg(long, default_value_t = 45)]
    rank: usize,
    #[arg(long, default_value_t = 50)]
    leaf_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid width of the frontal operator.
    #[arg(long, default_value_t = 41)]
    grid_width: usize,
    /// Write the JSON manifest + blob variant instead of the binary container.
    #[arg(long)]
    sidecar: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    file: PathBuf,
    /// Dense input block.
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    adjoint: bool,
    /// Apply the level-truncated matrix instead.
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

impl clap::builder::ValueParserFactory for Format {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Format>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for Kernel {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Kernel>().map_err(|e| e.to_string()))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::LevelNotBuilt { .. } => EXIT_USAGE,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::Factorization(_) => EXIT_INVALID,
    }
}

/// Loads a compressed matrix, from the JSON variant when the name ends in `.json`.
pub fn load_compressed(path: &Path) -> crate::Result<Compressed> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        io::load_sidecar(path)
    } else {
        io::load(path)
    }
}

fn reference_operator(a: &CompressArgs) -> crate::Result<Box<dyn LinearOracle>> {
    if let Some(path) = &a.matrix {
        return Ok(Box::new(dense_oracle(io::load_dense(path)?)?));
    }
    let kernel = a.kernel.expect("clap enforces --matrix or --kernel");
    let n = a.n.expect("clap enforces --n");
    if let Some(points) = &a.points {
        if kernel != Kernel::Logcurve {
            return Err(crate::error::invalid("--points only applies to the logcurve kernel"));
        }
        let pts = PointSet2D::load(points)?;
        if pts.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: pts.len() });
        }
        return Ok(Box::new(log_kernel_oracle(&pts)?));
    }
    let cfg = BenchConfig {
        kernel,
        format: a.format,
        sizes: vec![n],
        leaf_size: a.leaf_size,
        sample_width: a.rank,
        eps: a.eps,
        seed: a.seed,
        output: None,
        planted_rank: 5,
        grid_width: a.grid_width,
        trials: 10,
    };
    build_operator(&cfg, n)
}

fn cmd_compress(a: &CompressArgs, out: &mut dyn Write) -> crate::Result<i32> {
    let reference = reference_operator(a)?;
    let n = reference.dim();
    let tree = IndexTree::build(n, a.leaf_size)?;
    let params = CompressParams {
        sample_width: a.rank,
        eps: a.eps,
        seed: a.seed,
    };
    let counted = CountingOracle::new(&reference);
    let c = compress(&counted, &tree, a.format, params)?;
    if a.sidecar {
        io::save_sidecar(&a.out, &c)?;
    } else {
        io::save(&a.out, &c)?;
    }
    let e = estimate_error(&reference, &compressed_oracle(c.clone()), 10, a.seed.wrapping_add(1))?;
    writeln!(out, "format      {}", c.format())?;
    writeln!(out, "N           {n}")?;
    writeln!(out, "levels      {}", tree.depth())?;
    writeln!(out, "max rank    {}", c.max_rank())?;
    writeln!(out, "storage     {} bytes ({:.1} reals/dof)", c.storage_bytes(), c.storage_bytes() as f64 / (8.0 * n as f64))?;
    writeln!(out, "matvecs     {} A, {} A*", counted.matvec_count(), counted.adjoint_count())?;
    writeln!(out, "E           {e:.3e}")?;
    writeln!(out, "wrote       {}", a.out.display())?;
    Ok(EXIT_OK)
}

fn cmd_apply(a: &ApplyArgs, out: &mut dyn Write) -> crate::Result<i32> {
    let c = load_compressed(&a.file)?;
    let x = io::load_dense(&a.x)?;
    let y = match a.level {
        Some(level) => c.apply_truncated(level, &x, a.adjoint)?,
        None if a.adjoint => c.apply_adjoint(&x)?,
        None => c.apply(&x)?,
    };
    io::save_dense(&a.out, &y)?;
    writeln!(out, "wrote {} x {} to {}", y.nrows(), y.ncols(), a.out.display())?;
    Ok(EXIT_OK)
}

fn cmd_info(file: &Path, out: &mut dyn Write) -> crate::Result<i32> {
    let c = load_compressed(file)?;
    let tree = c.tree();
    let n = c.dim();
    writeln!(out, "format      {}", c.format())?;
    writeln!(out, "N           {n}")?;
    writeln!(out, "leaf size   {}", tree.leaf_size())?;
    writeln!(out, "levels      {}", tree.depth())?;
    writeln!(out, "nodes       {}", tree.node_count())?;
    writeln!(out, "max rank    {}", c.max_rank())?;
    writeln!(out, "storage     {} bytes ({:.1} reals/dof)", c.storage_bytes(), c.storage_bytes() as f64 / (8.0 * n as f64))?;
    for level in 1..=tree.depth() {
        let ranks: Vec<usize> = tree
            .nodes_on_level(level)?
            .iter()
            .map(|&id| match &c {
                Compressed::Hodlr(h) => h.block_rank(id),
                Compressed::Hbs(h) => h.u(id).ncols().max(h.v(id).ncols()),
                Compressed::HbsId(h) => h.skeleton_in(id).len().max(h.skeleton_out(id).len()),
            })
            .collect();
        let lo = ranks.iter().min().copied().unwrap_or(0);
        let hi = ranks.iter().max().copied().unwrap_or(0);
        writeln!(out, "level {level:<5} {} nodes, rank {lo}..{hi}", ranks.len())?;
    }
    Ok(EXIT_OK)
}

fn cmd_validate(file: &Path, out: &mut dyn Write) -> crate::Result<i32> {
    let c = load_compressed(file)?;
    let report = validate(&c);
    writeln!(out, "{report}")?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_INVALID })
}

fn cmd_bench(config: &Path, csv_out: Option<&Path>, out: &mut dyn Write) -> crate::Result<i32> {
    let cfg = BenchConfig::load(config)?;
    let reports = run_benchmark(&cfg)?;
    writeln!(
        out,
        "{:>7} {:>9} {:>11} {:>10} {:>10} {:>9} {:>10} {:>5}",
        "N", "matvecs", "T_compress", "T_net", "T_app", "M/N", "E", "k"
    )?;
    for r in &reports {
        writeln!(
            out,
            "{:>7} {:>9} {:>11.3} {:>10.3} {:>10.5} {:>9.1} {:>10.2e} {:>5}",
            r.n,
            r.n_matvec_apply + r.n_matvec_adjoint,
            r.t_compress_seconds,
            r.t_net_seconds,
            r.t_apply_seconds,
            r.storage_per_dof,
            r.error_e,
            r.max_rank_k
        )?;
    }
    if let Some(path) = csv_out.map(Path::to_path_buf).or(cfg.output.clone()) {
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf)?;
        io::write_atomic(&path, &buf)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(EXIT_OK)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{raw}'"))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    let result = match &cli.command {
        Command::Compress(a) => cmd_compress(a, out),
        Command::Apply(a) => cmd_apply(a, out),
        Command::Info { file } => cmd_info(file, out),
        Command::Validate { file } => cmd_validate(file, out),
        Command::Bench { config, out: csv } => cmd_bench(config, csv.as_deref(), out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
