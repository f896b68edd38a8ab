//! Batch commands behind the `structembed` binary.
//!
//! Settings come from flags, then a flat `key = value` config file, then
//! defaults. CSV floats are written with 17 significant digits.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bounds;
use crate::dataset;
use crate::diagnostics::{self, DiagnosticCaps, StatsOptions};
use crate::error::{invalid, Error, Result};
use crate::kernels::{self, EmbeddingPipeline, EstimateReport, Nonlinearity, SweepOptions};
use crate::rng::{derive_seed, DEFAULT_SEED};
use crate::structured::{Family, StructuredMatrix};
use crate::transforms::sample_gaussian;
use crate::verify::{self, time_median, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "structembed", version, about = "Structured Gaussian embeddings: diagnostics, kernel estimates, bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// χ, μ, μ̃ and column checks of a structured family.
    Diagnose(Flags),
    /// Kernel estimates for every dataset pair.
    Estimate(Flags),
    /// Estimation error as a function of m.
    Sweep(Flags),
    /// Structured against dense matvec timings.
    Bench(Flags),
    /// Run the acceptance criteria.
    Verify(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Family name, or a comma-separated list for diagnose and bench.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Nonlinearity: identity, heaviside, relu, arccos:B, sine, cosine, sincos.
    #[arg(long = "f")]
    pub f: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Comma-separated list of m values.
    #[arg(long)]
    pub m_values: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Decimal or 0x-prefixed hexadecimal.
    #[arg(long)]
    pub seed: Option<String>,
    /// Solve chromatic numbers exactly where the graph is small enough.
    #[arg(long)]
    pub exact: bool,
    /// Also run the Monte-Carlo oracle with this many trials.
    #[arg(long)]
    pub oracle: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ldr_rank: Option<usize>,
    #[arg(long)]
    pub ldr_nnz: Option<usize>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long)]
    pub max_graph_n: Option<usize>,
    /// Directory for coherence-graph edge lists.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
    /// Criteria to run, by name or number.
    #[arg(long)]
    pub only: Option<String>,
    /// Report a failed performance criterion without failing the run.
    #[arg(long)]
    pub perf_soft: bool,
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Largest dense baseline for bench, in entries.
    #[arg(long)]
    pub dense_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Diagnose,
    Estimate,
    Sweep,
    Bench,
    Verify,
}

/// Fully resolved settings of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub families: Vec<Family>,
    /// Rounded up to a power of two.
    pub n: usize,
    pub m: usize,
    pub f: Nonlinearity,
    pub dataset_path: Option<PathBuf>,
    pub m_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub caps: DiagnosticCaps,
    pub tau: f64,
    pub eps: f64,
    pub f_max: f64,
    pub exact: bool,
    pub oracle_trials: Option<usize>,
    pub max_pairs: usize,
    pub graph_out: Option<PathBuf>,
    pub only: Option<Vec<String>>,
    pub perf_soft: bool,
    pub dense_cap: usize,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Data { line: idx + 1, message: format!("expected key = value, got `{line}`") })?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

pub fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| invalid(format!("bad seed `{s}`")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| invalid(format!("bad {what} `{x}`"))))
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(invalid(format!("bad boolean `{other}`"))),
    }
}

struct Layered {
    file: HashMap<String, String>,
}

impl Layered {
    fn get<T>(&self, flag: Option<T>, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key).map(|s| parse(s)).transpose(),
        }
    }

    fn num<T: std::str::FromStr + Copy>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        self.get(flag, key, |s| s.trim().parse().map_err(|_| invalid(format!("bad value for {key}: `{s}`"))))
    }

    fn text(&self, flag: Option<&String>, key: &str) -> Option<String> {
        flag.cloned().or_else(|| self.file.get(key).cloned())
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.file.get(key).map(|s| parse_bool(s)).transpose()?.unwrap_or(false))
    }
}

impl RunConfig {
    pub fn resolve(command: CommandKind, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => parse_config(&fs::read_to_string(p)?)?,
            None => HashMap::new(),
        };
        let l = Layered { file };

        let ldr_rank = l.num(flags.ldr_rank, "ldr_rank")?;
        let ldr_nnz = l.num(flags.ldr_nnz, "ldr_nnz")?;
        let families = match l.text(flags.family.as_ref(), "family") {
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| {
                    let fam: Family = x.parse()?;
                    Ok(match fam {
                        Family::Ldr { rank, nnz } => {
                            Family::Ldr { rank: ldr_rank.unwrap_or(rank), nnz: ldr_nnz.unwrap_or(nnz) }
                        }
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let n_raw: usize = l.num(flags.n, "n")?.unwrap_or(64);
        if n_raw == 0 {
            return Err(invalid("n must be positive"));
        }
        let f = match l.text(flags.f.as_ref(), "f") {
            Some(s) => s.parse()?,
            None => Nonlinearity::Identity,
        };
        let m_values = match l.text(flags.m_values.as_ref(), "m_values") {
            Some(s) => parse_list(&s, "m value")?,
            None => Vec::new(),
        };
        let seed = match l.text(flags.seed.as_ref(), "seed") {
            Some(s) => parse_seed(&s)?,
            None => DEFAULT_SEED,
        };
        let defaults = DiagnosticCaps::default();
        let only = l.text(flags.only.as_ref(), "only").map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
        let dataset_path = flags.dataset.clone().or_else(|| l.file.get("dataset").map(PathBuf::from));
        let output_path = flags.output.clone().or_else(|| l.file.get("output").map(PathBuf::from));
        let graph_out = flags.graph_out.clone().or_else(|| l.file.get("graph_out").map(PathBuf::from));
        Ok(Self {
            command,
            families,
            n: n_raw.next_power_of_two(),
            m: l.num(flags.m, "m")?.unwrap_or(16),
            f,
            dataset_path,
            m_values,
            reps: l.num(flags.reps, "reps")?.unwrap_or(10),
            seed,
            output_path,
            caps: DiagnosticCaps {
                max_graph_n: l.num(flags.max_graph_n, "max_graph_n")?.unwrap_or(defaults.max_graph_n),
                ..defaults
            },
            tau: l.num(flags.tau, "tau")?.unwrap_or(0.25),
            eps: l.num(flags.eps, "eps")?.unwrap_or(0.01),
            f_max: l.num(flags.f_max, "f_max")?.unwrap_or(1.0),
            exact: l.flag(flags.exact, "exact")?,
            oracle_trials: l.num(flags.oracle, "oracle")?,
            max_pairs: l.num(flags.max_pairs, "max_pairs")?.unwrap_or(1000),
            graph_out,
            only,
            perf_soft: l.flag(flags.perf_soft, "perf_soft")?,
            dense_cap: l.num(flags.dense_cap, "dense_cap")?.unwrap_or(1 << 28),
        })
    }

    fn require_family(&self) -> Result<&[Family]> {
        if self.families.is_empty() {
            return Err(invalid("--family is required"));
        }
        Ok(&self.families)
    }

    fn load_dataset(&self) -> Result<Vec<Vec<f64>>> {
        let path = self.dataset_path.as_ref().ok_or_else(|| invalid("--dataset is required"))?;
        dataset::load(path)
    }
}

/// `{:.16e}`: 17 significant digits, round-trip exact.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the CSV to `--output` or to `out`.
fn emit(cfg: &RunConfig, csv: &str, out: &mut dyn Write) -> Result<()> {
    match &cfg.output_path {
        Some(p) => fs::write(p, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

pub const DIAGNOSE_HEADER: [&str; 9] = ["family", "m", "n", "chi", "chi_is_exact", "mu", "mu_tilde", "normalized", "orthogonal"];

pub fn cmd_diagnose(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let mut rows = Vec::new();
    for &fam in cfg.require_family()? {
        let a = StructuredMatrix::build(fam, cfg.m, cfg.n, cfg.seed)?;
        let stats = diagnostics::model_stats_with(&a, &StatsOptions { exact: cfg.exact, caps: cfg.caps, pairs: None })?;
        let normalized = diagnostics::check_normalized(&a)?;
        let orthogonal = diagnostics::check_orthogonality(&a)?;
        writeln!(
            log,
            "{fam}: m={} n={} chi={}{} mu={:.6} mu_tilde={:.6} normalized={normalized} orthogonal={orthogonal}",
            cfg.m,
            cfg.n,
            stats.chi,
            if stats.chi_is_exact { " (exact)" } else { " (upper bound)" },
            stats.mu,
            stats.mu_tilde
        )?;
        if let Some(dir) = &cfg.graph_out {
            write_graphs(&a, dir)?;
        }
        rows.push(vec![
            fam.to_string(),
            cfg.m.to_string(),
            cfg.n.to_string(),
            stats.chi.to_string(),
            stats.chi_is_exact.to_string(),
            fmt_float(stats.mu),
            fmt_float(stats.mu_tilde),
            normalized.to_string(),
            orthogonal.to_string(),
        ]);
    }
    emit(cfg, &csv_text(&DIAGNOSE_HEADER, &rows)?, out)
}

fn write_graphs(a: &StructuredMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let fam = a.family().to_string().replace(':', "_");
    for i in 0..a.rows() {
        for j in 0..a.rows() {
            let g = diagnostics::coherence_graph(a, i, j)?;
            fs::write(dir.join(format!("{fam}_{i}_{j}.txt")), g.to_edge_list())?;
        }
    }
    Ok(())
}

pub const ESTIMATE_HEADER: [&str; 8] = ["m", "family", "f", "pair_id", "estimate", "exact", "abs_error", "seed"];

pub fn cmd_estimate(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let fams = cfg.require_family()?;
    let data = cfg.load_dataset()?;
    if data.len() < 2 {
        return Err(Error::Data { line: 0, message: "pair kernels need at least two vectors".into() });
    }
    let dim = data[0].len();
    let pairs = kernels::dataset_pairs(&data, cfg.max_pairs, derive_seed(cfg.seed, u64::MAX))?;
    writeln!(log, "dataset: {} vectors of dimension {dim}, padded to {}", data.len(), dim.next_power_of_two())?;
    let mut header = ESTIMATE_HEADER.to_vec();
    if cfg.oracle_trials.is_some() {
        header.extend(["oracle_mean", "oracle_stderr"]);
    }
    let mut rows = Vec::new();
    for &fam in fams {
        let pipe = EmbeddingPipeline::new(fam, cfg.m, dim, cfg.f, cfg.seed)?;
        for (pid, &(i, j)) in pairs.iter().enumerate() {
            let mut rep = EstimateReport::new(&pipe, pid, &data[i], &data[j])?;
            if let Some(trials) = cfg.oracle_trials {
                rep.oracle = Some(kernels::mc_oracle(cfg.f, &data[i], &data[j], trials, derive_seed(cfg.seed, pid as u64))?);
            }
            let mut row = vec![
                rep.m.to_string(),
                rep.family.to_string(),
                rep.f.to_string(),
                pid.to_string(),
                fmt_float(rep.estimate),
                fmt_opt(rep.exact),
                fmt_opt(rep.abs_error),
                rep.seed.to_string(),
            ];
            if let Some((mean, se)) = rep.oracle {
                row.extend([fmt_float(mean), fmt_float(se)]);
            }
            rows.push(row);
        }
    }
    emit(cfg, &csv_text(&header, &rows)?, out)
}

pub const SWEEP_HEADER: [&str; 13] = [
    "m",
    "family",
    "f",
    "rmse",
    "max_abs_error",
    "reps",
    "pairs",
    "seed",
    "cor1_threshold",
    "cor1_tail",
    "cor2_threshold",
    "cor2_tail",
    "bound_note",
];

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let fams = cfg.require_family()?;
    if cfg.m_values.is_empty() {
        return Err(invalid("--m-values must list at least one m"));
    }
    let data = cfg.load_dataset()?;
    let n_points = data.len() as u64;
    let pair_count = kernels::dataset_pairs(&data, cfg.max_pairs, derive_seed(cfg.seed, u64::MAX))?.len();
    let mut rows = Vec::new();
    for &fam in fams {
        let sweep =
            kernels::error_sweep(&data, fam, cfg.f, &cfg.m_values, cfg.reps, cfg.seed, SweepOptions { max_pairs: cfg.max_pairs })?;
        for r in sweep {
            let m = r.m as u64;
            let opt = |x: Result<f64>| x.ok().map(fmt_float).unwrap_or_default();
            writeln!(log, "{fam} m={}: rmse {:.6}, max error {:.6}", r.m, r.rmse, r.max_abs_error)?;
            rows.push(vec![
                r.m.to_string(),
                fam.to_string(),
                cfg.f.to_string(),
                fmt_float(r.rmse),
                fmt_float(r.max_abs_error),
                cfg.reps.to_string(),
                pair_count.to_string(),
                cfg.seed.to_string(),
                opt(bounds::cor1_threshold(m, cfg.tau)),
                opt(bounds::cor1_tail(n_points, m, cfg.tau)),
                opt(bounds::cor2_threshold(m, cfg.tau, cfg.f_max, cfg.eps)),
                opt(bounds::cor2_tail(n_points, m, cfg.tau, cfg.f_max)),
                bounds::UP_TO_CONSTANT.to_string(),
            ]);
        }
    }
    emit(cfg, &csv_text(&SWEEP_HEADER, &rows)?, out)
}

pub const BENCH_HEADER: [&str; 7] = ["family", "m", "n", "structured_median_s", "dense_median_s", "speedup", "dense_status"];

pub fn cmd_bench(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let fams = cfg.require_family()?;
    let runs = cfg.reps.max(1);
    let v = sample_gaussian(derive_seed(cfg.seed, 1), cfg.n)?.g;
    let mut rows = Vec::new();
    for &fam in fams {
        let a = StructuredMatrix::build(fam, cfg.m, cfg.n, cfg.seed)?;
        let mut sink = 0.0;
        let fast = time_median(runs, || sink += a.matvec(&v).expect("length checked")[0]);
        let (dense_s, speedup, status) = match a.materialize_capped(cfg.dense_cap) {
            Ok(d) => {
                let slow = time_median(runs, || sink += d.matvec(&v)[0]);
                (fmt_float(slow), fmt_float(slow / fast), "ok".to_string())
            }
            Err(e) => {
                writeln!(log, "warning: skipping dense baseline for {fam}: {e}")?;
                (String::new(), String::new(), "skipped".to_string())
            }
        };
        writeln!(log, "{fam} m={} n={}: structured {:.3e} s, dense {dense_s} s (checksum {sink:.3})", cfg.m, cfg.n, fast)?;
        rows.push(vec![fam.to_string(), cfg.m.to_string(), cfg.n.to_string(), fmt_float(fast), dense_s, speedup, status]);
    }
    emit(cfg, &csv_text(&BENCH_HEADER, &rows)?, out)
}

pub const VERIFY_HEADER: [&str; 5] = ["id", "name", "status", "seconds", "detail"];

/// Runs the suite; returns whether the run passed.
pub fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let opts = VerifyOptions { seed: cfg.seed, only: cfg.only.clone(), perf_soft: cfg.perf_soft, ..Default::default() };
    verify_with(cfg, &opts, out)
}

/// [`cmd_verify`] with explicit options, e.g. an injected `σ`.
pub fn verify_with(cfg: &RunConfig, opts: &VerifyOptions, out: &mut dyn Write) -> Result<bool> {
    let ids = verify::select(opts.only.as_deref())?;
    let mut results = Vec::new();
    for id in ids {
        let r = verify::run_one(id, opts);
        writeln!(out, "{}", r.line())?;
        out.flush()?;
        results.push(r);
    }
    if let Some(p) = &cfg.output_path {
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|r| {
                let status = if r.outcome.passed { "pass" } else if r.soft { "soft-fail" } else { "fail" };
                vec![r.id.to_string(), r.name.to_string(), status.into(), format!("{:.3}", r.elapsed.as_secs_f64()), r.outcome.detail.clone()]
            })
            .collect();
        fs::write(p, csv_text(&VERIFY_HEADER, &rows)?)?;
    }
    let ok = verify::all_passed(&results);
    writeln!(out, "{}", if ok { "verify: all criteria passed" } else { "verify: FAILED" })?;
    Ok(ok)
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::DivisionByZero(_) => EXIT_USAGE,
        Error::ResourceLimit(_) => EXIT_RESOURCE,
        Error::Data { .. } | Error::Io(_) | Error::Csv(_) => EXIT_DATA,
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<i32> {
    let (kind, flags) = match cli.command {
        Command::Diagnose(f) => (CommandKind::Diagnose, f),
        Command::Estimate(f) => (CommandKind::Estimate, f),
        Command::Sweep(f) => (CommandKind::Sweep, f),
        Command::Bench(f) => (CommandKind::Bench, f),
        Command::Verify(f) => (CommandKind::Verify, f),
    };
    let cfg = RunConfig::resolve(kind, &flags)?;
    match kind {
        CommandKind::Diagnose => cmd_diagnose(&cfg, out, log)?,
        CommandKind::Estimate => cmd_estimate(&cfg, out, log)?,
        CommandKind::Sweep => cmd_sweep(&cfg, out, log)?,
        CommandKind::Bench => cmd_bench(&cfg, out, log)?,
        CommandKind::Verify => {
            return Ok(if cmd_verify(&cfg, out)? { EXIT_OK } else { EXIT_VERIFY_FAILED });
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, log: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(log, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli, out, log) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("structembed").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_parsing() {
        let m = parse_config("# c\nfamily = toeplitz\nm-values = 8, 16 # trailing\n\n").unwrap();
        assert_eq!(m["family"], "toeplitz");
        assert_eq!(m["m_values"], "8, 16");
        assert!(parse_config("oops\n").is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seed("0x5EED").unwrap(), 0x5EED);
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert!(parse_seed("x").is_err());
    }

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.cfg");
        fs::write(&cfg_path, "family = toeplitz\nm = 4\nn = 20\nexact = true\n").unwrap();
        let flags = Flags { m: Some(8), config: Some(cfg_path), ..Default::default() };
        let cfg = RunConfig::resolve(CommandKind::Diagnose, &flags).unwrap();
        assert_eq!(cfg.families, vec![Family::Toeplitz]);
        assert_eq!(cfg.m, 8);
        assert_eq!(cfg.n, 32);
        assert!(cfg.exact);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.reps, 10);
    }

    #[test]
    fn ldr_overrides() {
        let flags = Flags { family: Some("ldr".into()), ldr_rank: Some(3), ..Default::default() };
        let cfg = RunConfig::resolve(CommandKind::Diagnose, &flags).unwrap();
        assert_eq!(cfg.families, vec![Family::Ldr { rank: 3, nnz: 2 }]);
    }

    #[test]
    fn diagnose_circulant_and_toeplitz() {
        let (code, out, _) = run_args(&["diagnose", "--family", "circulant,toeplitz", "--n", "16", "--m", "8", "--exact"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), DIAGNOSE_HEADER.join(","));
        let circ: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert!(circ[3].parse::<usize>().unwrap() <= 3);
        assert_eq!(circ[4], "true");
        assert_eq!(circ[6].parse::<f64>().unwrap(), 0.0);
        let toep: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(toep[3], "2");
    }

    #[test]
    fn usage_and_cap_exit_codes() {
        assert_eq!(run_args(&["diagnose", "--n", "16"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["diagnose", "--family", "nope"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["diagnose", "--family", "circulant", "--n", "1024", "--m", "2"]).0, EXIT_RESOURCE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
