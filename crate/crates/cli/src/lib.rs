//! Command-line frontend: every solver as a subcommand, output as CSV or JSON.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use search_contracts::corner::{corner_alpha_interval, hat_contains, sweep, CornerRegime};
use search_contracts::feasible::{
    alpha_interval, alpha_interval_extended, contains, h_value, h_value_extended, ic_loci,
    trace_boundary, AlphaInterval,
};
use search_contracts::io::{read_csv, write_csv, LabeledPoint};
use search_contracts::objectives::{
    critical_threshold, first_best, solve_with, Contract, Direction, Objective, SolverConfig,
};
use search_contracts::search::{demand_profile, social_values};
use search_contracts::sim::{find_equilibrium, simulate, verify_nash, SearchAlgorithm, TablePoint};
use search_contracts::{Error, PricePair, SearchEnv, Seller};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "search-contracts",
    version,
    about = "Ranking contracts for two-seller sequential search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Exactly one of `--A` and `--s`.
#[derive(Args, Debug, Clone, Copy)]
#[group(required = true, multiple = false)]
pub struct EnvArgs {
    /// Reservation threshold A = 1 - sqrt(2 s).
    #[arg(long = "A", value_name = "A", allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Search cost s.
    #[arg(long = "s", value_name = "S", allow_negative_numbers = true)]
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct PriceArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub p2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmKind {
    Prominence,
    Random,
    PriceDirected,
    Contract,
    Custom,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rank-conditional demands, bonus and social values at a price pair.
    Demand {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        prices: PriceArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Trace the boundary of the implementable set.
    Boundary {
        #[command(flatten)]
        env: EnvArgs,
        /// Number of rays.
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(64..))]
        n: u32,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Search-order interval and H at a price pair.
    Phi {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        prices: PriceArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Optimal contract for an objective.
    Solve {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[arg(long, value_enum, default_value = "max")]
        direction: DirectionArg,
        /// Certificate grid per axis.
        #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u32).range(400..))]
        certificate_resolution: u32,
        /// Grid points per inner price slice.
        #[arg(long, default_value_t = 160, value_parser = clap::value_parser!(u32).range(40..))]
        slice_grid: u32,
        /// Search all of the implementable set, not only the valid region.
        #[arg(long)]
        unrestricted: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Unconstrained profit maximum over prices and search order.
    FirstBest {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Search cost at which the upper diagonal root equals the uniform optimum.
    Critical {
        #[arg(long, default_value_t = 0.02)]
        s_lo: f64,
        #[arg(long, default_value_t = 0.08)]
        s_hi: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check a price pair for profitable unilateral deviations.
    Verify {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        prices: PriceArgs,
        #[arg(long, value_enum)]
        algorithm: AlgorithmKind,
        /// Favoured seller for prominence.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        favored: u8,
        /// On-path alpha for contract; tie alpha for price-directed.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Alpha for prices off the contract path.
        #[arg(long, default_value_t = 0.5)]
        off_path_alpha: f64,
        /// CSV of p1,p2,alpha rows for the custom algorithm.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(2..))]
        grid: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte-Carlo consumers at fixed prices and search order.
    Simulate {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        prices: PriceArgs,
        /// Probability that seller 1 is inspected first.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Corner-region interval and membership at a price pair.
    Corner {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        prices: PriceArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Boundary of the implementable set with equilibrium points.
    Figure2 {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(64..))]
        n: u32,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Binding loci of both incentive constraints and the IC2 region.
    Figure3 {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        alpha: f64,
        /// Columns for each locus.
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(10..))]
        n: u32,
        /// Region samples per axis.
        #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(2..))]
        grid: u32,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Plain and corner membership on a price grid.
    Figure4 {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(10..))]
        n: u32,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Profit,
    Tp,
    Sw,
    Cs,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Profit => Objective::Profit,
            ObjectiveArg::Tp => Objective::Tp,
            ObjectiveArg::Sw => Objective::Sw,
            ObjectiveArg::Cs => Objective::Cs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Max,
    Min,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Max => Direction::Max,
            DirectionArg::Min => Direction::Min,
        }
    }
}

/// Error carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Other(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_) => CliError::Usage(msg),
            Error::Data(_) => CliError::Other(msg),
            Error::CostOutOfRange(_)
            | Error::Domain { .. }
            | Error::NoInteriorMaximum { .. }
            | Error::DegenerateBonus(_)
            | Error::NoRoot(_)
            | Error::NoBracket { .. }
            | Error::Infeasible
            | Error::WrongRegime { .. }
            | Error::UniformOnly(_) => CliError::Domain(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Resolved environment plus which flag it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvEcho {
    pub input: &'static str,
    pub threshold: f64,
    pub cost: f64,
}

fn resolve_env(args: EnvArgs) -> CliResult<(SearchEnv, EnvEcho)> {
    let (env, input) = match (args.threshold, args.cost) {
        (Some(a), None) => (SearchEnv::uniform_from_threshold(a)?, "A"),
        (None, Some(s)) => (SearchEnv::uniform_from_cost(s)?, "s"),
        _ => {
            return Err(CliError::Usage(
                "exactly one of --A and --s is required".into(),
            ))
        }
    };
    let echo = EnvEcho {
        input,
        threshold: env.threshold(),
        cost: env.cost(),
    };
    Ok((env, echo))
}

fn prices(args: PriceArgs) -> CliResult<PricePair> {
    if !(args.p1.is_finite() && args.p2.is_finite()) {
        return Err(CliError::Usage("prices must be finite".into()));
    }
    PricePair::new(args.p1, args.p2).map_err(|e| CliError::Domain(e.to_string()))
}

fn unit(name: &str, x: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(CliError::Usage(format!(
            "--{name} must lie in [0, 1], got {x}"
        )))
    }
}

fn metadata(command: &str, env: Option<EnvEcho>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), Value::from(command));
    if let Some(e) = env {
        m.insert("input".into(), Value::from(e.input));
        m.insert("threshold".into(), Value::from(e.threshold));
        m.insert("cost".into(), Value::from(e.cost));
    }
    m
}

/// Single-record output. JSON merges the record's fields into the metadata;
/// CSV flattens to `key,value` rows with dotted keys.
fn render_record<T: Serialize>(
    meta: Map<String, Value>,
    record: &T,
    format: Format,
) -> CliResult<Vec<u8>> {
    let mut obj = meta;
    match serde_json::to_value(record)? {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let value = Value::Object(obj);
    match format {
        Format::Json => json_bytes(&value),
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let rows: Vec<KeyValue> = rows
                .into_iter()
                .map(|(key, value)| KeyValue { key, value })
                .collect();
            csv_bytes(&rows)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyValue {
    pub key: String,
    pub value: String,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Tabular output. CSV carries the rows only and logs the metadata to
/// stderr; JSON nests them under `rows`.
fn render_table<T: Serialize>(
    meta: Map<String, Value>,
    rows: &[T],
    format: Format,
) -> CliResult<Vec<u8>> {
    match format {
        Format::Csv => {
            let line: Vec<String> = meta
                .iter()
                .map(|(k, v)| format!("{k}={}", plain(v)))
                .collect();
            eprintln!("# {}", line.join(" "));
            csv_bytes(rows)
        }
        Format::Json => {
            let mut obj = meta;
            obj.insert("rows".into(), serde_json::to_value(rows)?);
            json_bytes(&Value::Object(obj))
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn json_bytes(v: &Value) -> CliResult<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(v)?;
    buf.push(b'\n');
    Ok(buf)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(buf)
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(out: &OutArgs, bytes: Vec<u8>) -> CliResult<()> {
    match &out.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub p1: f64,
    pub p2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d21: f64,
    pub d22: f64,
    pub bonus: f64,
    pub v11: f64,
    pub v22: f64,
    pub v21: f64,
    pub v12: f64,
    pub sw1: f64,
    pub sw2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiRecord {
    pub p1: f64,
    pub p2: f64,
    pub h: f64,
    pub contains: bool,
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerRecord {
    pub p1: f64,
    pub p2: f64,
    pub regime: CornerRegime,
    pub in_hat: bool,
    pub in_plain: bool,
    /// Corner interval; absent when both prices are below `A`.
    pub hat: Option<AlphaInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure3Series {
    Ic1Locus,
    Ic2Locus,
    Ic2Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure3Row {
    pub series: Figure3Series,
    pub p1: f64,
    pub p2: f64,
}

/// Equilibria under prominence for each seller and under random search,
/// plus the boundary trace. Equilibria that fail to converge or fall outside
/// the implementable set are reported as warnings.
pub fn figure2_points(
    env: &SearchEnv,
    n: usize,
) -> search_contracts::Result<(Vec<LabeledPoint>, Vec<String>)> {
    let curve = trace_boundary(env, n)?;
    let mut rows = Vec::with_capacity(curve.points.len() + 3);
    for p in &curve.points {
        let phi = alpha_interval_extended(env, p.prices())?;
        rows.push(LabeledPoint {
            label: "boundary".into(),
            p1: p.p1,
            p2: p.p2,
            alpha: phi.midpoint(),
            inside: h_value_extended(env, p.prices())?
                <= search_contracts::feasible::MEMBERSHIP_TOL,
        });
    }
    let start = PricePair { p1: 0.3, p2: 0.3 };
    let algorithms = [
        (
            "prominence_1",
            SearchAlgorithm::Prominence {
                favored: Seller::One,
            },
            start,
        ),
        (
            "prominence_2",
            SearchAlgorithm::Prominence {
                favored: Seller::Two,
            },
            start,
        ),
        (
            "random",
            SearchAlgorithm::Random,
            PricePair { p1: 0.3, p2: 0.5 },
        ),
    ];
    let mut warnings = Vec::new();
    for (label, alg, start) in algorithms {
        let found = find_equilibrium(env, &alg, start, 500, 1e-11)?;
        let Some(p) = found.prices else {
            warnings.push(format!(
                "{label}: no equilibrium after {} iterations",
                found.iterations
            ));
            continue;
        };
        let inside = contains(env, p).unwrap_or(false);
        if !inside {
            warnings.push(format!(
                "{label}: equilibrium ({}, {}) lies outside P",
                p.p1, p.p2
            ));
        }
        rows.push(LabeledPoint {
            label: label.into(),
            p1: p.p1,
            p2: p.p2,
            alpha: alg.alpha(p),
            inside,
        });
    }
    Ok((rows, warnings))
}

fn figure3_rows(
    env: &SearchEnv,
    alpha: f64,
    n: usize,
    grid: usize,
) -> search_contracts::Result<Vec<Figure3Row>> {
    let mut rows: Vec<Figure3Row> = ic_loci(env, alpha, n)?
        .into_iter()
        .map(|pt| Figure3Row {
            series: match pt.constraint {
                search_contracts::feasible::IcConstraint::Ic1 => Figure3Series::Ic1Locus,
                search_contracts::feasible::IcConstraint::Ic2 => Figure3Series::Ic2Locus,
            },
            p1: pt.p1,
            p2: pt.p2,
        })
        .collect();
    let a = env.threshold();
    for j in 0..grid {
        for i in 0..grid {
            let p = PricePair {
                p1: a * (i as f64 + 0.5) / grid as f64,
                p2: a * (j as f64 + 0.5) / grid as f64,
            };
            if !env.in_nondegenerate_region(p) {
                continue;
            }
            let Ok(phi) = alpha_interval_extended(env, p) else {
                continue;
            };
            if alpha <= phi.hi {
                rows.push(Figure3Row {
                    series: Figure3Series::Ic2Region,
                    p1: p.p1,
                    p2: p.p2,
                });
            }
        }
    }
    Ok(rows)
}

fn algorithm(
    kind: AlgorithmKind,
    prices: PricePair,
    favored: u8,
    alpha: f64,
    off_path_alpha: f64,
    table: Option<&Path>,
) -> CliResult<SearchAlgorithm> {
    Ok(match kind {
        AlgorithmKind::Prominence => SearchAlgorithm::Prominence {
            favored: if favored == 2 {
                Seller::Two
            } else {
                Seller::One
            },
        },
        AlgorithmKind::Random => SearchAlgorithm::Random,
        AlgorithmKind::PriceDirected => SearchAlgorithm::PriceDirected {
            tie_alpha: unit("alpha", alpha)?,
        },
        AlgorithmKind::Contract => SearchAlgorithm::Contract {
            contract: Contract::new(prices.p1, prices.p2, unit("alpha", alpha)?)?,
            off_path_alpha: unit("off-path-alpha", off_path_alpha)?,
        },
        AlgorithmKind::Custom => {
            let path =
                table.ok_or_else(|| CliError::Usage("--algorithm custom needs --table".into()))?;
            let points: Vec<TablePoint> = read_csv(BufReader::new(File::open(path)?))?;
            if points.is_empty() {
                return Err(CliError::Usage("the custom table has no rows".into()));
            }
            SearchAlgorithm::Tabulated { points }
        }
    })
}

/// Execute one parsed command.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Demand {
            env,
            prices: pa,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let p = prices(pa)?;
            let d = demand_profile(&env, p)?;
            let v = social_values(&env, p)?;
            let rec = DemandRecord {
                p1: p.p1,
                p2: p.p2,
                d11: d.d11,
                d12: d.d12,
                d21: d.d21,
                d22: d.d22,
                bonus: d.bonus,
                v11: v.v11,
                v22: v.v22,
                v21: v.v21,
                v12: v.v12,
                sw1: v.sw1,
                sw2: v.sw2,
            };
            let bytes = match out.format.unwrap_or(Format::Json) {
                Format::Csv => render_table(metadata("demand", Some(echo)), &[rec], Format::Csv)?,
                Format::Json => render_record(metadata("demand", Some(echo)), &rec, Format::Json)?,
            };
            emit(&out, bytes)
        }
        Command::Boundary { env, n, out } => {
            let (env, echo) = resolve_env(env)?;
            let curve = trace_boundary(&env, n as usize)?;
            let bytes = render_table(
                metadata("boundary", Some(echo)),
                &curve.points,
                out.format.unwrap_or(Format::Csv),
            )?;
            emit(&out, bytes)
        }
        Command::Phi {
            env,
            prices: pa,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let p = prices(pa)?;
            let phi = alpha_interval(&env, p)?;
            let rec = PhiRecord {
                p1: p.p1,
                p2: p.p2,
                h: h_value(&env, p)?,
                contains: contains(&env, p)?,
                lo: phi.lo,
                hi: phi.hi,
                empty: phi.is_empty(),
            };
            let bytes = render_record(
                metadata("phi", Some(echo)),
                &rec,
                out.format.unwrap_or(Format::Json),
            )?;
            emit(&out, bytes)
        }
        Command::Solve {
            env,
            objective,
            direction,
            certificate_resolution,
            slice_grid,
            unrestricted,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let config = SolverConfig {
                certificate_resolution: certificate_resolution as usize,
                slice_grid: slice_grid as usize,
                restrict_to_valid_region: !unrestricted,
                ..SolverConfig::default()
            };
            let r = solve_with(&env, objective.into(), direction.into(), &config)?;
            let bytes = render_record(
                metadata("solve", Some(echo)),
                &r,
                out.format.unwrap_or(Format::Json),
            )?;
            emit(&out, bytes)
        }
        Command::FirstBest { env, out } => {
            let (env, echo) = resolve_env(env)?;
            let r = first_best(&env)?;
            let bytes = render_record(
                metadata("first-best", Some(echo)),
                &r,
                out.format.unwrap_or(Format::Json),
            )?;
            emit(&out, bytes)
        }
        Command::Critical { s_lo, s_hi, out } => {
            let c = critical_threshold(s_lo, s_hi)?;
            let bytes = render_record(
                metadata("critical", None),
                &c,
                out.format.unwrap_or(Format::Json),
            )?;
            emit(&out, bytes)
        }
        Command::Verify {
            env,
            prices: pa,
            algorithm: kind,
            favored,
            alpha,
            off_path_alpha,
            table,
            grid,
            tol,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let p = prices(pa)?;
            let alg = algorithm(kind, p, favored, alpha, off_path_alpha, table.as_deref())?;
            let report = verify_nash(&env, &alg, p, grid as usize, tol)?;
            let mut meta = metadata("verify", Some(echo));
            meta.insert("algorithm".into(), serde_json::to_value(&alg)?);
            let bytes = render_record(meta, &report, out.format.unwrap_or(Format::Json))?;
            emit(&out, bytes)
        }
        Command::Simulate {
            env,
            prices: pa,
            alpha,
            n,
            seed,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let p = prices(pa)?;
            let outcome = simulate(&env, p, unit("alpha", alpha)?, n as usize, seed)?;
            let bytes = render_record(
                metadata("simulate", Some(echo)),
                &outcome,
                out.format.unwrap_or(Format::Json),
            )?;
            emit(&out, bytes)
        }
        Command::Corner {
            env,
            prices: pa,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let p = prices(pa)?;
            let regime = CornerRegime::classify(env.threshold(), p);
            let hat = match regime {
                CornerRegime::BothBelow => None,
                _ => Some(corner_alpha_interval(&env, p)?),
            };
            let rec = CornerRecord {
                p1: p.p1,
                p2: p.p2,
                regime,
                in_hat: hat_contains(&env, p)?,
                in_plain: h_value_extended(&env, p)? <= search_contracts::feasible::MEMBERSHIP_TOL,
                hat,
            };
            let bytes = render_record(
                metadata("corner", Some(echo)),
                &rec,
                out.format.unwrap_or(Format::Json),
            )?;
            emit(&out, bytes)
        }
        Command::Figure2 { env, n, out } => {
            let (env, echo) = resolve_env(env)?;
            let (rows, warnings) = figure2_points(&env, n as usize)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let bytes = render_table(
                metadata("figure2", Some(echo)),
                &rows,
                out.format.unwrap_or(Format::Csv),
            )?;
            emit(&out, bytes)
        }
        Command::Figure3 {
            env,
            alpha,
            n,
            grid,
            out,
        } => {
            let (env, echo) = resolve_env(env)?;
            let rows = figure3_rows(&env, unit("alpha", alpha)?, n as usize, grid as usize)?;
            let mut meta = metadata("figure3", Some(echo));
            meta.insert("alpha".into(), Value::from(alpha));
            let bytes = render_table(meta, &rows, out.format.unwrap_or(Format::Csv))?;
            emit(&out, bytes)
        }
        Command::Figure4 { env, n, out } => {
            let (env, echo) = resolve_env(env)?;
            let rows = sweep(&env, n as usize)?;
            let bytes = render_table(
                metadata("figure4", Some(echo)),
                &rows,
                out.format.unwrap_or(Format::Csv),
            )?;
            emit(&out, bytes)
        }
    }
}

/// Parse `argv`, run, report errors on stderr and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return EXIT_OK;
            }
            if !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return EXIT_USAGE;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            if let CliError::Usage(_) = e {
                eprintln!("{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}
