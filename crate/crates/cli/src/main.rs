#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use datareward::operator::{self, OperatorOutcome};
use datareward::oracle;
use datareward::presets::{self, PRESETS};
use datareward::user::{self, ResponseProfile};
use datareward::{Error, MarketParams, Scenario, Scheme, SolverConfig};

#[derive(Parser)]
#[command(name = "datareward", version, about = "Equilibrium solver for ad-funded mobile data rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the operator problem for one or all schemes.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = SchemeArg::All)]
        scheme: SchemeArg,
        #[command(flatten)]
        out: Output,
    },
    /// Sweep network capacity and solve every scheme at each point.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = SchemeArg::All)]
        scheme: SchemeArg,
        #[command(flatten)]
        out: Output,
    },
    /// Compare every analytic stage with the brute-force oracle.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Seed for the random (type, reward) draws.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
    /// Capacity sweep of a built-in figure scenario.
    Reproduce {
        /// One of fig5a..fig5d, fig7a..fig7d, appR-a..appR-c, appK.
        figure: String,
        /// Override the number of capacity points.
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Valuation thresholds and case against the unit reward.
    Thresholds {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = SchemeArg::Sur)]
        scheme: SchemeArg,
    },
    /// Per-type subscription and ad-watching decisions at one reward.
    Responses {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = SchemeArg::Sur)]
        scheme: SchemeArg,
    },
    /// Print a built-in scenario as a TOML scenario file.
    Preset {
        id: String,
        /// Print JSON instead of TOML.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Input {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario id instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Override the network capacity.
    #[arg(long)]
    capacity: Option<f64>,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Grid points per piece of the reward axis.
    #[arg(long, default_value_t = 2000)]
    grid: usize,
}

impl Output {
    fn config(&self) -> Result<SolverConfig, CliError> {
        if self.grid < 2 {
            return Err(CliError::Usage("--grid must be at least 2".into()));
        }
        Ok(SolverConfig {
            grid: self.grid,
            ..SolverConfig::default()
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Sar,
    Sur,
    Surd,
    All,
}

impl SchemeArg {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Sar => vec![Scheme::Sar],
            SchemeArg::Sur => vec![Scheme::Sur],
            SchemeArg::Surd => vec![Scheme::Surd],
            SchemeArg::All => Scheme::ALL.to_vec(),
        }
    }

    fn single(self) -> Scheme {
        match self {
            SchemeArg::Sar => Scheme::Sar,
            SchemeArg::Surd => Scheme::Surd,
            _ => Scheme::Sur,
        }
    }
}

enum CliError {
    Core(Error),
    UnknownFigure(String),
    Usage(String),
    Output(io::Error),
    ChecksFailed(usize),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Output(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(io::Error::other(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Core(Error::Io { .. }) => 3,
            CliError::Core(Error::Parse { .. }) => 4,
            CliError::Core(
                Error::InvalidParameter { .. }
                | Error::ValuationRange { .. }
                | Error::CapacityBelowBaseline { .. },
            ) => 5,
            CliError::UnknownFigure(_) => 6,
            CliError::Core(_) => 7,
            CliError::Output(_) => 8,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::UnknownFigure(id) => {
                let ids: Vec<&str> = PRESETS.iter().map(|p| p.id).collect();
                format!("unknown figure `{id}`; expected one of {}", ids.join(", "))
            }
            CliError::Usage(m) => m.clone(),
            CliError::Output(e) => format!("cannot write output: {e}"),
            CliError::ChecksFailed(n) => format!("{n} verification check(s) failed"),
        }
    }
}

fn load(input: &Input) -> Result<MarketParams, CliError> {
    let scenario = match (&input.scenario, &input.preset) {
        (Some(path), _) => Scenario::load(path)?,
        (None, Some(id)) => presets::preset(id)
            .ok_or_else(|| CliError::UnknownFigure(id.clone()))?
            .scenario,
        (None, None) => unreachable!("clap requires one input"),
    };
    let mut params = scenario.params_unchecked()?;
    if let Some(c) = input.capacity {
        params.capacity = c;
    }
    params.validate()?;
    Ok(params)
}

/// Ten significant digits; scientific notation from one million upwards.
fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    if x.abs() >= 1e6 {
        return format!("{x:.9e}");
    }
    let decimals = (9 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

const OUTCOME_HEADER: [&str; 11] = [
    "scheme",
    "omega_star",
    "p_star",
    "p_star_I",
    "p_star_II",
    "r_data",
    "r_ad",
    "r_total",
    "demand",
    "case",
    "capacity_binding",
];

fn outcome_row(o: &OperatorOutcome) -> Vec<String> {
    vec![
        o.scheme.to_string(),
        num(o.omega_star),
        opt(o.p_star),
        opt(o.p_star_i),
        opt(o.p_star_ii),
        num(o.r_data),
        num(o.r_ad),
        num(o.r_total),
        num(o.demand),
        o.case.label().to_string(),
        o.capacity_binding.to_string(),
    ]
}

fn outcome_json(o: &OperatorOutcome, capacity: Option<f64>) -> Value {
    let mut m = Map::new();
    if let Some(c) = capacity {
        m.insert("C".into(), json!(c));
    }
    if let Value::Object(fields) = serde_json::to_value(o).expect("outcome serialises") {
        m.extend(fields);
    }
    Value::Object(m)
}

fn emit_outcomes(rows: &[(Option<f64>, OperatorOutcome)], format: Format) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match format {
        Format::Csv => {
            let with_c = rows.first().is_some_and(|r| r.0.is_some());
            let mut w = csv::Writer::from_writer(&mut lock);
            let mut header: Vec<&str> = Vec::new();
            if with_c {
                header.push("C");
            }
            header.extend(OUTCOME_HEADER);
            w.write_record(&header)?;
            for (c, o) in rows {
                let mut rec = Vec::new();
                if let Some(c) = c {
                    rec.push(num(*c));
                }
                rec.extend(outcome_row(o));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let values: Vec<Value> = rows.iter().map(|(c, o)| outcome_json(o, *c)).collect();
            let doc = if values.len() == 1 && rows[0].0.is_none() {
                values.into_iter().next().expect("one value")
            } else {
                Value::Array(values)
            };
            serde_json::to_writer_pretty(&mut lock, &doc).map_err(io::Error::other)?;
            writeln!(lock)?;
        }
    }
    Ok(())
}

fn sweep_rows(
    params: &MarketParams,
    from: f64,
    to: f64,
    steps: usize,
    schemes: &[Scheme],
    cfg: SolverConfig,
) -> Result<Vec<(Option<f64>, OperatorOutcome)>, CliError> {
    if !(2..=100_000).contains(&steps) {
        return Err(CliError::Usage(format!("--steps must lie in [2, 100000], got {steps}")));
    }
    if !(from < to) {
        return Err(CliError::Usage(format!("--from ({from}) must be below --to ({to})")));
    }
    let jobs: Vec<(f64, Scheme)> = (0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .flat_map(|c| schemes.iter().map(move |&s| (c, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, s)| {
            let p = params.with_capacity(c);
            p.validate()?;
            operator::solve(&p, s, cfg).map(|sol| (Some(c), sol.outcome))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(rows)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { input, scheme, out } => {
            let params = load(&input)?;
            let cfg = out.config()?;
            let rows = scheme
                .schemes()
                .into_iter()
                .map(|s| operator::solve(&params, s, cfg).map(|sol| (None, sol.outcome)))
                .collect::<Result<Vec<_>, Error>>()?;
            emit_outcomes(&rows, out.format)
        }
        Command::Sweep {
            input,
            from,
            to,
            steps,
            scheme,
            out,
        } => {
            let params = load(&input)?;
            let rows = sweep_rows(&params, from, to, steps, &scheme.schemes(), out.config()?)?;
            emit_outcomes(&rows, out.format)
        }
        Command::Reproduce { figure, steps, out } => {
            let preset = presets::preset(&figure).ok_or_else(|| CliError::UnknownFigure(figure.clone()))?;
            let params = preset.params()?;
            let from = preset.sweep_from()?;
            let steps = steps.unwrap_or(preset.steps);
            let rows = sweep_rows(&params, from, preset.sweep_to, steps, &Scheme::ALL, out.config()?)?;
            emit_outcomes(&rows, out.format)
        }
        Command::Verify {
            input,
            seed,
            draws,
            grid,
        } => {
            let params = load(&input)?;
            let cfg = Output {
                format: Format::Csv,
                grid,
            }
            .config()?;
            let checks = oracle::verify(&params, seed, draws, cfg)?;
            let mut stdout = io::stdout().lock();
            for c in &checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                writeln!(stdout, "{mark}  {:<52} {}", c.name, c.detail)?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
            Ok(())
        }
        Command::Thresholds {
            input,
            from,
            to,
            steps,
            scheme,
        } => {
            let params = load(&input)?;
            if steps < 2 || !(0.0 <= from && from < to) {
                return Err(CliError::Usage("need 0 <= --from < --to and --steps >= 2".into()));
            }
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["omega", "case", "theta0", "theta1", "theta2", "theta3", "theta4"])?;
            for i in 0..steps {
                let omega = from + (to - from) * i as f64 / (steps - 1) as f64;
                let t = user::thresholds(&params, omega, scheme.single())?;
                w.write_record([
                    num(omega),
                    t.case.label().to_string(),
                    num(t.theta0),
                    num(t.theta1),
                    opt(t.theta2),
                    num(t.theta3),
                    opt(t.theta4),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Responses {
            input,
            omega,
            steps,
            scheme,
        } => {
            let params = load(&input)?;
            if steps < 2 || !(omega >= 0.0) {
                return Err(CliError::Usage("need --omega >= 0 and --steps >= 2".into()));
            }
            let profile = ResponseProfile::new(&params, omega, scheme.single())?;
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["theta", "subscribe", "ads", "data"])?;
            for i in 0..steps {
                let theta = params.theta_max() * i as f64 / (steps - 1) as f64;
                let d = profile.decision(&params, theta);
                let data = if d.subscribe { params.quota } else { 0.0 } + omega * d.ads;
                w.write_record([num(theta), u8::from(d.subscribe).to_string(), num(d.ads), num(data)])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Preset { id, json } => {
            let preset = presets::preset(&id).ok_or_else(|| CliError::UnknownFigure(id.clone()))?;
            let text = if json {
                preset.scenario.to_json_string() + "\n"
            } else {
                preset.scenario.to_toml_string()
            };
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
