use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wr_cli::run::{ode_table, run, run_params, Outcome};
use wr_cli::scenario::{
    DomainName, IsocurvedPairParams, OneDRow, OneDTableParams, Params, Scenario, SchemaError, TauValue,
    TheoremCParams,
};
use wr_cli::table::Table;
use wr_cli::verify::verify_all;

const EXIT_ASSERTION: u8 = 1;
const EXIT_SCHEMA: u8 = 2;

#[derive(Parser)]
#[command(name = "wr", version, about = "Hessian equation toolkit: scenarios, tables and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write report.json plus CSV tables.
    Run {
        scenario: PathBuf,
        /// Output directory; a subdirectory named after the scenario is created.
        #[arg(long, env = "WR_OUT", default_value = "wr-out")]
        out: PathBuf,
    },
    /// Run the acceptance criteria.
    Verify {
        /// Criterion id (C3), module (hill) or title substring.
        #[arg(long)]
        filter: Option<String>,
        /// Replace every numerical tolerance with this value.
        #[arg(long)]
        tol: Option<f64>,
        /// Print every check, not only failures.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Dimension table of W(M; -tau g) for a one-dimensional domain.
    Table1d {
        #[arg(long, value_enum)]
        domain: DomainArg,
        /// Constant or expression in t.
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        /// Circle radius or interval parameter; repeat for several rows.
        #[arg(long)]
        a: Vec<f64>,
    },
    /// Solve w'' + tau(t) w = 0 and print samples.
    Ode {
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        w0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        dw0: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Build an isocurved surface pair and print its curve table.
    Surfaces {
        #[arg(long, default_value = "exp(t^2/2)")]
        v1: String,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        c2: f64,
        #[arg(long, num_args = 2, default_values_t = [-2.0, 2.0], allow_hyphen_values = true)]
        window: Vec<f64>,
        /// Bound on the integral of v1^-2 left of the window.
        #[arg(long)]
        tail_bound: Option<f64>,
    },
    /// Classify a pair of warped products from a JSON parameter file.
    Theoremc { spec: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DomainArg {
    Line,
    Circle,
    HalfLine,
    Interval,
}

impl From<DomainArg> for DomainName {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Line => DomainName::Line,
            DomainArg::Circle => DomainName::Circle,
            DomainArg::HalfLine => DomainName::HalfLine,
            DomainArg::Interval => DomainName::Interval,
        }
    }
}

fn tau_arg(s: &str) -> TauValue {
    s.parse::<f64>().map_or_else(|_| TauValue::Expr(s.to_string()), TauValue::Const)
}

fn print_table(t: &Table) {
    let mut stdout = std::io::stdout().lock();
    if t.write_to(&mut stdout).is_err() {
        return;
    }
    let _ = stdout.flush();
}

fn report(o: &Outcome) -> ExitCode {
    for c in &o.checks {
        println!("{c}");
    }
    for n in &o.notes {
        println!("note: {n}");
    }
    for k in &o.unused_overrides {
        eprintln!("warning: tolerance override {k} matches no check");
    }
    if o.passed() {
        println!("{}: all {} checks passed", o.name, o.checks.len());
        ExitCode::SUCCESS
    } else {
        for c in o.failures() {
            eprintln!("failed: {}", c.name);
        }
        ExitCode::from(EXIT_ASSERTION)
    }
}

fn schema_error(e: SchemaError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_SCHEMA)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out } => {
            let s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return schema_error(e),
            };
            let o = match run(&s) {
                Ok(o) => o,
                Err(e) => return schema_error(e),
            };
            let dir = out.join(&o.name);
            match o.write(&dir) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: writing {}: {e}", dir.display());
                    return ExitCode::from(EXIT_ASSERTION);
                }
            }
            report(&o)
        }
        Command::Verify { filter, tol, verbose } => {
            let summary = verify_all(filter.as_deref(), tol);
            if summary.results.is_empty() {
                eprintln!("error: no criterion matches {:?}", filter.unwrap_or_default());
                return ExitCode::from(EXIT_SCHEMA);
            }
            for r in &summary.results {
                println!("{r}");
                for c in r.checks.iter().filter(|c| verbose || !c.passed) {
                    println!("    {c}");
                }
            }
            let passed = summary.results.iter().filter(|r| r.passed()).count();
            println!("{passed}/{} criteria passed in {:.2} s", summary.results.len(), summary.seconds);
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            }
        }
        Command::Table1d { domain, tau, a } => {
            let a: Vec<Option<f64>> = if a.is_empty() { vec![None] } else { a.into_iter().map(Some).collect() };
            let rows = a
                .into_iter()
                .map(|a| OneDRow { domain: domain.into(), tau: tau_arg(&tau), a, expect: None })
                .collect();
            match run_params("table1d", Params::OneDTable(OneDTableParams { rows })) {
                Ok(o) => {
                    if let Some(t) = o.table("table1d.csv") {
                        print_table(t);
                    }
                    if o.passed() {
                        ExitCode::SUCCESS
                    } else {
                        report(&o)
                    }
                }
                Err(e) => schema_error(e),
            }
        }
        Command::Ode { tau, from, to, w0, dw0, samples } => match ode_table(&tau, (from, to), w0, dw0, samples) {
            Ok(t) => {
                print_table(&t);
                ExitCode::SUCCESS
            }
            Err(e) => schema_error(e),
        },
        Command::Surfaces { v1, c2, window, tail_bound } => {
            let params = IsocurvedPairParams {
                v1,
                c2,
                window: [window[0], window[1]],
                tail_bound,
                expect_tau: None,
                expect_wronskian: None,
                expect_not_isometric: None,
            };
            match run_params("surfaces", Params::IsocurvedPair(params)) {
                Ok(o) => {
                    if let Some(t) = o.table("curve.csv") {
                        print_table(t);
                    }
                    for n in &o.notes {
                        eprintln!("note: {n}");
                    }
                    for c in &o.checks {
                        eprintln!("{c}");
                    }
                    if o.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_ASSERTION)
                    }
                }
                Err(e) => schema_error(e),
            }
        }
        Command::Theoremc { spec } => {
            let src = match std::fs::read_to_string(&spec) {
                Ok(s) => s,
                Err(source) => return schema_error(SchemaError::Io { path: spec.display().to_string(), source }),
            };
            let params: TheoremCParams = match serde_json::from_str::<Scenario>(&src) {
                Ok(s) => match s.params() {
                    Ok(Params::TheoremC(p)) => p,
                    Ok(_) => return schema_error(SchemaError::Invalid(format!("{} is not a theoremC scenario", s.name))),
                    Err(e) => return schema_error(e),
                },
                Err(_) => match serde_json::from_str(&src) {
                    Ok(p) => p,
                    Err(e) => return schema_error(SchemaError::Json(e)),
                },
            };
            match run_params("theoremc", Params::TheoremC(params)) {
                Ok(o) => {
                    if let Some(t) = o.table("theoremc.csv") {
                        print_table(t);
                    }
                    report(&o)
                }
                Err(e) => schema_error(e),
            }
        }
    }
}
