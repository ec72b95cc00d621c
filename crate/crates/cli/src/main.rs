//! Command-line entry point: table reproduction, verification sweeps, and
//! operator export.
//!
//! Exit codes: 0 on success, 1 when a solve fails to converge, 2 when a
//! verification check fails.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blprec::discretize::{assemble_upwind_1d, assemble_upwind_2d};
use blprec::mesh::{build_shishkin_1d, partition_regions};
use blprec::problem::example_1d;
use blprec_cli::{
    manufactured_case, mesh_2d, render_csv, run_table, run_verification, CaseKind, ExperimentSpec,
    C_LOWER_1D,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "blprec",
    about = "Benchmarks and verification for boundary-layer block preconditioners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case2d {
    Parabolic,
    Exponential,
}

impl From<Case2d> for CaseKind {
    fn from(c: Case2d) -> CaseKind {
        match c {
            Case2d::Parabolic => CaseKind::Parabolic2D,
            Case2d::Exponential => CaseKind::Exponential2D,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpCase {
    #[value(name = "1d")]
    OneD,
    Parabolic,
    Exponential,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the 1D error and iteration table.
    Table1d {
        /// Perturbation parameters (comma separated).
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Mesh interval counts (comma separated).
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Stopping constant K in K ln(N)/N.
        #[arg(long, default_value_t = 1.0)]
        k_const: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reproduce a 2D error and iteration table.
    Table2d {
        #[arg(long, value_enum)]
        case: Case2d,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Transition-point factor.
        #[arg(long, default_value_t = 2.5)]
        sigma: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the spectral and structural verification suite.
    Verify {
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export an assembled operator in Matrix Market format.
    DumpMatrix {
        #[arg(long, value_enum)]
        case: DumpCase,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2.5)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_output(path: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    match path {
        Some(p) => File::create(p)?.write_all(content.as_bytes()),
        None => std::io::stdout().write_all(content.as_bytes()),
    }
}

fn run_table_command(spec: ExperimentSpec, out: &Option<PathBuf>) -> ExitCode {
    if let Err(msg) = spec.validate() {
        eprintln!("invalid parameters: {msg}");
        return ExitCode::from(1);
    }
    let rows = match run_table(&spec) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return ExitCode::from(1);
        }
    };
    let mut failed = false;
    for row in &rows {
        if !row.converged {
            eprintln!(
                "no convergence: case={} eps={:.0e} N={} after {} iterations",
                row.case.as_str(),
                row.eps,
                row.n,
                row.iters
            );
            failed = true;
        }
    }
    if let Err(e) = write_output(out, &render_csv(&rows)) {
        eprintln!("cannot write output: {e}");
        return ExitCode::from(1);
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_dump(case: DumpCase, eps: f64, n: usize, sigma: f64, out: &Option<PathBuf>) -> ExitCode {
    let result = (|| -> blprec::Result<String> {
        let mut buf = Vec::new();
        match case {
            DumpCase::OneD => {
                let mesh = build_shishkin_1d(eps, n, C_LOWER_1D)?;
                let problem = example_1d(eps);
                let (a, _) = assemble_upwind_1d(&mesh, &problem, eps);
                a.to_csr().write_matrix_market(&mut buf)?;
            }
            DumpCase::Parabolic | DumpCase::Exponential => {
                let kind = match case {
                    DumpCase::Parabolic => CaseKind::Parabolic2D,
                    _ => CaseKind::Exponential2D,
                };
                let mc = manufactured_case(kind, eps);
                let mesh = mesh_2d(kind, eps, n, sigma)?;
                let part = partition_regions(&mesh);
                let (a, _) = assemble_upwind_2d(&mesh, &mc.problem, eps, &part)?;
                a.write_matrix_market(&mut buf)?;
            }
        }
        Ok(String::from_utf8(buf).expect("matrix market output is ascii"))
    })();
    match result {
        Ok(text) => {
            if let Err(e) = write_output(out, &text) {
                eprintln!("cannot write output: {e}");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("assembly failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Table1d {
            eps,
            n,
            k_const,
            max_iters,
            out,
            seed,
        } => {
            let mut spec = ExperimentSpec::with_defaults(CaseKind::OneD);
            if !eps.is_empty() {
                spec.eps_list = eps;
            }
            if !n.is_empty() {
                spec.n_list = n;
            }
            spec.k_const = k_const;
            spec.max_iters = max_iters;
            spec.seed = seed;
            run_table_command(spec, &out)
        }
        Command::Table2d {
            case,
            eps,
            n,
            sigma,
            max_iters,
            out,
            seed,
        } => {
            let mut spec = ExperimentSpec::with_defaults(case.into());
            if !eps.is_empty() {
                spec.eps_list = eps;
            }
            if !n.is_empty() {
                spec.n_list = n;
            }
            spec.sigma = sigma;
            spec.max_iters = max_iters;
            spec.seed = seed;
            run_table_command(spec, &out)
        }
        Command::Verify { eps, n, seed } => {
            let eps_list = if eps.is_empty() {
                vec![1e-5, 1e-6, 1e-7, 1e-8]
            } else {
                eps
            };
            let n_list = if n.is_empty() {
                vec![128, 256, 512, 1024]
            } else {
                n
            };
            let report = run_verification(&eps_list, &n_list, seed);
            for check in &report.checks {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("{status} {} ({})", check.name, check.detail);
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::DumpMatrix {
            case,
            eps,
            n,
            sigma,
            out,
        } => run_dump(case, eps, n, sigma, &out),
    }
}
