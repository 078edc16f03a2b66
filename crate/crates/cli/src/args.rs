use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use involute::dynamics::Method;
use involute::tolerance;

#[derive(Debug, Clone, Parser)]
#[command(name = "involute", version, about = "Functions in involution from Poisson maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run structural checks and print a JSON report.
    Check(CheckArgs),
    /// Build a chain family through a multiplication map.
    Family(FamilyArgs),
    /// Integrate a Hamiltonian flow and monitor conserved quantities.
    Simulate(SimulateArgs),
    /// Write the full system definition as JSON.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Catalog name (su2, su2_chain, jordan_schwinger, sb2c_deformed,
    /// sb2c_realization, triangular) or path to a JSON definition.
    #[arg(long)]
    pub system: String,
    /// Parameter override such as `k=0.5`; repeatable.
    #[arg(long = "param", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
    /// Number of sample points per check.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub points: u64,
    /// Sampling seed in hexadecimal.
    #[arg(long, default_value = "C0FFEE", value_parser = parse_seed)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Jacobi,
    Casimir,
    Maps,
    Involution,
    Identities,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Rkf45,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Rkf45 => Method::Rkf45,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub what: What,
    /// Function to check (`EXPR` or `name=EXPR`); repeatable. With
    /// `--what casimir` each is checked as a Casimir, with `--what
    /// involution` they are checked pairwise.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    /// Space the functions live on; inferred from their variables otherwise.
    #[arg(long)]
    pub space: Option<String>,
    /// Override the pass threshold of every check.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Chain depth (number of factors).
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Seed function (`EXPR` or `name=EXPR`); repeatable. Defaults to the
    /// base Casimirs plus `f` = the last base coordinate.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    /// Multiplication map `M×M → M`; the first one in the system by default.
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long, default_value_t = tolerance::RESIDUAL)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Catalog Hamiltonian name or an expression.
    #[arg(long, default_value = "H")]
    pub hamiltonian: String,
    /// Space for an expression Hamiltonian; inferred otherwise.
    #[arg(long)]
    pub space: Option<String>,
    /// Initial values `name=val,...`, overriding the catalog default.
    #[arg(long, value_parser = parse_point)]
    pub x0: Option<Assignments>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = tolerance::DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, value_enum, default_value = "rk4")]
    pub method: MethodArg,
    /// Keep every n-th state in the trajectory output.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Extra monitored function (`EXPR` or `name=EXPR`); repeatable.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    /// Largest allowed relative drift of any monitored function.
    #[arg(long, default_value_t = tolerance::DRIFT)]
    pub drift_tol: f64,
    /// Trajectory format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Conservation report file. Defaults to standard output when the
    /// trajectory goes to `--out`, standard error otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("`{}` is not a number", value.trim()))?;
    Ok((name.trim().to_string(), value))
}

/// Comma-separated `name=value` list.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignments(pub Vec<(String, f64)>);

fn parse_point(s: &str) -> Result<Assignments, String> {
    s.split(',').filter(|part| !part.trim().is_empty()).map(parse_assignment).collect::<Result<_, _>>().map(Assignments)
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let digits = s.trim().trim_start_matches("0x").trim_start_matches("0X");
    u64::from_str_radix(digits, 16).map_err(|_| format!("`{s}` is not a hexadecimal seed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use involute::sample::DEFAULT_SEED;

    #[test]
    fn seeds_are_hex() {
        assert_eq!(parse_seed("C0FFEE").unwrap(), DEFAULT_SEED);
        assert_eq!(parse_seed("0x10").unwrap(), 16);
        assert!(parse_seed("xyz").is_err());
    }

    #[test]
    fn points_split_on_commas() {
        let p = parse_point("x1=0.5, y1=-2,").unwrap();
        assert_eq!(p.0, [("x1".to_string(), 0.5), ("y1".to_string(), -2.0)]);
        assert!(parse_point("x1").is_err());
    }

    #[test]
    fn zero_points_rejected() {
        let r = Cli::try_parse_from(["involute", "check", "--system", "su2", "--points", "0"]);
        assert!(r.is_err());
    }
}
