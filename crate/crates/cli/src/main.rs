use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use morrey_lab::ProblemDims;
use morrey_lab_cli::report::{parse_summary, REPORT_FILE, SUMMARY_FILE};
use morrey_lab_cli::{regions, run, CliError, ExperimentConfig, ExperimentReport, Pipeline, RunOptions};

#[derive(Parser)]
#[command(name = "morrey-lab", version, about = "Experiment runner for perturbed fractional diffusion in Morrey spaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides MORREY_LAB_JOBS and the config
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// RNG seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run only the named check (repeatable)
    #[arg(long = "check", global = true)]
    checks: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Every configured check
    Run,
    /// Kernel, subordination and trace checks
    Kernel,
    /// Morrey norm checks
    Norms,
    /// Smoothing certificates
    Smoothing,
    /// Perturbed-evolution checks
    Perturb,
    /// Region oracle checks, or answer a query file
    Regions {
        /// Query file (`-` for stdin); prints one IN/OUT line per query
        #[arg(long)]
        queries: Option<PathBuf>,
        /// `N,m,mu` for queries; defaults to the config's dims, else 1,1,1
        #[arg(long)]
        dims: Option<String>,
    },
    /// Verify and print a finished report directory
    Report {
        /// Report directory (defaults to --out)
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("morrey-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(p) => ExperimentConfig::load(p),
        None => Err(CliError::Config("--config is required".into())),
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let pipeline = match &cli.cmd {
        Cmd::Run => Pipeline::All,
        Cmd::Kernel => Pipeline::Kernel,
        Cmd::Norms => Pipeline::Norms,
        Cmd::Smoothing => Pipeline::Smoothing,
        Cmd::Perturb => Pipeline::Perturb,
        Cmd::Regions { queries: Some(q), dims } => return answer_queries(cli, q, dims.as_deref()),
        Cmd::Regions { .. } => Pipeline::Regions,
        Cmd::Report { dir } => {
            let dir = dir.as_ref().or(cli.out.as_ref()).ok_or_else(|| {
                CliError::Config("report needs a directory argument or --out".into())
            })?;
            return show_report(dir);
        }
    };
    let cfg = load(cli)?;
    let opts = RunOptions { pipeline, out: cli.out.clone(), jobs: cli.jobs, seed: cli.seed, checks: cli.checks.clone() };
    let report = run(&cfg, &opts)?;
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else if c.hard { "FAIL" } else { "WARN" };
        println!("{verdict} {} ({})", c.name, c.kind);
        if let Some(e) = &c.error {
            println!("    {e}");
        }
        for m in c.metrics.iter().filter(|m| !m.pass) {
            println!("    {} = {:e} not {} {:e}", m.name, m.value, m.relation.symbol(), m.bound);
        }
    }
    println!(
        "{} checks, {} hard failures, {} soft failures",
        report.checks.len(),
        report.hard_failures,
        report.soft_failures
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn answer_queries(cli: &Cli, path: &Path, dims: Option<&str>) -> Result<u8, CliError> {
    let dims = match (dims, &cli.config) {
        (Some(d), _) => parse_dims(d)?,
        (None, Some(_)) => load(cli)?.problem_dims()?,
        (None, None) => ProblemDims::new(1, 1, 1.0).expect("default dims"),
    };
    let mut text = String::new();
    if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    for line in regions::answer_all(&text, &dims)? {
        println!("{line}");
    }
    Ok(0)
}

fn parse_dims(s: &str) -> Result<ProblemDims, CliError> {
    let bad = || CliError::Config(format!("--dims {s:?}: expected N,m,mu"));
    let f: Vec<&str> = s.split(',').map(str::trim).collect();
    if f.len() != 3 {
        return Err(bad());
    }
    let n_dim = f[0].parse().map_err(|_| bad())?;
    let m = f[1].parse().map_err(|_| bad())?;
    let mu = f[2].parse().map_err(|_| bad())?;
    ProblemDims::new(n_dim, m, mu).map_err(|e| CliError::Config(format!("--dims: {e}")))
}

fn show_report(dir: &Path) -> Result<u8, CliError> {
    let read = |f: &str| {
        std::fs::read_to_string(dir.join(f)).map_err(|e| CliError::Io(format!("{}: {e}", dir.join(f).display())))
    };
    let report = ExperimentReport::parse(&read(REPORT_FILE)?)?;
    let computed = report.compute_digest();
    if computed != report.digest {
        return Err(CliError::Digest { recorded: report.digest.clone(), computed });
    }
    let rows = parse_summary(&read(SUMMARY_FILE)?)?;
    println!("{:<28} {:<22} {:<5} {:<5} {:<28} {:>12} {:>3} {:>12}", "name", "kind", "hard", "pass", "metric", "value", "", "bound");
    for r in &rows {
        println!(
            "{:<28} {:<22} {:<5} {:<5} {:<28} {:>12} {:>3} {:>12}",
            r.name,
            r.kind,
            r.hard,
            r.pass,
            r.metric,
            r.value.map(|v| format!("{v:.4e}")).unwrap_or_default(),
            r.relation,
            r.bound.map(|v| format!("{v:.4e}")).unwrap_or_default()
        );
    }
    println!("digest {} ok; {}", report.digest, if report.pass { "PASS" } else { "FAIL" });
    Ok(if report.pass { 0 } else { 1 })
}
