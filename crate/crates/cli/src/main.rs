mod commands;
mod config;
mod report;

use clap::{Parser, ValueEnum};
use config::{load, Validate};
use report::Report;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Bisect,
    Visibility,
    KakeyaVerify,
    ReductionCheck,
    NetBuild,
    Classify,
    AppendixCheck,
    CylinderCheck,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Numerical experiments on polynomial partitioning and the Kakeya maximal inequality.
#[derive(Debug, Parser)]
#[command(name = "kakeya", version)]
struct Cli {
    command: Command,
    /// JSON config file
    config: PathBuf,
    /// Output directory [env: KAKEYA_OUT_DIR, default: kakeya-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for batch commands
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("KAKEYA_OUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("kakeya-out"))
}

fn run<T: DeserializeOwned + Validate + Serialize>(
    cli: &Cli,
    f: fn(&T, usize) -> kakeya_core::Result<Report>,
) -> ExitCode {
    let (cfg, _) = match load::<T>(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.0);
            return ExitCode::from(1);
        }
    };
    let command = cli.command.name();
    let report = match f(&cfg, cli.jobs as usize) {
        Ok(r) => r,
        Err(kakeya_core::Error::NotConverged { max_residual }) => {
            let mut r = Report::new();
            r.not_converged = true;
            r.set("max_residual", max_residual);
            r
        }
        Err(e) => {
            eprintln!("error: {command}: {e}");
            return ExitCode::from(1);
        }
    };
    let value = serde_json::to_value(&cfg).expect("config serializes");
    write_out(&out_dir(cli), &command, &value, &report)
}

fn write_out(dir: &Path, command: &str, config: &serde_json::Value, report: &Report) -> ExitCode {
    match report::write(dir, command, config, report) {
        Ok(status) => {
            for f in &report.failures {
                eprintln!("fail: {f}");
            }
            eprintln!("{command}: {} ({})", status_word(status), dir.display());
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", dir.display());
            ExitCode::from(1)
        }
    }
}

fn status_word(s: report::Status) -> &'static str {
    match s {
        report::Status::Pass => "pass",
        report::Status::Fail => "fail",
        report::Status::NotConverged => "not converged",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    use Command::*;
    match cli.command {
        Bisect => run(&cli, commands::bisect),
        Visibility => run(&cli, commands::visibility),
        KakeyaVerify => run(&cli, commands::kakeya_verify),
        ReductionCheck => run(&cli, commands::reduction_check),
        NetBuild => run(&cli, commands::net_build),
        Classify => run(&cli, commands::classify_cmd),
        AppendixCheck => run(&cli, commands::appendix_check_cmd),
        CylinderCheck => run(&cli, commands::cylinder_check_cmd),
    }
}
