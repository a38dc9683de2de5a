use std::io::Write;
use std::process::ExitCode;

use nsp_precoding::harness::run_sweep_with;
use nsp_sim::{parse_cli, render_csv, write_results, CliError};

fn main() -> ExitCode {
    let spec = match parse_cli(std::env::args_os()) {
        Ok(spec) => spec,
        Err(CliError::Info(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    let cfg = &spec.config;
    let threads = std::env::var("THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    let step = (cfg.trials / 100).max(1);
    let progress = |done: usize, total: usize| {
        if done.is_multiple_of(step) || done == total {
            eprint!("\rtrial {done}/{total}");
            if done == total {
                eprintln!();
            }
        }
    };
    let curve = match run_sweep_with(cfg, threads, progress) {
        Ok(curve) => curve,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    match &spec.out {
        Some(path) => {
            if let Err(e) = write_results(&curve, path) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = stdout.write_all(render_csv(&curve).as_bytes()).and_then(|_| stdout.flush()) {
                eprintln!("error: cannot write to stdout: {e}");
                return ExitCode::from(1);
            }
        }
    }

    let failed = curve.failed_trials();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed; see failed_trials column");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
