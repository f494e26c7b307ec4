use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let verbose = args.iter().filter(|a| *a == "-v" || *a == "--verbose").count()
        + args
            .iter()
            .filter(|a| a.starts_with("-vv"))
            .map(|a| a.len() - 1)
            .sum::<usize>();
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    let mut stdout = std::io::stdout();
    let code = spotcheck_cli::run_with_output(args, &mut stdout);
    ExitCode::from(code as u8)
}
