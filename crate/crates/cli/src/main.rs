use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = curvlab_cli::configure_threads() {
        eprintln!("curvlab: {e}");
        return ExitCode::from(1);
    }
    let code = curvlab_cli::execute(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
