fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(rambo_cli::main_from_args())
}
