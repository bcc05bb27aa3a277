fn main() -> std::process::ExitCode {
    fanox_cli::run()
}
