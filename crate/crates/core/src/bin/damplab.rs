fn main() -> std::process::ExitCode {
    damplab::cli::main_from_env()
}
