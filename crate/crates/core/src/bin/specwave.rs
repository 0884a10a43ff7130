fn main() -> std::process::ExitCode {
    specwave::cli::main()
}
