fn main() -> std::process::ExitCode {
    minset::cli::main()
}
