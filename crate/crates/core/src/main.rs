fn main() -> std::process::ExitCode {
    bayescoh::cli::main()
}
