fn main() -> std::process::ExitCode {
    fvmn::cli::main()
}
