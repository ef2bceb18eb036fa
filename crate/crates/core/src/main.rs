fn main() -> std::process::ExitCode {
    qnd_readout::cli::main()
}
