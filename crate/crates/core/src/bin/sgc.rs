fn main() -> std::process::ExitCode {
    latent_sgc::cli::main()
}
