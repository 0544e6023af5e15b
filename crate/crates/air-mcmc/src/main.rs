fn main() {
    std::process::exit(air_mcmc::cli::run_cli());
}
