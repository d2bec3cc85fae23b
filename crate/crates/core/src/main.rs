fn main() {
    std::process::exit(sslcf::cli::run_subcommand(std::env::args_os()));
}
