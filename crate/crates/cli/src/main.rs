fn main() {
    std::process::exit(dss_cli::run(std::env::args_os()));
}
