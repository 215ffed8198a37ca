fn main() {
    std::process::exit(mffqi::harness::cli::cli_run(std::env::args_os()));
}
