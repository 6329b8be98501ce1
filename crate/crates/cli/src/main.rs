fn main() {
    std::process::exit(pmfuse_cli::run(std::env::args_os()));
}
