fn main() {
    std::process::exit(relaxlab_cli::run(std::env::args_os()));
}
