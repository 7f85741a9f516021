fn main() {
    std::process::exit(hoodframe_cli::run(std::env::args_os()));
}
