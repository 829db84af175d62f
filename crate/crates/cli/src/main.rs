fn main() {
    std::process::exit(radiogan_cli::run(std::env::args_os()));
}
