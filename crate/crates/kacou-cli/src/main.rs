fn main() {
    std::process::exit(kacou_cli::run(std::env::args_os()));
}
