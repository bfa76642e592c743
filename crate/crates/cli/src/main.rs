fn main() {
    std::process::exit(eventqa_cli::run(std::env::args_os()));
}
