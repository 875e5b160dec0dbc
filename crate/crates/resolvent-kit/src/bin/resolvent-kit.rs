fn main() {
    std::process::exit(resolvent_kit::cli::run(std::env::args_os()));
}
