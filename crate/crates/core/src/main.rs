fn main() {
    std::process::exit(symcomplete::cli::run(std::env::args_os()));
}
