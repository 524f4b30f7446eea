fn main() {
    std::process::exit(wfkit::cli::run(std::env::args_os()));
}
