fn main() {
    std::process::exit(highway::cli::run(std::env::args_os()));
}
