fn main() {
    std::process::exit(leadtime::cli::run(std::env::args_os()));
}
