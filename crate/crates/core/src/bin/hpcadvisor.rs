fn main() {
    std::process::exit(hpcadvisor::cli::run(std::env::args_os()));
}
