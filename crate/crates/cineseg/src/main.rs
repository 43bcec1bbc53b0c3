fn main() {
    std::process::exit(cineseg::cli::run(std::env::args_os()));
}
