fn main() {
    std::process::exit(conddev::cli::run(std::env::args_os()));
}
