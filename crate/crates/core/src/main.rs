fn main() {
    std::process::exit(agehawkes::cli::run(std::env::args_os()));
}
