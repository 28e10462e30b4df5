fn main() {
    std::process::exit(oufreq::cli::run(std::env::args_os()));
}
