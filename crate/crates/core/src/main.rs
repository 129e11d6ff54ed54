fn main() {
    std::process::exit(saa_memory::cli::run(std::env::args_os()));
}
