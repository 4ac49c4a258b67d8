fn main() {
    std::process::exit(protofit::cli::run(std::env::args_os()));
}
