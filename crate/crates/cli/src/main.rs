fn main() {
    std::process::exit(frtpp_cli::run(std::env::args_os()));
}
