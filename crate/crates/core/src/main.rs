fn main() {
    std::process::exit(idp_lab::cli::run(std::env::args_os()));
}
