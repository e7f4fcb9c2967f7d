fn main() {
    std::process::exit(ffcorr::cli::main_with_args(std::env::args_os()));
}
