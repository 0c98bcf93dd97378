fn main() {
    std::process::exit(hisum_cli::dispatch(std::env::args_os()));
}
