fn main() {
    std::process::exit(hpoly_cli::dispatch(std::env::args_os()));
}
