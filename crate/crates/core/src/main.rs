fn main() {
    std::process::exit(ssdl_harm::cli::dispatch(std::env::args_os()));
}
