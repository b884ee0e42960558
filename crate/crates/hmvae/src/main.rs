fn main() {
    std::process::exit(hmvae::cli::dispatch(std::env::args_os()));
}
