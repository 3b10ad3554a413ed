fn main() {
    std::process::exit(latent_dolly::cli::dispatch(std::env::args_os()));
}
