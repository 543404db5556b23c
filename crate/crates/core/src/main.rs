fn main() {
    std::process::exit(imd_core::cli::cli_main(std::env::args_os()));
}
