fn main() {
    std::process::exit(nftmine::run_cli(std::env::args_os()));
}
