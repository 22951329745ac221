fn main() {
    std::process::exit(grlpn_cli::run(std::env::args_os()));
}
