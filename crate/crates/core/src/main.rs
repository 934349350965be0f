fn main() {
    std::process::exit(mtlc::cli::cmd_dispatch(std::env::args_os()));
}
