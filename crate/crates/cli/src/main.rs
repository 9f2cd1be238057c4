fn main() {
    std::process::exit(kpt_report::cli::main_with_args(std::env::args_os()));
}
