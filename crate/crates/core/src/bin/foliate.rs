fn main() {
    std::process::exit(foliation_core::cli_reports::main_with(std::env::args_os()));
}
