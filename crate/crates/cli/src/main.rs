fn main() {
    std::process::exit(platoon_cli::cli::main_with(std::env::args_os()));
}
