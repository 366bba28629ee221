fn main() {
    std::process::exit(qudit_learn::run_cli(std::env::args_os()));
}
