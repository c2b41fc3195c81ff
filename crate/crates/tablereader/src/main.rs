fn main() {
    std::process::exit(tablereader::run_cli(std::env::args_os()));
}
