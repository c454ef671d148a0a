fn main() {
    std::process::exit(snowglobe::io::cli_main(std::env::args_os()));
}
