fn main() {
    std::process::exit(intermix_lab::run(std::env::args_os()));
}
