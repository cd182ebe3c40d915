fn main() {
    std::process::exit(stobeam::main_with(std::env::args_os()));
}
