fn main() {
    std::process::exit(leakinv::app::main_with_args(std::env::args_os()));
}
