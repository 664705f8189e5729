fn main() {
    std::process::exit(dashjudge::run(std::env::args_os()));
}
