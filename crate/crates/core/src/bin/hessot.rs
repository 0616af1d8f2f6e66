fn main() {
    std::process::exit(hessot::cli::run(std::env::args_os()));
}
