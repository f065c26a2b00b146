fn main() {
    std::process::exit(bohmflow::cli::run(std::env::args_os()));
}
