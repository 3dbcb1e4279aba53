fn main() {
    std::process::exit(kgretro::cli::run(std::env::args_os()));
}
