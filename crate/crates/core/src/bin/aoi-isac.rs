fn main() {
    std::process::exit(aoi_isac::cli::run(std::env::args_os()));
}
