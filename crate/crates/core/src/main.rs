fn main() {
    std::process::exit(aitchison_unmix::cli::run(std::env::args_os()));
}
