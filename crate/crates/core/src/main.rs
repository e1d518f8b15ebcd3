fn main() {
    std::process::exit(chiral_spectra::cli::run(std::env::args_os()));
}
