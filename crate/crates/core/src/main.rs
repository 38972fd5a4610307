fn main() {
    std::process::exit(gyrostat::cli::dispatch());
}
