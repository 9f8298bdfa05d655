fn main() {
    std::process::exit(rmsprop_lab::cli::main());
}
