fn main() {
    std::process::exit(beta_jacobi::cli::main_from_env());
}
