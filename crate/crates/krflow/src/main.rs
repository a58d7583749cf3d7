fn main() { krflow::cli::run(); }
