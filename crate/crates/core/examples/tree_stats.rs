//! Prints tree size and build time for each image given on the command line.

use std::time::Instant;

fn main() {
    for path in std::env::args().skip(1) {
        let image = match scop::imaging::load_image(&path) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("{e}");
                continue;
            }
        };
        let start = Instant::now();
        let tree = scop::tree::build_tree(&image);
        let elapsed = start.elapsed();
        assert_eq!(tree.reconstruct(), image);
        println!("{path}: {} shapes in {:.1} ms", tree.len(), elapsed.as_secs_f64() * 1e3);
    }
}
