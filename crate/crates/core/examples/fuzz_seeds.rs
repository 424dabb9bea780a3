//! Writes small valid inputs for every fuzz target.
//!
//! cargo run --example fuzz_seeds -- fuzz/corpus

use std::path::Path;

use scop::attributes::compute_attributes;
use scop::coding::{fit_codebooks, CodingParams, Method};
use scop::imaging::{encode_pgm, encode_png, generate_synthetic, GrayImage, SynthKind, SynthParams};
use scop::learning::{kernel_matrix, svm_train, KernelKind};
use scop::patterns::{extract_patterns, write_sample_dump, PatternConfig, PatternKind};
use scop::pipeline::ExperimentConfig;
use scop::tree::build_tree;

fn put(root: &Path, target: &str, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let dir = root.join(target);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(format!("seed-{name}")), bytes)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fuzz/corpus".into());
    let root = Path::new(&root);
    let tiny = GrayImage::from_rows(&[[0u16, 3, 3], [0, 7, 1], [2, 2, 2]])?;
    let p = SynthParams { width: 16, height: 16, period: 5.0, ..SynthParams::default() };
    let checker = generate_synthetic(SynthKind::Checkerboard, &p, 1)?;

    put(root, "decode_pgm", "p5", &encode_pgm(&checker))?;
    put(root, "decode_pgm", "p2", b"P2\n# tiny\n3 3\n7\n0 3 3\n0 7 1\n2 2 2\n")?;
    let wide = GrayImage::from_rows(&[[0u16, 1000], [65535, 7]])?;
    put(root, "decode_pgm", "p5-16bit", &encode_pgm(&wide))?;
    put(root, "decode_png", "gray8", &encode_png(&checker))?;
    put(root, "decode_png", "gray16", &encode_png(&wide))?;

    let tree = build_tree(&tiny);
    put(root, "tree_record", "tiny", serde_json::to_string(&tree.to_record())?.as_bytes())?;

    let tree = build_tree(&checker);
    let attrs = compute_attributes(&tree, &checker, 3);
    let config = PatternConfig { r: 1, a_max: 200, ..PatternConfig::default() };
    let buckets = extract_patterns(&tree, &attrs, &config)?;
    put(root, "sample_dump", "checker", write_sample_dump(&buckets).as_bytes())?;

    let mut params = CodingParams::default();
    params.k = PatternKind::ALL.iter().map(|&p| (p, 2)).collect();
    for method in [Method::KMeans, Method::Sparse, Method::Fisher] {
        let set = fit_codebooks(method, &buckets, &params, 0)?;
        put(root, "codebooks", method.short(), serde_json::to_string(&set)?.as_bytes())?;
    }

    let x = vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.2, 0.8], vec![0.5, 0.5], vec![0.4, 0.6]];
    let model = svm_train(&kernel_matrix(&x, KernelKind::Hik)?, &[0, 0, 1, 1, 2, 2], 10.0)?;
    put(root, "svm_model", "three-class", model.to_json().as_bytes())?;

    put(root, "config_toml", "default", ExperimentConfig::default().to_toml().as_bytes())?;
    put(root, "config_toml", "partial", b"method = \"FC\"\npatterns = [\"SS\", \"SA\"]\n[kernel]\nc = 1.0\n")?;
    Ok(())
}
