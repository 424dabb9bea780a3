#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::imaging::{decode_png, encode_png};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_png(data) {
        assert_eq!(decode_png(&encode_png(&img)).unwrap(), img);
    }
});
