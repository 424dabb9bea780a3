#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::imaging::{decode_pgm, encode_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm(data) {
        let again = decode_pgm(&encode_pgm(&img)).expect("re-encoded image decodes");
        assert_eq!(img, again);
    }
});
