#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::patterns::{parse_sample_dump, write_sample_dump};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(buckets) = parse_sample_dump(text) {
        let again = parse_sample_dump(&write_sample_dump(&buckets)).expect("written dump parses");
        assert_eq!(write_sample_dump(&again), write_sample_dump(&buckets));
    }
});
