#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::coding::CodebookSet;
use scop::patterns::PatternBuckets;

fuzz_target!(|data: &[u8]| {
    let Ok(set) = serde_json::from_slice::<CodebookSet>(data) else { return };
    if set.validate().is_ok() {
        let patterns: Vec<_> = set.codebooks.iter().map(|c| c.pattern).collect();
        let _ = set.encode(&PatternBuckets::empty(&patterns));
    }
});
