#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::tree::{ShapeTree, TreeRecord};

fuzz_target!(|data: &[u8]| {
    let Ok(record) = serde_json::from_slice::<TreeRecord>(data) else { return };
    if let Ok(tree) = ShapeTree::from_record(record.clone()) {
        assert_eq!(tree.to_record(), record);
        let _ = tree.reconstruct();
    }
});
