#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::learning::SvmModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = SvmModel::from_json(text) {
        let _ = model.predict(&vec![0.5; model.n_train]);
    }
});
