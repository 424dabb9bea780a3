use std::fmt::Write;

use super::RunResult;

/// One row per split.
pub fn split_csv(result: &RunResult) -> String {
    let mut s = String::from("split,seed,r,n_train,n_test,c,sigma,accuracy\n");
    for x in &result.splits {
        let sigma = x.sigma.map(|v| v.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{},{},{},{},{},{}", x.index, x.seed, x.r, x.n_train, x.n_test, x.c, sigma, x.accuracy).unwrap();
    }
    s
}

/// Structured summary: mean ± std in percent (one decimal) plus the full result.
pub fn summary_json(result: &RunResult) -> String {
    let value = serde_json::json!({
        "summary": format!("{:.1} ± {:.1} ({} splits)", 100.0 * result.mean, 100.0 * result.std, result.splits.len()),
        "result": result,
    });
    serde_json::to_string_pretty(&value).expect("result serialises")
}
