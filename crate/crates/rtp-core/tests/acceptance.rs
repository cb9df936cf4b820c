//! Full verification suite; prints one line per criterion
//! (visible with `cargo test --test acceptance -- --nocapture`).

#[test]
fn acceptance() {
    let reports = rtp_core::acceptance::run_all().expect("criteria must be computable");
    let mut failed = Vec::new();
    for r in &reports {
        println!("{}", r.summary_line());
        if !r.passed {
            failed.push(r.summary_line());
        }
    }
    assert!(
        failed.is_empty(),
        "failing criteria:\n{}",
        failed.join("\n")
    );
}
