//! How close are the bootstrap and conditional P-values? Simulate null
//! von Mises datasets, compute both P-values for Watson's statistic on
//! each, and correlate. The agreement tightens as n grows.
//!
//! ```bash
//! cargo run --release --example pvalue_correlation
//! ```

use condfit::runner::cmd_reproduce_correlation;

fn main() {
    println!("von Mises null (kappa = 2), Watson U^2, 60 datasets, B = M = 300\n");
    println!(
        "{:>4}  {:>8}  {:>12}  {:>12}",
        "n", "corr", "mean |diff|", "max |diff|"
    );
    for (i, n) in [10usize, 20, 40].into_iter().enumerate() {
        let summary = cmd_reproduce_correlation(n, 60, 300, 300, 100 + i as u64, None).unwrap();
        println!(
            "{n:>4}  {:>8.4}  {:>12.4}  {:>12.4}",
            summary.pearson, summary.mean_abs_diff, summary.max_abs_diff
        );
    }
    println!("\nlarger runs (200 datasets, B = M = 500, n = 34 and 55) are the");
    println!("acceptance gate; see `cargo test --test acceptance`");
}
