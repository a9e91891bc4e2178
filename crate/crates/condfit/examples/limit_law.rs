//! The limiting null law of the statistics: covariance kernel of the
//! estimated empirical process, its Nystrom eigenvalues, and quantiles of
//! the weighted chi-square series via characteristic-function inversion.
//!
//! ```bash
//! cargo run --release --example limit_law
//! ```

use condfit::asymptotic::{limit_covariance, score_shift};
use condfit::expfam::NaturalParam;
use condfit::runner::cmd_limit_dist;
use condfit::StatKind;

fn main() {
    // simple null (no estimated parameter): the classical limits
    for stat in [StatKind::Cvm, StatKind::Watson] {
        let rep = cmd_limit_dist(None, stat, 512, 100).unwrap();
        println!(
            "simple-null {stat}: lambda_1..5 = {:?}",
            &rep.eigenvalues[..5]
        );
        for (p, q) in &rep.quantiles {
            println!("  {:.0}% point = {q:.4}", p * 100.0);
        }
    }

    // estimating the parameter shrinks the kernel, and with it every
    // eigenvalue and quantile
    let theta = NaturalParam::Gamma {
        shape: 2.0,
        rate: 1.0,
    };
    println!("\ngamma(2,1) estimated-parameter law:");
    println!("  xi(0.5) = {:?}", score_shift(&theta, 0.5).unwrap());
    for s in [0.25, 0.5, 0.75] {
        println!(
            "  rho(s,s) at s = {s}: {:.4} (bridge value {:.4})",
            limit_covariance(&theta, s, s).unwrap(),
            s * (1.0 - s)
        );
    }
    let rep = cmd_limit_dist(Some(&theta), StatKind::Cvm, 512, 100).unwrap();
    for (p, q) in &rep.quantiles {
        println!("  {:.0}% point = {q:.4}", p * 100.0);
    }
}
