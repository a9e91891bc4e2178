//! The two null distributions converge: the law of the statistic given
//! the sufficient statistic at t = n mu against its unconditional law at
//! the matching parameter. The sup distance between the two simulated
//! CDFs shrinks as n grows.
//!
//! ```bash
//! cargo run --release --example theorem1_trend
//! ```

use condfit::expfam::{FamilyKind, NaturalParam};
use condfit::runner::cmd_theorem1_check;

fn main() {
    let theta = NaturalParam::Exponential { rate: 1.0 };
    let table = cmd_theorem1_check(
        FamilyKind::Exponential,
        &theta,
        &[10, 20, 50, 100],
        3000,
        3000,
        7,
    )
    .unwrap();
    println!("exponential, CvM statistic, B = M = 3000\n");
    println!("{:>5}  {:>14}  {:>10}", "n", "sup |G - H|", "MC band");
    for row in &table.rows {
        println!(
            "{:>5}  {:>14.4}  {:>10.4}",
            row.n, row.sup_distance, row.mc_band
        );
    }
    println!(
        "\nnonincreasing within the band: {:?}",
        table.trend_nonincreasing
    );

    // same study through the chain for a two-parameter family
    let theta = NaturalParam::Gamma {
        shape: 2.0,
        rate: 1.0,
    };
    let table = cmd_theorem1_check(FamilyKind::Gamma, &theta, &[20, 60], 2000, 2000, 8).unwrap();
    println!("\ngamma(2,1), CvM statistic, B = M = 2000\n");
    for row in &table.rows {
        println!(
            "{:>5}  {:>14.4}  {:>10.4}",
            row.n, row.sup_distance, row.mc_band
        );
    }
}
