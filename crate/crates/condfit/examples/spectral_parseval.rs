//! The Cramer-von Mises statistic as a sum of squared sine-basis
//! coefficients of the empirical process: partial sums climb to the
//! statistic itself.
//!
//! ```bash
//! cargo run --release --example spectral_parseval
//! ```

use condfit::edfstat::{cvm, pit, spectral_coefficients};
use condfit::expfam::{mle, sample, FamilyKind, NaturalParam};
use condfit::rng::{stream_rng, Stream};

fn main() {
    let truth = NaturalParam::Gamma {
        shape: 2.0,
        rate: 1.0,
    };
    let mut rng = stream_rng(21, Stream::Dataset, 0);
    let data = sample(&truth, 50, &mut rng);
    let theta_hat = mle(FamilyKind::Gamma, &data).unwrap();
    let u = pit(&data, &theta_hat).unwrap();

    let total = cvm(&u).value;
    println!("W^2 = {total:.6}\n");
    let coefs = spectral_coefficients(&u, 10_000);
    println!("{:>6}  {:>12}  {:>10}", "K", "sum U_j^2", "share");
    for k in [1usize, 2, 5, 10, 100, 1000, 10_000] {
        let s = coefs.sum_of_squares(k);
        println!("{k:>6}  {s:>12.6}  {:>9.2}%", 100.0 * s / total);
    }
    println!("\nleading coefficients: {:?}", &coefs.u[..4]);
}
