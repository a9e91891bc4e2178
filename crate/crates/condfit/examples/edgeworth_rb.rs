//! Rao-Blackwell estimates to O(1/n): the linear correction polynomial
//! from third cumulants, the expansion of a conditional expectation about
//! its unconditional value, and the corrected Gamma shape estimate.
//!
//! ```bash
//! cargo run --release --example edgeworth_rb
//! ```

use condfit::edgeworth::{
    edgeworth_density_1d, gamma_shape_rb_estimate, indicator_expansion_input, psi11_coefficients,
    rao_blackwell_expansion,
};
use condfit::expfam::{mle, moment_structure, sample, FamilyKind, NaturalParam};
use condfit::rng::{stream_rng, Stream};

fn main() {
    // expansion vs the exact conditional expectation (exponential family,
    // indicator functional, conditioning at t = n mu)
    let theta = NaturalParam::Exponential { rate: 1.0 };
    let ms = moment_structure(&theta).unwrap();
    let psi = psi11_coefficients(&ms);
    println!("E(1(X1 <= 1) | T_n = n mu), exponential rate 1:");
    println!(
        "{:>5}  {:>10}  {:>10}  {:>12}",
        "n", "exact", "A(n,J)", "n^2 error"
    );
    let input = indicator_expansion_input(&theta, 1.0).unwrap();
    for n in [10usize, 20, 40, 80] {
        let a = rao_blackwell_expansion(&input, &ms, &psi, n).unwrap().a;
        let exact = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32 - 1);
        println!(
            "{n:>5}  {exact:>10.6}  {a:>10.6}  {:>12.4}",
            (n * n) as f64 * (exact - a).abs()
        );
    }

    // the corrected shape estimate pulls the MLE toward the target
    let truth = NaturalParam::Gamma {
        shape: 2.0,
        rate: 1.0,
    };
    let mut rng = stream_rng(4, Stream::Dataset, 0);
    let data = sample(&truth, 25, &mut rng);
    let fitted = mle(FamilyKind::Gamma, &data).unwrap();
    let NaturalParam::Gamma { shape, .. } = fitted else {
        unreachable!()
    };
    let tilde = gamma_shape_rb_estimate(&fitted, data.len()).unwrap();
    println!("\ngamma sample (true shape 2, n = 25):");
    println!("  shape MLE            = {shape:.4}");
    println!("  Rao-Blackwell to 1/n = {tilde:.4}");

    // one-term Edgeworth density of the standardized sufficient statistic
    println!("\none-term Edgeworth density at u = 0.5 (exponential):");
    for n in [10usize, 40] {
        println!(
            "  n = {n:>3}: {:.6}",
            edgeworth_density_1d(&ms, n, 0.5).unwrap()
        );
    }
}
