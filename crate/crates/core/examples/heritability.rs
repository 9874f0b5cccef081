// Moment estimate of heritability and the range of the implied Gram
// correlation.

use adamant::heritability::{correlation_bounds, h2_moment, relationship_matrix, response_matrix, HeritabilityEstimate};
use adamant::matrices::FeatureMatrix;
use adamant::rng::substream;
use adamant::simgen::gen_snp_groups;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn run_example() -> adamant::Result<HeritabilityEstimate> {
    let (n, p, h2) = (200, 1000, 0.6);
    let x = gen_snp_groups(n, p, 10, 31)?.standardized()?;
    let mut rng = substream(31, 99);
    let b = DMatrix::from_fn(p, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let e = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = FeatureMatrix::new(x.data() * b * (h2 / p as f64).sqrt() + e * (1.0 - h2).sqrt())?;

    let est = h2_moment(&response_matrix(&y)?, &relationship_matrix(&x)?, 1)?;
    println!("h2_hat {:.3} (true {h2}), tr G^2 = {:.1}", est.h2_hat, est.tr_g2);
    println!("observed Gram correlation {:.4}", est.observed_correlation());
    let bounds = correlation_bounds(est.h2_clamped, n)?;
    println!(
        "case {}: correlation in [{:.4}, {:.4}] over tr G^2 in [n, n^2]",
        bounds.case, bounds.lower, bounds.upper
    );
    Ok(est)
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
