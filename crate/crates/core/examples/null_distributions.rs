// Asymptotic null p-values of a ridge score statistic next to the
// permutation p-value.

use adamant::engine::{mantel_permutation_test_zspace, PermutationPlan};
use adamant::matrices::{thin_svd, DEFAULT_RANK_TOLERANCE};
use adamant::score_stats::{null_pvalue_mixture, principal_correlations, ridge_weights, score_statistic, NullMethod};
use adamant::simgen::{gen_design_cs, gen_vc_response};

/// `(permutation, Monte Carlo, Satterthwaite)` p-values.
pub fn run_example() -> adamant::Result<(f64, f64, f64)> {
    let (n, p) = (150, 60);
    let x = gen_design_cs(n, p, 0.2, 8)?.centered()?;
    let y = gen_vc_response(&x, 0.02, 1.0, 0.0, 9)?.y;
    let d = thin_svd(&x, DEFAULT_RANK_TOLERANCE)?;
    let w = ridge_weights(d.eigenvalues(), 100.0)?;
    let z = principal_correlations(&d, &y)?;
    let t = score_statistic(&z, &w)?;

    let perm = mantel_permutation_test_zspace(&d, &w, &y, &PermutationPlan::new(n, 1999, 1)?)?.p_value;
    let mc = null_pvalue_mixture(t.value, &w, NullMethod::MonteCarlo { draws: 50_000, seed: 2 })?;
    let sw = null_pvalue_mixture(t.value, &w, NullMethod::Satterthwaite)?;
    println!("T = {:.3}", t.value);
    println!("permutation {perm:.4}  mixture (Monte Carlo) {mc:.4}  Satterthwaite {sw:.4}");
    Ok((perm, mc, sw))
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
