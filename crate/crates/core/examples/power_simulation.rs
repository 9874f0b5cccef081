// Small power curves for the variance-components and fixed-effects models.

use adamant::engine::UNIVARIATE_LAMBDA_GRID;
use adamant::simgen::SimConfig;
use adamant::study::{univariate_power, LinearModel, PowerTable, Replication};

pub fn run_example() -> adamant::Result<Vec<PowerTable>> {
    let config = SimConfig {
        n: 80,
        p: 120,
        ..SimConfig::default()
    };
    let rep = Replication {
        reps: 40,
        permutations: 99,
        alpha: 0.05,
        seed: 2024,
    };
    let vc = univariate_power(LinearModel::Vc, &config, &[0.0, 0.05, 0.1], &UNIVARIATE_LAMBDA_GRID, &rep)?;
    let fe = univariate_power(LinearModel::Fe, &config, &[0.0, 0.1], &UNIVARIATE_LAMBDA_GRID, &rep)?;
    print!("{}\n{}", vc.to_csv(), fe.to_csv());
    Ok(vec![vc, fe])
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
