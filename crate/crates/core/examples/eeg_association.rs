// SNP/EEG association study over a 3 × 3 ridge grid.

use adamant::engine::EEG_LAMBDA_GRID;
use adamant::simgen::EegSimConfig;
use adamant::spectral::BandSpec;
use adamant::study::{eeg_power, PowerTable, Replication};

pub fn run_example() -> adamant::Result<PowerTable> {
    let config = EegSimConfig {
        n: 100,
        channels: 10,
        linked_channels: 10,
        ..EegSimConfig::default()
    };
    let rep = Replication {
        reps: 20,
        permutations: 99,
        alpha: 0.05,
        seed: 77,
    };
    let table = eeg_power(&config, 4, &BandSpec::theta(), &[0.0, 100.0], &EEG_LAMBDA_GRID, &EEG_LAMBDA_GRID, &rep)?;
    print!("{}", table.to_csv());
    Ok(table)
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
