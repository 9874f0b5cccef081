// Simulated EEG trials reduced to band coherence features.

use adamant::simgen::{gen_eeg, gen_snp_groups, EegSimConfig};
use adamant::spectral::{coherence_features, default_bands, TrialTensor, Window};

pub fn run_example() -> adamant::Result<(usize, usize)> {
    let config = EegSimConfig {
        n: 12,
        p_snp: 40,
        channels: 6,
        linked_channels: 3,
        series_length: 512,
        trials: 4,
        sigma_g2: 50.0,
        seed: 3,
        ..EegSimConfig::default()
    };
    let snps = gen_snp_groups(config.n, config.p_snp, 4, 4)?;
    let data = gen_eeg(&config, &snps)?;
    let tensor = TrialTensor::new(data.subjects, config.sample_rate_hz)?;
    let bands = default_bands();
    let per_subject = tensor.coherence(&bands, Window::Hann)?;

    let theta = per_subject[0].band("theta").expect("theta is a default band");
    println!("subject 1 theta coherence, first three channels:");
    for i in 0..3 {
        println!("  {:.3} {:.3} {:.3}", theta[(i, 0)], theta[(i, 1)], theta[(i, 2)]);
    }
    let features = coherence_features(&per_subject)?;
    println!("{} subjects x {} features", features.n(), features.p());
    Ok((features.n(), features.p()))
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
