//! Runs the full pipeline on default synthetic markets and prints the
//! headline numbers for each seed.
//!
//! cargo run --release -p churnforge-core --example pipeline -- 1 2 3

use std::time::Instant;

use churnforge_core::{analysis, eval, label, model::DropoutLabel, network, synth};

fn main() {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("seed"))
        .collect();
    let seeds = if seeds.is_empty() {
        vec![1, 2, 3, 4, 5]
    } else {
        seeds
    };
    for seed in seeds {
        let start = Instant::now();
        let log = synth::generate_market(&synth::default_config(seed)).unwrap();
        let features = network::features_from_log(&log);
        let degree_rho = analysis::degree_correlation(&features).unwrap().rho;
        let cut = label::split_cut_time(&log, 2.0 / 3.0).unwrap();
        let labeled = label::label_dataset(&log, cut);
        let dropouts: Vec<_> = labeled
            .iter()
            .filter(|l| l.label == DropoutLabel::Dropout)
            .map(|l| l.features.clone())
            .collect();
        let table = analysis::bin_success_rates(&dropouts);
        let bin_rho = analysis::bin_dropout_correlation(&table, true).map(|r| r.rho);
        let bin_rho_all = analysis::bin_dropout_correlation(&table, false).map(|r| r.rho);
        let rows = eval::split_sweep(&labeled, &eval::DEFAULT_RATIOS, seed).unwrap();
        println!(
            "seed {seed}: events {} workers {} labeled {} dropouts {} degree_rho {degree_rho:.3} \
             bin_rho {bin_rho:.3?} (all bins {bin_rho_all:.3?}) [{:.2?}]",
            log.len(),
            features.len(),
            labeled.len(),
            dropouts.len(),
            start.elapsed()
        );
        let counts: Vec<usize> = table.rows().iter().map(|r| r.count).collect();
        println!("  bins {counts:?}");
        for r in rows {
            println!(
                "  {:>2}-{:<2} {:6.2} {:6.2} {:6.2}",
                r.train_pct,
                100 - r.train_pct,
                r.acc_knn1,
                r.acc_knn3,
                r.acc_gnb
            );
        }
    }
}
