// Temporary experiment: scan learning rates. Deleted before delivery.
use mvtrack_core::synth::{generate, SynthConfig};
use mvtrack_core::toytrain::{train, ToyTrainConfig};

#[test]
#[ignore]
fn scan_learning_rates() {
    let scene = generate(&SynthConfig {
        num_identities: 4,
        num_frames: 12,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap()
    .scene;
    for lr in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let cfg = ToyTrainConfig {
            epochs: 8,
            learning_rate: lr,
            ..ToyTrainConfig::default()
        };
        match train(&scene, &cfg) {
            Ok((_, curve)) => {
                println!(
                    "lr {lr}: first {:.5} last {:.5} (sep {:.4} dist {:.4} rec {:.4})",
                    curve[0].total,
                    curve.last().unwrap().total,
                    curve.last().unwrap().l_sep,
                    curve.last().unwrap().l_distill,
                    curve.last().unwrap().l_recon,
                );
            }
            Err(e) => println!("lr {lr}: {e}"),
        }
    }
}
