//! Backpropagation vs central finite differences on random networks.
//!
//!   cargo run --example gradient_check

use cohesim::neural::{gauss, FeedForwardNet};
use cohesim::workload::stream;

fn main() {
    let mut rng = stream(1, 0x6763);
    println!("sizes             max rel err");
    for trial in 0..8u64 {
        let sizes = match trial % 4 {
            0 => vec![6, 16, 16, 4],
            1 => vec![12, 256, 256, 24],
            2 => vec![3, 8, 2],
            _ => vec![6, 64, 64, 6],
        };
        let mut net = FeedForwardNet::new(&sizes, 0.5, trial);
        let input: Vec<f64> = (0..sizes[0]).map(|_| gauss(&mut rng)).collect();
        let target: Vec<f64> = (0..*sizes.last().unwrap())
            .map(|_| gauss(&mut rng))
            .collect();
        let err = net.grad_check(&input, |y| {
            let loss = y.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
            let grad = y.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            (loss, grad)
        });
        println!("{:<17} {err:.3e}", format!("{sizes:?}"));
    }
}
