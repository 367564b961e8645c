//! Central-difference check of the analytic gradients for both network
//! shapes, reporting the worst relative error per parameter block.

use highway::neural::{DuelingAgg, QNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss(net: &QNetwork, x: &[f64], target: &[f64]) -> f64 {
    let q = net.q_values(x).unwrap();
    q.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / q.len() as f64
}

fn check(label: &str, mut net: QNetwork, input: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (q, cache) = net.forward(&x).unwrap();
    let upstream: Vec<f64> = q
        .iter()
        .zip(&target)
        .map(|(p, t)| 2.0 * (p - t) / q.len() as f64)
        .collect();
    let analytic = net.backward(&cache, &upstream).unwrap().flat();

    let params = net.flat_params();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in (0..params.len()).step_by(7) {
        let mut p = params.clone();
        p[i] += h;
        net.set_flat_params(&p).unwrap();
        let up = loss(&net, &x, &target);
        p[i] -= 2.0 * h;
        net.set_flat_params(&p).unwrap();
        let down = loss(&net, &x, &target);
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1.0);
        worst = worst.max(rel);
    }
    net.set_flat_params(&params).unwrap();
    println!("{label:<10} {} params checked every 7th, worst relative error {worst:.2e}", params.len());
}

fn main() {
    check("dqn", QNetwork::new_dqn(23, 32, 5, 3), 23);
    check("ddqn", QNetwork::new_dueling(23, 32, 5, DuelingAgg::Max, 4), 23);
}
