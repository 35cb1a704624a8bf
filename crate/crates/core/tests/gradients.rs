//! Analytic gradients against central finite differences.

mod common;

use common::grad_check as check;
use rand::{Rng, SeedableRng};
use uavsim::nn::NetworkConfig;
use uavsim::rng::SimRng;
use uavsim::ObservationSpec;

fn net(n_conv: usize, kernels: usize, kernel: usize, hidden: Vec<usize>, channels: usize) -> NetworkConfig {
    NetworkConfig {
        n_conv_layers: n_conv,
        n_kernels: kernels,
        kernel_size: kernel,
        hidden_sizes: hidden,
        input_channels: channels,
        ..NetworkConfig::default()
    }
}

#[test]
fn two_conv_layers_both_branches() {
    check(net(2, 3, 3, vec![7, 5], 4), ObservationSpec::new(5, 2), 6, 1).expect("instance near a kink");
}

#[test]
fn five_by_five_kernels_with_extra_input_channels() {
    check(net(1, 2, 5, vec![6], 6), ObservationSpec::new(7, 1), 4, 2).expect("instance near a kink");
}

#[test]
fn without_map_processing() {
    check(net(2, 2, 3, vec![4], 4), ObservationSpec::DISABLED, 4, 3).expect("instance near a kink");
}

#[test]
fn randomized_small_networks() {
    let mut rng = SimRng::seed_from_u64(99);
    let (mut checked, mut resampled) = (0, 0);
    for seed in 0.. {
        if checked == 8 {
            break;
        }
        let kernel = [1, 3][rng.random_range(0..2)];
        let n_conv = rng.random_range(1..=2);
        let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(3..=6)).collect();
        let map_size = rng.random_range(3..=6);
        let l = [0, 3, 5][rng.random_range(0..3)];
        let spec = ObservationSpec::new(l.min(2 * map_size - 1), rng.random_range(1..=2));
        let cfg = net(n_conv, rng.random_range(1..=3), kernel, hidden, 4);
        let shrink = n_conv * (kernel - 1);
        let min_side = if spec.local_size == 0 {
            spec.global_side(map_size)
        } else {
            spec.local_size.min(spec.global_side(map_size))
        };
        if min_side <= shrink {
            continue;
        }
        match check(cfg, spec, map_size, seed + 100) {
            Some(_) => checked += 1,
            None => resampled += 1,
        }
        assert!(resampled <= 4, "too many instances near kinks");
    }
}
