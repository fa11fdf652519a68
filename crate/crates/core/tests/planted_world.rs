use platoon_core::lsq::fit_polynomial;
use platoon_core::value_approx::{Action, ApproxParams, PolyCostModel};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

// merging gets dearer with headway; not merging costs a flat 3.0
fn merge_cost(h: f64) -> f64 {
    2.0 + 0.03 * h + 0.004 * h * h - 0.00005 * h * h * h
}
const NOMERGE_COST: f64 = 3.0;

/// Fraction of wrong decisions over the last `tail` of `n` arrivals.
fn planted_error(seed: u64, n: usize, tail: usize, noise: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = PolyCostModel::new(ApproxParams::default()).unwrap();
    let mut wrong = 0;
    for k in 0..n {
        let h = 30.0 * unit(&mut rng);
        let action = model.decide(h);
        let best = if merge_cost(h) <= NOMERGE_COST { Action::Merge } else { Action::NoMerge };
        if k >= n - tail && action != best {
            wrong += 1;
        }
        let e = noise * (2.0 * unit(&mut rng) - 1.0);
        let realized = match action {
            Action::Merge => merge_cost(h) + e,
            Action::NoMerge => NOMERGE_COST + e,
        };
        model.record_outcome(h, action, realized).unwrap();
    }
    wrong as f64 / tail as f64
}

#[test]
fn closed_loop_decisions_converge() {
    for seed in 1..=5 {
        let err = planted_error(seed, 2000, 500, 0.05);
        assert!(err < 0.05, "seed {seed}: error {err}");
    }
}

#[test]
fn noise_free_cubic_recovered() {
    let truth = [1.5, -0.25, 0.03, -0.002];
    let samples: Vec<(f64, f64)> = (0..10)
        .map(|i| {
            let h = 1.0 + 2.5 * i as f64;
            (h, truth[0] + truth[1] * h + truth[2] * h * h + truth[3] * h * h * h)
        })
        .collect();
    let fit = fit_polynomial(&samples, 3).unwrap();
    for (b, t) in fit.raw_coefficients().iter().zip(truth) {
        assert!(((b - t) / t).abs() <= 1e-6, "{b} vs {t}");
    }
}
