//! Seeded random games for randomized verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::model::{ReducedGame, StrategyProfile};

/// Environment variable overriding the default seed of randomized checks.
pub const SEED_ENV: &str = "FRAUDGAME_SEED";
pub const DEFAULT_SEED: u64 = 20240917;

/// Largest fraud value drawn for fraud-regime games.
pub const MAX_FRAUD_VALUE: f64 = 20.0;

pub fn seed_from_env() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the open-closed interval `(0, 1]`.
fn unit_open_closed<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Streamshares uniform on the simplex with `n` artists.
pub fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        let d: Vec<f64> = e.iter().map(|x| x / s).collect();
        if d.iter().all(|&x| x < 1.0) {
            return d;
        }
    }
}

fn premium<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(0.1..2.0)
}

/// Game in the fraud regime: `n` in `2..=6`, `V` in `(1/(1-d_min), 20]`.
pub fn fraud_game<R: Rng>(rng: &mut R) -> ReducedGame {
    loop {
        let n = rng.random_range(2..=6);
        let d = simplex(rng, n);
        let lo = 1.0 / (1.0 - d.iter().copied().fold(1.0, f64::min));
        let v = lo + (MAX_FRAUD_VALUE - lo) * unit_open_closed(rng);
        if v > lo {
            if let Ok(g) = ReducedGame::new(d, premium(rng), v) {
                return g;
            }
        }
    }
}

/// Game in the fraud-free regime: `V` in `[-1, 1/(1-d_min)]`.
pub fn fraud_free_game<R: Rng>(rng: &mut R) -> ReducedGame {
    loop {
        let n = rng.random_range(2..=6);
        let d = simplex(rng, n);
        let hi = 1.0 / (1.0 - d.iter().copied().fold(1.0, f64::min));
        let v = -1.0 + (hi + 1.0) * unit_open_closed(rng);
        if let Ok(g) = ReducedGame::new(d, premium(rng), v) {
            return g;
        }
    }
}

/// Profile uniform on `[0, cap]^n`.
pub fn profile<R: Rng>(rng: &mut R, n: usize, cap: f64) -> StrategyProfile {
    let cap = cap.max(0.0);
    StrategyProfile::new((0..n).map(|_| rng.random::<f64>() * cap).collect()).expect("uniform draws are non-negative")
}
