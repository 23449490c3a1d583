//! Seeded Monte Carlo market: users draw demands, pick the quality with the
//! largest saving, and we tally who ended up where.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::profile::{DemandPriceProfile, ProfileScenario};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandStats {
    /// One-based quality index.
    pub k: usize,
    pub band: (f64, f64),
    pub samples: usize,
    /// Share of sampled users whose best choice is quality `k`.
    pub intended_fraction: f64,
    pub min_saving: f64,
    pub mean_saving: f64,
    /// `p_k - C(s_k)`.
    pub provider_profit: f64,
    pub profit_target: f64,
    pub profit_target_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutOfBandStats {
    pub drawn: usize,
    pub out_of_band: usize,
    /// Share of out-of-band users who can pay for their assigned quality.
    pub affordable_fraction: f64,
    /// Share of out-of-band users whose best choice is the assigned quality.
    pub assigned_choice_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketSimReport {
    pub samples_per_band: usize,
    pub rng_seed: u64,
    pub bands: Vec<BandStats>,
    pub out_of_band: OutOfBandStats,
}

impl MarketSimReport {
    /// Every band fully self-selects and clears its profit target.
    pub fn all_bands_clean(&self) -> bool {
        self.bands
            .iter()
            .all(|b| b.intended_fraction == 1.0 && b.profit_target_met)
    }
}

/// Index of the largest saving `F(θ, s_l) - p_l`; ties go to the lower index.
pub fn best_choice(
    scenario: &ProfileScenario,
    profile: &DemandPriceProfile,
    theta: f64,
) -> Result<(usize, Vec<f64>)> {
    let savings = scenario
        .qualities()
        .iter()
        .zip(&profile.entries)
        .map(|(&s, e)| Ok(scenario.tariff().eval(theta, s)? - e.price))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (l, &v) in savings.iter().enumerate().skip(1) {
        if v > savings[best] {
            best = l;
        }
    }
    Ok((best, savings))
}

/// Quality assigned to a demand outside every band: `θ ∈ [θ_k, θ_{k+1})`
/// maps to `k`, below `θ_1` to the first and from `θ_L` on to the last.
pub fn assigned_quality(thetas: &[f64], theta: f64) -> usize {
    thetas.partition_point(|&t| t <= theta).saturating_sub(1)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Samples `samples_per_band` demands uniformly inside every band (stream
/// `k` of the seeded generator for band `k`) and `L·samples_per_band`
/// demands over the whole range (stream `L`) for the out-of-band tally.
pub fn simulate_market(
    profile: &DemandPriceProfile,
    scenario: &ProfileScenario,
    samples_per_band: usize,
    rng_seed: u64,
) -> Result<MarketSimReport> {
    let samples = samples_per_band.max(1);
    let n = scenario.len();
    let m = scenario.margins().m();
    let thetas = profile.thetas();

    let mut bands = Vec::with_capacity(n);
    for k in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(k as u64);
        let band = (thetas[k] - m[k], thetas[k] + m[k]);
        let mut hits = 0usize;
        let mut min_saving = f64::INFINITY;
        let mut total = 0.0;
        for _ in 0..samples {
            let t = uniform(&mut rng, band.0, band.1);
            let (best, savings) = best_choice(scenario, profile, t)?;
            if best == k {
                hits += 1;
            }
            min_saving = min_saving.min(savings[k]);
            total += savings[k];
        }
        let provider_profit =
            profile.entries[k].price - scenario.cost().eval(scenario.qualities()[k])?;
        let profit_target = scenario.margins().b()[k];
        bands.push(BandStats {
            k: k + 1,
            band,
            samples,
            intended_fraction: hits as f64 / samples as f64,
            min_saving,
            mean_saving: total / samples as f64,
            provider_profit,
            profit_target,
            profit_target_met: provider_profit >= profit_target - crate::verify::TOLERANCE,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(n as u64);
    let bounds = scenario.bounds();
    let drawn = samples * n;
    let (mut outside, mut affordable, mut chose_assigned) = (0usize, 0usize, 0usize);
    for _ in 0..drawn {
        let t = uniform(&mut rng, bounds.theta_low, bounds.theta_up);
        if (0..n).any(|k| (t - thetas[k]).abs() <= m[k]) {
            continue;
        }
        outside += 1;
        let k = assigned_quality(&thetas, t);
        let (best, savings) = best_choice(scenario, profile, t)?;
        if savings[k] >= 0.0 {
            affordable += 1;
        }
        if best == k {
            chose_assigned += 1;
        }
    }
    let share = |c: usize| {
        if outside == 0 {
            1.0
        } else {
            c as f64 / outside as f64
        }
    };

    Ok(MarketSimReport {
        samples_per_band: samples,
        rng_seed,
        bands,
        out_of_band: OutOfBandStats {
            drawn,
            out_of_band: outside,
            affordable_fraction: share(affordable),
            assigned_choice_fraction: share(chose_assigned),
        },
    })
}
