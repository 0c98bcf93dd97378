//! Elo ratings over pairwise battle outcomes: online updates in a
//! seed-shuffled order, averaged over several independent permutations so
//! no single processing order dominates.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::judge::{BattleOutcome, BattleResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    #[serde(default = "default_initial")]
    pub initial: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    /// Number of independent shuffle-and-replay passes to average.
    #[serde(default = "default_permutations")]
    pub permutations: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_initial() -> f64 {
    1000.0
}

fn default_k() -> f64 {
    16.0
}

fn default_permutations() -> u32 {
    10
}

impl Default for EloParams {
    fn default() -> Self {
        Self {
            initial: default_initial(),
            k: default_k(),
            permutations: default_permutations(),
            seed: 0,
        }
    }
}

/// Per-pipeline win/loss/tie record; both-unacceptable outcomes are
/// tallied separately from ties.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BattleRecord {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub both_unacceptable: u64,
}

impl BattleRecord {
    /// Win fraction with ties (and both-unacceptable outcomes) omitted;
    /// `None` when there were no decisive games.
    pub fn win_percentage(&self) -> Option<f64> {
        let decisive = self.wins + self.losses;
        (decisive > 0).then(|| self.wins as f64 / decisive as f64)
    }
}

/// Final ratings plus per-pipeline records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloTable {
    pub ratings: BTreeMap<String, f64>,
    pub records: BTreeMap<String, BattleRecord>,
}

/// Expected score of the side rated `ra` against `rb`.
fn expected(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

/// Replay the battles once, in the given order, from fresh ratings.
fn replay(
    pipelines: &BTreeMap<String, ()>,
    battles: &[&BattleOutcome],
    params: &EloParams,
) -> BTreeMap<String, f64> {
    let mut ratings: BTreeMap<String, f64> =
        pipelines.keys().map(|p| (p.clone(), params.initial)).collect();
    for battle in battles {
        let ra = ratings[&battle.side_a];
        let rb = ratings[&battle.side_b];
        let score_a = match battle.result {
            BattleResult::WinA => 1.0,
            BattleResult::WinB => 0.0,
            BattleResult::Tie | BattleResult::BothUnacceptable => 0.5,
        };
        // One shared delta keeps every update exactly zero-sum.
        let delta = params.k * (score_a - expected(ra, rb));
        *ratings.get_mut(&battle.side_a).expect("known side") = ra + delta;
        *ratings.get_mut(&battle.side_b).expect("known side") = rb - delta;
    }
    ratings
}

/// Compute ratings for the named pipelines (plus any sides appearing in
/// the battles). Battles are replayed in `params.permutations` different
/// seed-derived orders and the final ratings averaged.
pub fn elo(pipelines: &[String], battles: &[BattleOutcome], params: &EloParams) -> EloTable {
    let mut names: BTreeMap<String, ()> = pipelines.iter().map(|p| (p.clone(), ())).collect();
    for b in battles {
        names.entry(b.side_a.clone()).or_insert(());
        names.entry(b.side_b.clone()).or_insert(());
    }

    let mut records: BTreeMap<String, BattleRecord> = names
        .keys()
        .map(|p| (p.clone(), BattleRecord::default()))
        .collect();
    for b in battles {
        let (a, bside) = (b.side_a.clone(), b.side_b.clone());
        match b.result {
            BattleResult::WinA => {
                records.get_mut(&a).expect("known").wins += 1;
                records.get_mut(&bside).expect("known").losses += 1;
            }
            BattleResult::WinB => {
                records.get_mut(&a).expect("known").losses += 1;
                records.get_mut(&bside).expect("known").wins += 1;
            }
            BattleResult::Tie => {
                records.get_mut(&a).expect("known").ties += 1;
                records.get_mut(&bside).expect("known").ties += 1;
            }
            BattleResult::BothUnacceptable => {
                records.get_mut(&a).expect("known").both_unacceptable += 1;
                records.get_mut(&bside).expect("known").both_unacceptable += 1;
            }
        }
    }

    let runs = params.permutations.max(1);
    let mut sums: BTreeMap<String, f64> = names.keys().map(|p| (p.clone(), 0.0)).collect();
    for run in 0..runs {
        let mut order: Vec<&BattleOutcome> = battles.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(run as u64));
        order.shuffle(&mut rng);
        for (name, rating) in replay(&names, &order, params) {
            *sums.get_mut(&name).expect("known") += rating;
        }
    }
    let ratings = sums
        .into_iter()
        .map(|(name, sum)| (name, sum / runs as f64))
        .collect();
    EloTable { ratings, records }
}
