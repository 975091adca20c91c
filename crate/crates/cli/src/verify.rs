//! Randomized oracle suites behind `nvregret verify`.

use nvregret::oracle::{
    bruteforce_worst_case, check_separability, check_worst_history, exact_regret_bernoulli, order_statistic_match,
    verify_not_order_statistic, DiscreteDistribution,
};
use nvregret::policies::{p_policy, tabulate};
use nvregret::regret::worst_case_regret;
use nvregret::{BernoulliProfile, Branch, DissimilarityProfile, PPoint, Policy, PolicySpec, RegretOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CliError, Suite};

fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> PolicySpec {
    match rng.gen_range(0..5) {
        0 => PolicySpec::erm(n),
        1 => PolicySpec::WeightedErm {
            weights: (0..n).map(|_| rng.gen_range(0.1..2.0)).collect(),
        },
        2 => PolicySpec::nearest_neighbors(rng.gen_range(1..=n), n),
        3 => {
            let k = rng.gen_range(1..=n);
            PolicySpec::prefix_order_statistic(k, rng.gen_range(0..=k + 1))
        }
        _ => {
            let k = rng.gen_range(1..=n);
            let raw: Vec<f64> = (0..k + 2).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let lambdas: Vec<f64> = raw.iter().map(|v| v / s).collect();
            PolicySpec::prefix_mixture(k, &lambdas)
        }
    }
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize, max: f64) -> DissimilarityProfile {
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..max)).collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    DissimilarityProfile::new(d).expect("valid profile")
}

pub fn run(suite: Suite, seed: u64, configs: Option<usize>) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures: Vec<String> = Vec::new();
    let checks;
    match suite {
        Suite::Reduction => {
            let opts = RegretOptions::default();
            let count = configs.unwrap_or(12);
            checks = count;
            for _ in 0..count {
                let n = rng.gen_range(1..=2);
                let spec = random_spec(&mut rng, n);
                let p = Policy::new(spec.clone(), n)?;
                let q = rng.gen_range(0.1..0.9);
                let d = random_profile(&mut rng, n, 0.15);
                let engine = worst_case_regret(&p, q, &d, &opts)?;
                let brute = bruteforce_worst_case(&p, q, &d, 4, 6)?;
                if brute.value > engine.value + engine.gap_bound + 1e-12 {
                    failures.push(format!(
                        "{} q={q}: brute force {} above engine {}",
                        spec.label(),
                        brute.value,
                        engine.value
                    ));
                }
                let profile = BernoulliProfile::extreme(engine.branch, engine.mu0_star, &d);
                let replay = exact_regret_bernoulli(&p, q, &profile)?;
                if (replay - engine.value).abs() > 1e-12 {
                    failures.push(format!(
                        "{} q={q}: enumeration {replay} vs engine {}",
                        spec.label(),
                        engine.value
                    ));
                }
            }
        }
        Suite::Separable => {
            let count = configs.unwrap_or(50);
            let trials = 10_000;
            let support = vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
            let z_grid = [0.0, 0.2, 0.5, 0.8, 0.99];
            checks = count * z_grid.len();
            for c in 0..count {
                let n = rng.gen_range(1..=10);
                let spec = random_spec(&mut rng, n);
                let p = Policy::new(spec.clone(), n)?;
                let q = rng.gen_range(0.05..0.95);
                let hs = (0..n)
                    .map(|_| {
                        let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                        let s: f64 = raw.iter().sum();
                        DiscreteDistribution::new(support.clone(), raw.iter().map(|v| v / s).collect())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                for pt in check_separability(&p, q, &hs, &z_grid, trials, seed.wrapping_add(c as u64))? {
                    if !pt.agrees(trials) {
                        failures.push(format!("{} q={q}: {pt:?}", spec.label()));
                    }
                }
            }
        }
        Suite::Counting => {
            let count = configs.unwrap_or(200);
            checks = count;
            for _ in 0..count {
                let n = rng.gen_range(1..=8);
                let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(1..5) as f64).collect();
                let q = rng.gen_range(1..20) as f64 / 20.0;
                let p = Policy::new(
                    PolicySpec::WeightedErm {
                        weights: weights.clone(),
                    },
                    n,
                )?;
                for mask in 0usize..1 << n {
                    let b: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
                    let y: Vec<f64> = b.iter().map(|&bi| if bi { 0.25 } else { 0.75 }).collect();
                    let by_action = if p.action(q, &y, 0.0)? <= 0.5 { 1.0 } else { 0.0 };
                    if p.counting(q, &b)? != by_action {
                        failures.push(format!("weights {weights:?} q={q} pattern {mask:#b}"));
                    }
                }
                let table = tabulate(&p, q)?;
                let tab = Policy::new(PolicySpec::TabulatedCounting { n, table }, n)?;
                let h = PPoint::new((0..n).map(|_| rng.gen::<f64>()).collect())?;
                let (a, b) = (p_policy(&p, &h, q)?, p_policy(&tab, &h, q)?);
                if (a - b).abs() > 1e-12 {
                    failures.push(format!("weights {weights:?} q={q}: tabulated {b} vs weighted {a}"));
                }
            }
        }
        Suite::WorstHistory => {
            let count = configs.unwrap_or(1000);
            checks = count;
            for _ in 0..count {
                let n = rng.gen_range(1..=3);
                let spec = random_spec(&mut rng, n);
                let p = Policy::new(spec.clone(), n)?;
                let q = rng.gen_range(0.05..0.95);
                let d = random_profile(&mut rng, n, 0.3);
                let branch = if rng.gen_bool(0.5) { Branch::Up } else { Branch::Down };
                let mu0 = match branch {
                    Branch::Up => rng.gen_range(0.0..1.0 - q),
                    Branch::Down => rng.gen_range(1.0 - q..1.0),
                };
                let check = check_worst_history(&p, q, &d, branch, mu0, 1e-3)?;
                if !check.holds(1e-12) {
                    failures.push(format!("{} q={q} {branch} mu0={mu0}: {check:?}", spec.label()));
                }
            }
        }
        Suite::Lemma1 => {
            checks = 3;
            if !verify_not_order_statistic() {
                failures.push("weights (2,1,1,1): counterexample not reproduced".into());
            }
            if order_statistic_match(&[1.0; 4], 0.5)?.matching.is_none() {
                failures.push("equal weights: no matching order statistic".into());
            }
            if order_statistic_match(&[3.0, 1.0, 1.0, 1.0], 0.5)?.matching.is_some() {
                failures.push("weights (3,1,1,1): unexpectedly an order statistic".into());
            }
        }
    }
    println!("{suite:?}: {checks} checks, {} failures", failures.len());
    for f in &failures {
        println!("  {f}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::verification(format!(
            "{} verification failures",
            failures.len()
        )))
    }
}
