//! Random walk simulation and asymptotic estimators: drift, entropy by two
//! routes (Green speed and exact convolutions), and ray tracking.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{FirstPassageTable, StepDistribution};
use crate::group::{Element, GroupModel};
use crate::rng::Rng;

/// A simulated walk x_0 = 1, x_{n+1} = x_n * X_{n+1}.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub positions: Vec<Element>,
    pub increments: Vec<Element>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn last(&self) -> &Element {
        self.positions.last().expect("positions nonempty")
    }

    /// Rebuild a trajectory from given increments (used for deterministic
    /// reference walks).
    pub fn from_increments(
        model: &GroupModel,
        seed: u64,
        increments: Vec<Element>,
    ) -> Result<Trajectory> {
        let mut positions = vec![model.identity()];
        for inc in &increments {
            let next = model.mul(positions.last().unwrap(), inc)?;
            positions.push(next);
        }
        Ok(Trajectory { seed, positions, increments })
    }
}

/// Simulate `steps` increments drawn from `mu`; reproducible given the seed.
pub fn simulate(
    model: &GroupModel,
    mu: &StepDistribution,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = Rng::new(seed);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut increments = Vec::with_capacity(steps);
    positions.push(model.identity());
    for _ in 0..steps {
        let inc = mu.sample(&mut rng).clone();
        let next = model.mul(positions.last().unwrap(), &inc)?;
        positions.push(next);
        increments.push(inc);
    }
    Ok(Trajectory { seed, positions, increments })
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub method: String,
}

fn mean_and_se(samples: &[f64], method: &str) -> EstimateWithError {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    EstimateWithError {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        samples: n,
        method: method.to_string(),
    }
}

/// Drift estimate: mean of |x_N| / N over independent replicas.
pub fn estimate_drift(
    model: &GroupModel,
    mu: &StepDistribution,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    if steps == 0 || replicas == 0 {
        return Err(Error::Precondition("estimate_drift needs steps, replicas >= 1".into()));
    }
    let mut samples = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let mut rng = Rng::stream(seed, r as u64);
        let mut pos = model.identity();
        for _ in 0..steps {
            pos = model.mul(&pos, mu.sample(&mut rng))?;
        }
        samples.push(pos.len() as f64 / steps as f64);
    }
    Ok(mean_and_se(&samples, "drift |x_N|/N"))
}

/// Joint drift / Green-speed-entropy estimates on shared trajectories,
/// together with the per-replica fundamental-inequality residual
/// h - l v (negative in the strict regime).
#[derive(Debug, Clone, Serialize)]
pub struct WalkEstimates {
    pub drift: EstimateWithError,
    pub entropy: EstimateWithError,
    /// h_hat - v * l_hat with its own (paired) standard error.
    pub gap: EstimateWithError,
}

pub fn estimate_walk_statistics(
    model: &GroupModel,
    mu: &StepDistribution,
    table: &FirstPassageTable,
    steps: usize,
    replicas: usize,
    seed: u64,
    volume_growth: f64,
) -> Result<WalkEstimates> {
    if steps == 0 || replicas == 0 {
        return Err(Error::Precondition("estimators need steps, replicas >= 1".into()));
    }
    let mut drift = Vec::with_capacity(replicas);
    let mut entropy = Vec::with_capacity(replicas);
    let mut gap = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let mut rng = Rng::stream(seed, r as u64);
        let mut pos = model.identity();
        for _ in 0..steps {
            pos = model.mul(&pos, mu.sample(&mut rng))?;
        }
        let l = pos.len() as f64 / steps as f64;
        let h = -table.log_f(model, &pos)? / steps as f64;
        drift.push(l);
        entropy.push(h);
        gap.push(h - volume_growth * l);
    }
    Ok(WalkEstimates {
        drift: mean_and_se(&drift, "drift |x_N|/N"),
        entropy: mean_and_se(&entropy, "Green speed -log F(1,x_N)/N"),
        gap: mean_and_se(&gap, "paired h - l v"),
    })
}

/// Green-speed entropy estimate: mean of -log F(1, x_N) / N.
pub fn estimate_entropy_green_speed(
    model: &GroupModel,
    mu: &StepDistribution,
    table: &FirstPassageTable,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    if steps == 0 {
        return Ok(EstimateWithError {
            value: 0.0,
            std_error: 0.0,
            samples: 0,
            method: "Green speed -log F(1,x_N)/N".into(),
        });
    }
    let est = estimate_walk_statistics(model, mu, table, steps, replicas, seed, 0.0)?;
    Ok(est.entropy)
}

/// Exact Shannon entropies H_n of the convolution powers mu^{*n}.
#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionEntropy {
    /// H_1 .. H_{n_max}, in nats.
    pub h: Vec<f64>,
    /// H_n / n.
    pub per_step: Vec<f64>,
}

pub fn estimate_entropy_convolution(
    model: &GroupModel,
    mu: &StepDistribution,
    n_max: usize,
    budget: usize,
) -> Result<ConvolutionEntropy> {
    // Ordered maps keep the floating-point accumulation order (and hence
    // the output bytes) identical across runs.
    use std::collections::BTreeMap;
    let mut dist: BTreeMap<Element, f64> = BTreeMap::new();
    dist.insert(model.identity(), 1.0);
    let mut h = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let mut next: BTreeMap<Element, f64> = BTreeMap::new();
        for (x, p) in &dist {
            for (s, q) in mu.support() {
                let y = model.mul(x, s)?;
                *next.entry(y).or_insert(0.0) += p * q;
            }
        }
        if next.len() > budget {
            return Err(Error::BudgetExceeded(format!(
                "convolution support exceeded {budget} atoms"
            )));
        }
        dist = next;
        let entropy: f64 = dist.values().map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum();
        h.push(entropy);
    }
    let per_step = h.iter().enumerate().map(|(i, &v)| v / (i + 1) as f64).collect();
    Ok(ConvolutionEntropy { h, per_step })
}

/// Ray-tracking diagnostics: the canonical geodesic to the endpoint as a
/// ray proxy and the normalized tracking defect
/// max_n d(x_n, gamma(floor(l_hat n))) / N.
#[derive(Debug, Clone)]
pub struct RayTracking {
    pub ray: Vec<Element>,
    pub drift_used: f64,
    pub defect: f64,
}

pub fn ray_tracking(model: &GroupModel, traj: &Trajectory) -> Result<RayTracking> {
    let last = traj.last();
    if last.is_identity() {
        return Err(Error::Precondition(
            "trajectory ends at the identity; no ray direction".into(),
        ));
    }
    let n_steps = traj.steps();
    let ray = model.geodesic_prefixes(last)?;
    let l_hat = last.len() as f64 / n_steps as f64;
    let mut worst = 0.0f64;
    for (n, x) in traj.positions.iter().enumerate() {
        let idx = ((l_hat * n as f64).floor() as usize).min(ray.len() - 1);
        let d = model.distance(x, &ray[idx])? as f64;
        worst = worst.max(d);
    }
    Ok(RayTracking { ray, drift_used: l_hat, defect: worst / n_steps as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::solve_tree_first_passage;
    use crate::group::GroupModel;

    const LN3: f64 = 1.0986122886681098;

    #[test]
    fn simulate_zero_steps_and_determinism() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let t = simulate(&m, &mu, 0, 5).unwrap();
        assert_eq!(t.positions.len(), 1);
        assert!(t.positions[0].is_identity());

        let a = simulate(&m, &mu, 500, 99).unwrap();
        let b = simulate(&m, &mu, 500, 99).unwrap();
        assert_eq!(a.positions.last(), b.positions.last());
        for (x, y) in a.increments.iter().zip(b.increments.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn trajectory_increments_consistent() {
        let m = GroupModel::free_product(&[('s', 2), ('t', 3)]).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let t = simulate(&m, &mu, 200, 3).unwrap();
        for i in 0..t.steps() {
            let next = m.mul(&t.positions[i], &t.increments[i]).unwrap();
            assert_eq!(next, t.positions[i + 1]);
        }
    }

    #[test]
    fn drift_uniform_f2_is_half() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let d = estimate_drift(&m, &mu, 2000, 48, 12345).unwrap();
        // Birth-death drift 1/2 (up 3/4, down 1/4); allow O(1/steps) bias.
        assert!(
            (d.value - 0.5).abs() < 3.0 * d.std_error + 0.002,
            "drift {} +- {}",
            d.value,
            d.std_error
        );
    }

    #[test]
    fn drift_uniform_f3_is_two_thirds() {
        let m = GroupModel::free(3).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let d = estimate_drift(&m, &mu, 2000, 48, 4242).unwrap();
        assert!((d.value - 2.0 / 3.0).abs() < 3.0 * d.std_error + 0.002);
    }

    #[test]
    fn non_admissible_rejected_before_estimation() {
        let m = GroupModel::free(2).unwrap();
        assert!(StepDistribution::from_pairs(&m, &[("a", 0.5), ("A", 0.5)]).is_err());
    }

    #[test]
    fn green_speed_entropy_uniform_f2() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let table = solve_tree_first_passage(&m, &mu).unwrap();
        let h = estimate_entropy_green_speed(&m, &mu, &table, 2000, 48, 7).unwrap();
        // h = (1/2) log 3.
        assert!(
            (h.value - 0.5 * LN3).abs() < 3.0 * h.std_error + 0.003,
            "h {} +- {}",
            h.value,
            h.std_error
        );
        let zero = estimate_entropy_green_speed(&m, &mu, &table, 0, 8, 7).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn biased_entropy_strictly_inside_bounds() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::from_pairs(
            &m,
            &[("a", 0.4), ("A", 0.1), ("b", 0.3), ("B", 0.2)],
        )
        .unwrap();
        let table = solve_tree_first_passage(&m, &mu).unwrap();
        let est = estimate_walk_statistics(&m, &mu, &table, 2000, 48, 31, LN3).unwrap();
        assert!(est.entropy.value > 0.0);
        assert!(est.entropy.value < est.drift.value * LN3);
        // Strict gap: h < l v by many standard errors.
        assert!(est.gap.value < -4.0 * est.gap.std_error);
    }

    #[test]
    fn fundamental_inequality_at_estimate_level() {
        for (m, mu) in [
            {
                let m = GroupModel::free(2).unwrap();
                let mu = StepDistribution::uniform_neighbors(&m).unwrap();
                (m, mu)
            },
            {
                let m = GroupModel::free_product(&[('s', 2), ('t', 3)]).unwrap();
                let mu = StepDistribution::uniform_neighbors(&m).unwrap();
                (m, mu)
            },
        ] {
            let table = solve_tree_first_passage(&m, &mu).unwrap();
            let aut = crate::automaton::Automaton::for_model(&m).unwrap();
            let v = crate::automaton::growth_rate(&aut).unwrap();
            let est = estimate_walk_statistics(&m, &mu, &table, 1500, 32, 19, v).unwrap();
            assert!(est.gap.value <= 4.0 * est.gap.std_error + 1e-9);
        }
    }

    #[test]
    fn equality_case_paired_gap_vanishes() {
        // On uniform F2 the entropy sample is log 3 times the drift sample,
        // so the paired gap is identically zero.
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let table = solve_tree_first_passage(&m, &mu).unwrap();
        let est = estimate_walk_statistics(&m, &mu, &table, 800, 16, 5, LN3).unwrap();
        assert!(est.gap.value.abs() < 1e-12);
        assert!(est.gap.std_error < 1e-12);
    }

    #[test]
    fn drift_consistency_under_doubling() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::from_pairs(
            &m,
            &[("a", 0.4), ("A", 0.1), ("b", 0.3), ("B", 0.2)],
        )
        .unwrap();
        let d1 = estimate_drift(&m, &mu, 1000, 32, 77).unwrap();
        let d2 = estimate_drift(&m, &mu, 2000, 32, 78).unwrap();
        let se = (d1.std_error.powi(2) + d2.std_error.powi(2)).sqrt();
        assert!((d1.value - d2.value).abs() < 3.0 * se + 0.003);
    }

    #[test]
    fn convolution_entropy_exact_small_n() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::uniform_neighbors(&m).unwrap();
        let ce = estimate_entropy_convolution(&m, &mu, 4, 1_000_000).unwrap();
        // H_1 = log 4 (uniform on four atoms).
        assert!((ce.h[0] - 4.0f64.ln()).abs() < 1e-12);
        // Exact convolution oracle: mu*2 has mass 1/4 at 1 and 1/16 on each
        // of the 12 reduced two-letter words, so H_2 = (7/2) log 2.
        assert!((ce.h[1] - 3.5 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn convolution_subadditive() {
        let m = GroupModel::free(2).unwrap();
        let mu = StepDistribution::from_pairs(
            &m,
            &[("a", 0.4), ("A", 0.1), ("b", 0.3), ("B", 0.2)],
        )
        .unwrap();
        let ce = estimate_entropy_convolution(&m, &mu, 8, 2_000_000).unwrap();
        for mm in 1..=4usize {
            for nn in 1..=4usize {
                assert!(ce.h[mm + nn - 1] <= ce.h[mm - 1] + ce.h[nn - 1] + 1e-12);
            }
        }
        // H_n / n decreases toward h, so it stays above the Green-speed
        // estimate (up to noise).
        let table = solve_tree_first_passage(&m, &mu).unwrap();
        let h = estimate_entropy_green_speed(&m, &mu, &table, 2000, 32, 3).unwrap();
        assert!(ce.per_step[7] >= h.value - 3.0 * h.std_error);
        for i in 1..ce.per_step.len() {
            assert!(ce.per_step[i] <= ce.per_step[i - 1] + 1e-12);
        }
    }

    #[test]
    fn ray_tracking_deterministic_walk() {
        let m = GroupModel::free(2).unwrap();
        let a = m.parse_word("a").unwrap();
        let traj =
            Trajectory::from_increments(&m, 0, vec![a.clone(); 50]).unwrap();
        let rt = ray_tracking(&m, &traj).unwrap();
        assert_eq!(rt.ray.len(), 51);
        assert_eq!(rt.defect, 0.0);
    }

    #[test]
    fn ray_tracking_random_walks_have_small_defect() {
        let m = GroupModel::free(2).unwrap();
        for mu in [
            StepDistribution::uniform_neighbors(&m).unwrap(),
            StepDistribution::from_pairs(&m, &[("a", 0.4), ("A", 0.1), ("b", 0.3), ("B", 0.2)])
                .unwrap(),
        ] {
            let traj = simulate(&m, &mu, 10_000, 2024).unwrap();
            let rt = ray_tracking(&m, &traj).unwrap();
            assert!(rt.defect < 0.05, "defect {}", rt.defect);
        }
    }

    #[test]
    fn ray_tracking_identity_endpoint_fails() {
        let m = GroupModel::free(2).unwrap();
        let traj = Trajectory::from_increments(&m, 0, vec![]).unwrap();
        assert!(ray_tracking(&m, &traj).is_err());
    }
}
