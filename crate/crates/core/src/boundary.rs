//! Boundary measures on cones and their diagnostics.
//!
//! On models whose normal-form syllables are single letters (free groups,
//! free products of factors of order at most 3), cones over group elements
//! partition the boundary and the harmonic measure of a cone has the exact
//! form nu(cone x) = F(1,x) * sum of ell over the letters that may follow
//! x, where ell solves the per-letter hitting system
//! ell(u) = F(1,u) * sum_{w in Follow(u)} ell(w), sum ell = 1.
//! The theta-family is realized at finite scale by Green-weighted sphere
//! sums; all Gibbs-style comparisons report log-spreads, never limits.

use std::collections::HashMap;

use serde::Serialize;

use crate::automaton::Automaton;
use crate::error::{Error, Result};
use crate::green::{FirstPassageTable, StepDistribution};
use crate::group::{Element, GroupModel, Letter};
use crate::rng::Rng;
use crate::thermo::{edge_log_weights, GreenBackend};

// ---------------------------------------------------------------------------
// Exact harmonic cone measure
// ---------------------------------------------------------------------------

/// Exact harmonic measure on the cone algebra of a single-letter-syllable
/// model.
#[derive(Debug, Clone)]
pub struct ExactHarmonic {
    table: FirstPassageTable,
    /// ell(u) = nu(cone(u)) per letter.
    ell: Vec<f64>,
    follow: Vec<Vec<Letter>>,
    /// |lambda - 1| of the hitting system's leading eigenvalue.
    eigen_residual: f64,
}

/// Solve the per-letter hitting system for the exact harmonic measure.
pub fn exact_harmonic(model: &GroupModel, table: &FirstPassageTable) -> Result<ExactHarmonic> {
    if !model.single_letter_syllables() {
        return Err(Error::Precondition(
            "exact cone measure needs single-letter syllables (free groups, orders <= 3)".into(),
        ));
    }
    let nl = model.letter_count();
    let follow: Vec<Vec<Letter>> = (0..nl as Letter)
        .map(|l| {
            (0..nl as Letter)
                .filter(|&w| model.can_follow(l, 1, w))
                .collect()
        })
        .collect();
    // Power iteration on (D_F A + I); the Perron eigenvalue of D_F A is 1.
    let mut ell = vec![1.0 / nl as f64; nl];
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let mut next = vec![0.0f64; nl];
        for l in 0..nl {
            let mut s = 0.0;
            for &w in &follow[l] {
                s += ell[w as usize];
            }
            next[l] = table.f_letter(l as Letter) * s + ell[l];
        }
        let norm: f64 = next.iter().sum();
        for v in next.iter_mut() {
            *v /= norm;
        }
        let delta = next
            .iter()
            .zip(ell.iter())
            .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()));
        ell = next;
        lambda = norm - 1.0;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(ExactHarmonic {
        table: table.clone(),
        ell,
        follow,
        eigen_residual: (lambda - 1.0).abs(),
    })
}

impl ExactHarmonic {
    /// nu(cone(x)); the identity cone is the whole boundary.
    pub fn mass(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        match x.last_letter() {
            None => Ok(1.0),
            Some(last) => {
                let mut s = 0.0;
                for &w in &self.follow[last as usize] {
                    s += self.ell[w as usize];
                }
                Ok(self.table.f_of(model, x)? * s)
            }
        }
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    pub fn eigen_residual(&self) -> f64 {
        self.eigen_residual
    }
}

// ---------------------------------------------------------------------------
// Green-weighted sphere measures (the theta family at finite scale)
// ---------------------------------------------------------------------------

/// Finite-scale surrogate of the theta-measures: restrict to the sphere
/// S_n, weight points by G(1,.)^theta, and normalize.
#[derive(Debug)]
pub struct SphereWeighted {
    aut: Automaton,
    /// Log weights parallel to `aut.edges`.
    log_w: Vec<Vec<f64>>,
    table: FirstPassageTable,
    pub theta: f64,
    pub depth: usize,
}

impl SphereWeighted {
    pub fn new(
        model: &GroupModel,
        aut: &Automaton,
        table: &FirstPassageTable,
        theta: f64,
        depth: usize,
    ) -> Result<SphereWeighted> {
        let log_w = edge_log_weights(model, aut, &GreenBackend::Table(table))?;
        Ok(SphereWeighted {
            aut: aut.clone(),
            log_w,
            table: table.clone(),
            theta,
            depth,
        })
    }

    /// Sum over paths of the given length from `state` of the product of
    /// theta-powered weights.
    fn path_sum(&self, state: usize, length: usize) -> f64 {
        let mut v = vec![0.0f64; self.aut.states];
        v[state] = 1.0;
        for _ in 0..length {
            let mut next = vec![0.0f64; self.aut.states];
            for s in 0..self.aut.states {
                if v[s] == 0.0 {
                    continue;
                }
                for (&(_, t), &lw) in self.aut.edges[s].iter().zip(self.log_w[s].iter()) {
                    next[t as usize] += v[s] * (self.theta * lw).exp();
                }
            }
            v = next;
        }
        v.iter().sum()
    }

    /// Mass of the cone over x within the depth-n weighted sphere.
    pub fn mass(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        if x.len() > self.depth {
            return Err(Error::Precondition(format!(
                "apex deeper than the weighting sphere ({} > {})",
                x.len(),
                self.depth
            )));
        }
        if x.is_identity() {
            return Ok(1.0);
        }
        let state = self.aut.run(x.letters()).ok_or_else(|| {
            Error::Precondition("apex is not accepted by the automaton".into())
        })?;
        let num = (self.theta * self.table.log_f(model, x)?).exp()
            * self.path_sum(state, self.depth - x.len());
        let den = self.path_sum(self.aut.initial, self.depth);
        Ok(num / den)
    }
}

/// Finite-scale mass of the theta-family on the shadow S(x, R): restrict
/// to the sphere S_n, weight by G(1,.)^theta, normalize, and sum over the
/// shadow. R = 0 uses the exact cone arithmetic on the automaton; R > 0
/// enumerates the sphere and applies the Gromov-product test.
#[allow(clippy::too_many_arguments)]
pub fn mutheta_shadow_mass(
    model: &GroupModel,
    aut: &Automaton,
    table: &FirstPassageTable,
    theta: f64,
    x: &Element,
    n: usize,
    radius: u32,
    budget: usize,
) -> Result<f64> {
    if x.len() > n {
        return Err(Error::Precondition(format!(
            "apex length {} exceeds the sphere depth {n}",
            x.len()
        )));
    }
    if radius == 0 {
        let w = SphereWeighted::new(model, aut, table, theta, n)?;
        return w.mass(model, x);
    }
    let spec = crate::group::ShadowSpec::new(model, x.clone(), radius)?;
    let spheres = crate::group::spheres(model, n, budget)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for y in &spheres[n] {
        let w = (theta * table.log_green(model, y)?).exp();
        den += w;
        if spec.contains(model, y)? {
            num += w;
        }
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Monte Carlo cone measure
// ---------------------------------------------------------------------------

/// Empirical cone masses at a fixed depth from simulated walks; a walk is
/// attributed to the cone of its normal-form prefix once it reaches
/// distance depth + buffer (the attribution bias is one-sided: the prefix
/// may still change with probability decaying in the buffer).
#[derive(Debug, Clone)]
pub struct EmpiricalCones {
    pub depth: usize,
    pub walks: usize,
    pub excluded: usize,
    masses: std::collections::BTreeMap<Vec<Letter>, f64>,
}

impl EmpiricalCones {
    pub fn mass(&self, x: &Element) -> f64 {
        if x.is_identity() {
            return 1.0;
        }
        if x.len() == self.depth {
            return self.masses.get(x.letters()).copied().unwrap_or(0.0);
        }
        // Aggregate deeper cells over the prefix.
        self.masses
            .iter()
            .filter(|(w, _)| w.len() >= x.len() && &w[..x.len()] == x.letters())
            .map(|(_, &p)| p)
            .sum()
    }
}

pub fn mc_cone_measure(
    model: &GroupModel,
    mu: &StepDistribution,
    depth: usize,
    walks: usize,
    buffer: usize,
    step_cap: usize,
    seed: u64,
) -> Result<EmpiricalCones> {
    let mut masses: std::collections::BTreeMap<Vec<Letter>, f64> = std::collections::BTreeMap::new();
    let mut excluded = 0usize;
    let target = depth + buffer;
    for w in 0..walks {
        let mut rng = Rng::stream(seed, w as u64);
        let mut pos = model.identity();
        let mut ok = false;
        for _ in 0..step_cap {
            pos = model.mul(&pos, mu.sample(&mut rng))?;
            if pos.len() >= target {
                ok = true;
                break;
            }
        }
        if !ok {
            excluded += 1;
            continue;
        }
        masses
            .entry(pos.letters()[..depth].to_vec())
            .and_modify(|p| *p += 1.0)
            .or_insert(1.0);
    }
    let kept = walks - excluded;
    if kept == 0 {
        return Err(Error::BudgetExceeded("no walk reached the attribution radius".into()));
    }
    for p in masses.values_mut() {
        *p /= kept as f64;
    }
    Ok(EmpiricalCones { depth, walks, excluded, masses })
}

// ---------------------------------------------------------------------------
// A unified measure view for the diagnostics below
// ---------------------------------------------------------------------------

/// A boundary measure evaluated on cones, with a method tag.
pub enum ShadowMeasure<'a> {
    Exact(&'a ExactHarmonic),
    Weighted(&'a SphereWeighted),
    Empirical(&'a EmpiricalCones),
    /// All mass at the boundary point reached by repeating the given word
    /// (a degenerate negative control). The word's repetition must be a
    /// normal form, e.g. `ab` on a free group.
    PointMass(&'a Element),
}

impl ShadowMeasure<'_> {
    pub fn method(&self) -> &'static str {
        match self {
            ShadowMeasure::Exact(_) => "exact-tree",
            ShadowMeasure::Weighted(_) => "sphere-weighted",
            ShadowMeasure::Empirical(_) => "monte-carlo",
            ShadowMeasure::PointMass(_) => "point-mass",
        }
    }

    pub fn mass(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        match self {
            ShadowMeasure::Exact(e) => e.mass(model, x),
            ShadowMeasure::Weighted(w) => w.mass(model, x),
            ShadowMeasure::Empirical(e) => Ok(e.mass(x)),
            ShadowMeasure::PointMass(p) => {
                if p.is_identity() {
                    return Err(Error::Precondition("point mass needs a nonempty word".into()));
                }
                let period = p.letters();
                let along = x
                    .letters()
                    .iter()
                    .enumerate()
                    .all(|(i, &l)| l == period[i % period.len()]);
                Ok(if along { 1.0 } else { 0.0 })
            }
        }
    }
}

/// Harmonic mass of the shadow (cone) over x, with an error bound:
/// exact methods report 0, Monte Carlo reports a binomial half-width.
pub fn harmonic_shadow_mass(
    model: &GroupModel,
    measure: &ShadowMeasure,
    x: &Element,
) -> Result<(f64, f64)> {
    let m = measure.mass(model, x)?;
    let err = match measure {
        ShadowMeasure::Empirical(e) => {
            let kept = (e.walks - e.excluded) as f64;
            1.96 * (m * (1.0 - m) / kept).sqrt()
        }
        _ => 0.0,
    };
    Ok((m, err))
}

// ---------------------------------------------------------------------------
// Gibbs ratio diagnostics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GibbsReport {
    pub theta: f64,
    pub beta: f64,
    pub radius: u32,
    pub apex_count: usize,
    pub min_log_ratio: f64,
    pub max_log_ratio: f64,
    /// max - min of log [ measure(S(g,R)) / (G(1,g)^theta e^{-beta |g|}) ].
    pub spread: f64,
    pub mean_log_ratio: f64,
}

/// Compare cone masses against the Gibbs weight G(1,g)^theta e^{-beta |g|}
/// over the given apexes and report the log-ratio spread.
pub fn gibbs_ratio_report(
    model: &GroupModel,
    table: &FirstPassageTable,
    measure: &ShadowMeasure,
    theta: f64,
    beta: f64,
    radius: u32,
    apexes: &[Element],
) -> Result<GibbsReport> {
    if apexes.is_empty() {
        return Err(Error::Precondition("gibbs report needs at least one apex".into()));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for g in apexes {
        let m = measure.mass(model, g)?;
        if !(m > 0.0) {
            return Err(Error::Precondition(format!(
                "measure vanishes on the cone of {:?}",
                model.render(g)
            )));
        }
        let weight = theta * table.log_green(model, g)? - beta * g.len() as f64;
        let r = m.ln() - weight;
        min = min.min(r);
        max = max.max(r);
        sum += r;
    }
    Ok(GibbsReport {
        theta,
        beta,
        radius,
        apex_count: apexes.len(),
        min_log_ratio: min,
        max_log_ratio: max,
        spread: max - min,
        mean_log_ratio: sum / apexes.len() as f64,
    })
}

/// Deterministically sample `count` apexes with lengths in [1, max_depth],
/// uniformly over the ball shells (path counting on the automaton).
pub fn sample_apexes(
    model: &GroupModel,
    aut: &Automaton,
    max_depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Element>> {
    // counts[k][s]: number of length-k paths from state s.
    let mut counts = vec![vec![1u128; aut.states]];
    for k in 1..=max_depth {
        let prev = &counts[k - 1];
        let mut row = vec![0u128; aut.states];
        for s in 0..aut.states {
            for &(_, t) in &aut.edges[s] {
                row[s] += prev[t as usize];
            }
        }
        counts.push(row);
        let _ = k;
    }
    let mut shell_sizes = Vec::with_capacity(max_depth);
    for k in 1..=max_depth {
        shell_sizes.push(counts[k][aut.initial]);
    }
    let total: u128 = shell_sizes.iter().sum();
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = (rng.next_f64() * total as f64) as u128;
        let mut depth = max_depth;
        for (k, &sz) in shell_sizes.iter().enumerate() {
            if pick < sz {
                depth = k + 1;
                break;
            }
            pick -= sz;
        }
        // Walk down, choosing edges proportionally to path counts.
        let mut state = aut.initial;
        let mut word: Vec<Letter> = Vec::with_capacity(depth);
        for remaining in (0..depth).rev() {
            let opts: Vec<(Letter, u32, u128)> = aut.edges[state]
                .iter()
                .map(|&(l, t)| (l, t, counts[remaining][t as usize]))
                .collect();
            let total_opts: u128 = opts.iter().map(|&(_, _, c)| c).sum();
            let mut pick = (rng.next_f64() * total_opts as f64) as u128;
            let mut chosen = opts.len() - 1;
            for (i, &(_, _, c)) in opts.iter().enumerate() {
                if pick < c {
                    chosen = i;
                    break;
                }
                pick -= c;
            }
            word.push(opts[chosen].0);
            state = opts[chosen].1 as usize;
        }
        out.push(model.reduce(&word));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stationarity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub depth: usize,
    pub max_residual: f64,
    pub worst_cone: String,
}

/// Residual of nu = sum_g mu(g) g^{-1}_* nu on cones at the given depth.
/// Translated cones are re-expressed exactly through cones at depth
/// depth + reach (single-letter-syllable models).
pub fn stationarity_residual(
    model: &GroupModel,
    mu: &StepDistribution,
    measure: &ShadowMeasure,
    depth: usize,
) -> Result<StationarityReport> {
    if !model.single_letter_syllables() {
        return Err(Error::ConeAlgebraTooShallow(
            "exact cone re-expression needs single-letter syllables".into(),
        ));
    }
    if depth == 0 {
        return Err(Error::Precondition("stationarity depth must be >= 1".into()));
    }
    let deep = depth + mu.reach();
    let spheres = crate::group::spheres(model, deep, 20_000_000)?;
    // nu(g^{-1} cone(x)) = sum over deep cones y with reduce(g y) extending x.
    let mut translated: HashMap<(usize, Vec<Letter>), f64> = HashMap::new();
    for (gi, (g, _)) in mu.support().iter().enumerate() {
        for y in &spheres[deep] {
            let z = model.mul(g, y)?;
            debug_assert!(z.len() >= depth);
            let prefix = z.letters()[..depth].to_vec();
            let m = measure.mass(model, y)?;
            *translated.entry((gi, prefix)).or_insert(0.0) += m;
        }
    }
    let mut max_residual = 0.0f64;
    let mut worst = String::new();
    for x in &spheres[depth] {
        let lhs = measure.mass(model, x)?;
        let mut rhs = 0.0;
        for (gi, (_, p)) in mu.support().iter().enumerate() {
            rhs += p * translated
                .get(&(gi, x.letters().to_vec()))
                .copied()
                .unwrap_or(0.0);
        }
        let r = (lhs - rhs).abs();
        if r > max_residual {
            max_residual = r;
            worst = model.render(x);
        }
    }
    Ok(StationarityReport { depth, max_residual, worst_cone: worst })
}

// ---------------------------------------------------------------------------
// Local dimension along rays
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LocalDimensionReport {
    /// Per trajectory: the sequence -(1/n) log G(1, gamma(n)).
    pub sequences: Vec<Vec<f64>>,
    /// Final value of each sequence.
    pub finals: Vec<f64>,
    pub mean_final: f64,
}

/// Local-dimension samples along geodesic rays, using the Gibbs surrogate
/// nu(S(gamma(n), R)) ~ G(1, gamma(n)).
pub fn local_dimension_samples(
    model: &GroupModel,
    table: &FirstPassageTable,
    rays: &[Vec<Element>],
) -> Result<LocalDimensionReport> {
    let mut sequences = Vec::with_capacity(rays.len());
    let mut finals = Vec::with_capacity(rays.len());
    for ray in rays {
        let mut seq = Vec::with_capacity(ray.len().saturating_sub(1));
        for x in ray.iter().skip(1) {
            let n = x.len() as f64;
            seq.push(-table.log_green(model, x)? / n);
        }
        if let Some(&last) = seq.last() {
            finals.push(last);
        }
        sequences.push(seq);
    }
    if finals.is_empty() {
        return Err(Error::Precondition("no nonempty ray provided".into()));
    }
    let mean_final = finals.iter().sum::<f64>() / finals.len() as f64;
    Ok(LocalDimensionReport { sequences, finals, mean_final })
}
