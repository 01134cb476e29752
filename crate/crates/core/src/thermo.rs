//! Thermodynamic formalism on the automaton.
//!
//! The potential assigns to each cylinder of paths the log of a Martin
//! kernel ratio, so that Birkhoff sums reproduce log G(1, x) along the
//! path up to a bounded correction. The pressure of theta times the
//! potential is, per strongly connected component, the log of the Perron
//! eigenvalue of the theta-power-weighted transfer matrix; the sphere
//! pressure beta(theta) is the maximum over components. Its Legendre
//! transform is the Hausdorff spectrum (reported in epsilon = 1 units).

use serde::Serialize;

use crate::automaton::{self, Automaton, ComponentDecomposition};
use crate::error::{Error, Result};
use crate::green::{BallGreen, FirstPassageTable};
use crate::group::{Element, GroupModel, Letter};

/// How cylinder weights are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMode {
    /// Exact Green ratios from a first-passage table (free-like models);
    /// cylinder depth 1 with state memory, exact cocycle telescoping.
    ExactTree,
    /// Finite-horizon Green ratios on k-cylinders for generic models.
    Empirical { k: usize },
}

/// Green access for weight evaluation.
pub enum GreenBackend<'a> {
    Table(&'a FirstPassageTable),
    Ball(&'a BallGreen),
}

impl GreenBackend<'_> {
    fn log_green(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        match self {
            GreenBackend::Table(t) => t.log_green(model, x),
            GreenBackend::Ball(b) => b.get(x).map(|v| v.ln()).ok_or_else(|| {
                Error::GreenUnavailable(format!(
                    "element of length {} outside Green ball (horizon {})",
                    x.len(),
                    b.horizon
                ))
            }),
        }
    }
}

/// The weighted transfer graph: states, weighted edges, and the component
/// decomposition used for per-component pressures.
#[derive(Debug, Clone)]
pub struct PotentialScheme {
    pub cylinder_depth: usize,
    pub states: usize,
    /// (from, to, log weight). Parallel edges allowed.
    pub edges: Vec<(u32, u32, f64)>,
    pub decomp: ComponentDecomposition,
}

impl PotentialScheme {
    fn adjacency(&self, theta: f64) -> Vec<Vec<(usize, f64)>> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.states];
        for &(f, t, lw) in &self.edges {
            adj[f as usize].push((t as usize, (theta * lw).exp()));
        }
        adj
    }
}

/// Build the weighted transfer graph for the given automaton.
///
/// `ExactTree` assigns each edge the exact increment of log G along any
/// path reaching it (the built-in automata's states determine the syllable
/// position, so the increment is well defined). `Empirical { k }` recodes
/// to (k-1)-cylinders and weights k-cylinders by Green ratios of their
/// label words.
pub fn build_potential(
    model: &GroupModel,
    aut: &Automaton,
    green: &GreenBackend,
    mode: WeightMode,
) -> Result<PotentialScheme> {
    match mode {
        WeightMode::ExactTree => build_depth_one(model, aut, green),
        WeightMode::Empirical { k } => {
            if k == 0 {
                return Err(Error::Precondition("cylinder depth must be >= 1".into()));
            }
            if k == 1 {
                build_depth_one(model, aut, green)
            } else {
                build_recoded(model, aut, green, k)
            }
        }
    }
}

/// Per-edge log Green increments, parallel to `aut.edges`: the weight of
/// the edge is the change of log G(1, .) when the edge's label extends any
/// word reaching its source state.
pub fn edge_log_weights(
    model: &GroupModel,
    aut: &Automaton,
    green: &GreenBackend,
) -> Result<Vec<Vec<f64>>> {
    // Representative word per state (BFS from the initial state).
    let mut rep: Vec<Option<Element>> = vec![None; aut.states];
    rep[aut.initial] = Some(model.identity());
    let mut queue = std::collections::VecDeque::from([aut.initial]);
    while let Some(s) = queue.pop_front() {
        let w = rep[s].clone().unwrap();
        for &(l, t) in &aut.edges[s] {
            if rep[t as usize].is_none() {
                let mut word = w.letters().to_vec();
                word.push(l);
                let next = model.reduce(&word);
                if next.len() != w.len() + 1 {
                    return Err(Error::Precondition(
                        "automaton path is not geodesic; cannot build exact potential".into(),
                    ));
                }
                rep[t as usize] = Some(next);
                queue.push_back(t as usize);
            }
        }
    }
    let mut out = Vec::with_capacity(aut.states);
    for s in 0..aut.states {
        let w = rep[s].clone().ok_or_else(|| {
            Error::Precondition(format!("automaton state {s} unreachable from the initial state"))
        })?;
        let base = green.log_green(model, &w)?;
        let mut row = Vec::with_capacity(aut.edges[s].len());
        for &(l, _) in &aut.edges[s] {
            let mut word = w.letters().to_vec();
            word.push(l);
            let next = model.reduce(&word);
            row.push(green.log_green(model, &next)? - base);
        }
        out.push(row);
    }
    Ok(out)
}

fn build_depth_one(
    model: &GroupModel,
    aut: &Automaton,
    green: &GreenBackend,
) -> Result<PotentialScheme> {
    let weights = edge_log_weights(model, aut, green)?;
    let mut edges = Vec::new();
    for s in 0..aut.states {
        for (&(_, t), &lw) in aut.edges[s].iter().zip(weights[s].iter()) {
            edges.push((s as u32, t, lw));
        }
    }
    Ok(PotentialScheme {
        cylinder_depth: 1,
        states: aut.states,
        edges,
        decomp: automaton::scc_decompose(aut),
    })
}

fn build_recoded(
    model: &GroupModel,
    aut: &Automaton,
    green: &GreenBackend,
    k: usize,
) -> Result<PotentialScheme> {
    use std::collections::HashMap;
    // Flatten edges so a cylinder is an edge-id sequence.
    let mut flat: Vec<(usize, Letter, usize)> = Vec::new();
    let mut out_of: Vec<Vec<usize>> = vec![Vec::new(); aut.states];
    for s in 0..aut.states {
        for &(l, t) in &aut.edges[s] {
            out_of[s].push(flat.len());
            flat.push((s, l, t as usize));
        }
    }
    // Enumerate all (k-1)-edge paths.
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut list: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = flat.iter().enumerate().map(|(i, _)| vec![i]).collect();
    if k == 2 {
        for p in stack.drain(..) {
            ids.insert(p.clone(), list.len());
            list.push(p);
        }
    } else {
        while let Some(p) = stack.pop() {
            if p.len() == k - 1 {
                if !ids.contains_key(&p) {
                    ids.insert(p.clone(), list.len());
                    list.push(p);
                }
                continue;
            }
            let end = flat[*p.last().unwrap()].2;
            for &e in &out_of[end] {
                let mut q = p.clone();
                q.push(e);
                stack.push(q);
            }
        }
    }
    let mut edges = Vec::new();
    for (ci, p) in list.iter().enumerate() {
        let end = flat[*p.last().unwrap()].2;
        for &e in &out_of[end] {
            let mut full = p.clone();
            full.push(e);
            let shifted = full[1..].to_vec();
            let cj = match ids.get(&shifted) {
                Some(&cj) => cj,
                None => continue,
            };
            let word_letters: Vec<Letter> = full.iter().map(|&ei| flat[ei].1).collect();
            let word = model.reduce(&word_letters);
            if word.len() != word_letters.len() {
                return Err(Error::Precondition(
                    "automaton path is not geodesic; invalid cylinder word".into(),
                ));
            }
            let tail = model.reduce(&word_letters[1..]);
            let lw = green.log_green(model, &word)? - green.log_green(model, &tail)?;
            edges.push((ci as u32, cj as u32, lw));
        }
    }
    // Component structure of the recoded graph.
    let mut adapter_edges: Vec<Vec<(Letter, u32)>> = vec![Vec::new(); list.len()];
    for &(f, t, _) in &edges {
        adapter_edges[f as usize].push((0, t));
    }
    let adapter = Automaton {
        states: list.len(),
        initial: 0,
        edges: adapter_edges,
        names: (0..list.len()).map(|i| format!("c{i}")).collect(),
    };
    Ok(PotentialScheme {
        cylinder_depth: k,
        states: list.len(),
        edges,
        decomp: automaton::scc_decompose(&adapter),
    })
}

// ---------------------------------------------------------------------------
// Pressure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PressurePoint {
    pub theta: f64,
    /// beta(theta) = max over components of the component pressure.
    pub beta: f64,
    /// Per-component pressure; -inf for transient components.
    pub per_component: Vec<f64>,
    /// Indices of components within tie tolerance of the maximum.
    pub maximal: Vec<usize>,
}

/// Tie tolerance for identifying maximal components.
pub const MAXIMAL_TIE_TOL: f64 = 1e-9;

/// Per-component pressures of theta times the potential, and their max.
pub fn pressure(scheme: &PotentialScheme, theta: f64) -> Result<PressurePoint> {
    let adj = scheme.adjacency(theta);
    let mut per_component = Vec::with_capacity(scheme.decomp.components.len());
    for comp in &scheme.decomp.components {
        if comp.trivial {
            per_component.push(f64::NEG_INFINITY);
            continue;
        }
        let (lambda, _) = automaton::perron_on_subset(
            scheme.states,
            |s, f| {
                for &(t, w) in &adj[s] {
                    f(t, w);
                }
            },
            &comp.vertices,
            1e-13,
            500_000,
        )?;
        per_component.push(lambda.ln());
    }
    let beta = per_component.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !beta.is_finite() {
        return Err(Error::Precondition("no recurrent component: pressure undefined".into()));
    }
    let maximal = per_component
        .iter()
        .enumerate()
        .filter(|(_, &p)| p.is_finite() && (beta - p) <= MAXIMAL_TIE_TOL)
        .map(|(i, _)| i)
        .collect();
    Ok(PressurePoint { theta, beta, per_component, maximal })
}

// ---------------------------------------------------------------------------
// Direct sphere sums
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BetaDirect {
    pub theta: f64,
    pub n: usize,
    /// log of the sum over the sphere of G(1,x)^theta.
    pub log_sum_green: f64,
    /// (1/n) log sum G^theta.
    pub raw: f64,
    /// (1/n) log sum (G(1,x)/G(1,1))^theta, i.e. the transfer-operator path
    /// sum; this drops the G(1,1)^theta finite-size offset.
    pub kernel_normalized: f64,
}

impl BetaDirect {
    /// The bounded-ratio statistic sum_{S_n} G^theta e^{-n beta}.
    pub fn normalized_ratio(&self, beta: f64) -> f64 {
        (self.log_sum_green - self.n as f64 * beta).exp()
    }
}

/// Direct evaluation of the sphere sum at radius n on a free-like model.
pub fn beta_direct(
    model: &GroupModel,
    table: &FirstPassageTable,
    theta: f64,
    n: usize,
    budget: usize,
) -> Result<BetaDirect> {
    if n == 0 {
        return Err(Error::Precondition("beta_direct needs n >= 1".into()));
    }
    let mut sum_f = 0.0f64;
    let mut count = 0usize;
    let mut over_budget = false;
    crate::group::for_each_normal_form(model, n, |word| {
        if word.len() == n && !over_budget {
            count += 1;
            if count > budget {
                over_budget = true;
                return;
            }
            let x = model.reduce(word);
            let lf = table.log_f(model, &x).expect("same model");
            sum_f += (theta * lf).exp();
        }
    })?;
    if over_budget {
        return Err(Error::BudgetExceeded(format!(
            "sphere enumeration exceeded {budget} elements"
        )));
    }
    let log_sum_f = sum_f.ln();
    let log_sum_green = log_sum_f + theta * table.green_one().ln();
    Ok(BetaDirect {
        theta,
        n,
        log_sum_green,
        raw: log_sum_green / n as f64,
        kernel_normalized: log_sum_f / n as f64,
    })
}

// ---------------------------------------------------------------------------
// Pressure curves and the Legendre transform
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<GridSpec> {
        if !(step > 0.0) || hi < lo {
            return Err(Error::Precondition(format!("bad grid {lo}:{hi}:{step}")));
        }
        Ok(GridSpec { lo, hi, step })
    }

    /// Parse "lo:hi:step".
    pub fn parse(s: &str) -> Result<GridSpec> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Precondition(format!("grid {s:?} is not lo:hi:step")));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Precondition(format!("grid {s:?} has non-numeric parts")))?;
        GridSpec::new(nums[0], nums[1], nums[2])
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step).round() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureCurve {
    pub thetas: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_prime: Vec<f64>,
    pub per_component: Vec<Vec<f64>>,
    pub maximal: Vec<Vec<usize>>,
    /// Minimum discrete second difference; convexity holds when >= -1e-9.
    pub min_second_difference: f64,
    pub max_second_difference: f64,
    /// Grid thetas where the set of maximal components changes: candidate
    /// non-analyticity locations.
    pub kink_candidates: Vec<f64>,
}

/// Evaluate the pressure over a theta grid; derivatives by central
/// differences (the curve is continuously differentiable).
pub fn beta_curve(scheme: &PotentialScheme, grid: &GridSpec) -> Result<PressureCurve> {
    let thetas = grid.points();
    if thetas.is_empty() {
        return Err(Error::Precondition("empty theta grid".into()));
    }
    let mut beta = Vec::with_capacity(thetas.len());
    let mut per_component = Vec::with_capacity(thetas.len());
    let mut maximal = Vec::with_capacity(thetas.len());
    for &t in &thetas {
        let p = pressure(scheme, t)?;
        beta.push(p.beta);
        per_component.push(p.per_component);
        maximal.push(p.maximal);
    }
    let m = thetas.len();
    let mut beta_prime = vec![0.0; m];
    for (i, d) in beta_prime.iter_mut().enumerate() {
        *d = if m == 1 {
            0.0
        } else if i == 0 {
            (beta[1] - beta[0]) / (thetas[1] - thetas[0])
        } else if i == m - 1 {
            (beta[m - 1] - beta[m - 2]) / (thetas[m - 1] - thetas[m - 2])
        } else {
            (beta[i + 1] - beta[i - 1]) / (thetas[i + 1] - thetas[i - 1])
        };
    }
    let mut min_dd = f64::INFINITY;
    let mut max_dd = f64::NEG_INFINITY;
    for i in 1..m.saturating_sub(1) {
        let dd = beta[i + 1] - 2.0 * beta[i] + beta[i - 1];
        min_dd = min_dd.min(dd);
        max_dd = max_dd.max(dd);
    }
    if m < 3 {
        min_dd = 0.0;
        max_dd = 0.0;
    }
    let mut kink_candidates = Vec::new();
    for i in 1..m {
        if maximal[i] != maximal[i - 1] {
            kink_candidates.push(thetas[i]);
        }
    }
    Ok(PressureCurve {
        thetas,
        beta,
        beta_prime,
        per_component,
        maximal,
        min_second_difference: min_dd,
        max_second_difference: max_dd,
        kink_candidates,
    })
}

impl PressureCurve {
    /// Largest second difference over interior grid points in [lo, hi]:
    /// the strict-convexity diagnostic.
    pub fn max_second_difference_on(&self, lo: f64, hi: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 1..self.thetas.len().saturating_sub(1) {
            if self.thetas[i] >= lo - 1e-12 && self.thetas[i] <= hi + 1e-12 {
                let dd = self.beta[i + 1] - 2.0 * self.beta[i] + self.beta[i - 1];
                best = best.max(dd);
            }
        }
        best
    }

    pub fn beta_at(&self, theta: f64) -> Option<f64> {
        self.thetas
            .iter()
            .position(|&t| (t - theta).abs() < 1e-9)
            .map(|i| self.beta[i])
    }

    pub fn beta_prime_at(&self, theta: f64) -> Option<f64> {
        self.thetas
            .iter()
            .position(|&t| (t - theta).abs() < 1e-9)
            .map(|i| self.beta_prime[i])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumCurve {
    pub thetas: Vec<f64>,
    /// alpha(theta) = -beta'(theta).
    pub alpha: Vec<f64>,
    /// f(alpha) = theta * alpha + beta(theta): the Hausdorff spectrum in
    /// epsilon = 1 units.
    pub f: Vec<f64>,
    /// Extreme grid slopes; extrapolations of the theta -> +/- infinity
    /// limits, not exact endpoint values.
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub extrapolated_endpoints: bool,
    pub max_f: f64,
}

/// Legendre transform of a pressure curve.
pub fn legendre(curve: &PressureCurve) -> Result<SpectrumCurve> {
    if curve.min_second_difference < -1e-9 {
        return Err(Error::Precondition(format!(
            "pressure curve is not convex within tolerance (min second difference {:.3e})",
            curve.min_second_difference
        )));
    }
    let alpha: Vec<f64> = curve.beta_prime.iter().map(|&d| -d).collect();
    let f: Vec<f64> = curve
        .thetas
        .iter()
        .zip(alpha.iter().zip(curve.beta.iter()))
        .map(|(&t, (&a, &b))| t * a + b)
        .collect();
    let alpha_min = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_max = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_f = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumCurve {
        thetas: curve.thetas.clone(),
        alpha,
        f,
        alpha_min,
        alpha_max,
        extrapolated_endpoints: true,
        max_f,
    })
}

impl SpectrumCurve {
    pub fn at_theta(&self, theta: f64) -> Option<(f64, f64)> {
        self.thetas
            .iter()
            .position(|&t| (t - theta).abs() < 1e-9)
            .map(|i| (self.alpha[i], self.f[i]))
    }
}

// ---------------------------------------------------------------------------
// Semisimplicity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SemisimplicityReport {
    pub theta: f64,
    pub pressures: Vec<f64>,
    pub maximal: Vec<usize>,
    /// A pair of distinct maximal components joined by a directed path,
    /// if any (which would refute semisimplicity).
    pub witness: Option<(usize, usize)>,
    pub pass: bool,
}

/// Check that no directed path joins two distinct maximal components.
pub fn semisimplicity_check(scheme: &PotentialScheme, theta: f64) -> Result<SemisimplicityReport> {
    let p = pressure(scheme, theta)?;
    let mut witness = None;
    'outer: for &i in &p.maximal {
        for &j in &p.maximal {
            if i != j && scheme.decomp.dag_reaches(i, j) {
                witness = Some((i, j));
                break 'outer;
            }
        }
    }
    Ok(SemisimplicityReport {
        theta,
        pressures: p.per_component,
        maximal: p.maximal,
        witness,
        pass: witness.is_none(),
    })
}
