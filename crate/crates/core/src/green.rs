//! Green functions and first-passage probabilities.
//!
//! On free-like models with nearest-neighbor steps the first-passage
//! probabilities solve a quadratic fixed-point system per factor; the
//! minimal solution is reached by monotone iteration from zero, and Green
//! values multiply along normal-form syllables. Everything else goes
//! through a truncated absorbing-ball solve (a certified lower bound,
//! monotone in the horizon) or Monte Carlo.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::group::{Element, GroupModel, Letter, ModelKind};
use crate::rng::Rng;

// ---------------------------------------------------------------------------
// Step distributions
// ---------------------------------------------------------------------------

/// A finitely supported admissible step distribution.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    support: Vec<(Element, f64)>,
    cdf: Vec<f64>,
    reach: usize,
    nearest_neighbor: bool,
}

impl StepDistribution {
    pub fn new(model: &GroupModel, pairs: Vec<(Element, f64)>) -> Result<StepDistribution> {
        if pairs.is_empty() {
            return Err(Error::NotAdmissible("empty support".into()));
        }
        let mut support = Vec::with_capacity(pairs.len());
        let mut sum = 0.0;
        for (x, p) in pairs {
            if x.model_id() != model.id() {
                return Err(Error::ModelMismatch);
            }
            if !(p > 0.0) {
                return Err(Error::NotAdmissible(format!(
                    "probability {p} for {:?} is not positive",
                    model.render(&x)
                )));
            }
            if x.is_identity() {
                return Err(Error::NotAdmissible(
                    "identity in the support is not allowed here".into(),
                ));
            }
            sum += p;
            support.push((x, p));
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotAdmissible(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        support.sort_by(|a, b| a.0.cmp(&b.0));
        let mut acc = 0.0;
        let cdf: Vec<f64> = support
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        let reach = support.iter().map(|(x, _)| x.len()).max().unwrap();
        let nearest_neighbor = reach == 1;
        let dist = StepDistribution { support, cdf, reach, nearest_neighbor };
        dist.check_admissible(model)?;
        Ok(dist)
    }

    /// Uniform distribution on the generator set.
    pub fn uniform_neighbors(model: &GroupModel) -> Result<StepDistribution> {
        let k = model.letter_count();
        let pairs = (0..k as Letter)
            .map(|l| (model.reduce(&[l]), 1.0 / k as f64))
            .collect();
        Self::new(model, pairs)
    }

    /// From letter-notation words and probabilities.
    pub fn from_pairs(model: &GroupModel, pairs: &[(&str, f64)]) -> Result<StepDistribution> {
        let items = pairs
            .iter()
            .map(|&(w, p)| Ok((model.parse_word(w)?, p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, items)
    }

    /// Parse a step-distribution file: one `word probability` pair per line,
    /// probabilities as decimals or fractions `p/q`.
    pub fn parse(text: &str, path: &str, model: &GroupModel) -> Result<StepDistribution> {
        let mut items = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::parse(path, lineno, "expected: <word> <probability>"));
            }
            let x = model
                .parse_word(toks[0])
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            let p = parse_prob(toks[1])
                .ok_or_else(|| Error::parse(path, lineno, format!("bad probability {:?}", toks[1])))?;
            items.push((x, p));
        }
        Self::new(model, items)
    }

    pub fn load(path: &str, model: &GroupModel) -> Result<StepDistribution> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, model)
    }

    fn check_admissible(&self, model: &GroupModel) -> Result<()> {
        // The support must generate the group as a semigroup. It is enough
        // for the closure to contain every generator; we probe products of
        // bounded length.
        let cap = 4 + 2 * model
            .factors()
            .iter()
            .map(|f| f.order as usize)
            .max()
            .unwrap_or(0)
            .max(2);
        let mut seen: std::collections::HashSet<Vec<Letter>> = std::collections::HashSet::new();
        let mut frontier: Vec<Element> = vec![model.identity()];
        seen.insert(Vec::new());
        for _ in 0..cap {
            let mut next = Vec::new();
            for x in &frontier {
                for (s, _) in &self.support {
                    let y = model.mul(x, s)?;
                    if seen.insert(y.letters().to_vec()) {
                        next.push(y);
                    }
                }
            }
            frontier = next;
            let all_letters = (0..model.letter_count() as Letter)
                .all(|l| seen.contains(model.reduce(&[l]).letters()));
            if all_letters {
                return Ok(());
            }
        }
        Err(Error::NotAdmissible(format!(
            "support does not reach every generator within products of length {cap}"
        )))
    }

    pub fn support(&self) -> &[(Element, f64)] {
        &self.support
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    pub fn is_nearest_neighbor(&self) -> bool {
        self.nearest_neighbor
    }

    /// Probability of a single letter step (0 when not in the support).
    pub fn letter_prob(&self, model: &GroupModel, l: Letter) -> f64 {
        let e = model.reduce(&[l]);
        self.support
            .iter()
            .find(|(x, _)| *x == e)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn sample<'a>(&'a self, rng: &mut Rng) -> &'a Element {
        &self.support[rng.sample_cdf(&self.cdf)].0
    }
}

fn parse_prob(s: &str) -> Option<f64> {
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().ok()?;
        let d: f64 = den.trim().parse().ok()?;
        if d == 0.0 {
            return None;
        }
        Some(n / d)
    } else {
        s.parse().ok()
    }
}

// ---------------------------------------------------------------------------
// First-passage tables on free-like models
// ---------------------------------------------------------------------------

/// First-passage probabilities F(1, t^e) per factor syllable, for
/// nearest-neighbor walks on free-like models, plus G(1,1).
#[derive(Debug, Clone)]
pub struct FirstPassageTable {
    model_id: u64,
    /// F(1, letter) per letter id.
    per_letter: Vec<f64>,
    /// For finite factors: index by [factor][exponent 1..order-1].
    finite_powers: Vec<Vec<f64>>,
    g11: f64,
    return_prob: f64,
    residual: f64,
}

impl FirstPassageTable {
    pub fn f_letter(&self, l: Letter) -> f64 {
        self.per_letter[l as usize]
    }

    pub fn per_letter(&self) -> &[f64] {
        &self.per_letter
    }

    pub fn green_one(&self) -> f64 {
        self.g11
    }

    pub fn return_probability(&self) -> f64 {
        self.return_prob
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// log F(1, x): sum over normal-form syllables.
    pub fn log_f(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        if x.model_id() != self.model_id {
            return Err(Error::ModelMismatch);
        }
        let mut total = 0.0;
        let word = x.letters();
        let mut i = 0;
        while i < word.len() {
            let l = word[i];
            let mut run = 1;
            while i + run < word.len() && word[i + run] == l {
                run += 1;
            }
            let info = &model.letters()[l as usize];
            let order = model.factors()[info.factor as usize].order;
            if order == 0 {
                total += run as f64 * self.per_letter[l as usize].ln();
            } else {
                let e = (info.dir as i64 * run as i64).rem_euclid(order as i64) as usize;
                total += self.finite_powers[info.factor as usize][e].ln();
            }
            i += run;
        }
        Ok(total)
    }

    pub fn f_of(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        Ok(self.log_f(model, x)?.exp())
    }

    /// log G(1, x) = log G(1,1) + log F(1, x).
    pub fn log_green(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        Ok(self.g11.ln() + self.log_f(model, x)?)
    }

    pub fn green(&self, model: &GroupModel, x: &Element) -> Result<f64> {
        Ok(self.log_green(model, x)?.exp())
    }
}

/// Solve the first-passage system for a nearest-neighbor walk on a
/// free-like model by monotone iteration from zero (minimal solution).
pub fn solve_tree_first_passage(
    model: &GroupModel,
    mu: &StepDistribution,
) -> Result<FirstPassageTable> {
    if model.kind() != ModelKind::FreeLike {
        return Err(Error::GreenUnavailable(
            "first-passage tables require a free-like model".into(),
        ));
    }
    if !mu.is_nearest_neighbor() {
        return Err(Error::GreenUnavailable(
            "first-passage tables require a nearest-neighbor walk; use the truncated solver".into(),
        ));
    }
    let letters = model.letters();
    let nl = letters.len();
    let nf = model.factors().len();
    // Unknowns: for a finite factor of order k, F(1, t^e) for e = 1..k-1;
    // for free factors the two letter values.
    let mut finite: Vec<Vec<f64>> = model
        .factors()
        .iter()
        .map(|f| if f.order >= 2 { vec![0.0; f.order as usize] } else { Vec::new() })
        .collect();
    let mut free_letters: Vec<f64> = vec![0.0; nl];
    let letter_mu: Vec<f64> = (0..nl as Letter).map(|l| mu.letter_prob(model, l)).collect();

    let f_inv = |free_letters: &[f64], finite: &[Vec<f64>], u: Letter| -> f64 {
        let info = &letters[u as usize];
        let order = model.factors()[info.factor as usize].order;
        if order == 0 {
            free_letters[info.inv as usize]
        } else {
            let e = (-(info.dir as i64)).rem_euclid(order as i64) as usize;
            finite[info.factor as usize][e]
        }
    };

    let tol = 1e-14;
    let cap = 1_000_000usize;
    let mut max_delta = f64::INFINITY;
    let mut iters = 0usize;
    while max_delta > tol {
        iters += 1;
        if iters > cap {
            return Err(Error::NoConvergence("first-passage iteration", max_delta));
        }
        max_delta = 0.0;
        // Free-factor letters.
        for l in 0..nl as Letter {
            let info = &letters[l as usize];
            if model.factors()[info.factor as usize].order != 0 {
                continue;
            }
            let mut other = 0.0;
            for u in 0..nl as Letter {
                if u != l {
                    other += letter_mu[u as usize] * f_inv(&free_letters, &finite, u);
                }
            }
            let prev = free_letters[l as usize];
            let next = letter_mu[l as usize] + other * prev;
            max_delta = max_delta.max((next - prev).abs());
            free_letters[l as usize] = next;
        }
        // Finite-factor powers.
        for fi in 0..nf {
            let order = model.factors()[fi].order as i64;
            if order == 0 {
                continue;
            }
            // Steps leaving the factor must return through the identity.
            let mut outside = 0.0;
            for u in 0..nl as Letter {
                if letters[u as usize].factor as usize != fi {
                    outside += letter_mu[u as usize] * f_inv(&free_letters, &finite, u);
                }
            }
            for e in 1..order as usize {
                let mut inside = 0.0;
                for u in 0..nl as Letter {
                    let info = &letters[u as usize];
                    if info.factor as usize != fi {
                        continue;
                    }
                    let rest = (e as i64 - info.dir as i64).rem_euclid(order) as usize;
                    let through = if rest == 0 { 1.0 } else { finite[fi][rest] };
                    inside += letter_mu[u as usize] * through;
                }
                let prev = finite[fi][e];
                let next = inside + outside * prev;
                max_delta = max_delta.max((next - prev).abs());
                finite[fi][e] = next;
            }
        }
    }

    let residual = max_delta;
    let per_letter: Vec<f64> = (0..nl)
        .map(|li| {
            let info = &letters[li];
            let order = model.factors()[info.factor as usize].order;
            if order == 0 {
                free_letters[li]
            } else {
                let e = (info.dir as i64).rem_euclid(order as i64) as usize;
                finite[info.factor as usize][e]
            }
        })
        .collect();
    for &v in &per_letter {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::NoConvergence("first-passage solution out of (0,1)", v));
        }
    }
    // G(1,1) = 1 / (1 - U), U = sum_u mu(u) F(1, u^{-1}).
    let mut ret = 0.0;
    for l in 0..nl as Letter {
        let inv = letters[l as usize].inv;
        ret += mu.letter_prob(model, l) * per_letter[inv as usize];
    }
    Ok(FirstPassageTable {
        model_id: model.id(),
        per_letter,
        finite_powers: finite,
        g11: 1.0 / (1.0 - ret),
        return_prob: ret,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Truncated (absorbing-ball) Green values
// ---------------------------------------------------------------------------

/// Result of a truncated Green computation: the absorbing-ball value is a
/// certified lower bound; the estimate adds a geometric extrapolation from
/// horizon halving when there is room.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedGreen {
    pub lower_bound: f64,
    pub estimate: f64,
    pub horizon: usize,
}

/// Green values G(1, y) for every y in the ball of the given radius, with
/// the walk absorbed on leaving the ball.
#[derive(Debug)]
pub struct BallGreen {
    pub horizon: usize,
    values: HashMap<Vec<Letter>, f64>,
}

impl BallGreen {
    pub fn get(&self, x: &Element) -> Option<f64> {
        self.values.get(x.letters()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Letter>, f64)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }
}

/// Solve the absorbing-ball system u = delta_1 + u P on the ball of radius
/// `horizon` by monotone sweeps. Budget caps the ball size.
pub fn ball_green(
    model: &GroupModel,
    mu: &StepDistribution,
    horizon: usize,
    budget: usize,
) -> Result<BallGreen> {
    let spheres = crate::group::spheres(model, horizon, budget)?;
    let mut index: HashMap<Vec<Letter>, usize> = HashMap::new();
    let mut elements: Vec<Element> = Vec::new();
    for layer in &spheres {
        for x in layer {
            index.insert(x.letters().to_vec(), elements.len());
            elements.push(x.clone());
        }
    }
    let n = elements.len();
    let mut trans: Vec<(u32, u32, f64)> = Vec::new();
    for (i, x) in elements.iter().enumerate() {
        for (s, p) in mu.support() {
            let y = model.mul(x, s)?;
            if let Some(&j) = index.get(y.letters()) {
                trans.push((i as u32, j as u32, *p));
            }
        }
    }
    let mut u = vec![0.0f64; n];
    let root = index[&Vec::new()];
    let mut next = vec![0.0f64; n];
    for _ in 0..200_000usize {
        for v in next.iter_mut() {
            *v = 0.0;
        }
        next[root] = 1.0;
        for &(i, j, p) in &trans {
            next[j as usize] += u[i as usize] * p;
        }
        let mut delta = 0.0f64;
        for i in 0..n {
            delta = delta.max((next[i] - u[i]).abs());
        }
        std::mem::swap(&mut u, &mut next);
        if delta < 1e-14 {
            let values = elements
                .iter()
                .zip(u.iter())
                .map(|(x, &v)| (x.letters().to_vec(), v))
                .collect();
            return Ok(BallGreen { horizon, values });
        }
    }
    Err(Error::NoConvergence("ball Green sweep", f64::NAN))
}

/// Absorbing-ball Green value G_B(1, x) for a nearest-neighbor walk on a
/// free group, by path recursions (no state-space enumeration).
fn free_tree_truncated(
    model: &GroupModel,
    mu: &StepDistribution,
    x: &Element,
    horizon: usize,
) -> Result<f64> {
    let letters = model.letters();
    let nl = letters.len();
    let letter_mu: Vec<f64> = (0..nl as Letter).map(|l| mu.letter_prob(model, l)).collect();
    // p[m][l] = P(from a vertex at depth m entered by letter l, hit its
    // parent before leaving the ball of radius `horizon`).
    let mut p = vec![vec![0.0f64; nl]; horizon + 2];
    for m in (1..=horizon).rev() {
        for l in 0..nl {
            let inv = letters[l].inv as usize;
            let mut child_return = 0.0;
            if m < horizon {
                for u in 0..nl {
                    if u != inv {
                        child_return += letter_mu[u] * p[m + 1][u];
                    }
                }
            }
            p[m][l] = letter_mu[inv] / (1.0 - child_return);
        }
    }
    let word = x.letters();
    let m_len = word.len();
    // d[i] = P(from prefix of length i-1, hit prefix of length i before absorption).
    let mut d = vec![0.0f64; m_len + 1];
    for i in 1..=m_len {
        let si = word[i - 1] as usize;
        let mut others = 0.0;
        for w in 0..nl {
            if w == si {
                continue;
            }
            if i >= 2 && w == letters[word[i - 2] as usize].inv as usize {
                continue;
            }
            others += letter_mu[w] * p[i][w];
        }
        if i >= 2 {
            let back = letters[word[i - 2] as usize].inv as usize;
            others += letter_mu[back] * d[i - 1];
        }
        d[i] = letter_mu[si] / (1.0 - others);
    }
    // Expected visits at x.
    let mut r = 0.0;
    for w in 0..nl {
        let is_back = m_len >= 1 && w == letters[word[m_len - 1] as usize].inv as usize;
        if is_back {
            r += letter_mu[w] * d[m_len];
        } else if m_len + 1 <= horizon {
            r += letter_mu[w] * p[m_len + 1][w];
        }
    }
    let g_xx = 1.0 / (1.0 - r);
    let mut g = g_xx;
    for i in 1..=m_len {
        g *= d[i];
    }
    Ok(g)
}

/// Truncated Green value: absorbing-ball solve on the given horizon.
/// Monotone nondecreasing in the horizon; converges to G(1, x).
pub fn truncated_green(
    model: &GroupModel,
    mu: &StepDistribution,
    x: &Element,
    horizon: usize,
    budget: usize,
) -> Result<TruncatedGreen> {
    if x.len() + mu.reach() > horizon {
        return Err(Error::Precondition(format!(
            "horizon {horizon} too small for |x| = {} (reach {})",
            x.len(),
            mu.reach()
        )));
    }
    let eval = |h: usize| -> Result<f64> {
        if model.is_free() && mu.is_nearest_neighbor() {
            free_tree_truncated(model, mu, x, h)
        } else {
            ball_green(model, mu, h, budget)?
                .get(x)
                .ok_or_else(|| Error::Precondition("x outside enumerated ball".into()))
        }
    };
    let g_h = eval(horizon)?;
    let h2 = horizon / 2;
    let h4 = horizon / 4;
    let estimate = if h4 > x.len() + mu.reach() {
        let g2 = eval(h2)?;
        let g4 = eval(h4)?;
        let d1 = g_h - g2;
        let d0 = g2 - g4;
        if d0 > 0.0 && d1 > 0.0 && d1 < d0 {
            let q = d1 / d0;
            g_h + d1 * q / (1.0 - q)
        } else {
            g_h
        }
    } else {
        g_h
    };
    Ok(TruncatedGreen { lower_bound: g_h, estimate, horizon })
}

// ---------------------------------------------------------------------------
// Monte Carlo first passage
// ---------------------------------------------------------------------------

/// Fraction of walks that hit `x` before drifting `cutoff` beyond |x|,
/// with a binomial 95% half-width. Deterministic given the seed; the
/// cutoff bias is one-sided (it can only lose true hits).
pub fn mc_first_passage(
    model: &GroupModel,
    mu: &StepDistribution,
    x: &Element,
    trials: usize,
    cutoff: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Precondition("mc_first_passage needs trials >= 1".into()));
    }
    if x.is_identity() {
        return Ok((1.0, 0.0));
    }
    let stop_len = x.len() + cutoff;
    let mut hits = 0usize;
    for t in 0..trials {
        let mut rng = Rng::stream(seed, t as u64);
        let mut pos = model.identity();
        loop {
            if pos == *x {
                hits += 1;
                break;
            }
            if pos.len() > stop_len {
                break;
            }
            let step = mu.sample(&mut rng);
            pos = model.mul(&pos, step)?;
        }
    }
    let p = hits as f64 / trials as f64;
    let half = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
    Ok((p, half))
}

// ---------------------------------------------------------------------------
// Martin kernel approximants
// ---------------------------------------------------------------------------

/// K(g, xi) ~ G(g, y_k) / G(1, y_k) along the geodesic ray toward xi.
/// Exact on trees once y_k is past the fork between g and the ray.
pub fn martin_kernel_approx(
    model: &GroupModel,
    table: &FirstPassageTable,
    g: &Element,
    ray: &[Element],
    k: usize,
) -> Result<f64> {
    if k >= ray.len() {
        return Err(Error::Precondition(format!(
            "martin kernel depth {k} out of range (ray length {})",
            ray.len()
        )));
    }
    let y = &ray[k];
    let ginv_y = model.mul(&model.inverse(g)?, y)?;
    Ok((table.log_f(model, &ginv_y)? - table.log_f(model, y)?).exp())
}

// ---------------------------------------------------------------------------
// Green value cache (binary key-value file)
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 4] = b"GWGC";
const CACHE_VERSION: u16 = 1;

/// Encode Green values keyed by normal form. Layout: magic "GWGC",
/// version u16 LE, count u64 LE, then per entry a u16 LE word length,
/// the letter bytes, and the f64 LE value.
pub fn encode_green_cache(values: &[(Element, f64)]) -> Vec<u8> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for (x, v) in values {
        let w = x.letters();
        buf.extend_from_slice(&(w.len() as u16).to_le_bytes());
        buf.extend_from_slice(w);
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn save_green_cache(path: &str, values: &[(Element, f64)]) -> Result<()> {
    let buf = encode_green_cache(values);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Load a Green cache written by [`save_green_cache`]; keys are re-attached
/// to the given model.
pub fn load_green_cache(path: &str, model: &GroupModel) -> Result<Vec<(Element, f64)>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::parse(path, 0, msg.to_string());
    if buf.len() < 14 || &buf[0..4] != CACHE_MAGIC {
        return Err(fail("bad magic"));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != CACHE_VERSION {
        return Err(fail("unsupported version"));
    }
    let count = u64::from_le_bytes(buf[6..14].try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count);
    let mut at = 14usize;
    for _ in 0..count {
        if at + 2 > buf.len() {
            return Err(fail("truncated entry header"));
        }
        let len = u16::from_le_bytes([buf[at], buf[at + 1]]) as usize;
        at += 2;
        if at + len + 8 > buf.len() {
            return Err(fail("truncated entry"));
        }
        let word = buf[at..at + len].to_vec();
        at += len;
        let v = f64::from_le_bytes(buf[at..at + 8].try_into().unwrap());
        at += 8;
        out.push((model.reduce(&word), v));
    }
    Ok(out)
}
