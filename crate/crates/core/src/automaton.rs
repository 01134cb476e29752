//! Strongly Markov automatic structures.
//!
//! An automaton is a labeled directed graph with a distinguished initial
//! state whose labeled paths from the initial state are exactly the normal
//! form words of the group, one path per element. Built-in constructions
//! cover free groups and free products of finite cyclic groups; anything
//! else is loaded from a file and validated empirically against brute-force
//! ball enumeration.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::group::{self, GroupModel, Letter, ModelKind};

#[derive(Debug, Clone)]
pub struct Automaton {
    /// Number of states; state 0 is not special, see `initial`.
    pub states: usize,
    pub initial: usize,
    /// Outgoing edges per state: (label, target).
    pub edges: Vec<Vec<(Letter, u32)>>,
    /// Human-readable state names (for reports).
    pub names: Vec<String>,
}

impl Automaton {
    /// The built-in automaton of a free-like model: one state per
    /// (letter, position-in-syllable) plus the initial state.
    pub fn for_model(model: &GroupModel) -> Result<Automaton> {
        if model.kind() != ModelKind::FreeLike {
            return Err(Error::Precondition(
                "built-in automata exist only for free-like models; load a file instead".into(),
            ));
        }
        // State ids: 0 = initial; then per letter l, positions 1..=cap(l)
        // (infinite caps collapse to a single position with a self-loop).
        let mut ids: HashMap<(Letter, u32), usize> = HashMap::new();
        let mut names = vec!["start".to_string()];
        for (l, info) in model.letters().iter().enumerate() {
            let cap = model.syllable_cap(l as Letter);
            let reachable_cap = if cap == u32::MAX { 1 } else { cap };
            for c in 1..=reachable_cap {
                ids.insert((l as Letter, c), names.len());
                if reachable_cap == 1 {
                    names.push(format!("{}", info.display));
                } else {
                    names.push(format!("{}^{}", info.display, c));
                }
            }
        }
        let states = names.len();
        let mut edges: Vec<Vec<(Letter, u32)>> = vec![Vec::new(); states];
        for l in 0..model.letter_count() as Letter {
            edges[0].push((l, ids[&(l, 1)] as u32));
        }
        for (&(l, c), &sid) in &ids {
            let cap = model.syllable_cap(l);
            for next in 0..model.letter_count() as Letter {
                if model.can_follow(l, c, next) {
                    let target = if next == l {
                        if cap == u32::MAX {
                            ids[&(l, 1)]
                        } else {
                            ids[&(l, c + 1)]
                        }
                    } else {
                        ids[&(next, 1)]
                    };
                    edges[sid].push((next, target as u32));
                }
            }
        }
        for e in edges.iter_mut() {
            e.sort();
        }
        Ok(Automaton { states, initial: 0, edges, names })
    }

    /// Load from a line-oriented file:
    ///
    /// ```text
    /// states <n>
    /// initial <name>
    /// <from> <label-char> <to>     # one edge per line
    /// ```
    pub fn parse(text: &str, path: &str, model: &GroupModel) -> Result<Automaton> {
        let mut declared_states: Option<usize> = None;
        let mut initial_name: Option<String> = None;
        let mut name_ids: HashMap<String, usize> = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut raw_edges: Vec<(usize, Letter, usize)> = Vec::new();

        let intern = |name: &str, names: &mut Vec<String>, ids: &mut HashMap<String, usize>| {
            *ids.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["states", n] => {
                    declared_states = Some(n.parse().map_err(|_| {
                        Error::parse(path, lineno, format!("bad state count {n:?}"))
                    })?);
                }
                ["initial", name] => initial_name = Some(name.to_string()),
                [from, label, to] => {
                    if label.chars().count() != 1 {
                        return Err(Error::parse(path, lineno, "label must be one letter"));
                    }
                    let ch = label.chars().next().unwrap();
                    let l = model
                        .parse_letters(&ch.to_string())
                        .map_err(|_| Error::parse(path, lineno, format!("unknown label {ch:?}")))?;
                    let from_id = intern(from, &mut names, &mut name_ids);
                    let to_id = intern(to, &mut names, &mut name_ids);
                    raw_edges.push((from_id, l[0], to_id));
                }
                _ => return Err(Error::parse(path, lineno, "malformed line")),
            }
        }

        let initial_name =
            initial_name.ok_or_else(|| Error::parse(path, 0, "missing initial directive"))?;
        let initial = *name_ids
            .get(&initial_name)
            .ok_or_else(|| Error::parse(path, 0, format!("initial state {initial_name:?} has no edges")))?;
        let states = names.len();
        if let Some(n) = declared_states {
            if n != states {
                return Err(Error::parse(
                    path,
                    0,
                    format!("header declares {n} states but {states} appear in edges"),
                ));
            }
        }
        let mut edges: Vec<Vec<(Letter, u32)>> = vec![Vec::new(); states];
        for (f, l, t) in raw_edges {
            edges[f].push((l, t as u32));
        }
        for e in edges.iter_mut() {
            e.sort();
        }
        let aut = Automaton { states, initial, edges, names };
        // Structural invariant: every vertex reachable from the initial state.
        let reach = aut.reachable_from_initial();
        if let Some(bad) = (0..states).find(|&s| !reach[s]) {
            return Err(Error::parse(
                path,
                0,
                format!("state {:?} is unreachable from the initial state", aut.names[bad]),
            ));
        }
        Ok(aut)
    }

    pub fn load(path: &str, model: &GroupModel) -> Result<Automaton> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, model)
    }

    fn reachable_from_initial(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for &(_, t) in &self.edges[s] {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    stack.push(t as usize);
                }
            }
        }
        seen
    }

    /// Exact number of labeled paths from the initial state, per length.
    pub fn path_counts(&self, n: usize) -> Vec<u128> {
        let mut counts = vec![0u128; self.states];
        counts[self.initial] = 1;
        let mut out = vec![1u128];
        for _ in 1..=n {
            let mut next = vec![0u128; self.states];
            for s in 0..self.states {
                if counts[s] == 0 {
                    continue;
                }
                for &(_, t) in &self.edges[s] {
                    next[t as usize] += counts[s];
                }
            }
            out.push(next.iter().sum());
            counts = next;
        }
        out
    }

    /// Call `f(labels)` for every labeled path from the initial state of
    /// length 1..=n, in depth-first order.
    pub fn for_each_path(&self, n: usize, mut f: impl FnMut(&[Letter])) {
        let mut labels: Vec<Letter> = Vec::with_capacity(n);
        self.dfs_paths(self.initial, n, &mut labels, &mut f);
    }

    fn dfs_paths(
        &self,
        state: usize,
        n: usize,
        labels: &mut Vec<Letter>,
        f: &mut impl FnMut(&[Letter]),
    ) {
        if labels.len() == n {
            return;
        }
        for &(l, t) in &self.edges[state] {
            labels.push(l);
            f(labels);
            self.dfs_paths(t as usize, n, labels, f);
            labels.pop();
        }
    }

    /// The end state of the path spelling `word` from the initial state,
    /// if the word is accepted.
    pub fn run(&self, word: &[Letter]) -> Option<usize> {
        let mut s = self.initial;
        for &l in word {
            s = self.edges[s].iter().find(|&&(e, _)| e == l).map(|&(_, t)| t as usize)?;
        }
        Some(s)
    }
}

// ---------------------------------------------------------------------------
// Validation against the group model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DepthCheck {
    pub n: usize,
    pub path_count: u128,
    pub sphere_count: usize,
    pub bijective: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub depth: usize,
    pub per_depth: Vec<DepthCheck>,
    pub first_non_geodesic: Option<String>,
    pub first_duplicate: Option<String>,
    pub first_missing: Option<String>,
    pub pass: bool,
}

/// Check conditions (2) and (3) of the strongly Markov definition up to
/// depth `n`: every path spells a normal form (hence a geodesic), and paths
/// of length k biject onto the sphere of radius k. Failures are collected in
/// the report rather than returned as errors.
pub fn validate(aut: &Automaton, model: &GroupModel, n: usize, budget: usize) -> Result<ValidationReport> {
    let spheres = group::spheres(model, n, budget)?;
    let mut per_depth = Vec::new();
    let mut first_non_geodesic = None;
    let mut first_duplicate = None;
    let mut first_missing = None;

    let mut seen: Vec<HashSet<Vec<Letter>>> = vec![HashSet::new(); n + 1];
    let mut path_counts = vec![0u128; n + 1];
    path_counts[0] = 1;
    aut.for_each_path(n, |labels| {
        let k = labels.len();
        path_counts[k] += 1;
        let red = model.reduce(labels);
        if red.letters() != labels && first_non_geodesic.is_none() {
            first_non_geodesic = Some(render_word(model, labels));
        }
        if !seen[k].insert(labels.to_vec()) && first_duplicate.is_none() {
            first_duplicate = Some(render_word(model, labels));
        }
    });

    for (k, sphere) in spheres.iter().enumerate() {
        for x in sphere {
            if !seen[k].contains(x.letters()) && k > 0 && first_missing.is_none() {
                first_missing = Some(model.render(x));
            }
        }
        let distinct_ok = k == 0 || seen[k].len() as u128 == path_counts[k];
        per_depth.push(DepthCheck {
            n: k,
            path_count: path_counts[k],
            sphere_count: sphere.len(),
            bijective: path_counts[k] == sphere.len() as u128 && distinct_ok,
        });
    }

    let pass = per_depth.iter().all(|d| d.bijective)
        && first_non_geodesic.is_none()
        && first_duplicate.is_none()
        && first_missing.is_none();
    Ok(ValidationReport {
        depth: n,
        per_depth,
        first_non_geodesic,
        first_duplicate,
        first_missing,
        pass,
    })
}

fn render_word(model: &GroupModel, w: &[Letter]) -> String {
    if w.is_empty() {
        "1".into()
    } else {
        w.iter().map(|&l| model.letters()[l as usize].display).collect()
    }
}

// ---------------------------------------------------------------------------
// Components, periods, cyclic classes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Component {
    pub vertices: Vec<usize>,
    /// gcd of cycle lengths; 0 for transient (cycle-free singleton) components.
    pub period: usize,
    /// Cyclic classes, `period` many, when `period > 0`.
    pub classes: Vec<Vec<usize>>,
    pub trivial: bool,
}

#[derive(Debug, Clone)]
pub struct ComponentDecomposition {
    pub components: Vec<Component>,
    /// Which component each vertex belongs to.
    pub component_of: Vec<usize>,
    /// Condensation edges (from-component, to-component), deduplicated.
    pub dag: Vec<(usize, usize)>,
}

impl ComponentDecomposition {
    /// Is `to` reachable from `from` in the condensation (by one or more edges)?
    pub fn dag_reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return false;
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.components.len()];
        for &(a, b) in &self.dag {
            adj[a].push(b);
        }
        let mut stack = vec![from];
        let mut seen = vec![false; self.components.len()];
        while let Some(c) = stack.pop() {
            for &d in &adj[c] {
                if d == to {
                    return true;
                }
                if !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
        false
    }
}

/// Strongly connected components (Kosaraju), periods by the level-gcd method,
/// cyclic classes, and the condensation DAG. Transient singletons are kept.
pub fn scc_decompose(aut: &Automaton) -> ComponentDecomposition {
    let n = aut.states;
    // Forward DFS finishing order.
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        // Iterative post-order.
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        visited[start] = true;
        while let Some(&mut (s, ref mut ei)) = stack.last_mut() {
            if *ei < aut.edges[s].len() {
                let (_, t) = aut.edges[s][*ei];
                *ei += 1;
                if !visited[t as usize] {
                    visited[t as usize] = true;
                    stack.push((t as usize, 0));
                }
            } else {
                order.push(s);
                stack.pop();
            }
        }
    }
    // Reverse graph, then DFS in reverse finishing order.
    let mut redges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for &(_, t) in &aut.edges[s] {
            redges[t as usize].push(s);
        }
    }
    let mut component_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &start in order.iter().rev() {
        if component_of[start] != usize::MAX {
            continue;
        }
        let cid = comps.len();
        let mut verts = Vec::new();
        let mut stack = vec![start];
        component_of[start] = cid;
        while let Some(s) = stack.pop() {
            verts.push(s);
            for &t in &redges[s] {
                if component_of[t] == usize::MAX {
                    component_of[t] = cid;
                    stack.push(t);
                }
            }
        }
        verts.sort_unstable();
        comps.push(verts);
    }

    let mut dag: HashSet<(usize, usize)> = HashSet::new();
    for s in 0..n {
        for &(_, t) in &aut.edges[s] {
            let (a, b) = (component_of[s], component_of[t as usize]);
            if a != b {
                dag.insert((a, b));
            }
        }
    }
    let mut dag: Vec<(usize, usize)> = dag.into_iter().collect();
    dag.sort_unstable();

    let components = comps
        .into_iter()
        .map(|vertices| {
            let has_cycle = vertices.len() > 1
                || aut.edges[vertices[0]]
                    .iter()
                    .any(|&(_, t)| t as usize == vertices[0]);
            if !has_cycle {
                return Component { vertices, period: 0, classes: Vec::new(), trivial: true };
            }
            // Period: gcd over intra-component edges of level(u) + 1 - level(v),
            // where levels come from a BFS inside the component.
            let base = vertices[0];
            let mut level: HashMap<usize, i64> = HashMap::new();
            level.insert(base, 0);
            let mut queue = std::collections::VecDeque::from([base]);
            let inside: HashSet<usize> = vertices.iter().copied().collect();
            let mut g: i64 = 0;
            while let Some(u) = queue.pop_front() {
                for &(_, t) in &aut.edges[u] {
                    let t = t as usize;
                    if !inside.contains(&t) {
                        continue;
                    }
                    match level.get(&t) {
                        None => {
                            level.insert(t, level[&u] + 1);
                            queue.push_back(t);
                        }
                        Some(&lt) => {
                            g = gcd(g, (level[&u] + 1 - lt).abs());
                        }
                    }
                }
            }
            let period = if g == 0 { 1 } else { g as usize };
            let mut classes: Vec<Vec<usize>> = vec![Vec::new(); period];
            for &v in &vertices {
                let r = level[&v].rem_euclid(period as i64) as usize;
                classes[r].push(v);
            }
            Component { vertices, period, classes, trivial: false }
        })
        .collect();

    ComponentDecomposition { components, component_of, dag }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

// ---------------------------------------------------------------------------
// Perron eigenvalues and growth
// ---------------------------------------------------------------------------

/// Leading eigenvalue (and eigenvector) of a nonnegative matrix given as
/// edge weights restricted to `vertices`, by power iteration on M + I
/// (the shift makes periodic components converge).
pub fn perron_on_subset(
    states: usize,
    edges: impl Fn(usize, &mut dyn FnMut(usize, f64)),
    vertices: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut index = vec![usize::MAX; states];
    for (i, &v) in vertices.iter().enumerate() {
        index[v] = i;
    }
    let m = vertices.len();
    let mut v = vec![1.0f64; m];
    let mut lambda_prev = f64::NAN;
    for _ in 0..max_iter {
        let mut w = vec![0.0f64; m];
        for (i, &s) in vertices.iter().enumerate() {
            edges(s, &mut |t, weight| {
                if index[t] != usize::MAX {
                    w[index[t]] += weight * v[i];
                }
            });
        }
        // Shifted iteration: w <- w + v.
        for i in 0..m {
            w[i] += v[i];
        }
        let norm = w.iter().fold(0.0f64, |a, &x| a.max(x));
        if norm == 0.0 {
            return Ok((f64::NEG_INFINITY, v));
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let lambda = norm - 1.0;
        let delta = (lambda - lambda_prev).abs();
        let vdelta = w
            .iter()
            .zip(v.iter())
            .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs()));
        v = w;
        if delta < tol && vdelta < tol {
            return Ok((lambda, v));
        }
        lambda_prev = lambda;
    }
    Err(Error::NoConvergence("power iteration", lambda_prev))
}

/// Logarithmic volume growth: log of the Perron eigenvalue of the adjacency
/// matrix over the non-transient part of the automaton.
pub fn growth_rate(aut: &Automaton) -> Result<f64> {
    let decomp = scc_decompose(aut);
    let mut best = f64::NEG_INFINITY;
    for comp in &decomp.components {
        if comp.trivial {
            continue;
        }
        let (lambda, _) = perron_on_subset(
            aut.states,
            |s, f| {
                for &(_, t) in &aut.edges[s] {
                    f(t as usize, 1.0);
                }
            },
            &comp.vertices,
            1e-13,
            200_000,
        )?;
        best = best.max(lambda.ln());
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Precondition("automaton has no cycles: growth undefined".into()))
    }
}
