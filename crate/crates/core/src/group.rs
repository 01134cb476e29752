//! Concrete hyperbolic group models.
//!
//! A model is either "free-like" (a free product of cyclic factors, each of
//! finite or infinite order, which covers free groups and free products such
//! as Z2*Z3) or a generic confluent rewriting system. Elements are stored in
//! normal form; all word operations go through [`GroupModel::reduce`].
//!
//! Letter notation is compact: each generator is one ASCII lowercase letter,
//! its inverse is the corresponding uppercase letter, and an involution
//! (order-2 generator) is its own inverse and has no uppercase form. `"1"`
//! denotes the identity. So in F2 the word `aB` means a·b⁻¹.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

/// Index into the model's letter table.
pub type Letter = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Free product of cyclic factors (free groups included).
    FreeLike,
    /// User-supplied confluent rewriting system.
    Rewriting,
}

#[derive(Debug, Clone, Copy)]
pub struct Factor {
    pub sym: char,
    /// Cyclic order; 0 means infinite (a free factor).
    pub order: u32,
}

#[derive(Debug, Clone)]
pub struct LetterInfo {
    pub sym: char,
    /// Rendered symbol: lowercase for +1 direction, uppercase for -1.
    pub display: char,
    pub inv: Letter,
    pub factor: u16,
    /// +1 or -1 within the factor; involutions use +1.
    pub dir: i8,
}

#[derive(Debug)]
pub struct GroupModel {
    id: u64,
    kind: ModelKind,
    factors: Vec<Factor>,
    letters: Vec<LetterInfo>,
    by_display: HashMap<char, Letter>,
    delta: f64,
    rules: Vec<(Vec<Letter>, Vec<Letter>)>,
    confluence_depth: usize,
}

/// A group element in normal form, tagged with its model id so that
/// cross-model mixing is detected at run time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    model_id: u64,
    word: Vec<Letter>,
}

impl Element {
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.word
    }

    pub fn model_id(&self) -> u64 {
        self.model_id
    }

    pub fn last_letter(&self) -> Option<Letter> {
        self.word.last().copied()
    }

    pub fn first_letter(&self) -> Option<Letter> {
        self.word.first().copied()
    }
}

impl GroupModel {
    /// Free group of the given rank with generators a, b, c, ...
    pub fn free(rank: usize) -> Result<GroupModel> {
        assert!(rank >= 1 && rank <= 24, "free rank out of range");
        let factors: Vec<Factor> = (0..rank)
            .map(|i| Factor { sym: (b'a' + i as u8) as char, order: 0 })
            .collect();
        Self::free_like(ModelKind::FreeLike, &factors, 0.0)
    }

    /// Free product of cyclic factors, e.g. `[('s', 2), ('t', 3)]` for Z2*Z3.
    /// Order 0 denotes an infinite (free) factor.
    pub fn free_product(factors: &[(char, u32)]) -> Result<GroupModel> {
        let fs: Vec<Factor> = factors
            .iter()
            .map(|&(sym, order)| Factor { sym, order })
            .collect();
        Self::free_like(ModelKind::FreeLike, &fs, 0.0)
    }

    fn free_like(kind: ModelKind, factors: &[Factor], delta: f64) -> Result<GroupModel> {
        let mut letters = Vec::new();
        let mut by_display = HashMap::new();
        for (fi, f) in factors.iter().enumerate() {
            if !f.sym.is_ascii_lowercase() {
                return Err(Error::Precondition(format!(
                    "generator symbol {:?} must be an ASCII lowercase letter",
                    f.sym
                )));
            }
            if f.order == 1 {
                return Err(Error::Precondition(format!(
                    "factor {:?} has order 1 (trivial factor)",
                    f.sym
                )));
            }
            let plus = letters.len() as Letter;
            if f.order == 2 {
                letters.push(LetterInfo {
                    sym: f.sym,
                    display: f.sym,
                    inv: plus,
                    factor: fi as u16,
                    dir: 1,
                });
                if by_display.insert(f.sym, plus).is_some() {
                    return Err(Error::Precondition(format!("duplicate generator {:?}", f.sym)));
                }
            } else {
                let minus = plus + 1;
                letters.push(LetterInfo {
                    sym: f.sym,
                    display: f.sym,
                    inv: minus,
                    factor: fi as u16,
                    dir: 1,
                });
                letters.push(LetterInfo {
                    sym: f.sym,
                    display: f.sym.to_ascii_uppercase(),
                    inv: plus,
                    factor: fi as u16,
                    dir: -1,
                });
                if by_display.insert(f.sym, plus).is_some()
                    || by_display.insert(f.sym.to_ascii_uppercase(), minus).is_some()
                {
                    return Err(Error::Precondition(format!("duplicate generator {:?}", f.sym)));
                }
            }
        }
        if letters.is_empty() {
            return Err(Error::Precondition("model has no generators".into()));
        }
        Ok(GroupModel {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            kind,
            factors: factors.to_vec(),
            letters,
            by_display,
            delta,
            rules: Vec::new(),
            confluence_depth: 6,
        })
    }

    /// Generic model from letter pairs and shortlex-reducing rewriting rules.
    /// Inverse-cancellation rules are added automatically.
    pub fn rewriting(
        pairs: &[(char, char)],
        rules: &[(&str, &str)],
        delta: f64,
        confluence_depth: usize,
    ) -> Result<GroupModel> {
        let mut letters: Vec<LetterInfo> = Vec::new();
        let mut by_display: HashMap<char, Letter> = HashMap::new();
        for &(sym, inv_sym) in pairs {
            let id = letters.len() as Letter;
            if sym == inv_sym {
                letters.push(LetterInfo { sym, display: sym, inv: id, factor: 0, dir: 1 });
                if by_display.insert(sym, id).is_some() {
                    return Err(Error::Precondition(format!("duplicate letter {sym:?}")));
                }
            } else {
                letters.push(LetterInfo { sym, display: sym, inv: id + 1, factor: 0, dir: 1 });
                letters.push(LetterInfo { sym, display: inv_sym, inv: id, factor: 0, dir: -1 });
                if by_display.insert(sym, id).is_some()
                    || by_display.insert(inv_sym, id + 1).is_some()
                {
                    return Err(Error::Precondition(format!("duplicate letter {sym:?}")));
                }
            }
        }
        let mut model = GroupModel {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            kind: ModelKind::Rewriting,
            factors: Vec::new(),
            letters,
            by_display,
            delta,
            rules: Vec::new(),
            confluence_depth,
        };
        let mut all_rules: Vec<(Vec<Letter>, Vec<Letter>)> = Vec::new();
        for l in 0..model.letters.len() as Letter {
            let inv = model.letters[l as usize].inv;
            all_rules.push((vec![l, inv], vec![]));
        }
        for &(lhs, rhs) in rules {
            let l = model.parse_letters(lhs)?;
            let r = model.parse_letters(rhs)?;
            if r.len() > l.len() || (r.len() == l.len() && r >= l) {
                return Err(Error::Precondition(format!(
                    "rule {lhs:?} -> {rhs:?} is not shortlex-reducing"
                )));
            }
            all_rules.push((l, r));
        }
        all_rules.sort();
        all_rules.dedup();
        model.rules = all_rules;
        model.check_confluence()?;
        Ok(model)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn letters(&self) -> &[LetterInfo] {
        &self.letters
    }

    pub fn letter_count(&self) -> usize {
        self.letters.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn inverse_letter(&self, l: Letter) -> Letter {
        self.letters[l as usize].inv
    }

    pub fn is_tree_like(&self) -> bool {
        self.kind == ModelKind::FreeLike
    }

    pub fn is_free(&self) -> bool {
        self.kind == ModelKind::FreeLike && self.factors.iter().all(|f| f.order == 0)
    }

    /// True when every normal-form syllable consists of a single letter
    /// (free groups and free products of factors of order at most 3).
    /// Several exact boundary computations rely on this.
    pub fn single_letter_syllables(&self) -> bool {
        self.kind == ModelKind::FreeLike && self.factors.iter().all(|f| f.order <= 3)
    }

    /// Maximal number of consecutive repetitions of a letter in normal form.
    /// `u32::MAX` for letters of infinite-order factors.
    pub fn syllable_cap(&self, l: Letter) -> u32 {
        match self.kind {
            ModelKind::Rewriting => u32::MAX,
            ModelKind::FreeLike => {
                let info = &self.letters[l as usize];
                let order = self.factors[info.factor as usize].order;
                if order == 0 {
                    u32::MAX
                } else if info.dir > 0 {
                    order / 2
                } else {
                    (order - 1) / 2
                }
            }
        }
    }

    /// Whether letter `next` may follow a (maximal) run of `run_len` copies of
    /// `last` in a normal form word. Free-like models only.
    pub fn can_follow(&self, last: Letter, run_len: u32, next: Letter) -> bool {
        debug_assert_eq!(self.kind, ModelKind::FreeLike);
        let a = &self.letters[last as usize];
        let b = &self.letters[next as usize];
        if a.factor != b.factor {
            return true;
        }
        // Same factor: only a continuation of the same run is ever reduced,
        // and only while the syllable cap allows it.
        last == next && run_len < self.syllable_cap(last)
    }

    /// Identity element.
    pub fn identity(&self) -> Element {
        Element { model_id: self.id, word: Vec::new() }
    }

    /// Normal form of an arbitrary letter sequence.
    pub fn reduce(&self, word: &[Letter]) -> Element {
        let word = match self.kind {
            ModelKind::FreeLike => self.reduce_free_like(word),
            ModelKind::Rewriting => self.reduce_rewriting(word.to_vec()),
        };
        Element { model_id: self.id, word }
    }

    fn reduce_free_like(&self, word: &[Letter]) -> Vec<Letter> {
        // Syllable stack: (factor, signed exponent).
        let mut stack: Vec<(u16, i64)> = Vec::new();
        for &l in word {
            let info = &self.letters[l as usize];
            let delta = info.dir as i64;
            let order = self.factors[info.factor as usize].order as i64;
            match stack.last_mut() {
                Some((f, e)) if *f == info.factor => {
                    *e += delta;
                    if order > 0 {
                        *e = e.rem_euclid(order);
                    }
                    if *e == 0 {
                        stack.pop();
                    }
                }
                _ => {
                    let mut e = delta;
                    if order > 0 {
                        e = e.rem_euclid(order);
                    }
                    if e != 0 {
                        stack.push((info.factor, e));
                    }
                }
            }
        }
        let mut out = Vec::new();
        for (f, e) in stack {
            let order = self.factors[f as usize].order as i64;
            let plus = self.plus_letter(f);
            if order == 0 {
                let l = if e > 0 { plus } else { self.letters[plus as usize].inv };
                for _ in 0..e.abs() {
                    out.push(l);
                }
            } else {
                // Exponent in 1..order; pick the shorter direction, ties to +.
                debug_assert!(e > 0 && e < order);
                if 2 * e <= order {
                    for _ in 0..e {
                        out.push(plus);
                    }
                } else {
                    let minus = self.letters[plus as usize].inv;
                    for _ in 0..(order - e) {
                        out.push(minus);
                    }
                }
            }
        }
        out
    }

    fn plus_letter(&self, factor: u16) -> Letter {
        self.letters
            .iter()
            .position(|li| li.factor == factor && li.dir > 0)
            .expect("factor has a +1 letter") as Letter
    }

    fn reduce_rewriting(&self, mut word: Vec<Letter>) -> Vec<Letter> {
        'outer: loop {
            for (lhs, rhs) in &self.rules {
                if lhs.len() > word.len() {
                    continue;
                }
                for i in 0..=(word.len() - lhs.len()) {
                    if &word[i..i + lhs.len()] == lhs.as_slice() {
                        let mut next = Vec::with_capacity(word.len());
                        next.extend_from_slice(&word[..i]);
                        next.extend_from_slice(rhs);
                        next.extend_from_slice(&word[i + lhs.len()..]);
                        word = next;
                        continue 'outer;
                    }
                }
            }
            return word;
        }
    }

    /// Critical-pair confluence check, up to the configured overlap length.
    pub fn check_confluence(&self) -> Result<()> {
        if self.kind != ModelKind::Rewriting {
            return Ok(());
        }
        for (l1, r1) in &self.rules {
            for (l2, r2) in &self.rules {
                // Overlap: a suffix of l1 equals a prefix of l2 (a full
                // overlap catches two rules sharing a left-hand side).
                for o in 1..=l1.len().min(l2.len()) {
                    if l1[l1.len() - o..] == l2[..o] {
                        let mut word = l1.clone();
                        word.extend_from_slice(&l2[o..]);
                        if word.len() > self.confluence_depth + l1.len() {
                            continue;
                        }
                        // Resolve via rule 1 and via rule 2, then normalize.
                        let mut via1 = r1.clone();
                        via1.extend_from_slice(&l2[o..]);
                        let mut via2 = word[..l1.len() - o].to_vec();
                        via2.extend_from_slice(r2);
                        let n1 = self.reduce_rewriting(via1);
                        let n2 = self.reduce_rewriting(via2);
                        if n1 != n2 {
                            return Err(Error::NotConfluent {
                                word: self.render_letters(&word),
                                left: self.render_letters(&n1),
                                right: self.render_letters(&n2),
                            });
                        }
                    }
                }
                // Containment: l2 strictly inside l1.
                if l2.len() < l1.len() {
                    for i in 0..=(l1.len() - l2.len()) {
                        if &l1[i..i + l2.len()] == l2.as_slice() {
                            let mut via2 = l1[..i].to_vec();
                            via2.extend_from_slice(r2);
                            via2.extend_from_slice(&l1[i + l2.len()..]);
                            let n1 = self.reduce_rewriting(r1.clone());
                            let n2 = self.reduce_rewriting(via2);
                            if n1 != n2 {
                                return Err(Error::NotConfluent {
                                    word: self.render_letters(l1),
                                    left: self.render_letters(&n1),
                                    right: self.render_letters(&n2),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse a compact word like `"aB"`; `"1"` or `""` is the identity.
    pub fn parse_word(&self, s: &str) -> Result<Element> {
        Ok(self.reduce(&self.parse_letters(s)?))
    }

    pub(crate) fn parse_letters(&self, s: &str) -> Result<Vec<Letter>> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(Vec::new());
        }
        s.chars()
            .map(|c| {
                self.by_display
                    .get(&c)
                    .copied()
                    .ok_or_else(|| Error::UnknownLetter(c.to_string()))
            })
            .collect()
    }

    pub fn render(&self, x: &Element) -> String {
        self.render_letters(&x.word)
    }

    fn render_letters(&self, w: &[Letter]) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.iter().map(|&l| self.letters[l as usize].display).collect()
    }

    fn check_model(&self, x: &Element) -> Result<()> {
        if x.model_id != self.id {
            return Err(Error::ModelMismatch);
        }
        Ok(())
    }

    /// Group multiplication (normal form of the concatenation).
    pub fn mul(&self, x: &Element, y: &Element) -> Result<Element> {
        self.check_model(x)?;
        self.check_model(y)?;
        let mut w = x.word.clone();
        w.extend_from_slice(&y.word);
        Ok(self.reduce(&w))
    }

    /// Right-multiply by a single letter.
    pub fn mul_letter(&self, x: &Element, l: Letter) -> Element {
        let mut w = x.word.clone();
        w.push(l);
        self.reduce(&w)
    }

    pub fn inverse(&self, x: &Element) -> Result<Element> {
        self.check_model(x)?;
        let w: Vec<Letter> = x
            .word
            .iter()
            .rev()
            .map(|&l| self.letters[l as usize].inv)
            .collect();
        Ok(self.reduce(&w))
    }

    /// Word metric d(x, y) = |x^{-1} y|.
    pub fn distance(&self, x: &Element, y: &Element) -> Result<usize> {
        self.check_model(x)?;
        self.check_model(y)?;
        let mut w: Vec<Letter> = x
            .word
            .iter()
            .rev()
            .map(|&l| self.letters[l as usize].inv)
            .collect();
        w.extend_from_slice(&y.word);
        Ok(self.reduce(&w).len())
    }

    /// Twice the Gromov product (x|y) based at the identity; exact integer.
    pub fn gromov_product_doubled(&self, x: &Element, y: &Element) -> Result<i64> {
        let d = self.distance(x, y)? as i64;
        Ok(x.len() as i64 + y.len() as i64 - d)
    }

    /// Gromov product (x|y) at the identity (a half-integer).
    pub fn gromov_product(&self, x: &Element, y: &Element) -> Result<f64> {
        Ok(self.gromov_product_doubled(x, y)? as f64 / 2.0)
    }

    /// The canonical geodesic from the identity to `x`: normal-form prefixes.
    pub fn geodesic_prefixes(&self, x: &Element) -> Result<Vec<Element>> {
        self.check_model(x)?;
        let mut out = Vec::with_capacity(x.len() + 1);
        for i in 0..=x.len() {
            out.push(Element { model_id: self.id, word: x.word[..i].to_vec() });
        }
        Ok(out)
    }

    /// Finite-stage Busemann approximant `d(g, ray[n]) - |ray[n]|`.
    pub fn busemann_along(&self, ray: &[Element], g: &Element, n: usize) -> Result<i64> {
        if n >= ray.len() {
            return Err(Error::Precondition(format!(
                "busemann index {n} out of range (ray length {})",
                ray.len()
            )));
        }
        let d = self.distance(g, &ray[n])? as i64;
        Ok(d - ray[n].len() as i64)
    }
}

/// A shadow S(x, R): boundary directions whose geodesics from the identity
/// pass within R of x, realized by the Gromov-product cone criterion
/// (x|y) >= |x| - R. Exact cones on trees with R = 0.
#[derive(Debug, Clone)]
pub struct ShadowSpec {
    pub apex: Element,
    pub radius: u32,
}

impl ShadowSpec {
    pub fn new(model: &GroupModel, apex: Element, radius: u32) -> Result<ShadowSpec> {
        if (radius as f64) < 4.0 * model.delta() {
            return Err(Error::Precondition(format!(
                "shadow radius {radius} below 4*delta = {}",
                4.0 * model.delta()
            )));
        }
        Ok(ShadowSpec { apex, radius })
    }

    /// Whether `y` lies in the cone proxy of this shadow. Requires |y| >= |apex|.
    pub fn contains(&self, model: &GroupModel, y: &Element) -> Result<bool> {
        if y.len() < self.apex.len() {
            return Err(Error::Precondition(format!(
                "shadow_contains needs |y| >= |apex| (got {} < {})",
                y.len(),
                self.apex.len()
            )));
        }
        let doubled = model.gromov_product_doubled(&self.apex, y)?;
        Ok(doubled >= 2 * self.apex.len() as i64 - 2 * self.radius as i64)
    }
}

impl fmt::Display for ShadowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S(|x|={}, R={})", self.apex.len(), self.radius)
    }
}

/// Exact sphere enumeration, grouped by word length.
pub fn spheres(model: &GroupModel, n: usize, budget: usize) -> Result<Vec<Vec<Element>>> {
    let mut out: Vec<Vec<Element>> = vec![Vec::new(); n + 1];
    out[0].push(model.identity());
    let mut total = 1usize;
    match model.kind() {
        ModelKind::FreeLike => {
            // Depth-first over normal forms via the follow rule.
            let mut word: Vec<Letter> = Vec::new();
            let mut run = 0u32;
            dfs_normal_forms(model, &mut word, &mut run, n, budget, &mut total, &mut out)?;
            for sphere in out.iter_mut() {
                sphere.sort();
            }
        }
        ModelKind::Rewriting => {
            let mut seen: HashSet<Vec<Letter>> = HashSet::new();
            seen.insert(Vec::new());
            let mut frontier: Vec<Vec<Letter>> = vec![Vec::new()];
            for k in 1..=n {
                let mut next: Vec<Vec<Letter>> = Vec::new();
                for w in &frontier {
                    for l in 0..model.letter_count() as Letter {
                        let mut ww = w.clone();
                        ww.push(l);
                        let red = model.reduce(&ww);
                        if red.len() == k && seen.insert(red.word.clone()) {
                            total += 1;
                            if total > budget {
                                return Err(Error::BudgetExceeded(format!(
                                    "ball enumeration exceeded {budget} elements"
                                )));
                            }
                            next.push(red.word.clone());
                            out[k].push(red);
                        }
                    }
                }
                next.sort();
                out[k].sort();
                frontier = next;
            }
        }
    }
    Ok(out)
}

fn dfs_normal_forms(
    model: &GroupModel,
    word: &mut Vec<Letter>,
    run: &mut u32,
    n: usize,
    budget: usize,
    total: &mut usize,
    out: &mut [Vec<Element>],
) -> Result<()> {
    if word.len() == n {
        return Ok(());
    }
    let last = word.last().copied();
    for l in 0..model.letter_count() as Letter {
        let ok = match last {
            None => true,
            Some(prev) => model.can_follow(prev, *run, l),
        };
        if !ok {
            continue;
        }
        let new_run = if last == Some(l) { *run + 1 } else { 1 };
        word.push(l);
        *total += 1;
        if *total > budget {
            return Err(Error::BudgetExceeded(format!(
                "ball enumeration exceeded {budget} elements"
            )));
        }
        out[word.len()].push(Element { model_id: model.id(), word: word.clone() });
        let saved = *run;
        *run = new_run;
        dfs_normal_forms(model, word, run, n, budget, total, out)?;
        *run = saved;
        word.pop();
    }
    Ok(())
}

/// Streaming variant of [`spheres`]: calls `f(depth, letters)` for every
/// normal form of length 1..=n, in depth-first order. Free-like models only.
pub fn for_each_normal_form(
    model: &GroupModel,
    n: usize,
    mut f: impl FnMut(&[Letter]),
) -> Result<()> {
    if model.kind() != ModelKind::FreeLike {
        return Err(Error::Precondition(
            "streaming enumeration requires a free-like model".into(),
        ));
    }
    let mut word = Vec::new();
    stream_dfs(model, &mut word, 0, n, &mut f);
    Ok(())
}

fn stream_dfs(
    model: &GroupModel,
    word: &mut Vec<Letter>,
    run: u32,
    n: usize,
    f: &mut impl FnMut(&[Letter]),
) {
    if word.len() == n {
        return;
    }
    let last = word.last().copied();
    for l in 0..model.letter_count() as Letter {
        let ok = match last {
            None => true,
            Some(prev) => model.can_follow(prev, run, l),
        };
        if !ok {
            continue;
        }
        let new_run = if last == Some(l) { run + 1 } else { 1 };
        word.push(l);
        f(word);
        stream_dfs(model, word, new_run, n, f);
        word.pop();
    }
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

/// Parse a model file. Line-oriented:
///
/// ```text
/// kind free | free-product | rewriting
/// factor <char> <order>        # free-like kinds; order 0 = infinite
/// gen <char> <char>            # rewriting: letter and its inverse letter
/// rule <lhs> <rhs>             # rewriting: shortlex-reducing, "1" = empty
/// delta <float>                # optional hyperbolicity constant
/// confluence-depth <int>       # optional, default 6
/// ```
pub fn parse_model(text: &str, path: &str) -> Result<GroupModel> {
    let mut kind: Option<&str> = None;
    let mut factors: Vec<Factor> = Vec::new();
    let mut pairs: Vec<(char, char)> = Vec::new();
    let mut rules: Vec<(String, String)> = Vec::new();
    let mut delta = 0.0f64;
    let mut confluence_depth = 6usize;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap();
        let args: Vec<&str> = it.collect();
        match key {
            "kind" => {
                if args.len() != 1 {
                    return Err(Error::parse(path, lineno, "kind takes one argument"));
                }
                kind = Some(match args[0] {
                    "free" => "free",
                    "free-product" | "free_product" => "free-product",
                    "rewriting" | "generic" => "rewriting",
                    other => {
                        return Err(Error::parse(path, lineno, format!("unknown kind {other:?}")))
                    }
                });
            }
            "factor" => {
                if args.len() != 2 || args[0].chars().count() != 1 {
                    return Err(Error::parse(path, lineno, "expected: factor <char> <order>"));
                }
                let sym = args[0].chars().next().unwrap();
                let order: u32 = args[1].parse().map_err(|_| {
                    Error::parse(path, lineno, format!("bad order {:?}", args[1]))
                })?;
                factors.push(Factor { sym, order });
            }
            "gen" => {
                if args.len() != 2 || args[0].chars().count() != 1 || args[1].chars().count() != 1 {
                    return Err(Error::parse(path, lineno, "expected: gen <char> <char>"));
                }
                pairs.push((args[0].chars().next().unwrap(), args[1].chars().next().unwrap()));
            }
            "rule" => {
                if args.len() != 2 {
                    return Err(Error::parse(path, lineno, "expected: rule <lhs> <rhs>"));
                }
                rules.push((args[0].to_string(), args[1].to_string()));
            }
            "delta" => {
                delta = args
                    .first()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "bad delta"))?;
            }
            "confluence-depth" => {
                confluence_depth = args
                    .first()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "bad confluence-depth"))?;
            }
            other => {
                return Err(Error::parse(path, lineno, format!("unknown directive {other:?}")));
            }
        }
    }

    match kind {
        Some("free") => {
            if factors.is_empty() || factors.iter().any(|f| f.order != 0) {
                return Err(Error::parse(path, 0, "kind free requires factors of order 0"));
            }
            let mut m = GroupModel::free_like(ModelKind::FreeLike, &factors, delta)?;
            m.confluence_depth = confluence_depth;
            Ok(m)
        }
        Some("free-product") => {
            if factors.is_empty() {
                return Err(Error::parse(path, 0, "kind free-product requires factor lines"));
            }
            let mut m = GroupModel::free_like(ModelKind::FreeLike, &factors, delta)?;
            m.confluence_depth = confluence_depth;
            Ok(m)
        }
        Some("rewriting") => {
            if pairs.is_empty() {
                return Err(Error::parse(path, 0, "kind rewriting requires gen lines"));
            }
            let rule_refs: Vec<(&str, &str)> =
                rules.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            GroupModel::rewriting(&pairs, &rule_refs, delta, confluence_depth)
        }
        _ => Err(Error::parse(path, 0, "missing kind directive")),
    }
}

pub fn load_model(path: &str) -> Result<GroupModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupModel {
        GroupModel::free(2).unwrap()
    }

    fn z2z3() -> GroupModel {
        GroupModel::free_product(&[('s', 2), ('t', 3)]).unwrap()
    }

    #[test]
    fn reduce_inverse_cancellation() {
        let m = f2();
        let x = m.parse_word("aA").unwrap();
        assert!(x.is_identity());
        let y = m.parse_word("abBa").unwrap();
        assert_eq!(m.render(&y), "aa");
    }

    #[test]
    fn reduce_factor_relation() {
        let m = z2z3();
        assert!(m.parse_word("ss").unwrap().is_identity());
        // t^2 = t^{-1} in Z3.
        assert_eq!(m.render(&m.parse_word("tt").unwrap()), "T");
        assert_eq!(m.render(&m.parse_word("TT").unwrap()), "t");
        assert!(m.parse_word("ttt").unwrap().is_identity());
    }

    #[test]
    fn reduce_idempotent_on_random_words() {
        let m = f2();
        let mut rng = crate::rng::Rng::new(11);
        for _ in 0..200 {
            let len = rng.next_below(12);
            let w: Vec<Letter> = (0..len).map(|_| rng.next_below(4) as Letter).collect();
            let once = m.reduce(&w);
            let twice = m.reduce(once.letters());
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn w_times_w_inverse_is_identity() {
        for m in [f2(), z2z3()] {
            let mut rng = crate::rng::Rng::new(5);
            let k = m.letter_count();
            for _ in 0..200 {
                let len = rng.next_below(10);
                let w: Vec<Letter> = (0..len).map(|_| rng.next_below(k) as Letter).collect();
                let x = m.reduce(&w);
                let xi = m.inverse(&x).unwrap();
                assert!(m.mul(&x, &xi).unwrap().is_identity());
            }
        }
    }

    #[test]
    fn distances() {
        let m = f2();
        let x = m.parse_word("ab").unwrap();
        assert_eq!(m.distance(&x, &x).unwrap(), 0);
        assert_eq!(m.distance(&m.identity(), &x).unwrap(), 2);
        // d(ab, aB): reduce(B A a B) -> B B.
        let y = m.parse_word("aB").unwrap();
        assert_eq!(m.distance(&x, &y).unwrap(), 2);
    }

    #[test]
    fn distance_matches_bfs_oracle() {
        // Independent oracle: BFS in the Cayley ball.
        let m = z2z3();
        let sph = spheres(&m, 4, 100_000).unwrap();
        for (k, layer) in sph.iter().enumerate() {
            for x in layer {
                assert_eq!(x.len(), k);
                assert_eq!(m.distance(&m.identity(), x).unwrap(), k);
            }
        }
    }

    #[test]
    fn gromov_products() {
        let m = f2();
        let x = m.parse_word("ab").unwrap();
        assert_eq!(m.gromov_product(&x, &x).unwrap(), 2.0);
        let y = m.parse_word("aB").unwrap();
        assert_eq!(m.gromov_product(&x, &y).unwrap(), 1.0);
        let z = m.parse_word("ba").unwrap();
        assert_eq!(m.gromov_product(&x, &z).unwrap(), 0.0);
    }

    #[test]
    fn tree_hyperbolicity_four_point() {
        // On trees (x|y) >= min((x|z), (y|z)) exactly.
        let m = f2();
        let mut rng = crate::rng::Rng::new(3);
        let sph = spheres(&m, 5, 100_000).unwrap();
        let all: Vec<&Element> = sph.iter().flatten().collect();
        for _ in 0..500 {
            let x = all[rng.next_below(all.len())];
            let y = all[rng.next_below(all.len())];
            let z = all[rng.next_below(all.len())];
            let xy = m.gromov_product_doubled(x, y).unwrap();
            let xz = m.gromov_product_doubled(x, z).unwrap();
            let yz = m.gromov_product_doubled(y, z).unwrap();
            assert!(xy >= xz.min(yz));
        }
    }

    #[test]
    fn triangle_inequality_random_triples() {
        let m = z2z3();
        let sph = spheres(&m, 5, 100_000).unwrap();
        let all: Vec<&Element> = sph.iter().flatten().collect();
        let mut rng = crate::rng::Rng::new(9);
        for _ in 0..500 {
            let x = all[rng.next_below(all.len())];
            let y = all[rng.next_below(all.len())];
            let z = all[rng.next_below(all.len())];
            let dxz = m.distance(x, z).unwrap();
            let dxy = m.distance(x, y).unwrap();
            let dyz = m.distance(y, z).unwrap();
            assert!(dxz <= dxy + dyz);
        }
    }

    #[test]
    fn geodesic_prefix_structure() {
        let m = z2z3();
        let x = m.parse_word("st").unwrap();
        let g = m.geodesic_prefixes(&x).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g[0].is_identity());
        assert_eq!(m.render(&g[1]), "s");
        assert_eq!(m.render(&g[2]), "st");
        for (i, p) in g.iter().enumerate() {
            assert_eq!(p.len(), i);
        }
        for w in g.windows(2) {
            assert_eq!(m.distance(&w[0], &w[1]).unwrap(), 1);
        }
    }

    #[test]
    fn shadow_prefix_on_tree() {
        let m = f2();
        let a = m.parse_word("a").unwrap();
        let spec = ShadowSpec::new(&m, a, 0).unwrap();
        assert!(spec.contains(&m, &m.parse_word("ab").unwrap()).unwrap());
        assert!(!spec.contains(&m, &m.parse_word("ba").unwrap()).unwrap());
        let ab = m.parse_word("ab").unwrap();
        let spec2 = ShadowSpec::new(&m, ab, 1).unwrap();
        assert!(spec2.contains(&m, &m.parse_word("aa").unwrap()).unwrap());
        let short = m.parse_word("a").unwrap();
        assert!(spec2.contains(&m, &short).is_err());
    }

    #[test]
    fn busemann_examples() {
        let m = f2();
        let ray: Vec<Element> = (0..=5)
            .map(|k| m.parse_word(&"a".repeat(k)).unwrap())
            .collect();
        // g = 1.
        for n in 0..5 {
            assert_eq!(m.busemann_along(&ray, &m.identity(), n).unwrap(), 0);
        }
        let a = m.parse_word("a").unwrap();
        assert_eq!(m.busemann_along(&ray, &a, 3).unwrap(), -1);
        let b = m.parse_word("b").unwrap();
        assert_eq!(m.busemann_along(&ray, &b, 3).unwrap(), 1);
        assert!(m.busemann_along(&ray, &b, 9).is_err());
    }

    #[test]
    fn sphere_sizes_f2() {
        let m = f2();
        let sph = spheres(&m, 3, 100_000).unwrap();
        assert_eq!(sph[0].len(), 1);
        assert_eq!(sph[1].len(), 4);
        assert_eq!(sph[2].len(), 12);
        // |S_n| = 4 * 3^(n-1).
        assert_eq!(sph[3].len(), 36);
    }

    #[test]
    fn sphere_sizes_z2z3() {
        let m = z2z3();
        let sph = spheres(&m, 3, 100_000).unwrap();
        assert_eq!(sph[1].len(), 3);
        // Brute-force oracle says S_2 = {st, sT, ts, Ts}.
        let mut words: Vec<String> = sph[2].iter().map(|x| m.render(x)).collect();
        words.sort();
        assert_eq!(words, vec!["Ts", "sT", "st", "ts"]);
        assert_eq!(sph[3].len(), 6);
    }

    #[test]
    fn budget_exceeded() {
        let m = f2();
        assert!(matches!(
            spheres(&m, 10, 100),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn mixed_model_error() {
        let m1 = f2();
        let m2 = f2();
        let x = m1.parse_word("a").unwrap();
        let y = m2.parse_word("a").unwrap();
        assert!(matches!(m1.distance(&x, &y), Err(Error::ModelMismatch)));
    }

    #[test]
    fn unknown_letter() {
        let m = f2();
        assert!(matches!(m.parse_word("ax"), Err(Error::UnknownLetter(_))));
    }

    #[test]
    fn model_file_roundtrip() {
        let text = "kind free-product\nfactor s 2\nfactor t 3\ndelta 0\n";
        let m = parse_model(text, "inline").unwrap();
        assert_eq!(m.letter_count(), 3);
        assert_eq!(m.render(&m.parse_word("tt").unwrap()), "T");
    }

    #[test]
    fn model_file_errors_carry_line_numbers() {
        let text = "kind free\nfactor a 0\nbogus x\n";
        match parse_model(text, "m.model") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rewriting_model_z2z3_presentation() {
        // Z2 * Z3 presented by rules instead of the built-in normal form.
        let m = GroupModel::rewriting(
            &[('s', 's'), ('t', 'T')],
            &[("ss", "1"), ("tt", "T"), ("TT", "t")],
            0.0,
            8,
        )
        .unwrap();
        assert_eq!(m.render(&m.parse_word("tt").unwrap()), "T");
        assert!(m.parse_word("stst").unwrap().len() == 4);
        let sph = spheres(&m, 3, 10_000).unwrap();
        assert_eq!(sph[2].len(), 4);
        assert_eq!(sph[3].len(), 6);
    }

    #[test]
    fn non_confluent_rules_detected() {
        // ab -> 1 and ba -> a overlap at "aba" and disagree.
        let err = GroupModel::rewriting(
            &[('a', 'A'), ('b', 'B')],
            &[("ab", "1"), ("ba", "a")],
            0.0,
            8,
        );
        assert!(matches!(err, Err(Error::NotConfluent { .. })));
    }
}
