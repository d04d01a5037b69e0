use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

/// Wavenumber pair `(k, l)` on the angle × time torus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TorusIndex {
    pub k: Vec<i32>,
    pub l: i32,
}

impl TorusIndex {
    pub fn new(k: Vec<i32>, l: i32) -> Self {
        Self { k, l }
    }

    /// `|k| + |l|` with the l1 norm on `k`.
    pub fn order(&self) -> usize {
        self.k.iter().map(|v| v.unsigned_abs() as usize).sum::<usize>() + self.l.unsigned_abs() as usize
    }

    pub fn neg(&self) -> Self {
        Self {
            k: self.k.iter().map(|v| -v).collect(),
            l: -self.l,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.l == 0 && self.k.iter().all(|&v| v == 0)
    }

    /// `<k, omega> + l`.
    pub fn divisor(&self, omega: &[f64]) -> f64 {
        self.k
            .iter()
            .zip(omega)
            .map(|(&k, &w)| k as f64 * w)
            .sum::<f64>()
            + self.l as f64
    }
}

/// Mode set and action monomials shared by every field of the same shape.
///
/// Modes are all `(k, l)` with `|k| + |l| <= cutoff` (and `l = 0` when the
/// field carries no time dependence), sorted lexicographically in `(l, k)`.
/// Monomials are the exponent vectors `alpha` with `|alpha| <= q_y`, sorted
/// lexicographically.
#[derive(Debug)]
pub struct Layout {
    pub d: usize,
    pub time: bool,
    pub cutoff: usize,
    pub q_y: usize,
    pub modes: Vec<TorusIndex>,
    pub monomials: Vec<Vec<u32>>,
    pub(crate) k_flat: Vec<i32>,
    pub(crate) l: Vec<i32>,
    pub(crate) neg: Vec<usize>,
    lookup: HashMap<TorusIndex, usize>,
    mono_lookup: HashMap<Vec<u32>, usize>,
}

impl Layout {
    fn build(d: usize, time: bool, cutoff: usize, q_y: usize) -> Self {
        let n = cutoff as i32;
        let mut modes = Vec::new();
        let l_range = if time { -n..=n } else { 0..=0 };
        for l in l_range {
            let budget = cutoff - l.unsigned_abs() as usize;
            let mut ks = Vec::new();
            enumerate_l1_ball(d, budget as i32, &mut Vec::with_capacity(d), &mut ks);
            for k in ks {
                modes.push(TorusIndex { k, l });
            }
        }
        modes.sort_by(|a, b| (a.l, &a.k).cmp(&(b.l, &b.k)));
        let lookup: HashMap<TorusIndex, usize> =
            modes.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let neg = modes.iter().map(|m| lookup[&m.neg()]).collect();
        let k_flat = modes.iter().flat_map(|m| m.k.iter().copied()).collect();
        let l = modes.iter().map(|m| m.l).collect();

        let mut monomials = Vec::new();
        enumerate_monomials(d, q_y as u32, &mut Vec::with_capacity(d), &mut monomials);
        monomials.sort();
        let mono_lookup = monomials.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();

        Self {
            d,
            time,
            cutoff,
            q_y,
            modes,
            monomials,
            k_flat,
            l,
            neg,
            lookup,
            mono_lookup,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_monomials(&self) -> usize {
        self.monomials.len()
    }

    pub fn mode_index(&self, idx: &TorusIndex) -> Option<usize> {
        self.lookup.get(idx).copied()
    }

    pub fn monomial_index(&self, alpha: &[u32]) -> Option<usize> {
        self.mono_lookup.get(alpha).copied()
    }

    #[inline]
    pub(crate) fn k_of(&self, mode: usize) -> &[i32] {
        &self.k_flat[mode * self.d..(mode + 1) * self.d]
    }

    pub(crate) fn same_shape(&self, other: &Layout) -> bool {
        self.d == other.d && self.time == other.time && self.cutoff == other.cutoff && self.q_y == other.q_y
    }
}

fn enumerate_l1_ball(d: usize, budget: i32, prefix: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
    if prefix.len() == d {
        out.push(prefix.clone());
        return;
    }
    for v in -budget..=budget {
        prefix.push(v);
        enumerate_l1_ball(d, budget - v.abs(), prefix, out);
        prefix.pop();
    }
}

fn enumerate_monomials(d: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == d {
        out.push(prefix.clone());
        return;
    }
    for v in 0..=budget {
        prefix.push(v);
        enumerate_monomials(d, budget - v, prefix, out);
        prefix.pop();
    }
}

type LayoutKey = (usize, bool, usize, usize);

/// Shared layout for the given shape; layouts are built once per process.
pub fn layout(d: usize, time: bool, cutoff: usize, q_y: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<LayoutKey, Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, time, cutoff, q_y);
    if let Some(l) = cache.lock().expect("layout cache poisoned").get(&key) {
        return Arc::clone(l);
    }
    let built = Arc::new(Layout::build(d, time, cutoff, q_y));
    let mut guard = cache.lock().expect("layout cache poisoned");
    Arc::clone(guard.entry(key).or_insert(built))
}
