//! Chords: strings of elements linked through opposite sides.
//!
//! Direction 0 of an element is ξ (it subdivides sides 0 and 2), direction 1
//! is η (sides 1 and 3). Two elements sharing a side share the direction
//! that subdivides it, so one count per chord keeps the mesh conforming.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mesh::QuadMesh;
use super::QuadError;

/// User override for the chord through `direction` of element `block`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordPin {
    pub block: usize,
    pub direction: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Ratio between successive sub-intervals along the pinned direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chords {
    /// Chord id and orientation flip of each (element, direction).
    pub of: Vec<[(usize, bool); 2]>,
    /// Members (element, direction, flipped) of each chord.
    pub members: Vec<Vec<(usize, usize, bool)>>,
    pub counts: Vec<usize>,
    /// Grading ratio in the chord's reference orientation.
    pub grading: Vec<f64>,
}

struct Dsu {
    parent: Vec<usize>,
    parity: Vec<bool>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), parity: vec![false; n] }
    }

    fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (r, pp) = self.find(p);
        self.parent[x] = r;
        self.parity[x] ^= pp;
        (r, self.parity[x])
    }

    fn union(&mut self, a: usize, b: usize, flip: bool) {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            if pa ^ pb != flip {
                log::warn!("chord through {a} and {b} is a Möbius strip; orientation is inconsistent");
            }
            return;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        self.parity[hi] = pa ^ pb ^ flip;
    }
}

/// Whether the side parameter runs with the element coordinate.
fn forward(side: usize) -> bool {
    side < 2
}

/// Element sides paired through shared node ids.
pub(crate) fn side_pairs(mesh: &QuadMesh) -> (Vec<((usize, usize), (usize, usize))>, Vec<(usize, usize)>) {
    let mut by_key: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
    for e in 0..mesh.n_elements() {
        for s in 0..4 {
            let mut key = mesh.side_nodes(e, s);
            key.sort_unstable();
            by_key.entry(key).or_default().push((e, s));
        }
    }
    let mut pairs = Vec::new();
    let mut lone = Vec::new();
    for users in by_key.into_values() {
        match users.as_slice() {
            [a, b] if mesh.side_nodes(a.0, a.1).iter().rev().eq(mesh.side_nodes(b.0, b.1).iter()) => {
                pairs.push((*a, *b))
            }
            _ => lone.extend(users),
        }
    }
    (pairs, lone)
}

impl Chords {
    /// Chords of `mesh` with every count set to `default` and no grading,
    /// then `pins` applied.
    pub fn build(mesh: &QuadMesh, default: usize, pins: &[ChordPin]) -> Result<Self, QuadError> {
        if default == 0 {
            return Err(QuadError::BadCount(0));
        }
        let n = mesh.n_elements();
        let mut dsu = Dsu::new(2 * n);
        let (pairs, _) = side_pairs(mesh);
        for ((a, sa), (b, sb)) in pairs {
            let flip = forward(sa) == forward(sb);
            dsu.union(2 * a + sa % 2, 2 * b + sb % 2, flip);
        }
        let mut ids = BTreeMap::new();
        let mut of = vec![[(0, false); 2]; n];
        let mut members: Vec<Vec<(usize, usize, bool)>> = Vec::new();
        for e in 0..n {
            for d in 0..2 {
                let (root, flip) = dsu.find(2 * e + d);
                let id = *ids.entry(root).or_insert_with(|| {
                    members.push(Vec::new());
                    members.len() - 1
                });
                of[e][d] = (id, flip);
                members[id].push((e, d, flip));
            }
        }
        let k = members.len();
        let mut chords = Self { of, members, counts: vec![default; k], grading: vec![1.0; k] };
        chords.apply(pins)?;
        Ok(chords)
    }

    fn apply(&mut self, pins: &[ChordPin]) -> Result<(), QuadError> {
        let mut count_pin: Vec<Option<usize>> = vec![None; self.counts.len()];
        let mut grade_pin: Vec<Option<f64>> = vec![None; self.counts.len()];
        for pin in pins {
            if pin.block >= self.of.len() || pin.direction > 1 {
                return Err(QuadError::UnknownPin { block: pin.block, direction: pin.direction });
            }
            let (c, flip) = self.of[pin.block][pin.direction];
            if let Some(n) = pin.count {
                if n == 0 {
                    return Err(QuadError::BadCount(0));
                }
                match count_pin[c] {
                    Some(m) if m != n => return Err(QuadError::ConflictingPins { chord: c, a: m, b: n }),
                    _ => count_pin[c] = Some(n),
                }
            }
            if let Some(r) = pin.grading {
                if !(r.is_finite() && r > 0.0) {
                    return Err(QuadError::BadGrading(r));
                }
                let r = if flip { 1.0 / r } else { r };
                if let Some(old) = grade_pin[c] {
                    if (old - r).abs() > 1e-12 * old.max(r) {
                        log::warn!("chord {c} graded twice ({old} and {r}); keeping the first");
                        continue;
                    }
                }
                grade_pin[c] = Some(r);
            }
        }
        for c in 0..self.counts.len() {
            if let Some(n) = count_pin[c] {
                self.counts[c] = n;
            }
            if let Some(r) = grade_pin[c] {
                self.grading[c] = r;
            }
        }
        Ok(())
    }

    /// Pins reproducing the current counts and grading from every member.
    pub fn as_pins(&self) -> Vec<ChordPin> {
        let mut pins = Vec::new();
        for (e, dirs) in self.of.iter().enumerate() {
            for (d, &(c, flip)) in dirs.iter().enumerate() {
                let r = self.grading[c];
                pins.push(ChordPin {
                    block: e,
                    direction: d,
                    count: Some(self.counts[c]),
                    grading: Some(if flip { 1.0 / r } else { r }),
                });
            }
        }
        pins
    }

    /// Subdivision count of element `e` in direction `d`.
    pub fn count(&self, e: usize, d: usize) -> usize {
        self.counts[self.of[e][d].0]
    }

    /// Sub-interval breakpoints in [0, 1] for element `e` in direction `d`.
    pub fn breakpoints(&self, e: usize, d: usize) -> Vec<f64> {
        let (c, flip) = self.of[e][d];
        let t = graded(self.counts[c], self.grading[c]);
        if flip {
            t.iter().rev().map(|x| 1.0 - x).collect()
        } else {
            t
        }
    }

    /// Number of elements after refinement: Σ n_e · m_e.
    pub fn predicted_elements(&self) -> usize {
        (0..self.of.len()).map(|e| self.count(e, 0) * self.count(e, 1)).sum()
    }
}

/// n + 1 breakpoints with interval lengths in geometric ratio `r`.
pub(crate) fn graded(n: usize, r: f64) -> Vec<f64> {
    let sizes: Vec<f64> = (0..n).map(|k| r.powi(k as i32)).collect();
    let total: f64 = sizes.iter().sum();
    let mut t = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for s in &sizes[..n - 1] {
        acc += s;
        t.push(acc / total);
    }
    t.push(1.0);
    t
}
