//! Conservative zero-type family: the stationary path measure of a recurrent
//! symmetric random walk on Z under counting measure, observed through
//! `f(path) = v * 1{path(0) = 0}`.
//!
//! Sampling conditions on the first in-window visit to 0. Because the walk is
//! symmetric, the time-reversed chain is the same walk, so the segment before
//! the first visit is a reversed walk conditioned to avoid 0, sampled exactly
//! step by step from an avoidance table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WindowSpec;
use crate::error::{invalid, Result};
use crate::rng::{rng_from_seed, sample_weighted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WalkParams", into = "WalkParams")]
pub struct NullRecurrentWalk {
    steps: Vec<i64>,
    probs: Vec<f64>,
    mark: f64,
    reach: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkParams {
    /// `[step, probability]` pairs.
    pub steps: Vec<(i64, f64)>,
    pub mark: f64,
}

impl TryFrom<WalkParams> for NullRecurrentWalk {
    type Error = crate::error::IdpError;
    fn try_from(p: WalkParams) -> Result<Self> {
        NullRecurrentWalk::new(p.steps, p.mark)
    }
}

impl From<NullRecurrentWalk> for WalkParams {
    fn from(w: NullRecurrentWalk) -> Self {
        WalkParams {
            steps: w
                .steps
                .iter()
                .copied()
                .zip(w.probs.iter().copied())
                .collect(),
            mark: w.mark,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl NullRecurrentWalk {
    pub fn new(step_law: Vec<(i64, f64)>, mark: f64) -> Result<Self> {
        if !mark.is_finite() || mark == 0.0 {
            return Err(invalid("walk mark value must be finite and nonzero"));
        }
        if step_law.is_empty() {
            return Err(invalid("empty step law"));
        }
        let mut merged: std::collections::BTreeMap<i64, f64> = Default::default();
        for (s, p) in step_law {
            if !p.is_finite() || p < 0.0 {
                return Err(invalid("step probabilities must be finite and >= 0"));
            }
            *merged.entry(s).or_default() += p;
        }
        merged.retain(|_, p| *p > 0.0);
        let total: f64 = merged.values().sum();
        if total <= 0.0 {
            return Err(invalid("step law has zero total mass"));
        }
        let drift: f64 = merged.iter().map(|(s, p)| *s as f64 * p).sum::<f64>() / total;
        if drift.abs() > 1e-12 {
            return Err(invalid(format!(
                "step law has drift {drift}; a walk with nonzero drift is transient"
            )));
        }
        for (s, p) in &merged {
            let q = merged.get(&-s).copied().unwrap_or(0.0);
            if (p - q).abs() > 1e-12 * total {
                return Err(invalid("step law must be symmetric"));
            }
        }
        let g = merged.keys().fold(0, |g, &s| gcd(g, s));
        if g != 1 {
            return Err(invalid(format!(
                "step support has gcd {g}; the walk does not visit every site"
            )));
        }
        let steps: Vec<i64> = merged.keys().copied().collect();
        let probs: Vec<f64> = merged.values().map(|p| p / total).collect();
        let reach = steps.iter().map(|s| s.abs()).max().unwrap_or(1);
        Ok(Self {
            steps,
            probs,
            mark,
            reach,
        })
    }

    pub fn mark(&self) -> f64 {
        self.mark
    }

    pub fn step_law(&self) -> Vec<(i64, f64)> {
        self.steps
            .iter()
            .copied()
            .zip(self.probs.iter().copied())
            .collect()
    }

    fn visible(&self, w: &WindowSpec) -> bool {
        self.mark.abs() > w.threshold
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.steps[sample_weighted(&self.probs, rng)]
    }

    /// Law of S_d started at 0, as (offset, probabilities) over [-d*reach, d*reach].
    pub fn distribution(&self, d: usize) -> (i64, Vec<f64>) {
        let r = self.reach;
        let width = (2 * d as i64 * r + 1) as usize;
        let mut cur = vec![0.0; width];
        let off = d as i64 * r;
        cur[off as usize] = 1.0;
        for _ in 0..d {
            let mut next = vec![0.0; width];
            for (x, &p) in cur.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (s, q) in self.steps.iter().zip(&self.probs) {
                    let y = x as i64 + s;
                    if y >= 0 && (y as usize) < width {
                        next[y as usize] += p * q;
                    }
                }
            }
            cur = next;
        }
        (off, cur)
    }

    /// P_0(S_d = 0).
    pub fn return_probability(&self, d: u64) -> f64 {
        let (off, dist) = self.distribution(d as usize);
        dist[off as usize]
    }

    pub fn hit_mass(&self, w: &WindowSpec) -> f64 {
        if !self.visible(w) {
            return 0.0;
        }
        AvoidTable::new(self, w.length)
            .first_hit_masses()
            .iter()
            .sum()
    }

    /// μ(A(w) ∩ T^{-k} A(w)) by first-hit decomposition.
    pub fn return_mass(&self, w: &WindowSpec, k: i64) -> f64 {
        if !self.visible(w) {
            return 0.0;
        }
        let k = k.abs();
        let n = w.length as i64;
        let table = AvoidTable::new(self, w.length);
        let masses = table.first_hit_masses();
        let mut total = 0.0;
        for (i, m) in masses.iter().enumerate() {
            let gap = k - i as i64;
            if gap <= 0 {
                // time i already lies in [k, k + n)
                total += m;
                continue;
            }
            let (off, dist) = self.distribution(gap as usize);
            let hit: f64 = dist
                .iter()
                .enumerate()
                .map(|(x, p)| p * (1.0 - table.avoid(n as usize, x as i64 - off)))
                .sum();
            total += m * hit;
        }
        total
    }

    /// μ(x_c = 0 for all c).
    pub fn joint_visit_mass(&self, w: &WindowSpec, coords: &[i64]) -> f64 {
        if !self.visible(w) || coords.is_empty() {
            return 0.0;
        }
        let mut cs = coords.to_vec();
        cs.sort_unstable();
        cs.dedup();
        cs.windows(2)
            .map(|p| self.return_probability((p[1] - p[0]) as u64))
            .product()
    }
}

/// `avoid(r, x)`: probability that a walk at x keeps the current position and
/// the next r - 1 positions away from 0 (r positions in total).
#[derive(Debug)]
pub struct AvoidTable {
    radius: i64,
    rows: Vec<Vec<f64>>,
    steps: Vec<i64>,
    probs: Vec<f64>,
}

impl AvoidTable {
    pub fn new(walk: &NullRecurrentWalk, depth: usize) -> Self {
        let radius = (depth as i64 + 1) * walk.reach;
        let width = (2 * radius + 1) as usize;
        let mut rows = vec![vec![1.0; width]];
        for _ in 1..=depth {
            let prev = rows.last().unwrap();
            let mut row = vec![0.0; width];
            for (xi, slot) in row.iter_mut().enumerate() {
                let x = xi as i64 - radius;
                if x == 0 {
                    continue;
                }
                let mut acc = 0.0;
                for (s, p) in walk.steps.iter().zip(&walk.probs) {
                    let y = x + s;
                    let v = if y.abs() > radius {
                        1.0
                    } else {
                        prev[(y + radius) as usize]
                    };
                    acc += p * v;
                }
                *slot = acc;
            }
            rows.push(row);
        }
        Self {
            radius,
            rows,
            steps: walk.steps.clone(),
            probs: walk.probs.clone(),
        }
    }

    pub fn avoid(&self, r: usize, x: i64) -> f64 {
        if r == 0 {
            return 1.0;
        }
        if x == 0 {
            return 0.0;
        }
        if x.abs() > self.radius {
            return 1.0;
        }
        self.rows[r][(x + self.radius) as usize]
    }

    /// m_i: mass of paths whose first visit to 0 within [0, depth) is at time i.
    pub fn first_hit_masses(&self) -> Vec<f64> {
        let depth = self.rows.len() - 1;
        (0..depth)
            .map(|i| {
                if i == 0 {
                    1.0
                } else {
                    self.steps
                        .iter()
                        .zip(&self.probs)
                        .map(|(s, p)| p * self.avoid(i, *s))
                        .sum()
                }
            })
            .collect()
    }
}

/// A bi-infinite walk path anchored at its first in-window visit to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    /// First in-window time with position 0.
    pub anchor: i64,
    /// Positions at times 0..=anchor (last entry is 0).
    pub head: Vec<i64>,
    pub future_seed: u64,
    pub past_seed: u64,
}

impl WalkPath {
    /// Positions at times [start, start + len).
    pub fn positions(&self, walk: &NullRecurrentWalk, start: i64, len: usize) -> Vec<i64> {
        let end = start + len as i64;
        let mut out = Vec::with_capacity(len);
        if start < 0 {
            let depth = (-start) as usize;
            let mut rng = rng_from_seed(self.past_seed);
            let mut past = Vec::with_capacity(depth);
            let mut x = self.head[0];
            for _ in 0..depth {
                x += walk.sample_step(&mut rng);
                past.push(x);
            }
            // past[j] is the position at time -(j+1)
            for t in start..end.min(0) {
                out.push(past[(-t - 1) as usize]);
            }
        }
        for t in start.max(0)..end.min(self.anchor + 1) {
            out.push(self.head[t as usize]);
        }
        if end > self.anchor + 1 {
            let mut rng = rng_from_seed(self.future_seed);
            let mut x = 0;
            for t in (self.anchor + 1)..end {
                x += walk.sample_step(&mut rng);
                if t >= start {
                    out.push(x);
                }
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct WalkSampler {
    table: AvoidTable,
    masses: Vec<f64>,
}

impl WalkSampler {
    pub fn new(walk: &NullRecurrentWalk, w: &WindowSpec) -> Self {
        let table = AvoidTable::new(walk, w.length);
        let masses = if walk.visible(w) {
            table.first_hit_masses()
        } else {
            vec![0.0; w.length]
        };
        Self { table, masses }
    }

    pub fn hit_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn first_hit_masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn sample<R: Rng + ?Sized>(&self, walk: &NullRecurrentWalk, rng: &mut R) -> WalkPath {
        let anchor = sample_weighted(&self.masses, rng);
        let mut head = vec![0i64; anchor + 1];
        let mut x = 0i64;
        // reversed walk from time anchor down to time 0, avoiding 0
        for t in (0..anchor).rev() {
            let remaining = t + 1;
            let weights: Vec<f64> = walk
                .steps
                .iter()
                .zip(&walk.probs)
                .map(|(s, p)| p * self.table.avoid(remaining, x + s))
                .collect();
            x += walk.steps[sample_weighted(&weights, rng)];
            head[t] = x;
        }
        WalkPath {
            anchor: anchor as i64,
            head,
            future_seed: rng.gen(),
            past_seed: rng.gen(),
        }
    }
}
