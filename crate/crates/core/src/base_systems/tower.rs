//! Positive-type II∞ family: a rank-one cutting-and-stacking transformation
//! of infinite measure, observed through the indicator of the base interval.
//!
//! Stage 0 is the interval [0, 1) as a one-level tower. Stage m + 1 cuts the
//! stage-m tower (height h_m) into two columns and stacks
//!
//! ```text
//!   h_m spacers | column 1 | h_m spacers | column 2 | h_m spacers
//! ```
//!
//! so `h_{m+1} = 5 h_m` and the tower mass `h_m 2^-m` diverges. Column 1 sits
//! exactly `2 h_m` levels below column 2, so half of every stage-m level
//! returns to itself at lag `2 h_m`: these are the rigidity lags.
//!
//! At depth D the base interval occupies `2^D` levels of width `2^-D`. The
//! map is the upward shift inside the tower, which is exact as long as the
//! orbit stays within `[0, h_D)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WindowSpec;
use crate::error::{invalid, IdpError, Result};

pub const MAX_STAGE_DEPTH: u32 = 12;
/// Spacer multiples per stage: (below, between, above) in units of h_m.
pub const SPACER_RECIPE: (i64, i64, i64) = (1, 1, 1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TowerParams", into = "TowerParams")]
pub struct RigidTower {
    stage_depth: u32,
    mark: f64,
    levels: Vec<i64>,
    height: i64,
    width: f64,
    rigidity_lags: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerParams {
    pub stage_depth: u32,
    #[serde(default = "default_mark")]
    pub mark: f64,
}

fn default_mark() -> f64 {
    1.0
}

impl TryFrom<TowerParams> for RigidTower {
    type Error = IdpError;
    fn try_from(p: TowerParams) -> Result<Self> {
        RigidTower::new(p.stage_depth, p.mark)
    }
}

impl From<RigidTower> for TowerParams {
    fn from(t: RigidTower) -> Self {
        TowerParams {
            stage_depth: t.stage_depth,
            mark: t.mark,
        }
    }
}

impl RigidTower {
    pub fn new(stage_depth: u32, mark: f64) -> Result<Self> {
        if stage_depth == 0 || stage_depth > MAX_STAGE_DEPTH {
            return Err(invalid(format!(
                "stage depth {stage_depth} outside 1..={MAX_STAGE_DEPTH}"
            )));
        }
        if !mark.is_finite() || mark == 0.0 {
            return Err(invalid("tower mark must be finite and nonzero"));
        }
        let (below, between, above) = SPACER_RECIPE;
        let mut levels = vec![0i64];
        let mut height = 1i64;
        let mut lags = Vec::new();
        for _ in 0..stage_depth {
            let first = below * height;
            let second = first + height + between * height;
            lags.push(second - first);
            let mut next = Vec::with_capacity(levels.len() * 2);
            next.extend(levels.iter().map(|l| l + first));
            next.extend(levels.iter().map(|l| l + second));
            levels = next;
            height = second + height + above * height;
        }
        let width = 0.5f64.powi(stage_depth as i32);
        let mut tower = Self {
            stage_depth,
            mark,
            levels,
            height,
            width,
            rigidity_lags: Vec::new(),
        };
        let margin = tower.margin();
        tower.rigidity_lags = lags.into_iter().filter(|&k| k <= margin).collect();
        Ok(tower)
    }

    pub fn stage_depth(&self) -> u32 {
        self.stage_depth
    }

    pub fn mark(&self) -> f64 {
        self.mark
    }

    pub fn height(&self) -> i64 {
        self.height
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Levels occupied by the base interval, sorted.
    pub fn base_levels(&self) -> &[i64] {
        &self.levels
    }

    /// Lags `2 h_m` at which half of the base interval returns to itself.
    pub fn rigidity_lags(&self) -> &[i64] {
        &self.rigidity_lags
    }

    /// Distance from the base-interval levels to either end of the tower.
    pub fn margin(&self) -> i64 {
        self.levels[0]
    }

    fn visible(&self, w: &WindowSpec) -> bool {
        self.mark.abs() > w.threshold
    }

    pub fn is_base_level(&self, level: i64) -> bool {
        self.levels.binary_search(&level).is_ok()
    }

    pub fn check_window(&self, w: &WindowSpec) -> Result<()> {
        if w.length as i64 > self.margin() + 1 {
            return Err(IdpError::DepthExceeded {
                index: w.length as i64 - 1,
                low: 0,
                high: self.margin() + 1,
            });
        }
        Ok(())
    }

    /// Levels whose orbit meets the base interval at some time in [0, n).
    pub fn hit_levels(&self, w: &WindowSpec) -> Result<Vec<i64>> {
        self.check_window(w)?;
        if !self.visible(w) {
            return Ok(Vec::new());
        }
        let n = w.length as i64;
        let mut out: Vec<i64> = Vec::new();
        for &l in &self.levels {
            let lo = (l - n + 1).max(out.last().map_or(i64::MIN, |x| x + 1));
            out.extend(lo..=l);
        }
        Ok(out)
    }

    pub fn hit_mass(&self, w: &WindowSpec) -> Result<f64> {
        Ok(self.hit_levels(w)?.len() as f64 * self.width)
    }

    /// Values of f along the orbit of `level` at times [start, start + len).
    pub fn orbit(&self, level: i64, start: i64, len: usize) -> Result<Vec<f64>> {
        let lo = level + start;
        let hi = lo + len as i64;
        if lo < 0 || hi > self.height {
            let index = if lo < 0 {
                start
            } else {
                start + len as i64 - 1
            };
            return Err(IdpError::DepthExceeded {
                index,
                low: -level,
                high: self.height - level,
            });
        }
        let mut out = vec![0.0; len];
        let first = self.levels.partition_point(|&x| x < lo);
        for &l in self.levels[first..].iter().take_while(|&&x| x < hi) {
            out[(l - lo) as usize] = self.mark;
        }
        Ok(out)
    }

    /// `#{l in L : l + k in L}`, for k = 0..=max_lag.
    pub fn self_overlap_counts(&self, max_lag: usize) -> Vec<u64> {
        let mut counts = vec![0u64; max_lag + 1];
        for (i, &a) in self.levels.iter().enumerate() {
            for &b in &self.levels[i..] {
                let d = (b - a) as usize;
                if d > max_lag {
                    break;
                }
                counts[d] += 1;
            }
        }
        counts
    }

    pub fn sample_level<R: Rng + ?Sized>(hit_levels: &[i64], rng: &mut R) -> i64 {
        hit_levels[rng.gen_range(0..hit_levels.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_interval_has_unit_mass() {
        let t = RigidTower::new(4, 1.0).unwrap();
        assert_eq!(t.base_levels().len(), 16);
        let w = WindowSpec::new(1, 0.5).unwrap();
        assert_eq!(t.hit_mass(&w).unwrap(), 1.0);
    }

    #[test]
    fn heights_grow_by_five() {
        let t = RigidTower::new(3, 1.0).unwrap();
        assert_eq!(t.height(), 125);
        assert_eq!(t.margin(), 1 + 5 + 25);
        assert_eq!(t.rigidity_lags(), &[2, 10]);
    }

    #[test]
    fn orbit_beyond_tower_is_an_error() {
        let t = RigidTower::new(2, 1.0).unwrap();
        assert!(matches!(
            t.orbit(0, -1, 3),
            Err(IdpError::DepthExceeded { .. })
        ));
        assert!(t.orbit(0, 0, 25).is_ok());
        assert!(t.orbit(0, 0, 26).is_err());
    }

    #[test]
    fn half_returns_at_rigidity_lags() {
        let t = RigidTower::new(6, 1.0).unwrap();
        let counts = t.self_overlap_counts(t.margin() as usize);
        let total = t.base_levels().len() as f64;
        for &k in t.rigidity_lags() {
            assert!(counts[k as usize] as f64 / total >= 0.5, "lag {k}");
        }
    }
}
