//! Shipped specs, one per base class, with budgets that resolve them.

use crate::base_systems::{
    finite_invariant_base, moving_average_base, null_recurrent_walk_base, rigid_tower_base,
    AmplitudeLaw, Atom, DeclaredClass, StationaryLaw,
};
use crate::ergodic::Budget;
use crate::error::Result;
use crate::process::{canonical_four, LevySpec, Representation};

/// Tower depth: rigidity lags 2, 10, 50, 250 all fit inside the margin.
pub const TOWER_DEPTH: u32 = 5;
pub const THRESHOLD: f64 = 0.5;

/// Two-tap moving average with amplitudes in {1, 2}; every jump exceeds the threshold.
pub fn moving_average() -> Result<LevySpec> {
    let base = moving_average_base(
        vec![1.0, 0.6],
        AmplitudeLaw::Atoms {
            atoms: vec![Atom::new(1.0, 0.7), Atom::new(2.0, 0.3)],
        },
    )?;
    LevySpec::single(base, 0.0, Representation::Nonnegative)
}

/// Lazy-free walk with steps uniform on {-5, …, 5} and unit mark.
pub fn null_recurrent_walk() -> Result<LevySpec> {
    let steps = (-5..=5).map(|s| (s, 1.0 / 11.0)).collect();
    LevySpec::single(
        null_recurrent_walk_base(steps, 1.0)?,
        0.0,
        Representation::Nonnegative,
    )
}

pub fn rigid_tower() -> Result<LevySpec> {
    LevySpec::single(
        rigid_tower_base(TOWER_DEPTH)?,
        0.0,
        Representation::Nonnegative,
    )
}

/// Finite invariant measure of mass 1.5 carried by the constant sequence 2.
pub fn finite_invariant() -> Result<LevySpec> {
    let base = finite_invariant_base(1.5, StationaryLaw::Constant { value: 2.0 })?;
    LevySpec::single(base, 0.0, Representation::Nonnegative)
}

pub fn by_class(c: DeclaredClass) -> Result<LevySpec> {
    match c {
        DeclaredClass::Dissipative => moving_average(),
        DeclaredClass::ConservativeZeroType => null_recurrent_walk(),
        DeclaredClass::PositiveTypeIIInfinite => rigid_tower(),
        DeclaredClass::TypeII1 => finite_invariant(),
        DeclaredClass::Composite => composite(true),
    }
}

pub const SINGLE_CLASSES: [DeclaredClass; 4] = [
    DeclaredClass::Dissipative,
    DeclaredClass::ConservativeZeroType,
    DeclaredClass::PositiveTypeIIInfinite,
    DeclaredClass::TypeII1,
];

/// The four shipped specs in canonical slots, optionally without the nonergodic one.
pub fn composite(with_nonergodic: bool) -> Result<LevySpec> {
    canonical_four(
        Some(moving_average()?),
        Some(null_recurrent_walk()?),
        Some(rigid_tower()?),
        if with_nonergodic {
            Some(finite_invariant()?)
        } else {
            None
        },
    )
}

/// Budget long enough to see the tower's rigidity lag 250.
pub fn default_budget() -> Budget {
    Budget {
        replicates: 400,
        length: 300,
        threshold: THRESHOLD,
        margin: 0,
        max_lag: 250,
        lambdas: vec![0.5, 1.0, 2.0],
        triple_lambda: 2.0,
        triple_schedule: vec![(5, 5), (10, 10), (20, 20)],
        tolerance: crate::process::DEFAULT_SMALL_JUMP_TOLERANCE,
    }
}
