//! Choice of the active subspace for one acquisition step.
//!
//! Decision vectors are `[A1, xi1, s1, ..., AK, xiK, sK]`, so coordinate `i`
//! belongs to parameter group `i % 3` and component `i / 3`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::toll::PARAMS_PER_COMPONENT;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DropoutMode {
    /// Every dimension is active.
    None,
    /// Uniform `d`-subset.
    Random { d: usize },
    /// `d` coordinates with at least one amplitude, one mean and one width (S1).
    ByParameter { d: usize },
    /// `d` distinct components, one uniformly drawn coordinate from each (S2).
    ByComponent { d: usize },
}

impl DropoutMode {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("dropout: {m}")));
        let grouped = |d: usize| -> Result<()> {
            if dim % PARAMS_PER_COMPONENT != 0 {
                return bad(format!("grouped dropout needs a multiple of 3 dimensions, got {dim}"));
            }
            if d == 0 || d > dim {
                return bad(format!("d = {d} outside 1..={dim}"));
            }
            Ok(())
        };
        match *self {
            DropoutMode::None => Ok(()),
            DropoutMode::Random { d } if d == 0 || d > dim => bad(format!("d = {d} outside 1..={dim}")),
            DropoutMode::Random { .. } => Ok(()),
            DropoutMode::ByParameter { d } => {
                grouped(d)?;
                if d < PARAMS_PER_COMPONENT {
                    return bad(format!("S1 needs d >= 3 to cover every parameter group, got {d}"));
                }
                Ok(())
            }
            DropoutMode::ByComponent { d } => {
                grouped(d)?;
                let k = dim / PARAMS_PER_COMPONENT;
                if d > k {
                    return bad(format!("S2 picks one coordinate per component, so d <= {k}, got {d}"));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DropoutMode::None => "standard".into(),
            DropoutMode::Random { d } => format!("d={d}"),
            DropoutMode::ByParameter { d } => format!("S1(d={d})"),
            DropoutMode::ByComponent { d } => format!("S2(d={d})"),
        }
    }
}

/// Sorted active coordinate indices for one iteration.
pub fn dropout_select<R: Rng + ?Sized>(mode: DropoutMode, dim: usize, rng: &mut R) -> Result<Vec<usize>> {
    mode.validate(dim)?;
    let mut active = match mode {
        DropoutMode::None => (0..dim).collect(),
        DropoutMode::Random { d } => sample(rng, dim, d).into_vec(),
        DropoutMode::ByParameter { d } => {
            let k = dim / PARAMS_PER_COMPONENT;
            let mut chosen: Vec<usize> = (0..PARAMS_PER_COMPONENT)
                .map(|g| rng.random_range(0..k) * PARAMS_PER_COMPONENT + g)
                .collect();
            let rest: Vec<usize> = (0..dim).filter(|i| !chosen.contains(i)).collect();
            chosen.extend(sample(rng, rest.len(), d - PARAMS_PER_COMPONENT).into_iter().map(|j| rest[j]));
            chosen
        }
        DropoutMode::ByComponent { d } => {
            let k = dim / PARAMS_PER_COMPONENT;
            sample(rng, k, d)
                .into_iter()
                .map(|c| c * PARAMS_PER_COMPONENT + rng.random_range(0..PARAMS_PER_COMPONENT))
                .collect()
        }
    };
    active.sort_unstable();
    Ok(active)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn full_random_subset_is_everything() {
        let mut r = rng::stream(1, 0);
        assert_eq!(dropout_select(DropoutMode::Random { d: 18 }, 18, &mut r).unwrap(), (0..18).collect::<Vec<_>>());
        assert_eq!(dropout_select(DropoutMode::None, 6, &mut r).unwrap(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn s2_takes_one_coordinate_from_distinct_components() {
        let mut r = rng::stream(2, 0);
        let idx = dropout_select(DropoutMode::ByComponent { d: 5 }, 18, &mut r).unwrap();
        assert_eq!(idx.len(), 5);
        let mut comps: Vec<usize> = idx.iter().map(|i| i / 3).collect();
        comps.dedup();
        assert_eq!(comps.len(), 5);
    }

    #[test]
    fn s1_covers_every_parameter_group() {
        let mut r = rng::stream(3, 0);
        let idx = dropout_select(DropoutMode::ByParameter { d: 5 }, 18, &mut r).unwrap();
        assert_eq!(idx.len(), 5);
        for g in 0..3 {
            assert!(idx.iter().any(|i| i % 3 == g));
        }
    }

    #[test]
    fn infeasible_sizes_are_config_errors() {
        let mut r = rng::stream(4, 0);
        for mode in [
            DropoutMode::Random { d: 0 },
            DropoutMode::Random { d: 19 },
            DropoutMode::ByParameter { d: 2 },
            DropoutMode::ByComponent { d: 7 },
        ] {
            assert!(matches!(dropout_select(mode, 18, &mut r), Err(Error::Config(_))), "{mode:?}");
        }
        assert!(dropout_select(DropoutMode::ByComponent { d: 1 }, 4, &mut r).is_err());
    }
}
