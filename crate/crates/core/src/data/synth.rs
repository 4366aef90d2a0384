use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NortError, Result};
use crate::tensor::{DenseTensor3, Shape3, SparseTensor3};

/// How many entries to observe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum ObsRule {
    /// `floor((I1 + I2 + I3) * I3 * ln(I1 I2 I3) / 5)`.
    LogRule,
    Count(usize),
    Fraction(f64),
}

impl ObsRule {
    pub fn count(&self, shape: Shape3) -> Result<usize> {
        let n = match *self {
            ObsRule::LogRule => {
                let [_, _, i3] = shape.dims();
                let total = shape.dim_sum() as f64 * i3 as f64 * (shape.numel() as f64).ln() / 5.0;
                total.floor() as usize
            }
            ObsRule::Count(n) => n,
            ObsRule::Fraction(f) => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(NortError::config(format!(
                        "observed fraction {f} outside [0, 1]"
                    )));
                }
                (f * shape.numel() as f64).round() as usize
            }
        };
        if n > shape.numel() {
            return Err(NortError::config(format!(
                "{n} observations requested but {shape} has only {} entries",
                shape.numel()
            )));
        }
        Ok(n)
    }
}

/// Synthetic CP-rank-`r` tensor `sum_i s_i a_i o b_i o c_i` with Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dims: [usize; 3],
    pub rank: usize,
    /// Standard deviation of the additive noise on observed entries.
    pub noise_std: f64,
    pub observed: ObsRule,
    /// Share of observed entries used for training; the rest validate.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            dims: [100, 100, 5],
            rank: 5,
            noise_std: 0.1,
            observed: ObsRule::LogRule,
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: SparseTensor3,
    pub val: SparseTensor3,
    /// Noise-free values on every unobserved entry.
    pub test: SparseTensor3,
    pub truth: DenseTensor3,
}

impl SynthSpec {
    pub fn shape(&self) -> Result<Shape3> {
        Shape3::new(self.dims[0], self.dims[1], self.dims[2])
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.shape()?;
        if self.rank == 0 {
            return Err(NortError::config("synthetic rank must be positive"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(NortError::config(format!(
                "noise std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(NortError::config(format!(
                "train fraction must lie in (0, 1], got {}",
                self.train_fraction
            )));
        }
        self.observed.count(shape)?;
        Ok(())
    }
}

/// Builds the ground truth and the train/validation/test splits.
///
/// Draw order is fixed: for each component, `s`, then `a`, `b`, `c`; then
/// the observed positions, their shuffle, and the noise in observation order.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let shape = spec.shape()?;
    let [i1, i2, i3] = shape.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw =
        |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    // (weight, mode-1, mode-2, mode-3 factor) per component.
    type Component = (f64, Vec<f64>, Vec<f64>, Vec<f64>);
    let comps: Vec<Component> = (0..spec.rank)
        .map(|_| (draw(1)[0], draw(i1), draw(i2), draw(i3)))
        .collect();
    let mut truth = DenseTensor3::zeros(shape);
    {
        let data = truth.as_mut_slice();
        for (s, a, b, c) in &comps {
            for (k, ck) in c.iter().enumerate() {
                for (j, bj) in b.iter().enumerate() {
                    let w = s * ck * bj;
                    let base = i1 * (j + i2 * k);
                    for (i, ai) in a.iter().enumerate() {
                        data[base + i] += w * ai;
                    }
                }
            }
        }
    }

    let n = spec.observed.count(shape)?;
    let mut picked = rand::seq::index::sample(&mut rng, shape.numel(), n).into_vec();
    picked.shuffle(&mut rng);
    let noise = if spec.noise_std > 0.0 {
        Some(Normal::new(0.0, spec.noise_std).map_err(|e| NortError::config(e.to_string()))?)
    } else {
        None
    };
    let observed: Vec<(usize, f64)> = picked
        .iter()
        .map(|&l| {
            let e = noise.map_or(0.0, |d| d.sample(&mut rng));
            (l, truth.as_slice()[l] + e)
        })
        .collect();
    let n_train = ((n as f64) * spec.train_fraction).round() as usize;
    let to_sparse = |part: &[(usize, f64)]| {
        SparseTensor3::from_entries(
            shape,
            part.iter().map(|&(l, v)| (shape.delinear(l), v)).collect(),
        )
    };
    let train = to_sparse(&observed[..n_train])?;
    let val = to_sparse(&observed[n_train..])?;

    let mut mask = vec![false; shape.numel()];
    for &l in &picked {
        mask[l] = true;
    }
    let test_entries = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| !m)
        .map(|(l, _)| (shape.delinear(l), truth.as_slice()[l]))
        .collect();
    let test = SparseTensor3::from_entries(shape, test_entries)?;
    Ok(SynthData {
        train,
        val,
        test,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn log_rule_counts() {
        let s = Shape3::new(100, 100, 5).unwrap();
        assert_eq!(ObsRule::LogRule.count(s).unwrap(), 2218);
        let s = Shape3::new(250, 250, 5).unwrap();
        assert_eq!(ObsRule::LogRule.count(s).unwrap(), 6389);
    }

    #[test]
    fn too_many_observations_is_config_error() {
        let s = Shape3::new(2, 2, 2).unwrap();
        assert!(matches!(
            ObsRule::Count(9).count(s),
            Err(NortError::Config(_))
        ));
        let spec = SynthSpec {
            dims: [2, 2, 2],
            observed: ObsRule::Count(9),
            ..SynthSpec::default()
        };
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let spec = SynthSpec::default();
        let d = synth_generate(&spec).unwrap();
        assert_eq!(d.train.nnz(), 1109);
        assert_eq!(d.val.nnz(), 1109);
        assert_eq!(d.test.nnz(), 50_000 - 2218);
        let mut seen = HashSet::new();
        for idx in d
            .train
            .indices()
            .iter()
            .chain(d.val.indices())
            .chain(d.test.indices())
        {
            assert!(seen.insert(*idx));
        }
        assert_eq!(seen.len(), 50_000);
    }

    #[test]
    fn noiseless_full_observation_is_exact() {
        let spec = SynthSpec {
            dims: [6, 5, 4],
            noise_std: 0.0,
            observed: ObsRule::Fraction(1.0),
            ..SynthSpec::default()
        };
        let d = synth_generate(&spec).unwrap();
        assert_eq!(d.test.nnz(), 0);
        for (idx, v) in d.train.iter().chain(d.val.iter()) {
            assert_eq!(v, d.truth.get(idx));
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let spec = SynthSpec {
            dims: [20, 15, 4],
            seed: 9,
            ..SynthSpec::default()
        };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        let bits = |s: &SparseTensor3| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.train), bits(&b.train));
        assert_eq!(a.train.indices(), b.train.indices());
        assert_eq!(bits(&a.val), bits(&b.val));
        let c = synth_generate(&SynthSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(bits(&a.train), bits(&c.train));
    }

    #[test]
    fn truth_is_low_rank() {
        let spec = SynthSpec {
            dims: [12, 10, 8],
            rank: 2,
            ..SynthSpec::default()
        };
        let d = synth_generate(&spec).unwrap();
        for m in crate::tensor::Mode::ALL {
            let (_, s, _) = crate::svd::dense_svd(&d.truth.unfold(m));
            assert!(s[2] < 1e-10 * s[0]);
        }
    }
}
