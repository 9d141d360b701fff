use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::risk::{Dataset, Sample};
use crate::{Error, Result};

/// Eigenvalue profile of the population second-moment matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumDecay {
    /// `λ_j = rate^j`, `0 < rate < 1`.
    Geometric(f64),
    /// `λ_j = (j + 1)^(-exponent)`, `exponent > 0`.
    Power(f64),
}

impl SpectrumDecay {
    pub fn eigenvalues(self, p: usize) -> Vec<f64> {
        (0..p)
            .map(|j| match self {
                SpectrumDecay::Geometric(r) => r.powi(j as i32),
                SpectrumDecay::Power(e) => ((j + 1) as f64).powf(-e),
            })
            .collect()
    }
}

/// Parameters of a synthetic logistic dataset. Parses from and prints as the
/// compact form `synth:n=8192,p=200,decay=geo:0.5,noise=0.05,seed=7,scale=1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub dim: usize,
    pub decay: SpectrumDecay,
    /// Probability of flipping each label after sampling it.
    pub label_noise: f64,
    pub seed: u64,
    /// Norm of the ground-truth parameter vector.
    pub ground_truth_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_samples: 8192,
            dim: 200,
            decay: SpectrumDecay::Geometric(0.5),
            label_noise: 0.05,
            seed: 7,
            ground_truth_scale: 1.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.dim == 0 {
            return Err(Error::validation("synthetic dataset needs n >= 1 and p >= 1"));
        }
        match self.decay {
            SpectrumDecay::Geometric(r) if !(r > 0.0 && r < 1.0) => {
                return Err(Error::validation(format!("geometric rate {r} outside (0, 1)")))
            }
            SpectrumDecay::Power(e) if !(e > 0.0 && e.is_finite()) => {
                return Err(Error::validation(format!("power exponent {e} must be positive")))
            }
            _ => {}
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::validation(format!(
                "label noise {} outside [0, 0.5)",
                self.label_noise
            )));
        }
        if !(self.ground_truth_scale >= 0.0) || !self.ground_truth_scale.is_finite() {
            return Err(Error::validation("ground truth scale must be finite and non-negative"));
        }
        Ok(())
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let decay = match self.decay {
            SpectrumDecay::Geometric(r) => format!("geo:{r}"),
            SpectrumDecay::Power(e) => format!("pow:{e}"),
        };
        write!(
            f,
            "synth:n={},p={},decay={decay},noise={},seed={},scale={}",
            self.n_samples, self.dim, self.label_noise, self.seed, self.ground_truth_scale
        )
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.strip_prefix("synth:").unwrap_or(s);
        let mut spec = SyntheticSpec::default();
        let bad = |what: &str| Error::validation(format!("bad synthetic spec `{s}`: {what}"));
        for part in body.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(&format!("expected key=value, got `{part}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("`{key}` is not a number")));
            match key.trim() {
                "n" => spec.n_samples = value.parse().map_err(|_| bad("n is not an integer"))?,
                "p" => spec.dim = value.parse().map_err(|_| bad("p is not an integer"))?,
                "noise" => spec.label_noise = num(value)?,
                "seed" => spec.seed = value.parse().map_err(|_| bad("seed is not an integer"))?,
                "scale" => spec.ground_truth_scale = num(value)?,
                "decay" => {
                    let (kind, param) = value
                        .split_once(':')
                        .ok_or_else(|| bad("decay must be geo:<rate> or pow:<exponent>"))?;
                    spec.decay = match kind {
                        "geo" => SpectrumDecay::Geometric(num(param)?),
                        "pow" => SpectrumDecay::Power(num(param)?),
                        other => return Err(bad(&format!("unknown decay `{other}`"))),
                    };
                }
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws a logistic-model dataset whose feature second-moment matrix has the
/// requested spectrum in a random orthonormal basis.
///
/// Features are `a = Q diag(√λ) z` with `z ~ N(0, I)`. The ground truth lies
/// along `Q diag(√λ) g` for Gaussian `g`, rescaled to `ground_truth_scale`, so
/// it is concentrated where the data carries signal. Labels are `+1` with
/// probability `σ(aᵀx_true)` and are then flipped with probability
/// `label_noise`. Deterministic per seed.
pub fn synthesize(spec: &SyntheticSpec) -> Result<(Dataset, DVector<f64>)> {
    spec.validate()?;
    let p = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);

    let basis = DMatrix::from_fn(p, p, |_, _| gauss(&mut rng)).qr().q();
    let scales: Vec<f64> = spec.decay.eigenvalues(p).into_iter().map(f64::sqrt).collect();
    let mut transform = basis;
    for (j, &s) in scales.iter().enumerate() {
        transform.column_mut(j).scale_mut(s);
    }

    let g = DVector::from_fn(p, |_, _| gauss(&mut rng));
    let mut truth = &transform * g;
    let norm = truth.norm();
    if norm > 0.0 {
        truth *= spec.ground_truth_scale / norm;
    }

    let mut samples = Vec::with_capacity(spec.n_samples);
    let mut z = DVector::zeros(p);
    for _ in 0..spec.n_samples {
        z.iter_mut().for_each(|v| *v = gauss(&mut rng));
        let a = &transform * &z;
        let margin = a.dot(&truth);
        let prob = 1.0 / (1.0 + (-margin).exp());
        let mut label = if rng.random::<f64>() < prob { 1.0 } else { -1.0 };
        if rng.random::<f64>() < spec.label_noise {
            label = -label;
        }
        samples.push(Sample::dense(a.as_slice(), label));
    }
    Ok((Dataset::new(samples, p)?, truth))
}
