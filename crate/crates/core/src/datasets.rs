//! Synthetic regression and classification pools with hidden labels.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::models::{factorize_with_escalation, KernelParams, Labels};
use crate::{Error, Result};

/// Inputs and their ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Labels,
}

/// A dataset split into a labeled training set and a test pool whose labels
/// stay hidden until acquired.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPool {
    pub inputs: Vec<Vec<f64>>,
    pub hidden_labels: Labels,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl LabeledPool {
    pub fn new(data: Dataset, split: (Vec<usize>, Vec<usize>)) -> Self {
        LabeledPool {
            inputs: data.inputs,
            hidden_labels: data.labels,
            train_indices: split.0,
            test_indices: split.1,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn test_size(&self) -> usize {
        self.test_indices.len()
    }

    pub fn gather_inputs(&self, indices: &[usize]) -> Vec<Vec<f64>> {
        indices.iter().map(|&i| self.inputs[i].clone()).collect()
    }

    pub fn train_inputs(&self) -> Vec<Vec<f64>> {
        self.gather_inputs(&self.train_indices)
    }

    pub fn train_labels(&self) -> Labels {
        self.hidden_labels.subset(&self.train_indices)
    }
}

/// Equal mixture components `(mean, sd)` of the sinusoid input density,
/// truncated to [-1, 1].
pub const SINUSOID_MIXTURE: [(f64, f64); 2] = [(-0.5, 0.2), (0.7, 0.1)];

fn uniform_inputs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.random_range(-1.0..=1.0)]).collect()
}

/// Labels drawn jointly from a zero-mean GP prior at uniform inputs on [-1, 1].
pub fn gen_gp_prior<R: Rng + ?Sized>(n: usize, params: &KernelParams, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyPool);
    }
    params.validate()?;
    let inputs = uniform_inputs(n, rng);
    let labels = sample_gp_prior(&inputs, params, rng)?;
    Ok(Dataset {
        inputs,
        labels: Labels::Real(labels),
    })
}

/// One joint draw from the GP prior at the given inputs.
pub fn sample_gp_prior<R: Rng + ?Sized>(inputs: &[Vec<f64>], params: &KernelParams, rng: &mut R) -> Result<Vec<f64>> {
    let k = params.gram(inputs);
    let (chol, _) = factorize_with_escalation(&k, params.jitter)?;
    let z = DVector::from_iterator(
        inputs.len(),
        (0..inputs.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let y = chol.l_dirty().lower_triangle() * z;
    Ok(y.iter().copied().collect())
}

pub fn quadratic(x: f64) -> f64 {
    x * x
}

pub fn sinusoid(x: f64) -> f64 {
    (10.0 * x).sin() + x.powi(3)
}

pub fn gen_quadratic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset {
    let inputs = uniform_inputs(n, rng);
    let labels = inputs.iter().map(|x| quadratic(x[0])).collect();
    Dataset {
        inputs,
        labels: Labels::Real(labels),
    }
}

/// Draw from the truncated two-component mixture by rejection.
pub fn sample_sinusoid_input<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let comps = SINUSOID_MIXTURE.map(|(m, s)| Normal::new(m, s).expect("valid sd"));
    loop {
        let c = if rng.random::<bool>() { &comps[0] } else { &comps[1] };
        let x = c.sample(rng);
        if (-1.0..=1.0).contains(&x) {
            return x;
        }
    }
}

pub fn gen_sinusoid<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset {
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![sample_sinusoid_input(rng)]).collect();
    let labels = inputs.iter().map(|x| sinusoid(x[0])).collect();
    Dataset {
        inputs,
        labels: Labels::Real(labels),
    }
}

fn linspace_pi(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Two interleaving half circles. Class 0 (first `n / 2` points) lies on
/// `(cos t, sin t)`, class 1 on `(1 - cos t, 0.5 - sin t)`, with `t` evenly
/// spaced on [0, π]; isotropic Gaussian noise is added to both coordinates.
pub fn gen_two_moons<R: Rng + ?Sized>(n: usize, noise_sd: f64, rng: &mut R) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::config("dataset.n", "two moons needs n >= 2"));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::config("dataset.noise_sd", "must be >= 0"));
    }
    let n_outer = n / 2;
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for t in linspace_pi(n_outer) {
        inputs.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for t in linspace_pi(n - n_outer) {
        inputs.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    if noise_sd > 0.0 {
        let noise = Normal::new(0.0, noise_sd).expect("valid sd");
        for x in inputs.iter_mut() {
            for v in x.iter_mut() {
                *v += noise.sample(rng);
            }
        }
    }
    Ok(Dataset {
        inputs,
        labels: Labels::Class { labels, n_classes: 2 },
    })
}

/// Random train/test split; stratified by class when requested. Index lists
/// are returned sorted.
pub fn split<R: Rng + ?Sized>(
    labels: &Labels,
    n_train: usize,
    rng: &mut R,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "need 1 <= n_train < n, got n_train={n_train}, n={n}"
        )));
    }
    let mut train = match (stratified, labels) {
        (true, Labels::Class { labels, n_classes }) => stratified_train(labels, *n_classes, n_train, rng)?,
        (true, Labels::Real(_)) => {
            return Err(Error::InvalidSplit("stratification needs class labels".into()));
        }
        (false, _) => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx.truncate(n_train);
            idx
        }
    };
    train.sort_unstable();
    let mut is_train = vec![false; n];
    train.iter().for_each(|&i| is_train[i] = true);
    let test = (0..n).filter(|&i| !is_train[i]).collect();
    Ok((train, test))
}

fn stratified_train<R: Rng + ?Sized>(
    labels: &[usize],
    n_classes: usize,
    n_train: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = labels.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    // Largest-remainder allocation of train slots; ties go to the lowest class.
    let exact: Vec<f64> = by_class
        .iter()
        .map(|v| n_train as f64 * v.len() as f64 / n as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut missing = n_train - quota.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            missing -= 1;
        }
    }
    let mut train = Vec::with_capacity(n_train);
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 || quota[c] > members.len() {
            return Err(Error::InvalidSplit(format!(
                "class {c} has {} members, cannot place its quota of {} with a test remainder",
                members.len(),
                quota[c]
            )));
        }
        members.shuffle(rng);
        train.extend_from_slice(&members[..quota[c]]);
    }
    Ok(train)
}

/// Generator recipe as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    GpPrior {
        n: usize,
        #[serde(default)]
        kernel: KernelParams,
    },
    Quadratic {
        n: usize,
    },
    Sinusoid {
        n: usize,
    },
    TwoMoons {
        n: usize,
        #[serde(default = "default_moons_noise")]
        noise_sd: f64,
    },
}

fn default_moons_noise() -> f64 {
    0.1
}

impl GeneratorSpec {
    pub fn n(&self) -> usize {
        match self {
            GeneratorSpec::GpPrior { n, .. }
            | GeneratorSpec::Quadratic { n }
            | GeneratorSpec::Sinusoid { n }
            | GeneratorSpec::TwoMoons { n, .. } => *n,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, GeneratorSpec::TwoMoons { .. })
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        match self {
            GeneratorSpec::GpPrior { n, kernel } => gen_gp_prior(*n, kernel, rng),
            GeneratorSpec::Quadratic { n } => Ok(gen_quadratic(*n, rng)),
            GeneratorSpec::Sinusoid { n } => Ok(gen_sinusoid(*n, rng)),
            GeneratorSpec::TwoMoons { n, noise_sd } => gen_two_moons(*n, *noise_sd, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_examples() {
        assert_eq!(quadratic(0.0), 0.0);
        assert_eq!(quadratic(1.0), 1.0);
        assert_eq!(quadratic(-1.0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = gen_quadratic(200, &mut rng);
        let Labels::Real(y) = &d.labels else { panic!() };
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sinusoid_is_odd() {
        assert_eq!(sinusoid(0.0), 0.0);
        for x in [0.1, 0.37, 0.9] {
            assert!((sinusoid(x) + sinusoid(-x)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_moons_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = gen_two_moons(500, 0.0, &mut rng).unwrap();
        let Labels::Class { labels, .. } = &d.labels else {
            panic!()
        };
        assert_eq!(labels.iter().filter(|&&c| c == 0).count(), 250);
        assert_eq!(labels.iter().filter(|&&c| c == 1).count(), 250);
        assert_eq!(d.inputs[0], vec![1.0, 0.0]);
        assert_eq!(d.inputs[250], vec![0.0, 0.5]);
        for (x, &c) in d.inputs.iter().zip(labels) {
            let r = if c == 0 {
                (x[0] * x[0] + x[1] * x[1]).sqrt()
            } else {
                ((1.0 - x[0]).powi(2) + (0.5 - x[1]).powi(2)).sqrt()
            };
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert!(gen_two_moons(1, 0.1, &mut rng).is_err());
    }

    #[test]
    fn split_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels = Labels::Real(vec![0.0; 50]);
        let (train, test) = split(&labels, 5, &mut rng, false).unwrap();
        assert_eq!((train.len(), test.len()), (5, 45));

        let d = gen_two_moons(500, 0.1, &mut rng).unwrap();
        let (train, test) = split(&d.labels, 50, &mut rng, true).unwrap();
        assert_eq!(test.len(), 450);
        let Labels::Class { labels: classes, .. } = &d.labels else {
            panic!()
        };
        assert_eq!(train.iter().filter(|&&i| classes[i] == 0).count(), 25);

        let a = split(&d.labels, 50, &mut ChaCha8Rng::seed_from_u64(7), true).unwrap();
        let b = split(&d.labels, 50, &mut ChaCha8Rng::seed_from_u64(7), true).unwrap();
        assert_eq!(a, b);

        assert!(split(&labels, 0, &mut rng, false).is_err());
        assert!(split(&labels, 50, &mut rng, false).is_err());
        let lonely = Labels::Class {
            labels: vec![0, 0, 0, 1],
            n_classes: 2,
        };
        assert!(matches!(split(&lonely, 2, &mut rng, true), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn generators_are_reproducible() {
        let spec = GeneratorSpec::GpPrior {
            n: 30,
            kernel: KernelParams::default(),
        };
        let a = spec.generate(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = spec.generate(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }
}
