//! Simulation of the switched dynamics and empirical decay checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::signal::SwitchingSignal;
use crate::system::SubsystemFamily;

/// Prefix products below this norm end the accumulation.
pub const UNDERFLOW: f64 = 1e-300;

/// Relative slack of the envelope comparisons.
pub const ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x(0), …, x(T)`.
    pub states: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_indices(family: &SubsystemFamily, signal: &SwitchingSignal) -> Result<()> {
    match signal
        .blocks()
        .iter()
        .find(|b| !(1..=family.len()).contains(&b.index))
    {
        Some(b) => Err(Error::InvalidInput(format!(
            "signal activates subsystem {} outside 1..={}",
            b.index,
            family.len()
        ))),
        None => Ok(()),
    }
}

/// Iterates `x(t+1) = A_{σ(t)} x(t)` over the signal's horizon.
pub fn simulate(
    family: &SubsystemFamily,
    signal: &SwitchingSignal,
    x0: &[f64],
) -> Result<Trajectory> {
    check_indices(family, signal)?;
    if x0.len() != family.dimension() {
        return Err(Error::DimensionMismatch {
            expected: family.dimension(),
            actual: x0.len(),
        });
    }
    let mut states = Vec::with_capacity(signal.horizon() as usize + 1);
    states.push(x0.to_vec());
    for index in signal.indices() {
        let next = family
            .matrix(index)
            .mul_vec(states.last().expect("non-empty"))?;
        states.push(next);
    }
    let norms = states.iter().map(|x| euclidean(x)).collect();
    Ok(Trajectory { states, norms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixNorms {
    /// `‖A_{σ(t−1)} ⋯ A_{σ(0)}‖` for `t = 1, 2, …`; shorter than the horizon
    /// when the product underflowed.
    pub norms: Vec<f64>,
    pub underflow: bool,
}

impl PrefixNorms {
    /// `(t, norm)` pairs starting at `t = 1`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.norms
            .iter()
            .enumerate()
            .map(|(k, &v)| (k as u64 + 1, v))
    }
}

pub fn prefix_norms(family: &SubsystemFamily, signal: &SwitchingSignal) -> Result<PrefixNorms> {
    check_indices(family, signal)?;
    let mut product = Matrix::identity(family.dimension());
    let mut norms = Vec::with_capacity(signal.horizon() as usize);
    for index in signal.indices() {
        product = family.matrix(index) * &product;
        let norm = linalg::spectral_norm(&product)?;
        norms.push(norm);
        if norm < UNDERFLOW {
            return Ok(PrefixNorms {
                norms,
                underflow: true,
            });
        }
    }
    Ok(PrefixNorms {
        norms,
        underflow: false,
    })
}

/// `trials` points drawn uniformly from `[−1, 1]^d`.
pub fn random_initial_states(dimension: usize, trials: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            (0..dimension)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    /// Smallest `c` with `‖W̄_t‖ ≤ c e^{−λt}` over the sampled prefix.
    pub c_hat: f64,
    /// Least-squares slope of `−ln ‖W̄_t‖` against `t`.
    pub lambda_hat: f64,
    pub satisfied: bool,
    /// The envelope fitted on the first half of the horizon covers the
    /// second half.
    pub envelope_holds: bool,
    pub trajectories_hold: bool,
    pub underflow: bool,
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub estimate: DecayEstimate,
    pub prefix: PrefixNorms,
    pub trajectories: Vec<Trajectory>,
}

/// Checks the decay envelope `c e^{−λt}` on the prefix norms and on `trials`
/// random trajectories.
pub fn verify_ges(
    family: &SubsystemFamily,
    signal: &SwitchingSignal,
    options: &VerifyOptions,
) -> Result<Verification> {
    let lambda = options.lambda;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Precondition(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let prefix = prefix_norms(family, signal)?;
    let scaled: Vec<f64> = prefix
        .iter()
        .map(|(t, n)| n * (lambda * t as f64).exp())
        .collect();
    let half = scaled.len() / 2;
    let first = scaled[..half].iter().copied().fold(1.0, f64::max);
    let second = scaled[half..].iter().copied().fold(0.0, f64::max);
    let c_hat = first.max(second);
    let envelope_holds = prefix.underflow || second <= first * (1.0 + ENVELOPE_SLACK);

    let trajectories = random_initial_states(family.dimension(), options.trials, options.seed)
        .iter()
        .map(|x0| simulate(family, signal, x0))
        .collect::<Result<Vec<_>>>()?;
    let trajectories_hold = trajectories.iter().all(|tr| {
        let x0 = tr.norms[0];
        tr.norms.iter().enumerate().skip(1).all(|(t, &n)| {
            n <= c_hat * (-lambda * t as f64).exp() * x0 * (1.0 + ENVELOPE_SLACK) + UNDERFLOW
        })
    });

    let estimate = DecayEstimate {
        c_hat,
        lambda_hat: fitted_rate(&prefix),
        satisfied: envelope_holds && trajectories_hold,
        envelope_holds,
        trajectories_hold,
        underflow: prefix.underflow,
    };
    Ok(Verification {
        estimate,
        prefix,
        trajectories,
    })
}

fn fitted_rate(prefix: &PrefixNorms) -> f64 {
    let pts: Vec<(f64, f64)> = prefix
        .iter()
        .filter(|&(_, n)| n > 0.0)
        .map(|(t, n)| (t as f64, -n.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let (mt, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t / k, b + y / k));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{search_certificate, SearchOptions};
    use crate::fixtures::{reference_family, reference_instance};
    use crate::signal::{synthesize, Block};
    use proptest::prelude::*;

    fn constant(index: usize, t: u32) -> SwitchingSignal {
        SwitchingSignal::from_blocks(vec![Block::new(index, t)]).unwrap()
    }

    #[test]
    fn identity_family_is_static() {
        let fam = SubsystemFamily::new(vec![Matrix::identity(3); 2]).unwrap();
        let s = SwitchingSignal::from_blocks(vec![Block::new(1, 3), Block::new(2, 4)]).unwrap();
        let tr = simulate(&fam, &s, &[0.5, -1.0, 2.0]).unwrap();
        assert_eq!(tr.states.len(), 8);
        assert!(tr.states.iter().all(|x| x == &[0.5, -1.0, 2.0]));
        let pn = prefix_norms(&fam, &s).unwrap();
        assert!(pn.norms.iter().all(|&n| (n - 1.0).abs() < 1e-15));
        assert!(simulate(&fam, &s, &[1.0]).is_err());
        assert!(prefix_norms(&fam, &constant(3, 2)).is_err());
    }

    #[test]
    fn dominant_eigenvector_growth() {
        let fam = SubsystemFamily::new(reference_family()).unwrap();
        let a = fam.matrix(1);
        let ev = linalg::eigenvalues(a).unwrap();
        let lam = ev.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!((lam - 1.3276544).abs() < 1e-6);
        let x0 = [a.get(0, 1), lam - a.get(0, 0)];
        let tr = simulate(&fam, &constant(1, 20), &x0).unwrap();
        for w in tr.norms.windows(2) {
            assert!((w[1] / w[0] - lam).abs() < 1e-9);
        }
    }

    #[test]
    fn single_block_prefix_matches_powers() {
        let fam = SubsystemFamily::new(reference_family()).unwrap();
        let pn = prefix_norms(&fam, &constant(4, 3)).unwrap();
        for (t, n) in pn.iter() {
            let expected = linalg::spectral_norm(&fam.power(4, t as u32)).unwrap();
            assert!((n - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_states_are_seeded_and_bounded() {
        let a = random_initial_states(2, 100, 7);
        assert_eq!(a, random_initial_states(2, 100, 7));
        assert_ne!(a, random_initial_states(2, 100, 8));
        assert!(a.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let fam = SubsystemFamily::new(vec![Matrix::identity(2)]).unwrap();
        let opts = VerifyOptions {
            lambda: 0.0,
            trials: 1,
            seed: 1,
        };
        assert!(matches!(
            verify_ges(&fam, &constant(1, 4), &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn reference_signal_decays() {
        let inst = reference_instance();
        let opts = SearchOptions {
            lambda: Some(1e-4),
            ..Default::default()
        };
        let out = search_certificate(&inst, &opts).unwrap();
        let cert = out.certificate().unwrap();
        let s = synthesize(cert, inst.bounds.delta, 500).unwrap();
        let v = verify_ges(
            &inst.family,
            &s,
            &VerifyOptions {
                lambda: cert.lambda,
                trials: 100,
                seed: 1,
            },
        )
        .unwrap();
        assert!(v.estimate.satisfied, "{:?}", v.estimate);
        assert_eq!(v.trajectories.len(), 100);
        assert!(v
            .trajectories
            .iter()
            .all(|t| *t.norms.last().unwrap() < 1e-1));
        assert!(v.estimate.lambda_hat > 0.0);
    }

    #[test]
    fn largest_feasible_rate_is_not_realized() {
        // The inequality holds up to roughly 0.034 per step, while the
        // realized products only shrink by about 0.01 per step.
        let inst = reference_instance();
        let out = search_certificate(&inst, &SearchOptions::default()).unwrap();
        let cert = out.certificate().unwrap();
        assert!(cert.lambda_max > 0.03);
        let s = synthesize(cert, inst.bounds.delta, 500).unwrap();
        let v = verify_ges(
            &inst.family,
            &s,
            &VerifyOptions {
                lambda: cert.lambda_max,
                trials: 10,
                seed: 1,
            },
        )
        .unwrap();
        assert!(!v.estimate.satisfied);
        assert!(v.estimate.lambda_hat < 0.02);
    }

    #[test]
    fn unstable_alternation_is_not_satisfied() {
        let fam = SubsystemFamily::new(reference_family()).unwrap();
        let blocks = (0..125).map(|k| Block::new(1 + k % 2, 2)).collect();
        let s = SwitchingSignal::from_blocks(blocks).unwrap();
        let v = verify_ges(
            &fam,
            &s,
            &VerifyOptions {
                lambda: 1e-4,
                trials: 5,
                seed: 1,
            },
        )
        .unwrap();
        assert!(!v.estimate.satisfied);
    }

    #[test]
    fn underflow_stops_early() {
        let fam = SubsystemFamily::new(vec![Matrix::identity(2).scale(1e-120)]).unwrap();
        let pn = prefix_norms(&fam, &constant(1, 10)).unwrap();
        assert!(pn.underflow);
        assert_eq!(pn.norms.len(), 3);
    }

    fn family_and_signal() -> impl Strategy<Value = (SubsystemFamily, SwitchingSignal)> {
        let mats = prop::collection::vec(prop::array::uniform4(-1.5f64..1.5), 3);
        let blocks = prop::collection::vec((1usize..=3, 1u32..=4), 1..30);
        (mats, blocks).prop_map(|(m, b)| {
            let fam =
                SubsystemFamily::new(m.iter().map(|e| Matrix::new(2, 2, e).unwrap()).collect())
                    .unwrap();
            let s = SwitchingSignal::from_blocks(
                b.into_iter().map(|(i, d)| Block::new(i, d)).collect(),
            )
            .unwrap();
            (fam, s)
        })
    }

    proptest! {
        #[test]
        fn trajectory_bounded_by_prefix((fam, s) in family_and_signal(), seed in 0u64..100) {
            let pn = prefix_norms(&fam, &s).unwrap();
            let x0 = &random_initial_states(2, 1, seed)[0];
            let tr = simulate(&fam, &s, x0).unwrap();
            for (t, n) in pn.iter() {
                prop_assert!(tr.norms[t as usize] <= n * tr.norms[0] + 1e-9);
            }
        }

        #[test]
        fn prefix_norms_split((fam, s) in family_and_signal(), cut in 0.0f64..1.0) {
            let pn = prefix_norms(&fam, &s).unwrap();
            let idx: Vec<usize> = s.indices().collect();
            let t1 = ((idx.len() as f64 * cut) as usize).clamp(1, idx.len());
            let mut segment = Matrix::identity(2);
            for (t, &k) in idx.iter().enumerate().skip(t1) {
                segment = fam.matrix(k) * &segment;
                let bound = linalg::spectral_norm(&segment).unwrap() * pn.norms[t1 - 1];
                prop_assert!(pn.norms[t] <= bound + 1e-9);
            }
        }
    }
}
