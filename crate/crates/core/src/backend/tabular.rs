//! Synthetic backends over an explicit [`TabularWorld`].
//!
//! Each bound class or evidence string is a single token. The kind of
//! distribution being queried is read off the request:
//!
//! - continuation is a class, context holds no bound evidence → prior
//! - continuation is a class, context holds a bound evidence → posterior
//!   given the evidence that ends latest in the context
//! - continuation is an evidence → likelihood given the class that ends
//!   latest in the context
//!
//! Temperature τ maps a distribution p to p^(1/τ)/Z. Prior and posterior are
//! renormalized over the world's classes. Likelihood rows share one
//! normalizer Z_τ = max(1, max_c Σ_x P(x|c)^(1/τ)) with the sink token
//! absorbing the rest, so log-likelihood ratios scale by exactly 1/τ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::world::{Binding, Symbol, TabularWorld};
use super::{BackendError, ModelBackend, ScoreRequest, ScoreResult};

#[derive(Debug, Clone, PartialEq)]
enum Gradient {
    Constant(f64),
    /// One gradient per world evidence.
    PerEvidence(Vec<f64>),
}

impl Gradient {
    fn at(&self, evidence: usize) -> f64 {
        match self {
            Gradient::Constant(g) => *g,
            Gradient::PerEvidence(gs) => gs[evidence],
        }
    }
}

/// Tabular world model. The posterior score for class c given evidence x is
/// softmax over classes of `ln P(c) + g·ln P(x|c) + η_c`, which realizes
/// Δ_observed = g·Δ_expected + (η_c1 − η_c2). With g = 1 and no noise this is
/// exactly Bayes' rule.
#[derive(Debug, Clone)]
pub struct TabularModel {
    id: String,
    world: TabularWorld,
    binding: Binding,
    class_strings: Vec<(String, usize)>,
    evidence_strings: Vec<(String, usize)>,
    gradient: Gradient,
    noise_sd: f64,
    seed: u64,
    log_prior: Vec<f64>,
    log_lik: Vec<Vec<f64>>,
}

fn check_gradient(g: f64) -> Result<(), BackendError> {
    if g > 0.0 && g <= 1.0 {
        Ok(())
    } else {
        Err(BackendError::Construction(format!(
            "gradient must be in (0, 1], got {g}"
        )))
    }
}

fn fingerprint(world: &TabularWorld, binding: &Binding) -> String {
    let mut h = Sha256::new();
    h.update(
        serde_json::to_string(&world.to_file())
            .expect("world serializes")
            .as_bytes(),
    );
    let mut pairs: Vec<(&str, Symbol)> = binding.iter().collect();
    pairs.sort_by(|a, b| a.0.cmp(b.0));
    for (text, sym) in pairs {
        h.update((text.len() as u64).to_le_bytes());
        h.update(text.as_bytes());
        h.update(format!("{sym:?}").as_bytes());
    }
    hex::encode(&h.finalize()[..6])
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact Bayesian model of `world`.
pub fn tabular_oracle(world: TabularWorld, binding: Binding) -> Result<TabularModel, BackendError> {
    let id = format!("oracle-{}", fingerprint(&world, &binding));
    TabularModel::build(id, world, binding, Gradient::Constant(1.0), 0.0, 0)
}

/// Model that under-updates by `gradient` and adds Normal noise of standard
/// deviation `noise_sd` to each tuple's observed update.
///
/// The noise enters per class: each posterior log-score gets an independent
/// N(0, noise_sd²/2) draw keyed by (seed, context, class), so the difference
/// for any class pair has variance noise_sd².
pub fn noisy_underupdater(
    world: TabularWorld,
    binding: Binding,
    gradient: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<TabularModel, BackendError> {
    check_gradient(gradient)?;
    let id = format!(
        "noisy-{}-g{gradient}-sd{noise_sd}-s{seed}",
        fingerprint(&world, &binding)
    );
    TabularModel::build(
        id,
        world,
        binding,
        Gradient::Constant(gradient),
        noise_sd,
        seed,
    )
}

impl TabularModel {
    fn build(
        id: String,
        world: TabularWorld,
        binding: Binding,
        gradient: Gradient,
        noise_sd: f64,
        seed: u64,
    ) -> Result<Self, BackendError> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(BackendError::Construction(format!(
                "noise_sd must be finite and ≥ 0, got {noise_sd}"
            )));
        }
        let mut class_strings = Vec::new();
        let mut evidence_strings = Vec::new();
        for (text, sym) in binding.iter() {
            match sym {
                Symbol::Class(i) if i < world.classes().len() => {
                    class_strings.push((text.to_string(), i))
                }
                Symbol::Evidence(i) if i < world.evidences().len() => {
                    evidence_strings.push((text.to_string(), i))
                }
                _ => {
                    return Err(BackendError::Binding(format!(
                        "{text:?} bound to out-of-range {sym:?}"
                    )))
                }
            }
        }
        // deterministic tie-breaking: longer strings first, then lexicographic
        let order = |a: &(String, usize), b: &(String, usize)| {
            b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0))
        };
        class_strings.sort_by(order);
        evidence_strings.sort_by(order);
        let log_prior = (0..world.classes().len())
            .map(|c| world.prior(c).ln())
            .collect();
        let log_lik = (0..world.evidences().len())
            .map(|e| {
                (0..world.classes().len())
                    .map(|c| world.likelihood(e, c).ln())
                    .collect()
            })
            .collect();
        Ok(Self {
            id,
            world,
            binding,
            class_strings,
            evidence_strings,
            gradient,
            noise_sd,
            seed,
            log_prior,
            log_lik,
        })
    }

    /// Replace the constant gradient with one gradient per world evidence.
    pub fn with_evidence_gradients(mut self, gradients: Vec<f64>) -> Result<Self, BackendError> {
        if gradients.len() != self.world.evidences().len() {
            return Err(BackendError::Construction(format!(
                "{} gradients for {} evidences",
                gradients.len(),
                self.world.evidences().len()
            )));
        }
        for &g in &gradients {
            check_gradient(g)?;
        }
        let mut h = Sha256::new();
        for g in &gradients {
            h.update(g.to_le_bytes());
        }
        self.id = format!("{}-graded{}", self.id, hex::encode(&h.finalize()[..4]));
        self.gradient = Gradient::PerEvidence(gradients);
        Ok(self)
    }

    pub fn world(&self) -> &TabularWorld {
        &self.world
    }

    pub fn binding(&self) -> &Binding {
        &self.binding
    }

    fn latest(strings: &[(String, usize)], context: &str) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (s, sym) in strings {
            if let Some(pos) = context.rfind(s.as_str()) {
                let end = pos + s.len();
                // strings are sorted longest first, so ties keep the longer match
                if best.is_none_or(|(e, _)| end > e) {
                    best = Some((end, *sym));
                }
            }
        }
        best.map(|(_, sym)| sym)
    }

    fn log_prior_at(&self, class: usize, inv_t: f64) -> f64 {
        let lse = log_sum_exp(self.log_prior.iter().map(|lp| lp * inv_t));
        self.log_prior[class] * inv_t - lse
    }

    fn log_lik_at(&self, evidence: usize, class: usize, inv_t: f64) -> f64 {
        let log_z = if inv_t == 1.0 {
            0.0
        } else {
            (0..self.world.classes().len())
                .map(|c| log_sum_exp(self.log_lik.iter().map(|row| row[c] * inv_t)))
                .fold(0.0, f64::max)
        };
        self.log_lik[evidence][class] * inv_t - log_z
    }

    fn noise(&self, context: &str, class: usize) -> f64 {
        if self.noise_sd == 0.0 {
            return 0.0;
        }
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((class as u64).to_le_bytes());
        h.update(context.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let z: f64 = ChaCha8Rng::from_seed(seed).sample(StandardNormal);
        z * self.noise_sd / std::f64::consts::SQRT_2
    }

    fn log_posterior_at(
        &self,
        class: usize,
        evidence: usize,
        context: &str,
        inv_t: f64,
    ) -> Result<f64, BackendError> {
        let g = self.gradient.at(evidence);
        let scores: Vec<f64> = (0..self.world.classes().len())
            .map(|c| {
                (self.log_prior[c] + g * self.log_lik[evidence][c] + self.noise(context, c)) * inv_t
            })
            .collect();
        let lp = scores[class] - log_sum_exp(scores.iter().copied());
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(BackendError::Construction(format!(
                "posterior for class {class} is not finite"
            )))
        }
    }
}

impl ModelBackend for TabularModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        let inv_t = 1.0 / request.temperature;
        let sym = self.binding.get(&request.continuation).ok_or_else(|| {
            BackendError::Binding(format!(
                "continuation {:?} is not bound",
                request.continuation
            ))
        })?;
        let lp = match sym {
            Symbol::Class(c) => match Self::latest(&self.evidence_strings, &request.context) {
                Some(x) => self.log_posterior_at(c, x, &request.context, inv_t)?,
                None => self.log_prior_at(c, inv_t),
            },
            Symbol::Evidence(x) => {
                let c = Self::latest(&self.class_strings, &request.context).ok_or_else(|| {
                    BackendError::Binding("likelihood context contains no bound class".to_string())
                })?;
                self.log_lik_at(x, c, inv_t)
            }
        };
        ScoreResult::single(request.continuation.clone(), lp.min(0.0))
    }
}
