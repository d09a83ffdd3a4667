use super::{BackendError, ModelBackend, ScoreRequest, ScoreResult};
use crate::tokenize::pretokenize;

/// A model whose next-token distribution is uniform over `vocab_size` tokens.
///
/// Uniform is a fixed point of temperature scaling, so every temperature
/// yields the same scores.
#[derive(Debug, Clone)]
pub struct UniformModel {
    id: String,
    log_p: f64,
}

pub fn uniform_model(vocab_size: u64) -> Result<UniformModel, BackendError> {
    if vocab_size < 2 {
        return Err(BackendError::Construction(format!(
            "vocab_size must be ≥ 2, got {vocab_size}"
        )));
    }
    Ok(UniformModel {
        id: format!("uniform-{vocab_size}"),
        log_p: -(vocab_size as f64).ln(),
    })
}

impl ModelBackend for UniformModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        let tokens: Vec<String> = pretokenize(&request.continuation)
            .into_iter()
            .map(str::to_string)
            .collect();
        if tokens.is_empty() {
            return Err(BackendError::Tokenization(format!(
                "{:?} has no tokens",
                request.continuation
            )));
        }
        let lps = vec![self.log_p; tokens.len()];
        ScoreResult::new(tokens, lps)
    }
}
