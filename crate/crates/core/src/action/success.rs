pub const MIN_SUCCESS: f64 = 0.1;
pub const MAX_SUCCESS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("physical-ability slope must be non-zero")]
pub struct DomainError;

/// Probability that a fight, rob or hunt succeeds:
/// `clip((0.5 + intercept) + 0.4·tanh(ΔPA / slope), 0.1, 0.9)`.
pub fn success_probability(delta_pa: f64, intercept: f64, slope: f64) -> Result<f64, DomainError> {
    if slope == 0.0 {
        return Err(DomainError);
    }
    let raw = (0.5 + intercept) + 0.4 * (delta_pa / slope).tanh();
    Ok(raw.clamp(MIN_SUCCESS, MAX_SUCCESS))
}
