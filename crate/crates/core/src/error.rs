use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical routines of the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NevlabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate Möbius map: determinant {det} below tolerance")]
    DegenerateMobius { det: f64 },

    #[error("near-critical point at {z}: |f'| = {derivative:.3e}, result unreliable")]
    NearCritical { z: Complex64, derivative: f64 },

    #[error("integration step underflow at {z}: step {step:.3e}")]
    StepUnderflow { z: Complex64, step: f64 },

    #[error("point {z} lies outside sector {sector} (branch certificate would break)")]
    OutsideSector { z: Complex64, sector: usize },

    #[error("turning point: P({z}) = 0")]
    TurningPoint { z: Complex64 },

    #[error("|Z| = {modulus:.3} is below the asymptotic threshold {threshold}")]
    ZTooSmall { modulus: f64, threshold: f64 },

    #[error("f is undefined at the essential singularity ∞")]
    EssentialSingularity,

    #[error("root search: {0}")]
    RootSearch(String),

    #[error("contour around {center} encloses {count} poles")]
    ContourNotSimple { center: Complex64, count: i64 },

    #[error("asymptotic value along ray at angle {angle:.6} did not converge by |z| = {radius}")]
    AsymptoticValueNotConverged { angle: f64, radius: f64 },

    #[error("power-law fit: {0}")]
    Fit(String),

    #[error("no mixed instance found: {0}")]
    NoInstance(String),

    #[error("sample outside the tract domain: {0}")]
    OutsideTract(Complex64),

    #[error("neighbourhood isolation failed: {0}")]
    Isolation(String),
}

pub type Result<T> = std::result::Result<T, NevlabError>;
