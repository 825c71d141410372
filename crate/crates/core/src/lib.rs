//! Outer bounds, achievable rates and sum-capacity certificates for K-user
//! Gaussian interference channels in standard form.

pub mod achievability;
pub mod certify;
pub mod construct;
pub mod correlation;
pub mod error;
pub mod gaussian_info;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod outer_bound;
pub mod simplex;

pub use error::{Error, Result};
pub use gaussian_info::{GenieSpec, JointGaussian};
pub use linalg::{c, C64};
pub use model::{
    BoundReport, Certificate, CertificatePath, CertificateStatus, ChannelMatrix, ConfigEcho,
    Family, LowerBounds, NoiseCorrelation, RateInequality, Spec, Witness, SCHEMA_VERSION,
};
pub use outer_bound::{BoundTerm, OptimizerConfig};
