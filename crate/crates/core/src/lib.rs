//! Partition selection for linear regression with categorical predictors.
//!
//! A weighted Group Lasso screens factors, complete-linkage clustering of
//! each screened factor's coefficients yields a nested family of fused
//! models, and an information criterion picks one member. The simulation
//! benchmark and the theory diagnostics live alongside.

mod linalg;
pub mod grouplasso;
pub mod model_io;
pub mod partition;
pub mod pdmr;
pub mod rng;
pub mod scalar;
pub mod schema;
pub mod simbench;
pub mod table;
pub mod theory;

pub use partition::{PartitionModel, SetPartition};
pub use scalar::Scalar;
pub use schema::{Dataset, DesignMatrix, Layout, PredictorSchema};
pub use table::RawTable;

pub type Dataset64 = schema::Dataset<f64>;
pub type DesignMatrix64 = schema::DesignMatrix<f64>;
pub type GroupLassoFit64 = grouplasso::GroupLassoFit<f64>;
pub type NestedFamily64 = pdmr::NestedFamily<f64>;
pub type SelectionResult64 = pdmr::SelectionResult<f64>;
pub type RefitResult64 = partition::RefitResult<f64>;
pub type Dataset32 = schema::Dataset<f32>;
