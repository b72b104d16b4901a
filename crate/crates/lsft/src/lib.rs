//! Feature transformations for style transfer: closed-form baselines
//! (AdaIN, ZCA, their gram-only ablations, interpolation), fixed-step
//! gradient-descent transformations, and the exact line-search variant that
//! picks each step size as a positive root of a cubic. A benchmark harness
//! reproduces the convergence, content/style-balance, and speed experiments
//! on synthetic or ingested feature matrices.

pub mod classic;
pub mod cli;
pub mod error;
pub mod feature;
pub mod ftz;
pub mod harness;
pub mod linalg;
pub mod linesearch;
pub mod optim;
pub mod report;
pub mod rng;
pub mod trace;

pub use classic::{adain, adain_ablated, interpolate, matrix_power_sym, sym_eig, zca, zca_gram_ablated, EigDecomposition, ZcaOptions};
pub use error::{Error, Result};
pub use feature::{
    centralize, decentralize, frobenius_sq, gram, mean_vector, reshape_feature, trace_product,
    FeatureMatrix, MeanVector, SquareMatrix, SymMatrix,
};
pub use ftz::{read_ftz, write_ftz, Dtype};
pub use harness::{
    aggregate_traces, alpha_preset, alpha_sweep, apply_method, content_style_losses,
    convergence_experiment, eta_histogram, gen_features, gen_pair, layer_schedule_run,
    resolution_shapes, timing_bench, AggregateCurve, BalancePoint, Dist, Histogram, LayerRun,
    LayerSchedule, LayerSpec, Method, TimingRow,
};
pub use linesearch::{cubic_coefficients, ls_ft, phi, select_step, solve_cubic, CubicCoefficients, StepResult};
pub use optim::{
    gradient, iterft, modified_iterft, resolve_lambda, total_loss, EtaMode, GradientBundle,
    LambdaMode, LossBreakdown, PerturbStart, TransformConfig,
};
pub use report::RunManifest;
pub use trace::{ConvergenceTrace, IterationRecord};
