//! Reference problems and error metrics used to validate the schemes.

pub mod circle;
pub mod convergence;
pub mod counterexample;
pub mod grim;
pub mod metrics;
pub mod presets;

pub use circle::{shrinking_circle_error, CircleSeries};
pub use convergence::{convergence_study, write_convergence_csv, ConvergenceRow};
pub use counterexample::{counterexample_energy, write_counterexample_csv, CounterexampleEnergy, CounterexampleSpec};
pub use grim::{
    fold_half, grim_reaper_initial_partition, grim_reaper_partition, grim_reaper_profile, linf_graph_error,
    run_grim_reaper, unfold_half, GrimInterface, GrimReaperSpec, GrimVariant,
};
pub use metrics::{
    find_junctions, hausdorff_distance, measure_junction_angles, partition_l1_error, wetting_layer_area, JunctionAngles,
};
