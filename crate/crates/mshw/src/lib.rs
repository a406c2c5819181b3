//! Workbench layer over `mshw-core`: configuration files, scaling
//! experiments, report emission, and the CSV formats shared with plotting
//! tools. The `mshw` binary exposes all of it as subcommands.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod report;

/// Initializes the global worker pool from `MSHW_THREADS` (ignored if the
/// pool is already running or the variable is unset/invalid).
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var("MSHW_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
