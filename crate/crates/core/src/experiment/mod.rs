//! Checkpoints, experiment configuration, pretrained components, metrics and
//! the run harness.

mod checkpoint;
mod config;
mod metrics;
mod pretrained;
mod run;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{
    DataSettings, ExperimentConfig, PretrainSettings, PromptSettings, Shots, Task, SWEEP_LENGTHS,
};
pub use metrics::{
    emit_metrics, format_summary, format_sweep_grid, metrics_to_jsonl, read_metrics, summarize,
    sweep_grid, Cell, MetricsRecord, SummaryRow, SweepGrid, SweepRow,
};
pub use pretrained::{
    pretrain_all, pretrain_encoders, pretrain_plm, save_encoders, save_plm, PretrainSummary,
    Pretrained, AUDIO_FILE, PLM_FILE, VISION_FILE,
};
pub use run::{
    build_dataset, run_config, run_experiment, run_one, run_specs, write_outputs, Dataset,
    ExperimentOutput, RunResult, RunSpec,
};
