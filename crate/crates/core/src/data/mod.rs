//! Series ingestion, preprocessing, windowing, scoring, the historical
//! average baseline, and the synthetic generator.

mod dataset;
mod ha;
mod metrics;
mod series;
mod synth;

pub use dataset::{split_and_window, split_and_window_with, split_rows, Dataset, Normalizer, Split, SplitName, Window};
pub use ha::{ha_forecast, ha_metrics, HistoricalAverage};
pub use metrics::{metrics, ErrorStats, MetricsReport};
pub use series::{interpolate_missing, load_csv, parse_csv, RawSeries, DEFAULT_STEPS_PER_DAY};
pub use synth::{synth_generate, SynthData, SynthMeta, SynthSpec};
