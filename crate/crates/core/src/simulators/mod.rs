//! Rule- and probability-based action generators.

pub mod click_model;
pub mod clicks;
pub mod query;
pub mod registry;
pub mod stop;

pub use click_model::{
    extract_impressions, fit_click_model, FitError, FittedClickModel, Impression, ImpressionSet,
    Normalization,
};
pub use clicks::{decide_clicks, AttractivenessMode, ClickError, ClickModel, ClickModelParams};
pub use query::{generate_query, QueryError, QueryStrategy};
pub use registry::{ids, ComponentInfo, ComponentKind, ComponentRef, Registry, UnknownComponent};
pub use stop::{decide_stop, stop_reason, StopRule};
