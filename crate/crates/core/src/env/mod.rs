//! Self-contained search site: corpus, BM25 ranking, rendered pages and
//! the command consumer that plays the browser's role.

pub mod bm25;
pub mod browser;
pub mod corpus;
pub mod render;
pub mod serp;

pub use bm25::{bm25_score, idf, Bm25Params};
pub use browser::{apply_command, EnvError, EnvState, PageKind as SitePage, PageSnapshot, Transition};
pub use corpus::{ingest_corpus, CorpusFormat, CorpusIndex, Document, IngestError, Posting};
pub use render::{render_page, theme_ids, Control, RenderError, RenderedPage, THEME_CARDS, THEME_CLASSIC};
pub use serp::{execute_query, score_documents, Serp, SerpResult, DEFAULT_PAGE_SIZE, SNIPPET_MAX_CHARS};
