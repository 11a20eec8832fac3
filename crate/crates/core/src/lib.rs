pub mod agent;
pub mod library;
pub mod pipeline;
pub mod rag;
pub mod render;
pub mod review;
pub mod subprocess;
