pub mod agents;
pub mod delivery;
pub mod engine;
pub mod extract;
pub mod fallback;
pub mod intake;
pub mod nodes;
pub mod pipeline;
pub mod registry;
pub mod report;
pub mod setup;
