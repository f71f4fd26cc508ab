pub mod catdsl;
pub mod checker;
pub mod corpus;
pub mod events;
pub mod experiment;
pub mod frontend;
pub mod models;
pub mod oracle;
pub mod relalg;
