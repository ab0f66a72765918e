//! Command line front end: dataset files, experiment execution, reports.

pub mod dataset;
pub mod gen;
pub mod report;
pub mod run;
