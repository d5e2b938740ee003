//! Business Model Radar to BPMN collaboration, with cost-benefit KPI tracking.
//!
//! The pipeline has three stages:
//!
//! 1. describe the business model as a [`bmr::BusinessModelRadar`];
//! 2. [`transform::transform`] it into a [`bpmn::CollaborationModel`] with one
//!    pool per actor and one task per cost, activity, and benefit;
//! 3. annotate tasks with KPI formulas, [`kpi::evaluate`] them, and aggregate
//!    per-actor totals with [`report::full_report`].

pub mod bmr;
pub mod bpmn;
pub mod cli;
pub mod kpi;
pub mod project;
pub mod report;
pub mod service;
pub mod transform;
pub mod validation;
