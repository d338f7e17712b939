use std::collections::BTreeSet;

use thiserror::Error;

use super::{count_components, ApplicationGraph, ResourceGraph};

/// A violated model invariant. Validation collects all of them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty {0}: at least one entry is required")]
    Empty(&'static str),
    #[error("{kind} id {id} at position {position}: ids must be unique and contiguous from 0")]
    BadId { kind: &'static str, id: usize, position: usize },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: usize },
    #[error("negative demand: component {component} field {field} = {value}")]
    NegativeDemand { component: usize, field: &'static str, value: f64 },
    #[error("non-positive deadline: component {component} ddl = {value}")]
    NonPositiveDeadline { component: usize, value: f64 },
    #[error("dangling endpoint: {kind} {index} references {kind_of_endpoint} {endpoint} which does not exist")]
    DanglingEndpoint { kind: &'static str, index: usize, kind_of_endpoint: &'static str, endpoint: usize },
    #[error("self-loop: {kind} {index} joins {endpoint} to itself")]
    SelfLoop { kind: &'static str, index: usize, endpoint: usize },
    #[error("duplicate {kind} between {a} and {b}")]
    DuplicateEdge { kind: &'static str, a: usize, b: usize },
    #[error("invalid {kind} {index}: {field} = {value} ({rule})")]
    InvalidAttribute { kind: &'static str, index: usize, field: &'static str, value: f64, rule: &'static str },
    #[error("negative capacity: node {node} field {field} = {value}")]
    NegativeCapacity { node: usize, field: &'static str, value: f64 },
    #[error("zero speed: node {node} has speed {value}, must be > 0")]
    ZeroSpeed { node: usize, value: f64 },
    #[error("disconnected {0}")]
    Disconnected(&'static str),
}

fn check_ids(kind: &'static str, ids: impl Iterator<Item = usize>, errors: &mut Vec<ModelError>) {
    let mut seen = BTreeSet::new();
    for (position, id) in ids.enumerate() {
        if !seen.insert(id) {
            errors.push(ModelError::DuplicateId { kind, id });
        } else if id != position {
            errors.push(ModelError::BadId { kind, id, position });
        }
    }
}

/// Checks every [`ApplicationGraph`] invariant; returns all violations.
pub fn validate_application(app: &ApplicationGraph) -> Result<(), Vec<ModelError>> {
    let mut errors = Vec::new();
    let n = app.len();
    if n == 0 {
        errors.push(ModelError::Empty("application"));
    }
    check_ids("component", app.components().iter().map(|c| c.id), &mut errors);
    for (i, c) in app.components().iter().enumerate() {
        for (field, value) in [("cpu", c.cpu), ("gpu", c.gpu), ("ram", c.ram), ("stor", c.stor), ("work", c.work)] {
            if value < 0.0 || !value.is_finite() {
                errors.push(ModelError::NegativeDemand { component: i, field, value });
            }
        }
        if c.ddl <= 0.0 || !c.ddl.is_finite() {
            errors.push(ModelError::NonPositiveDeadline { component: i, value: c.ddl });
        }
    }
    let mut pairs = BTreeSet::new();
    for (i, e) in app.edges().iter().enumerate() {
        for endpoint in [e.a, e.b] {
            if endpoint >= n {
                errors.push(ModelError::DanglingEndpoint { kind: "edge", index: i, kind_of_endpoint: "component", endpoint });
            }
        }
        if e.a == e.b {
            errors.push(ModelError::SelfLoop { kind: "edge", index: i, endpoint: e.a });
        }
        if !pairs.insert((e.a.min(e.b), e.a.max(e.b))) {
            errors.push(ModelError::DuplicateEdge { kind: "edge", a: e.a.min(e.b), b: e.a.max(e.b) });
        }
        if e.max_latency <= 0.0 || !e.max_latency.is_finite() {
            errors.push(ModelError::InvalidAttribute {
                kind: "edge",
                index: i,
                field: "max_latency",
                value: e.max_latency,
                rule: "must be > 0",
            });
        }
        if e.msg_size < 0.0 || !e.msg_size.is_finite() {
            errors.push(ModelError::InvalidAttribute {
                kind: "edge",
                index: i,
                field: "msg_size",
                value: e.msg_size,
                rule: "must be >= 0",
            });
        }
        if e.min_bandwidth <= 0.0 || !e.min_bandwidth.is_finite() {
            errors.push(ModelError::InvalidAttribute {
                kind: "edge",
                index: i,
                field: "min_bandwidth",
                value: e.min_bandwidth,
                rule: "must be > 0",
            });
        }
    }
    if n > 1 && count_components(n, |_| true, |c| app.incident(c).iter().map(|&(j, _)| j).collect()) > 1 {
        errors.push(ModelError::Disconnected("application graph"));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Checks every [`ResourceGraph`] invariant; returns all violations.
pub fn validate_resources(res: &ResourceGraph) -> Result<(), Vec<ModelError>> {
    let mut errors = Vec::new();
    let n = res.len();
    if n == 0 {
        errors.push(ModelError::Empty("resource graph"));
    }
    check_ids("node", res.nodes().iter().map(|v| v.id), &mut errors);
    for (i, v) in res.nodes().iter().enumerate() {
        for (field, value) in [("cpu", v.cpu), ("gpu", v.gpu), ("ram", v.ram), ("stor", v.stor)] {
            if value < 0.0 || !value.is_finite() {
                errors.push(ModelError::NegativeCapacity { node: i, field, value });
            }
        }
        if v.pt < 0.0 || !v.pt.is_finite() {
            errors.push(ModelError::InvalidAttribute { kind: "node", index: i, field: "pt", value: v.pt, rule: "must be >= 0" });
        }
        if v.speed <= 0.0 || !v.speed.is_finite() {
            errors.push(ModelError::ZeroSpeed { node: i, value: v.speed });
        }
    }
    let mut pairs = BTreeSet::new();
    for (i, l) in res.links().iter().enumerate() {
        for endpoint in [l.a, l.b] {
            if endpoint >= n {
                errors.push(ModelError::DanglingEndpoint { kind: "link", index: i, kind_of_endpoint: "node", endpoint });
            }
        }
        if l.a == l.b {
            errors.push(ModelError::SelfLoop { kind: "link", index: i, endpoint: l.a });
        }
        if !pairs.insert((l.a.min(l.b), l.a.max(l.b))) {
            errors.push(ModelError::DuplicateEdge { kind: "link", a: l.a.min(l.b), b: l.a.max(l.b) });
        }
        if l.latency < 0.0 || !l.latency.is_finite() {
            errors.push(ModelError::InvalidAttribute { kind: "link", index: i, field: "latency", value: l.latency, rule: "must be >= 0" });
        }
        if l.bandwidth <= 0.0 || !l.bandwidth.is_finite() {
            errors.push(ModelError::InvalidAttribute {
                kind: "link",
                index: i,
                field: "bandwidth",
                value: l.bandwidth,
                rule: "must be > 0",
            });
        }
    }
    let available = |v: usize| res.node(v).aval;
    if count_components(n, available, |v| res.incident(v).iter().map(|&(w, _)| w).collect()) > 1 {
        errors.push(ModelError::Disconnected("available resource subgraph"));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
